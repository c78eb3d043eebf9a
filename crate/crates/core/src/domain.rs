//! The domain `D = {φ > 0}`: bounding box, sample lattices and projection
//! onto the boundary.

use serde::Serialize;
use thiserror::Error;

use crate::expr::{CompiledExpr, Expr};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("no point with phi > 0 found in [-{0}, {0}]^d; give domain.bbox")]
    Empty(f64),
    #[error("domain reaches the edge of the search window [-{0}, {0}]^d; give domain.bbox")]
    Unbounded(f64),
    #[error("bounding box has {found} axes, expected {expected}")]
    BBoxDimension { expected: usize, found: usize },
}

const SEARCH_HALF_WIDTH: f64 = 10.0;
const SEARCH_NODES: usize = 41;
const MAX_SEARCH_POINTS: usize = 3_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BBox {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn diameter(&self) -> f64 {
        let diag: Vec<f64> = self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).collect();
        linalg::norm(&diag)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }
}

/// Level-set domain with compiled `φ` and `∇φ`.
#[derive(Debug, Clone)]
pub struct Domain {
    phi: CompiledExpr,
    grad: Vec<CompiledExpr>,
    bbox: BBox,
}

impl Domain {
    /// Uses `bbox` when given, otherwise locates `D` by lattice search.
    pub fn new(phi: &Expr, dim: usize, bbox: Option<&[(f64, f64)]>) -> Result<Domain, DomainError> {
        let compiled = phi.compile();
        let grad = phi.gradient(dim).iter().map(Expr::compile).collect();
        let bbox = match bbox {
            Some(b) if b.len() != dim => {
                return Err(DomainError::BBoxDimension {
                    expected: dim,
                    found: b.len(),
                })
            }
            Some(b) => BBox {
                lo: b.iter().map(|p| p.0).collect(),
                hi: b.iter().map(|p| p.1).collect(),
            },
            None => locate(&compiled, dim)?,
        };
        Ok(Domain {
            phi: compiled,
            grad,
            bbox,
        })
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn bbox(&self) -> &BBox {
        &self.bbox
    }

    pub fn phi(&self, x: &[f64]) -> f64 {
        self.phi.eval(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.grad.iter().map(|g| g.eval(x)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.phi(x) > 0.0
    }

    pub fn in_closure(&self, x: &[f64]) -> bool {
        self.phi(x) >= 0.0
    }

    /// Inward unit normal `∇φ/|∇φ|`, or `None` where the gradient vanishes.
    pub fn inward_normal(&self, x: &[f64]) -> Option<Vec<f64>> {
        let g = self.gradient(x);
        let n = linalg::norm(&g);
        (n > 0.0 && n.is_finite()).then(|| g.iter().map(|v| v / n).collect())
    }

    /// Newton steps along `∇φ` onto `{φ = 0}`. `None` on a vanishing
    /// gradient or no convergence.
    pub fn project(&self, x: &[f64], tol: f64, max_iter: usize) -> Option<Vec<f64>> {
        let mut y = x.to_vec();
        for _ in 0..=max_iter {
            let v = self.phi(&y);
            if v.abs() <= tol {
                return Some(y);
            }
            if !v.is_finite() {
                return None;
            }
            let g = self.gradient(&y);
            let gg = linalg::dot(&g, &g);
            if !(gg > 0.0) || !gg.is_finite() {
                return None;
            }
            for (yi, gi) in y.iter_mut().zip(&g) {
                *yi -= v * gi / gg;
            }
        }
        None
    }

    /// Nodes `lo + (hi - lo) j / res`, `j = 0..=res` per axis, lying in the closure.
    pub fn closed_lattice(&self, res: usize) -> Vec<Vec<f64>> {
        let res = res.max(1);
        let axes: Vec<Vec<f64>> = (0..self.dim())
            .map(|a| {
                let (lo, hi) = (self.bbox.lo[a], self.bbox.hi[a]);
                (0..=res).map(|j| lo + (hi - lo) * j as f64 / res as f64).collect()
            })
            .collect();
        product(&axes).into_iter().filter(|x| self.in_closure(x)).collect()
    }

    /// Nodes `lo + (hi - lo) j / (res + 1)`, `j = 1..=res` per axis, lying in `D`.
    pub fn interior_lattice(&self, res: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dim())
            .map(|a| {
                let (lo, hi) = (self.bbox.lo[a], self.bbox.hi[a]);
                (1..=res)
                    .map(|j| lo + (hi - lo) * j as f64 / (res + 1) as f64)
                    .collect()
            })
            .collect();
        product(&axes).into_iter().filter(|x| self.contains(x)).collect()
    }

    /// Boundary points found on lattice edges where `φ` changes sign,
    /// bisected and then projected onto `{φ = 0}`.
    pub fn boundary_samples(&self, res: usize, tol: f64) -> Vec<Vec<f64>> {
        let res = res.max(1);
        let d = self.dim();
        let step: Vec<f64> = (0..d)
            .map(|a| (self.bbox.hi[a] - self.bbox.lo[a]) / res as f64)
            .collect();
        let node = |idx: &[usize]| -> Vec<f64> { (0..d).map(|a| self.bbox.lo[a] + step[a] * idx[a] as f64).collect() };
        let mut out = Vec::new();
        let mut idx = vec![0usize; d];
        loop {
            let x = node(&idx);
            let px = self.phi(&x);
            for a in 0..d {
                if idx[a] == res {
                    continue;
                }
                let mut y = x.clone();
                y[a] += step[a];
                let py = self.phi(&y);
                if !((px > 0.0) ^ (py > 0.0)) {
                    continue;
                }
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..40 {
                    let mid = 0.5 * (lo + hi);
                    let mut z = x.clone();
                    z[a] += mid * step[a];
                    if (self.phi(&z) > 0.0) == (px > 0.0) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let mut z = x.clone();
                z[a] += 0.5 * (lo + hi) * step[a];
                if let Some(p) = self.project(&z, tol, 20) {
                    out.push(p);
                }
            }
            if !advance(&mut idx, res) {
                break;
            }
        }
        out
    }
}

fn advance(idx: &mut [usize], res: usize) -> bool {
    for v in idx.iter_mut().rev() {
        if *v < res {
            *v += 1;
            return true;
        }
        *v = 0;
    }
    false
}

fn product(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

/// Two-pass lattice search for the extent of `{φ > 0}` in the search window.
fn locate(phi: &CompiledExpr, dim: usize) -> Result<BBox, DomainError> {
    let nodes = {
        let mut n = SEARCH_NODES;
        while n > 5 && n.saturating_pow(dim as u32) > MAX_SEARCH_POINTS {
            n -= 2;
        }
        n
    };
    let window = BBox {
        lo: vec![-SEARCH_HALF_WIDTH; dim],
        hi: vec![SEARCH_HALF_WIDTH; dim],
    };
    let (coarse, step) = scan(phi, &window, nodes).ok_or(DomainError::Empty(SEARCH_HALF_WIDTH))?;
    if coarse.lo.iter().any(|&v| v <= -SEARCH_HALF_WIDTH) || coarse.hi.iter().any(|&v| v >= SEARCH_HALF_WIDTH) {
        return Err(DomainError::Unbounded(SEARCH_HALF_WIDTH));
    }
    let coarse = pad(&coarse, &step, 1.0);
    match scan(phi, &coarse, nodes) {
        Some((fine, step)) => Ok(pad(&fine, &step, 1.5)),
        None => Ok(coarse),
    }
}

fn pad(b: &BBox, step: &[f64], factor: f64) -> BBox {
    BBox {
        lo: b.lo.iter().zip(step).map(|(v, h)| v - factor * h).collect(),
        hi: b.hi.iter().zip(step).map(|(v, h)| v + factor * h).collect(),
    }
}

/// Extent of the lattice nodes with `φ > 0`, and the lattice spacing.
fn scan(phi: &CompiledExpr, window: &BBox, nodes: usize) -> Option<(BBox, Vec<f64>)> {
    let dim = window.dim();
    let step: Vec<f64> = (0..dim)
        .map(|a| (window.hi[a] - window.lo[a]) / (nodes - 1) as f64)
        .collect();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    loop {
        for a in 0..dim {
            x[a] = window.lo[a] + step[a] * idx[a] as f64;
        }
        if phi.eval(&x) > 0.0 {
            for a in 0..dim {
                lo[a] = lo[a].min(x[a]);
                hi[a] = hi[a].max(x[a]);
            }
        }
        if !advance(&mut idx, nodes - 1) {
            break;
        }
    }
    (lo[0] <= hi[0]).then_some((BBox { lo, hi }, step))
}
