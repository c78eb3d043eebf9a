use serde::Serialize;

use super::field::VectorField;
use super::subcritical::Hypersurface;
use super::AlgebraError;
use crate::expr::{CompiledExpr, Expr};
use crate::linalg;

/// Threshold on `Σᵢ⟨Xᵢ, e_k⟩²` for the coordinate ellipticity check.
pub const THM2_B_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct NoncharPoint {
    pub point: Vec<f64>,
    pub max_inner: f64,
    /// 1-based index of the most transversal noise field.
    pub best_field: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct NoncharReport {
    pub theta: f64,
    pub points: Vec<NoncharPoint>,
}

impl NoncharReport {
    pub fn pass(&self) -> bool {
        self.points.iter().all(|p| p.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &NoncharPoint> {
        self.points.iter().filter(|p| !p.pass)
    }

    /// Point with the smallest transversality.
    pub fn worst(&self) -> Option<&NoncharPoint> {
        self.points.iter().min_by(|a, b| a.max_inner.total_cmp(&b.max_inner))
    }
}

/// A point of `S` passes when some noise field `X1..Xn` has
/// `|⟨Xᵢ, ν⟩| >= theta`.
pub fn noncharacteristic_check(
    noise: &[VectorField],
    surface: &Hypersurface,
    points: &[Vec<f64>],
    theta: f64,
) -> Result<NoncharReport, AlgebraError> {
    let compiled: Vec<Vec<CompiledExpr>> = noise
        .iter()
        .map(|f| f.components().iter().map(Expr::compile).collect())
        .collect();
    let mut out = Vec::with_capacity(points.len());
    for x in points {
        if x.len() != surface.dim() {
            return Err(AlgebraError::DimensionMismatch {
                expected: surface.dim(),
                found: x.len(),
            });
        }
        surface.check_on_surface(x)?;
        let nu = surface.normal(x)?;
        let mut best = (0, f64::NEG_INFINITY);
        for (i, field) in compiled.iter().enumerate() {
            let v: Vec<f64> = field.iter().map(|c| c.eval(x)).collect();
            let inner = linalg::dot(&v, &nu).abs();
            // NaN never wins, so a non-finite field cannot certify transversality
            if inner > best.1 {
                best = (i + 1, inner);
            }
        }
        let max_inner = if best.1.is_finite() { best.1 } else { 0.0 };
        out.push(NoncharPoint {
            point: x.clone(),
            max_inner,
            best_field: best.0,
            pass: max_inner >= theta,
        });
    }
    Ok(NoncharReport { theta, points: out })
}

#[derive(Debug, Clone, Serialize)]
pub struct Thm2Report {
    /// `c <= 0` on all samples.
    pub c_pass: bool,
    pub c_max: f64,
    pub c_worst_point: Option<Vec<f64>>,
    /// `min over samples of Σᵢ⟨Xᵢ, e_k⟩²` for each coordinate `k`.
    pub a_est: Vec<f64>,
    /// 1-based coordinate with the largest `a_est`.
    pub best_k: usize,
    pub b_pass: bool,
}

/// Sign condition on `c` and uniform ellipticity in some coordinate direction.
pub fn thm2_checks(noise: &[VectorField], c: &Expr, points: &[Vec<f64>]) -> Thm2Report {
    let dim = noise
        .first()
        .map_or_else(|| points.first().map_or(0, Vec::len), VectorField::dim);
    let c_compiled = c.compile();
    let compiled: Vec<Vec<CompiledExpr>> = noise
        .iter()
        .map(|f| f.components().iter().map(Expr::compile).collect())
        .collect();
    let mut c_max = f64::NEG_INFINITY;
    let mut c_worst_point = None;
    let mut c_finite = true;
    let mut a_est = vec![f64::INFINITY; dim];
    for x in points {
        let cv = c_compiled.eval(x);
        if !cv.is_finite() {
            c_finite = false;
        }
        if cv > c_max || (cv.is_nan() && c_worst_point.is_none()) {
            c_max = cv;
            c_worst_point = Some(x.clone());
        }
        for (k, slot) in a_est.iter_mut().enumerate() {
            let sum: f64 = compiled.iter().map(|f| f[k].eval(x).powi(2)).sum();
            let sum = if sum.is_nan() { 0.0 } else { sum };
            *slot = slot.min(sum);
        }
    }
    if points.is_empty() {
        a_est.iter_mut().for_each(|a| *a = 0.0);
    }
    let (best_k, best_a) = a_est.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (k, &a)| if a > acc.1 { (k, a) } else { acc },
    );
    Thm2Report {
        c_pass: c_finite && c_max <= 0.0,
        c_max,
        c_worst_point,
        best_k: best_k + 1,
        b_pass: best_a > THM2_B_THRESHOLD,
        a_est,
    }
}
