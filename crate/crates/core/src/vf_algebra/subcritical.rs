use serde::Serialize;

use super::lambda::BracketSet;
use super::AlgebraError;
use crate::expr::{CompiledExpr, Expr};
use crate::linalg;

/// Smallest admissible gradient norm of a level-set function on its zero set.
pub const MIN_GRADIENT: f64 = 1e-8;
/// Largest `|ψ|` accepted for a point said to lie on `S`.
pub const ON_SURFACE_TOL: f64 = 1e-10;

/// `S = {ψ = 0}` with its symbolic gradient.
#[derive(Debug, Clone)]
pub struct Hypersurface {
    psi: Expr,
    value: CompiledExpr,
    gradient: Vec<CompiledExpr>,
}

impl Hypersurface {
    pub fn new(psi: Expr, dim: usize) -> Hypersurface {
        let gradient = psi.gradient(dim).iter().map(Expr::compile).collect();
        Hypersurface {
            value: psi.compile(),
            psi,
            gradient,
        }
    }

    pub fn expr(&self) -> &Expr {
        &self.psi
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.value.eval(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.gradient.iter().map(|g| g.eval(x)).collect()
    }

    /// Unit normal `∇ψ/|∇ψ|`.
    pub fn normal(&self, x: &[f64]) -> Result<Vec<f64>, AlgebraError> {
        let g = self.gradient(x);
        let n = linalg::norm(&g);
        if !(n >= MIN_GRADIENT) || !n.is_finite() {
            return Err(AlgebraError::DegenerateLevelSet { point: x.to_vec() });
        }
        Ok(g.iter().map(|v| v / n).collect())
    }

    /// First-order distance estimate `|ψ|/|∇ψ|`.
    pub fn distance_estimate(&self, x: &[f64]) -> f64 {
        self.value(x).abs() / linalg::norm(&self.gradient(x))
    }

    /// Newton iteration along the gradient onto `{ψ = 0}`.
    pub fn project(&self, x: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>, AlgebraError> {
        let mut y = x.to_vec();
        for _ in 0..max_iter {
            let v = self.value(&y);
            if v.abs() <= tol {
                return Ok(y);
            }
            let g = self.gradient(&y);
            let gg = linalg::dot(&g, &g);
            if !(gg.sqrt() >= MIN_GRADIENT) || !gg.is_finite() {
                return Err(AlgebraError::DegenerateLevelSet { point: y });
            }
            for (yi, gi) in y.iter_mut().zip(&g) {
                *yi -= v * gi / gg;
            }
        }
        let residual = self.value(&y).abs();
        if residual <= tol {
            Ok(y)
        } else {
            Err(AlgebraError::NotOnSurface { point: y, residual })
        }
    }

    pub(crate) fn check_on_surface(&self, x: &[f64]) -> Result<(), AlgebraError> {
        let residual = self.value(x).abs();
        if !(residual <= ON_SURFACE_TOL) {
            return Err(AlgebraError::NotOnSurface {
                point: x.to_vec(),
                residual,
            });
        }
        Ok(())
    }
}

/// Log-spaced distances `ρ ∈ [rho_min, rho_max]` along the normal at each base point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FitSampling {
    pub rho_min: f64,
    pub rho_max: f64,
    pub count: usize,
}

impl Default for FitSampling {
    fn default() -> Self {
        FitSampling {
            rho_min: 1e-4,
            rho_max: 1e-1,
            count: 31,
        }
    }
}

impl FitSampling {
    pub fn distances(&self) -> Vec<f64> {
        let rho_min = self.rho_min.max(1e-4);
        if self.count <= 1 {
            return vec![rho_min];
        }
        let (a, b) = (rho_min.ln(), self.rho_max.ln());
        (0..self.count)
            .map(|j| (a + (b - a) * j as f64 / (self.count - 1) as f64).exp())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FitConfig {
    /// Samples with `λ` at or above this are nondegenerate.
    pub floor: f64,
    pub margin: f64,
    pub min_samples: usize,
    /// Relative tolerance between constructed and estimated distance.
    pub curvature_tol: f64,
    /// Values below this are dropped from the regression.
    pub underflow: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            floor: 0.5,
            margin: 0.05,
            min_samples: 4,
            curvature_tol: 0.05,
            underflow: 1e-300,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Pass,
    /// No sampled point was degenerate.
    TrivialPass,
    Fail,
    /// Too few usable samples to fit.
    Inconclusive,
}

impl FitStatus {
    pub fn passed(self) -> bool {
        matches!(self, FitStatus::Pass | FitStatus::TrivialPass)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FitStatus::Pass => "pass",
            FitStatus::TrivialPass => "trivial_pass",
            FitStatus::Fail => "fail",
            FitStatus::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SubcriticalFit {
    pub k: usize,
    /// Distances and `log λ` of the samples used in the regression.
    pub rho: Vec<f64>,
    pub log_lambda: Vec<f64>,
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub status: FitStatus,
    pub n_sampled: usize,
    pub n_degenerate: usize,
    pub n_underflow: usize,
    pub n_curvature: usize,
    pub n_outside: usize,
    pub n_nonfinite: usize,
}

/// Domain membership predicate for sample points.
pub type Inside<'a> = dyn Fn(&[f64]) -> bool + Sync + 'a;

/// Fit `p` in `λ^(k)(y) ≈ exp(-ρ(y,S)^p)` from samples `y = s ± ρν(s)`.
pub fn subcritical_fit(
    set: &BracketSet,
    k: usize,
    surface: &Hypersurface,
    bases: &[Vec<f64>],
    sampling: &FitSampling,
    cfg: &FitConfig,
    inside: Option<&Inside<'_>>,
) -> Result<SubcriticalFit, AlgebraError> {
    if k > set.k_max() {
        return Err(AlgebraError::BracketOrderTooLarge { k, max: set.k_max() });
    }
    let lambda = |y: &[f64]| set.lambda(k, y).ok();
    subcritical_fit_with(&lambda, k, surface, bases, sampling, cfg, inside)
}

/// As [`subcritical_fit`] with `λ` supplied by the caller; `None` marks a
/// failed evaluation.
pub fn subcritical_fit_with(
    lambda: &(dyn Fn(&[f64]) -> Option<f64> + Sync),
    k: usize,
    surface: &Hypersurface,
    bases: &[Vec<f64>],
    sampling: &FitSampling,
    cfg: &FitConfig,
    inside: Option<&Inside<'_>>,
) -> Result<SubcriticalFit, AlgebraError> {
    let mut fit = SubcriticalFit {
        k,
        rho: Vec::new(),
        log_lambda: Vec::new(),
        slope: None,
        slope_stderr: None,
        status: FitStatus::Inconclusive,
        n_sampled: 0,
        n_degenerate: 0,
        n_underflow: 0,
        n_curvature: 0,
        n_outside: 0,
        n_nonfinite: 0,
    };
    let distances = sampling.distances();
    for s in bases {
        surface.check_on_surface(s)?;
        let nu = surface.normal(s)?;
        for &rho in &distances {
            let along = |sign: f64| -> Vec<f64> { s.iter().zip(&nu).map(|(a, n)| a + sign * rho * n).collect() };
            let y = match inside {
                None => along(1.0),
                Some(f) => {
                    let plus = along(1.0);
                    if f(&plus) {
                        plus
                    } else {
                        let minus = along(-1.0);
                        if !f(&minus) {
                            fit.n_outside += 1;
                            continue;
                        }
                        minus
                    }
                }
            };
            let estimate = surface.distance_estimate(&y);
            if !((estimate - rho).abs() <= cfg.curvature_tol * rho) {
                fit.n_curvature += 1;
                continue;
            }
            fit.n_sampled += 1;
            let Some(lam) = lambda(&y).filter(|v| v.is_finite()) else {
                fit.n_nonfinite += 1;
                continue;
            };
            if lam >= cfg.floor {
                continue;
            }
            fit.n_degenerate += 1;
            if lam < cfg.underflow {
                fit.n_underflow += 1;
                continue;
            }
            fit.rho.push(rho);
            fit.log_lambda.push(lam.ln());
        }
    }
    if fit.n_underflow > 0 {
        log::warn!(
            "subcritical fit (k = {k}): dropped {} samples with lambda below {:e}",
            fit.n_underflow,
            cfg.underflow
        );
    }
    if fit.n_degenerate == 0 && fit.n_nonfinite == 0 && fit.n_sampled >= cfg.min_samples {
        fit.status = FitStatus::TrivialPass;
        return Ok(fit);
    }
    if fit.rho.len() < cfg.min_samples.max(3) {
        return Ok(fit);
    }
    let xs: Vec<f64> = fit.rho.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = fit.log_lambda.iter().map(|l| (-l).ln()).collect();
    let (slope, stderr) = ols_slope(&xs, &ys);
    fit.slope = Some(slope);
    fit.slope_stderr = Some(stderr);
    fit.status = if slope + cfg.margin < 0.0 && slope - cfg.margin > -1.0 {
        FitStatus::Pass
    } else {
        FitStatus::Fail
    };
    Ok(fit)
}

/// Least-squares slope and its standard error.
fn ols_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = if xs.len() > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (slope, stderr)
}
