use serde::Serialize;

use super::drift::ito_drift;
use super::rng::PathRng;
use super::EstimateError;
use crate::domain::Domain;
use crate::expr::{CompiledExpr, Expr};
use crate::problem::Problem;

const EXIT_BISECTIONS: usize = 12;
const PROJECTION_ITERS: usize = 50;
const BRIDGE_STREAM: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PathConfig {
    pub dt: f64,
    /// `None` selects `50·diam²` from the domain's bounding box.
    pub t_max: Option<f64>,
    pub seed: u64,
    pub bridge: bool,
    pub tol_b: f64,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            dt: 1e-4,
            t_max: None,
            seed: 0,
            bridge: false,
            tol_b: 1e-10,
        }
    }
}

/// One path's outcome.
#[derive(Debug, Clone, Serialize)]
pub struct ExitRecord {
    pub exited: bool,
    /// False when the state became non-finite.
    pub valid: bool,
    pub tau: f64,
    pub exit_point: Vec<f64>,
    /// `exp(∫₀^τ c)`.
    pub weight: f64,
    /// `∫₀^τ f·W dt`.
    pub f_integral: f64,
    /// `0 < W <= 1` and `W` nonincreasing at every step.
    pub weight_monotone: bool,
    pub steps: u64,
}

impl ExitRecord {
    /// Feynman–Kac sample `g(exit)·W(τ) − ∫f·W`.
    pub fn sample(&self, g: f64) -> f64 {
        g * self.weight - self.f_integral
    }
}

fn compile(comps: &[Expr]) -> Vec<CompiledExpr> {
    comps.iter().map(Expr::compile).collect()
}

/// Compiled form of a problem for path simulation.
#[derive(Debug, Clone)]
pub struct Simulator {
    dim: usize,
    drift: Vec<CompiledExpr>,
    /// `√2·Xᵢ`, one entry per noise field.
    diffusion: Vec<Vec<CompiledExpr>>,
    c: CompiledExpr,
    f: CompiledExpr,
    g: CompiledExpr,
    domain: Domain,
}

impl Simulator {
    pub fn new(problem: &Problem) -> Result<Simulator, EstimateError> {
        let domain = Domain::new(&problem.phi, problem.dim, problem.bbox.as_deref())?;
        Ok(Simulator::with_domain(problem, domain))
    }

    pub fn with_domain(problem: &Problem, domain: Domain) -> Simulator {
        let sqrt2 = std::f64::consts::SQRT_2;
        Simulator {
            dim: problem.dim,
            drift: compile(ito_drift(&problem.fields).components()),
            diffusion: problem
                .noise()
                .iter()
                .map(|x| compile(x.scaled(sqrt2).components()))
                .collect(),
            c: problem.c.compile(),
            f: problem.f.compile(),
            g: problem.g.compile(),
            domain,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn g(&self, x: &[f64]) -> f64 {
        self.g.eval(x)
    }

    /// Resolved `T_max` for `cfg`.
    pub fn t_max(&self, cfg: &PathConfig) -> f64 {
        cfg.t_max
            .unwrap_or_else(|| 50.0 * self.domain.bbox().diameter().powi(2))
    }

    pub fn validate(&self, cfg: &PathConfig) -> Result<(), EstimateError> {
        let t_max = self.t_max(cfg);
        if !(cfg.dt > 0.0) || !cfg.dt.is_finite() {
            return Err(EstimateError::Config(format!("dt must be positive, got {}", cfg.dt)));
        }
        if !(t_max >= 100.0 * cfg.dt) {
            return Err(EstimateError::Config(format!(
                "t_max = {t_max} must be at least 100 dt = {}",
                100.0 * cfg.dt
            )));
        }
        if !(cfg.tol_b > 0.0) {
            return Err(EstimateError::Config(format!(
                "tol_b must be positive, got {}",
                cfg.tol_b
            )));
        }
        Ok(())
    }

    pub fn check_start(&self, x: &[f64]) -> Result<(), EstimateError> {
        if x.len() != self.dim {
            return Err(EstimateError::Dimension {
                expected: self.dim,
                found: x.len(),
            });
        }
        if !self.domain.contains(x) {
            return Err(EstimateError::OutsideDomain { point: x.to_vec() });
        }
        Ok(())
    }

    /// Euler–Maruyama path from `x` until it leaves `D` or `T_max` passes.
    /// Randomness comes from stream `path_index` under `key`.
    pub fn simulate_to_exit(&self, x: &[f64], cfg: &PathConfig, key: u64, path_index: u64) -> ExitRecord {
        let d = self.dim;
        let dt = cfg.dt;
        let sqrt_dt = dt.sqrt();
        let max_steps = (self.t_max(cfg) / dt).ceil() as u64;
        let mut rng = PathRng::new(key, path_index);
        // bridge draws use a sibling stream so the Gaussian increments are
        // the same with and without the correction
        let mut bridge_rng = PathRng::new(key, path_index | BRIDGE_STREAM);

        let mut x0 = x.to_vec();
        let mut x1 = vec![0.0; d];
        let mut incr = vec![0.0; d];
        let mut c0 = self.c.eval(&x0);
        let mut int_c = 0.0;
        let mut w0 = 1.0;
        let mut fw0 = self.f.eval(&x0);
        let mut f_int = 0.0;
        let mut phi0 = self.domain.phi(&x0);
        let mut monotone = true;
        let mut t = 0.0;

        let record =
            |exited: bool, valid: bool, tau: f64, p: Vec<f64>, w: f64, fi: f64, mono: bool, steps: u64| ExitRecord {
                exited,
                valid,
                tau,
                exit_point: p,
                weight: w,
                f_integral: fi,
                weight_monotone: mono,
                steps,
            };

        for step in 0..max_steps {
            for (i, b) in self.drift.iter().enumerate() {
                incr[i] = b.eval(&x0) * dt;
            }
            for field in &self.diffusion {
                let z = rng.normal() * sqrt_dt;
                for (i, s) in field.iter().enumerate() {
                    incr[i] += s.eval(&x0) * z;
                }
            }
            for i in 0..d {
                x1[i] = x0[i] + incr[i];
            }
            let bridge_u = if cfg.bridge { bridge_rng.uniform() } else { 1.0 };
            let phi1 = self.domain.phi(&x1);
            if !phi1.is_finite() || x1.iter().any(|v| !v.is_finite()) {
                return record(false, false, t, x0, w0, f_int, monotone, step);
            }

            let crossing = if phi1 <= 0.0 {
                Some(self.crossing_fraction(&x0, &x1))
            } else if cfg.bridge && bridge_u < self.bridge_probability(&x0, &x1, phi0, phi1, dt) {
                Some(0.5)
            } else {
                None
            };

            if let Some(theta) = crossing {
                let interp: Vec<f64> = (0..d).map(|i| x0[i] + theta * (x1[i] - x0[i])).collect();
                let exit = self.project_exit(&interp, &x0, &x1, cfg.tol_b);
                let h = theta * dt;
                let c1 = self.c.eval(&exit);
                let int_c1 = int_c + 0.5 * (c0 + c1) * h;
                let w1 = int_c1.exp();
                let fw1 = self.f.eval(&exit) * w1;
                let f_int1 = f_int + 0.5 * (fw0 + fw1) * h;
                monotone &= w1 <= w0 && w1 > 0.0 && w1 <= 1.0;
                let valid = w1.is_finite() && f_int1.is_finite();
                return record(true, valid, t + h, exit, w1, f_int1, monotone, step + 1);
            }

            let c1 = self.c.eval(&x1);
            int_c += 0.5 * (c0 + c1) * dt;
            let w1 = int_c.exp();
            let fw1 = self.f.eval(&x1) * w1;
            f_int += 0.5 * (fw0 + fw1) * dt;
            monotone &= w1 <= w0 && w1 > 0.0 && w1 <= 1.0;
            std::mem::swap(&mut x0, &mut x1);
            c0 = c1;
            w0 = w1;
            fw0 = fw1;
            phi0 = phi1;
            t = (step + 1) as f64 * dt;
        }
        record(false, true, t, x0, w0, f_int, monotone, max_steps)
    }

    /// Fraction of the step at which the linear interpolant crosses `φ = 0`.
    fn crossing_fraction(&self, x0: &[f64], x1: &[f64]) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut z = x0.to_vec();
        for _ in 0..EXIT_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            for i in 0..z.len() {
                z[i] = x0[i] + mid * (x1[i] - x0[i]);
            }
            if self.domain.phi(&z) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Newton projection of the interpolated crossing onto `φ = 0`, with a
    /// bisection fallback along the step.
    fn project_exit(&self, interp: &[f64], x0: &[f64], x1: &[f64], tol: f64) -> Vec<f64> {
        if let Some(p) = self.domain.project(interp, tol, PROJECTION_ITERS) {
            return p;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut z = x0.to_vec();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            for i in 0..z.len() {
                z[i] = x0[i] + mid * (x1[i] - x0[i]);
            }
            let v = self.domain.phi(&z);
            if v.abs() <= tol {
                break;
            }
            if v > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        z
    }

    /// Brownian-bridge probability of an unseen crossing between two
    /// interior states, using distances `φ/|∇φ|` and the normal diffusion
    /// rate at the step start.
    fn bridge_probability(&self, x0: &[f64], x1: &[f64], phi0: f64, phi1: f64, dt: f64) -> f64 {
        let Some(n) = self.domain.inward_normal(x0) else {
            return 0.0;
        };
        let g0 = crate::linalg::norm(&self.domain.gradient(x0));
        let g1 = crate::linalg::norm(&self.domain.gradient(x1));
        let (d0, d1) = (phi0 / g0, phi1 / g1);
        let sigma2: f64 = self
            .diffusion
            .iter()
            .map(|field| {
                let s: f64 = field.iter().zip(&n).map(|(e, ni)| e.eval(x0) * ni).sum();
                s * s
            })
            .sum();
        if !(sigma2 > 0.0) || !(d0 > 0.0) || !(d1 > 0.0) {
            return 0.0;
        }
        (-2.0 * d0 * d1 / (sigma2 * dt)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::parse_problem;
    use crate::sde_mc::rng::stream_key;

    fn disk_problem(fields: &str, c: &str, f: &str, g: &str) -> Problem {
        let text = format!(
            "dim = 2\n[fields]\n{fields}\n[coeff]\nc = \"{c}\"\n[data]\nf = \"{f}\"\ng = \"{g}\"\n[domain]\nphi = \"1 - x^2 - y^2\"\n"
        );
        parse_problem(&text).unwrap()
    }

    #[test]
    fn pure_drift_exits_at_unit_time() {
        let p = disk_problem("X0 = \"1\", \"0\"\nX1 = \"0\", \"0\"", "0", "1", "0");
        let sim = Simulator::new(&p).unwrap();
        let cfg = PathConfig {
            dt: 1e-3,
            ..PathConfig::default()
        };
        let r = sim.simulate_to_exit(&[0.0, 0.0], &cfg, stream_key(0, 0), 0);
        assert!(r.exited && r.valid);
        assert!((r.tau - 1.0).abs() <= 2.0 * cfg.dt, "{}", r.tau);
        assert!((r.exit_point[0] - 1.0).abs() < 1e-9 && r.exit_point[1].abs() < 1e-12);
        // f = 1 and c = 0: the f-integral is the exit time
        assert!((r.f_integral - r.tau).abs() < 1e-12);
    }

    #[test]
    fn constant_killing_weight() {
        let p = disk_problem(
            "X0 = \"0\", \"0\"\nX1 = \"1\", \"0\"\nX2 = \"0\", \"1\"",
            "-1",
            "0",
            "1",
        );
        let sim = Simulator::new(&p).unwrap();
        let cfg = PathConfig::default();
        for i in 0..20 {
            let r = sim.simulate_to_exit(&[0.2, 0.1], &cfg, stream_key(3, 0), i);
            assert!(r.exited);
            assert!((r.weight - (-r.tau).exp()).abs() < 1e-12);
            assert!(r.weight_monotone && r.weight > 0.0 && r.weight <= 1.0);
            assert!(sim.domain().phi(&r.exit_point).abs() <= cfg.tol_b);
        }
    }

    #[test]
    fn non_finite_state_is_invalid() {
        let p = disk_problem("X0 = \"1/x\", \"0\"\nX1 = \"0\", \"0\"", "0", "0", "0");
        let sim = Simulator::new(&p).unwrap();
        let r = sim.simulate_to_exit(&[0.0, 0.0], &PathConfig::default(), 0, 0);
        assert!(!r.valid);
    }

    #[test]
    fn stuck_path_is_unexited() {
        let p = disk_problem("X0 = \"0\", \"0\"\nX1 = \"0\", \"0\"", "0", "0", "0");
        let sim = Simulator::new(&p).unwrap();
        let cfg = PathConfig {
            dt: 0.01,
            t_max: Some(5.0),
            ..PathConfig::default()
        };
        let r = sim.simulate_to_exit(&[0.0, 0.0], &cfg, 0, 0);
        assert!(!r.exited && r.valid);
        assert_eq!(r.steps, 500);
    }

    #[test]
    fn bridge_only_shortens_paths() {
        let p = disk_problem("X0 = \"0\", \"0\"\nX1 = \"1\", \"0\"\nX2 = \"0\", \"1\"", "0", "1", "0");
        let sim = Simulator::new(&p).unwrap();
        let plain = PathConfig {
            dt: 1e-3,
            ..PathConfig::default()
        };
        let bridged = PathConfig { bridge: true, ..plain };
        let mut shorter = 0;
        for i in 0..200 {
            let a = sim.simulate_to_exit(&[0.0, 0.0], &plain, 11, i);
            let b = sim.simulate_to_exit(&[0.0, 0.0], &bridged, 11, i);
            assert!(b.tau <= a.tau);
            if b.tau < a.tau {
                shorter += 1;
            }
        }
        assert!(shorter > 0);
    }

    #[test]
    fn config_validation() {
        let p = disk_problem("X0 = \"0\", \"0\"\nX1 = \"1\", \"0\"", "0", "0", "0");
        let sim = Simulator::new(&p).unwrap();
        assert!(sim.validate(&PathConfig::default()).is_ok());
        let bad = PathConfig {
            dt: 0.1,
            t_max: Some(5.0),
            ..PathConfig::default()
        };
        assert!(sim.validate(&bad).is_err());
        assert!(sim.check_start(&[2.0, 0.0]).is_err());
    }
}
