use rayon::prelude::*;
use serde::Serialize;

use super::path::{ExitRecord, PathConfig, Simulator};
use super::rng::stream_key;
use super::EstimateError;

/// Estimates with a larger share of unexited paths are rejected.
pub const MAX_UNEXITED_FRAC: f64 = 1e-2;

#[derive(Debug, Clone, Serialize)]
pub struct Estimate {
    pub point: Vec<f64>,
    pub value: f64,
    /// Sample standard deviation over `sqrt(n_used)`.
    pub stderr: f64,
    /// Paths simulated.
    pub n_paths: usize,
    /// Paths that exited with finite values and enter the mean.
    pub n_used: usize,
    /// Paths excluded from the mean (no exit by `t_max`, or invalid).
    pub n_unexited: usize,
    /// Excluded paths whose state became non-finite.
    pub n_invalid: usize,
    pub unexited_frac: f64,
    pub mean_tau: f64,
    /// Paths on which `0 < W <= 1`, `W` nonincreasing failed somewhere.
    pub weight_violations: usize,
    pub t_max: f64,
    pub config: PathConfig,
}

/// All `n` paths from `x`, in path-index order.
pub fn simulate_paths(
    sim: &Simulator,
    x: &[f64],
    n: usize,
    cfg: &PathConfig,
    point_index: u64,
) -> Result<Vec<ExitRecord>, EstimateError> {
    sim.validate(cfg)?;
    sim.check_start(x)?;
    let key = stream_key(cfg.seed, point_index);
    Ok((0..n as u64)
        .into_par_iter()
        .map(|i| sim.simulate_to_exit(x, cfg, key, i))
        .collect())
}

pub fn estimate_point(sim: &Simulator, x: &[f64], n: usize, cfg: &PathConfig) -> Result<Estimate, EstimateError> {
    estimate_indexed(sim, x, n, cfg, 0)
}

fn estimate_indexed(
    sim: &Simulator,
    x: &[f64],
    n: usize,
    cfg: &PathConfig,
    point_index: u64,
) -> Result<Estimate, EstimateError> {
    let records = simulate_paths(sim, x, n, cfg, point_index)?;
    let estimate = reduce(sim, x, &records, cfg);
    if estimate.unexited_frac > MAX_UNEXITED_FRAC {
        return Err(EstimateError::TooManyUnexited {
            t_max: estimate.t_max,
            estimate: Box::new(estimate),
        });
    }
    Ok(estimate)
}

/// Sequential reduction in path order, so the result does not depend on
/// how the paths were scheduled.
fn reduce(sim: &Simulator, x: &[f64], records: &[ExitRecord], cfg: &PathConfig) -> Estimate {
    let samples: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.exited && r.valid)
        .map(|r| (r.sample(sim.g(&r.exit_point)), r.tau))
        .filter(|(s, _)| s.is_finite())
        .collect();
    let n_used = samples.len();
    let n_invalid = records.iter().filter(|r| !r.valid).count();
    let n_unexited = records.len() - n_used;
    let (value, stderr, mean_tau) = if n_used == 0 {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        let m = n_used as f64;
        let mean = samples.iter().map(|s| s.0).sum::<f64>() / m;
        let mean_tau = samples.iter().map(|s| s.1).sum::<f64>() / m;
        let var = if n_used > 1 {
            samples.iter().map(|s| (s.0 - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        (mean, (var / m).sqrt(), mean_tau)
    };
    Estimate {
        point: x.to_vec(),
        value,
        stderr,
        n_paths: records.len(),
        n_used,
        n_unexited,
        n_invalid,
        unexited_frac: if records.is_empty() {
            0.0
        } else {
            n_unexited as f64 / records.len() as f64
        },
        mean_tau,
        weight_violations: records.iter().filter(|r| !r.weight_monotone).count(),
        t_max: sim.t_max(cfg),
        config: *cfg,
    }
}

/// Per-point estimates in grid order; point `j` draws from streams keyed by
/// `(seed, j)`.
pub fn estimate_grid(
    sim: &Simulator,
    points: &[Vec<f64>],
    n: usize,
    cfg: &PathConfig,
) -> Vec<Result<Estimate, EstimateError>> {
    points
        .iter()
        .enumerate()
        .map(|(j, x)| estimate_indexed(sim, x, n, cfg, j as u64))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub value: f64,
    pub stderr: f64,
    pub mean_tau: f64,
    pub abs_err: Option<f64>,
}

/// Estimates at `x` for each step size in the (decreasing) list `dts`.
pub fn convergence_study(
    sim: &Simulator,
    x: &[f64],
    dts: &[f64],
    n: usize,
    cfg: &PathConfig,
    reference: Option<f64>,
) -> Result<Vec<ConvergenceRow>, EstimateError> {
    if dts.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(EstimateError::Config("dt list must be strictly decreasing".into()));
    }
    dts.iter()
        .map(|&dt| {
            let est = estimate_point(sim, x, n, &PathConfig { dt, ..*cfg })?;
            Ok(ConvergenceRow {
                dt,
                value: est.value,
                stderr: est.stderr,
                mean_tau: est.mean_tau,
                abs_err: reference.map(|r| (est.value - r).abs()),
            })
        })
        .collect()
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

/// CSV with columns `x1..xd,u_hat,stderr,n_paths,unexited_frac`. Rejected
/// points keep their row with `NaN` value and standard error.
pub fn estimates_csv(dim: usize, rows: &[(Vec<f64>, Result<Estimate, EstimateError>)]) -> String {
    let mut out = String::new();
    let header: Vec<String> = (1..=dim)
        .map(|i| format!("x{i}"))
        .chain(["u_hat", "stderr", "n_paths", "unexited_frac"].map(String::from))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for (point, result) in rows {
        let mut fields: Vec<String> = point.iter().map(|v| num(*v)).collect();
        match result {
            Ok(e) => fields.extend([num(e.value), num(e.stderr), e.n_paths.to_string(), num(e.unexited_frac)]),
            Err(EstimateError::TooManyUnexited { estimate: e, .. }) => fields.extend([
                num(f64::NAN),
                num(f64::NAN),
                e.n_paths.to_string(),
                num(e.unexited_frac),
            ]),
            Err(_) => fields.extend([num(f64::NAN), num(f64::NAN), "0".into(), num(f64::NAN)]),
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("dt,u_hat,stderr,mean_tau,abs_err\n");
    for r in rows {
        let err = r.abs_err.map(num).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            num(r.dt),
            num(r.value),
            num(r.stderr),
            num(r.mean_tau),
            err
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{parse_problem, Problem};

    fn laplace_disk(c: &str, f: &str, g: &str) -> Problem {
        let text = format!(
            "dim = 2\n[fields]\nX0 = \"0\", \"0\"\nX1 = \"1\", \"0\"\nX2 = \"0\", \"1\"\n[coeff]\nc = \"{c}\"\n[data]\nf = \"{f}\"\ng = \"{g}\"\n[domain]\nphi = \"1 - x^2 - y^2\"\n"
        );
        parse_problem(&text).unwrap()
    }

    fn coarse() -> PathConfig {
        PathConfig {
            dt: 1e-3,
            seed: 5,
            ..PathConfig::default()
        }
    }

    #[test]
    fn constant_boundary_data_is_exact() {
        let sim = Simulator::new(&laplace_disk("0", "0", "5")).unwrap();
        let e = estimate_point(&sim, &[0.1, -0.3], 500, &coarse()).unwrap();
        assert_eq!(e.value, 5.0);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.unexited_frac, 0.0);
    }

    #[test]
    fn mean_exit_time_from_disk_center() {
        let sim = Simulator::new(&laplace_disk("0", "1", "0")).unwrap();
        let e = estimate_point(&sim, &[0.0, 0.0], 2000, &coarse()).unwrap();
        // u(0) = -E[τ] = -(1 - 0)/(2d); dt = 1e-3 adds a small positive bias to τ
        assert!((e.value + e.mean_tau).abs() < 1e-12);
        assert!((e.mean_tau - 0.25).abs() < 3.0 * e.stderr + 0.03, "{e:?}");
    }

    #[test]
    fn linearity_in_f() {
        let base = laplace_disk("-1", "x^2 + y", "0");
        let sim1 = Simulator::new(&base).unwrap();
        let e1 = estimate_point(&sim1, &[0.2, 0.2], 300, &coarse()).unwrap();
        for alpha in [4.0, -0.5] {
            let scaled = base.with_f(crate::expr::Expr::scale(alpha, base.f.clone()));
            let e2 = estimate_point(&Simulator::new(&scaled).unwrap(), &[0.2, 0.2], 300, &coarse()).unwrap();
            assert_eq!(e2.value, alpha * e1.value);
        }
    }

    #[test]
    fn single_point_grid_matches_point_estimate() {
        let sim = Simulator::new(&laplace_disk("0", "0", "x")).unwrap();
        let x = vec![0.3, 0.2];
        let a = estimate_point(&sim, &x, 300, &coarse()).unwrap();
        let b = estimate_grid(&sim, &[x], 300, &coarse()).pop().unwrap().unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        assert!(estimate_grid(&sim, &[], 300, &coarse()).is_empty());
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let sim = Simulator::new(&laplace_disk("-1", "1", "x*y")).unwrap();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_point(&sim, &[0.1, 0.4], 400, &coarse()).unwrap())
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn unexited_paths_reject_the_estimate() {
        // no noise, no drift: nothing ever leaves
        let text = "dim = 2\n[fields]\nX0 = \"0\", \"0\"\nX1 = \"0\", \"0\"\n[coeff]\nc = \"0\"\n[data]\nf = \"0\"\ng = \"1\"\n[domain]\nphi = \"1 - x^2 - y^2\"\n";
        let sim = Simulator::new(&parse_problem(text).unwrap()).unwrap();
        let cfg = PathConfig {
            dt: 0.01,
            t_max: Some(1.0),
            ..PathConfig::default()
        };
        match estimate_point(&sim, &[0.0, 0.0], 10, &cfg) {
            Err(EstimateError::TooManyUnexited { estimate, .. }) => {
                assert_eq!(estimate.unexited_frac, 1.0);
                assert!(estimate.value.is_nan());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_bias_for_constant_data_at_every_step() {
        let sim = Simulator::new(&laplace_disk("0", "0", "2")).unwrap();
        let rows = convergence_study(&sim, &[0.0, 0.0], &[4e-3, 1e-3], 100, &coarse(), Some(2.0)).unwrap();
        assert!(rows.iter().all(|r| r.abs_err == Some(0.0)));
        assert!(convergence_study(&sim, &[0.0, 0.0], &[1e-3, 4e-3], 10, &coarse(), None).is_err());
        let csv = convergence_csv(&rows);
        assert!(csv.starts_with("dt,u_hat,stderr,mean_tau,abs_err\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn csv_layout() {
        let sim = Simulator::new(&laplace_disk("0", "0", "1")).unwrap();
        let pts = vec![vec![0.0, 0.0], vec![0.5, 0.0]];
        let res = estimate_grid(&sim, &pts, 20, &coarse());
        let rows: Vec<_> = pts.into_iter().zip(res).collect();
        let csv = estimates_csv(2, &rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x1,x2,u_hat,stderr,n_paths,unexited_frac");
        assert_eq!(lines[1], "0.0,0.0,1.0,0.0,20,0.0");
        assert_eq!(lines.len(), 3);
    }
}
