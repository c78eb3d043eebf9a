//! Machine check of the solvability hypotheses for a problem: the
//! degeneracy set `K`, noncharacteristic boundary and `K`, subcriticality of
//! `K` along `S`, and the sign/ellipticity conditions behind the Monte Carlo
//! representation.

use serde::Serialize;
use thiserror::Error;

use crate::domain::{Domain, DomainError};
use crate::problem::{Problem, ProblemSummary};
use crate::report::FlatReport;
use crate::vf_algebra::{
    classify_k, noncharacteristic_check, subcritical_fit, thm2_checks, AlgebraError, BracketSet, FitConfig,
    FitSampling, FitStatus, Hypersurface, NoncharReport, SubcriticalFit, Thm2Report,
};

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CheckOptions {
    pub k_max: usize,
    /// Lattice divisions per axis of the bounding box.
    pub grid_res: usize,
    pub tol_k: f64,
    /// Noncharacteristic threshold `θ_nc`.
    pub theta: f64,
    /// Largest number of `K` points fitted along `S`.
    pub max_fit_bases: usize,
}

impl Default for CheckOptions {
    fn default() -> CheckOptions {
        CheckOptions {
            k_max: 3,
            grid_res: 32,
            tol_k: 1e-12,
            theta: 1e-8,
            max_fit_bases: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    /// Process exit code: 0 pass, 2 fail, 3 inconclusive.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 2,
            Verdict::Inconclusive => 3,
        }
    }

    fn combine(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Pass,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KSummary {
    pub n_points: usize,
    pub count: usize,
    pub nonfinite: usize,
    /// Up to 16 members of `K` on the check grid.
    pub examples: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BaseFit {
    pub base: Vec<f64>,
    pub status: FitStatus,
    /// Order of the first passing fit, if any.
    pub passing_k: Option<usize>,
    pub fits: Vec<SubcriticalFit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubcriticalSummary {
    pub verdict: Verdict,
    /// Largest distance from a `K` grid point to its projection on `S`.
    pub max_projection_distance: f64,
    pub bases: Vec<BaseFit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub problem: ProblemSummary,
    pub options: CheckOptions,
    pub k: KSummary,
    pub boundary: NoncharReport,
    pub k_noncharacteristic: Option<NoncharReport>,
    pub subcritical: Option<SubcriticalSummary>,
    pub thm2: Thm2Report,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn flat(&self) -> FlatReport {
        let mut r = FlatReport::new();
        r.push("problem", &self.problem.name)
            .push("dim", self.problem.dim)
            .push("n", self.problem.n)
            .push("k_max", self.options.k_max)
            .push("grid_res", self.options.grid_res)
            .push("tol_k", self.options.tol_k)
            .push("theta_nc", self.options.theta)
            .push("k.grid_points", self.k.n_points)
            .push("k.count", self.k.count)
            .push("k.nonfinite", self.k.nonfinite)
            .push("boundary.samples", self.boundary.points.len())
            .push("boundary.failures", self.boundary.failures().count())
            .push("boundary.pass", self.boundary.pass());
        if let Some(w) = self.boundary.worst() {
            r.push("boundary.min_inner", w.max_inner)
                .push_list("boundary.worst_point", &w.point);
        }
        match &self.k_noncharacteristic {
            Some(nc) => {
                r.push("k_noncharacteristic.points", nc.points.len())
                    .push("k_noncharacteristic.pass", nc.pass());
            }
            None => {
                r.push("k_noncharacteristic.pass", "n/a");
            }
        }
        match &self.subcritical {
            Some(s) => {
                r.push("subcritical.status", s.verdict.as_str())
                    .push("subcritical.bases", s.bases.len())
                    .push("subcritical.max_projection_distance", s.max_projection_distance);
                for (j, b) in s.bases.iter().enumerate() {
                    let key = format!("subcritical.base{j}");
                    r.push_list(format!("{key}.point"), &b.base)
                        .push(format!("{key}.status"), b.status.as_str())
                        .push_opt(format!("{key}.k"), b.passing_k);
                    for f in &b.fits {
                        r.push_opt(format!("{key}.k{}.slope", f.k), f.slope)
                            .push(format!("{key}.k{}.status", f.k), f.status.as_str())
                            .push(format!("{key}.k{}.samples", f.k), f.rho.len());
                    }
                }
            }
            None => {
                r.push("subcritical.status", "n/a");
            }
        }
        r.push("thm2.c_nonpositive", self.thm2.c_pass)
            .push("thm2.c_max", self.thm2.c_max)
            .push_list("thm2.a_est", &self.thm2.a_est)
            .push("thm2.best_coordinate", self.thm2.best_k)
            .push("thm2.uniform_direction", self.thm2.b_pass);
        for (j, note) in self.notes.iter().enumerate() {
            r.push(format!("note{j}"), note);
        }
        r.push("verdict", self.verdict.as_str());
        r
    }
}

fn fit_verdict(status: FitStatus) -> Verdict {
    match status {
        FitStatus::Pass | FitStatus::TrivialPass => Verdict::Pass,
        FitStatus::Fail => Verdict::Fail,
        FitStatus::Inconclusive => Verdict::Inconclusive,
    }
}

/// Evenly spaced selection of at most `max` items, keeping order.
fn spread<T: Clone>(items: &[T], max: usize) -> Vec<T> {
    if items.len() <= max {
        return items.to_vec();
    }
    (0..max)
        .map(|j| items[j * (items.len() - 1) / (max - 1).max(1)].clone())
        .collect()
}

/// Run every hypothesis check on the lattice of the problem's bounding box
/// plus boundary samples.
pub fn run_check(problem: &Problem, opts: &CheckOptions) -> Result<CheckReport, CheckError> {
    let domain = Domain::new(&problem.phi, problem.dim, problem.bbox.as_deref())?;
    run_check_on(problem, &domain, opts)
}

pub fn run_check_on(problem: &Problem, domain: &Domain, opts: &CheckOptions) -> Result<CheckReport, CheckError> {
    let d = problem.dim;
    let mut notes = Vec::new();
    let boundary_pts = domain.boundary_samples(opts.grid_res, 1e-12);
    let mut grid = domain.closed_lattice(opts.grid_res);
    grid.extend(boundary_pts.iter().cloned());

    let set = BracketSet::new(&problem.fields, opts.k_max)?;
    let degeneracy = classify_k(&set, &grid, opts.tol_k);
    let k_points: Vec<Vec<f64>> = degeneracy.k_points().map(|r| r.point.clone()).collect();
    if degeneracy.nonfinite_count() > 0 {
        notes.push(format!(
            "{} grid points have non-finite brackets and were classified from lower orders",
            degeneracy.nonfinite_count()
        ));
    }
    log::info!("K: {} of {} grid points", k_points.len(), grid.len());

    let boundary_surface = Hypersurface::new(problem.phi.clone(), d);
    let boundary = noncharacteristic_check(problem.noise(), &boundary_surface, &boundary_pts, opts.theta)?;
    let mut verdict = if boundary.pass() { Verdict::Pass } else { Verdict::Fail };
    if boundary_pts.is_empty() {
        notes.push("no boundary samples found on the grid".into());
        verdict = verdict.combine(Verdict::Inconclusive);
    }

    let mut k_noncharacteristic = None;
    let mut subcritical = None;
    if !k_points.is_empty() {
        match &problem.psi {
            None => {
                notes.push("K is nonempty but no surface.psi was given".into());
                verdict = verdict.combine(Verdict::Inconclusive);
            }
            Some(psi) => {
                let surface = Hypersurface::new(psi.clone(), d);
                let step = domain.bbox().diameter() / opts.grid_res.max(1) as f64;
                let mut projected = Vec::new();
                let mut max_dist: f64 = 0.0;
                let mut projection_failed = false;
                for x in &k_points {
                    match surface.project(x, 1e-12, 100) {
                        Ok(y) => {
                            let dist = crate::linalg::norm(&x.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
                            max_dist = max_dist.max(dist);
                            projected.push(y);
                        }
                        Err(_) => projection_failed = true,
                    }
                }
                let mut sub_verdict = Verdict::Pass;
                if projection_failed {
                    notes.push("some K points could not be projected onto S".into());
                    sub_verdict = Verdict::Inconclusive;
                }
                if max_dist > 2.0 * step {
                    notes.push(format!("K extends {max_dist:e} away from S"));
                    sub_verdict = Verdict::Fail;
                }
                let nc = noncharacteristic_check(problem.noise(), &surface, &projected, opts.theta)?;
                if !nc.pass() {
                    verdict = Verdict::Fail;
                }
                k_noncharacteristic = Some(nc);

                let bases = spread(&projected, opts.max_fit_bases);
                let sampling = FitSampling::default();
                let cfg = FitConfig::default();
                let inside = |x: &[f64]| domain.in_closure(x);
                let mut base_fits = Vec::with_capacity(bases.len());
                for b in &bases {
                    let mut fits = Vec::new();
                    let mut passing_k = None;
                    let mut status = FitStatus::Inconclusive;
                    for k in 0..=opts.k_max {
                        let fit = subcritical_fit(
                            &set,
                            k,
                            &surface,
                            std::slice::from_ref(b),
                            &sampling,
                            &cfg,
                            Some(&inside),
                        )?;
                        let st = fit.status;
                        fits.push(fit);
                        if st.passed() {
                            passing_k = Some(k);
                            status = st;
                            break;
                        }
                        if st == FitStatus::Fail {
                            status = FitStatus::Fail;
                        }
                    }
                    sub_verdict = sub_verdict.combine(fit_verdict(status));
                    base_fits.push(BaseFit {
                        base: b.clone(),
                        status,
                        passing_k,
                        fits,
                    });
                }
                verdict = verdict.combine(sub_verdict);
                subcritical = Some(SubcriticalSummary {
                    verdict: sub_verdict,
                    max_projection_distance: max_dist,
                    bases: base_fits,
                });
            }
        }
    }

    let interior: Vec<Vec<f64>> = domain
        .closed_lattice(opts.grid_res)
        .into_iter()
        .filter(|x| domain.contains(x))
        .collect();
    let thm2 = thm2_checks(problem.noise(), &problem.c, &interior);
    if !thm2.c_pass || !thm2.b_pass {
        verdict = Verdict::Fail;
    }

    Ok(CheckReport {
        problem: problem.summary(),
        options: *opts,
        k: KSummary {
            n_points: grid.len(),
            count: k_points.len(),
            nonfinite: degeneracy.nonfinite_count(),
            examples: spread(&k_points, 16),
        },
        boundary,
        k_noncharacteristic,
        subcritical,
        thm2,
        verdict,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::parse_problem;

    fn problem(body: &str) -> Problem {
        parse_problem(body).unwrap()
    }

    const DISK: &str = "dim = 2\nfields.X0 = \"0\", \"0\"\nfields.X1 = \"1\", \"0\"\nfields.X2 = \"0\", \"1\"\ncoeff.c = \"0\"\ndata.f = \"1\"\ndata.g = \"0\"\ndomain.phi = \"1 - x1^2 - x2^2\"\n";

    #[test]
    fn elliptic_disk_passes() {
        let opts = CheckOptions {
            grid_res: 16,
            ..CheckOptions::default()
        };
        let report = run_check(&problem(DISK), &opts).unwrap();
        assert_eq!(report.k.count, 0);
        assert!(report.subcritical.is_none());
        assert_eq!(report.verdict, Verdict::Pass);
        let flat = report.flat();
        assert_eq!(flat.get("verdict"), Some("pass"));
        assert_eq!(flat.get("subcritical.status"), Some("n/a"));
    }

    #[test]
    fn positive_c_fails() {
        let p = problem(&DISK.replace("coeff.c = \"0\"", "coeff.c = \"1\""));
        let report = run_check(
            &p,
            &CheckOptions {
                grid_res: 8,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(!report.thm2.c_pass);
        assert_eq!(report.verdict.exit_code(), 2);
    }

    #[test]
    fn degenerate_without_surface_is_inconclusive() {
        // K = {x2 = 0}; every boundary point stays noncharacteristic
        let p = problem(&DISK.replace("fields.X2 = \"0\", \"1\"", "fields.X2 = \"0\", \"x2^2\""));
        let report = run_check(
            &p,
            &CheckOptions {
                grid_res: 8,
                k_max: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(report.k.count > 0);
        assert_eq!(report.verdict, Verdict::Inconclusive);
        assert_eq!(report.verdict.exit_code(), 3);
    }

    #[test]
    fn spread_keeps_ends() {
        let v: Vec<usize> = (0..100).collect();
        let s = spread(&v, 5);
        assert_eq!(s.len(), 5);
        assert_eq!((s[0], s[4]), (0, 99));
        assert_eq!(spread(&v[..3], 5), vec![0, 1, 2]);
    }
}
