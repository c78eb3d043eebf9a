use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use degen::chart::{select_transversal, verify_chart, BoundaryChart};
use degen::check::{run_check_on, CheckOptions};
use degen::domain::Domain;
use degen::problem::{load_problem, Problem};
use degen::report::{sibling_report_path, write_atomic, FlatReport};
use degen::sde_mc::{
    convergence_csv, convergence_study, estimate_grid, estimate_point, estimates_csv, Estimate, EstimateError,
    PathConfig, Simulator,
};
use degen::vf_algebra::thm2_checks;

/// Hypothesis checks and Monte Carlo solution of degenerate Dirichlet problems.
#[derive(Debug, Parser)]
#[command(name = "degen", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check degeneracy, noncharacteristic boundary, subcriticality and sign conditions.
    Check(Opts),
    /// Estimate the solution at one point.
    Solve(Opts),
    /// Estimate the solution on an interior lattice and write CSV.
    Grid(Opts),
    /// Build and verify a boundary-flattening chart at a boundary point.
    Chart(Opts),
    /// Estimate at one point for a decreasing list of step sizes.
    Convergence(Opts),
}

#[derive(Debug, Args)]
struct Opts {
    /// Problem file.
    problem: PathBuf,
    /// Comma-separated coordinates.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    point: Option<Vec<f64>>,
    /// Monte Carlo paths per point.
    #[arg(long, default_value_t = 20000)]
    paths: usize,
    /// Euler-Maruyama step.
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest bracket order.
    #[arg(long, default_value_t = 3)]
    kmax: usize,
    /// Brownian-bridge exit correction between steps.
    #[arg(long)]
    bridge: bool,
    /// Output file (reports also get a JSON sibling with suffix `.report`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Lattice divisions per axis.
    #[arg(long, default_value_t = 32)]
    grid_res: usize,
    /// Step sizes for `convergence`, strictly decreasing.
    #[arg(long, value_delimiter = ',', default_value = "4e-4,1e-4,2.5e-5")]
    dt_list: Vec<f64>,
    /// Reference value for `convergence` errors.
    #[arg(long, allow_hyphen_values = true)]
    reference: Option<f64>,
    /// Path time horizon (default: 50 times the squared box diameter).
    #[arg(long)]
    tmax: Option<f64>,
}

/// Failure of a command, mapped to the process exit code.
#[derive(Debug)]
enum Failure {
    /// Bad arguments, unreadable input, unwritable output.
    Usage(String),
    /// A check or estimate ran and failed.
    Failed(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Failed(_) => 2,
        }
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (name, opts) = match &cli.command {
        Command::Check(o) => ("check", o),
        Command::Solve(o) => ("solve", o),
        Command::Grid(o) => ("grid", o),
        Command::Chart(o) => ("chart", o),
        Command::Convergence(o) => ("convergence", o),
    };
    if let Some(n) = opts.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("degen: cannot configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let result = load(opts).and_then(|(problem, domain)| match name {
        "check" => cmd_check(&problem, &domain, opts),
        "solve" => cmd_solve(&problem, &domain, opts),
        "grid" => cmd_grid(&problem, &domain, opts),
        "chart" => cmd_chart(&problem, &domain, opts),
        _ => cmd_convergence(&problem, &domain, opts),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            match &f {
                Failure::Usage(m) | Failure::Failed(m) => eprintln!("degen {name}: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn load(opts: &Opts) -> Result<(Problem, Domain), Failure> {
    let problem = load_problem(&opts.problem).map_err(|e| Failure::Usage(e.to_string()))?;
    let domain =
        Domain::new(&problem.phi, problem.dim, problem.bbox.as_deref()).map_err(|e| Failure::Usage(e.to_string()))?;
    Ok((problem, domain))
}

fn path_config(opts: &Opts) -> PathConfig {
    PathConfig {
        dt: opts.dt,
        t_max: opts.tmax,
        seed: opts.seed,
        bridge: opts.bridge,
        ..PathConfig::default()
    }
}

fn point(opts: &Opts, problem: &Problem) -> Result<Vec<f64>, Failure> {
    let p = opts
        .point
        .clone()
        .ok_or_else(|| Failure::Usage("--point is required".into()))?;
    if p.len() != problem.dim {
        return Err(Failure::Usage(format!(
            "--point has {} coordinates, the problem has dimension {}",
            p.len(),
            problem.dim
        )));
    }
    Ok(p)
}

fn write_output(path: &Path, contents: &str) -> Result<(), Failure> {
    write_atomic(path, contents.as_bytes()).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

/// Print the flat report, or write it and its JSON sibling under `--out`.
fn emit_report(opts: &Opts, flat: &FlatReport, json: &impl Serialize) -> Result<(), Failure> {
    match &opts.out {
        None => {
            print!("{}", flat.render());
            Ok(())
        }
        Some(path) => {
            let sibling = sibling_report_path(path)
                .ok_or_else(|| Failure::Usage("--out must not use the .report suffix".into()))?;
            let body = serde_json::to_string_pretty(json).expect("report serializes");
            write_output(path, &flat.render())?;
            write_output(&sibling, &(body + "\n"))
        }
    }
}

fn emit_csv(opts: &Opts, csv: &str) -> Result<(), Failure> {
    match &opts.out {
        None => {
            print!("{csv}");
            Ok(())
        }
        Some(path) => write_output(path, csv),
    }
}

fn warn_positive_c(problem: &Problem, domain: &Domain) {
    let pts = domain.interior_lattice(16);
    let t = thm2_checks(problem.noise(), &problem.c, &pts);
    if !t.c_pass {
        log::warn!("c > 0 somewhere in D (max {}); the representation may fail", t.c_max);
    }
}

fn cmd_check(problem: &Problem, domain: &Domain, opts: &Opts) -> CmdResult {
    let check_opts = CheckOptions {
        k_max: opts.kmax,
        grid_res: opts.grid_res,
        ..CheckOptions::default()
    };
    let report = run_check_on(problem, domain, &check_opts).map_err(|e| Failure::Usage(e.to_string()))?;
    emit_report(opts, &report.flat(), &report)?;
    Ok(report.verdict.exit_code() as u8)
}

fn estimate_report(problem: &Problem, est: &Estimate, status: &str) -> FlatReport {
    let mut r = FlatReport::new();
    r.push("problem", &problem.name)
        .push_list("point", &est.point)
        .push("status", status)
        .push("u_hat", est.value)
        .push("stderr", est.stderr)
        .push("ci95_lo", est.value - 1.96 * est.stderr)
        .push("ci95_hi", est.value + 1.96 * est.stderr)
        .push("n_paths", est.n_paths)
        .push("n_used", est.n_used)
        .push("n_unexited", est.n_unexited)
        .push("n_invalid", est.n_invalid)
        .push("unexited_frac", est.unexited_frac)
        .push("mean_tau", est.mean_tau)
        .push("weight_violations", est.weight_violations)
        .push("dt", est.config.dt)
        .push("t_max", est.t_max)
        .push("seed", est.config.seed)
        .push("bridge", est.config.bridge);
    r
}

fn cmd_solve(problem: &Problem, domain: &Domain, opts: &Opts) -> CmdResult {
    let x = point(opts, problem)?;
    warn_positive_c(problem, domain);
    let sim = Simulator::with_domain(problem, domain.clone());
    match estimate_point(&sim, &x, opts.paths, &path_config(opts)) {
        Ok(est) => {
            emit_report(opts, &estimate_report(problem, &est, "ok"), &est)?;
            Ok(0)
        }
        Err(EstimateError::TooManyUnexited { estimate, t_max }) => {
            let msg = EstimateError::TooManyUnexited {
                estimate: estimate.clone(),
                t_max,
            }
            .to_string();
            emit_report(opts, &estimate_report(problem, &estimate, "rejected"), &estimate)?;
            Err(Failure::Failed(msg))
        }
        Err(e) => Err(Failure::Usage(e.to_string())),
    }
}

fn cmd_grid(problem: &Problem, domain: &Domain, opts: &Opts) -> CmdResult {
    warn_positive_c(problem, domain);
    let sim = Simulator::with_domain(problem, domain.clone());
    let cfg = path_config(opts);
    sim.validate(&cfg).map_err(|e| Failure::Usage(e.to_string()))?;
    let points = domain.interior_lattice(opts.grid_res);
    log::info!("grid: {} interior points", points.len());
    let results = estimate_grid(&sim, &points, opts.paths, &cfg);
    let rejected = results.iter().filter(|r| r.is_err()).count();
    let rows: Vec<_> = points.into_iter().zip(results).collect();
    emit_csv(opts, &estimates_csv(problem.dim, &rows))?;
    if rejected > 0 {
        log::warn!("{rejected} grid points were rejected and carry NaN values");
        return Ok(2);
    }
    Ok(0)
}

fn cmd_convergence(problem: &Problem, domain: &Domain, opts: &Opts) -> CmdResult {
    let x = point(opts, problem)?;
    warn_positive_c(problem, domain);
    let sim = Simulator::with_domain(problem, domain.clone());
    match convergence_study(&sim, &x, &opts.dt_list, opts.paths, &path_config(opts), opts.reference) {
        Ok(rows) => {
            emit_csv(opts, &convergence_csv(&rows))?;
            Ok(0)
        }
        Err(e @ EstimateError::TooManyUnexited { .. }) => Err(Failure::Failed(e.to_string())),
        Err(e) => Err(Failure::Usage(e.to_string())),
    }
}

fn cmd_chart(problem: &Problem, domain: &Domain, opts: &Opts) -> CmdResult {
    let raw = point(opts, problem)?;
    let residual = domain.phi(&raw).abs();
    if residual.is_nan() || residual > 1e-6 {
        return Err(Failure::Usage(format!("point {raw:?} is not on the boundary")));
    }
    let x0 = domain
        .project(&raw, 1e-14, 50)
        .ok_or_else(|| Failure::Usage(format!("cannot project {raw:?} onto the boundary")))?;
    let normal = domain
        .inward_normal(&x0)
        .ok_or_else(|| Failure::Usage("boundary normal is undefined at the point".into()))?;
    let theta = CheckOptions::default().theta;
    let (index, sign) =
        select_transversal(problem.noise(), &x0, &normal, theta).map_err(|e| Failure::Failed(e.to_string()))?;
    let chart = BoundaryChart::build(
        domain,
        problem.noise(),
        &x0,
        index,
        sign,
        0.25 * domain.bbox().diameter(),
    )
    .map_err(|e| Failure::Failed(e.to_string()))?;
    let report = verify_chart(&chart, &problem.fields, 10, 100, Some(opts.kmax));

    let mut r = FlatReport::new();
    r.push("problem", &problem.name)
        .push_list("base", &report.base)
        .push("field", format!("X{}", report.field_index))
        .push("sign", report.sign)
        .push("radius", report.radius)
        .push("samples", report.n_samples)
        .push("boundary_samples", report.n_boundary_samples)
        .push("base_residual", report.base_residual)
        .push("roundtrip_max", report.roundtrip_max)
        .push("boundary_phi_max", report.boundary_phi_max)
        .push("boundary_first_max", report.boundary_first_max)
        .push("interior_sign_ok", report.interior_sign_ok)
        .push("pushforward_e1_max", report.pushforward_e1_max);
    for f in &report.other_fields {
        r.push(format!("first_component.{}", f.label), f.max_first_component);
    }
    for f in &report.fits {
        r.push_opt(format!("fit.k{}.slope", f.k), f.slope)
            .push(format!("fit.k{}.status", f.k), f.status.as_str());
    }
    for (j, e) in report.errors.iter().enumerate() {
        r.push(format!("error{j}"), e);
    }
    let geometry = report.geometry_pass(1e-8);
    let fit = report.fit_pass();
    r.push("geometry", if geometry { "pass" } else { "fail" })
        .push_opt("subcritical", fit.map(|p| if p { "pass" } else { "fail" }));
    emit_report(opts, &r, &report)?;
    Ok(if geometry && fit != Some(false) { 0 } else { 2 })
}
