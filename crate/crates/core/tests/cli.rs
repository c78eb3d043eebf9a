use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn fixture(name: &str) -> String {
    fixtures().join(name).to_string_lossy().into_owned()
}

fn degen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_degen"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value<'a>(report: &'a str, key: &str) -> &'a str {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(" = ")))
        .unwrap_or_else(|| panic!("missing {key} in\n{report}"))
}

#[test]
fn fixtures_check_as_documented() {
    let mut seen = 0;
    for entry in fs::read_dir(fixtures()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("prob") {
            continue;
        }
        let text = fs::read_to_string(&path).unwrap();
        let expected: i32 = text
            .lines()
            .find_map(|l| l.strip_prefix("# check: exit "))
            .unwrap_or_else(|| panic!("{} lacks a check header", path.display()))
            .trim()
            .parse()
            .unwrap();
        let out = degen(&["check", path.to_str().unwrap()]);
        assert_eq!(
            out.status.code(),
            Some(expected),
            "{}\n{}",
            path.display(),
            stdout(&out)
        );
        let verdict = value(&stdout(&out), "verdict").to_string();
        let want = match expected {
            0 => "pass",
            2 => "fail",
            _ => "inconclusive",
        };
        assert_eq!(verdict, want);
        seen += 1;
    }
    assert!(seen >= 9);
}

#[test]
fn kusuoka_stroock_slope_in_report() {
    let out = degen(&["check", &fixture("kusuoka_stroock_p05.prob")]);
    let report = stdout(&out);
    let slope: f64 = value(&report, "subcritical.base0.k0.slope").parse().unwrap();
    assert!((slope + 0.5).abs() < 0.05, "{slope}");
}

#[test]
fn solve_reports_estimate() {
    let out = degen(&[
        "solve",
        &fixture("harmonic_disk.prob"),
        "--point",
        "0.3,0.2",
        "--paths",
        "4000",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout(&out);
    let u: f64 = value(&report, "u_hat").parse().unwrap();
    let se: f64 = value(&report, "stderr").parse().unwrap();
    assert!((u - 0.3).abs() <= (4.0 * se).max(0.03), "{u} ± {se}");
    assert_eq!(value(&report, "n_paths"), "4000");
    assert_eq!(value(&report, "status"), "ok");
}

#[test]
fn solve_outside_domain_is_usage_error() {
    let out = degen(&[
        "solve",
        &fixture("poisson_disk.prob"),
        "--point",
        "2,0",
        "--paths",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not inside"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(degen(&["bogus"]).status.code(), Some(1));
    assert_eq!(
        degen(&["solve", "/no/such/file.prob", "--point", "0,0"]).status.code(),
        Some(1)
    );
    assert_eq!(degen(&["solve", &fixture("poisson_disk.prob")]).status.code(), Some(1));
    assert_eq!(
        degen(&["solve", &fixture("poisson_disk.prob"), "--point", "0,0,0"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(degen(&["--help"]).status.code(), Some(0));
}

#[test]
fn dimension_mismatch_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixtures().join("poisson_disk.prob"))
        .unwrap()
        .replace(r#"X1 = "1", "0""#, r#"X1 = "1", "0", "0""#);
    let path = dir.path().join("bad.prob");
    fs::write(&path, text).unwrap();
    let out = degen(&["check", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 10"), "{err}");
}

#[test]
fn grid_csv_layout() {
    let out = degen(&[
        "grid",
        &fixture("poisson_disk.prob"),
        "--grid-res",
        "5",
        "--paths",
        "200",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = stdout(&out);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x1,x2,u_hat,stderr,n_paths,unexited_frac"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 25);
    for row in rows {
        let cols: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols.len(), 6);
        assert!(cols[0] * cols[0] + cols[1] * cols[1] < 1.0);
        assert_eq!(cols[4], 200.0);
    }
}

#[test]
fn convergence_table() {
    let out = degen(&[
        "convergence",
        &fixture("poisson_disk.prob"),
        "--point",
        "0,0",
        "--paths",
        "300",
        "--dt-list",
        "4e-4,1e-4,2.5e-5",
        "--reference",
        "-0.25",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = stdout(&out);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "dt,u_hat,stderr,mean_tau,abs_err");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0.0004,"));
    assert!(lines[3].starts_with("2.5e-5,"));

    let bad = degen(&[
        "convergence",
        &fixture("poisson_disk.prob"),
        "--point",
        "0,0",
        "--dt-list",
        "1e-4,4e-4",
    ]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn out_writes_report_and_json_sibling() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("solve.txt");
    let out = degen(&[
        "solve",
        &fixture("screened_disk.prob"),
        "--point",
        "0,0",
        "--paths",
        "500",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let flat = fs::read_to_string(&out_path).unwrap();
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("solve.report")).unwrap()).unwrap();
    let u: f64 = value(&flat, "u_hat").parse().unwrap();
    assert_eq!(json["value"].as_f64(), Some(u));
    assert_eq!(json["n_paths"].as_u64(), Some(500));

    let unwritable = degen(&["check", &fixture("poisson_disk.prob"), "--out", "/no/such/dir/x.txt"]);
    assert_eq!(unwritable.status.code(), Some(1));
}

#[test]
fn solve_is_deterministic_across_threads() {
    let p = fixture("poisson_disk.prob");
    let run = |seed: &str, threads: &str| {
        degen(&[
            "solve",
            &p,
            "--point",
            "0.1,-0.2",
            "--paths",
            "3000",
            "--seed",
            seed,
            "--threads",
            threads,
        ])
        .stdout
    };
    let one = run("7", "1");
    assert_eq!(one, run("7", "1"));
    assert_eq!(one, run("7", "4"));
    assert_ne!(one, run("8", "1"));
}

#[test]
fn chart_on_radial_disk() {
    let out = degen(&["chart", &fixture("radial_disk.prob"), "--point", "1,0", "--kmax", "0"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let report = stdout(&out);
    assert_eq!(value(&report, "field"), "X1");
    for key in ["roundtrip_max", "boundary_phi_max", "boundary_first_max"] {
        let v: f64 = value(&report, key).parse().unwrap();
        assert!(v <= 1e-8, "{key} = {v}");
    }
    let e1: f64 = value(&report, "pushforward_e1_max").parse().unwrap();
    assert!(e1 <= 1e-6);
}

#[test]
fn chart_rejects_characteristic_and_interior_points() {
    let out = degen(&["chart", &fixture("grushin_disk.prob"), "--point", "0,1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = degen(&["chart", &fixture("poisson_disk.prob"), "--point", "0,0"]);
    assert_eq!(out.status.code(), Some(1));
}
