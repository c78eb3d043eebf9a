use std::path::Path;
use std::sync::OnceLock;

use degen::chart::{select_transversal, BoundaryChart};
use degen::domain::Domain;
use degen::problem::{load_problem, Problem};
use proptest::prelude::*;

fn load(name: &str) -> Problem {
    load_problem(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)).unwrap()
}

fn domain(p: &Problem) -> Domain {
    Domain::new(&p.phi, p.dim, p.bbox.as_deref()).unwrap()
}

#[test]
fn poisson_fixture_shape() {
    let p = load("poisson_disk.prob");
    assert_eq!((p.dim, p.n_noise()), (2, 2));
    assert_eq!(p.name, "poisson_disk");
    assert!(p.psi.is_none());
    assert!(p.notes[0].contains("unit disk"));
}

#[test]
fn kusuoka_stroock_fixture_shape() {
    let p = load("kusuoka_stroock_p05.prob");
    assert_eq!((p.dim, p.n_noise()), (3, 3));
    // printed in canonical variable names
    assert_eq!(p.psi.as_ref().unwrap().to_string(), "x1");
    // X2 along (t, 0, 0) is exp(-t^(-1/2)/2) e2
    let t: f64 = 0.01;
    let v = p.fields[2].eval(&[t, 0.3, -0.2]);
    assert!((v[1] - (-t.powf(-0.5) / 2.0).exp()).abs() <= 1e-15);
}

#[test]
fn kusuoka_stroock_transversal_is_first_field() {
    let p = load("kusuoka_stroock_p05.prob");
    let d = domain(&p);
    let x0 = [0.0, 0.0, 0.0];
    let nu = d.inward_normal(&x0).unwrap();
    assert_eq!(select_transversal(p.noise(), &x0, &nu, 1e-8).unwrap(), (1, 1.0));
}

fn radial_chart() -> &'static BoundaryChart {
    static CHART: OnceLock<BoundaryChart> = OnceLock::new();
    CHART.get_or_init(|| {
        let p = load("radial_disk.prob");
        let d = domain(&p);
        BoundaryChart::build(&d, p.noise(), &[1.0, 0.0], 1, 1.0, 0.25 * d.bbox().diameter()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn radial_chart_round_trip(u in 0.0f64..1.0, v in -1.0f64..1.0) {
        let chart = radial_chart();
        let r = chart.radius();
        let z = [u * r, v * r];
        let x = chart.inverse(&z).unwrap();
        let back = chart.forward(&x).unwrap();
        prop_assert!((back[0] - z[0]).abs() <= 1e-8 && (back[1] - z[1]).abs() <= 1e-8);
        // closed form: F(x) = (1 - |x|, ±y/|x|)
        let n = (x[0] * x[0] + x[1] * x[1]).sqrt();
        prop_assert!((back[0] - (1.0 - n)).abs() <= 1e-8);
        prop_assert!((back[1].abs() - (x[1] / n).abs()).abs() <= 1e-8);
    }

    #[test]
    fn radial_chart_interior_sign(u in 0.01f64..1.0, v in -1.0f64..1.0) {
        let chart = radial_chart();
        let r = chart.radius();
        let x = chart.inverse(&[u * r, v * r]).unwrap();
        prop_assert!(chart.forward(&x).unwrap()[0] > 0.0);
    }
}
