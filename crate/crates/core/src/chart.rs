//! Flow-box charts flattening `∂D` near a noncharacteristic boundary point.
//!
//! With a noise field `Xᵢ` transversal to `∂D` at `x₀`, the inverse chart is
//! `F⁻¹(t, s) = Φ_t(σ(s))`: flow `±Xᵢ` for time `t` from the boundary point
//! `σ(s)`, where `σ` is the boundary written as a graph over the tangent
//! plane at `x₀`. Then `∂D` maps into `{t = 0}`, `D` into `{t > 0}`, and the
//! pushforward of the flowed field is `e₁`.

use serde::Serialize;
use thiserror::Error;

use crate::domain::Domain;
use crate::expr::{CompiledExpr, Expr};
use crate::linalg;
use crate::vf_algebra::{
    numeric_bracket_columns, subcritical_fit_with, FitConfig, FitSampling, Hypersurface, SubcriticalFit, VectorField,
};

const FLOW_STEPS: usize = 256;
const GRAPH_NEWTON_ITERS: usize = 5;
const GRAPH_TOL: f64 = 1e-12;
const JACOBIAN_STEP: f64 = 1e-6;
const INVERSION_ITERS: usize = 50;
const INVERSION_TOL: f64 = 1e-13;
const ROUNDTRIP_TOL: f64 = 1e-8;
const MAX_HALVINGS: usize = 30;
/// Step for numeric brackets of pushforward fields.
const BRACKET_STEP: f64 = 1e-4;
/// Largest bracket order used on numerically tabulated fields.
pub const MAX_NUMERIC_ORDER: usize = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChartError {
    #[error("point is not on the boundary (|phi| = {0:e})")]
    NotOnBoundary(f64),
    #[error("boundary normal is undefined at the base point")]
    DegenerateNormal,
    #[error("characteristic point: max |<X_i, nu>| = {max_inner:e} < {theta:e}")]
    Characteristic { max_inner: f64, theta: f64 },
    #[error("boundary graph projection failed at s = {0:?}")]
    Graph(Vec<f64>),
    #[error("Newton inversion did not converge at {0:?}")]
    Inversion(Vec<f64>),
    #[error("no chart radius passes the round-trip check")]
    NoValidRadius,
}

/// `(1-based index, sign)` of the noise field most transversal to `∂D` at
/// `x0`; the sign makes `sign·Xᵢ` point into `D` along the inward normal.
pub fn select_transversal(
    noise: &[VectorField],
    x0: &[f64],
    inward_normal: &[f64],
    theta: f64,
) -> Result<(usize, f64), ChartError> {
    let mut best = (0, 0.0f64);
    for (i, x) in noise.iter().enumerate() {
        let inner = linalg::dot(&x.eval(x0), inward_normal);
        if inner.abs() > best.1.abs() {
            best = (i + 1, inner);
        }
    }
    if !(best.1.abs() >= theta) {
        return Err(ChartError::Characteristic {
            max_inner: best.1.abs(),
            theta,
        });
    }
    Ok((best.0, best.1.signum()))
}

#[derive(Debug, Clone)]
pub struct BoundaryChart {
    base: Vec<f64>,
    field_index: usize,
    sign: f64,
    normal: Vec<f64>,
    tangents: Vec<Vec<f64>>,
    radius: f64,
    field: Vec<CompiledExpr>,
    constant_field: Option<Vec<f64>>,
    domain: Domain,
}

impl BoundaryChart {
    /// Chart at `x0` flowing `sign·X_{field_index}` with validity radius
    /// found by halving from `initial_radius`.
    pub fn build(
        domain: &Domain,
        noise: &[VectorField],
        x0: &[f64],
        field_index: usize,
        sign: f64,
        initial_radius: f64,
    ) -> Result<BoundaryChart, ChartError> {
        let residual = domain.phi(x0).abs();
        if !(residual <= 1e-10) {
            return Err(ChartError::NotOnBoundary(residual));
        }
        let normal = domain.inward_normal(x0).ok_or(ChartError::DegenerateNormal)?;
        let flowed = noise[field_index - 1].scaled(sign);
        let field: Vec<CompiledExpr> = flowed.components().iter().map(Expr::compile).collect();
        let constant_field = field.iter().map(CompiledExpr::constant).collect::<Option<Vec<f64>>>();
        let mut chart = BoundaryChart {
            base: x0.to_vec(),
            field_index,
            sign,
            tangents: tangent_basis(&normal),
            normal,
            radius: initial_radius,
            field,
            constant_field,
            domain: domain.clone(),
        };
        for _ in 0..MAX_HALVINGS {
            if chart.validate_box() {
                return Ok(chart);
            }
            chart.radius *= 0.5;
        }
        Err(ChartError::NoValidRadius)
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    /// 1-based index of the flowed field.
    pub fn field_index(&self) -> usize {
        self.field_index
    }

    pub fn sign(&self) -> f64 {
        self.sign
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    /// Copy restricted to a smaller radius.
    pub fn with_radius(&self, radius: f64) -> BoundaryChart {
        BoundaryChart { radius, ..self.clone() }
    }

    /// Points of the validity box `[0, r] × [-r, r]^(d-1)`, `n` per axis.
    pub fn box_grid(&self, n: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        let r = self.radius;
        let n = n.max(2);
        let mut out = Vec::new();
        let mut idx = vec![0usize; d];
        loop {
            let z: Vec<f64> = (0..d)
                .map(|a| {
                    let u = idx[a] as f64 / (n - 1) as f64;
                    if a == 0 {
                        r * u
                    } else {
                        -r + 2.0 * r * u
                    }
                })
                .collect();
            out.push(z);
            let mut carried = true;
            for v in idx.iter_mut().rev() {
                if *v + 1 < n {
                    *v += 1;
                    carried = false;
                    break;
                }
                *v = 0;
            }
            if carried {
                return out;
            }
        }
    }

    fn validate_box(&self) -> bool {
        let n = if self.dim() <= 2 { 10 } else { 5 };
        self.box_grid(n).iter().all(|z| {
            let Ok(x) = self.inverse(z) else { return false };
            if self.domain.phi(&x) < -ROUNDTRIP_TOL {
                return false;
            }
            match self.forward(&x) {
                Ok(back) => max_abs_diff(&back, z) <= ROUNDTRIP_TOL,
                Err(_) => false,
            }
        })
    }

    /// Boundary point over the tangent-plane coordinates `s`.
    pub fn sigma(&self, s: &[f64]) -> Result<Vec<f64>, ChartError> {
        let mut p = self.base.clone();
        for (sj, t) in s.iter().zip(&self.tangents) {
            for (pi, ti) in p.iter_mut().zip(t) {
                *pi += sj * ti;
            }
        }
        for _ in 0..GRAPH_NEWTON_ITERS {
            let v = self.domain.phi(&p);
            if v.abs() <= GRAPH_TOL {
                return Ok(p);
            }
            let slope = linalg::dot(&self.domain.gradient(&p), &self.normal);
            if !(slope.abs() > 0.0) || !slope.is_finite() {
                return Err(ChartError::Graph(s.to_vec()));
            }
            let step = v / slope;
            for (pi, ni) in p.iter_mut().zip(&self.normal) {
                *pi -= step * ni;
            }
        }
        if self.domain.phi(&p).abs() <= 1e-10 {
            Ok(p)
        } else {
            Err(ChartError::Graph(s.to_vec()))
        }
    }

    fn flow_field(&self, x: &[f64]) -> Vec<f64> {
        self.field.iter().map(|c| c.eval(x)).collect()
    }

    /// Time-`t` flow from `p` by classic RK4 with a fixed step count.
    pub fn flow(&self, p: &[f64], t: f64) -> Vec<f64> {
        if let Some(v) = &self.constant_field {
            return p.iter().zip(v).map(|(a, b)| a + t * b).collect();
        }
        let h = t / FLOW_STEPS as f64;
        let mut y = p.to_vec();
        let axpy = |y: &[f64], k: &[f64], a: f64| -> Vec<f64> { y.iter().zip(k).map(|(u, v)| u + a * v).collect() };
        for _ in 0..FLOW_STEPS {
            let k1 = self.flow_field(&y);
            let k2 = self.flow_field(&axpy(&y, &k1, 0.5 * h));
            let k3 = self.flow_field(&axpy(&y, &k2, 0.5 * h));
            let k4 = self.flow_field(&axpy(&y, &k3, h));
            for i in 0..y.len() {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        y
    }

    /// `F⁻¹(z)` for chart coordinates `z = (t, s)`.
    pub fn inverse(&self, z: &[f64]) -> Result<Vec<f64>, ChartError> {
        let p = self.sigma(&z[1..])?;
        Ok(self.flow(&p, z[0]))
    }

    /// Central-difference Jacobian of `F⁻¹` at `z`, as rows.
    fn inverse_jacobian(&self, z: &[f64]) -> Result<Vec<Vec<f64>>, ChartError> {
        let d = self.dim();
        let mut cols = Vec::with_capacity(d);
        for j in 0..d {
            let h = JACOBIAN_STEP * (1.0 + z[j].abs());
            let mut zp = z.to_vec();
            let mut zm = z.to_vec();
            zp[j] += h;
            zm[j] -= h;
            // the realised step, so affine maps get exact columns
            let span = zp[j] - zm[j];
            let (a, b) = (self.inverse(&zp)?, self.inverse(&zm)?);
            cols.push(a.iter().zip(&b).map(|(u, v)| (u - v) / span).collect::<Vec<f64>>());
        }
        Ok((0..d).map(|i| (0..d).map(|j| cols[j][i]).collect()).collect())
    }

    /// `F(x)` by damped Newton iteration on `F⁻¹(z) = x`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, ChartError> {
        let d = self.dim();
        let dx: Vec<f64> = x.iter().zip(&self.base).map(|(a, b)| a - b).collect();
        let v0 = self.flow_field(&self.base);
        let mut z = vec![0.0; d];
        z[0] = linalg::dot(&dx, &self.normal) / linalg::dot(&v0, &self.normal);
        for (j, t) in self.tangents.iter().enumerate() {
            z[j + 1] = linalg::dot(&dx, t);
        }
        let scale = 1.0 + linalg::norm(x);
        let residual = |z: &[f64]| -> Result<(Vec<f64>, f64), ChartError> {
            let r: Vec<f64> = self.inverse(z)?.iter().zip(x).map(|(a, b)| a - b).collect();
            let n = linalg::norm(&r);
            Ok((r, n))
        };
        let (mut r, mut rn) = residual(&z)?;
        for _ in 0..INVERSION_ITERS {
            if rn <= INVERSION_TOL * scale {
                return Ok(z);
            }
            let jac = self.inverse_jacobian(&z)?;
            let step = linalg::solve(&jac, &r).ok_or_else(|| ChartError::Inversion(x.to_vec()))?;
            let mut lambda = 1.0;
            loop {
                let trial: Vec<f64> = z.iter().zip(&step).map(|(a, b)| a - lambda * b).collect();
                if let Ok((tr, tn)) = residual(&trial) {
                    if tn < rn || lambda < 1e-3 {
                        z = trial;
                        r = tr;
                        rn = tn;
                        break;
                    }
                }
                lambda *= 0.5;
                if lambda < 1e-3 {
                    return Err(ChartError::Inversion(x.to_vec()));
                }
            }
        }
        if rn <= 1e3 * INVERSION_TOL * scale {
            Ok(z)
        } else {
            Err(ChartError::Inversion(x.to_vec()))
        }
    }

    /// `F^*(X)(z) = DF(F⁻¹(z)) X(F⁻¹(z))`, with `DF` taken as the inverse of
    /// the finite-difference Jacobian of `F⁻¹`.
    pub fn pushforward_at(&self, field: &VectorField, z: &[f64]) -> Result<Vec<f64>, ChartError> {
        let x = self.inverse(z)?;
        let jac = self.inverse_jacobian(z)?;
        linalg::solve(&jac, &field.eval(&x)).ok_or(ChartError::Inversion(x))
    }

    /// Pushforward at the chart image of the physical point `x`.
    pub fn pushforward(&self, field: &VectorField, x: &[f64]) -> Result<Vec<f64>, ChartError> {
        let z = self.forward(x)?;
        self.pushforward_at(field, &z)
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

/// Orthonormal basis of the complement of the unit vector `n`.
fn tangent_basis(n: &[f64]) -> Vec<Vec<f64>> {
    let d = n.len();
    // start from the coordinate axes least aligned with n
    let mut axes: Vec<usize> = (0..d).collect();
    axes.sort_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs()));
    let mut basis: Vec<Vec<f64>> = vec![n.to_vec()];
    for &a in &axes {
        if basis.len() == d {
            break;
        }
        let mut v = vec![0.0; d];
        v[a] = 1.0;
        for b in &basis {
            let c = linalg::dot(&v, b);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= c * bi;
            }
        }
        let len = linalg::norm(&v);
        if len > 1e-8 {
            basis.push(v.iter().map(|x| x / len).collect());
        }
    }
    basis.remove(0);
    basis
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldResidual {
    pub label: String,
    pub max_first_component: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChartReport {
    pub base: Vec<f64>,
    pub field_index: usize,
    pub sign: f64,
    pub radius: f64,
    pub n_samples: usize,
    pub n_boundary_samples: usize,
    /// `|F(x0)|`.
    pub base_residual: f64,
    /// `max |F(F⁻¹(z)) − z|` over the box samples.
    pub roundtrip_max: f64,
    /// `max |φ(F⁻¹(0, s))|`.
    pub boundary_phi_max: f64,
    /// `max |F(σ(s))₁|`.
    pub boundary_first_max: f64,
    /// `F₁ > 0` at every interior sample.
    pub interior_sign_ok: bool,
    /// `max ‖F^*(±Xᵢ) − e₁‖∞`.
    pub pushforward_e1_max: f64,
    /// First components of the other pushed fields.
    pub other_fields: Vec<FieldResidual>,
    pub fits: Vec<SubcriticalFit>,
    /// Worst failure while evaluating samples, if any.
    pub errors: Vec<String>,
}

impl ChartReport {
    pub fn geometry_pass(&self, tol: f64) -> bool {
        self.errors.is_empty()
            && self.base_residual <= tol
            && self.roundtrip_max <= tol
            && self.boundary_phi_max <= tol
            && self.boundary_first_max <= tol
            && self.interior_sign_ok
            && self.pushforward_e1_max <= 1e-6
    }

    pub fn fit_pass(&self) -> Option<bool> {
        if self.fits.is_empty() {
            None
        } else {
            Some(self.fits.iter().any(|f| f.status.passed()))
        }
    }
}

/// Diagnostics for a chart: boundary mapping, round trip, pushforward of
/// the flowed field, first components of the other fields, and
/// subcriticality of the pushed-forward fields at `{t = 0}` for orders
/// `0..=k` (capped at [`MAX_NUMERIC_ORDER`]).
pub fn verify_chart(
    chart: &BoundaryChart,
    fields: &[VectorField],
    samples_per_axis: usize,
    n_boundary: usize,
    k: Option<usize>,
) -> ChartReport {
    let d = chart.dim();
    let r = chart.radius();
    let mut errors = Vec::new();
    let note = |e: ChartError, errors: &mut Vec<String>| {
        if errors.len() < 8 {
            errors.push(e.to_string());
        }
    };

    let base_residual = match chart.forward(chart.base()) {
        Ok(z) => linalg::norm(&z),
        Err(e) => {
            note(e, &mut errors);
            f64::INFINITY
        }
    };

    // boundary: s on the axes of the tangent box (a line for d = 2)
    let mut boundary_phi_max: f64 = 0.0;
    let mut boundary_first_max: f64 = 0.0;
    let n_boundary = n_boundary.max(2);
    for j in 0..n_boundary {
        let u = -r + 2.0 * r * j as f64 / (n_boundary - 1) as f64;
        let mut s = vec![0.0; d - 1];
        if d > 1 {
            s[j % (d - 1)] = u;
        }
        match chart.sigma(&s) {
            Ok(p) => {
                boundary_phi_max = boundary_phi_max.max(chart.domain.phi(&p).abs());
                match chart.forward(&p) {
                    Ok(z) => boundary_first_max = boundary_first_max.max(z[0].abs()),
                    Err(e) => note(e, &mut errors),
                }
            }
            Err(e) => note(e, &mut errors),
        }
    }

    let grid = chart.box_grid(samples_per_axis);
    let mut roundtrip_max: f64 = 0.0;
    let mut interior_sign_ok = true;
    let mut e1_max: f64 = 0.0;
    let flowed = fields[chart.field_index()].scaled(chart.sign());
    let others: Vec<&VectorField> = fields
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != chart.field_index())
        .map(|(_, f)| f)
        .collect();
    let mut other_max = vec![0.0f64; others.len()];
    for z in &grid {
        let x = match chart.inverse(z) {
            Ok(x) => x,
            Err(e) => {
                note(e, &mut errors);
                continue;
            }
        };
        match chart.forward(&x) {
            Ok(back) => {
                roundtrip_max = roundtrip_max.max(max_abs_diff(&back, z));
                if chart.domain.phi(&x) > ROUNDTRIP_TOL && !(back[0] > 0.0) {
                    interior_sign_ok = false;
                }
            }
            Err(e) => note(e, &mut errors),
        }
        match chart.pushforward_at(&flowed, z) {
            Ok(v) => {
                let dev = v
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (c - if i == 0 { 1.0 } else { 0.0 }).abs())
                    .fold(0.0, f64::max);
                e1_max = e1_max.max(dev);
            }
            Err(e) => note(e, &mut errors),
        }
        for (slot, f) in other_max.iter_mut().zip(&others) {
            if let Ok(v) = chart.pushforward_at(f, z) {
                *slot = slot.max(v[0].abs());
            }
        }
    }

    let mut fits = Vec::new();
    if let Some(k) = k {
        let plane = Hypersurface::new(Expr::var(0), d);
        let base =
            |z: &[f64]| -> Option<Vec<Vec<f64>>> { fields.iter().map(|f| chart.pushforward_at(f, z).ok()).collect() };
        let bases = vec![vec![0.0; d]];
        let sampling = FitSampling {
            rho_min: 1e-4,
            rho_max: (0.1f64).min(0.5 * r),
            count: 31,
        };
        let inside = |z: &[f64]| z[0] >= 0.0;
        for order in 0..=k.min(MAX_NUMERIC_ORDER) {
            let lambda = |z: &[f64]| -> Option<f64> {
                let cols = numeric_bracket_columns(&base, order, z, BRACKET_STEP)?;
                cols.iter().all(|c| c.iter().all(|v| v.is_finite())).then(|| {
                    linalg::min_eigen_gram(
                        &(0..d)
                            .map(|i| cols.iter().map(|c| c[i]).collect())
                            .collect::<Vec<Vec<f64>>>(),
                    )
                })
            };
            match subcritical_fit_with(
                &lambda,
                order,
                &plane,
                &bases,
                &sampling,
                &FitConfig::default(),
                Some(&inside),
            ) {
                Ok(fit) => fits.push(fit),
                Err(e) => errors.push(e.to_string()),
            }
        }
    }

    ChartReport {
        base: chart.base().to_vec(),
        field_index: chart.field_index(),
        sign: chart.sign(),
        radius: r,
        n_samples: grid.len(),
        n_boundary_samples: n_boundary,
        base_residual,
        roundtrip_max,
        boundary_phi_max,
        boundary_first_max,
        interior_sign_ok,
        pushforward_e1_max: e1_max,
        other_fields: others
            .iter()
            .zip(other_max)
            .map(|(f, m)| FieldResidual {
                label: f.label().to_string(),
                max_first_component: m,
            })
            .collect(),
        fits,
        errors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn radial_setup() -> (Domain, Vec<VectorField>) {
        let domain = Domain::new(&parse("(1 - x^2 - y^2)*(x^2 + y^2 - 0.0625)", 2).unwrap(), 2, None).unwrap();
        let noise = vec![
            VectorField::parse("X1", &["-x/sqrt(x^2 + y^2)", "-y/sqrt(x^2 + y^2)"], 2).unwrap(),
            VectorField::parse("X2", &["-y", "x"], 2).unwrap(),
        ];
        (domain, noise)
    }

    #[test]
    fn transversal_selection() {
        let noise = vec![
            VectorField::unit("X1", 2, 1),
            VectorField::parse("X2", &["-1", "0"], 2).unwrap(),
        ];
        let (i, sign) = select_transversal(&noise, &[0.0, 0.0], &[1.0, 0.0], 1e-8).unwrap();
        assert_eq!((i, sign), (2, -1.0));
        let err = select_transversal(&noise[..1], &[0.0, 0.0], &[1.0, 0.0], 1e-8).unwrap_err();
        assert!(matches!(err, ChartError::Characteristic { .. }));
    }

    #[test]
    fn half_space_chart_is_identity() {
        let domain = Domain::new(&parse("x", 2).unwrap(), 2, Some(&[(0.0, 1.0), (-1.0, 1.0)])).unwrap();
        let noise = vec![VectorField::unit("X1", 2, 0), VectorField::unit("X2", 2, 1)];
        let chart = BoundaryChart::build(&domain, &noise, &[0.0, 0.0], 1, 1.0, 0.5).unwrap();
        for x in [[0.3, -0.2], [0.0, 0.4], [0.45, 0.45]] {
            assert_eq!(chart.forward(&x).unwrap(), x.to_vec());
            assert_eq!(chart.inverse(&x).unwrap(), x.to_vec());
        }
        let report = verify_chart(
            &chart,
            &[VectorField::zero("X0", 2), noise[0].clone(), noise[1].clone()],
            10,
            50,
            None,
        );
        assert_eq!(report.roundtrip_max, 0.0);
        assert_eq!(report.boundary_phi_max, 0.0);
        assert_eq!(report.boundary_first_max, 0.0);
        assert_eq!(report.pushforward_e1_max, 0.0);
        assert!(report.other_fields.iter().all(|f| f.max_first_component == 0.0));
        assert_eq!(chart.pushforward(&noise[1], &[0.3, 0.1]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn radial_chart_matches_closed_form() {
        let (domain, noise) = radial_setup();
        let chart = BoundaryChart::build(&domain, &noise, &[1.0, 0.0], 1, 1.0, 0.5).unwrap();
        assert_eq!(chart.radius(), 0.5);
        for x in [[0.8, 0.1], [0.6, -0.3], [0.95, 0.2]] {
            let z = chart.forward(&x).unwrap();
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            assert!((z[0] - (1.0 - r)).abs() < 1e-9, "{z:?}");
            // tangent coordinate: the tangent basis at (1, 0) is ±e2
            assert!((z[1].abs() - (x[1] / r).abs()).abs() < 1e-9, "{z:?}");
        }
        let v = chart.pushforward(&noise[1], &[0.7, 0.2]).unwrap();
        assert!(v[0].abs() < 1e-7);
    }

    #[test]
    fn radial_chart_report() {
        let (domain, noise) = radial_setup();
        let chart = BoundaryChart::build(&domain, &noise, &[1.0, 0.0], 1, 1.0, 0.5).unwrap();
        let mut fields = vec![VectorField::zero("X0", 2)];
        fields.extend(noise);
        let report = verify_chart(&chart, &fields, 10, 100, None);
        assert!(report.errors.is_empty(), "{:?}", report.errors);
        assert!(report.geometry_pass(1e-8), "{report:?}");
        // halving the radius does not make anything worse
        let small = verify_chart(&chart.with_radius(0.25), &fields, 10, 100, None);
        assert!(small.roundtrip_max <= report.roundtrip_max + 1e-12);
        assert!(small.boundary_phi_max <= report.boundary_phi_max + 1e-12);
        assert!(small.pushforward_e1_max <= report.pushforward_e1_max + 1e-8);
    }

    #[test]
    fn kusuoka_stroock_half_space_fit() {
        let domain = Domain::new(
            &parse("x", 3).unwrap(),
            3,
            Some(&[(0.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)]),
        )
        .unwrap();
        let fields = vec![
            VectorField::zero("X0", 3),
            VectorField::unit("X1", 3, 0),
            VectorField::parse("X2", &["0", "exp(-abs(x)^(-0.5)/2)", "0"], 3).unwrap(),
            VectorField::unit("X3", 3, 2),
        ];
        let chart = BoundaryChart::build(&domain, &fields[1..], &[0.0, 0.0, 0.0], 1, 1.0, 0.5).unwrap();
        let report = verify_chart(&chart, &fields, 3, 4, Some(0));
        let fit = &report.fits[0];
        assert!((fit.slope.unwrap() + 0.5).abs() < 0.05, "{fit:?}");
        assert_eq!(report.fit_pass(), Some(true));
    }

    #[test]
    fn tangent_basis_is_orthonormal() {
        let n = [0.6, 0.0, 0.8];
        let t = tangent_basis(&n);
        assert_eq!(t.len(), 2);
        for a in &t {
            assert!(linalg::dot(a, &n).abs() < 1e-15);
            assert!((linalg::norm(a) - 1.0).abs() < 1e-15);
        }
        assert!(linalg::dot(&t[0], &t[1]).abs() < 1e-15);
    }
}
