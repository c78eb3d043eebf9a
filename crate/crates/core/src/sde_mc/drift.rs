use crate::expr::Expr;
use crate::vf_algebra::VectorField;

/// Itô drift of the path SDE driven by `√2·X1..√2·Xn` with drift `X0`:
/// `b = X0 + ½ Σ D(√2 Xᵢ)(√2 Xᵢ) = X0 + Σ (DXᵢ) Xᵢ`.
///
/// `fields` holds `X0..Xn`.
pub fn ito_drift(fields: &[VectorField]) -> VectorField {
    let dim = fields[0].dim();
    let mut comps: Vec<Expr> = fields[0].components().to_vec();
    for x in &fields[1..] {
        // (DX)·X is X applied to itself
        for (acc, term) in comps.iter_mut().zip(x.apply_to(x)) {
            *acc = Expr::add(acc.clone(), term);
        }
    }
    debug_assert_eq!(comps.len(), dim);
    VectorField::new("b", comps)
}
