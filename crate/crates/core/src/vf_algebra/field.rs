use serde::Serialize;

use super::AlgebraError;
use crate::expr::{self, Expr, ExprError};

/// Largest bracket order accepted by [`enumerate_brackets`].
pub const MAX_BRACKET_ORDER: usize = 6;

/// A vector field with symbolic components.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: Vec<Expr>,
    order: usize,
    label: String,
}

impl VectorField {
    /// An order-0 field.
    pub fn new(label: impl Into<String>, components: Vec<Expr>) -> VectorField {
        VectorField {
            components,
            order: 0,
            label: label.into(),
        }
    }

    pub fn parse(label: impl Into<String>, sources: &[&str], dim: usize) -> Result<VectorField, ExprError> {
        let components = sources
            .iter()
            .map(|s| expr::parse(s, dim))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(VectorField::new(label, components))
    }

    pub fn zero(label: impl Into<String>, dim: usize) -> VectorField {
        VectorField::new(label, vec![Expr::zero(); dim])
    }

    /// Unit coordinate field `e_{axis+1}`.
    pub fn unit(label: impl Into<String>, dim: usize, axis: usize) -> VectorField {
        let components = (0..dim)
            .map(|i| if i == axis { Expr::one() } else { Expr::zero() })
            .collect();
        VectorField::new(label, components)
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Expr::is_zero)
    }

    pub fn is_constant(&self) -> bool {
        self.components.iter().all(Expr::is_constant)
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    pub fn scaled(&self, alpha: f64) -> VectorField {
        VectorField {
            components: self.components.iter().map(|c| Expr::scale(alpha, c.clone())).collect(),
            order: self.order,
            label: self.label.clone(),
        }
    }

    /// Symbolic Jacobian row-major: `jac[i][j] = d X_i / d x_j`.
    pub fn jacobian(&self) -> Vec<Vec<Expr>> {
        let d = self.dim();
        self.components.iter().map(|c| c.gradient(d)).collect()
    }

    /// Directional derivative of `other` along `self`: `D(other) · self`.
    pub fn apply_to(&self, other: &VectorField) -> Vec<Expr> {
        let d = self.dim();
        other
            .components
            .iter()
            .map(|yi| {
                (0..d).fold(Expr::zero(), |acc, j| {
                    Expr::add(acc, Expr::mul(yi.diff(j), self.components[j].clone()))
                })
            })
            .collect()
    }
}

/// `[X, Y] = DY·X − DX·Y`, computed symbolically.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> Result<VectorField, AlgebraError> {
    if x.dim() != y.dim() {
        return Err(AlgebraError::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    let dy_x = x.apply_to(y);
    let dx_y = y.apply_to(x);
    let components = dy_x.into_iter().zip(dx_y).map(|(a, b)| Expr::sub(a, b)).collect();
    Ok(VectorField {
        components,
        order: x.order + y.order + 1,
        label: format!("[{},{}]", x.label, y.label),
    })
}

/// The input fields followed by every left-nested word
/// `[X_{i1},[X_{i2},[…,X_{ij}]]]` with `1..=k` bracket operations.
///
/// Output is grouped by order; within an order, words are listed with the
/// outermost index varying slowest.
pub fn enumerate_brackets(fields: &[VectorField], k: usize) -> Result<Vec<VectorField>, AlgebraError> {
    if k > MAX_BRACKET_ORDER {
        return Err(AlgebraError::BracketOrderTooLarge {
            k,
            max: MAX_BRACKET_ORDER,
        });
    }
    if let Some(first) = fields.first() {
        for f in fields {
            if f.dim() != first.dim() {
                return Err(AlgebraError::DimensionMismatch {
                    expected: first.dim(),
                    found: f.dim(),
                });
            }
        }
    }
    let mut all: Vec<VectorField> = fields.to_vec();
    let mut level: Vec<VectorField> = fields.to_vec();
    for _ in 0..k {
        let mut next = Vec::with_capacity(level.len() * fields.len());
        for outer in fields {
            for inner in &level {
                next.push(lie_bracket(outer, inner)?);
            }
        }
        all.extend(next.iter().cloned());
        level = next;
    }
    Ok(all)
}

/// Number of columns produced by [`enumerate_brackets`] for `m` input fields.
pub fn bracket_count(m: usize, k: usize) -> usize {
    (1..=k + 1).map(|r| m.pow(r as u32)).sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldSummary {
    pub label: String,
    pub order: usize,
    pub components: Vec<String>,
}

impl From<&VectorField> for FieldSummary {
    fn from(f: &VectorField) -> FieldSummary {
        FieldSummary {
            label: f.label.clone(),
            order: f.order,
            components: f.components.iter().map(|c| c.to_string()).collect(),
        }
    }
}
