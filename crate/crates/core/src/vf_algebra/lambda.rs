use serde::Serialize;

use super::field::{enumerate_brackets, VectorField};
use super::AlgebraError;
use crate::expr::CompiledExpr;
use crate::linalg;

/// The matrix `X^(k)(x)` of field and bracket columns at a point.
#[derive(Debug, Clone, Serialize)]
pub struct FieldMatrix {
    pub point: Vec<f64>,
    pub order: usize,
    pub labels: Vec<String>,
    /// One entry per column, each of length `d`.
    pub columns: Vec<Vec<f64>>,
}

impl FieldMatrix {
    pub fn dim(&self) -> usize {
        self.point.len()
    }

    /// Row-major view (`d` rows of length `m`).
    pub fn rows(&self) -> Vec<Vec<f64>> {
        rows_of(&self.columns, self.dim())
    }

    /// Smallest eigenvalue of `X Xᵗ`.
    pub fn lambda(&self) -> f64 {
        lambda_of_columns(&self.columns, self.dim())
    }
}

pub(crate) fn rows_of(columns: &[Vec<f64>], d: usize) -> Vec<Vec<f64>> {
    (0..d).map(|i| columns.iter().map(|c| c[i]).collect()).collect()
}

pub(crate) fn lambda_of_columns(columns: &[Vec<f64>], d: usize) -> f64 {
    if columns.is_empty() {
        return 0.0;
    }
    linalg::min_eigen_gram(&rows_of(columns, d))
}

/// Fields `X0..Xn` with all left-nested brackets up to `k_max`, compiled
/// for repeated evaluation.
#[derive(Debug, Clone)]
pub struct BracketSet {
    dim: usize,
    k_max: usize,
    fields: Vec<VectorField>,
    compiled: Vec<Vec<CompiledExpr>>,
    structurally_zero: Vec<bool>,
}

impl BracketSet {
    pub fn new(base: &[VectorField], k_max: usize) -> Result<BracketSet, AlgebraError> {
        let fields = enumerate_brackets(base, k_max)?;
        let dim = base.first().map_or(0, VectorField::dim);
        let compiled = fields
            .iter()
            .map(|f| f.components().iter().map(|c| c.compile()).collect())
            .collect();
        let structurally_zero = fields.iter().map(VectorField::is_zero).collect();
        Ok(BracketSet {
            dim,
            k_max,
            fields,
            compiled,
            structurally_zero,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    fn check_order(&self, k: usize) -> Result<(), AlgebraError> {
        if k > self.k_max {
            return Err(AlgebraError::BracketOrderTooLarge { k, max: self.k_max });
        }
        Ok(())
    }

    fn check_point(&self, x: &[f64]) -> Result<(), AlgebraError> {
        if x.len() != self.dim {
            return Err(AlgebraError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    fn eval_column(&self, idx: usize, x: &[f64]) -> Vec<f64> {
        self.compiled[idx].iter().map(|c| c.eval(x)).collect()
    }

    /// `X^(k)(x)`. Structurally zero columns are kept as zeros.
    pub fn field_matrix(&self, k: usize, x: &[f64]) -> Result<FieldMatrix, AlgebraError> {
        self.check_order(k)?;
        self.check_point(x)?;
        let mut labels = Vec::new();
        let mut columns = Vec::new();
        for (idx, f) in self.fields.iter().enumerate() {
            if f.order() > k {
                continue;
            }
            let col = if self.structurally_zero[idx] {
                vec![0.0; self.dim]
            } else {
                self.eval_column(idx, x)
            };
            if col.iter().any(|v| !v.is_finite()) {
                return Err(AlgebraError::NonFinite {
                    point: x.to_vec(),
                    label: f.label().to_string(),
                });
            }
            labels.push(f.label().to_string());
            columns.push(col);
        }
        Ok(FieldMatrix {
            point: x.to_vec(),
            order: k,
            labels,
            columns,
        })
    }

    pub fn lambda(&self, k: usize, x: &[f64]) -> Result<f64, AlgebraError> {
        Ok(self.field_matrix(k, x)?.lambda())
    }

    /// `λ^(0..=k_max)(x)`, evaluating every column once. An entry is `None`
    /// when some column of that order evaluates to a non-finite value.
    pub fn ladder(&self, x: &[f64]) -> Result<Vec<Option<f64>>, AlgebraError> {
        self.check_point(x)?;
        let mut columns: Vec<Vec<f64>> = Vec::new();
        let mut finite = true;
        let mut out = Vec::with_capacity(self.k_max + 1);
        for k in 0..=self.k_max {
            for (idx, f) in self.fields.iter().enumerate() {
                if f.order() != k || self.structurally_zero[idx] {
                    continue;
                }
                let col = self.eval_column(idx, x);
                if col.iter().any(|v| !v.is_finite()) {
                    finite = false;
                }
                columns.push(col);
            }
            out.push(finite.then(|| lambda_of_columns(&columns, self.dim)));
        }
        Ok(out)
    }
}

/// `λ^(k)(x)` together with the field matrix it came from.
pub fn lambda_k(set: &BracketSet, k: usize, x: &[f64]) -> Result<(f64, FieldMatrix), AlgebraError> {
    let m = set.field_matrix(k, x)?;
    Ok((m.lambda(), m))
}

/// Field columns `X0..Xn` known only numerically at each point.
pub type NumericBase<'a> = dyn Fn(&[f64]) -> Option<Vec<Vec<f64>>> + Sync + 'a;

/// Columns of all left-nested words up to order `k`, with brackets formed by
/// central differences of step `h` (nested for higher orders). `None` when
/// any evaluation fails.
pub fn numeric_bracket_columns(base: &NumericBase<'_>, k: usize, x: &[f64], h: f64) -> Option<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for r in 0..=k {
        out.extend(numeric_level(base, r, x, h)?);
    }
    Some(out)
}

fn numeric_level(base: &NumericBase<'_>, r: usize, x: &[f64], h: f64) -> Option<Vec<Vec<f64>>> {
    if r == 0 {
        return base(x);
    }
    let d = x.len();
    let fields = base(x)?;
    let inner = numeric_level(base, r - 1, x, h)?;
    // jac_*[w][i][j] = d(col_w)_i / dx_j
    let mut jac_fields = vec![vec![vec![0.0; d]; d]; fields.len()];
    let mut jac_inner = vec![vec![vec![0.0; d]; d]; inner.len()];
    for j in 0..d {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let (fp, fm) = (base(&xp)?, base(&xm)?);
        let (ip, im) = (numeric_level(base, r - 1, &xp, h)?, numeric_level(base, r - 1, &xm, h)?);
        for w in 0..fields.len() {
            for i in 0..d {
                jac_fields[w][i][j] = (fp[w][i] - fm[w][i]) / (2.0 * h);
            }
        }
        for w in 0..inner.len() {
            for i in 0..d {
                jac_inner[w][i][j] = (ip[w][i] - im[w][i]) / (2.0 * h);
            }
        }
    }
    let mut level = Vec::with_capacity(fields.len() * inner.len());
    for (a, xa) in fields.iter().enumerate() {
        for (w, yw) in inner.iter().enumerate() {
            let col = (0..d)
                .map(|i| linalg::dot(&jac_inner[w][i], xa) - linalg::dot(&jac_fields[a][i], yw))
                .collect();
            level.push(col);
        }
    }
    Some(level)
}
