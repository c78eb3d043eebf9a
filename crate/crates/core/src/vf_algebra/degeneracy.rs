use rayon::prelude::*;
use serde::Serialize;

use super::lambda::BracketSet;

/// Ladder `λ^(0..=k_max)` and Hörmander flag at one sample point.
#[derive(Debug, Clone, Serialize)]
pub struct PointRecord {
    pub point: Vec<f64>,
    /// `None` where some column of that order is non-finite.
    pub lambdas: Vec<Option<f64>>,
    pub hormander: bool,
    /// The flag was decided without a finite `λ^(k_max)`.
    pub nonfinite: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DegeneracyReport {
    pub tol_k: f64,
    pub k_max: usize,
    pub records: Vec<PointRecord>,
}

impl DegeneracyReport {
    /// Points where the bracket condition fails, in sample order.
    pub fn k_points(&self) -> impl Iterator<Item = &PointRecord> {
        self.records.iter().filter(|r| !r.hormander)
    }

    pub fn k_count(&self) -> usize {
        self.k_points().count()
    }

    pub fn nonfinite_count(&self) -> usize {
        self.records.iter().filter(|r| r.nonfinite).count()
    }
}

/// Evaluate the ladder on every sample point and mark the points of `K`,
/// i.e. those with `λ^(k_max) < tol_k`.
///
/// Rounding can make a computed ladder dip by an ulp between orders, so
/// each ladder is replaced by its running maximum. When `λ^(k_max)` is not
/// finite, the largest finite lower order is a lower bound for it: the point
/// passes if that bound clears `tol_k` and is otherwise counted in `K`.
pub fn classify_k(set: &BracketSet, points: &[Vec<f64>], tol_k: f64) -> DegeneracyReport {
    let k_max = set.k_max();
    let records = points
        .par_iter()
        .map(|x| {
            let mut lambdas = set.ladder(x).unwrap_or_else(|_| vec![None; k_max + 1]);
            let mut running = f64::NEG_INFINITY;
            for v in lambdas.iter_mut().flatten() {
                running = running.max(*v);
                *v = running;
            }
            let top = lambdas[k_max];
            let lower_bound = lambdas.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
            let hormander = match top {
                Some(v) => v >= tol_k,
                None => lower_bound >= tol_k,
            };
            PointRecord {
                point: x.clone(),
                lambdas,
                hormander,
                nonfinite: top.is_none(),
            }
        })
        .collect();
    DegeneracyReport { tol_k, k_max, records }
}
