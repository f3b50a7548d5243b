use serde::{Deserialize, Serialize};

use super::{SftError, TransitionMatrix};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 1_000_000;
const POLISH_STEPS: usize = 64;

/// Spectral radius and positive eigenvectors of an irreducible nonnegative matrix.
///
/// `right` has unit Euclidean norm and `left` is scaled so that
/// `Σ left[i] * right[i] = 1`. `tol` is the achieved residual
/// `‖Mv − λv‖∞ / max(1, λ)` measured on sup-normalized vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerronData {
    pub lambda: f64,
    pub right: Vec<f64>,
    pub left: Vec<f64>,
    pub tol: f64,
}

pub fn perron(a: &TransitionMatrix, tol: f64) -> Result<PerronData, SftError> {
    perron_weighted(a, &a.to_f64(), tol)
}

/// Perron data of a nonnegative row-major matrix `m` whose support is `pattern`.
///
/// Power iteration runs on `M + sI` with `s` the maximal row (column) sum,
/// which has the same eigenvectors and is primitive whenever `pattern` is
/// irreducible, so periodic matrices converge too.
pub fn perron_weighted(
    pattern: &TransitionMatrix,
    m: &[f64],
    tol: f64,
) -> Result<PerronData, SftError> {
    assert!(tol > 0.0, "tolerance must be positive");
    let d = pattern.d();
    assert_eq!(m.len(), d * d, "weight matrix has the wrong size");
    if !pattern.is_irreducible() {
        return Err(SftError::NotIrreducible);
    }

    let (lambda_r, mut right, res_r) = dominant(m, d, false, tol)?;
    let (lambda_l, mut left, res_l) = dominant(m, d, true, tol)?;
    // two-sided Rayleigh quotient: error is the product of both residuals
    let mut mr = vec![0.0; d];
    apply(m, d, false, &right, &mut mr);
    let num: f64 = left.iter().zip(&mr).map(|(l, x)| l * x).sum();
    let den: f64 = left.iter().zip(&right).map(|(l, r)| l * r).sum();
    let lambda = if num.is_finite() && den > 0.0 { num / den } else { 0.5 * (lambda_r + lambda_l) };

    let norm = right.iter().map(|x| x * x).sum::<f64>().sqrt();
    right.iter_mut().for_each(|x| *x /= norm);
    let pairing: f64 = left.iter().zip(&right).map(|(l, r)| l * r).sum();
    left.iter_mut().for_each(|x| *x /= pairing);

    Ok(PerronData { lambda, right, left, tol: res_r.max(res_l) })
}

fn apply(m: &[f64], d: usize, transpose: bool, v: &[f64], out: &mut [f64]) {
    for i in 0..d {
        out[i] = if transpose {
            (0..d).map(|k| m[k * d + i] * v[k]).sum()
        } else {
            (0..d).map(|k| m[i * d + k] * v[k]).sum()
        };
    }
}

fn dominant(m: &[f64], d: usize, transpose: bool, tol: f64) -> Result<(f64, Vec<f64>, f64), SftError> {
    let shift = (0..d)
        .map(|i| {
            (0..d)
                .map(|k| if transpose { m[k * d + i] } else { m[i * d + k] })
                .sum::<f64>()
        })
        .fold(0.0, f64::max);

    let mut v = vec![1.0; d];
    let mut mv = vec![0.0; d];
    let mut residual = f64::INFINITY;
    // once within tol, keep iterating a bounded number of steps toward
    // rounding level; cylinder products compound the eigenvector error
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut polish = 0;
    for _ in 0..MAX_ITERATIONS {
        apply(m, d, transpose, &v, &mut mv);
        let lambda = rayleigh(&v, &mv);
        residual = v
            .iter()
            .zip(&mv)
            .map(|(x, y)| (y - lambda * x).abs())
            .fold(0.0, f64::max)
            / lambda.max(1.0);
        if residual <= tol {
            if best.as_ref().is_none_or(|b| residual < b.2) {
                best = Some((lambda, v.clone(), residual));
            }
            polish += 1;
            if polish > POLISH_STEPS || residual <= 4.0 * f64::EPSILON {
                break;
            }
        }
        let mut top = 0.0f64;
        for (x, y) in v.iter_mut().zip(&mv) {
            *x = y + shift * *x;
            top = top.max(*x);
        }
        v.iter_mut().for_each(|x| *x /= top);
    }
    best.ok_or(SftError::NoConvergence { iterations: MAX_ITERATIONS, residual })
}

fn rayleigh(v: &[f64], mv: &[f64]) -> f64 {
    let num: f64 = v.iter().zip(mv).map(|(a, b)| a * b).sum();
    let den: f64 = v.iter().map(|a| a * a).sum();
    num / den
}
