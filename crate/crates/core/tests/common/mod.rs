#![allow(dead_code)]

use nuexp::sft::TransitionMatrix;
use rand::Rng;

/// Random irreducible 0/1 matrix on `d` states: a Hamiltonian cycle plus
/// independent extra edges with probability `density`.
pub fn random_irreducible<R: Rng>(rng: &mut R, d: usize, density: f64) -> TransitionMatrix {
    let mut rows = vec![vec![0u8; d]; d];
    for (i, row) in rows.iter_mut().enumerate() {
        row[(i + 1) % d] = 1;
        for v in row.iter_mut() {
            if rng.random_bool(density) {
                *v = 1;
            }
        }
    }
    TransitionMatrix::new(rows).expect("cycle keeps every state alive")
}

/// Bisection root of a continuous function with a sign change on `[lo, hi]`.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `(1/n) log Σ exp(S_nφ)` over admissible words of length `n`, summed
/// in log space by extending words one symbol at a time.
pub fn log_partition_sum(a: &TransitionMatrix, phi: &[f64], n: usize) -> f64 {
    let d = a.d();
    let mut z: Vec<f64> = phi.to_vec();
    for _ in 1..n {
        let mut next = vec![f64::NEG_INFINITY; d];
        for i in 0..d {
            for j in a.successors(i) {
                next[j] = log_add(next[j], z[i] + phi[j]);
            }
        }
        z = next;
    }
    z.into_iter().fold(f64::NEG_INFINITY, log_add) / n as f64
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}
