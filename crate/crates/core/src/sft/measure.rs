use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::{SftError, TransitionMatrix, MAX_ITERATIONS};

const VALIDATION_TOL: f64 = 1e-9;
const STATIONARY_TOL: f64 = 1e-15;

/// A stationary Markov measure on the states of an SFT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovMeasure {
    d: usize,
    p: Vec<f64>,
    pi: Vec<f64>,
}

impl MarkovMeasure {
    /// Validates compatibility with `a`, row-stochasticity and stationarity
    /// (all within `1e-9`).
    pub fn new(a: &TransitionMatrix, p: Vec<f64>, pi: Vec<f64>) -> Result<Self, SftError> {
        let d = a.d();
        check_stochastic(a, &p)?;
        if pi.len() != d {
            return Err(SftError::InvalidMeasure(format!("pi has {} entries for {d} states", pi.len())));
        }
        if pi.iter().any(|&x| !(x >= 0.0)) {
            return Err(SftError::InvalidMeasure("pi has a negative entry".into()));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > VALIDATION_TOL {
            return Err(SftError::InvalidMeasure(format!("pi sums to {total}")));
        }
        let m = Self { d, p, pi };
        let res = m.stationarity_residual();
        if res > VALIDATION_TOL {
            return Err(SftError::InvalidMeasure(format!("pi P != pi (residual {res:e})")));
        }
        Ok(m)
    }

    /// Builds the measure of a compatible stochastic matrix, computing its
    /// stationary vector by power iteration on the lazy chain `(P + I) / 2`.
    pub fn from_stochastic(a: &TransitionMatrix, p: Vec<f64>) -> Result<Self, SftError> {
        check_stochastic(a, &p)?;
        let pi = stationary(&p, a.d())?;
        Self::new(a, p, pi)
    }

    /// Rows drawn from the symmetric Dirichlet(1) law on the allowed entries.
    pub fn random_compatible<R: Rng + ?Sized>(a: &TransitionMatrix, rng: &mut R) -> Result<Self, SftError> {
        let d = a.d();
        let mut p = vec![0.0; d * d];
        for i in 0..d {
            let mut total = 0.0;
            for j in a.successors(i) {
                let e: f64 = rng.sample(Exp1);
                p[i * d + j] = e;
                total += e;
            }
            for j in 0..d {
                p[i * d + j] /= total;
            }
        }
        Self::from_stochastic(a, p)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.d + j]
    }

    pub fn transition_matrix(&self) -> &[f64] {
        &self.p
    }

    pub fn stationary(&self) -> &[f64] {
        &self.pi
    }

    /// `‖πP − π‖∞`.
    pub fn stationarity_residual(&self) -> f64 {
        let d = self.d;
        (0..d)
            .map(|j| {
                let s: f64 = (0..d).map(|i| self.pi[i] * self.p[i * d + j]).sum();
                (s - self.pi[j]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Natural log of `μ([w₀ … w_{n-1}]) = π(w₀) Π P(w_k, w_{k+1})`.
    pub fn log_cylinder_measure(&self, word: &[usize]) -> f64 {
        let Some(&first) = word.first() else { return 0.0 };
        let mut s = self.pi[first].ln();
        for w in word.windows(2) {
            s += self.p(w[0], w[1]).ln();
        }
        s
    }

    pub fn cylinder_measure(&self, word: &[usize]) -> f64 {
        self.log_cylinder_measure(word).exp()
    }

    /// Largest entrywise difference of transition matrices and stationary vectors.
    pub fn max_entry_diff(&self, other: &MarkovMeasure) -> f64 {
        assert_eq!(self.d, other.d);
        self.p
            .iter()
            .zip(&other.p)
            .chain(self.pi.iter().zip(&other.pi))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_stochastic(a: &TransitionMatrix, p: &[f64]) -> Result<(), SftError> {
    let d = a.d();
    if p.len() != d * d {
        return Err(SftError::InvalidMeasure(format!("P has {} entries, expected {}", p.len(), d * d)));
    }
    for i in 0..d {
        let mut row = 0.0;
        for j in 0..d {
            let x = p[i * d + j];
            if !(x >= 0.0) {
                return Err(SftError::InvalidMeasure(format!("P[{i}][{j}] = {x} is negative")));
            }
            if x > 0.0 && !a.allowed(i, j) {
                return Err(SftError::InvalidMeasure(format!("P[{i}][{j}] > 0 on a forbidden transition")));
            }
            row += x;
        }
        if (row - 1.0).abs() > VALIDATION_TOL {
            return Err(SftError::InvalidMeasure(format!("row {i} of P sums to {row}")));
        }
    }
    Ok(())
}

fn stationary(p: &[f64], d: usize) -> Result<Vec<f64>, SftError> {
    let mut pi = vec![1.0 / d as f64; d];
    let mut next = vec![0.0; d];
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        for j in 0..d {
            next[j] = (0..d).map(|i| pi[i] * p[i * d + j]).sum();
        }
        residual = (0..d).map(|j| (next[j] - pi[j]).abs()).fold(0.0, f64::max);
        if residual <= STATIONARY_TOL {
            let total: f64 = next.iter().sum();
            return Ok(next.into_iter().map(|x| x / total).collect());
        }
        for j in 0..d {
            pi[j] = 0.5 * (pi[j] + next[j]);
        }
    }
    Err(SftError::NoConvergence { iterations: MAX_ITERATIONS, residual })
}
