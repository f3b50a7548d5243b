//! Subshifts of finite type and their thermodynamic formalism.
//!
//! A [`TransitionMatrix`] describes a one-sided topological Markov chain on
//! `d` symbols. Everything spectral goes through [`perron`], which only
//! accepts irreducible matrices; potentials of depth `k > 1` are first
//! rewritten on the higher-block presentation by [`recode`].

mod io;
mod measure;
mod perron;
mod potential;
mod thermo;

use std::collections::VecDeque;

use num_integer::Integer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{parse_sft_json, SftDocument};
pub use measure::MarkovMeasure;
pub use perron::{perron, perron_weighted, PerronData, DEFAULT_TOL, MAX_ITERATIONS};
pub use potential::{admissible_words, recode, LocallyConstantPotential, Word};
pub use thermo::{
    equilibrium_markov, gibbs_bounds, integral, low_variation_check, markov_entropy,
    parry_measure, pressure, topological_entropy, variational_gap, variational_gap_sample,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SftError {
    #[error("transition matrix is not square: row {row} has {len} entries, expected {d}")]
    NotSquare { row: usize, len: usize, d: usize },
    #[error("transition matrix entry ({row}, {col}) = {value} is not 0 or 1")]
    InvalidEntry { row: usize, col: usize, value: u8 },
    #[error("state {0} has an empty row or column")]
    DeadState(usize),
    #[error("transition matrix must have at least one state")]
    Empty,
    #[error("transition matrix is not irreducible")]
    NotIrreducible,
    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("potential depth {found} does not match the expected depth {expected}")]
    DepthMismatch { expected: usize, found: usize },
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("invalid Markov measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid SFT document: {0}")]
    Document(String),
}

/// 0/1 admissibility matrix of a subshift of finite type.
///
/// Irreducibility and period are computed once at construction from the
/// transition digraph; they are never taken on trust.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u8>>", into = "Vec<Vec<u8>>")]
pub struct TransitionMatrix {
    d: usize,
    entries: Vec<bool>,
    irreducible: bool,
    period: usize,
}

impl TransitionMatrix {
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self, SftError> {
        let d = rows.len();
        if d == 0 {
            return Err(SftError::Empty);
        }
        let mut entries = Vec::with_capacity(d * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(SftError::NotSquare { row: i, len: row.len(), d });
            }
            for (j, &v) in row.iter().enumerate() {
                match v {
                    0 => entries.push(false),
                    1 => entries.push(true),
                    _ => return Err(SftError::InvalidEntry { row: i, col: j, value: v }),
                }
            }
        }
        Self::from_entries(d, entries)
    }

    pub(crate) fn from_entries(d: usize, entries: Vec<bool>) -> Result<Self, SftError> {
        debug_assert_eq!(entries.len(), d * d);
        for s in 0..d {
            let row = (0..d).any(|j| entries[s * d + j]);
            let col = (0..d).any(|i| entries[i * d + s]);
            if !row || !col {
                return Err(SftError::DeadState(s));
            }
        }
        let mut m = Self { d, entries, irreducible: false, period: 0 };
        let (irreducible, period) = m.connectivity();
        m.irreducible = irreducible;
        m.period = period;
        Ok(m)
    }

    /// The full shift on `k` symbols.
    pub fn full_shift(k: usize) -> Self {
        Self::from_entries(k, vec![true; k * k]).expect("full shift has no dead states")
    }

    /// `[[1,1],[1,0]]`: no two consecutive 1s.
    pub fn golden_mean() -> Self {
        Self::new(vec![vec![1, 1], vec![1, 0]]).expect("valid matrix")
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn allowed(&self, i: usize, j: usize) -> bool {
        self.entries[i * self.d + j]
    }

    pub fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.d).filter(move |&j| self.allowed(i, j))
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        (0..self.d)
            .map(|i| (0..self.d).map(|j| self.allowed(i, j) as u8).collect())
            .collect()
    }

    pub fn is_irreducible(&self) -> bool {
        self.irreducible
    }

    /// Period of the transition digraph; `0` when the matrix is reducible.
    pub fn period(&self) -> usize {
        self.period
    }

    pub fn is_mixing(&self) -> bool {
        self.irreducible && self.period == 1
    }

    pub fn is_admissible(&self, word: &[usize]) -> bool {
        word.iter().all(|&s| s < self.d) && word.windows(2).all(|w| self.allowed(w[0], w[1]))
    }

    /// Row-major `d×d` matrix with entries in `{0.0, 1.0}`.
    pub fn to_f64(&self) -> Vec<f64> {
        self.entries.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    /// Strong connectivity by two breadth-first closures from state 0, and
    /// the period as the gcd of `level(u) + 1 - level(v)` over all edges.
    fn connectivity(&self) -> (bool, usize) {
        let d = self.d;
        let forward = self.bfs_levels(false);
        let backward = self.bfs_levels(true);
        let irreducible = forward.iter().all(Option::is_some) && backward.iter().all(Option::is_some);
        if !irreducible {
            return (false, 0);
        }
        let mut g: i64 = 0;
        for u in 0..d {
            for v in self.successors(u) {
                let lu = forward[u].unwrap() as i64;
                let lv = forward[v].unwrap() as i64;
                g = g.gcd(&(lu + 1 - lv));
            }
        }
        (true, g.unsigned_abs() as usize)
    }

    fn bfs_levels(&self, reversed: bool) -> Vec<Option<usize>> {
        let d = self.d;
        let mut level = vec![None; d];
        let mut queue = VecDeque::from([0usize]);
        level[0] = Some(0);
        while let Some(u) = queue.pop_front() {
            let lu = level[u].unwrap();
            for v in 0..d {
                let edge = if reversed { self.allowed(v, u) } else { self.allowed(u, v) };
                if edge && level[v].is_none() {
                    level[v] = Some(lu + 1);
                    queue.push_back(v);
                }
            }
        }
        level
    }
}

impl TryFrom<Vec<Vec<u8>>> for TransitionMatrix {
    type Error = SftError;

    fn try_from(rows: Vec<Vec<u8>>) -> Result<Self, Self::Error> {
        Self::new(rows)
    }
}

impl From<TransitionMatrix> for Vec<Vec<u8>> {
    fn from(m: TransitionMatrix) -> Self {
        m.rows()
    }
}

/// Transitivity report of a transition digraph: `(transitive, mixing, period)`.
pub fn transitivity(a: &TransitionMatrix) -> (bool, bool, usize) {
    (a.is_irreducible(), a.is_mixing(), a.period())
}
