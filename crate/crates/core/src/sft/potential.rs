use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{SftError, TransitionMatrix};

/// A finite word over the state alphabet `0..d`.
pub type Word = Vec<usize>;

/// A potential that depends on the first `depth` symbols only.
///
/// Values are defined on exactly the admissible words of length `depth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocallyConstantPotential {
    depth: usize,
    alphabet: usize,
    values: BTreeMap<Word, f64>,
}

impl LocallyConstantPotential {
    pub fn new(
        a: &TransitionMatrix,
        depth: usize,
        values: BTreeMap<Word, f64>,
    ) -> Result<Self, SftError> {
        if depth == 0 {
            return Err(SftError::InvalidPotential("depth must be at least 1".into()));
        }
        for (w, v) in &values {
            if w.len() != depth {
                return Err(SftError::InvalidPotential(format!(
                    "word {w:?} has length {}, expected {depth}",
                    w.len()
                )));
            }
            if !a.is_admissible(w) {
                return Err(SftError::InvalidPotential(format!("word {w:?} is not admissible")));
            }
            if !v.is_finite() {
                return Err(SftError::InvalidPotential(format!("value at {w:?} is not finite")));
            }
        }
        let expected = admissible_words(a, depth);
        if expected.len() != values.len() {
            let missing = expected.iter().find(|w| !values.contains_key(*w));
            return Err(SftError::InvalidPotential(format!(
                "potential must be defined on every admissible word; missing {missing:?}"
            )));
        }
        Ok(Self { depth, alphabet: a.d(), values })
    }

    pub fn from_fn(a: &TransitionMatrix, depth: usize, f: impl Fn(&[usize]) -> f64) -> Self {
        assert!(depth >= 1);
        let values = admissible_words(a, depth).into_iter().map(|w| {
            let v = f(&w);
            (w, v)
        });
        Self { depth, alphabet: a.d(), values: values.collect() }
    }

    pub fn constant(a: &TransitionMatrix, depth: usize, c: f64) -> Self {
        Self::from_fn(a, depth, |_| c)
    }

    pub fn zero(a: &TransitionMatrix) -> Self {
        Self::constant(a, 1, 0.0)
    }

    /// Depth-1 potential `φ(i) = values[i]`.
    pub fn from_state_values(a: &TransitionMatrix, values: &[f64]) -> Result<Self, SftError> {
        if values.len() != a.d() {
            return Err(SftError::InvalidPotential(format!(
                "{} state values for {} states",
                values.len(),
                a.d()
            )));
        }
        let map = values.iter().enumerate().map(|(i, &v)| (vec![i], v)).collect();
        Self::new(a, 1, map)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn value(&self, word: &[usize]) -> Option<f64> {
        self.values.get(word).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Word, f64)> {
        self.values.iter().map(|(w, &v)| (w, v))
    }

    pub fn max_value(&self) -> f64 {
        self.values.values().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.values().copied().fold(f64::INFINITY, f64::min)
    }

    /// Values indexed by state, for depth-1 potentials.
    pub fn state_values(&self) -> Result<Vec<f64>, SftError> {
        if self.depth != 1 {
            return Err(SftError::DepthMismatch { expected: 1, found: self.depth });
        }
        let mut out = vec![0.0; self.alphabet];
        for (w, &v) in &self.values {
            out[w[0]] = v;
        }
        Ok(out)
    }

    /// Birkhoff sum `Σ_{k} φ(w_k … w_{k+depth-1})` over all full windows of `word`.
    pub fn birkhoff_sum(&self, word: &[usize]) -> Option<f64> {
        word.windows(self.depth).map(|w| self.value(w)).sum()
    }
}

/// All admissible words of length `k`, in lexicographic order.
pub fn admissible_words(a: &TransitionMatrix, k: usize) -> Vec<Word> {
    let mut out = Vec::new();
    if k == 0 {
        return out;
    }
    let mut stack: Vec<Word> = (0..a.d()).rev().map(|s| vec![s]).collect();
    while let Some(w) = stack.pop() {
        if w.len() == k {
            out.push(w);
            continue;
        }
        let last = *w.last().unwrap();
        for s in (0..a.d()).rev().filter(|&s| a.allowed(last, s)) {
            let mut next = w.clone();
            next.push(s);
            stack.push(next);
        }
    }
    out
}

/// Higher-block presentation: admissible `k`-words become states and `φ`
/// becomes a depth-1 potential on them.
///
/// State `i` of the returned matrix is `admissible_words(a, k)[i]`; the
/// transition `u → v` is allowed iff `u[1..] == v[..k-1]`.
pub fn recode(
    a: &TransitionMatrix,
    phi: &LocallyConstantPotential,
) -> (TransitionMatrix, LocallyConstantPotential) {
    let k = phi.depth();
    if k == 1 {
        return (a.clone(), phi.clone());
    }
    let words = admissible_words(a, k);
    let n = words.len();
    let mut by_prefix: HashMap<&[usize], Vec<usize>> = HashMap::new();
    for (j, w) in words.iter().enumerate() {
        by_prefix.entry(&w[..k - 1]).or_default().push(j);
    }
    let mut entries = vec![false; n * n];
    for (i, w) in words.iter().enumerate() {
        if let Some(next) = by_prefix.get(&w[1..]) {
            for &j in next {
                entries[i * n + j] = true;
            }
        }
    }
    let block = TransitionMatrix::from_entries(n, entries)
        .expect("higher-block presentation of a matrix without dead states has none");
    let values = words
        .iter()
        .enumerate()
        .map(|(i, w)| (vec![i], phi.value(w).expect("potential covers admissible words")))
        .collect();
    let lifted = LocallyConstantPotential { depth: 1, alphabet: n, values };
    (block, lifted)
}
