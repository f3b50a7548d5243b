use serde::Serialize;

use super::CodingError;
use crate::sft::{admissible_words, LocallyConstantPotential, MarkovMeasure, SftError, TransitionMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LengthExtremes {
    pub n: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// Extremes of `μ([w]) / exp(S_nφ(w) − nP)` over admissible words.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GibbsScan {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub by_length: Vec<LengthExtremes>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GibbsRow {
    pub word: String,
    pub mu: f64,
    pub s_n_phi: f64,
    pub ratio: f64,
}

fn inputs<'a>(
    a: &TransitionMatrix,
    mu: &'a MarkovMeasure,
    phi: &LocallyConstantPotential,
) -> Result<(&'a [f64], Vec<f64>), CodingError> {
    if mu.d() != a.d() || phi.alphabet() != a.d() {
        return Err(SftError::InvalidPotential("measure, potential and matrix disagree on the alphabet".into()).into());
    }
    Ok((mu.stationary(), phi.state_values()?))
}

/// All words of length `1..=max_len` at once: the log-ratio is additive
/// along the word, so per-length extremes come from a max-plus recursion
/// over the last symbol.
pub fn gibbs_ratio_scan(
    a: &TransitionMatrix,
    mu: &MarkovMeasure,
    phi: &LocallyConstantPotential,
    p: f64,
    max_len: usize,
) -> Result<GibbsScan, CodingError> {
    if max_len == 0 {
        return Err(CodingError::InvalidArgument("max_len must be positive".into()));
    }
    let (pi, v) = inputs(a, mu, phi)?;
    let d = a.d();
    let mut hi: Vec<f64> = (0..d).map(|j| pi[j].ln() - v[j] + p).collect();
    let mut lo = hi.clone();
    let mut by_length = Vec::with_capacity(max_len);
    for n in 1..=max_len {
        if n > 1 {
            let mut nhi = vec![f64::NEG_INFINITY; d];
            let mut nlo = vec![f64::INFINITY; d];
            for i in 0..d {
                for j in a.successors(i) {
                    let step = mu.p(i, j).ln() - v[j] + p;
                    nhi[j] = nhi[j].max(hi[i] + step);
                    nlo[j] = nlo[j].min(lo[i] + step);
                }
            }
            hi = nhi;
            lo = nlo;
        }
        let max = hi.iter().copied().fold(f64::NEG_INFINITY, f64::max).exp();
        let min = lo.iter().copied().fold(f64::INFINITY, f64::min).exp();
        by_length.push(LengthExtremes { n, min_ratio: min, max_ratio: max });
    }
    Ok(GibbsScan {
        min_ratio: by_length.iter().map(|e| e.min_ratio).fold(f64::INFINITY, f64::min),
        max_ratio: by_length.iter().map(|e| e.max_ratio).fold(f64::NEG_INFINITY, f64::max),
        by_length,
    })
}

/// Per-word rows for every admissible word of length `1..=max_len`, in
/// length-then-lexicographic order, stopping after `limit` rows.
pub fn gibbs_scan_rows(
    a: &TransitionMatrix,
    mu: &MarkovMeasure,
    phi: &LocallyConstantPotential,
    p: f64,
    max_len: usize,
    limit: usize,
) -> Result<Vec<GibbsRow>, CodingError> {
    let (_, v) = inputs(a, mu, phi)?;
    let mut rows = Vec::new();
    for n in 1..=max_len {
        for w in admissible_words(a, n) {
            if rows.len() >= limit {
                return Ok(rows);
            }
            let m = mu.cylinder_measure(&w);
            let s: f64 = w.iter().map(|&s| v[s]).sum();
            let word = w.iter().map(usize::to_string).collect::<Vec<_>>().join("-");
            rows.push(GibbsRow { word, mu: m, s_n_phi: s, ratio: m / (s - n as f64 * p).exp() });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sft::{equilibrium_markov, parry_measure, pressure};

    #[test]
    fn full_shift_ratios_are_one() {
        let a = TransitionMatrix::full_shift(2);
        let phi = LocallyConstantPotential::zero(&a);
        let mu = parry_measure(&a).unwrap();
        let scan = gibbs_ratio_scan(&a, &mu, &phi, 2f64.ln(), 10).unwrap();
        assert!((scan.min_ratio - 1.0).abs() < 1e-12 && (scan.max_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recursion_matches_enumeration() {
        let a = TransitionMatrix::new(vec![vec![1, 1, 0], vec![0, 1, 1], vec![1, 1, 1]]).unwrap();
        let phi = LocallyConstantPotential::from_state_values(&a, &[0.3, -0.7, 1.1]).unwrap();
        let p = pressure(&a, &phi).unwrap();
        let mu = equilibrium_markov(&a, &phi).unwrap();
        let scan = gibbs_ratio_scan(&a, &mu, &phi, p, 7).unwrap();
        let rows = gibbs_scan_rows(&a, &mu, &phi, p, 7, usize::MAX).unwrap();
        for e in &scan.by_length {
            let sub: Vec<f64> = rows.iter().filter(|r| r.word.split('-').count() == e.n).map(|r| r.ratio).collect();
            let lo = sub.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = sub.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!((lo / e.min_ratio - 1.0).abs() < 1e-12);
            assert!((hi / e.max_ratio - 1.0).abs() < 1e-12);
        }
    }
}
