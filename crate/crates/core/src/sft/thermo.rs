use rayon::prelude::*;

use super::{
    perron, perron_weighted, recode, LocallyConstantPotential, MarkovMeasure, PerronData, SftError,
    TransitionMatrix, DEFAULT_TOL,
};

pub fn topological_entropy(a: &TransitionMatrix) -> Result<f64, SftError> {
    Ok(perron(a, DEFAULT_TOL)?.lambda.ln())
}

/// The unique measure of maximal entropy of an irreducible SFT.
pub fn parry_measure(a: &TransitionMatrix) -> Result<MarkovMeasure, SftError> {
    let m = a.to_f64();
    let pd = perron(a, DEFAULT_TOL)?;
    markov_from_perron(a, &m, &pd)
}

/// `−Σ πᵢ Pᵢⱼ log Pᵢⱼ` with `0 log 0 = 0`.
pub fn markov_entropy(mu: &MarkovMeasure) -> f64 {
    let d = mu.d();
    let pi = mu.stationary();
    let mut h = 0.0;
    for i in 0..d {
        for j in 0..d {
            let p = mu.p(i, j);
            if p > 0.0 {
                h -= pi[i] * p * p.ln();
            }
        }
    }
    h
}

/// `Σ πᵢ φ(i)` for a depth-1 potential on the measure's own states.
pub fn integral(mu: &MarkovMeasure, phi: &LocallyConstantPotential) -> Result<f64, SftError> {
    if phi.depth() != 1 {
        return Err(SftError::DepthMismatch { expected: 1, found: phi.depth() });
    }
    if phi.alphabet() != mu.d() {
        return Err(SftError::InvalidPotential(format!(
            "potential on {} states, measure on {}",
            phi.alphabet(),
            mu.d()
        )));
    }
    let values = phi.state_values()?;
    Ok(mu.stationary().iter().zip(&values).map(|(p, v)| p * v).sum())
}

/// Weighted transfer matrix `Bᵢⱼ = Aᵢⱼ exp(φ(i) − max φ)` of the depth-1
/// recoding, together with the factored-out `max φ`.
struct Weighted {
    pattern: TransitionMatrix,
    values: Vec<f64>,
    b: Vec<f64>,
    shift: f64,
}

fn weighted(a: &TransitionMatrix, phi: &LocallyConstantPotential) -> Result<Weighted, SftError> {
    if phi.alphabet() != a.d() {
        return Err(SftError::InvalidPotential(format!(
            "potential on {} states, matrix on {}",
            phi.alphabet(),
            a.d()
        )));
    }
    let (pattern, lifted) = recode(a, phi);
    let values = lifted.state_values()?;
    let shift = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let d = pattern.d();
    let mut b = pattern.to_f64();
    for i in 0..d {
        let w = (values[i] - shift).exp();
        for j in 0..d {
            b[i * d + j] *= w;
        }
    }
    Ok(Weighted { pattern, values, b, shift })
}

/// Topological pressure: log of the spectral radius of `Aᵢⱼ exp(φ(i))`.
pub fn pressure(a: &TransitionMatrix, phi: &LocallyConstantPotential) -> Result<f64, SftError> {
    let w = weighted(a, phi)?;
    let pd = perron_weighted(&w.pattern, &w.b, DEFAULT_TOL)?;
    Ok(w.shift + pd.lambda.ln())
}

/// Equilibrium Markov measure of `φ`. For depth `k > 1` the measure lives on
/// the higher-block states returned by [`recode`].
pub fn equilibrium_markov(
    a: &TransitionMatrix,
    phi: &LocallyConstantPotential,
) -> Result<MarkovMeasure, SftError> {
    let w = weighted(a, phi)?;
    let pd = perron_weighted(&w.pattern, &w.b, DEFAULT_TOL)?;
    markov_from_perron(&w.pattern, &w.b, &pd)
}

fn markov_from_perron(
    pattern: &TransitionMatrix,
    b: &[f64],
    pd: &PerronData,
) -> Result<MarkovMeasure, SftError> {
    let d = pattern.d();
    let mut p = vec![0.0; d * d];
    for i in 0..d {
        let mut row = 0.0;
        for j in 0..d {
            let x = b[i * d + j] * pd.right[j] / (pd.lambda * pd.right[i]);
            p[i * d + j] = x;
            row += x;
        }
        for j in 0..d {
            p[i * d + j] /= row;
        }
    }
    let mut pi: Vec<f64> = pd.left.iter().zip(&pd.right).map(|(l, r)| l * r).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);
    MarkovMeasure::new(pattern, p, pi)
}

/// `max φ < P(φ) − ρ·h_top`.
pub fn low_variation_check(
    phi: &LocallyConstantPotential,
    a: &TransitionMatrix,
    rho: f64,
) -> Result<bool, SftError> {
    assert!(rho > 0.0 && rho < 1.0, "rho must lie in (0, 1)");
    Ok(phi.max_value() < pressure(a, phi)? - rho * topological_entropy(a)?)
}

/// `P(φ) − (h(μ) + ∫φ dμ)`; `mu` lives on the (recoded) states of `φ`.
pub fn variational_gap(
    a: &TransitionMatrix,
    phi: &LocallyConstantPotential,
    mu: &MarkovMeasure,
) -> Result<f64, SftError> {
    let (_, lifted) = recode(a, phi);
    Ok(pressure(a, phi)? - markov_entropy(mu) - integral(mu, &lifted)?)
}

/// Variational gaps of `trials` random compatible Markov measures.
///
/// Trial `t` draws from a ChaCha8 stream `t` keyed by `seed`, so the output
/// does not depend on how the trials are scheduled.
pub fn variational_gap_sample(
    a: &TransitionMatrix,
    phi: &LocallyConstantPotential,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>, SftError> {
    assert!(trials >= 1);
    let w = weighted(a, phi)?;
    let p = w.shift + perron_weighted(&w.pattern, &w.b, DEFAULT_TOL)?.lambda.ln();
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = crate::stream_rng(seed, t as u64);
            let mu = MarkovMeasure::random_compatible(&w.pattern, &mut rng)?;
            let integral: f64 = mu.stationary().iter().zip(&w.values).map(|(x, v)| x * v).sum();
            Ok(p - markov_entropy(&mu) - integral)
        })
        .collect()
}

/// Closed-form range of `μ([w]) / exp(S_nφ − nP)` for the equilibrium
/// measure: the ratio equals `λ·left[w₀]·right[w_{n-1}]·exp(−φ(w_{n-1}))`.
pub fn gibbs_bounds(
    a: &TransitionMatrix,
    phi: &LocallyConstantPotential,
) -> Result<(f64, f64), SftError> {
    let w = weighted(a, phi)?;
    let pd = perron_weighted(&w.pattern, &w.b, DEFAULT_TOL)?;
    let tail: Vec<f64> = pd
        .right
        .iter()
        .zip(&w.values)
        .map(|(r, v)| r * (w.shift - v).exp())
        .collect();
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((
        pd.lambda * min(&pd.left) * min(&tail),
        pd.lambda * max(&pd.left) * max(&tail),
    ))
}
