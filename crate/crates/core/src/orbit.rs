//! Orbits, Birkhoff sums, Lyapunov exponents and occupation statistics.
//!
//! Iterating `x ↦ λx mod 1` in binary floating point shifts out one mantissa
//! bit per doubling, so every float orbit of the linear model reaches 0
//! within about 53 steps. That would put every "random" orbit onto `p₀`.
//! [`Sampling::Lazy`] keeps coordinates as 64-bit fixed-point numbers, does
//! the linear branch in exact integer arithmetic, and draws the digits that
//! the multiplication exposes from a seeded stream. Each lazy step agrees
//! with [`TorusMap::eval`] to about `2⁻⁵²`.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stream_rng;
use crate::torus::{torus_distance, wrap, Point, TorusError, TorusMap, MAX_DIM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error(transparent)]
    Map(#[from] TorusError),
    #[error("observable has {found} entries, trace has {expected} steps")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// How an orbit is advanced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Plain `f64` iteration of [`TorusMap::eval`].
    Exact,
    /// Fixed-point iteration with digits refilled from ChaCha8 `(seed, stream)`.
    Lazy { seed: u64, stream: u64 },
}

const TWO64: f64 = 18_446_744_073_709_551_616.0;

fn to_fixed(x: f64) -> u64 {
    let y = wrap(x) * TWO64;
    if y >= TWO64 {
        0
    } else {
        y as u64
    }
}

fn from_fixed(k: u64) -> f64 {
    // truncating to 53 bits keeps the value strictly below 1
    (k >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

enum State {
    Exact(Point),
    Lazy { k: [u64; MAX_DIM], rng: Box<ChaCha8Rng> },
}

/// Streaming orbit of a [`TorusMap`].
pub struct Stepper<'a> {
    f: &'a TorusMap,
    state: State,
}

impl<'a> Stepper<'a> {
    pub fn new(f: &'a TorusMap, x0: Point, sampling: Sampling) -> Self {
        let state = match sampling {
            Sampling::Exact => State::Exact(x0),
            Sampling::Lazy { seed, stream } => {
                let mut k = [0; MAX_DIM];
                for i in 0..f.dim() {
                    k[i] = to_fixed(x0[i]);
                }
                State::Lazy { k, rng: Box::new(stream_rng(seed, stream)) }
            }
        };
        Self { f, state }
    }

    /// Lazy orbit from a Lebesgue-random start drawn from the same stream.
    pub fn random(f: &'a TorusMap, seed: u64, stream: u64) -> Self {
        let mut rng = stream_rng(seed, stream);
        let mut k = [0; MAX_DIM];
        for ki in k.iter_mut().take(f.dim()) {
            *ki = rng.random();
        }
        Self { f, state: State::Lazy { k, rng: Box::new(rng) } }
    }

    pub fn point(&self) -> Point {
        match &self.state {
            State::Exact(x) => *x,
            State::Lazy { k, .. } => {
                let mut x = [0.0; MAX_DIM];
                for i in 0..self.f.dim() {
                    x[i] = from_fixed(k[i]);
                }
                x
            }
        }
    }

    pub fn advance(&mut self) {
        let f = self.f;
        match &mut self.state {
            State::Exact(x) => *x = f.eval(x),
            State::Lazy { k, rng } => {
                let x = {
                    let mut x = [0.0; MAX_DIM];
                    for i in 0..f.dim() {
                        x[i] = from_fixed(k[i]);
                    }
                    x
                };
                let deformed = f.deformation_term(&x) != 0.0;
                for i in 0..f.dim() {
                    let lambda = f.eigenvalues()[i] as u64;
                    if i == 0 && deformed {
                        // below f64 resolution the digits are unknown anyway
                        let y = f.eval(&x)[0];
                        k[0] = (to_fixed(y) & !0x7ff) | (rng.random::<u64>() & 0x7ff);
                    } else {
                        k[i] = k[i].wrapping_mul(lambda).wrapping_add(rng.random_range(0..lambda));
                    }
                }
            }
        }
    }
}

/// Per-step data along `x₀, …, x_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitTrace {
    pub dim: usize,
    /// `N + 1` points.
    pub points: Vec<Point>,
    pub log_inv_norm: Vec<f64>,
    pub log_det: Vec<f64>,
    pub in_v: Vec<bool>,
    pub in_w: Vec<bool>,
    /// `V = {‖Df⁻¹‖ > v_threshold}`.
    pub v_threshold: f64,
    pub sampling: Sampling,
}

/// Which region a visit fraction counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    V,
    W,
}

/// `(1+δ₁)⁻¹` for the largest admissible `δ₁ < λ₁ − 1`.
pub fn default_v_threshold(f: &TorusMap) -> f64 {
    1.0 / (1.0 + (f.lambda(0) - 1.0) * (1.0 - 1e-9))
}

impl OrbitTrace {
    pub fn len(&self) -> usize {
        self.log_inv_norm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_inv_norm.is_empty()
    }

    /// Columns `step, x1..xn, log_inv_norm, log_det, in_V, in_W`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step");
        for i in 1..=self.dim {
            let _ = write!(out, ",x{i}");
        }
        out.push_str(",log_inv_norm,log_det,in_V,in_W\n");
        for s in 0..self.len() {
            let _ = write!(out, "{s}");
            for i in 0..self.dim {
                let _ = write!(out, ",{:.16e}", self.points[s][i]);
            }
            let _ = writeln!(
                out,
                ",{:.16e},{:.16e},{},{}",
                self.log_inv_norm[s],
                self.log_det[s],
                u8::from(self.in_v[s]),
                u8::from(self.in_w[s])
            );
        }
        out
    }
}

pub fn iterate(f: &TorusMap, x0: Point, n: usize) -> Result<OrbitTrace, OrbitError> {
    iterate_with(f, x0, n, Sampling::Exact, default_v_threshold(f))
}

/// Lazy orbit of length `n` from a Lebesgue-random start.
pub fn random_orbit(f: &TorusMap, n: usize, seed: u64, stream: u64, v_threshold: f64) -> Result<OrbitTrace, OrbitError> {
    trace_from(Stepper::random(f, seed, stream), n, v_threshold, Sampling::Lazy { seed, stream })
}

pub fn iterate_with(
    f: &TorusMap,
    x0: Point,
    n: usize,
    sampling: Sampling,
    v_threshold: f64,
) -> Result<OrbitTrace, OrbitError> {
    trace_from(Stepper::new(f, x0, sampling), n, v_threshold, sampling)
}

fn trace_from(mut s: Stepper<'_>, n: usize, v_threshold: f64, sampling: Sampling) -> Result<OrbitTrace, OrbitError> {
    if n == 0 {
        return Err(OrbitError::InvalidArgument("orbit length must be at least 1".into()));
    }
    let f = s.f;
    let mut t = OrbitTrace {
        dim: f.dim(),
        points: Vec::with_capacity(n + 1),
        log_inv_norm: Vec::with_capacity(n),
        log_det: Vec::with_capacity(n),
        in_v: Vec::with_capacity(n),
        in_w: Vec::with_capacity(n),
        v_threshold,
        sampling,
    };
    for _ in 0..n {
        let x = s.point();
        let inv = f.inv_norm(&x)?;
        t.points.push(x);
        t.log_inv_norm.push(inv.ln());
        t.log_det.push(f.det(&x).abs().ln());
        t.in_v.push(inv > v_threshold);
        t.in_w.push(f.in_window(&x));
        s.advance();
    }
    t.points.push(s.point());
    Ok(t)
}

pub fn visit_fraction(trace: &OrbitTrace, region: Region) -> f64 {
    let flags = match region {
        Region::V => &trace.in_v,
        Region::W => &trace.in_w,
    };
    flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64
}

pub fn birkhoff_average(trace: &OrbitTrace, observable: &[f64]) -> Result<f64, OrbitError> {
    if observable.len() != trace.len() {
        return Err(OrbitError::LengthMismatch { expected: trace.len(), found: observable.len() });
    }
    Ok(observable.iter().sum::<f64>() / observable.len() as f64)
}

/// `max_{m ≥ from} (1/m) Σ_{i<m} values[i]`.
pub fn max_running_average(values: &[f64], from: usize) -> f64 {
    let mut s = 0.0;
    let mut best = f64::NEG_INFINITY;
    for (i, v) in values.iter().enumerate() {
        s += v;
        let m = i + 1;
        if m >= from.max(1) {
            best = best.max(s / m as f64);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Sorted descending.
    pub exponents: Vec<f64>,
    #[serde(rename = "N")]
    pub n: usize,
    /// Largest change of an exponent between the half-length and full-length estimates.
    pub per_block_drift: f64,
    /// Birkhoff average of `log|det Df|` along the same orbit.
    pub log_det_average: f64,
    /// Birkhoff average of `log‖Df⁻¹‖`.
    pub log_inv_norm_average: f64,
}

/// Lyapunov spectrum by QR re-orthogonalization at every step.
pub fn lyapunov_spectrum(f: &TorusMap, x0: Point, n: usize) -> Result<LyapunovEstimate, OrbitError> {
    lyapunov_with(Stepper::new(f, x0, Sampling::Exact), n)
}

pub fn lyapunov_random(f: &TorusMap, n: usize, seed: u64, stream: u64) -> Result<LyapunovEstimate, OrbitError> {
    lyapunov_with(Stepper::random(f, seed, stream), n)
}

pub fn lyapunov_with(mut s: Stepper<'_>, n: usize) -> Result<LyapunovEstimate, OrbitError> {
    if n < 2 {
        return Err(OrbitError::InvalidArgument("Lyapunov estimate needs at least 2 steps".into()));
    }
    let f = s.f;
    let dim = f.dim();
    let mut q = [[1.0, 0.0], [0.0, 1.0]];
    let mut sums = [0.0; MAX_DIM];
    let mut half = [0.0; MAX_DIM];
    let (mut ld, mut li) = (0.0, 0.0);
    for step in 0..n {
        let x = s.point();
        let j = f.jacobian(&x);
        let det = j.det();
        if det.abs() < crate::torus::SINGULAR_DET {
            return Err(TorusError::SingularJacobian { x, det }.into());
        }
        ld += det.abs().ln();
        li += j.inv_norm().expect("nonsingular").ln();
        if dim == 1 {
            sums[0] += j.m[0][0].abs().ln();
        } else {
            // columns of J·Q, then Gram–Schmidt
            let c0 = j.apply([q[0][0], q[1][0]]);
            let c1 = j.apply([q[0][1], q[1][1]]);
            let r00 = c0[0].hypot(c0[1]);
            let e0 = [c0[0] / r00, c0[1] / r00];
            let r01 = e0[0] * c1[0] + e0[1] * c1[1];
            let v = [c1[0] - r01 * e0[0], c1[1] - r01 * e0[1]];
            let r11 = v[0].hypot(v[1]);
            let e1 = [v[0] / r11, v[1] / r11];
            q = [[e0[0], e1[0]], [e0[1], e1[1]]];
            sums[0] += r00.ln();
            sums[1] += r11.ln();
        }
        if step + 1 == n / 2 {
            half = sums;
        }
        s.advance();
    }
    let avg = |v: [f64; MAX_DIM], m: usize| -> Vec<f64> {
        let mut e: Vec<f64> = v[..dim].iter().map(|x| x / m as f64).collect();
        e.sort_by(|a, b| b.total_cmp(a));
        e
    };
    let full = avg(sums, n);
    let first = avg(half, n / 2);
    let drift = full.iter().zip(&first).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(LyapunovEstimate {
        exponents: full,
        n,
        per_block_drift: drift,
        log_det_average: ld / n as f64,
        log_inv_norm_average: li / n as f64,
    })
}

/// Monte Carlo volume fraction of the dynamical ball `B_ε(n, x)` inside the
/// max-norm ball `B_ε(x)`, with exact iteration of both orbits.
pub fn dynamical_ball_fraction(
    f: &TorusMap,
    x: Point,
    n: usize,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<f64, OrbitError> {
    if !(eps > 0.0) || n == 0 || samples == 0 {
        return Err(OrbitError::InvalidArgument("need eps > 0, n >= 1 and samples >= 1".into()));
    }
    let dim = f.dim();
    let mut orbit = Vec::with_capacity(n);
    let mut p = x;
    for _ in 0..n {
        orbit.push(p);
        p = f.eval(&p);
    }
    const CHUNK: usize = 4096;
    let chunks = samples.div_ceil(CHUNK);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let count = CHUNK.min(samples - c * CHUNK);
            (0..count)
                .filter(|_| {
                    let mut y = [0.0; MAX_DIM];
                    for i in 0..dim {
                        y[i] = wrap(x[i] + rng.random_range(-eps..=eps));
                    }
                    orbit.iter().all(|o| {
                        let ok = torus_distance(dim, o, &y) <= eps;
                        y = f.eval(&y);
                        ok
                    })
                })
                .count()
        })
        .sum();
    Ok(hits as f64 / samples as f64)
}

/// Per-seed fractions of time spent in `W` by lazy random orbits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitEnsemble {
    pub seeds: usize,
    pub steps: usize,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub fractions: Vec<f64>,
}

/// Empirical `γ₀`: the largest `W`-visit fraction over `seeds` random orbits.
pub fn estimate_gamma0(f: &TorusMap, seeds: usize, steps: usize, seed: u64) -> VisitEnsemble {
    let fractions: Vec<f64> = (0..seeds)
        .into_par_iter()
        .map(|i| {
            let mut s = Stepper::random(f, seed, i as u64);
            let mut hits = 0usize;
            for _ in 0..steps {
                hits += usize::from(f.in_window(&s.point()));
                s.advance();
            }
            hits as f64 / steps as f64
        })
        .collect();
    let min = fractions.iter().copied().fold(f64::INFINITY, f64::min);
    let max = fractions.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = fractions.iter().sum::<f64>() / seeds.max(1) as f64;
    VisitEnsemble { seeds, steps, min, mean, max, fractions }
}

/// Seeded uniform point of `Tⁿ`.
pub fn random_point(f: &TorusMap, rng: &mut ChaCha8Rng) -> Point {
    let mut x = [0.0; MAX_DIM];
    for xi in x.iter_mut().take(f.dim()) {
        *xi = rng.random::<f64>();
    }
    x
}
