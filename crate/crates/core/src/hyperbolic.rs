//! Pliss times, hyperbolic times and backward contraction along orbits.
//!
//! `n` is a hyperbolic time with exponent `c` when
//! `Π_{k=1}^{j} ‖Df(f^{n−k}x)⁻¹‖ ≤ e^{−cj}` for `1 ≤ j ≤ n`. This is what the
//! Pliss lemma yields for `aᵢ = −log‖Df(f^{i−1}x)⁻¹‖`, and it is the product
//! that controls pulling a ball back from `fⁿx` to `f^{n−j}x`. The variant
//! whose product runs over `k = 0..j−1`, starting at the time-`n` point, is
//! available as [`Convention::Literal`].

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orbit::{OrbitError, OrbitTrace};
use crate::stream_rng;
use crate::torus::{center, wrap, Point, TorusError, TorusMap, MAX_DIM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HypError {
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Map(#[from] TorusError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("Pliss precondition failed: {reason}")]
    PreconditionFailed { reason: String },
    #[error("inverse branch lost at step {step} of the pullback")]
    InverseBranchLost { step: usize },
    #[error("{0} is not a hyperbolic time of the trace")]
    NotHyperbolicTime(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlissResult {
    /// Sorted times `1 ≤ n₁ < … < n_l ≤ n`.
    pub indices: Vec<usize>,
    /// `(c₂ − c₁)/(A − c₁)`.
    pub d0: f64,
    pub n: usize,
}

/// All `m` with `Σ_{j=k+1}^{m} aⱼ ≥ c₁(m − k)` for every `0 ≤ k < m`.
///
/// With `S_m = Σ_{j≤m}(aⱼ − c₁)` this is `S_m ≥ max_{k<m} S_k`, a single
/// forward scan with a running maximum.
pub fn pliss_times(a: &[f64], big_a: f64, c1: f64, c2: f64) -> Result<PlissResult, HypError> {
    if !(big_a >= c2 && c2 > c1 && c1 > 0.0) {
        return Err(HypError::InvalidArgument(format!("need A >= c2 > c1 > 0, got A={big_a}, c2={c2}, c1={c1}")));
    }
    if let Some(i) = a.iter().position(|&x| !(x <= big_a)) {
        return Err(HypError::InvalidArgument(format!("a[{i}] = {} exceeds A = {big_a}", a[i])));
    }
    let n = a.len();
    let total: f64 = a.iter().sum();
    if n == 0 || total < c2 * n as f64 {
        return Err(HypError::PreconditionFailed {
            reason: format!("sum of a = {total} is below c2 * n = {}", c2 * n as f64),
        });
    }
    Ok(PlissResult { indices: scan(a, c1), d0: (c2 - c1) / (big_a - c1), n })
}

fn scan(a: &[f64], c1: f64) -> Vec<usize> {
    let mut s = 0.0f64;
    let mut best = 0.0f64;
    let mut out = Vec::new();
    for (i, &x) in a.iter().enumerate() {
        s += x - c1;
        if s >= best {
            out.push(i + 1);
            best = s;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// Product over `f^{n−1}x, …, f^{n−j}x`.
    #[default]
    Standard,
    /// Product over `fⁿx, …, f^{n−j+1}x`.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypOptions {
    pub convention: Convention,
    /// `c₂ = c2_factor · c`.
    pub c2_factor: f64,
}

impl Default for HypOptions {
    fn default() -> Self {
        Self { convention: Convention::Standard, c2_factor: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicTimeReport {
    pub times: Vec<usize>,
    /// Minimum running density over the final half of the trace.
    #[serde(rename = "density")]
    pub density_liminf_proxy: f64,
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    #[serde(rename = "A")]
    pub a_max: f64,
    pub d0: f64,
    pub eps0: Option<f64>,
    pub n: usize,
    pub convention: Convention,
}

impl HyperbolicTimeReport {
    /// `(m, #{times ≤ m}/m)` for `m = stride, 2·stride, …, n`.
    pub fn running_density(&self, stride: usize) -> Vec<(usize, f64)> {
        let stride = stride.max(1);
        let mut out = Vec::new();
        let mut k = 0;
        let mut m = stride;
        while m <= self.n {
            while k < self.times.len() && self.times[k] <= m {
                k += 1;
            }
            out.push((m, k as f64 / m as f64));
            m += stride;
        }
        out
    }

    pub fn running_density_csv(&self, stride: usize) -> String {
        let mut out = String::from("n,density\n");
        for (m, r) in self.running_density(stride) {
            let _ = writeln!(out, "{m},{r:.16e}");
        }
        out
    }
}

/// The sequence `a` fed to the Pliss scan under `convention`.
pub fn expansion_sequence(trace: &OrbitTrace, convention: Convention) -> Vec<f64> {
    let l = &trace.log_inv_norm;
    match convention {
        Convention::Standard => l.iter().map(|x| -x).collect(),
        Convention::Literal => l.iter().skip(1).map(|x| -x).collect(),
    }
}

pub fn hyperbolic_times(trace: &OrbitTrace, c: f64, opts: &HypOptions) -> Result<HyperbolicTimeReport, HypError> {
    if !(c > 0.0) {
        return Err(HypError::InvalidArgument("c must be positive".into()));
    }
    let a = expansion_sequence(trace, opts.convention);
    let c2 = opts.c2_factor * c;
    let big_a = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if a.is_empty() || big_a < c2 {
        return Err(HypError::PreconditionFailed {
            reason: format!("sup of a = {big_a} is below c2 = {c2}"),
        });
    }
    let p = pliss_times(&a, big_a, c, c2)?;
    let mut report = HyperbolicTimeReport {
        times: p.indices,
        density_liminf_proxy: 0.0,
        c,
        c1: c,
        c2,
        a_max: big_a,
        d0: p.d0,
        eps0: None,
        n: p.n,
        convention: opts.convention,
    };
    report.density_liminf_proxy = report
        .running_density(1)
        .into_iter()
        .filter(|&(m, _)| 2 * m >= p.n)
        .map(|(_, r)| r)
        .fold(f64::INFINITY, f64::min);
    Ok(report)
}

/// Re-checks `Σ_{k=1}^{j} log‖Df(f^{n−k}x)⁻¹‖ ≤ −cj` for every `j ≤ n` by an
/// independent backward accumulation.
pub fn is_hyperbolic_time(trace: &OrbitTrace, n: usize, c: f64, convention: Convention) -> bool {
    let a = expansion_sequence(trace, convention);
    if n == 0 || n > a.len() {
        return false;
    }
    let mut s = 0.0;
    for j in 1..=n {
        s += a[n - j] - c;
        if s < 0.0 {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionResult {
    pub n: usize,
    /// `max_{j,z} d(f^{n−j}x, f^{n−j}z)·e^{cj/2} / d(fⁿx, fⁿz)` over `1 ≤ j ≤ n`.
    pub max_ratio: f64,
    /// `log` of the largest `d(x, z)` at time 0 over the probes.
    pub log_pullback_diameter: f64,
    pub probes: usize,
}

/// Displacement `δ` in the linear regime is carried as a direction and a log scale.
const LINEAR_REGIME: f64 = 1e-6;

fn max_abs(dim: usize, v: &Point) -> f64 {
    (0..dim).map(|i| v[i].abs()).fold(0.0, f64::max)
}

/// Pulls random points of `B_{eps0}(fⁿx)` back along the inverse branches
/// through the orbit of `x`.
pub fn contraction_check(
    f: &TorusMap,
    trace: &OrbitTrace,
    n: usize,
    c: f64,
    eps0: f64,
    probes: usize,
    seed: u64,
) -> Result<ContractionResult, HypError> {
    if !(eps0 > 0.0 && c > 0.0) || probes == 0 {
        return Err(HypError::InvalidArgument("need eps0 > 0, c > 0 and probes >= 1".into()));
    }
    if n == 0 || n > trace.len() {
        return Err(HypError::InvalidArgument(format!("time {n} is outside the trace")));
    }
    if !is_hyperbolic_time(trace, n, c, Convention::Standard) {
        return Err(HypError::NotHyperbolicTime(n));
    }
    let dim = f.dim();
    let mut max_log_ratio = f64::NEG_INFINITY;
    let mut max_log_diam = f64::NEG_INFINITY;
    for p in 0..probes {
        let mut rng = stream_rng(seed, p as u64);
        let mut d = [0.0; MAX_DIM];
        for di in d.iter_mut().take(dim) {
            *di = rng.random_range(-eps0..=eps0);
        }
        let top = max_abs(dim, &d);
        if top == 0.0 {
            continue;
        }
        // δ = unit · e^{log_scale}
        let mut log_scale = top.ln();
        let mut unit = d.map(|x| x / top);
        let log_top = log_scale;
        for j in 1..=n {
            let k = n - j;
            let x = trace.points[k];
            let scale = log_scale.exp();
            let next = if scale >= LINEAR_REGIME {
                let target = unit.map(|u| u * scale);
                let delta = newton_pullback(f, &x, &target).ok_or(HypError::InverseBranchLost { step: j })?;
                for i in 0..dim {
                    if delta[i].abs() > 0.5 / f.lambda(i) {
                        return Err(HypError::InverseBranchLost { step: j });
                    }
                }
                let m = max_abs(dim, &delta);
                log_scale = m.ln();
                delta.map(|v| v / m)
            } else {
                let guess = f.jacobian(&x).solve(unit);
                let mut mid = x;
                for i in 0..dim {
                    mid[i] = wrap(x[i] + 0.5 * scale * guess[i]);
                }
                let delta = f.jacobian(&mid).solve(unit);
                let m = max_abs(dim, &delta);
                log_scale += m.ln();
                delta.map(|v| v / m)
            };
            unit = next;
            max_log_ratio = max_log_ratio.max(log_scale + 0.5 * c * j as f64 - log_top);
        }
        max_log_diam = max_log_diam.max(log_scale);
    }
    Ok(ContractionResult {
        n,
        max_ratio: max_log_ratio.exp(),
        log_pullback_diameter: max_log_diam,
        probes,
    })
}

/// Solves `f(x + δ) − f(x) ≡ target` for small `δ` by Newton's method.
fn newton_pullback(f: &TorusMap, x: &Point, target: &Point) -> Option<Point> {
    let dim = f.dim();
    let fx = f.eval(x);
    let mut delta = f.jacobian(x).solve(*target);
    // f(x + δ) − f(x) carries an absolute rounding error of a few ulp of 1
    let tol = 1e-10 * max_abs(dim, target) + 1e-15;
    for _ in 0..50 {
        let mut z = *x;
        for i in 0..dim {
            z[i] = wrap(x[i] + delta[i]);
        }
        let fz = f.eval(&z);
        let mut g = [0.0; MAX_DIM];
        for i in 0..dim {
            g[i] = center(fz[i] - fx[i]) - target[i];
        }
        if max_abs(dim, &g) <= tol {
            return Some(delta);
        }
        let step = f.jacobian(&z).solve(g);
        for i in 0..dim {
            delta[i] -= step[i];
        }
        if !delta.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eps0Estimate {
    pub eps0: f64,
    /// Max-norm Lipschitz constant of `log‖Df⁻¹‖` read off the grid.
    pub lipschitz: f64,
    pub grid: usize,
}

/// Radius on which `‖Df(ξ)⁻¹‖ / ‖Df(η)⁻¹‖ ≤ e^{c/2}`: `(c/2)/L` with `L` the
/// grid modulus of continuity of `log‖Df⁻¹‖`, capped by the torus diameter ½.
pub fn estimate_eps0(f: &TorusMap, c: f64, grid: usize) -> Result<Eps0Estimate, HypError> {
    if !(c > 0.0) || grid < 2 {
        return Err(HypError::InvalidArgument("need c > 0 and grid >= 2".into()));
    }
    let dim = f.dim();
    let h = 1.0 / grid as f64;
    let rows = if dim == 2 { grid } else { 1 };
    let mut values = vec![0.0; rows * grid];
    for k in 0..rows * grid {
        let x = if dim == 2 { [(k / grid) as f64 * h, (k % grid) as f64 * h] } else { [k as f64 * h, 0.0] };
        values[k] = f.inv_norm(&x)?.ln();
    }
    let at = |i: usize, j: usize| values[if dim == 2 { (i % grid) * grid + j % grid } else { i % grid }];
    let mut lip = [0.0f64; MAX_DIM];
    for i in 0..grid {
        for j in 0..rows {
            let v = at(i, j);
            lip[0] = lip[0].max((at(i + 1, j) - v).abs() / h);
            if dim == 2 {
                lip[1] = lip[1].max((at(i, j + 1) - v).abs() / h);
            }
        }
    }
    // a max-norm step of size ε moves every coordinate by at most ε
    let l = lip[0] + lip[1];
    let eps0 = if l > 0.0 { (0.5 * c / l).min(0.5) } else { 0.5 };
    Ok(Eps0Estimate { eps0, lipschitz: l, grid })
}
