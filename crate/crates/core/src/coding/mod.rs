//! Markov partitions of the torus and the itinerary coding.
//!
//! Rectangles are products of half-open arcs with rational endpoints, so
//! the transition matrix of the linear model is computed exactly. Symbols
//! are 0-based; the rectangle containing the fixed point `p₀ = 0` of a
//! deformed map is always the last one.

mod cylinder;
mod gibbs;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::orbit::OrbitTrace;
use crate::sft::{transitivity, MarkovMeasure, SftError, TransitionMatrix};
use crate::torus::{center, Point, TorusError, TorusMap};

pub use cylinder::{cylinder_box, CylinderBox};
pub use gibbs::{gibbs_ratio_scan, gibbs_scan_rows, GibbsRow, GibbsScan, LengthExtremes};

pub type Rational = BigRational;

pub(crate) fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub(crate) fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Membership closer than this to a face is ambiguous.
pub const BOUNDARY_TOL: f64 = 1e-12;
/// Largest denominator tried when placing endpoints on periodic orbits.
const MAX_DENOMINATOR: i64 = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodingError {
    #[error("unsupported map: {0}")]
    Unsupported(String),
    #[error("orbit point {x:?} at step {step} lies within 1e-12 of a rectangle face")]
    BoundaryHit { step: usize, x: Point },
    #[error("cylinder {0:?} is empty")]
    EmptyCylinder(Vec<usize>),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Sft(#[from] SftError),
    #[error(transparent)]
    Map(#[from] TorusError),
}

/// `[start, end)` on the line; `end − start ≤ 1`.
pub type Arc = (Rational, Rational);

/// Partition of one circle factor by sorted endpoints in `[0, 1)`.
///
/// Interval `k` is `[e_k, e_{k+1})`; the last one runs from the largest
/// endpoint to `e_0 + 1` and therefore contains 0 whenever `e_0 > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisPartition {
    pub lambda: u32,
    pub endpoints: Vec<Rational>,
}

impl AxisPartition {
    fn new(lambda: u32, mut endpoints: Vec<Rational>) -> Self {
        endpoints.sort();
        endpoints.dedup();
        Self { lambda, endpoints }
    }

    fn grid(lambda: u32) -> Self {
        let m = lambda as i64;
        Self::new(lambda, (0..m).map(|k| ratio(k, m)).collect())
    }

    pub fn len(&self) -> usize {
        self.endpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.endpoints.is_empty()
    }

    pub fn interval(&self, k: usize) -> Arc {
        let e = &self.endpoints;
        let end = if k + 1 < e.len() { e[k + 1].clone() } else { &e[0] + int(1) };
        (e[k].clone(), end)
    }

    /// [`interval`](Self::interval) rounded to the nearest floats.
    pub fn interval_f64(&self, k: usize) -> (f64, f64) {
        let (s, e) = self.interval(k);
        (to_f64(&s), to_f64(&e))
    }

    /// `None` when `x` is within [`BOUNDARY_TOL`] of an endpoint.
    pub fn locate(&self, x: f64) -> Option<usize> {
        let ends: Vec<f64> = self.endpoints.iter().map(to_f64).collect();
        if ends.iter().any(|&e| center(x - e).abs() < BOUNDARY_TOL) {
            return None;
        }
        let x = crate::torus::wrap(x);
        Some(match ends.iter().rposition(|&e| e <= x) {
            Some(k) => k,
            None => ends.len() - 1,
        })
    }

    /// `A_ab = 1` iff `λ·int I_a` meets `int I_b` on the circle.
    fn transitions(&self) -> Vec<Vec<u8>> {
        let m = self.len();
        let lam = int(self.lambda as i64);
        (0..m)
            .map(|a| {
                let (s, e) = self.interval(a);
                let (is, ie) = (s * &lam, e * &lam);
                (0..m)
                    .map(|b| {
                        let (bs, be) = self.interval(b);
                        let t_lo = (&is - &be).floor().to_integer().to_i64().expect("small lift");
                        let t_hi = (&ie - &bs).ceil().to_integer().to_i64().expect("small lift");
                        let hit = (t_lo..=t_hi).any(|t| {
                            let t = int(t);
                            &bs + &t < ie && is < &be + &t
                        });
                        u8::from(hit)
                    })
                    .collect()
            })
            .collect()
    }
}

pub(crate) fn to_f64(q: &Rational) -> f64 {
    q.to_f64().expect("rationals convert to f64")
}

/// Product partition; rectangle `(i, j)` carries symbol `i·d₂ + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovPartition {
    pub axes: Vec<AxisPartition>,
    /// Whether the rectangle holding `p₀` contains the closed deformation
    /// support (always true for a deformed map) and the whole window `W`.
    pub support_contained: bool,
    pub window_contained: bool,
}

impl MarkovPartition {
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(AxisPartition::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn axis_indices(&self, symbol: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        let mut s = symbol;
        for (i, ax) in self.axes.iter().enumerate().rev() {
            out[i] = s % ax.len();
            s /= ax.len();
        }
        out
    }

    pub fn symbol(&self, indices: &[usize]) -> usize {
        self.axes.iter().zip(indices).fold(0, |acc, (ax, &k)| acc * ax.len() + k)
    }

    pub fn rectangle(&self, symbol: usize) -> Vec<Arc> {
        self.axis_indices(symbol).iter().zip(&self.axes).map(|(&k, ax)| ax.interval(k)).collect()
    }

    /// Symbol of the rectangle containing `x`, or `None` near a face.
    pub fn locate(&self, x: &Point) -> Option<usize> {
        let idx: Option<Vec<usize>> = self.axes.iter().enumerate().map(|(i, ax)| ax.locate(x[i])).collect();
        idx.map(|idx| self.symbol(&idx))
    }

    /// Endpoints as `[numerator, denominator]` pairs.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Axis {
            lambda: u32,
            endpoints: Vec<[i64; 2]>,
        }
        #[derive(Serialize)]
        struct Rect {
            symbol: usize,
            sides: Vec<[[i64; 2]; 2]>,
        }
        #[derive(Serialize)]
        struct Doc {
            dim: usize,
            rectangles: usize,
            support_contained: bool,
            window_contained: bool,
            axes: Vec<Axis>,
            boxes: Vec<Rect>,
        }
        let pair = |q: &Rational| [q.numer().to_i64().expect("small endpoint"), q.denom().to_i64().expect("small endpoint")];
        let doc = Doc {
            dim: self.dim(),
            rectangles: self.len(),
            support_contained: self.support_contained,
            window_contained: self.window_contained,
            axes: self
                .axes
                .iter()
                .map(|a| Axis { lambda: a.lambda, endpoints: a.endpoints.iter().map(pair).collect() })
                .collect(),
            boxes: (0..self.len())
                .map(|s| Rect {
                    symbol: s,
                    sides: self.rectangle(s).iter().map(|(a, b)| [pair(a), pair(b)]).collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("partition serializes")
    }
}

/// Endpoints `k/D` forming a `×λ`-invariant set that avoids `[−h, h]`, with
/// every gap at most `1/λ`. Smallest such `D` coprime to `λ`.
fn periodic_endpoints(lambda: u32, h: f64) -> Option<Vec<Rational>> {
    let lam = lambda as i64;
    for den in 2..=MAX_DENOMINATOR {
        if den.gcd(&lam) != 1 {
            continue;
        }
        let in_band = |k: i64| center(k as f64 / den as f64).abs() <= h;
        let mut seen = vec![false; den as usize];
        let mut keep = Vec::new();
        for k0 in 1..den {
            if seen[k0 as usize] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut k = k0;
            loop {
                seen[k as usize] = true;
                cycle.push(k);
                k = k * lam % den;
                if k == k0 {
                    break;
                }
            }
            if !cycle.iter().any(|&k| in_band(k)) {
                keep.extend(cycle);
            }
        }
        if keep.is_empty() {
            continue;
        }
        let axis = AxisPartition::new(lambda, keep.into_iter().map(|k| ratio(k, den)).collect());
        let max_gap = (0..axis.len()).map(|k| axis.interval(k)).map(|(s, e)| e - s).max()?;
        if max_gap <= ratio(1, lam) {
            return Some(axis.endpoints);
        }
    }
    None
}

/// Half-open wrap interval strictly contains `(−h, h)`.
fn wrap_contains(axis: &AxisPartition, h: f64) -> bool {
    let (s, e) = axis.interval(axis.len() - 1);
    to_f64(&s) - 1.0 <= -h && to_f64(&e) - 1.0 >= h
}

pub fn build_partition(f: &TorusMap) -> Result<MarkovPartition, CodingError> {
    let (Some(window), Some(support)) = (f.window(), f.support()) else {
        return Ok(MarkovPartition {
            axes: f.eigenvalues().iter().map(|&l| AxisPartition::grid(l)).collect(),
            support_contained: true,
            window_contained: true,
        });
    };
    let mut axes = Vec::with_capacity(f.dim());
    for (i, &lambda) in f.eigenvalues().iter().enumerate() {
        // an arc longer than 1/λ cannot sit inside an injectivity domain
        let h = if 2.0 * window[i] < 1.0 / lambda as f64 { window[i] } else { support[i] };
        let ends = periodic_endpoints(lambda, h).ok_or_else(|| {
            CodingError::Unsupported(format!("no periodic endpoint set avoids the band of half-width {h} on axis {i}"))
        })?;
        axes.push(AxisPartition::new(lambda, ends));
    }
    let support_contained = axes.iter().zip(support).all(|(a, h)| wrap_contains(a, h));
    let window_contained = axes.iter().zip(window).all(|(a, h)| wrap_contains(a, h));
    Ok(MarkovPartition { axes, support_contained, window_contained })
}

/// A partition together with the map it codes and the induced matrix.
#[derive(Debug, Clone)]
pub struct ItineraryMap {
    pub map: TorusMap,
    pub partition: MarkovPartition,
    pub matrix: TransitionMatrix,
}

impl ItineraryMap {
    pub fn new(map: &TorusMap) -> Result<Self, CodingError> {
        let partition = build_partition(map)?;
        // the deformation maps the last rectangle onto its linear image
        let mut rows = vec![vec![1u8]];
        for ax in &partition.axes {
            rows = kron(&rows, &ax.transitions());
        }
        let matrix = TransitionMatrix::new(rows)?;
        Ok(Self { map: map.clone(), partition, matrix })
    }

    pub fn d(&self) -> usize {
        self.matrix.d()
    }

    /// Symbol of the rectangle holding `p₀` under the half-open convention.
    pub fn fixed_point_symbol(&self) -> usize {
        let idx: Vec<usize> = self
            .partition
            .axes
            .iter()
            .map(|ax| if ax.endpoints[0].is_zero() { 0 } else { ax.len() - 1 })
            .collect();
        self.partition.symbol(&idx)
    }

    pub fn axis_transitions(&self, axis: usize) -> Vec<Vec<u8>> {
        self.partition.axes[axis].transitions()
    }
}

fn kron(a: &[Vec<u8>], b: &[Vec<u8>]) -> Vec<Vec<u8>> {
    let (n, m) = (a.len(), b.len());
    (0..n * m).map(|r| (0..n * m).map(|c| a[r / m][c / m] * b[r % m][c % m]).collect()).collect()
}

/// `(i₀, …, i_{n−1})` with `fʲ(x) ∈ R_{i_j}`, iterating `f` exactly.
pub fn itinerary(im: &ItineraryMap, x: &Point, n: usize) -> Result<Vec<usize>, CodingError> {
    let mut out = Vec::with_capacity(n);
    let mut p = *x;
    for step in 0..n {
        let s = im.partition.locate(&p).ok_or(CodingError::BoundaryHit { step, x: p })?;
        out.push(s);
        p = im.map.eval(&p);
    }
    Ok(out)
}

pub fn check_transitivity(a: &TransitionMatrix) -> (bool, bool, usize) {
    transitivity(a)
}

/// Visit and transition counts of a trace, and the Markov measure they define.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalMeasure {
    pub measure: MarkovMeasure,
    pub visits: Vec<u64>,
    pub transitions: Vec<u64>,
    /// States never left along the trace; their rows are uniform over successors.
    pub unvisited: Vec<usize>,
}

pub fn empirical_measure(im: &ItineraryMap, trace: &OrbitTrace) -> Result<EmpiricalMeasure, CodingError> {
    if trace.dim != im.partition.dim() {
        return Err(CodingError::InvalidArgument("trace and partition dimensions differ".into()));
    }
    let d = im.d();
    let symbols = trace
        .points
        .iter()
        .enumerate()
        .map(|(step, p)| im.partition.locate(p).ok_or(CodingError::BoundaryHit { step, x: *p }))
        .collect::<Result<Vec<_>, _>>()?;
    let mut visits = vec![0u64; d];
    let mut transitions = vec![0u64; d * d];
    for &s in &symbols {
        visits[s] += 1;
    }
    for w in symbols.windows(2) {
        transitions[w[0] * d + w[1]] += 1;
    }
    let mut p = vec![0.0; d * d];
    let mut unvisited = Vec::new();
    for i in 0..d {
        let out: u64 = transitions[i * d..(i + 1) * d].iter().sum();
        if out == 0 {
            unvisited.push(i);
            let succ: Vec<usize> = im.matrix.successors(i).collect();
            for &j in &succ {
                p[i * d + j] = 1.0 / succ.len() as f64;
            }
        } else {
            for j in 0..d {
                p[i * d + j] = transitions[i * d + j] as f64 / out as f64;
            }
        }
    }
    let measure = MarkovMeasure::from_stochastic(&im.matrix, p)?;
    Ok(EmpiricalMeasure { measure, visits, transitions, unvisited })
}
