use serde::Serialize;

use super::{int, to_f64, Arc, AxisPartition, CodingError, ItineraryMap, Rational};

/// Outward rounding applied to every pulled-back endpoint of a deformed map.
pub const OUTWARD: f64 = 1e-9;
const BISECTION_STEPS: usize = 200;

/// Product box containing the cylinder `[i₀, …, i_{n−1}]`.
///
/// Sides are `[lo, hi)` with `lo ∈ [0, 1)`; `hi` may exceed 1 for arcs
/// through the origin. Exact for the linear model, an enclosure otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CylinderBox {
    pub word: Vec<usize>,
    pub exact: bool,
    pub sides: Vec<[f64; 2]>,
    #[serde(skip)]
    pub rational: Option<Vec<Arc>>,
    pub diameter: f64,
}

/// Integer `t` with `I_b + t ⊆ λ·I_a`.
fn lift(ax: &AxisPartition, a: usize, b: usize) -> Rational {
    (ax.interval(a).0 * int(ax.lambda as i64) - ax.interval(b).0).ceil()
}

/// Exact arcs `C_k` of points whose axis itinerary from step `k` is `w[k..]`.
fn pullback_exact(ax: &AxisPartition, w: &[usize]) -> Vec<Arc> {
    let n = w.len();
    let lam = int(ax.lambda as i64);
    let mut arcs = vec![ax.interval(w[n - 1]); n];
    for k in (0..n - 1).rev() {
        let t = lift(ax, w[k], w[k + 1]);
        let (lo, hi) = &arcs[k + 1];
        arcs[k] = ((lo + &t) / &lam, (hi + &t) / &lam);
    }
    arcs
}

/// f64 view of an exact arc, widened by one ulp on each side.
fn exact_side(a: &Arc) -> [f64; 2] {
    normalize(to_f64(&a.0).next_down(), to_f64(&a.1).next_up())
}

fn normalize(lo: f64, hi: f64) -> [f64; 2] {
    if lo >= 1.0 {
        [lo - 1.0, hi - 1.0]
    } else {
        [lo, hi]
    }
}

pub fn cylinder_box(im: &ItineraryMap, word: &[usize]) -> Result<CylinderBox, CodingError> {
    let d = im.d();
    if word.is_empty() || word.iter().any(|&s| s >= d) || !im.matrix.is_admissible(word) {
        return Err(CodingError::EmptyCylinder(word.to_vec()));
    }
    let p = &im.partition;
    let axis_words: Vec<Vec<usize>> =
        (0..p.dim()).map(|i| word.iter().map(|&s| p.axis_indices(s)[i]).collect()).collect();
    let exact: Vec<Vec<Arc>> = p.axes.iter().zip(&axis_words).map(|(ax, w)| pullback_exact(ax, w)).collect();

    let Some(alpha) = im.map.alpha() else {
        let sides: Vec<[f64; 2]> = exact.iter().map(|a| exact_side(&a[0])).collect();
        return Ok(CylinderBox {
            word: word.to_vec(),
            exact: true,
            diameter: sides.iter().map(|s| s[1] - s[0]).fold(0.0, f64::max),
            sides,
            rational: Some(exact.iter().map(|a| a[0].clone()).collect()),
        });
    };

    // Only the first coordinate feels the deformation, and only inside the
    // rectangle holding p₀; there θ ranges over the transverse arc.
    let special = im.fixed_point_symbol();
    let ax = &p.axes[0];
    let w = &axis_words[0];
    let n = word.len();
    let lam = im.map.lambda(0);
    let theta_range = |k: usize| -> (f64, f64) {
        let Some(theta) = im.map.theta() else { return (1.0, 1.0) };
        let (a, b) = (to_f64(&exact[1][k].0), to_f64(&exact[1][k].1));
        let m = (0.5 * (a + b)).round();
        let (ua, ub) = (a - m, b - m);
        let near = if ua <= 0.0 && ub >= 0.0 { 0.0 } else { ua.abs().min(ub.abs()) };
        let far = ua.abs().max(ub.abs());
        (theta.value(far), theta.value(near))
    };
    let branch = |x: f64, th: f64| -> f64 {
        let u = x - x.round();
        let dev = if u.abs() < alpha.eps() { alpha.value(u) - lam * u } else { 0.0 };
        lam * x + th * dev
    };
    // F_θ is increasing on the interval; returns a bracket [lo, hi] of F_θ⁻¹(y)
    let invert = |y: f64, th: f64, s: f64, e: f64| -> (f64, f64) {
        let (mut lo, mut hi) = (s, e);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if branch(mid, th) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo, hi)
    };

    let (s_last, e_last) = ax.interval(w[n - 1]);
    let (mut lo, mut hi) = (to_f64(&s_last), to_f64(&e_last));
    for k in (0..n - 1).rev() {
        let (s, e) = ax.interval(w[k]);
        let (s, e) = (to_f64(&s), to_f64(&e));
        let t = to_f64(&lift(ax, w[k], w[k + 1]));
        let (ylo, yhi) = (lo + t, hi + t);
        let (nlo, nhi) = if word[k] == special {
            let (th_lo, th_hi) = theta_range(k);
            let a = invert(ylo, th_lo, s, e).0.min(invert(ylo, th_hi, s, e).0);
            let b = invert(yhi, th_lo, s, e).1.max(invert(yhi, th_hi, s, e).1);
            (a, b)
        } else {
            (ylo / lam, yhi / lam)
        };
        lo = (nlo - OUTWARD).max(s);
        hi = (nhi + OUTWARD).min(e);
    }
    let mut sides = vec![normalize(lo, hi)];
    for a in exact.iter().skip(1) {
        sides.push(exact_side(&a[0]));
    }
    Ok(CylinderBox {
        word: word.to_vec(),
        exact: false,
        diameter: sides.iter().map(|s| s[1] - s[0]).fold(0.0, f64::max),
        sides,
        rational: None,
    })
}
