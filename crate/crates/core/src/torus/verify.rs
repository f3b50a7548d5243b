//! Grid verification of the expansion hypotheses and the constant solver.
//!
//! Every node value is widened by half the largest difference to its four
//! lattice neighbours before it enters a sup or inf. This is a Lipschitz
//! margin on the cell around the node, not a certified enclosure.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{center, ProfileConditions, TorusError, TorusMap};

/// Value-space slack demanded of every strict inequality.
pub const MARGIN: f64 = 1e-9;
/// Default bound on the adjacent-node jump of `log|det Df|`.
pub const MAX_LOG_DET_JUMP: f64 = 0.25;

/// Which end of the feasible `α` interval to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaPolicy {
    /// Smallest feasible `α`, which maximizes `c`.
    #[default]
    MaxExponent,
    /// Largest feasible `α`; `c` is then of the order of the margin.
    Largest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantInputs {
    pub delta0: f64,
    pub delta1: f64,
    /// `inf` / `sup` of `log|det Df|` on `V`; `None` when `V` is empty.
    pub m1: Option<f64>,
    pub m2: Option<f64>,
    /// `inf` / `sup` of `log|det Df|` on `Wᶜ`.
    pub big_m1: f64,
    pub big_m2: f64,
    pub gamma0: f64,
    pub l: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub alpha_exp: f64,
    pub c: f64,
    /// Closed range of `α` meeting every inequality with the margin.
    pub alpha_range: (f64, f64),
    /// `−log((1+δ₀)^α (1+δ₁)^{−(1−α)}) = 2c`.
    pub eq_alpha_slack: f64,
    /// Right side minus left side of the volume inequality; `None` when `V = ∅`.
    pub eq_beta_slack: Option<f64>,
}

/// Solves `(1+δ₀)^α (1+δ₁)^{−(1−α)} < 1` and
/// `α m₂ + (1−α) M₂ < γ₀ m₁ + (1−γ₀) M₁ − l log(1+δ₀)` for `α ∈ (γ₀, 1)`.
///
/// Both are linear in `α`. `c = ½((1−α) log(1+δ₁) − α log(1+δ₀))`.
pub fn solve_constants(inputs: &ConstantInputs, policy: AlphaPolicy) -> Result<Constants, TorusError> {
    let ConstantInputs { delta0, delta1, m1, m2, big_m1, big_m2, gamma0, l } = *inputs;
    if !(delta0 > 0.0 && delta1 > 0.0) {
        return Err(TorusError::InvalidParameter("delta0 and delta1 must be positive".into()));
    }
    if !(0.0..1.0).contains(&gamma0) {
        return Err(TorusError::InvalidParameter(format!("gamma0 = {gamma0} is outside [0, 1)")));
    }
    let d = delta0.ln_1p();
    let y = delta1.ln_1p();
    let mut lo = gamma0 + MARGIN;
    let mut hi = 1.0 - MARGIN;

    // α d − (1−α) y ≤ −margin
    hi = hi.min((y - MARGIN) / (d + y));

    let beta_terms = m1.zip(m2);
    if let Some((m1, m2)) = beta_terms {
        let rhs = gamma0 * m1 + (1.0 - gamma0) * big_m1 - l as f64 * d - big_m2 - MARGIN;
        let k = m2 - big_m2;
        if k > 0.0 {
            hi = hi.min(rhs / k);
        } else if k < 0.0 {
            lo = lo.max(rhs / k);
        } else if rhs < 0.0 {
            return Err(TorusError::Infeasible("volume inequality fails for every alpha".into()));
        }
    }
    if !(lo <= hi) {
        return Err(TorusError::Infeasible(format!("no alpha in (gamma0, 1): range [{lo}, {hi}] is empty")));
    }
    let alpha = match policy {
        AlphaPolicy::MaxExponent => lo,
        AlphaPolicy::Largest => hi,
    };
    let two_c = (1.0 - alpha) * y - alpha * d;
    let eq_beta_slack = beta_terms.map(|(m1, m2)| {
        gamma0 * m1 + (1.0 - gamma0) * big_m1 - l as f64 * d - (alpha * m2 + (1.0 - alpha) * big_m2)
    });
    if !(two_c > 0.0) || eq_beta_slack.is_some_and(|s| !(s > 0.0)) {
        return Err(TorusError::Infeasible("rounding consumed the margin".into()));
    }
    Ok(Constants { alpha_exp: alpha, c: 0.5 * two_c, alpha_range: (lo, hi), eq_alpha_slack: two_c, eq_beta_slack })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub grid_per_axis: usize,
    /// Upper bound on the fraction of time typical orbits spend in `W`.
    pub gamma0: f64,
    /// Fixed `δ₁`; by default the value maximizing `c` is searched for.
    pub delta1: Option<f64>,
    /// Fixed `β`; defaults to `m₂ − m₁ + 1e−9`.
    pub beta: Option<f64>,
    /// Dimension factor in the volume inequality; defaults to `n`.
    pub l: Option<usize>,
    pub policy: AlphaPolicy,
    pub max_log_det_jump: f64,
}

impl VerifyOptions {
    pub fn new(grid_per_axis: usize, gamma0: f64) -> Self {
        Self {
            grid_per_axis,
            gamma0,
            delta1: None,
            beta: None,
            l: None,
            policy: AlphaPolicy::default(),
            max_log_det_jump: MAX_LOG_DET_JUMP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub grid_per_axis: usize,
    pub nodes: usize,
    pub max_log_det_jump: f64,
    pub max_inv_norm_jump: f64,
    pub window_nodes: usize,
    pub min_det: f64,
    pub max_inv_norm: f64,
}

/// Nodes that fail uniform expansion by `(1+δ₁)⁻¹`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VRegion {
    pub nodes: usize,
    pub fraction: f64,
    /// `[[min x₁, max x₁], [min x₂, max x₂]]` in centered coordinates.
    pub bounding_box: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisFlags {
    #[serde(rename = "H1")]
    pub h1: bool,
    #[serde(rename = "H2")]
    pub h2: bool,
    #[serde(rename = "H3")]
    pub h3: bool,
    pub v_subset_w: bool,
    pub constants: bool,
    pub all: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub grid: GridSummary,
    pub delta0: f64,
    pub delta1: f64,
    pub sigma1: f64,
    pub q: usize,
    pub beta: f64,
    pub m1: Option<f64>,
    pub m2: Option<f64>,
    #[serde(rename = "M1")]
    pub big_m1: f64,
    #[serde(rename = "M2")]
    pub big_m2: f64,
    /// `sup log|det Df|` over `Vᶜ` rather than `Wᶜ`.
    #[serde(rename = "M2_v_complement")]
    pub big_m2_v_complement: f64,
    pub gamma0: f64,
    pub l: usize,
    #[serde(rename = "V")]
    pub v: VRegion,
    pub alpha_exp: Option<f64>,
    pub c: Option<f64>,
    pub constants: Option<Constants>,
    pub infeasible: Option<String>,
    pub passed: HypothesisFlags,
    pub profile: Option<ProfileConditions>,
}

struct Node {
    x: [f64; 2],
    inv: f64,
    log_det: f64,
    inv_margin: f64,
    log_det_margin: f64,
    in_w: bool,
}

impl Node {
    fn inv_hi(&self) -> f64 {
        self.inv + self.inv_margin
    }
}

fn evaluate_grid(f: &TorusMap, m: usize) -> Result<Vec<Node>, TorusError> {
    let n = f.dim();
    let rows = if n == 2 { m } else { 1 };
    let h = 1.0 / m as f64;
    let raw: Vec<(f64, f64)> = (0..rows * m)
        .into_par_iter()
        .map(|k| {
            let x = if n == 2 { [(k / m) as f64 * h, (k % m) as f64 * h] } else { [k as f64 * h, 0.0] };
            let j = f.jacobian(&x);
            let inv = j.inv_norm().ok_or(TorusError::SingularJacobian { x, det: j.det() })?;
            Ok((inv, j.det().abs().ln()))
        })
        .collect::<Result<_, TorusError>>()?;

    let idx = |i: usize, j: usize| if n == 2 { (i % m) * m + (j % m) } else { i % m };
    Ok((0..rows * m)
        .into_par_iter()
        .map(|k| {
            let (i, j) = if n == 2 { (k / m, k % m) } else { (k, 0) };
            let mut nbrs = vec![idx(i + 1, j), idx(i + m - 1, j)];
            if n == 2 {
                nbrs.push(idx(i, j + 1));
                nbrs.push(idx(i, j + m - 1));
            }
            let (inv, ld) = raw[k];
            let di = nbrs.iter().map(|&q| (raw[q].0 - inv).abs()).fold(0.0, f64::max);
            let dl = nbrs.iter().map(|&q| (raw[q].1 - ld).abs()).fold(0.0, f64::max);
            let x = if n == 2 { [i as f64 * h, j as f64 * h] } else { [i as f64 * h, 0.0] };
            Node { x, inv, log_det: ld, inv_margin: 0.5 * di, log_det_margin: 0.5 * dl, in_w: f.in_window(&x) }
        })
        .collect())
}

/// Statistics of the grid set `V = {‖Df⁻¹‖ > t}`, from nodes sorted by
/// `‖Df⁻¹‖` descending. Containment in `W` uses the widened values.
struct VStats {
    count: usize,
    in_w: bool,
    m1: Option<f64>,
    m2: Option<f64>,
    big_m2_vc: f64,
}

struct Prefixes {
    keys: Vec<f64>,
    min_lo: Vec<f64>,
    max_hi: Vec<f64>,
    suffix_max_hi: Vec<f64>,
    /// Largest widened `‖Df⁻¹‖` outside `W`.
    outside_w: f64,
}

impl Prefixes {
    fn new(sorted: &[&Node]) -> Self {
        let n = sorted.len();
        let mut p = Prefixes {
            keys: sorted.iter().map(|x| x.inv).collect(),
            min_lo: Vec::with_capacity(n + 1),
            max_hi: Vec::with_capacity(n + 1),
            suffix_max_hi: vec![f64::NEG_INFINITY; n + 1],
            outside_w: sorted
                .iter()
                .filter(|x| !x.in_w)
                .map(|x| x.inv_hi())
                .fold(f64::NEG_INFINITY, f64::max),
        };
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        p.min_lo.push(lo);
        p.max_hi.push(hi);
        for node in sorted {
            lo = lo.min(node.log_det - node.log_det_margin);
            hi = hi.max(node.log_det + node.log_det_margin);
            p.min_lo.push(lo);
            p.max_hi.push(hi);
        }
        for k in (0..n).rev() {
            let node = sorted[k];
            p.suffix_max_hi[k] = p.suffix_max_hi[k + 1].max(node.log_det + node.log_det_margin);
        }
        p
    }

    fn stats(&self, delta1: f64) -> VStats {
        let t = 1.0 / (1.0 + delta1);
        let count = self.keys.partition_point(|&k| k > t);
        VStats {
            count,
            in_w: self.outside_w <= t,
            m1: (count > 0).then(|| self.min_lo[count]),
            m2: (count > 0).then(|| self.max_hi[count]),
            big_m2_vc: self.suffix_max_hi[count],
        }
    }
}

pub fn verify_hypotheses(f: &TorusMap, opts: &VerifyOptions) -> Result<HypothesisReport, TorusError> {
    let m = opts.grid_per_axis;
    if m < 64 {
        return Err(TorusError::InvalidParameter(format!("grid_per_axis = {m} is below 64")));
    }
    let nodes = evaluate_grid(f, m)?;
    let jump_ld = nodes.iter().map(|x| 2.0 * x.log_det_margin).fold(0.0, f64::max);
    let jump_inv = nodes.iter().map(|x| 2.0 * x.inv_margin).fold(0.0, f64::max);
    if jump_ld > opts.max_log_det_jump {
        return Err(TorusError::GridTooCoarse { variation: jump_ld, limit: opts.max_log_det_jump });
    }

    let sup_inv = nodes.iter().map(Node::inv_hi).fold(f64::NEG_INFINITY, f64::max);
    let delta0 = (sup_inv - 1.0).max(0.0).max(MARGIN);
    let sigma1 = nodes.iter().map(|x| x.log_det - x.log_det_margin).fold(f64::INFINITY, f64::min).exp();
    let outside: Vec<&Node> = nodes.iter().filter(|x| !x.in_w).collect();
    let big_m1 = outside.iter().map(|x| x.log_det - x.log_det_margin).fold(f64::INFINITY, f64::min);
    let big_m2 = outside.iter().map(|x| x.log_det + x.log_det_margin).fold(f64::NEG_INFINITY, f64::max);
    let l = opts.l.unwrap_or(f.dim());
    let q = usize::from(f.is_deformed());

    let mut sorted: Vec<&Node> = nodes.iter().collect();
    sorted.sort_by(|a, b| b.inv.total_cmp(&a.inv));
    let prefixes = Prefixes::new(&sorted);

    let inputs_for = |delta1: f64, s: &VStats| ConstantInputs {
        delta0,
        delta1,
        m1: s.m1,
        m2: s.m2,
        big_m1,
        big_m2,
        gamma0: opts.gamma0,
        l,
    };
    let delta1_max = (f.lambda(0) - 1.0) * (1.0 - MARGIN);
    let delta1 = match opts.delta1 {
        Some(d) => d,
        None => {
            // V only changes where the threshold crosses a node key.
            let mut candidates: Vec<f64> = prefixes
                .keys
                .iter()
                .filter(|&&k| k < 1.0)
                .map(|&k| 1.0 / k - 1.0)
                .filter(|&d| d > 0.0 && d < delta1_max)
                .collect();
            candidates.push(delta1_max);
            candidates.sort_by(f64::total_cmp);
            candidates.dedup();
            candidates
                .iter()
                .filter_map(|&d| {
                    let s = prefixes.stats(d);
                    if !s.in_w {
                        return None;
                    }
                    solve_constants(&inputs_for(d, &s), opts.policy).ok().map(|c| (d, c.c))
                })
                .max_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)))
                .map_or(delta1_max, |(d, _)| d)
        }
    };
    if !(delta1 > 0.0) {
        return Err(TorusError::InvalidParameter("delta1 must be positive".into()));
    }

    let s = prefixes.stats(delta1);
    let beta = opts.beta.unwrap_or_else(|| s.m1.zip(s.m2).map_or(0.0, |(a, b)| b - a) + MARGIN);
    let v_in_w = s.in_w;
    let h1 = v_in_w && sup_inv <= 1.0 + delta0;
    let h2 = sigma1 > q as f64;
    let h3 = v_in_w
        && match s.m1.zip(s.m2) {
            None => true,
            Some((m1, m2)) => big_m1 > m2 && m2 - m1 < beta,
        };
    let solved = if v_in_w {
        solve_constants(&inputs_for(delta1, &s), opts.policy)
    } else {
        Err(TorusError::Infeasible("V is not contained in W".into()))
    };
    let (constants, infeasible) = match solved {
        Ok(c) => (Some(c), None),
        Err(TorusError::Infeasible(msg)) => (None, Some(msg)),
        Err(e) => return Err(e),
    };

    let v_nodes = &sorted[..s.count];
    let bounding_box = (!v_nodes.is_empty()).then(|| {
        (0..f.dim())
            .map(|i| {
                v_nodes.iter().fold([f64::INFINITY, f64::NEG_INFINITY], |acc, x| {
                    let u = center(x.x[i]);
                    [acc[0].min(u), acc[1].max(u)]
                })
            })
            .collect()
    });
    let flags = HypothesisFlags {
        h1,
        h2,
        h3,
        v_subset_w: v_in_w,
        constants: constants.is_some(),
        all: h1 && h2 && h3 && constants.is_some(),
    };
    Ok(HypothesisReport {
        grid: GridSummary {
            grid_per_axis: m,
            nodes: nodes.len(),
            max_log_det_jump: jump_ld,
            max_inv_norm_jump: jump_inv,
            window_nodes: nodes.len() - outside.len(),
            min_det: nodes.iter().map(|x| x.log_det).fold(f64::INFINITY, f64::min).exp(),
            max_inv_norm: nodes.iter().map(|x| x.inv).fold(f64::NEG_INFINITY, f64::max),
        },
        delta0,
        delta1,
        sigma1,
        q,
        beta,
        m1: s.m1,
        m2: s.m2,
        big_m1,
        big_m2,
        big_m2_v_complement: s.big_m2_vc,
        gamma0: opts.gamma0,
        l,
        v: VRegion { nodes: s.count, fraction: s.count as f64 / nodes.len() as f64, bounding_box },
        alpha_exp: constants.as_ref().map(|c| c.alpha_exp),
        c: constants.as_ref().map(|c| c.c),
        constants,
        infeasible,
        passed: flags,
        profile: f.profile_conditions(),
    })
}
