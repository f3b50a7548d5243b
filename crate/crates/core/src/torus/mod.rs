//! The deformed linear endomorphism `f₀` of `T¹` or `T²`.
//!
//! Coordinates are stored in `[0, 1)`. The fixed point `p₀ = 0` of the
//! linear model sits at the origin, and the deformation window
//! `W = (−2ε, 2ε) × (−3r, 3r)` is read in centered coordinates `[−½, ½)`.
//! Outside the support of the deformation the map is the linear model
//! `x ↦ (λ₁x₁, λ₂x₂) mod 1`, bit for bit.

mod profile;
mod verify;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use profile::{BumpProfile, DeformationProfile, ProfileConditions};
pub use verify::{
    solve_constants, verify_hypotheses, AlphaPolicy, ConstantInputs, Constants, GridSummary,
    HypothesisFlags, HypothesisReport, VRegion, VerifyOptions,
};

/// Largest supported dimension.
pub const MAX_DIM: usize = 2;

/// A point of `Tⁿ`; for `n = 1` the second coordinate is unused and kept at 0.
pub type Point = [f64; MAX_DIM];

/// `|det Df|` below this is reported as singular.
pub const SINGULAR_DET: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TorusError {
    #[error("invalid map parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported map: {0}")]
    Unsupported(String),
    #[error("Jacobian is singular at ({}, {}): |det| = {det:e}", .x[0], .x[1])]
    SingularJacobian { x: Point, det: f64 },
    #[error("grid too coarse: adjacent log|det| variation {variation} exceeds {limit}")]
    GridTooCoarse { variation: f64, limit: f64 },
    #[error("constants infeasible: {0}")]
    Infeasible(String),
}

/// Parameters of a [`TorusMap`] as they appear in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub eigenvalues: Vec<u32>,
    #[serde(default = "default_true")]
    pub deformed: bool,
    #[serde(default = "default_width")]
    pub eps: f64,
    #[serde(default = "default_width")]
    pub r: f64,
    #[serde(default = "default_gamma")]
    pub gamma1: f64,
    #[serde(default = "default_gamma")]
    pub gamma2: f64,
    /// `α′(0)`; defaults to `1.001 / (1 + γ₁)`.
    #[serde(default)]
    pub slope: Option<f64>,
}

fn default_true() -> bool {
    true
}
fn default_width() -> f64 {
    0.05
}
fn default_gamma() -> f64 {
    0.05
}

impl MapConfig {
    /// λ = (2, 4), ε = r = 0.05, γ₁ = γ₂ = 0.05, α′(0) = 0.9.
    pub fn flagship() -> Self {
        Self {
            eigenvalues: vec![2, 4],
            deformed: true,
            eps: 0.05,
            r: 0.05,
            gamma1: 0.05,
            gamma2: 0.05,
            slope: Some(0.9),
        }
    }

    pub fn linear(eigenvalues: Vec<u32>) -> Self {
        Self { eigenvalues, deformed: false, ..Self::flagship() }
    }

    pub fn slope(&self) -> f64 {
        self.slope.unwrap_or(1.001 / (1.0 + self.gamma1))
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Deformation {
    alpha: DeformationProfile,
    theta: Option<BumpProfile>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorusMap {
    eigenvalues: Vec<u32>,
    lambda: Point,
    deformation: Option<Deformation>,
    config: MapConfig,
}

/// `Df(x)` with `m[i][j] = ∂fᵢ/∂xⱼ`; only the leading `n×n` block is used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian {
    pub n: usize,
    pub m: [[f64; MAX_DIM]; MAX_DIM],
}

impl Jacobian {
    pub fn det(&self) -> f64 {
        match self.n {
            1 => self.m[0][0],
            _ => self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0],
        }
    }

    /// Spectral norm of the inverse, `1/σ_min`.
    pub fn inv_norm(&self) -> Option<f64> {
        let det = self.det();
        if det.abs() < SINGULAR_DET {
            return None;
        }
        Some(match self.n {
            1 => 1.0 / det.abs(),
            _ => {
                let [[a, b], [c, d]] = self.m;
                let t = a * a + b * b + c * c + d * d;
                let disc = (t * t - 4.0 * det * det).max(0.0).sqrt();
                let smax = ((t + disc) / 2.0).sqrt();
                smax / det.abs()
            }
        })
    }

    /// `Df⁻¹ v`.
    pub fn solve(&self, v: Point) -> Point {
        match self.n {
            1 => [v[0] / self.m[0][0], 0.0],
            _ => {
                let [[a, b], [c, d]] = self.m;
                let det = self.det();
                [(d * v[0] - b * v[1]) / det, (a * v[1] - c * v[0]) / det]
            }
        }
    }

    pub fn apply(&self, v: Point) -> Point {
        match self.n {
            1 => [self.m[0][0] * v[0], 0.0],
            _ => [
                self.m[0][0] * v[0] + self.m[0][1] * v[1],
                self.m[1][0] * v[0] + self.m[1][1] * v[1],
            ],
        }
    }
}

/// Representative of `x mod 1` in `[0, 1)`.
pub fn wrap(x: f64) -> f64 {
    let y = x - x.floor();
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// Representative of `x mod 1` in `[−½, ½)`.
pub fn center(x: f64) -> f64 {
    let y = wrap(x);
    if y >= 0.5 {
        y - 1.0
    } else {
        y
    }
}

/// Wrapped max-norm distance on `Tⁿ`.
pub fn torus_distance(n: usize, x: &Point, y: &Point) -> f64 {
    (0..n).map(|i| center(x[i] - y[i]).abs()).fold(0.0, f64::max)
}

impl TorusMap {
    pub fn new(config: &MapConfig) -> Result<Self, TorusError> {
        let ev = &config.eigenvalues;
        if ev.is_empty() || ev.len() > MAX_DIM {
            return Err(TorusError::Unsupported(format!(
                "dimension {} (only 1 or 2 is supported)",
                ev.len()
            )));
        }
        if ev.iter().any(|&l| l < 2) {
            return Err(TorusError::InvalidParameter("eigenvalues must be integers >= 2".into()));
        }
        if ev.windows(2).any(|w| w[0] >= w[1]) {
            return Err(TorusError::InvalidParameter("eigenvalues must be strictly increasing".into()));
        }
        let mut lambda = [1.0; MAX_DIM];
        for (i, &l) in ev.iter().enumerate() {
            lambda[i] = l as f64;
        }
        let deformation = if config.deformed {
            let alpha = DeformationProfile::new(lambda[0], config.eps, config.gamma1, config.gamma2, config.slope())?;
            if 2.0 * config.eps >= 0.5 {
                return Err(TorusError::InvalidParameter("window (-2 eps, 2 eps) must fit in the circle".into()));
            }
            let theta = if ev.len() == 2 {
                if !(config.r > 0.0) || 3.0 * config.r >= 0.5 {
                    return Err(TorusError::InvalidParameter("r must lie in (0, 1/6)".into()));
                }
                Some(BumpProfile::new(config.r)?)
            } else {
                None
            };
            Some(Deformation { alpha, theta })
        } else {
            None
        };
        Ok(Self { eigenvalues: ev.clone(), lambda, deformation, config: config.clone() })
    }

    pub fn linear(eigenvalues: &[u32]) -> Result<Self, TorusError> {
        Self::new(&MapConfig::linear(eigenvalues.to_vec()))
    }

    pub fn flagship() -> Self {
        Self::new(&MapConfig::flagship()).expect("flagship parameters are valid")
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[u32] {
        &self.eigenvalues
    }

    pub fn lambda(&self, i: usize) -> f64 {
        self.lambda[i]
    }

    pub fn config(&self) -> &MapConfig {
        &self.config
    }

    pub fn is_deformed(&self) -> bool {
        self.deformation.is_some()
    }

    pub fn alpha(&self) -> Option<&DeformationProfile> {
        self.deformation.as_ref().map(|d| &d.alpha)
    }

    pub fn theta(&self) -> Option<&BumpProfile> {
        self.deformation.as_ref().and_then(|d| d.theta.as_ref())
    }

    /// `(θ, θ′)` at the transverse coordinate; identically 1 in dimension 1.
    fn bump(&self, d: &Deformation, y: f64) -> (f64, f64) {
        match &d.theta {
            Some(t) => (t.value(y), t.derivative(y)),
            None => (1.0, 0.0),
        }
    }

    /// Half-widths of `W` in centered coordinates; `None` for the linear model.
    pub fn window(&self) -> Option<Point> {
        let d = self.deformation.as_ref()?;
        let h2 = d.theta.as_ref().map_or(0.0, |t| 3.0 * t.r());
        Some([2.0 * d.alpha.eps(), h2])
    }

    /// Half-widths of the closed set where `f₀` differs from the linear model.
    pub fn support(&self) -> Option<Point> {
        let d = self.deformation.as_ref()?;
        let h2 = d.theta.as_ref().map_or(0.0, |t| 2.0 * t.r());
        Some([d.alpha.eps(), h2])
    }

    pub fn in_window(&self, x: &Point) -> bool {
        match self.window() {
            None => false,
            Some(w) => (0..self.dim()).all(|i| center(x[i]).abs() < w[i]),
        }
    }

    /// The `x₁` increment `θ(x₂)(α(x₁) − λ₁x₁)`, exactly 0 off the support.
    pub fn deformation_term(&self, x: &Point) -> f64 {
        let Some(d) = &self.deformation else { return 0.0 };
        let u = center(x[0]);
        if u.abs() >= d.alpha.eps() {
            return 0.0;
        }
        let (th, _) = self.bump(d, if self.dim() == 2 { center(x[1]) } else { 0.0 });
        if th == 0.0 {
            return 0.0;
        }
        th * (d.alpha.value(u) - self.lambda[0] * u)
    }

    pub fn eval(&self, x: &Point) -> Point {
        let mut y = [0.0; MAX_DIM];
        y[0] = wrap(self.lambda[0] * x[0] + self.deformation_term(x));
        if self.dim() == 2 {
            y[1] = wrap(self.lambda[1] * x[1]);
        }
        y
    }

    pub fn jacobian(&self, x: &Point) -> Jacobian {
        let n = self.dim();
        let mut m = [[0.0; MAX_DIM]; MAX_DIM];
        m[0][0] = self.lambda[0];
        if n == 2 {
            m[1][1] = self.lambda[1];
        }
        if let Some(d) = &self.deformation {
            let u = center(x[0]);
            let y = if n == 2 { center(x[1]) } else { 0.0 };
            let (th, dth) = self.bump(d, y);
            m[0][0] = d.alpha.derivative(u) * th + (1.0 - th) * self.lambda[0];
            if n == 2 {
                m[0][1] = (d.alpha.value(u) - self.lambda[0] * u) * dth;
            }
        }
        Jacobian { n, m }
    }

    pub fn det(&self, x: &Point) -> f64 {
        self.jacobian(x).det()
    }

    pub fn inv_norm(&self, x: &Point) -> Result<f64, TorusError> {
        let j = self.jacobian(x);
        j.inv_norm().ok_or(TorusError::SingularJacobian { x: *x, det: j.det() })
    }

    pub fn profile_conditions(&self) -> Option<ProfileConditions> {
        let d = self.deformation.as_ref()?;
        let c = d.theta.as_ref().map(BumpProfile::derivative_bound);
        let lambda2 = if self.dim() == 2 { Some(self.lambda[1]) } else { None };
        Some(d.alpha.conditions(lambda2, c))
    }
}
