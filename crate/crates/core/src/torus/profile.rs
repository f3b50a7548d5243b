use serde::{Deserialize, Serialize};

use super::TorusError;

/// C¹ cubic plateau on `[−1, 1]`: `ψ(0) = 1`, `ψ(±1) = ψ′(±1) = 0`.
fn plateau(u: f64) -> f64 {
    let a = u.abs();
    1.0 - 3.0 * a * a + 2.0 * a * a * a
}

/// `d/du (u ψ(u)) = 1 − 9u² + 8|u|³`.
fn plateau_product_derivative(u: f64) -> f64 {
    let a = u.abs();
    1.0 - 9.0 * a * a + 8.0 * a * a * a
}

/// `α(x) = λ₁x − (λ₁ − s)·x·ψ(x/ε)` on `|x| < ε`, `λ₁x` elsewhere.
///
/// `α′` equals `s` at the origin, is minimal there, and peaks at
/// `λ₁ + (11/16)(λ₁ − s)` where `|x| = 3ε/4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationProfile {
    lambda1: f64,
    eps: f64,
    gamma1: f64,
    gamma2: f64,
    slope: f64,
}

impl DeformationProfile {
    pub fn new(lambda1: f64, eps: f64, gamma1: f64, gamma2: f64, slope: f64) -> Result<Self, TorusError> {
        let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(TorusError::InvalidParameter(what.into())) };
        check(lambda1 > 1.0, "lambda1 must exceed 1")?;
        check(eps > 0.0 && eps.is_finite(), "eps must be positive")?;
        check(gamma1 > 0.0 && gamma1.is_finite(), "gamma1 must be positive")?;
        check(gamma2 > 0.0 && gamma2.is_finite(), "gamma2 must be positive")?;
        check(slope > 0.0 && slope < lambda1, "slope must lie in (0, lambda1)")?;
        Ok(Self { lambda1, eps, gamma1, gamma2, slope })
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }
    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }
    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn value(&self, x: f64) -> f64 {
        if x.abs() >= self.eps {
            return self.lambda1 * x;
        }
        self.lambda1 * x - (self.lambda1 - self.slope) * x * plateau(x / self.eps)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        if x.abs() >= self.eps {
            return self.lambda1;
        }
        self.lambda1 - (self.lambda1 - self.slope) * plateau_product_derivative(x / self.eps)
    }

    pub fn min_derivative(&self) -> f64 {
        self.slope
    }

    pub fn max_derivative(&self) -> f64 {
        self.lambda1 + 11.0 / 16.0 * (self.lambda1 - self.slope)
    }

    /// `sup |α(x) − λ₁x| = (λ₁ − s)·ε·max u ψ(u)`; the maximizer is the root
    /// of `1 − 9u² + 8u³` in `(0, 3/4)`.
    pub fn max_deviation(&self) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 0.75f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if plateau_product_derivative(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let u = 0.5 * (lo + hi);
        (self.lambda1 - self.slope) * self.eps * u * plateau(u)
    }

    /// `sup α′` over `|x| < ε/2`; `α′` is monotone in `|x|` there.
    pub fn max_inner_derivative(&self) -> f64 {
        self.lambda1 - (self.lambda1 - self.slope) * plateau_product_derivative(0.5)
    }

    pub fn conditions(&self, lambda2: Option<f64>, c: Option<f64>) -> ProfileConditions {
        let lower = 1.0 / (1.0 + self.gamma1);
        let upper = self.lambda1 + self.gamma2;
        let gamma2_constraint =
            lambda2.zip(c).map(|(l2, c)| l2 - self.gamma2 * c > self.lambda1 + self.gamma2);
        ProfileConditions {
            min_alpha_prime: self.min_derivative(),
            max_alpha_prime: self.max_derivative(),
            max_inner_alpha_prime: self.max_inner_derivative(),
            max_deviation: self.max_deviation(),
            derivative_lower_bound: lower,
            derivative_upper_bound: upper,
            derivative_bounds: self.min_derivative() > lower && self.max_derivative() < upper,
            inner_subunit: self.max_inner_derivative() < 1.0,
            c0_close: self.max_deviation() < self.gamma2,
            fixed_point: self.value(0.0) == 0.0,
            gamma2_constraint,
        }
    }
}

/// The three shape constraints on `α`, the bump constraint tying `γ₂` to
/// `C`, and `α(0) = 0`. Reported rather than enforced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileConditions {
    pub min_alpha_prime: f64,
    pub max_alpha_prime: f64,
    pub max_inner_alpha_prime: f64,
    pub max_deviation: f64,
    pub derivative_lower_bound: f64,
    pub derivative_upper_bound: f64,
    /// `(1+γ₁)⁻¹ < α′ < λ₁ + γ₂`.
    pub derivative_bounds: bool,
    /// `α′ < 1` on `|x| < ε/2`.
    pub inner_subunit: bool,
    /// `sup |α − λ₁x| < γ₂`.
    pub c0_close: bool,
    pub fixed_point: bool,
    /// `λ₂ − γ₂C > λ₁ + γ₂`; absent in dimension 1.
    pub gamma2_constraint: Option<bool>,
}

/// Radial C¹ smoothstep: `θ = 1` on `|y| ≤ r`, `0` on `|y| ≥ 2r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    r: f64,
}

impl BumpProfile {
    pub fn new(r: f64) -> Result<Self, TorusError> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(TorusError::InvalidParameter("r must be positive".into()));
        }
        Ok(Self { r })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    fn t(&self, y: f64) -> f64 {
        ((y.abs() - self.r) / self.r).clamp(0.0, 1.0)
    }

    pub fn value(&self, y: f64) -> f64 {
        let t = self.t(y);
        1.0 - t * t * (3.0 - 2.0 * t)
    }

    pub fn derivative(&self, y: f64) -> f64 {
        let t = self.t(y);
        -6.0 * t * (1.0 - t) / self.r * y.signum()
    }

    /// `sup |θ′| = 3/(2r)`, attained at `|y| = 3r/2`.
    pub fn derivative_bound(&self) -> f64 {
        1.5 / self.r
    }
}
