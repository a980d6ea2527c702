use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{invalid, Error, Result};

/// Lebesgue exponent stored through its reciprocal, so `∞` is the exact
/// value `1/r = 0` and Hölder identities stay exact.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Exponent {
    recip: BigRational,
}

impl Exponent {
    pub fn infinite() -> Self {
        Self { recip: BigRational::zero() }
    }

    pub fn integer(value: i64) -> Self {
        Self::ratio(value, 1)
    }

    /// The exponent `num/den`. Panics unless the value is positive.
    pub fn ratio(num: i64, den: i64) -> Self {
        assert!(num > 0 && den > 0, "exponent must be a positive ratio");
        Self {
            recip: BigRational::new(BigInt::from(den), BigInt::from(num)),
        }
    }

    pub fn from_recip(recip: BigRational) -> Result<Self> {
        if recip.is_negative() {
            return Err(invalid("exponent reciprocal must be nonnegative"));
        }
        Ok(Self { recip })
    }

    /// Exact conversion of a binary64 value (`+∞` maps to the infinite exponent).
    pub fn from_f64(value: f64) -> Result<Self> {
        if value == f64::INFINITY {
            return Ok(Self::infinite());
        }
        if !(value.is_finite() && value > 0.0) {
            return Err(invalid(format!("exponent must be positive, got {value}")));
        }
        let exact = BigRational::from_float(value).expect("finite float");
        Ok(Self { recip: exact.recip() })
    }

    pub fn recip(&self) -> &BigRational {
        &self.recip
    }

    pub fn recip_f64(&self) -> f64 {
        self.recip.to_f64().unwrap_or(f64::NAN)
    }

    pub fn value(&self) -> f64 {
        if self.is_infinite() {
            f64::INFINITY
        } else {
            self.recip.recip().to_f64().unwrap_or(f64::NAN)
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.recip.is_zero()
    }

    /// Hölder dual `r' = r/(r-1)`, defined for `r ≥ 1`.
    pub fn dual(&self) -> Result<Self> {
        let one = BigRational::one();
        if self.recip > one {
            return Err(invalid(format!("exponent {self} < 1 has no Hölder dual")));
        }
        Ok(Self { recip: one - &self.recip })
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.recip.recip())
        }
    }
}

impl fmt::Debug for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Exponent({self})")
    }
}

/// Index tuple `(n, q, θ, q', θ', p, α, β)` of the trajectory space
/// `X = C⁰([0,T],H) ∩ L^{q,θ}`, its dual `X' = L^{2,1} + L^{q',θ'}` and the
/// potential space `V = L^{p,α} + L^{∞,β}`.
///
/// Only [`derive_family`] builds one, so every instance satisfies the
/// admissibility and potential-space constraints exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentFamily {
    n: usize,
    q: Exponent,
    theta: Exponent,
    q_dual: Exponent,
    theta_dual: Exponent,
    p: Exponent,
    alpha: Exponent,
    beta: Exponent,
}

impl ExponentFamily {
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn q(&self) -> &Exponent {
        &self.q
    }
    pub fn theta(&self) -> &Exponent {
        &self.theta
    }
    pub fn q_dual(&self) -> &Exponent {
        &self.q_dual
    }
    pub fn theta_dual(&self) -> &Exponent {
        &self.theta_dual
    }
    pub fn p(&self) -> &Exponent {
        &self.p
    }
    pub fn alpha(&self) -> &Exponent {
        &self.alpha
    }
    pub fn beta(&self) -> &Exponent {
        &self.beta
    }

    /// `|2/θ − n(1/2 − 1/q)|` evaluated in binary64.
    pub fn admissibility_residual(&self) -> f64 {
        (2.0 * self.theta.recip_f64() - self.n as f64 * (0.5 - self.q.recip_f64())).abs()
    }
}

fn half() -> BigRational {
    BigRational::new(BigInt::from(1), BigInt::from(2))
}

fn rat(v: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Schrödinger admissibility `2/θ = n(1/2 − 1/q)` with `2 ≤ q ≤ ∞`,
/// `2 < θ ≤ ∞` and, for `n ≥ 3`, `q < 2n/(n−2)`.
///
/// Pairs outside the ranges `q ≥ 2`, `θ > 2` are not admissible. Values
/// that are not Lebesgue exponents at all (NaN, below one) are errors.
pub fn check_admissible(n: usize, q: f64, theta: f64) -> Result<bool> {
    if n == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    if q.is_nan() || theta.is_nan() || q < 1.0 || theta < 1.0 {
        return Err(invalid(format!("out-of-range exponents q={q}, θ={theta}")));
    }
    if q < 2.0 || theta <= 2.0 {
        return Ok(false);
    }
    let nf = n as f64;
    let residual = 2.0 / theta - nf * (0.5 - 1.0 / q);
    if residual.abs() > 1e-12 {
        return Ok(false);
    }
    Ok(n < 3 || q < 2.0 * nf / (nf - 2.0))
}

/// Completes `(n, q, α, β)` into a full family: `θ` from admissibility,
/// duals from Hölder, `p` from `1/p = 1 − 2/q`, all in exact rationals.
pub fn derive_family(n: usize, q: Exponent, alpha: Exponent, beta: Exponent) -> Result<ExponentFamily> {
    let infeasible = |msg: String| Err(Error::InfeasibleExponents(msg));
    if n == 0 {
        return infeasible("dimension must be at least 1".into());
    }
    let one = BigRational::one();
    if q.recip() > &half() {
        return infeasible(format!("q = {q} must be at least 2"));
    }
    // 1/θ = (n/2)(1/2 − 1/q)
    let theta_recip = rat(n) * half() * (half() - q.recip());
    if theta_recip >= half() {
        return infeasible(format!(
            "no admissible θ > 2 for n = {n}, q = {q} (requires q < 2n/(n-2))"
        ));
    }
    let theta = Exponent::from_recip(theta_recip)?;
    let p = Exponent::from_recip(&one - rat(2) * q.recip())?;
    if alpha.recip() > &one {
        return infeasible(format!("α = {alpha} must be at least 1"));
    }
    if beta.recip() >= &one {
        return infeasible(format!("β = {beta} must exceed 1"));
    }
    let window = &one - rat(2) * theta.recip();
    if alpha.recip() >= &window {
        return infeasible(format!(
            "1/α = {} must be below 1 − 2/θ = {}",
            alpha.recip(),
            window
        ));
    }
    Ok(ExponentFamily {
        n,
        q_dual: q.dual()?,
        theta_dual: theta.dual()?,
        q,
        theta,
        p,
        alpha,
        beta,
    })
}

/// `T* = max{T^{1−1/β}, T^{1−2/θ−1/α}}`, nondecreasing in `T`.
pub fn t_star(horizon: f64, family: &ExponentFamily) -> Result<f64> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(invalid(format!("horizon must be positive, got {horizon}")));
    }
    let bounded = 1.0 - family.beta.recip_f64();
    let singular = 1.0 - 2.0 * family.theta.recip_f64() - family.alpha.recip_f64();
    Ok(horizon.powf(bounded).max(horizon.powf(singular)))
}
