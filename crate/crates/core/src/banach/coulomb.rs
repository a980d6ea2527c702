//! Membership of centred singular potentials `-r^{-s}` in the potential
//! space, and the exponent window left for Coulomb-type singularities.

/// Open interval `(lower, upper)` of admissible spatial exponents `p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OpenInterval {
    pub lower: f64,
    pub upper: f64,
}

impl OpenInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower < x && x < self.upper
    }
}

/// Whether `r^{-s}` can serve as the `L^p` part of a potential on `ℝⁿ`.
///
/// The radial integral `∫₀¹ r^{-ps+n-1} dr` converges iff `s < n/p`; in
/// addition the spatial index must be usable for the potential space,
/// which for `n ≥ 3` forces `p > n/2`. Both comparisons are strict and
/// done without division, so boundary cases are decided exactly.
pub fn coulomb_membership(n: usize, s: f64, p: f64) -> bool {
    let n = n as f64;
    let integrable = s * p < n;
    let index_ok = n < 3.0 || 2.0 * p > n;
    integrable && index_ok
}

/// Window `n/2 < p < 3` for which a Coulomb singularity (codimension 3)
/// is locally `L^p` and the index is admissible; empty once `n ≥ 6`.
pub fn coulomb_feasible_window(n: usize) -> Option<OpenInterval> {
    let lower = n as f64 / 2.0;
    (lower < 3.0).then_some(OpenInterval { lower, upper: 3.0 })
}
