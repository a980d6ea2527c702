//! Exponent bookkeeping for the trajectory space `X`, its dual `X'` and the
//! potential space `V`; discrete mixed Lebesgue norms; the `T*` factor; and
//! the Coulomb membership analysis.

mod coulomb;
mod exponents;
mod mixed;

pub use coulomb::{coulomb_feasible_window, coulomb_membership, OpenInterval};
pub use exponents::{check_admissible, derive_family, t_star, Exponent, ExponentFamily};
pub use mixed::{
    default_thresholds, mixed_norm, multiplier_bound_rhs, multiplier_dual_bound, potential_mixed_norm,
    split_at_threshold, v_norm_upper, x_norm, NormReport,
};
