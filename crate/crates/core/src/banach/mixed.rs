//! Discrete space-time norms `‖φ‖_{q,θ}` on sampled trajectories and
//! potentials, plus threshold-scan upper bounds for the sum-space norms.
//!
//! Space uses the grid quadrature `Σ |φ|^q dxⁿ`; time uses left-endpoint
//! Riemann sums over the samples `t_0..t_{steps-1}`. An infinite exponent
//! becomes a maximum over samples (every time sample for `θ = ∞`).

use rayon::prelude::*;

use super::exponents::ExponentFamily;
use super::t_star;
use crate::error::{invalid, Result};
use crate::propagation::{SampledPotential, Trajectory};
use crate::spectral::TimeGrid;

/// `(Σ |f|^q w)^{1/q}`, or `max |f|` for `q = ∞`; rescaled by the maximum
/// so large exponents do not overflow.
fn lebesgue(values: impl Iterator<Item = f64> + Clone, q: f64, weight: f64) -> f64 {
    let peak = values.clone().fold(0.0, f64::max);
    if q.is_infinite() || peak == 0.0 {
        return peak;
    }
    let sum: f64 = values.map(|v| (v / peak).powf(q)).sum();
    peak * (sum * weight).powf(1.0 / q)
}

fn time_norm(spatial: &[f64], time: TimeGrid, theta: f64) -> f64 {
    if theta.is_infinite() {
        spatial.iter().copied().fold(0.0, f64::max)
    } else {
        lebesgue(spatial[..time.steps()].iter().copied(), theta, time.dt())
    }
}

fn check_exponents(q: f64, theta: f64) -> Result<()> {
    if q.is_nan() || theta.is_nan() || q < 1.0 || theta < 1.0 {
        return Err(invalid(format!("mixed norm needs q, θ ≥ 1, got q={q}, θ={theta}")));
    }
    Ok(())
}

/// `‖φ‖_{q,θ} = (∫ (∫ |φ|^q dx)^{θ/q} dt)^{1/θ}` on the samples.
pub fn mixed_norm(traj: &Trajectory, q: f64, theta: f64) -> Result<f64> {
    check_exponents(q, theta)?;
    let dv = traj.grid().cell_volume();
    let spatial: Vec<f64> = traj
        .states()
        .iter()
        .map(|s| lebesgue(s.amplitudes().iter().map(|z| z.norm()), q, dv))
        .collect();
    Ok(time_norm(&spatial, traj.time(), theta))
}

/// [`mixed_norm`] for a real sampled field.
pub fn potential_mixed_norm(pot: &SampledPotential, p: f64, alpha: f64) -> Result<f64> {
    check_exponents(p, alpha)?;
    let dv = pot.grid().cell_volume();
    let spatial: Vec<f64> = (0..pot.time().samples())
        .map(|j| lebesgue(pot.slice(j).iter().map(|v| v.abs()), p, dv))
        .collect();
    Ok(time_norm(&spatial, pot.time(), alpha))
}

/// `‖φ‖_X = ‖φ‖_{2,∞} + ‖φ‖_{q,θ}`.
pub fn x_norm(traj: &Trajectory, family: &ExponentFamily) -> Result<f64> {
    Ok(mixed_norm(traj, 2.0, f64::INFINITY)? + mixed_norm(traj, family.q().value(), family.theta().value())?)
}

/// Upper bound on a sum-space norm together with the splitting that attains it.
#[derive(Clone, Debug, PartialEq)]
pub struct NormReport {
    pub value: f64,
    /// Clamp level `c` of the best splitting `v₂ = clamp(v, −c, c)`.
    pub threshold: f64,
    /// `‖v − v₂‖_{p,α}`.
    pub singular_part: f64,
    /// `‖v₂‖_{∞,β}`.
    pub bounded_part: f64,
    /// `(c, ‖v₁‖ + ‖v₂‖)` for every scanned threshold.
    pub scan: Vec<(f64, f64)>,
}

/// Splits `v` at clamp level `c` into `(v − clamp(v), clamp(v))`.
pub fn split_at_threshold(pot: &SampledPotential, c: f64) -> (SampledPotential, SampledPotential) {
    let bounded: Vec<f64> = pot.values().iter().map(|v| v.clamp(-c, c)).collect();
    let singular: Vec<f64> = pot.values().iter().zip(&bounded).map(|(v, b)| v - b).collect();
    let make = |values| SampledPotential::new(pot.grid().clone(), pot.time(), values).expect("same shape");
    (make(singular), make(bounded))
}

/// Evenly spaced clamp levels `c_i = i·max|v|/count`, `i = 0..=count`.
/// Doubling `count` refines the scan, so its minimum can only decrease.
pub fn default_thresholds(pot: &SampledPotential, count: usize) -> Vec<f64> {
    let peak = pot.max_abs();
    let count = count.max(1);
    (0..=count).map(|i| peak * i as f64 / count as f64).collect()
}

/// `min_c ‖v − v₂‖_{p,α} + ‖v₂‖_{∞,β}` over the given clamp levels, an
/// upper bound on `‖v‖_V = inf{‖v₁‖_{p,α} + ‖v₂‖_{∞,β}}`.
pub fn v_norm_upper(pot: &SampledPotential, family: &ExponentFamily, thresholds: &[f64]) -> Result<NormReport> {
    if thresholds.is_empty() {
        return Err(invalid("threshold list is empty"));
    }
    if thresholds.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(invalid("thresholds must be finite and nonnegative"));
    }
    let (p, alpha, beta) = (family.p().value(), family.alpha().value(), family.beta().value());
    let evaluated: Vec<(f64, f64, f64)> = thresholds
        .par_iter()
        .map(|&c| {
            let (v1, v2) = split_at_threshold(pot, c);
            let singular = potential_mixed_norm(&v1, p, alpha)?;
            let bounded = potential_mixed_norm(&v2, f64::INFINITY, beta)?;
            Ok((c, singular, bounded))
        })
        .collect::<Result<_>>()?;
    let best = evaluated
        .iter()
        .min_by(|a, b| (a.1 + a.2).total_cmp(&(b.1 + b.2)))
        .expect("nonempty");
    Ok(NormReport {
        value: best.1 + best.2,
        threshold: best.0,
        singular_part: best.1,
        bounded_part: best.2,
        scan: evaluated.iter().map(|(c, s, b)| (*c, s + b)).collect(),
    })
}

/// Upper bound on `‖vφ‖_{X'}` from the splitting at clamp level `c`:
/// `‖v₁φ‖_{q',θ'} + ‖v₂φ‖_{2,1}`.
pub fn multiplier_dual_bound(
    pot: &SampledPotential,
    traj: &Trajectory,
    family: &ExponentFamily,
    threshold: f64,
) -> Result<f64> {
    pot.check_state(traj.state(0))?;
    let (v1, v2) = split_at_threshold(pot, threshold);
    let product = |v: &SampledPotential| -> Result<Trajectory> {
        let states = traj
            .states()
            .iter()
            .enumerate()
            .map(|(j, s)| crate::spectral::apply_potential(v.slice(j), s))
            .collect::<Result<Vec<_>>>()?;
        Trajectory::new(traj.time(), states)
    };
    Ok(mixed_norm(&product(&v1)?, family.q_dual().value(), family.theta_dual().value())?
        + mixed_norm(&product(&v2)?, 2.0, 1.0)?)
}

/// Right side `T*·‖v‖_V·‖φ‖_X` of the multiplication-operator bound.
pub fn multiplier_bound_rhs(horizon: f64, family: &ExponentFamily, v_norm: f64, phi_x_norm: f64) -> Result<f64> {
    Ok(t_star(horizon, family)? * v_norm * phi_x_norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::banach::{derive_family, Exponent};
    use crate::spectral::{Grid, StateVector};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_traj(grid: &Grid, time: TimeGrid, seed: u64) -> Trajectory {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let states = (0..time.samples())
            .map(|_| {
                let amps = (0..grid.len())
                    .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect();
                StateVector::new(grid.clone(), amps).unwrap()
            })
            .collect();
        Trajectory::new(time, states).unwrap()
    }

    fn naive_mixed(traj: &Trajectory, q: f64, theta: f64) -> f64 {
        let dx = traj.grid().cell_volume();
        let dt = traj.time().dt();
        let mut per_time = Vec::new();
        for s in traj.states() {
            let mut acc = 0.0;
            let mut peak: f64 = 0.0;
            for z in s.amplitudes() {
                let a = (z.re * z.re + z.im * z.im).sqrt();
                acc += a.powf(q) * dx;
                peak = peak.max(a);
            }
            per_time.push(if q.is_infinite() { peak } else { acc.powf(1.0 / q) });
        }
        if theta.is_infinite() {
            per_time.iter().cloned().fold(0.0, f64::max)
        } else {
            let mut acc = 0.0;
            for j in 0..traj.time().steps() {
                acc += per_time[j].powf(theta) * dt;
            }
            acc.powf(1.0 / theta)
        }
    }

    #[test]
    fn mixed_norm_matches_naive_double_loop() {
        let grid = Grid::new(1, 16, 5.0).unwrap();
        let time = TimeGrid::new(0.8, 7).unwrap();
        let traj = random_traj(&grid, time, 11);
        for &(q, theta) in &[(2.0, f64::INFINITY), (6.0, 6.0), (4.0, 8.0 / 3.0), (f64::INFINITY, 3.0), (2.0, 1.0)] {
            let fast = mixed_norm(&traj, q, theta).unwrap();
            let slow = naive_mixed(&traj, q, theta);
            assert!((fast - slow).abs() <= 1e-12 * slow, "q={q} θ={theta}: {fast} vs {slow}");
        }
        assert!(mixed_norm(&traj, 0.5, 2.0).is_err());
    }

    #[test]
    fn zero_and_time_constant_trajectories() {
        let grid = Grid::new(1, 32, 8.0).unwrap();
        let time = TimeGrid::new(1.5, 10).unwrap();
        assert_eq!(mixed_norm(&Trajectory::zeros(&grid, time), 6.0, 6.0).unwrap(), 0.0);

        let f = StateVector::gaussian(&grid, 0.7, [0.3, 0.0], [0.0; 2]).unwrap();
        let traj = Trajectory::new(time, vec![f.clone(); time.samples()]).unwrap();
        let single = Trajectory::new(TimeGrid::new(1.0, 1).unwrap(), vec![f.clone(); 2]).unwrap();
        let f_q = mixed_norm(&single, 6.0, f64::INFINITY).unwrap();
        let m = mixed_norm(&traj, 6.0, 4.0).unwrap();
        assert!((m - 1.5f64.powf(0.25) * f_q).abs() < 1e-12 * m);

        let fam = derive_family(1, Exponent::integer(6), Exponent::integer(2), Exponent::integer(2)).unwrap();
        let x = x_norm(&traj, &fam).unwrap();
        let expected = f.l2_norm() + 1.5f64.powf(1.0 / 6.0) * f_q;
        assert!((x - expected).abs() < 1e-12 * expected);
        assert_eq!(x_norm(&Trajectory::zeros(&grid, time), &fam).unwrap(), 0.0);
    }

    #[test]
    fn v_norm_bounded_and_zero() {
        let grid = Grid::new(1, 32, 8.0).unwrap();
        let time = TimeGrid::new(1.0, 8).unwrap();
        let fam = derive_family(1, Exponent::integer(6), Exponent::integer(2), Exponent::integer(2)).unwrap();
        let v = SampledPotential::from_fn(&grid, time, |t, x| 0.5 * (x[0] + t).sin()).unwrap();
        let report = v_norm_upper(&v, &fam, &[0.1, 0.6]).unwrap();
        let sup = potential_mixed_norm(&v, f64::INFINITY, 2.0).unwrap();
        // with c = 0.6 ≥ max|v| the whole field is in the bounded part
        let at_big = report.scan.iter().find(|(c, _)| *c == 0.6).unwrap().1;
        assert!((at_big - sup).abs() < 1e-15);
        assert!(report.value <= at_big);

        let zero = SampledPotential::zeros(&grid, time);
        assert_eq!(v_norm_upper(&zero, &fam, &[0.0, 1.0]).unwrap().value, 0.0);
        assert!(v_norm_upper(&zero, &fam, &[]).is_err());
    }

    #[test]
    fn singular_potential_scan_refinement() {
        let grid = Grid::new(1, 256, 20.0).unwrap();
        let time = TimeGrid::new(1.0, 4).unwrap();
        let fam = derive_family(1, Exponent::integer(6), Exponent::integer(2), Exponent::integer(2)).unwrap();
        let v = SampledPotential::from_fn(&grid, time, |_, x| -(x[0].abs().powf(-0.5)).min(1e3) - 10.0).unwrap();
        let coarse = v_norm_upper(&v, &fam, &default_thresholds(&v, 8)).unwrap();
        let fine = v_norm_upper(&v, &fam, &default_thresholds(&v, 64)).unwrap();
        assert!(fine.value <= coarse.value);
        for (_, value) in &coarse.scan {
            assert!(coarse.value <= *value);
        }
        // with a constant background an interior splitting beats both pure parts
        let first = coarse.scan.first().unwrap().1;
        let last = coarse.scan.last().unwrap().1;
        assert!(fine.value < first.min(last));
    }

    proptest! {
        #[test]
        fn homogeneity_and_triangle(seed in 0u64..500, c in -3.0f64..3.0, q in 2.0f64..10.0, theta in 2.1f64..10.0) {
            let grid = Grid::new(1, 8, 3.0).unwrap();
            let time = TimeGrid::new(0.5, 5).unwrap();
            let a = random_traj(&grid, time, seed);
            let b = random_traj(&grid, time, seed + 1000);
            let na = mixed_norm(&a, q, theta).unwrap();
            let scaled = mixed_norm(&a.scaled(Complex64::new(c, 0.0)), q, theta).unwrap();
            prop_assert!((scaled - c.abs() * na).abs() <= 1e-12 * na.max(1e-300) * c.abs().max(1.0));
            let sum = a.plus_scaled(Complex64::new(1.0, 0.0), &b).unwrap();
            let nb = mixed_norm(&b, q, theta).unwrap();
            prop_assert!(mixed_norm(&sum, q, theta).unwrap() <= na + nb + 1e-10);
        }

        #[test]
        fn multiplier_bound_holds(seed in 0u64..200, amp in 0.1f64..50.0, qi in 0usize..3) {
            let q = [2i64, 4, 6][qi];
            let fam = derive_family(1, Exponent::integer(q), Exponent::integer(2), Exponent::integer(2)).unwrap();
            let grid = Grid::new(1, 16, 4.0).unwrap();
            let time = TimeGrid::new(0.7, 6).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values = (0..grid.len() * time.samples()).map(|_| amp * rng.random_range(-1.0..1.0f64).powi(3)).collect();
            let v = SampledPotential::new(grid.clone(), time, values).unwrap();
            let phi = random_traj(&grid, time, seed + 7);
            let report = v_norm_upper(&v, &fam, &default_thresholds(&v, 16)).unwrap();
            let lhs = multiplier_dual_bound(&v, &phi, &fam, report.threshold).unwrap();
            let rhs = multiplier_bound_rhs(time.horizon(), &fam, report.value, x_norm(&phi, &fam).unwrap()).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12), "lhs={} rhs={}", lhs, rhs);
        }
    }
}
