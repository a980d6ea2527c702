//! Empirical calibration constants, the subinterval partition for the
//! continuation argument, and harnesses that evaluate both sides of the
//! derivative and trajectory-difference bounds.
//!
//! Constants are maxima over seeded ensembles, hence lower bounds on the
//! true constants; bound checks built on them are consistency checks.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::banach::{default_thresholds, mixed_norm, t_star, v_norm_upper, x_norm, ExponentFamily};
use crate::error::{invalid, Error, Result};
use crate::propagation::{equal_windows, q_v_apply, solve_mild, PicardConfig, SampledPotential, Trajectory};
use crate::response::{delta_psi_from, gateaux_fd_from};
use crate::spectral::{Grid, StateVector, TimeGrid};

/// Thresholds scanned when the potential-space norm enters a constant.
const SCAN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstantKind {
    C0,
    CQ,
    Cv,
}

impl fmt::Display for ConstantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::C0 => "C0",
            Self::CQ => "CQ",
            Self::Cv => "Cv",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstantEstimate {
    pub kind: ConstantKind,
    pub value: f64,
    pub ensemble_size: usize,
    /// Label of the member attaining the maximum.
    pub witness: String,
}

/// Seeded generator of test states.
///
/// Members cycle through Gaussian packets (random width, centre, momentum),
/// plane-wave superpositions and random-phase band-limited fields. Member 0
/// is always the centred unit-width Gaussian. All members come from one
/// sequential stream, so the first `k` of `count` do not depend on `count`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StateEnsemble {
    pub seed: u64,
}

impl StateEnsemble {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn generate(&self, grid: &Grid, count: usize) -> Result<Vec<(String, StateVector)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let l = grid.box_length();
        let k = grid.axis_wavenumbers();
        let k_max = k.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let dims = grid.n_dim();
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            let member = if i == 0 {
                ("gaussian-0".to_string(), StateVector::gaussian(grid, 1.0, [0.0; 2], [0.0; 2])?)
            } else {
                match i % 3 {
                    1 => {
                        let sigma = l * rng.random_range(0.02..0.12);
                        let mut center = [0.0; 2];
                        let mut momentum = [0.0; 2];
                        for d in 0..dims {
                            center[d] = l * rng.random_range(-0.15..0.15);
                            momentum[d] = k_max * rng.random_range(-0.15..0.15);
                        }
                        (format!("gaussian-{i}"), StateVector::gaussian(grid, sigma, center, momentum)?)
                    }
                    2 => {
                        let modes = rng.random_range(2..6usize);
                        let base = 2.0 * std::f64::consts::PI / l;
                        let terms: Vec<([f64; 2], Complex64)> = (0..modes)
                            .map(|_| {
                                let mut kv = [0.0; 2];
                                for item in kv.iter_mut().take(dims) {
                                    *item = base * rng.random_range(-6i32..=6) as f64;
                                }
                                let amp = Complex64::from_polar(
                                    rng.random_range(0.2..1.0),
                                    rng.random_range(0.0..std::f64::consts::TAU),
                                );
                                (kv, amp)
                            })
                            .collect();
                        let state = StateVector::from_fn(grid, |x| {
                            terms
                                .iter()
                                .map(|(kv, a)| a * Complex64::from_polar(1.0, kv[0] * x[0] + kv[1] * x[1]))
                                .sum()
                        })?;
                        (format!("planewaves-{i}"), state)
                    }
                    _ => {
                        let cutoff = k_max * rng.random_range(0.1..0.4);
                        let width = cutoff / 2.0;
                        let mut spectrum: Vec<Complex64> = grid
                            .k_squared()
                            .iter()
                            .map(|k2| {
                                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                                if k2.sqrt() <= cutoff {
                                    Complex64::from_polar((-k2 / (2.0 * width * width)).exp(), phase)
                                } else {
                                    Complex64::new(0.0, 0.0)
                                }
                            })
                            .collect();
                        grid.inverse(&mut spectrum);
                        (format!("random-phase-{i}"), StateVector::new(grid.clone(), spectrum)?)
                    }
                }
            };
            out.push(member);
        }
        Ok(out)
    }
}

/// Seeded generator of bounded, smooth, nonzero potentials: a few random
/// cosine modes with a random linear ramp in time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialEnsemble {
    pub seed: u64,
    pub amplitude: f64,
}

impl PotentialEnsemble {
    pub fn new(seed: u64, amplitude: f64) -> Self {
        Self { seed, amplitude }
    }

    pub fn generate(&self, grid: &Grid, time: TimeGrid, count: usize) -> Result<Vec<(String, SampledPotential)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let base = 2.0 * std::f64::consts::PI / grid.box_length();
        let dims = grid.n_dim();
        let horizon = time.horizon();
        (0..count)
            .map(|i| {
                let modes: Vec<(f64, [f64; 2], f64)> = (0..3)
                    .map(|_| {
                        let mut kv = [0.0; 2];
                        for item in kv.iter_mut().take(dims) {
                            *item = base * rng.random_range(0i32..=4) as f64;
                        }
                        (rng.random_range(0.2..1.0), kv, rng.random_range(0.0..std::f64::consts::TAU))
                    })
                    .collect();
                let ramp = rng.random_range(-1.0..1.0);
                let amp = self.amplitude;
                let pot = SampledPotential::from_fn(grid, time, |t, x| {
                    let profile: f64 = modes
                        .iter()
                        .map(|(a, kv, ph)| a * (kv[0] * x[0] + kv[1] * x[1] + ph).cos())
                        .sum();
                    amp * profile * (1.0 + ramp * t / horizon) / 3.0
                })?;
                Ok((format!("potential-{i}"), pot))
            })
            .collect()
    }
}

fn maximize(kind: ConstantKind, ratios: Vec<(String, f64)>) -> Result<ConstantEstimate> {
    let ensemble_size = ratios.len();
    // earliest member wins ties so the witness is reproducible
    let (witness, value) = ratios
        .into_iter()
        .fold(None::<(String, f64)>, |best, (label, r)| match best {
            Some((_, b)) if b >= r => best,
            _ => Some((label, r)),
        })
        .ok_or_else(|| invalid(format!("{kind} needs a nonempty ensemble")))?;
    if !(value.is_finite() && value > 0.0) {
        return Err(invalid(format!("{kind} estimate {value} is not positive and finite")));
    }
    Ok(ConstantEstimate {
        kind,
        value,
        ensemble_size,
        witness,
    })
}

/// `max ‖U₀ψ₀‖_{q,θ}/‖ψ₀‖₂` over explicit states.
pub fn estimate_c0_over(family: &ExponentFamily, time: TimeGrid, states: &[(String, StateVector)]) -> Result<ConstantEstimate> {
    let ratios = states
        .par_iter()
        .map(|(label, state)| {
            let norm = state.l2_norm();
            if norm == 0.0 {
                return Err(invalid(format!("ensemble member {label} is zero")));
            }
            let traj = Trajectory::free(state, time)?;
            let value = mixed_norm(&traj, family.q().value(), family.theta().value())?;
            Ok((label.clone(), value / norm))
        })
        .collect::<Result<Vec<_>>>()?;
    maximize(ConstantKind::C0, ratios)
}

pub fn estimate_c0(
    family: &ExponentFamily,
    grid: &Grid,
    time: TimeGrid,
    ensemble: &StateEnsemble,
    count: usize,
) -> Result<ConstantEstimate> {
    if count == 0 {
        return Err(invalid("C0 needs a nonempty ensemble"));
    }
    estimate_c0_over(family, time, &ensemble.generate(grid, count)?)
}

/// `max ‖Q_vφ‖_X / (T*·‖v‖_V·‖φ‖_X)` over all potential/state pairs, with
/// `φ = U₀ψ` and `‖v‖_V` from the threshold scan.
pub fn estimate_cq(
    family: &ExponentFamily,
    grid: &Grid,
    time: TimeGrid,
    potentials: &[(String, SampledPotential)],
    states: &[(String, StateVector)],
) -> Result<ConstantEstimate> {
    if potentials.is_empty() || states.is_empty() {
        return Err(invalid("CQ needs nonempty potential and state ensembles"));
    }
    let t_star = t_star(time.horizon(), family)?;
    let v_norms = potentials
        .iter()
        .map(|(label, v)| {
            if v.grid() != grid || v.time() != time {
                return Err(Error::GridMismatch(format!("potential {label} is not on the requested grids")));
            }
            let norm = v_norm_upper(v, family, &default_thresholds(v, SCAN))?.value;
            if norm == 0.0 {
                return Err(invalid(format!("potential {label} has zero norm")));
            }
            Ok(norm)
        })
        .collect::<Result<Vec<_>>>()?;
    let phis = states
        .iter()
        .map(|(label, s)| {
            let phi = Trajectory::free(s, time)?;
            let norm = x_norm(&phi, family)?;
            if norm == 0.0 {
                return Err(invalid(format!("state {label} has zero norm")));
            }
            Ok((phi, norm))
        })
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(usize, usize)> = (0..potentials.len())
        .flat_map(|i| (0..states.len()).map(move |j| (i, j)))
        .collect();
    let ratios = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (phi, phi_norm) = &phis[j];
            let image = x_norm(&q_v_apply(&potentials[i].1, phi)?, family)?;
            Ok((
                format!("{}×{}", potentials[i].0, states[j].0),
                image / (t_star * v_norms[i] * phi_norm),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    maximize(ConstantKind::CQ, ratios)
}

/// Equal partition of the horizon for the continuation argument.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub count: usize,
    /// Inclusive sample ranges `(start, end)`.
    pub windows: Vec<(usize, usize)>,
    /// `c_q·|I_m|*·‖v‖_{V|I_m}` per window.
    pub conditions: Vec<f64>,
    /// False only if even single-step windows violate the condition.
    pub satisfied: bool,
}

/// `c_q·|I|*·‖v‖_{V|I}` on the inclusive window `(a, b)`.
pub fn window_condition(v: &SampledPotential, family: &ExponentFamily, c_q: f64, (a, b): (usize, usize)) -> Result<f64> {
    let local = v.window(a, b)?;
    let tau = t_star(local.time().horizon(), family)?;
    if local.is_zero() {
        return Ok(0.0);
    }
    let norm = v_norm_upper(&local, family, &default_thresholds(&local, SCAN))?.value;
    Ok(c_q * tau * norm)
}

/// Smallest `M` such that every one of `M` equal subintervals satisfies
/// `c_q·|I_m|*·‖v‖_{V|I_m} ≤ 1/2`. The horizon is that of `v`'s time grid;
/// windows are whole time samples, so `M` is capped at the step count.
pub fn partition_interval(v: &SampledPotential, family: &ExponentFamily, c_q: f64) -> Result<Partition> {
    if !(c_q.is_finite() && c_q > 0.0) {
        return Err(invalid(format!("c_q must be positive, got {c_q}")));
    }
    let steps = v.time().steps();
    for m in 1..=steps {
        let windows = equal_windows(steps, m);
        let mut conditions = Vec::with_capacity(m);
        let mut ok = true;
        for w in &windows {
            let c = window_condition(v, family, c_q, *w)?;
            conditions.push(c);
            if c > 0.5 {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(Partition {
                count: m,
                windows,
                conditions,
                satisfied: true,
            });
        }
    }
    let windows = equal_windows(steps, steps);
    let conditions = windows
        .iter()
        .map(|w| window_condition(v, family, c_q, *w))
        .collect::<Result<Vec<_>>>()?;
    log::warn!("partition: condition fails even on single time steps; using M = {steps}");
    Ok(Partition {
        count: steps,
        windows,
        conditions,
        satisfied: false,
    })
}

/// `C_v = 2·M^{1/θ}·(1 + C₀)`; `theta` may be `+∞`.
pub fn compute_cv(m: usize, theta: f64, c0: f64) -> Result<f64> {
    if m == 0 || !(theta > 2.0) || !(c0.is_finite() && c0 > 0.0) {
        return Err(invalid(format!("compute_cv needs M ≥ 1, θ > 2, C0 > 0; got {m}, {theta}, {c0}")));
    }
    Ok(2.0 * (m as f64).powf(1.0 / theta) * (1.0 + c0))
}

/// Calibration constants fed to the bound harnesses.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EmpiricalConstants {
    pub c0: Option<f64>,
    pub c_q: Option<f64>,
}

impl EmpiricalConstants {
    pub fn new(c0: f64, c_q: f64) -> Self {
        Self {
            c0: Some(c0),
            c_q: Some(c_q),
        }
    }

    fn require(&self) -> Result<(f64, f64)> {
        let c0 = self.c0.ok_or_else(|| Error::MissingConstant("C0".into()))?;
        let c_q = self.c_q.ok_or_else(|| Error::MissingConstant("CQ".into()))?;
        for (name, c) in [("C0", c0), ("CQ", c_q)] {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::MissingConstant(format!("{name} = {c} is not a positive estimate")));
            }
        }
        Ok((c0, c_q))
    }
}

/// Quantities entering the right-hand side of a bound.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundMeta {
    pub t_star: f64,
    pub w_norm: f64,
    pub initial_norm: f64,
    /// `(1 + C_v)²`, maximized over the sampled `λ` for the difference bound.
    pub prefactor: f64,
    /// `(λ, M, C_v)` for each sampled coupling.
    pub samples: Vec<(f64, usize, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    pub slack: f64,
    pub meta: BoundMeta,
}

impl BoundReport {
    fn new(lhs: f64, rhs: f64, meta: BoundMeta) -> Self {
        Self {
            lhs,
            rhs,
            satisfied: lhs <= rhs,
            slack: rhs - lhs,
            meta,
        }
    }
}

fn cv_sample(v: &SampledPotential, family: &ExponentFamily, c0: f64, c_q: f64, lambda: f64) -> Result<(f64, usize, f64)> {
    let m = partition_interval(v, family, c_q)?.count;
    Ok((lambda, m, compute_cv(m, family.theta().value(), c0)?))
}

fn rhs_parts(
    w: &SampledPotential,
    family: &ExponentFamily,
    initial: &StateVector,
) -> Result<(f64, f64, f64)> {
    let ts = t_star(w.time().horizon(), family)?;
    let w_norm = if w.is_zero() {
        0.0
    } else {
        v_norm_upper(w, family, &default_thresholds(w, SCAN))?.value
    };
    Ok((ts, w_norm, initial.l2_norm()))
}

/// Both sides of `‖δψ[v;w]‖_{2,∞} ≤ (1+C_v)²·T*·‖w‖_V·‖ψ₀‖₂`.
pub fn verify_frechet_bound(
    v: &SampledPotential,
    w: &SampledPotential,
    initial: &StateVector,
    family: &ExponentFamily,
    constants: &EmpiricalConstants,
    cfg: &PicardConfig,
) -> Result<BoundReport> {
    let (c0, c_q) = constants.require()?;
    v.check_compatible(w)?;
    let base = solve_mild(v, initial, cfg)?.trajectory;
    let lhs = delta_psi_from(v, w, &base, cfg)?.sup_l2();
    let sample = cv_sample(v, family, c0, c_q, 0.0)?;
    let prefactor = (1.0 + sample.2).powi(2);
    let (t_star, w_norm, initial_norm) = rhs_parts(w, family, initial)?;
    let rhs = prefactor * t_star * w_norm * initial_norm;
    Ok(BoundReport::new(
        lhs,
        rhs,
        BoundMeta {
            t_star,
            w_norm,
            initial_norm,
            prefactor,
            samples: vec![sample],
        },
    ))
}

/// Couplings at which `C_{v+λw}` is sampled for the difference bound.
pub const DIFFERENCE_LAMBDAS: [f64; 3] = [0.0, 0.5, 1.0];

/// Both sides of `‖ψ[v+w] − ψ[v]‖_{2,∞} ≤ C·T*·‖w‖_V·‖ψ₀‖₂` with
/// `C = max_λ (1 + C_{v+λw})²` over [`DIFFERENCE_LAMBDAS`].
pub fn verify_difference_bound(
    v: &SampledPotential,
    w: &SampledPotential,
    initial: &StateVector,
    family: &ExponentFamily,
    constants: &EmpiricalConstants,
    cfg: &PicardConfig,
) -> Result<BoundReport> {
    let (c0, c_q) = constants.require()?;
    v.check_compatible(w)?;
    let base = solve_mild(v, initial, cfg)?.trajectory;
    let shifted = solve_mild(&v.plus_scaled(1.0, w)?, initial, cfg)?.trajectory;
    let lhs = shifted.difference(&base)?.sup_l2();
    let samples = DIFFERENCE_LAMBDAS
        .iter()
        .map(|&lambda| cv_sample(&v.plus_scaled(lambda, w)?, family, c0, c_q, lambda))
        .collect::<Result<Vec<_>>>()?;
    log::info!("difference bound: C_v sampled at λ ∈ {DIFFERENCE_LAMBDAS:?}");
    let prefactor = samples.iter().map(|s| (1.0 + s.2).powi(2)).fold(0.0, f64::max);
    let (t_star, w_norm, initial_norm) = rhs_parts(w, family, initial)?;
    let rhs = prefactor * t_star * w_norm * initial_norm;
    Ok(BoundReport::new(
        lhs,
        rhs,
        BoundMeta {
            t_star,
            w_norm,
            initial_norm,
            prefactor,
            samples,
        },
    ))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub lambda: f64,
    /// `‖gateaux_fd(λ) − δψ‖_{2,∞}`.
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SlopeFit {
    /// Least-squares slope of `log residual` against `log |λ|`.
    Slope { slope: f64, intercept: f64, points: usize },
    /// Fewer than two residuals above the floating-point floor.
    Saturated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    pub derivative_norm: f64,
    /// Residuals at or below this are treated as round-off.
    pub floor: f64,
    pub fit: SlopeFit,
}

fn least_squares(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// First-order vanishing of the Gâteaux remainder: residual table and fitted
/// slope in log–log coordinates. `lambdas` must span at least 3 decades.
pub fn convergence_study(
    v: &SampledPotential,
    w: &SampledPotential,
    initial: &StateVector,
    lambdas: &[f64],
    cfg: &PicardConfig,
) -> Result<ConvergenceStudy> {
    v.check_compatible(w)?;
    let mags: Vec<f64> = lambdas.iter().map(|l| l.abs()).collect();
    if mags.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
        return Err(invalid("λ values must be finite and nonzero"));
    }
    let lo = mags.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = mags.iter().cloned().fold(0.0, f64::max);
    if (hi / lo).log10() < 3.0 - 1e-9 {
        return Err(invalid(format!("λ list spans {:.2} decades, need at least 3", (hi / lo).log10())));
    }
    let base = solve_mild(v, initial, cfg)?.trajectory;
    let derivative = delta_psi_from(v, w, &base, cfg)?;
    let rows = lambdas
        .iter()
        .map(|&lambda| {
            let fd = gateaux_fd_from(v, w, initial, &base, lambda, cfg)?;
            Ok(ConvergenceRow {
                lambda,
                residual: fd.difference(&derivative)?.sup_l2(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let derivative_norm = derivative.sup_l2();
    let floor = 1e-12 * derivative_norm.max(initial.l2_norm());
    let usable: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.residual > floor)
        .map(|r| (r.lambda.abs().ln(), r.residual.ln()))
        .collect();
    let fit = if usable.len() < 2 {
        SlopeFit::Saturated
    } else {
        let (slope, intercept) = least_squares(&usable);
        SlopeFit::Slope {
            slope,
            intercept,
            points: usable.len(),
        }
    };
    Ok(ConvergenceStudy {
        rows,
        derivative_norm,
        floor,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::banach::{derive_family, Exponent};

    fn family() -> ExponentFamily {
        derive_family(1, Exponent::integer(4), Exponent::integer(2), Exponent::integer(2)).unwrap()
    }

    fn pulse(grid: &Grid, time: TimeGrid, amp: f64) -> SampledPotential {
        SampledPotential::from_fn(grid, time, |t, x| amp * (-(x[0] * x[0])).exp() * (-(t - 0.5).powi(2) * 8.0).exp()).unwrap()
    }

    #[test]
    fn compute_cv_examples() {
        assert!((compute_cv(1, 6.0, 1.0).unwrap() - 4.0).abs() < 1e-15);
        assert_eq!(compute_cv(7, f64::INFINITY, 0.5).unwrap(), 3.0);
        assert!((compute_cv(8, 6.0, 1.0).unwrap() - 5.656854249492381).abs() < 1e-12);
        assert!(compute_cv(0, 6.0, 1.0).is_err());
        assert!(compute_cv(1, 2.0, 1.0).is_err());
        assert!(compute_cv(1, 6.0, 0.0).is_err());
    }

    #[test]
    fn ensembles_are_reproducible_and_prefix_stable() {
        let grid = Grid::new(1, 64, 20.0).unwrap();
        let a = StateEnsemble::new(7).generate(&grid, 9).unwrap();
        let b = StateEnsemble::new(7).generate(&grid, 5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.0, y.0);
            assert_eq!(x.1.amplitudes(), y.1.amplitudes());
        }
        let c = StateEnsemble::new(8).generate(&grid, 9).unwrap();
        assert_ne!(a[4].1.amplitudes(), c[4].1.amplitudes());
        assert!(a.iter().all(|(_, s)| s.l2_norm() > 0.0));
    }

    #[test]
    fn c0_examples() {
        let grid = Grid::new(1, 64, 20.0).unwrap();
        let time = TimeGrid::new(1.0, 40).unwrap();
        let fam = family();
        let g = StateVector::gaussian(&grid, 1.0, [0.0; 2], [0.0; 2]).unwrap();
        let one = estimate_c0_over(&fam, time, &[("g".into(), g.clone())]).unwrap();
        assert!(one.value > 0.0 && one.value.is_finite());
        let five = estimate_c0_over(&fam, time, &[("g".into(), g.scaled(Complex64::new(5.0, 0.0)))]).unwrap();
        assert!((one.value - five.value).abs() <= 1e-12 * one.value);
        let ens = StateEnsemble::new(3);
        let mut prev = 0.0;
        for count in [1, 2, 4, 8, 12] {
            let e = estimate_c0(&fam, &grid, time, &ens, count).unwrap();
            assert!(e.value >= prev);
            assert_eq!(e.ensemble_size, count);
            prev = e.value;
        }
        assert!(estimate_c0(&fam, &grid, time, &ens, 0).is_err());
        assert!(estimate_c0_over(&fam, time, &[("z".into(), StateVector::zeros(&grid))]).is_err());
    }

    #[test]
    fn cq_examples() {
        let grid = Grid::new(1, 32, 16.0).unwrap();
        let time = TimeGrid::new(0.5, 20).unwrap();
        let fam = family();
        let pots = PotentialEnsemble::new(1, 2.0).generate(&grid, time, 3).unwrap();
        let states = StateEnsemble::new(2).generate(&grid, 3).unwrap();
        let e = estimate_cq(&fam, &grid, time, &pots, &states).unwrap();
        assert!(e.value > 0.0 && e.value.is_finite());
        assert_eq!(e.ensemble_size, 9);
        let scaled: Vec<_> = pots.iter().map(|(l, p)| (l.clone(), p.scaled(3.0))).collect();
        let e3 = estimate_cq(&fam, &grid, time, &scaled, &states).unwrap();
        assert!((e.value - e3.value).abs() <= 1e-9 * e.value);
        let zero = vec![("zero".to_string(), SampledPotential::zeros(&grid, time))];
        assert!(estimate_cq(&fam, &grid, time, &zero, &states).is_err());
        assert!(estimate_cq(&fam, &grid, time, &[], &states).is_err());
    }

    #[test]
    fn partition_examples() {
        let grid = Grid::new(1, 32, 16.0).unwrap();
        let time = TimeGrid::new(1.0, 64).unwrap();
        let fam = family();
        let zero = partition_interval(&SampledPotential::zeros(&grid, time), &fam, 1.0).unwrap();
        assert_eq!(zero.count, 1);
        assert!(zero.satisfied);
        let v = pulse(&grid, time, 6.0);
        let p = partition_interval(&v, &fam, 1.0).unwrap();
        // brute-force scan, re-evaluating every window
        let oracle = (1..=64)
            .find(|&m| {
                equal_windows(64, m)
                    .into_iter()
                    .all(|w| window_condition(&v, &fam, 1.0, w).unwrap() <= 0.5)
            })
            .unwrap();
        assert_eq!(p.count, oracle);
        assert!(p.count > 1);
        assert!(p.satisfied);
        for w in &p.windows {
            assert!(window_condition(&v, &fam, 1.0, *w).unwrap() <= 0.5);
        }
        let half = partition_interval(&v.scaled(0.5), &fam, 1.0).unwrap();
        assert!(half.count <= p.count);
        assert!(partition_interval(&v, &fam, 0.0).is_err());
    }

    #[test]
    fn bounds_trivial_cases() {
        let grid = Grid::new(1, 32, 16.0).unwrap();
        let time = TimeGrid::new(1.0, 40).unwrap();
        let fam = family();
        let psi = StateVector::gaussian(&grid, 1.0, [0.0; 2], [1.0, 0.0]).unwrap();
        let v = pulse(&grid, time, 1.0);
        let zero = SampledPotential::zeros(&grid, time);
        let consts = EmpiricalConstants::new(1.0, 1.0);
        let cfg = PicardConfig::fixed(1);
        for report in [
            verify_frechet_bound(&v, &zero, &psi, &fam, &consts, &cfg).unwrap(),
            verify_difference_bound(&v, &zero, &psi, &fam, &consts, &cfg).unwrap(),
        ] {
            assert_eq!(report.lhs, 0.0);
            assert_eq!(report.rhs, 0.0);
            assert!(report.satisfied);
        }
        let missing = EmpiricalConstants::default();
        assert!(matches!(
            verify_frechet_bound(&v, &zero, &psi, &fam, &missing, &cfg),
            Err(Error::MissingConstant(_))
        ));
    }

    #[test]
    fn bounds_scale_with_w() {
        let grid = Grid::new(1, 32, 16.0).unwrap();
        let time = TimeGrid::new(1.0, 40).unwrap();
        let fam = family();
        let psi = StateVector::gaussian(&grid, 1.0, [0.0; 2], [1.0, 0.0]).unwrap();
        let v = pulse(&grid, time, 1.0);
        let w = SampledPotential::from_fn(&grid, time, |t, x| 0.3 * (x[0] * 0.4).cos() * (1.0 + t)).unwrap();
        let consts = EmpiricalConstants::new(1.0, 1.0);
        let cfg = PicardConfig::fixed(1);
        let a = verify_frechet_bound(&v, &w, &psi, &fam, &consts, &cfg).unwrap();
        let b = verify_frechet_bound(&v, &w.scaled(2.0), &psi, &fam, &consts, &cfg).unwrap();
        assert!((b.lhs - 2.0 * a.lhs).abs() <= 1e-10 * b.lhs);
        assert!((b.rhs - 2.0 * a.rhs).abs() <= 1e-10 * b.rhs);
        assert!((b.slack - 2.0 * a.slack).abs() <= 1e-9 * b.rhs);
        assert!(a.satisfied);
        let d = verify_difference_bound(&v, &w, &psi, &fam, &consts, &cfg).unwrap();
        assert!(d.lhs <= 2.0 * psi.l2_norm());
        assert!(d.satisfied);
        assert_eq!(d.meta.samples.len(), 3);
    }

    #[test]
    fn convergence_examples() {
        let grid = Grid::new(1, 64, 16.0).unwrap();
        let time = TimeGrid::new(0.5, 500).unwrap();
        let psi = StateVector::gaussian(&grid, 1.0, [0.0; 2], [1.0, 0.0]).unwrap();
        let v = pulse(&grid, time, 1.0);
        let w = SampledPotential::from_fn(&grid, time, |t, x| 0.5 * (-(x[0] - 1.0).powi(2)).exp() * (1.0 + t)).unwrap();
        let cfg = PicardConfig::fixed(1);
        let lambdas = [1e-1, 1e-2, 1e-3, 1e-4];
        let study = convergence_study(&v, &w, &psi, &lambdas, &cfg).unwrap();
        match study.fit {
            SlopeFit::Slope { slope, .. } => assert!((0.9..=1.1).contains(&slope), "slope {slope}"),
            SlopeFit::Saturated => panic!("unexpected saturation"),
        }
        let doubled = convergence_study(&v, &w.scaled(2.0), &psi, &lambdas, &cfg).unwrap();
        if let (SlopeFit::Slope { slope: a, .. }, SlopeFit::Slope { slope: b, .. }) = (study.fit, doubled.fit) {
            assert!((a - b).abs() < 0.05);
        }
        let zero = convergence_study(&v, &SampledPotential::zeros(&grid, time), &psi, &lambdas, &cfg).unwrap();
        assert_eq!(zero.fit, SlopeFit::Saturated);
        assert!(convergence_study(&v, &w, &psi, &[1e-1, 1e-2, 1e-3], &cfg).is_err());
    }
}
