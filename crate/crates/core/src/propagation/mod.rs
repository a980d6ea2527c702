//! Mild Schrödinger dynamics `ψ = U₀ψ₀ + Q_vψ` solved by Picard iteration
//! over whole trajectory pieces, an independent Strang split-step
//! reference, and the evolution system `U([v],t,s)` built on top.

mod fields;

pub use fields::{SampledPotential, Trajectory};

use log::debug;
use num_complex::Complex64;

use crate::banach::ExponentFamily;
use crate::error::{invalid, Error, Result};
use crate::estimates::partition_interval;
use crate::spectral::{free_phases, Grid, StateVector};

const MINUS_I: Complex64 = Complex64 { re: 0.0, im: -1.0 };

/// How `[0,T]` is cut into subintervals before iterating.
#[derive(Clone, Debug, PartialEq)]
pub enum Subintervals {
    /// `count` pieces of (nearly) equal sample length.
    Fixed(usize),
    /// Smallest equal partition with `c_q·|I_m|*·‖v‖_{V|I_m} ≤ 1/2`.
    Automatic { family: ExponentFamily, c_q: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PicardConfig {
    /// Bound on the fixed-point residual in `‖·‖_{2,∞}`, relative to `‖ψ₀‖₂`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub subintervals: Subintervals,
}

impl PicardConfig {
    pub fn new(tolerance: f64, max_iterations: usize, subintervals: Subintervals) -> Result<Self> {
        if !(tolerance.is_finite() && tolerance > 0.0) {
            return Err(invalid(format!("tolerance must be positive, got {tolerance}")));
        }
        if max_iterations == 0 {
            return Err(invalid("max_iterations must be at least 1"));
        }
        if let Subintervals::Fixed(0) = subintervals {
            return Err(invalid("subinterval count must be at least 1"));
        }
        if let Subintervals::Automatic { c_q, .. } = &subintervals {
            if !(c_q.is_finite() && *c_q > 0.0) {
                return Err(invalid(format!("c_q must be positive, got {c_q}")));
            }
        }
        Ok(Self {
            tolerance,
            max_iterations,
            subintervals,
        })
    }

    pub fn fixed(count: usize) -> Self {
        Self::new(1e-13, 500, Subintervals::Fixed(count)).expect("valid defaults")
    }

    pub fn automatic(family: ExponentFamily, c_q: f64) -> Result<Self> {
        Self::new(1e-13, 500, Subintervals::Automatic { family, c_q })
    }
}

/// Per-subinterval record of a Picard run.
#[derive(Clone, Debug, PartialEq)]
pub struct SubintervalReport {
    pub start: usize,
    pub end: usize,
    /// Number of applications of `Φ(φ) = U₀ψ₀ + Q_vφ`, i.e. the effective
    /// Neumann-series truncation.
    pub iterations: usize,
    /// Ratio of the last two successive update norms (0 when one update sufficed).
    pub contraction: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PicardReport {
    pub subintervals: Vec<SubintervalReport>,
}

impl PicardReport {
    pub fn total_iterations(&self) -> usize {
        self.subintervals.iter().map(|s| s.iterations).sum()
    }

    pub fn max_contraction(&self) -> f64 {
        self.subintervals.iter().map(|s| s.contraction).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct MildSolution {
    pub trajectory: Trajectory,
    pub report: PicardReport,
}

/// `-i·Σ_k w_k U₀(t_j − s_k) g_k` for every `j`, with trapezoid weights
/// `w_k` on `[0, t_j]`, accumulated in momentum space in one sweep.
fn duhamel(grid: &Grid, dt: f64, sources: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let phase = free_phases(grid, dt);
    let half = 0.5 * dt;
    let mut out = Vec::with_capacity(sources.len());
    out.push(vec![Complex64::new(0.0, 0.0); grid.len()]);

    let mut acc = sources[0].clone();
    grid.forward(&mut acc);
    acc.iter_mut().for_each(|z| *z *= half);
    for g in &sources[1..] {
        let mut g_hat = g.clone();
        grid.forward(&mut g_hat);
        let mut value = Vec::with_capacity(grid.len());
        for ((a, p), gh) in acc.iter_mut().zip(&phase).zip(&g_hat) {
            *a = *a * p + dt * gh;
            value.push(*a - half * gh);
        }
        grid.inverse(&mut value);
        value.iter_mut().for_each(|z| *z *= MINUS_I);
        out.push(value);
    }
    out
}

fn sources(v: &SampledPotential, states: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    states
        .iter()
        .enumerate()
        .map(|(j, s)| s.iter().zip(v.slice(j)).map(|(z, vv)| z * vv).collect())
        .collect()
}

/// `(Q_vφ)(t) = −i∫₀ᵗ U₀(t−s) v(s) φ(s) ds` by the composite trapezoid rule
/// over the time samples.
pub fn q_v_apply(v: &SampledPotential, phi: &Trajectory) -> Result<Trajectory> {
    v.check_state(phi.state(0))?;
    if v.time() != phi.time() {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", v.time(), phi.time())));
    }
    let amps: Vec<Vec<Complex64>> = phi.states().iter().map(|s| s.amplitudes().to_vec()).collect();
    let out = duhamel(v.grid(), v.time().dt(), &sources(v, &amps));
    let states = out
        .into_iter()
        .map(|a| StateVector::from_parts_unchecked(v.grid().clone(), a))
        .collect();
    Trajectory::new(phi.time(), states)
}

fn sup_diff(a: &[Vec<Complex64>], b: &[Vec<Complex64>], dv: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let s: f64 = x.iter().zip(y).map(|(p, q)| (p - q).norm_sqr()).sum();
            (s * dv).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Picard iteration of `Φ(φ) = U₀ψ_a + Q_vφ` on one window whose potential
/// has already been restricted and re-based.
fn picard_window(
    v: &SampledPotential,
    start: &StateVector,
    tolerance: f64,
    max_iterations: usize,
    label: (usize, usize, usize),
) -> Result<(Vec<Vec<Complex64>>, SubintervalReport)> {
    let grid = v.grid();
    let time = v.time();
    let dv = grid.cell_volume();
    let (index, offset, _) = label;

    let mut start_hat = start.amplitudes().to_vec();
    grid.forward(&mut start_hat);
    let free: Vec<Vec<Complex64>> = time
        .times()
        .into_iter()
        .map(|t| {
            let mut f: Vec<Complex64> = start_hat
                .iter()
                .zip(grid.k_squared())
                .map(|(z, k2)| z * Complex64::from_polar(1.0, -t * k2))
                .collect();
            grid.inverse(&mut f);
            f
        })
        .collect();

    let scale = start.l2_norm();
    let report = |iterations, contraction, residual| SubintervalReport {
        start: offset,
        end: offset + time.steps(),
        iterations,
        contraction,
        residual,
    };
    if scale == 0.0 {
        return Ok((free, report(0, 0.0, 0.0)));
    }

    let mut phi = free.clone();
    let mut first = f64::NAN;
    let mut previous = f64::NAN;
    let mut ratio = 0.0;
    for k in 1..=max_iterations {
        let correction = duhamel(grid, time.dt(), &sources(v, &phi));
        let next: Vec<Vec<Complex64>> = free
            .iter()
            .zip(&correction)
            .map(|(f, c)| f.iter().zip(c).map(|(a, b)| a + b).collect())
            .collect();
        let residual = sup_diff(&next, &phi, dv) / scale;
        phi = next;
        if k > 1 {
            ratio = residual / previous;
        } else {
            first = residual;
        }
        if residual <= tolerance {
            debug!(
                "subinterval {index} [{offset}, {}]: {k} iterations, contraction {ratio:.3e}, residual {residual:.3e}",
                offset + time.steps()
            );
            return Ok((phi, report(k, ratio, residual)));
        }
        if !residual.is_finite() || residual > 1e8 * first.max(1.0) {
            return Err(Error::NonContraction {
                subinterval: index,
                iterations: k,
                factor: ratio,
            });
        }
        previous = residual;
    }
    if ratio >= 1.0 {
        Err(Error::NonContraction {
            subinterval: index,
            iterations: max_iterations,
            factor: ratio,
        })
    } else {
        Err(Error::MaxIterations {
            subinterval: index,
            iterations: max_iterations,
            residual: previous,
        })
    }
}

/// Cuts `steps` into `count` contiguous sample windows whose lengths differ by at most one.
pub fn equal_windows(steps: usize, count: usize) -> Vec<(usize, usize)> {
    let count = count.clamp(1, steps);
    (0..count)
        .map(|m| (m * steps / count, (m + 1) * steps / count))
        .collect()
}

fn run_mild(v: &SampledPotential, initial: &StateVector, cfg: &PicardConfig) -> Result<MildSolution> {
    v.check_state(initial)?;
    let steps = v.time().steps();
    let windows = match &cfg.subintervals {
        Subintervals::Fixed(m) => equal_windows(steps, *m),
        Subintervals::Automatic { family, c_q } => partition_interval(v, family, *c_q)?.windows,
    };

    let grid = v.grid();
    let mut states: Vec<StateVector> = Vec::with_capacity(steps + 1);
    let mut reports = Vec::with_capacity(windows.len());
    let mut current = initial.clone();
    let total = windows.len();
    for (index, &(a, b)) in windows.iter().enumerate() {
        let local = v.window(a, b)?;
        let (piece, report) = picard_window(&local, &current, cfg.tolerance, cfg.max_iterations, (index, a, total))?;
        let skip = usize::from(index > 0);
        states.extend(
            piece
                .into_iter()
                .skip(skip)
                .map(|amps| StateVector::from_parts_unchecked(grid.clone(), amps)),
        );
        current = states.last().expect("nonempty").clone();
        reports.push(report);
    }
    let report = PicardReport { subintervals: reports };
    debug!(
        "mild solve: {} subintervals, {} iterations, max contraction {:.3e}",
        report.subintervals.len(),
        report.total_iterations(),
        report.max_contraction()
    );
    Ok(MildSolution {
        trajectory: Trajectory::new(v.time(), states)?,
        report,
    })
}

/// Solves `ψ = U₀ψ₀ + Q_vψ` by Picard iteration, continuing across
/// subintervals with the last state of each as the next initial value.
pub fn solve_mild(v: &SampledPotential, initial: &StateVector, cfg: &PicardConfig) -> Result<MildSolution> {
    if initial.l2_norm() == 0.0 {
        return Err(invalid("initial state must have positive norm"));
    }
    run_mild(v, initial, cfg)
}

/// Symmetric split-step reference: per step of length `dt`,
/// `e^{-i dt v/2} U₀(dt) e^{-i dt v/2}` with `v` linearly interpolated to
/// the step midpoint. `dt` must divide the time-grid spacing.
pub fn solve_strang(v: &SampledPotential, initial: &StateVector, dt: f64) -> Result<Trajectory> {
    v.check_state(initial)?;
    let time = v.time();
    let ratio = time.dt() / dt;
    let substeps = ratio.round();
    if !(dt.is_finite() && dt > 0.0) || substeps < 1.0 || (ratio - substeps).abs() > 1e-9 * substeps {
        return Err(invalid(format!("step {dt} does not divide the sample spacing {}", time.dt())));
    }
    let substeps = substeps as usize;
    let dt = time.dt() / substeps as f64;
    let grid = v.grid();
    let phase = free_phases(grid, dt);

    let mut psi = initial.amplitudes().to_vec();
    let mut states = Vec::with_capacity(time.samples());
    states.push(initial.clone());
    for j in 0..time.steps() {
        for m in 0..substeps {
            let mid = time.time(j) + (m as f64 + 0.5) * dt;
            let kick: Vec<Complex64> = v
                .at_time(mid)
                .iter()
                .map(|vv| Complex64::from_polar(1.0, -0.5 * dt * vv))
                .collect();
            psi.iter_mut().zip(&kick).for_each(|(z, k)| *z *= k);
            grid.forward(&mut psi);
            psi.iter_mut().zip(&phase).for_each(|(z, p)| *z *= p);
            grid.inverse(&mut psi);
            psi.iter_mut().zip(&kick).for_each(|(z, k)| *z *= k);
        }
        states.push(StateVector::from_parts_unchecked(grid.clone(), psi.clone()));
    }
    Trajectory::new(time, states)
}

/// `U([v],t,s)ψ`: restarts the mild solve at sample time `s` with the
/// time-shifted potential and returns the state at sample time `t ≥ s`.
pub fn evolution(v: &SampledPotential, t: f64, s: f64, state: &StateVector, cfg: &PicardConfig) -> Result<StateVector> {
    let time = v.time();
    let (it, is) = (time.index_of(t)?, time.index_of(s)?);
    evolution_by_index(v, it, is, state, cfg)
}

pub(crate) fn evolution_by_index(
    v: &SampledPotential,
    it: usize,
    is: usize,
    state: &StateVector,
    cfg: &PicardConfig,
) -> Result<StateVector> {
    v.check_state(state)?;
    if it < is {
        return Err(invalid(format!("evolution needs s ≤ t, got sample {is} > {it}")));
    }
    if it == is {
        return Ok(state.clone());
    }
    let local = v.window(is, it)?;
    let solution = run_mild(&local, state, cfg)?;
    Ok(solution.trajectory.last().clone())
}

/// Adjoint of the one-step map `ψ_j ↦ ψ_{j+1}` of the discrete mild
/// solution, `(1 + i dt v_j/2) U₀(−dt) (1 − i dt v_{j+1}/2)⁻¹`, applied in
/// place. `phases` are the free phases for one step.
pub(crate) fn adjoint_step(v: &SampledPotential, j: usize, phases: &[Complex64], phi: &mut [Complex64]) {
    let dt = v.time().dt();
    for (z, vv) in phi.iter_mut().zip(v.slice(j + 1)) {
        *z /= Complex64::new(1.0, -0.5 * dt * vv);
    }
    v.grid().forward(phi);
    phi.iter_mut().zip(phases).for_each(|(z, p)| *z *= p.conj());
    v.grid().inverse(phi);
    for (z, vv) in phi.iter_mut().zip(v.slice(j)) {
        *z *= Complex64::new(1.0, 0.5 * dt * vv);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::banach::{derive_family, Exponent};
    use crate::spectral::{free_propagate, inner_product, TimeGrid};
    use std::f64::consts::PI;

    fn family() -> ExponentFamily {
        derive_family(1, Exponent::integer(6), Exponent::integer(2), Exponent::integer(2)).unwrap()
    }

    fn max_diff(a: &StateVector, b: &StateVector) -> f64 {
        a.difference(b).unwrap().l2_norm()
    }

    /// Discrete fixed point of the trapezoid mild equation written as a
    /// one-step recurrence: `(1 + i dt v_{j+1}/2) ψ_{j+1} = U₀(dt)(1 − i dt v_j/2) ψ_j`.
    fn trapezoid_recurrence(v: &SampledPotential, psi0: &StateVector) -> Vec<StateVector> {
        let dt = v.time().dt();
        let mut out = vec![psi0.clone()];
        for j in 0..v.time().steps() {
            let prev = out.last().unwrap();
            let pre: Vec<Complex64> = prev
                .amplitudes()
                .iter()
                .zip(v.slice(j))
                .map(|(z, vv)| z * Complex64::new(1.0, -0.5 * dt * vv))
                .collect();
            let pre = StateVector::new(v.grid().clone(), pre).unwrap();
            let moved = free_propagate(&pre, dt).unwrap();
            let next: Vec<Complex64> = moved
                .amplitudes()
                .iter()
                .zip(v.slice(j + 1))
                .map(|(z, vv)| z / Complex64::new(1.0, 0.5 * dt * vv))
                .collect();
            out.push(StateVector::new(v.grid().clone(), next).unwrap());
        }
        out
    }

    fn pulse(grid: &Grid, time: TimeGrid, amp: f64) -> SampledPotential {
        SampledPotential::from_fn(grid, time, |t, x| amp * (-x[0] * x[0] / 2.0).exp() * (3.0 * t).sin()).unwrap()
    }

    #[test]
    fn q_v_zero_and_linear() {
        let grid = Grid::new(1, 32, 10.0).unwrap();
        let time = TimeGrid::new(0.5, 10).unwrap();
        let psi = StateVector::gaussian(&grid, 1.0, [0.0; 2], [1.0, 0.0]).unwrap();
        let phi = Trajectory::free(&psi, time).unwrap();
        let zero = q_v_apply(&SampledPotential::zeros(&grid, time), &phi).unwrap();
        assert_eq!(zero.sup_l2(), 0.0);

        let v = pulse(&grid, time, 1.3);
        let a = q_v_apply(&v, &phi).unwrap();
        let b = q_v_apply(&v.scaled(-2.5), &phi).unwrap();
        let defect = b.difference(&a.scaled(Complex64::new(-2.5, 0.0))).unwrap().sup_l2();
        assert!(defect <= 1e-13 * b.sup_l2());
    }

    #[test]
    fn q_v_single_step_trapezoid() {
        let grid = Grid::new(1, 16, 6.0).unwrap();
        let time = TimeGrid::new(0.1, 1).unwrap();
        let f = StateVector::gaussian(&grid, 0.8, [0.2, 0.0], [0.0; 2]).unwrap();
        let phi = Trajectory::new(time, vec![f.clone(), f.clone()]).unwrap();
        let v = SampledPotential::from_fn(&grid, time, |_, _| 0.7).unwrap();
        let out = q_v_apply(&v, &phi).unwrap();
        let vf = f.scaled(Complex64::new(0.7, 0.0));
        let mut expected = free_propagate(&vf, 0.1).unwrap();
        expected.add_scaled(Complex64::new(1.0, 0.0), &vf).unwrap();
        let expected = expected.scaled(Complex64::new(0.0, -0.1 / 2.0));
        assert!(max_diff(out.state(1), &expected) < 1e-15);
        assert_eq!(out.state(0).l2_norm(), 0.0);
    }

    #[test]
    fn q_v_matches_naive_double_sum() {
        let grid = Grid::new(1, 32, 8.0).unwrap();
        let time = TimeGrid::new(0.6, 12).unwrap();
        let psi = StateVector::gaussian(&grid, 0.9, [0.5, 0.0], [-1.0, 0.0]).unwrap();
        let phi = Trajectory::free(&psi, time).unwrap();
        let v = pulse(&grid, time, 2.0);
        let fast = q_v_apply(&v, &phi).unwrap();
        let dt = time.dt();
        for j in 0..time.samples() {
            let mut acc = StateVector::zeros(&grid);
            for k in 0..=j {
                let w = if j == 0 { 0.0 } else if k == 0 || k == j { dt / 2.0 } else { dt };
                let g = crate::spectral::apply_potential(v.slice(k), phi.state(k)).unwrap();
                let term = free_propagate(&g, time.time(j) - time.time(k)).unwrap();
                acc.add_scaled(Complex64::new(0.0, -w), &term).unwrap();
            }
            assert!(max_diff(fast.state(j), &acc) < 1e-13, "sample {j}");
        }
    }

    #[test]
    fn zero_potential_is_free_evolution_in_one_iteration() {
        let grid = Grid::new(1, 64, 20.0).unwrap();
        let time = TimeGrid::new(1.0, 20).unwrap();
        let psi = StateVector::gaussian(&grid, 1.0, [0.0; 2], [2.0, 0.0]).unwrap();
        let sol = solve_mild(&SampledPotential::zeros(&grid, time), &psi, &PicardConfig::fixed(1)).unwrap();
        assert_eq!(sol.report.total_iterations(), 1);
        let free = Trajectory::free(&psi, time).unwrap();
        assert!(sol.trajectory.difference(&free).unwrap().sup_l2() < 1e-14);
    }

    #[test]
    fn picard_reaches_discrete_fixed_point() {
        let grid = Grid::new(1, 64, 16.0).unwrap();
        let time = TimeGrid::new(1.0, 200).unwrap();
        let psi = StateVector::gaussian(&grid, 1.0, [-0.5, 0.0], [1.0, 0.0]).unwrap();
        let v = pulse(&grid, time, 3.0);
        let direct = trapezoid_recurrence(&v, &psi);
        for cfg in [PicardConfig::fixed(1), PicardConfig::fixed(7), PicardConfig::automatic(family(), 1.0).unwrap()] {
            let sol = solve_mild(&v, &psi, &cfg).unwrap();
            for (a, b) in sol.trajectory.states().iter().zip(&direct) {
                assert!(max_diff(a, b) < 1e-11);
            }
            // fixed-point residual of the returned trajectory
            let image = q_v_apply(&v, &sol.trajectory).unwrap();
            let free = Trajectory::free(&psi, time).unwrap();
            if cfg.subintervals == Subintervals::Fixed(1) {
                let resid = free.plus_scaled(Complex64::new(1.0, 0.0), &image).unwrap().difference(&sol.trajectory).unwrap();
                assert!(resid.sup_l2() <= 1e-12);
            }
            assert!(sol.report.max_contraction() < 1.0);
        }
    }

    #[test]
    fn harmonic_ground_state_is_stationary() {
        // (−∂² + x²) e^{−x²/2} = e^{−x²/2}, so ψ(t) = e^{−it}ψ₀.
        let grid = Grid::new(1, 64, 16.0).unwrap();
        let time = TimeGrid::new(1.0, 1000).unwrap();
        let psi0 = StateVector::from_fn(&grid, |x| Complex64::new((-x[0] * x[0] / 2.0).exp() / PI.powf(0.25), 0.0)).unwrap();
        let v = SampledPotential::from_fn(&grid, time, |_, x| x[0] * x[0]).unwrap();
        let sol = solve_mild(&v, &psi0, &PicardConfig::automatic(family(), 1.0).unwrap()).unwrap();
        for (j, s) in sol.trajectory.states().iter().enumerate().step_by(100) {
            let overlap = inner_product(&psi0, s).unwrap();
            assert!((overlap.norm() - 1.0).abs() < 1e-6, "j={j} |overlap|={}", overlap.norm());
            let phase = Complex64::from_polar(1.0, -time.time(j));
            assert!((overlap - phase).norm() < 1e-5);
        }
        let strang = solve_strang(&v, &psi0, time.dt()).unwrap();
        let overlap = inner_product(&psi0, strang.last()).unwrap();
        assert!((overlap.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn strang_zero_potential_is_free() {
        let grid = Grid::new(1, 64, 20.0).unwrap();
        let time = TimeGrid::new(1.0, 10).unwrap();
        let psi = StateVector::gaussian(&grid, 1.0, [0.0; 2], [2.0, 0.0]).unwrap();
        let strang = solve_strang(&SampledPotential::zeros(&grid, time), &psi, 0.025).unwrap();
        for (j, s) in strang.states().iter().enumerate() {
            assert!(max_diff(s, &free_propagate(&psi, time.time(j)).unwrap()) < 1e-13);
        }
        assert!(solve_strang(&SampledPotential::zeros(&grid, time), &psi, 0.03).is_err());
    }

    #[test]
    fn strang_conserves_norm_and_converges_at_second_order() {
        let grid = Grid::new(1, 64, 16.0).unwrap();
        let time = TimeGrid::new(1.0, 16).unwrap();
        let psi = StateVector::gaussian(&grid, 1.0, [0.0; 2], [1.0, 0.0]).unwrap();
        let v = SampledPotential::from_fn(&grid, time, |_, x| 2.0 * (x[0] / 2.0).cos()).unwrap();
        let runs: Vec<Trajectory> = [1usize, 2, 4]
            .iter()
            .map(|r| solve_strang(&v, &psi, time.dt() / *r as f64).unwrap())
            .collect();
        for s in runs[0].states() {
            assert!((s.l2_norm() - 1.0).abs() < 1e-13);
        }
        let e1 = runs[0].difference(&runs[1]).unwrap().sup_l2();
        let e2 = runs[1].difference(&runs[2]).unwrap().sup_l2();
        let slope = (e1 / e2).log2();
        assert!((slope - 2.0).abs() < 0.2, "slope {slope}");
    }

    #[test]
    fn mild_and_strang_agree() {
        let grid = Grid::new(1, 128, 24.0).unwrap();
        let time = TimeGrid::new(1.0, 1000).unwrap();
        let psi = StateVector::gaussian(&grid, 1.0, [0.0; 2], [1.0, 0.0]).unwrap();
        let v = SampledPotential::from_fn(&grid, time, |t, x| (1.0 + t) * (-x[0] * x[0] / 8.0).exp()).unwrap();
        let mild = solve_mild(&v, &psi, &PicardConfig::automatic(family(), 1.0).unwrap()).unwrap();
        let strang = solve_strang(&v, &psi, time.dt()).unwrap();
        let gap = mild.trajectory.difference(&strang).unwrap().sup_l2();
        assert!(gap < 1e-4, "gap {gap}");
        for s in mild.trajectory.states() {
            assert!((s.l2_norm() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn evolution_system_properties() {
        let grid = Grid::new(1, 64, 16.0).unwrap();
        let time = TimeGrid::new(1.0, 100).unwrap();
        let psi = StateVector::gaussian(&grid, 1.0, [0.5, 0.0], [0.0; 2]).unwrap();
        let v = pulse(&grid, time, 2.0);
        let cfg = PicardConfig::fixed(2);
        let same = evolution(&v, 0.3, 0.3, &psi, &cfg).unwrap();
        assert_eq!(max_diff(&same, &psi), 0.0);

        let zero = SampledPotential::zeros(&grid, time);
        let free = evolution(&zero, 0.8, 0.2, &psi, &cfg).unwrap();
        assert!(max_diff(&free, &free_propagate(&psi, 0.6).unwrap()) < 1e-13);

        let mid = evolution(&v, 0.4, 0.1, &psi, &cfg).unwrap();
        let two = evolution(&v, 0.9, 0.4, &mid, &cfg).unwrap();
        let one = evolution(&v, 0.9, 0.1, &psi, &cfg).unwrap();
        assert!(max_diff(&two, &one) < 1e-8);

        assert!(evolution(&v, 0.1, 0.4, &psi, &cfg).is_err());
        assert!(evolution(&v, 0.105, 0.0, &psi, &cfg).is_err());
    }

    #[test]
    fn strong_continuity_on_samples() {
        let grid = Grid::new(1, 64, 16.0).unwrap();
        let time = TimeGrid::new(0.1, 100).unwrap();
        let psi = StateVector::gaussian(&grid, 1.0, [0.0; 2], [0.0; 2]).unwrap();
        let v = pulse(&grid, time, 2.0);
        let sol = solve_mild(&v, &psi, &PicardConfig::fixed(1)).unwrap();
        let gaps: Vec<f64> = [1usize, 10, 100]
            .iter()
            .map(|j| max_diff(sol.trajectory.state(*j), &psi))
            .collect();
        assert!(gaps[0] < gaps[1] && gaps[1] < gaps[2]);
        assert!(gaps[0] < 1e-2);
    }

    #[test]
    fn iteration_limit_is_reported() {
        let grid = Grid::new(1, 32, 8.0).unwrap();
        let time = TimeGrid::new(2.0, 50).unwrap();
        let psi = StateVector::gaussian(&grid, 1.0, [0.0; 2], [0.0; 2]).unwrap();
        let v = SampledPotential::from_fn(&grid, time, |_, x| 20.0 * x[0].cos()).unwrap();
        let cfg = PicardConfig::new(1e-13, 3, Subintervals::Fixed(1)).unwrap();
        let err = solve_mild(&v, &psi, &cfg).unwrap_err();
        assert!(matches!(err, Error::NonContraction { .. } | Error::MaxIterations { .. }), "{err:?}");
        assert!(solve_mild(&v, &StateVector::zeros(&grid), &PicardConfig::fixed(1)).is_err());
        assert!(PicardConfig::new(0.0, 3, Subintervals::Fixed(1)).is_err());
    }

    #[test]
    fn windows_cover_the_interval() {
        let w = equal_windows(10, 3);
        assert_eq!(w, vec![(0, 3), (3, 6), (6, 10)]);
        assert_eq!(equal_windows(4, 9).len(), 4);
    }

    #[test]
    fn adjoint_step_matches_inner_products() {
        let grid = Grid::new(1, 32, 8.0).unwrap();
        let time = TimeGrid::new(0.2, 4).unwrap();
        let v = SampledPotential::from_fn(&grid, time, |t, x| (1.0 + t) * x[0].cos()).unwrap();
        let a = StateVector::gaussian(&grid, 1.0, [0.5, 0.0], [1.0, 0.0]).unwrap();
        let b = StateVector::gaussian(&grid, 0.7, [-1.0, 0.0], [0.0, 0.0]).unwrap();
        let phases = free_phases(&grid, time.dt());
        for j in 0..time.steps() {
            let forward = evolution_by_index(&v, j + 1, j, &b, &PicardConfig::fixed(1)).unwrap();
            let mut back = a.amplitudes().to_vec();
            adjoint_step(&v, j, &phases, &mut back);
            let back = StateVector::new(grid.clone(), back).unwrap();
            let lhs = inner_product(&a, &forward).unwrap();
            let rhs = inner_product(&back, &b).unwrap();
            assert!((lhs - rhs).norm() < 1e-12, "{lhs} vs {rhs}");
        }
    }
}
