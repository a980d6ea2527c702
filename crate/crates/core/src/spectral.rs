//! Periodic grids, wave functions sampled on them, and the exact free
//! evolution `U₀(t) = exp(itΔ)` applied diagonally in momentum space.
//!
//! Units are ħ = 1 and 2m = 1, so the free Hamiltonian is `-Δ` and a plane
//! wave `e^{ikx}` picks up the phase `e^{-itk²}`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};

/// Periodic spatial grid of `points_per_dim^n_dim` sites on `[-L/2, L/2)^n`.
///
/// Cloning is cheap: the FFT plans and the momentum table are shared.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

struct GridInner {
    n_dim: usize,
    points: usize,
    box_length: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    k_squared: Vec<f64>,
}

impl Grid {
    pub fn new(n_dim: usize, points_per_dim: usize, box_length: f64) -> Result<Self> {
        if !(1..=2).contains(&n_dim) {
            return Err(invalid(format!("n_dim must be 1 or 2, got {n_dim}")));
        }
        if points_per_dim < 8 || !points_per_dim.is_multiple_of(2) {
            return Err(invalid(format!(
                "points_per_dim must be even and >= 8, got {points_per_dim}"
            )));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(invalid(format!("box length must be positive, got {box_length}")));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(points_per_dim);
        let inverse = planner.plan_fft_inverse(points_per_dim);

        let k = wavenumbers(points_per_dim, box_length);
        let k_squared = match n_dim {
            1 => k.iter().map(|k| k * k).collect(),
            _ => k
                .iter()
                .flat_map(|kx| k.iter().map(move |ky| kx * kx + ky * ky))
                .collect(),
        };
        Ok(Self {
            inner: Arc::new(GridInner {
                n_dim,
                points: points_per_dim,
                box_length,
                forward,
                inverse,
                k_squared,
            }),
        })
    }

    pub fn n_dim(&self) -> usize {
        self.inner.n_dim
    }

    pub fn points_per_dim(&self) -> usize {
        self.inner.points
    }

    pub fn box_length(&self) -> f64 {
        self.inner.box_length
    }

    pub fn spacing(&self) -> f64 {
        self.inner.box_length / self.inner.points as f64
    }

    /// Quadrature weight `dx^n` of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.inner.n_dim as i32)
    }

    /// Total number of sites.
    pub fn len(&self) -> usize {
        self.inner.points.pow(self.inner.n_dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Site coordinates along one axis, `x_i = -L/2 + i·dx`.
    pub fn axis_positions(&self) -> Vec<f64> {
        let dx = self.spacing();
        let half = 0.5 * self.inner.box_length;
        (0..self.inner.points).map(|i| -half + i as f64 * dx).collect()
    }

    /// Wavenumbers along one axis in FFT order, `k_j = 2πj/L` for the
    /// symmetric index range `j ∈ [-N/2, N/2)`.
    pub fn axis_wavenumbers(&self) -> Vec<f64> {
        wavenumbers(self.inner.points, self.inner.box_length)
    }

    /// `|k|²` for every site of the momentum lattice, flat FFT order.
    pub fn k_squared(&self) -> &[f64] {
        &self.inner.k_squared
    }

    /// Coordinates of a flat site index; the last axis varies fastest.
    pub fn coordinates(&self, index: usize) -> [f64; 2] {
        let dx = self.spacing();
        let half = 0.5 * self.inner.box_length;
        let n = self.inner.points;
        match self.inner.n_dim {
            1 => [-half + index as f64 * dx, 0.0],
            _ => [
                -half + (index / n) as f64 * dx,
                -half + (index % n) as f64 * dx,
            ],
        }
    }

    /// One-dimensional grid with the same axis, used for single-particle
    /// marginals of two 1D particles.
    pub fn axis_grid(&self) -> Grid {
        if self.inner.n_dim == 1 {
            return self.clone();
        }
        Grid::new(1, self.inner.points, self.inner.box_length)
            .expect("axis of a valid grid is valid")
    }

    /// Unnormalized forward DFT in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inner.forward);
    }

    /// Inverse DFT in place, normalized so that `inverse(forward(f)) = f`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inner.inverse);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.len(), "buffer length does not match grid");
        let n = self.inner.points;
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        // Rows are contiguous; rustfft processes the buffer in chunks of n.
        fft.process_with_scratch(data, &mut scratch);
        if self.inner.n_dim == 2 {
            let mut t = transpose(data, n);
            fft.process_with_scratch(&mut t, &mut scratch);
            data.copy_from_slice(&transpose(&t, n));
        }
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.n_dim == other.inner.n_dim
                && self.inner.points == other.inner.points
                && self.inner.box_length == other.inner.box_length)
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n_dim", &self.inner.n_dim)
            .field("points_per_dim", &self.inner.points)
            .field("box_length", &self.inner.box_length)
            .finish()
    }
}

fn wavenumbers(points: usize, box_length: f64) -> Vec<f64> {
    let n = points as i64;
    (0..n)
        .map(|j| {
            let j = if j < n / 2 { j } else { j - n };
            2.0 * PI * j as f64 / box_length
        })
        .collect()
}

fn transpose(data: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = data[i * n + j];
        }
    }
    out
}

/// Uniform time lattice `t_j = j·T/steps`, `j = 0..=steps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(invalid(format!("horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(invalid("time grid needs at least one step"));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of samples, `steps + 1`.
    pub fn samples(&self) -> usize {
        self.steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|j| self.time(j)).collect()
    }

    /// Index of a time that must lie on the lattice.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let x = t / self.dt();
        let j = x.round();
        if !t.is_finite() || j < 0.0 || j > self.steps as f64 || (x - j).abs() > 1e-9 * j.max(1.0) {
            return Err(invalid(format!(
                "time {t} is not a sample of the time grid (dt = {})",
                self.dt()
            )));
        }
        Ok(j as usize)
    }

    /// Sub-lattice covering samples `start..=end`, re-based to start at zero.
    pub fn window(&self, start: usize, end: usize) -> Result<TimeGrid> {
        if start >= end || end > self.steps {
            return Err(invalid(format!("invalid time window {start}..={end}")));
        }
        TimeGrid::new((end - start) as f64 * self.dt(), end - start)
    }
}

/// Complex amplitudes of a wave function on a [`Grid`].
#[derive(Clone, Debug)]
pub struct StateVector {
    grid: Grid,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new(grid: Grid, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} amplitudes for a grid of {} sites",
                amps.len(),
                grid.len()
            )));
        }
        if amps.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(invalid("state amplitudes must be finite"));
        }
        Ok(Self { grid, amps })
    }

    pub(crate) fn from_parts_unchecked(grid: Grid, amps: Vec<Complex64>) -> Self {
        debug_assert_eq!(amps.len(), grid.len());
        Self { grid, amps }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            amps: vec![Complex64::new(0.0, 0.0); grid.len()],
            grid: grid.clone(),
        }
    }

    /// Samples `f` at every site; `f` receives the site coordinates
    /// (the second entry is zero on 1D grids).
    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 2]) -> Complex64) -> Result<Self> {
        let amps = (0..grid.len()).map(|i| f(grid.coordinates(i))).collect();
        Self::new(grid.clone(), amps)
    }

    /// Product Gaussian `Π (2πσ²)^{-1/4} exp(-(x-c)²/4σ² + ipx)` with
    /// position variance `σ²` along every axis.
    pub fn gaussian(grid: &Grid, sigma: f64, center: [f64; 2], momentum: [f64; 2]) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(invalid(format!("gaussian width must be positive, got {sigma}")));
        }
        let n_dim = grid.n_dim();
        let norm = (2.0 * PI * sigma * sigma).powf(-0.25);
        Self::from_fn(grid, |x| {
            (0..n_dim)
                .map(|a| {
                    let d = x[a] - center[a];
                    norm * Complex64::new(-d * d / (4.0 * sigma * sigma), momentum[a] * x[a]).exp()
                })
                .product()
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            grid: self.grid.clone(),
            amps: self.amps.iter().map(|z| z * factor).collect(),
        }
    }

    /// Rescaled to unit L² norm. Fails on the zero state.
    pub fn normalized(&self) -> Result<Self> {
        let norm = self.l2_norm();
        if norm == 0.0 {
            return Err(invalid("cannot normalize the zero state"));
        }
        Ok(self.scaled(Complex64::new(1.0 / norm, 0.0)))
    }

    /// `self += factor · other`.
    pub fn add_scaled(&mut self, factor: Complex64, other: &StateVector) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        self.amps
            .iter_mut()
            .zip(&other.amps)
            .for_each(|(a, b)| *a += factor * b);
        Ok(())
    }

    /// `self - other`.
    pub fn difference(&self, other: &StateVector) -> Result<StateVector> {
        let mut out = self.clone();
        out.add_scaled(Complex64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    /// Mean and variance of `|ψ|²/‖ψ‖²` along `axis`.
    pub fn position_moments(&self, axis: usize) -> (f64, f64) {
        let dv = self.grid.cell_volume();
        let mass = self.norm_sqr();
        let mut mean = 0.0;
        for (i, z) in self.amps.iter().enumerate() {
            mean += z.norm_sqr() * self.grid.coordinates(i)[axis];
        }
        mean *= dv / mass;
        let mut var = 0.0;
        for (i, z) in self.amps.iter().enumerate() {
            let d = self.grid.coordinates(i)[axis] - mean;
            var += z.norm_sqr() * d * d;
        }
        (mean, var * dv / mass)
    }
}

/// Applies `exp(-it|k|²)` in momentum space, i.e. `U₀(t)ψ`.
pub fn free_propagate(state: &StateVector, t: f64) -> Result<StateVector> {
    if !t.is_finite() {
        return Err(invalid(format!("propagation time must be finite, got {t}")));
    }
    let grid = state.grid();
    let mut buf = state.amplitudes().to_vec();
    grid.forward(&mut buf);
    for (z, k2) in buf.iter_mut().zip(grid.k_squared()) {
        *z *= Complex64::from_polar(1.0, -t * k2);
    }
    grid.inverse(&mut buf);
    Ok(StateVector::from_parts_unchecked(grid.clone(), buf))
}

/// Free phases `exp(-it|k|²)` for every momentum site.
pub(crate) fn free_phases(grid: &Grid, t: f64) -> Vec<Complex64> {
    grid.k_squared()
        .iter()
        .map(|k2| Complex64::from_polar(1.0, -t * k2))
        .collect()
}

/// Pointwise product `v·ψ` with a real field sampled on the same grid.
pub fn apply_potential(v_slice: &[f64], state: &StateVector) -> Result<StateVector> {
    if v_slice.len() != state.grid().len() {
        return Err(Error::GridMismatch(format!(
            "potential slice of {} values on a grid of {} sites",
            v_slice.len(),
            state.grid().len()
        )));
    }
    let amps = state
        .amplitudes()
        .iter()
        .zip(v_slice)
        .map(|(z, v)| z * v)
        .collect();
    Ok(StateVector::from_parts_unchecked(state.grid().clone(), amps))
}

/// `⟨a, b⟩ = Σ conj(a)·b·dxⁿ`, antilinear in the first slot.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<Complex64> {
    a.grid().check_same(b.grid())?;
    Ok(raw_inner(a.amplitudes(), b.amplitudes()) * a.grid().cell_volume())
}

pub(crate) fn raw_inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(grid: &Grid, seed: u64) -> StateVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..grid.len())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        StateVector::new(grid.clone(), amps).unwrap()
    }

    fn max_diff(a: &StateVector, b: &StateVector) -> f64 {
        a.amplitudes()
            .iter()
            .zip(b.amplitudes())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(Grid::new(3, 16, 1.0).is_err());
        assert!(Grid::new(1, 6, 1.0).is_err());
        assert!(Grid::new(1, 17, 1.0).is_err());
        assert!(Grid::new(1, 16, 0.0).is_err());
    }

    #[test]
    fn momentum_lattice_is_dft_dual() {
        let grid = Grid::new(1, 16, 8.0).unwrap();
        let x = grid.axis_positions();
        let k = grid.axis_wavenumbers();
        // e^{i k_m x} transforms to a single spike at index m.
        for (m, km) in k.iter().enumerate() {
            let mut buf: Vec<Complex64> = x.iter().map(|x| Complex64::from_polar(1.0, km * x)).collect();
            grid.forward(&mut buf);
            for (j, z) in buf.iter().enumerate() {
                if j == m {
                    assert!((z.norm() - 16.0).abs() < 1e-10);
                } else {
                    assert!(z.norm() < 1e-10);
                }
            }
        }
        assert_eq!(k[8], -2.0 * PI * 8.0 / 8.0);
    }

    #[test]
    fn transform_round_trip_2d() {
        let grid = Grid::new(2, 8, 3.0).unwrap();
        let psi = random_state(&grid, 3);
        let mut buf = psi.amplitudes().to_vec();
        grid.forward(&mut buf);
        grid.inverse(&mut buf);
        let back = StateVector::new(grid, buf).unwrap();
        assert!(max_diff(&psi, &back) < 1e-14);
    }

    #[test]
    fn free_propagate_identity_and_unitarity() {
        let grid = Grid::new(1, 64, 10.0).unwrap();
        let psi = random_state(&grid, 1);
        let same = free_propagate(&psi, 0.0).unwrap();
        assert!(max_diff(&psi, &same) < 1e-14);
        let moved = free_propagate(&psi, 0.7).unwrap();
        assert!((moved.l2_norm() - psi.l2_norm()).abs() <= 1e-12 * psi.l2_norm());
        assert!(free_propagate(&psi, f64::NAN).is_err());
        assert!(free_propagate(&psi, f64::INFINITY).is_err());
    }

    #[test]
    fn free_propagate_group_law_and_inverse() {
        for grid in [Grid::new(1, 64, 10.0).unwrap(), Grid::new(2, 16, 6.0).unwrap()] {
            let psi = random_state(&grid, 2);
            let scale = psi.amplitudes().iter().map(|z| z.norm()).fold(0.0, f64::max);
            let two_step = free_propagate(&free_propagate(&psi, 0.3).unwrap(), -1.1).unwrap();
            let one_step = free_propagate(&psi, -0.8).unwrap();
            assert!(max_diff(&two_step, &one_step) <= 1e-12 * scale);
            let back = free_propagate(&free_propagate(&psi, 0.9).unwrap(), -0.9).unwrap();
            assert!(max_diff(&back, &psi) <= 1e-12 * scale);
        }
    }

    #[test]
    fn free_gaussian_variance_law() {
        // σ(t)² = σ₀² + t²/σ₀² for i∂ₜψ = -∂²ₓψ.
        let grid = Grid::new(1, 512, 40.0).unwrap();
        let psi0 = StateVector::gaussian(&grid, 1.0, [0.0; 2], [0.0; 2]).unwrap();
        for t in [0.0, 0.5, 1.0, 2.0] {
            let psi = free_propagate(&psi0, t).unwrap();
            let (mean, var) = psi.position_moments(0);
            assert!(mean.abs() < 1e-12);
            assert!((var - (1.0 + t * t)).abs() < 1e-9 * (1.0 + t * t), "t={t} var={var}");
        }
    }

    #[test]
    fn apply_potential_cases() {
        let grid = Grid::new(1, 32, 8.0).unwrap();
        let psi = StateVector::gaussian(&grid, 1.0, [0.5, 0.0], [1.0, 0.0]).unwrap();
        let zero = apply_potential(&vec![0.0; 32], &psi).unwrap();
        assert!(zero.amplitudes().iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        let one = apply_potential(&vec![1.0; 32], &psi).unwrap();
        assert!(max_diff(&one, &psi) == 0.0);

        let x = grid.axis_positions();
        let out = apply_potential(&x, &psi).unwrap();
        let mut expected = Vec::new();
        for i in 0..x.len() {
            expected.push(psi.amplitudes()[i] * x[i]);
        }
        assert_eq!(out.amplitudes(), &expected[..]);
        assert!(apply_potential(&[1.0; 8], &psi).is_err());
    }

    #[test]
    fn inner_product_properties() {
        let grid = Grid::new(1, 32, 8.0).unwrap();
        let a = random_state(&grid, 5);
        let b = random_state(&grid, 6);
        let aa = inner_product(&a, &a).unwrap();
        assert!(aa.im.abs() < 1e-14 && (aa.re - a.norm_sqr()).abs() < 1e-12);
        let ab = inner_product(&a, &b).unwrap();
        let ba = inner_product(&b, &a).unwrap();
        assert!((ab - ba.conj()).norm() < 1e-14);

        // naive summation oracle
        let mut naive = Complex64::new(0.0, 0.0);
        for i in 0..grid.len() {
            let (ar, ai) = (a.amplitudes()[i].re, a.amplitudes()[i].im);
            let (br, bi) = (b.amplitudes()[i].re, b.amplitudes()[i].im);
            naive += Complex64::new(ar * br + ai * bi, ar * bi - ai * br) * grid.spacing();
        }
        assert!((naive - ab).norm() <= 1e-13 * naive.norm().max(1.0));

        let k = grid.axis_wavenumbers();
        let pw = |m: usize| StateVector::from_fn(&grid, |x| Complex64::from_polar(1.0, k[m] * x[0])).unwrap();
        assert!(inner_product(&pw(1), &pw(3)).unwrap().norm() < 1e-12);

        let other = Grid::new(1, 16, 8.0).unwrap();
        assert!(inner_product(&a, &StateVector::zeros(&other)).is_err());
    }
}
