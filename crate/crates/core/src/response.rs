//! Functional response of the mild solution to a perturbation `w` of the
//! potential: the derivative `δψ[v;w]`, its finite-difference shadow, the
//! Kubo formula for bounded observables, the one-particle density with its
//! variation and response kernel, and the internal-force density `q[v]`.
//!
//! Interaction-picture operators are never materialized. Every
//! `U([v],t,s)` acts on a state through the propagation module, and
//! integrals over `s` use the trapezoid rule on the time samples.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::propagation::{adjoint_step, evolution_by_index, solve_mild, PicardConfig, SampledPotential, Trajectory};
use crate::spectral::{apply_potential, free_phases, inner_product, Grid, StateVector};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Time-independent bounded self-adjoint operator on grid states.
#[derive(Clone, Debug)]
pub enum ObservableOperator {
    /// Multiplication by a bounded real field.
    Field(Vec<f64>),
    /// `|φ⟩⟨φ|` for a normalized `φ`.
    Projector(StateVector),
    /// Hermitian matrix acting on the amplitude vector, row-major.
    Matrix { size: usize, entries: Vec<Complex64> },
}

impl ObservableOperator {
    pub fn field(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "observable field of {} values on {} sites",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("observable field must be finite"));
        }
        Ok(Self::Field(values))
    }

    pub fn identity(grid: &Grid) -> Self {
        Self::Field(vec![1.0; grid.len()])
    }

    /// Projector onto `state / ‖state‖`.
    pub fn projector(state: &StateVector) -> Result<Self> {
        Ok(Self::Projector(state.normalized()?))
    }

    pub fn matrix(grid: &Grid, entries: Vec<Complex64>) -> Result<Self> {
        let size = grid.len();
        if entries.len() != size * size {
            return Err(invalid(format!("matrix needs {} entries, got {}", size * size, entries.len())));
        }
        let scale = entries.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        for i in 0..size {
            for j in 0..=i {
                if (entries[i * size + j] - entries[j * size + i].conj()).norm() > 1e-12 * scale {
                    return Err(invalid(format!("matrix is not Hermitian at ({i}, {j})")));
                }
            }
        }
        if entries.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(invalid("matrix entries must be finite"));
        }
        Ok(Self::Matrix { size, entries })
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        match self {
            Self::Field(values) => apply_potential(values, state),
            Self::Projector(phi) => {
                let overlap = inner_product(phi, state)?;
                Ok(phi.scaled(overlap))
            }
            Self::Matrix { size, entries } => {
                if *size != state.grid().len() {
                    return Err(Error::GridMismatch(format!("matrix of size {size} on {} sites", state.grid().len())));
                }
                let amps = state.amplitudes();
                let out = entries.chunks(*size).map(|row| row.iter().zip(amps).map(|(a, b)| a * b).sum()).collect();
                StateVector::new(state.grid().clone(), out)
            }
        }
    }

    /// `⟨ψ, Aψ⟩`.
    pub fn expectation(&self, state: &StateVector) -> Result<f64> {
        Ok(inner_product(state, &self.apply(state)?)?.re)
    }
}

/// Real field on a single-particle grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl SpatialField {
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// One-particle density `n = N∫|ψ|² dx̄`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    pub field: SpatialField,
    pub particle_count: usize,
}

impl DensityField {
    pub fn integral(&self) -> f64 {
        self.field.integral()
    }
}

/// Single-particle grid for `particles` particles encoded on `grid`:
/// one particle in 1D or 2D, or two 1D particles on a 2D grid.
fn particle_grid(grid: &Grid, particles: usize) -> Result<Grid> {
    match (particles, grid.n_dim()) {
        (1, _) => Ok(grid.clone()),
        (2, 2) => Ok(grid.axis_grid()),
        _ => Err(invalid(format!(
            "{particles} particles cannot be encoded on a {}-dimensional grid",
            grid.n_dim()
        ))),
    }
}

/// `N Σ_{x̄} f(ψ(x,x̄)) dx̄` for the marginal over all but the first particle.
fn marginal(grid: &Grid, particles: usize, per_site: impl Fn(usize) -> f64) -> Result<SpatialField> {
    let single = particle_grid(grid, particles)?;
    let values = if particles == 1 {
        (0..grid.len()).map(per_site).collect()
    } else {
        let n = grid.points_per_dim();
        let dx = grid.spacing();
        (0..n)
            .map(|i| particles as f64 * dx * (0..n).map(|k| per_site(i * n + k)).sum::<f64>())
            .collect()
    };
    Ok(SpatialField { grid: single, values })
}

pub fn density(state: &StateVector, particles: usize) -> Result<DensityField> {
    let amps = state.amplitudes();
    let field = marginal(state.grid(), particles, |i| amps[i].norm_sqr())?;
    Ok(DensityField {
        field,
        particle_count: particles,
    })
}

fn solve(v: &SampledPotential, initial: &StateVector, cfg: &PicardConfig) -> Result<Trajectory> {
    Ok(solve_mild(v, initial, cfg)?.trajectory)
}

/// `Σ_k w_k U([v],t_j,s_k) g_k` for `j = 0..=last` with trapezoid weights on
/// `[0, t_j]`; the running sum is moved forward one sample at a time
/// through `U(t_{j+1}, t_j)`.
fn propagated_sources(
    v: &SampledPotential,
    sources: &[StateVector],
    last: usize,
    cfg: &PicardConfig,
) -> Result<Vec<StateVector>> {
    let dt = v.time().dt();
    let half = Complex64::new(0.5 * dt, 0.0);
    let mut out = Vec::with_capacity(last + 1);
    out.push(StateVector::zeros(v.grid()));
    let mut running = sources[0].scaled(half);
    for j in 0..last {
        running = evolution_by_index(v, j + 1, j, &running, cfg)?;
        running.add_scaled(Complex64::new(dt, 0.0), &sources[j + 1])?;
        let mut value = running.clone();
        value.add_scaled(-half, &sources[j + 1])?;
        out.push(value);
    }
    Ok(out)
}

fn source_states(w: &SampledPotential, psi: &Trajectory, last: usize) -> Result<Vec<StateVector>> {
    (0..=last).map(|k| apply_potential(w.slice(k), psi.state(k))).collect()
}

fn check_pair(v: &SampledPotential, w: &SampledPotential, initial: &StateVector) -> Result<()> {
    v.check_compatible(w)?;
    v.check_state(initial)
}

/// `δψ(t) = −i∫₀ᵗ U([v],t,s) w(s) ψ([v],s) ds` given the base trajectory.
pub fn delta_psi_from(
    v: &SampledPotential,
    w: &SampledPotential,
    base: &Trajectory,
    cfg: &PicardConfig,
) -> Result<Trajectory> {
    let last = v.time().steps();
    let sources = source_states(w, base, last)?;
    let states = propagated_sources(v, &sources, last, cfg)?
        .into_iter()
        .map(|s| s.scaled(-I))
        .collect();
    Trajectory::new(v.time(), states)
}

/// Fréchet derivative `δψ[v;w]` of the mild solution, one state per sample.
pub fn delta_psi(
    v: &SampledPotential,
    w: &SampledPotential,
    initial: &StateVector,
    cfg: &PicardConfig,
) -> Result<Trajectory> {
    check_pair(v, w, initial)?;
    let base = solve(v, initial, cfg)?;
    delta_psi_from(v, w, &base, cfg)
}

/// Difference quotient `(ψ[v+λw] − ψ[v])/λ` given the base trajectory.
pub fn gateaux_fd_from(
    v: &SampledPotential,
    w: &SampledPotential,
    initial: &StateVector,
    base: &Trajectory,
    lambda: f64,
    cfg: &PicardConfig,
) -> Result<Trajectory> {
    if !(lambda.is_finite() && lambda != 0.0) {
        return Err(invalid(format!("λ must be finite and nonzero, got {lambda}")));
    }
    let shifted = solve(&v.plus_scaled(lambda, w)?, initial, cfg)?;
    Ok(shifted.difference(base)?.scaled(Complex64::new(1.0 / lambda, 0.0)))
}

pub fn gateaux_fd(
    v: &SampledPotential,
    w: &SampledPotential,
    initial: &StateVector,
    lambda: f64,
    cfg: &PicardConfig,
) -> Result<Trajectory> {
    check_pair(v, w, initial)?;
    let base = solve(v, initial, cfg)?;
    gateaux_fd_from(v, w, initial, &base, lambda, cfg)
}

/// Kubo formula `δ⟨A⟩(t) = i∫₀ᵗ ⟨[ŵ(s), Â(t)]⟩₀ ds` with
/// `ŵ(s) = U(0,s)w(s)U(s,0)` and `Â(t) = U(0,t)AU(t,0)`.
///
/// By unitarity `⟨ŵ(s)ψ₀, Â(t)ψ₀⟩ = ⟨U(t,s)w(s)ψ(s), Aψ(t)⟩`, so only
/// forward evolutions of states are needed.
pub fn kubo_delta_expectation(
    observable: &ObservableOperator,
    v: &SampledPotential,
    w: &SampledPotential,
    initial: &StateVector,
    t: f64,
    cfg: &PicardConfig,
) -> Result<f64> {
    check_pair(v, w, initial)?;
    let j = v.time().index_of(t)?;
    let base = solve(v, initial, cfg)?;
    let sources = source_states(w, &base, j)?;
    let w_hat = propagated_sources(v, &sources, j, cfg)?.pop().expect("nonempty");
    let a_hat = observable.apply(base.state(j))?;
    let commutator = inner_product(&w_hat, &a_hat)? - inner_product(&a_hat, &w_hat)?;
    let value = I * commutator;
    if !(value.im.abs() <= 1e-10 * value.re.abs().max(1.0)) {
        return Err(invalid(format!("Kubo expectation has imaginary residue {:.3e}", value.im)));
    }
    Ok(value.re)
}

/// Kubo formula at every time sample from one base solve.
pub fn kubo_series(
    observable: &ObservableOperator,
    v: &SampledPotential,
    w: &SampledPotential,
    initial: &StateVector,
    cfg: &PicardConfig,
) -> Result<Vec<f64>> {
    check_pair(v, w, initial)?;
    let last = v.time().steps();
    let base = solve(v, initial, cfg)?;
    let sources = source_states(w, &base, last)?;
    propagated_sources(v, &sources, last, cfg)?
        .iter()
        .zip(base.states())
        .map(|(w_hat, psi)| {
            let a_hat = observable.apply(psi)?;
            let value = I * (inner_product(w_hat, &a_hat)? - inner_product(&a_hat, w_hat)?);
            Ok(value.re)
        })
        .collect()
}

/// Finite-difference expectation quotient at every time sample.
pub fn expectation_difference_series(
    observable: &ObservableOperator,
    v: &SampledPotential,
    w: &SampledPotential,
    initial: &StateVector,
    lambda: f64,
    cfg: &PicardConfig,
) -> Result<Vec<f64>> {
    check_pair(v, w, initial)?;
    if !(lambda.is_finite() && lambda != 0.0) {
        return Err(invalid(format!("λ must be finite and nonzero, got {lambda}")));
    }
    let base = solve(v, initial, cfg)?;
    let shifted = solve(&v.plus_scaled(lambda, w)?, initial, cfg)?;
    base.states()
        .iter()
        .zip(shifted.states())
        .map(|(a, b)| Ok((observable.expectation(b)? - observable.expectation(a)?) / lambda))
        .collect()
}

/// Finite-difference oracle `(⟨A⟩_{[v+λw]}(t) − ⟨A⟩_{[v]}(t))/λ` from two full solves.
pub fn expectation_difference_quotient(
    observable: &ObservableOperator,
    v: &SampledPotential,
    w: &SampledPotential,
    initial: &StateVector,
    t: f64,
    lambda: f64,
    cfg: &PicardConfig,
) -> Result<f64> {
    check_pair(v, w, initial)?;
    if !(lambda.is_finite() && lambda != 0.0) {
        return Err(invalid(format!("λ must be finite and nonzero, got {lambda}")));
    }
    let j = v.time().index_of(t)?;
    let base = solve(v, initial, cfg)?;
    let shifted = solve(&v.plus_scaled(lambda, w)?, initial, cfg)?;
    Ok((observable.expectation(shifted.state(j))? - observable.expectation(base.state(j))?) / lambda)
}

/// `δn(t,x) = N∫dx̄ conj(ψ)δψ + c.c.` at sample time `t`.
pub fn delta_density(
    v: &SampledPotential,
    w: &SampledPotential,
    initial: &StateVector,
    t: f64,
    particles: usize,
    cfg: &PicardConfig,
) -> Result<SpatialField> {
    check_pair(v, w, initial)?;
    particle_grid(v.grid(), particles)?;
    let j = v.time().index_of(t)?;
    let base = solve(v, initial, cfg)?;
    let sources = source_states(w, &base, j)?;
    let delta = propagated_sources(v, &sources, j, cfg)?.pop().expect("nonempty").scaled(-I);
    let psi = base.state(j).amplitudes();
    let d = delta.amplitudes();
    marginal(v.grid(), particles, |i| 2.0 * (psi[i].conj() * d[i]).re)
}

/// `χ([v],t,x,s,y)` on the single-particle grid for one pair `s ≤ t`.
#[derive(Clone, Debug)]
pub struct ResponseKernel {
    pub t: f64,
    pub s: f64,
    pub grid: Grid,
    /// Row-major, `matrix[x·n + y]`.
    pub matrix: Vec<f64>,
}

impl ResponseKernel {
    /// `Σ_y χ(x,y) w(y) dy`.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let dy = self.grid.cell_volume();
        self.matrix
            .chunks(n)
            .map(|row| row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() * dy)
            .collect()
    }
}

const KERNEL_SITES_ONE: usize = 256;
const KERNEL_POINTS_TWO: usize = 64;

/// Rows of the kernel are computed backwards: with the probe `b_x`
/// (`ψ(t)` restricted to the sites whose first coordinate is `x`),
/// `Σ_x̄ ψ̄(t,x,x̄)[U(t,s)e_site](x,x̄) = conj([U(t,s)†b_x](site))`, so one
/// adjoint sweep per row yields that row at every earlier sample `s`.
struct KernelSweep<'a> {
    v: &'a SampledPotential,
    base: &'a Trajectory,
    it: usize,
    particles: usize,
    phases: Vec<Complex64>,
    single: Grid,
}

impl<'a> KernelSweep<'a> {
    fn new(v: &'a SampledPotential, base: &'a Trajectory, it: usize, particles: usize) -> Result<Self> {
        Ok(Self {
            v,
            base,
            it,
            particles,
            phases: free_phases(v.grid(), v.time().dt()),
            single: particle_grid(v.grid(), particles)?,
        })
    }

    fn probe(&self, x: usize) -> Vec<Complex64> {
        let psi_t = self.base.state(self.it).amplitudes();
        let mut b = vec![Complex64::new(0.0, 0.0); psi_t.len()];
        let n = self.v.grid().points_per_dim();
        let sites = if self.particles == 1 { x..x + 1 } else { x * n..(x + 1) * n };
        for site in sites {
            b[site] = psi_t[site];
        }
        b
    }

    /// Kernel row `χ(t,x,s,·)` from `φ = U(t,s)†b_x`.
    fn row(&self, phi: &[Complex64], is: usize) -> Vec<f64> {
        let psi_s = self.base.state(is).amplitudes();
        let m = self.single.len();
        if self.particles == 1 {
            let scale = 2.0 / self.v.grid().cell_volume();
            return (0..m).map(|y| scale * (phi[y].conj() * psi_s[y]).im).collect();
        }
        // the one-body perturbation acts on either particle slot; with
        // dx² = dv the measure factors cancel
        let n = self.v.grid().points_per_dim();
        let mut out = vec![Complex64::new(0.0, 0.0); m];
        for a in 0..n {
            for b in 0..n {
                let site = a * n + b;
                let z = phi[site].conj() * psi_s[site];
                out[a] += z;
                out[b] += z;
            }
        }
        let scale = 2.0 * self.particles as f64;
        out.into_iter().map(|z| scale * z.im).collect()
    }

    /// Calls `visit(is, row)` for `is = it, it−1, …, lo` for output row `x`.
    fn sweep(&self, x: usize, lo: usize, mut visit: impl FnMut(usize, Vec<f64>)) {
        let mut phi = self.probe(x);
        for is in (lo..=self.it).rev() {
            if is < self.it {
                adjoint_step(self.v, is, &self.phases, &mut phi);
            }
            visit(is, self.row(&phi, is));
        }
    }
}

fn kernel_guard(grid: &Grid, particles: usize) -> Result<()> {
    let ok = match particles {
        1 => grid.len() <= KERNEL_SITES_ONE,
        _ => grid.points_per_dim() <= KERNEL_POINTS_TWO,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::SizeGuard(format!(
            "response kernel on {:?} for {particles} particle(s) exceeds {KERNEL_SITES_ONE} sites (N=1) or {KERNEL_POINTS_TWO}² (N=2)",
            grid
        )))
    }
}

/// Non-equilibrium density-response kernel for sample times `s ≤ t`,
/// realized from the position-basis matrix of `U([v],t,s)`.
///
/// For two particles the perturbation `w(y₁) + w(y₂)` enters through both
/// slots, so `χ = −iN∫dx̄ ψ̄(t,x,x̄) Σ_k [U w_k ψ(s)](x,x̄) + c.c.`; this
/// reduces to the `N²` single-slot form only when the slot terms coincide.
pub fn response_kernel(
    v: &SampledPotential,
    initial: &StateVector,
    t: f64,
    s: f64,
    particles: usize,
    cfg: &PicardConfig,
) -> Result<ResponseKernel> {
    v.check_state(initial)?;
    particle_grid(v.grid(), particles)?;
    kernel_guard(v.grid(), particles)?;
    let (it, is) = (v.time().index_of(t)?, v.time().index_of(s)?);
    if is > it {
        return Err(invalid(format!("response kernel needs s ≤ t, got s={s} > t={t}")));
    }
    let base = solve(v, initial, cfg)?;
    let sweep = KernelSweep::new(v, &base, it, particles)?;
    let m = sweep.single.len();
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|x| {
            let mut row = Vec::new();
            sweep.sweep(x, is, |k, r| {
                if k == is {
                    row = r;
                }
            });
            row
        })
        .collect();
    Ok(ResponseKernel {
        t: v.time().time(it),
        s: v.time().time(is),
        grid: sweep.single,
        matrix: rows.concat(),
    })
}

/// Kernel route to `δn(t)`: `Σ_k w_k Σ_y χ(t,x,s_k,y) w(s_k,y) dy` with
/// trapezoid weights `w_k` on `[0,t]` and a one-body perturbation given on
/// the single-particle grid.
pub fn kernel_delta_density(
    v: &SampledPotential,
    initial: &StateVector,
    one_body: &SampledPotential,
    t: f64,
    particles: usize,
    cfg: &PicardConfig,
) -> Result<SpatialField> {
    v.check_state(initial)?;
    let single = particle_grid(v.grid(), particles)?;
    kernel_guard(v.grid(), particles)?;
    one_body.grid().check_same(&single)?;
    if one_body.time() != v.time() {
        return Err(Error::GridMismatch("perturbation time grid differs".into()));
    }
    let it = v.time().index_of(t)?;
    let base = solve(v, initial, cfg)?;
    let dt = v.time().dt();
    let dy = single.cell_volume();
    let sweep = KernelSweep::new(v, &base, it, particles)?;
    let values: Vec<f64> = (0..single.len())
        .into_par_iter()
        .map(|x| {
            let mut acc = 0.0;
            sweep.sweep(x, 0, |is, row| {
                let weight = if it == 0 {
                    0.0
                } else if is == 0 || is == it {
                    0.5 * dt
                } else {
                    dt
                };
                let applied: f64 = row.iter().zip(one_body.slice(is)).map(|(c, w)| c * w).sum();
                acc += weight * applied * dy;
            });
            acc
        })
        .collect();
    Ok(SpatialField { grid: single, values })
}

/// `q = ∂ₜ²n − ∇·(n∇v)` at one interior time sample.
#[derive(Clone, Debug)]
pub struct ForceSample {
    pub index: usize,
    pub t: f64,
    pub second_time_derivative: Vec<f64>,
    pub divergence: Vec<f64>,
    pub q: Vec<f64>,
}

/// Per-site wavenumber components, flat FFT order.
fn wavevectors(grid: &Grid) -> Vec<[f64; 2]> {
    let k = grid.axis_wavenumbers();
    let n = grid.points_per_dim();
    let nyquist = n / 2;
    // the Nyquist mode has no odd counterpart; drop it from first derivatives
    let odd = |j: usize| if j == nyquist { 0.0 } else { k[j] };
    match grid.n_dim() {
        1 => (0..n).map(|j| [odd(j), 0.0]).collect(),
        _ => (0..n * n).map(|i| [odd(i / n), odd(i % n)]).collect(),
    }
}

fn spectral_derivative(grid: &Grid, k: &[[f64; 2]], f: &[f64], axis: usize) -> Vec<f64> {
    let mut buf: Vec<Complex64> = f.iter().map(|x| Complex64::new(*x, 0.0)).collect();
    grid.forward(&mut buf);
    buf.iter_mut().zip(k).for_each(|(z, kk)| *z *= I * kk[axis]);
    grid.inverse(&mut buf);
    buf.into_iter().map(|z| z.re).collect()
}

/// Internal-force density of a single-particle trajectory on interior samples:
/// second central differences in time, spectral derivatives in space.
pub fn internal_force_density(v: &SampledPotential, traj: &Trajectory) -> Result<Vec<ForceSample>> {
    v.check_state(traj.state(0))?;
    if v.time() != traj.time() {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", v.time(), traj.time())));
    }
    let time = traj.time();
    if time.samples() < 3 {
        return Err(invalid("internal force density needs at least 3 time samples"));
    }
    let grid = traj.grid();
    let k = wavevectors(grid);
    let dt2 = time.dt() * time.dt();
    let densities: Vec<Vec<f64>> = traj
        .states()
        .iter()
        .map(|s| s.amplitudes().iter().map(|z| z.norm_sqr()).collect())
        .collect();

    (1..time.steps())
        .into_par_iter()
        .map(|j| {
            let n = &densities[j];
            let d2n: Vec<f64> = (0..grid.len())
                .map(|i| (densities[j + 1][i] - 2.0 * n[i] + densities[j - 1][i]) / dt2)
                .collect();
            let mut divergence = vec![0.0; grid.len()];
            for axis in 0..grid.n_dim() {
                let grad = spectral_derivative(grid, &k, v.slice(j), axis);
                let flux: Vec<f64> = n.iter().zip(&grad).map(|(a, b)| a * b).collect();
                for (d, f) in divergence.iter_mut().zip(spectral_derivative(grid, &k, &flux, axis)) {
                    *d += f;
                }
            }
            let q = d2n.iter().zip(&divergence).map(|(a, b)| a - b).collect();
            Ok(ForceSample {
                index: j,
                t: time.time(j),
                second_time_derivative: d2n,
                divergence,
                q,
            })
        })
        .collect()
}
