use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::spectral::{free_propagate, Grid, StateVector, TimeGrid};

/// Real potential sampled at every `(t_j, x)` of a time grid and a spatial grid.
#[derive(Clone, Debug)]
pub struct SampledPotential {
    grid: Grid,
    time: TimeGrid,
    values: Vec<f64>,
}

impl SampledPotential {
    /// `values` are stored time-major: sample `j` occupies
    /// `values[j·grid.len()..(j+1)·grid.len()]`.
    pub fn new(grid: Grid, time: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() * time.samples() {
            return Err(Error::GridMismatch(format!(
                "{} potential values for {} sites × {} samples",
                values.len(),
                grid.len(),
                time.samples()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("potential values must be finite"));
        }
        Ok(Self { grid, time, values })
    }

    pub fn zeros(grid: &Grid, time: TimeGrid) -> Self {
        Self {
            values: vec![0.0; grid.len() * time.samples()],
            grid: grid.clone(),
            time,
        }
    }

    pub fn from_fn(grid: &Grid, time: TimeGrid, f: impl Fn(f64, [f64; 2]) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len() * time.samples());
        for j in 0..time.samples() {
            let t = time.time(j);
            values.extend((0..grid.len()).map(|i| f(t, grid.coordinates(i))));
        }
        Self::new(grid.clone(), time, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn time(&self) -> TimeGrid {
        self.time
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slice(&self, j: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[j * n..(j + 1) * n]
    }

    /// Linear interpolation in time between neighbouring samples.
    pub fn at_time(&self, t: f64) -> Vec<f64> {
        let x = (t / self.time.dt()).clamp(0.0, self.time.steps() as f64);
        let j = (x.floor() as usize).min(self.time.steps() - 1);
        let frac = x - j as f64;
        self.slice(j)
            .iter()
            .zip(self.slice(j + 1))
            .map(|(a, b)| a + frac * (b - a))
            .collect()
    }

    /// Restriction to samples `start..=end`, re-based to start at zero.
    pub fn window(&self, start: usize, end: usize) -> Result<Self> {
        let time = self.time.window(start, end)?;
        let n = self.grid.len();
        Ok(Self {
            grid: self.grid.clone(),
            time,
            values: self.values[start * n..(end + 1) * n].to_vec(),
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            time: self.time,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// `self + factor·other`.
    pub fn plus_scaled(&self, factor: f64, other: &SampledPotential) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self {
            grid: self.grid.clone(),
            time: self.time,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + factor * b)
                .collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub(crate) fn check_compatible(&self, other: &SampledPotential) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        if self.time != other.time {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.time, other.time)));
        }
        Ok(())
    }

    pub(crate) fn check_state(&self, state: &StateVector) -> Result<()> {
        self.grid.check_same(state.grid())
    }
}

/// Wave function sampled at every point of a [`TimeGrid`].
#[derive(Clone, Debug)]
pub struct Trajectory {
    time: TimeGrid,
    states: Vec<StateVector>,
}

impl Trajectory {
    pub fn new(time: TimeGrid, states: Vec<StateVector>) -> Result<Self> {
        if states.len() != time.samples() {
            return Err(invalid(format!(
                "{} states for {} time samples",
                states.len(),
                time.samples()
            )));
        }
        let grid = states[0].grid();
        for s in &states[1..] {
            grid.check_same(s.grid())?;
        }
        Ok(Self { time, states })
    }

    pub fn zeros(grid: &Grid, time: TimeGrid) -> Self {
        Self {
            time,
            states: vec![StateVector::zeros(grid); time.samples()],
        }
    }

    /// `t ↦ U₀(t)ψ₀` on the time grid.
    pub fn free(initial: &StateVector, time: TimeGrid) -> Result<Self> {
        let states = time
            .times()
            .into_iter()
            .map(|t| free_propagate(initial, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { time, states })
    }

    pub fn time(&self) -> TimeGrid {
        self.time
    }

    pub fn grid(&self) -> &Grid {
        self.states[0].grid()
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn state(&self, j: usize) -> &StateVector {
        &self.states[j]
    }

    pub fn last(&self) -> &StateVector {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn into_states(self) -> Vec<StateVector> {
        self.states
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            time: self.time,
            states: self.states.iter().map(|s| s.scaled(factor)).collect(),
        }
    }

    /// `self + factor·other`.
    pub fn plus_scaled(&self, factor: Complex64, other: &Trajectory) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (a, b) in out.states.iter_mut().zip(&other.states) {
            a.add_scaled(factor, b)?;
        }
        Ok(out)
    }

    pub fn difference(&self, other: &Trajectory) -> Result<Self> {
        self.plus_scaled(Complex64::new(-1.0, 0.0), other)
    }

    /// `sup_t ‖φ(t)‖₂` over the samples, the `‖·‖_{2,∞}` norm.
    pub fn sup_l2(&self) -> f64 {
        self.states.iter().map(|s| s.l2_norm()).fold(0.0, f64::max)
    }

    pub(crate) fn check_compatible(&self, other: &Trajectory) -> Result<()> {
        self.grid().check_same(other.grid())?;
        if self.time != other.time {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.time, other.time)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_and_window() {
        let grid = Grid::new(1, 8, 4.0).unwrap();
        let time = TimeGrid::new(1.0, 4).unwrap();
        let v = SampledPotential::from_fn(&grid, time, |t, x| t + x[0]).unwrap();
        let mid = v.at_time(0.375);
        let x = grid.axis_positions();
        for (m, x) in mid.iter().zip(&x) {
            assert!((m - (0.375 + x)).abs() < 1e-14);
        }
        let w = v.window(1, 3).unwrap();
        assert_eq!(w.time().steps(), 2);
        assert!((w.time().horizon() - 0.5).abs() < 1e-15);
        assert_eq!(w.slice(0), v.slice(1));
        assert!(v.window(3, 3).is_err());
    }

    #[test]
    fn rejects_non_finite_samples() {
        let grid = Grid::new(1, 8, 4.0).unwrap();
        let time = TimeGrid::new(1.0, 2).unwrap();
        assert!(SampledPotential::from_fn(&grid, time, |_, x| 1.0 / x[0].abs().min(0.0)).is_err());
    }

    #[test]
    fn trajectory_shape_checks() {
        let grid = Grid::new(1, 8, 4.0).unwrap();
        let time = TimeGrid::new(1.0, 2).unwrap();
        assert!(Trajectory::new(time, vec![StateVector::zeros(&grid); 2]).is_err());
        let other = Grid::new(1, 16, 4.0).unwrap();
        let mixed = vec![StateVector::zeros(&grid), StateVector::zeros(&other), StateVector::zeros(&grid)];
        assert!(Trajectory::new(time, mixed).is_err());
    }
}
