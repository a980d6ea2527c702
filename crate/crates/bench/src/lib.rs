//! Shared fixtures for the benchmarks.

use frechet_core::{Grid, SampledPotential, StateVector, TimeGrid};

/// Moving packet over a smooth time-dependent bump on `points` sites.
pub fn fixture(points: usize, steps: usize) -> (SampledPotential, SampledPotential, StateVector) {
    let grid = Grid::new(1, points, 40.0).expect("valid grid");
    let time = TimeGrid::new(1.0, steps).expect("valid time grid");
    let v = SampledPotential::from_fn(&grid, time, |t, x| 0.5 * (-x[0] * x[0] / 2.0).exp() * (1.0 + t))
        .expect("finite potential");
    let w = SampledPotential::from_fn(&grid, time, |t, x| 0.3 * (x[0] / 2.0).cos() * t).expect("finite perturbation");
    let psi = StateVector::gaussian(&grid, 1.0, [0.0; 2], [1.0, 0.0]).expect("normalizable packet");
    (v, w, psi)
}
