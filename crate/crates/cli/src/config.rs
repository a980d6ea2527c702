//! Scenario files: one TOML document per run.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use frechet_core::banach::{derive_family, Exponent};
use frechet_core::{Complex64, ExponentFamily, Grid, PicardConfig, SampledPotential, StateVector, Subintervals, TimeGrid};
use serde::{Deserialize, Serialize};

use crate::expr::Expr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Solve,
    Delta,
    Kubo,
    Density,
    Kernel,
    Qfield,
    VerifyBounds,
    Convergence,
    EstimateConstants,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSpec,
    pub time: TimeSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default = "zero_field")]
    pub potential: FieldSpec,
    #[serde(default = "zero_field")]
    pub perturbation: FieldSpec,
    #[serde(default = "one")]
    pub particles: usize,
    #[serde(default)]
    pub picard: PicardSpec,
    pub exponents: Option<ExponentSpec>,
    #[serde(default)]
    pub constants: ConstantsSpec,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub cases: Vec<CaseSpec>,
    /// Output directory; the command line `--out` takes precedence.
    pub output: Option<PathBuf>,
}

fn zero_field() -> FieldSpec {
    FieldSpec::Expr("0".into())
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "one")]
    pub dims: usize,
    pub points: usize,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Gaussian packet; on a 2D grid with two particles, the symmetric
    /// product `φ⊗φ` of the 1D packet built from the first components.
    Gaussian {
        #[serde(default = "unit")]
        sigma: f64,
        #[serde(default)]
        center: [f64; 2],
        #[serde(default)]
        momentum: [f64; 2],
    },
    /// Ground state of the trap `ω²|x|²`, i.e. `∝ exp(−ω|x|²/2)`.
    Eigenstate {
        #[serde(default = "unit")]
        trap: f64,
    },
    /// Antisymmetrized pair of 1D Gaussians (two particles on a 2D grid).
    Slater {
        #[serde(default = "unit")]
        sigma: f64,
        centers: [f64; 2],
        #[serde(default)]
        momentum: f64,
    },
    /// Amplitudes from a CSV file with columns `re,im`, one row per site.
    File { path: PathBuf },
}

fn unit() -> f64 {
    1.0
}

impl Default for InitialSpec {
    fn default() -> Self {
        Self::Gaussian {
            sigma: 1.0,
            center: [0.0; 2],
            momentum: [0.0; 2],
        }
    }
}

/// Closed-form expression over `t, x, y`, or samples from a CSV file
/// (one value per line, time-major).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Expr(String),
    File { file: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SubintervalSpec {
    Count(usize),
    Mode(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSpec {
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_subintervals")]
    pub subintervals: SubintervalSpec,
}

fn default_tolerance() -> f64 {
    1e-13
}

fn default_iterations() -> usize {
    500
}

fn default_subintervals() -> SubintervalSpec {
    SubintervalSpec::Count(1)
}

impl Default for PicardSpec {
    fn default() -> Self {
        Self {
            tolerance: default_tolerance(),
            max_iterations: default_iterations(),
            subintervals: default_subintervals(),
        }
    }
}

/// Exponent given as a number, `"inf"`, or an exact ratio such as `"8/3"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExponentValue {
    Number(f64),
    Text(String),
}

impl ExponentValue {
    pub fn to_exponent(&self) -> Result<Exponent> {
        Ok(match self {
            Self::Number(v) => Exponent::from_f64(*v)?,
            Self::Text(s) => {
                let s = s.trim();
                if matches!(s, "inf" | "infinity" | "∞") {
                    Exponent::infinite()
                } else if let Some((a, b)) = s.split_once('/') {
                    let num: i64 = a.trim().parse().with_context(|| format!("bad exponent {s:?}"))?;
                    let den: i64 = b.trim().parse().with_context(|| format!("bad exponent {s:?}"))?;
                    if den <= 0 || num <= 0 {
                        bail!("exponent {s:?} must be a positive ratio");
                    }
                    Exponent::ratio(num, den)
                } else {
                    Exponent::from_f64(s.parse().with_context(|| format!("bad exponent {s:?}"))?)?
                }
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentSpec {
    /// Spatial dimension entering admissibility; defaults to the grid's.
    pub n: Option<usize>,
    pub q: ExponentValue,
    pub alpha: ExponentValue,
    pub beta: ExponentValue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSpec {
    /// Fixed values skip the ensemble estimate.
    pub c0: Option<f64>,
    pub c_q: Option<f64>,
    #[serde(default = "default_states")]
    pub states: usize,
    #[serde(default = "default_potentials")]
    pub potentials: usize,
    #[serde(default = "unit")]
    pub potential_amplitude: f64,
}

fn default_states() -> usize {
    12
}

fn default_potentials() -> usize {
    3
}

impl Default for ConstantsSpec {
    fn default() -> Self {
        Self {
            c0: None,
            c_q: None,
            states: default_states(),
            potentials: default_potentials(),
            potential_amplitude: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Observation time; defaults to the horizon.
    pub t: Option<f64>,
    /// Source time of the response kernel; defaults to 0.
    pub s: Option<f64>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    /// Multiplies the perturbation.
    #[serde(default = "unit")]
    pub w_scale: f64,
    #[serde(default)]
    pub observable: ObservableSpec,
    /// Split-step substeps per sample for the reference solve; 0 disables it.
    #[serde(default)]
    pub strang_substeps: usize,
    /// Row stride for time-series CSV output.
    #[serde(default = "one")]
    pub stride: usize,
}

fn default_lambda() -> f64 {
    1e-4
}

fn default_lambdas() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3, 1e-4]
}

impl Default for Params {
    fn default() -> Self {
        Self {
            t: None,
            s: None,
            lambda: default_lambda(),
            lambdas: default_lambdas(),
            w_scale: 1.0,
            observable: ObservableSpec::default(),
            strang_substeps: 0,
            stride: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObservableSpec {
    /// Projector onto the initial state.
    Projector,
    Identity,
    Field { expr: String },
}

impl Default for ObservableSpec {
    fn default() -> Self {
        Self::Projector
    }
}

/// One entry of a verify-bounds suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSpec {
    pub name: String,
    pub potential: FieldSpec,
    pub perturbation: FieldSpec,
    pub initial: Option<InitialSpec>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<(Self, toml::Value)> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let raw: toml::Value = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let scenario = Self::from_value(raw.clone()).with_context(|| format!("validating {}", path.display()))?;
        Ok((scenario, raw))
    }

    pub fn from_value(raw: toml::Value) -> Result<Self> {
        let text = toml::to_string(&raw)?;
        let scenario: Scenario = toml::from_str(&text)?;
        Ok(scenario)
    }

    pub fn build_grid(&self) -> Result<Grid> {
        Ok(Grid::new(self.grid.dims, self.grid.points, self.grid.length)?)
    }

    pub fn build_time(&self) -> Result<TimeGrid> {
        Ok(TimeGrid::new(self.time.horizon, self.time.steps)?)
    }

    pub fn family(&self) -> Result<Option<ExponentFamily>> {
        self.exponents
            .as_ref()
            .map(|e| {
                let n = e.n.unwrap_or(self.grid.dims);
                Ok(derive_family(n, e.q.to_exponent()?, e.alpha.to_exponent()?, e.beta.to_exponent()?)?)
            })
            .transpose()
    }

    /// Picard settings; automatic partitioning needs exponents and `C_Q`.
    pub fn picard(&self, c_q: impl FnOnce() -> Result<f64>) -> Result<PicardConfig> {
        let subintervals = match &self.picard.subintervals {
            SubintervalSpec::Count(m) => Subintervals::Fixed(*m),
            SubintervalSpec::Mode(mode) if mode == "auto" => {
                let family = self
                    .family()?
                    .context("picard.subintervals = \"auto\" needs an [exponents] table")?;
                Subintervals::Automatic { family, c_q: c_q()? }
            }
            SubintervalSpec::Mode(other) => bail!("picard.subintervals must be a count or \"auto\", got {other:?}"),
        };
        Ok(PicardConfig::new(self.picard.tolerance, self.picard.max_iterations, subintervals)?)
    }

    pub fn base_dir(config: &Path) -> PathBuf {
        config.parent().map(Path::to_path_buf).unwrap_or_default()
    }
}

pub fn sample_field(spec: &FieldSpec, grid: &Grid, time: TimeGrid, base: &Path, what: &str) -> Result<SampledPotential> {
    match spec {
        FieldSpec::Expr(src) => {
            let expr = Expr::parse(src).map_err(|e| anyhow::anyhow!("{what} expression {src:?}: {e}"))?;
            let pot = SampledPotential::from_fn(grid, time, |t, x| expr.eval(t, x[0], x[1]))
                .with_context(|| format!("{what} expression {src:?} is not finite on the grid"))?;
            Ok(pot)
        }
        FieldSpec::File { file } => {
            let values = read_column_file(&base.join(file), 1)?.into_iter().map(|r| r[0]).collect();
            Ok(SampledPotential::new(grid.clone(), time, values).with_context(|| format!("{what} samples"))?)
        }
    }
}

/// Static field on the grid at `t = 0`.
pub fn static_field(src: &str, grid: &Grid) -> Result<Vec<f64>> {
    let expr = Expr::parse(src).map_err(|e| anyhow::anyhow!("field expression {src:?}: {e}"))?;
    Ok((0..grid.len())
        .map(|i| {
            let x = grid.coordinates(i);
            expr.eval(0.0, x[0], x[1])
        })
        .collect())
}

fn read_column_file(path: &Path, columns: usize) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != columns {
            bail!("{}: row {} has {} columns, expected {columns}", path.display(), line + 1, record.len());
        }
        let row = record
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("{}: row {}", path.display(), line + 1))?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn build_initial(spec: &InitialSpec, grid: &Grid, particles: usize, base: &Path) -> Result<StateVector> {
    let pair = particles == 2;
    if pair && grid.n_dim() != 2 {
        bail!("two particles need a 2D grid (one axis per particle)");
    }
    if !(1..=2).contains(&particles) {
        bail!("particles must be 1 or 2, got {particles}");
    }
    let state = match spec {
        InitialSpec::Gaussian { sigma, center, momentum } => {
            if pair {
                let phi = StateVector::gaussian(&grid.axis_grid(), *sigma, *center, *momentum)?;
                product(grid, &phi, &phi, 1.0)?
            } else {
                StateVector::gaussian(grid, *sigma, *center, *momentum)?
            }
        }
        InitialSpec::Eigenstate { trap } => {
            if !(*trap > 0.0) {
                bail!("trap frequency must be positive");
            }
            StateVector::from_fn(grid, |x| Complex64::new((-trap * (x[0] * x[0] + x[1] * x[1]) / 2.0).exp(), 0.0))?
                .normalized()?
        }
        InitialSpec::Slater { sigma, centers, momentum } => {
            if !pair {
                bail!("a Slater initial state needs particles = 2");
            }
            let axis = grid.axis_grid();
            let a = StateVector::gaussian(&axis, *sigma, [centers[0], 0.0], [*momentum, 0.0])?;
            let b = StateVector::gaussian(&axis, *sigma, [centers[1], 0.0], [-*momentum, 0.0])?;
            let mut s = product(grid, &a, &b, 1.0)?;
            s.add_scaled(Complex64::new(-1.0, 0.0), &product(grid, &b, &a, 1.0)?)?;
            s.normalized()
                .context("Slater pair vanishes; use distinct centres or momenta")?
        }
        InitialSpec::File { path } => {
            let rows = read_column_file(&base.join(path), 2)?;
            StateVector::new(grid.clone(), rows.into_iter().map(|r| Complex64::new(r[0], r[1])).collect())?
        }
    };
    if state.l2_norm() == 0.0 {
        bail!("initial state has zero norm");
    }
    Ok(state)
}

fn product(grid: &Grid, a: &StateVector, b: &StateVector, scale: f64) -> Result<StateVector> {
    let n = grid.points_per_dim();
    let amps = (0..n * n)
        .map(|i| a.amplitudes()[i / n] * b.amplitudes()[i % n] * scale)
        .collect();
    Ok(StateVector::new(grid.clone(), amps)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "free"
experiment = "solve"
[grid]
points = 64
length = 20.0
[time]
horizon = 1.0
steps = 10
"#;

    #[test]
    fn minimal_config_defaults() {
        let raw: toml::Value = toml::from_str(MINIMAL).unwrap();
        let s = Scenario::from_value(raw).unwrap();
        assert_eq!(s.grid.dims, 1);
        assert_eq!(s.particles, 1);
        assert_eq!(s.potential, FieldSpec::Expr("0".into()));
        assert_eq!(s.picard, PicardSpec::default());
        assert_eq!(s.params.lambdas.len(), 4);
        assert!(s.family().unwrap().is_none());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let raw: toml::Value = toml::from_str(&format!("{MINIMAL}\nbogus = 1\n")).unwrap();
        assert!(Scenario::from_value(raw).is_err());
    }

    #[test]
    fn exponent_values() {
        assert!(ExponentValue::Text("inf".into()).to_exponent().unwrap().is_infinite());
        assert_eq!(ExponentValue::Text("8/3".into()).to_exponent().unwrap(), Exponent::ratio(8, 3));
        assert_eq!(ExponentValue::Number(4.0).to_exponent().unwrap(), Exponent::integer(4));
        assert!(ExponentValue::Text("x/3".into()).to_exponent().is_err());
        assert!(ExponentValue::Text("-1/3".into()).to_exponent().is_err());
    }

    #[test]
    fn initial_states() {
        let grid = Grid::new(2, 16, 10.0).unwrap();
        let slater = InitialSpec::Slater {
            sigma: 1.0,
            centers: [-1.0, 1.0],
            momentum: 0.0,
        };
        let s = build_initial(&slater, &grid, 2, Path::new(".")).unwrap();
        assert!((s.l2_norm() - 1.0).abs() < 1e-12);
        let n = 16;
        for i in 0..n {
            for j in 0..n {
                let d = s.amplitudes()[i * n + j] + s.amplitudes()[j * n + i];
                assert!(d.norm() < 1e-14);
            }
        }
        assert!(build_initial(&slater, &grid, 1, Path::new(".")).is_err());
        let line = Grid::new(1, 16, 10.0).unwrap();
        assert!(build_initial(&InitialSpec::default(), &line, 2, Path::new(".")).is_err());
        let eig = build_initial(&InitialSpec::Eigenstate { trap: 1.0 }, &line, 1, Path::new(".")).unwrap();
        assert!((eig.l2_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fields_from_expressions() {
        let grid = Grid::new(1, 8, 4.0).unwrap();
        let time = TimeGrid::new(1.0, 2).unwrap();
        let v = sample_field(&FieldSpec::Expr("x + t".into()), &grid, time, Path::new("."), "v").unwrap();
        assert_eq!(v.slice(2)[0], 1.0 + grid.axis_positions()[0]);
        assert!(sample_field(&FieldSpec::Expr("1/x".into()), &grid, time, Path::new("."), "v").is_err());
        assert!(sample_field(&FieldSpec::Expr("x +".into()), &grid, time, Path::new("."), "v").is_err());
    }
}
