//! One function per experiment kind; each turns a scenario into tables.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context as _, Result};
use frechet_core::banach::{mixed_norm, t_star};
use frechet_core::estimates::{
    compute_cv, convergence_study, estimate_c0, estimate_cq, partition_interval, verify_difference_bound,
    verify_frechet_bound, PotentialEnsemble, SlopeFit,
};
use frechet_core::propagation::{solve_mild, solve_strang};
use frechet_core::response::{
    delta_density, delta_psi_from, density, expectation_difference_series, gateaux_fd_from, internal_force_density,
    kernel_delta_density, kubo_series, response_kernel,
};
use frechet_core::{
    EmpiricalConstants, ExponentFamily, Grid, ObservableOperator, PicardConfig, SampledPotential, StateEnsemble,
    StateVector, TimeGrid,
};

use crate::config::{build_initial, sample_field, static_field, Experiment, FieldSpec, InitialSpec, ObservableSpec, Scenario};
use crate::output::{Cell, Table};

/// Everything an experiment produces besides files it names itself.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub data: Table,
    pub summary: Table,
    /// Additional CSV files, by file name.
    pub extra: Vec<(String, Table)>,
    pub constants: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    /// Bound violations; nonzero turns into exit code 2.
    pub violations: usize,
    /// `(log_x, log_y)` axes for the optional plot.
    pub plot_axes: (bool, bool),
}

/// Resolved inputs shared by all experiments.
pub struct Context<'a> {
    pub scenario: &'a Scenario,
    pub base: &'a Path,
    pub seed: u64,
    pub grid: Grid,
    pub time: TimeGrid,
    pub family: Option<ExponentFamily>,
    constants: Option<(f64, f64)>,
    pub out: RunOutput,
}

impl<'a> Context<'a> {
    pub fn new(scenario: &'a Scenario, base: &'a Path, seed: u64) -> Result<Self> {
        Ok(Self {
            scenario,
            base,
            seed,
            grid: scenario.build_grid()?,
            time: scenario.build_time()?,
            family: scenario.family()?,
            constants: None,
            out: RunOutput::default(),
        })
    }

    fn family(&self) -> Result<&ExponentFamily> {
        self.family
            .as_ref()
            .context("this experiment needs an [exponents] table")
    }

    /// Samples a field; with two particles the expression is one-body and
    /// the sampled field is `f(t,x) + f(t,y)`.
    fn field(&self, spec: &FieldSpec, what: &str) -> Result<SampledPotential> {
        if self.scenario.particles == 2 {
            let one = self.one_body(spec, what)?;
            let n = self.grid.points_per_dim();
            let values = (0..self.time.samples())
                .flat_map(|j| {
                    let s = one.slice(j);
                    (0..n * n).map(move |i| s[i / n] + s[i % n])
                })
                .collect();
            Ok(SampledPotential::new(self.grid.clone(), self.time, values)?)
        } else {
            sample_field(spec, &self.grid, self.time, self.base, what)
        }
    }

    fn one_body(&self, spec: &FieldSpec, what: &str) -> Result<SampledPotential> {
        let grid = if self.scenario.particles == 2 { self.grid.axis_grid() } else { self.grid.clone() };
        sample_field(spec, &grid, self.time, self.base, what)
    }

    fn v(&self) -> Result<SampledPotential> {
        self.field(&self.scenario.potential, "potential")
    }

    fn w(&self) -> Result<SampledPotential> {
        Ok(self.field(&self.scenario.perturbation, "perturbation")?.scaled(self.scenario.params.w_scale))
    }

    fn initial(&self, spec: Option<&InitialSpec>) -> Result<StateVector> {
        build_initial(spec.unwrap_or(&self.scenario.initial), &self.grid, self.scenario.particles, self.base)
    }

    /// `(C₀, C_Q)`: fixed values from the config or seeded ensemble maxima.
    fn constants(&mut self) -> Result<(f64, f64)> {
        if let Some(c) = self.constants {
            return Ok(c);
        }
        let family = self.family()?.clone();
        let spec = &self.scenario.constants;
        let states = StateEnsemble::new(self.seed).generate(&self.grid, spec.states)?;
        let c0 = match spec.c0 {
            Some(c) => c,
            None => {
                let e = estimate_c0(&family, &self.grid, self.time, &StateEnsemble::new(self.seed), spec.states)?;
                self.out.notes.push(format!("C0 = {:.6e} over {} states, witness {}", e.value, e.ensemble_size, e.witness));
                e.value
            }
        };
        let c_q = match spec.c_q {
            Some(c) => c,
            None => {
                let pots = PotentialEnsemble::new(self.seed.wrapping_add(1), spec.potential_amplitude).generate(
                    &self.grid,
                    self.time,
                    spec.potentials,
                )?;
                let e = estimate_cq(&family, &self.grid, self.time, &pots, &states)?;
                self.out.notes.push(format!("CQ = {:.6e} over {} pairs, witness {}", e.value, e.ensemble_size, e.witness));
                e.value
            }
        };
        self.out.constants.insert("c0".into(), c0);
        self.out.constants.insert("c_q".into(), c_q);
        self.constants = Some((c0, c_q));
        Ok((c0, c_q))
    }

    fn picard(&mut self) -> Result<PicardConfig> {
        let needs_cq = matches!(&self.scenario.picard.subintervals, crate::config::SubintervalSpec::Mode(_));
        let c_q = if needs_cq { Some(self.constants()?.1) } else { None };
        self.scenario.picard(|| c_q.context("C_Q unavailable"))
    }

    fn observation_index(&self) -> Result<usize> {
        let t = self.scenario.params.t.unwrap_or(self.time.horizon());
        Ok(self.time.index_of(t)?)
    }

    fn stride(&self) -> usize {
        self.scenario.params.stride.max(1)
    }

    fn rows(&self) -> impl Iterator<Item = usize> {
        let last = self.time.steps();
        let stride = self.stride();
        (0..=last).filter(move |j| j % stride == 0 || *j == last)
    }
}

pub fn run(ctx: &mut Context) -> Result<()> {
    match ctx.scenario.experiment {
        Experiment::Solve => solve(ctx),
        Experiment::Delta => delta(ctx),
        Experiment::Kubo => kubo(ctx),
        Experiment::Density => density_experiment(ctx),
        Experiment::Kernel => kernel(ctx),
        Experiment::Qfield => qfield(ctx),
        Experiment::VerifyBounds => verify_bounds(ctx),
        Experiment::Convergence => convergence(ctx),
        Experiment::EstimateConstants => estimate_constants(ctx),
    }
}

fn solve(ctx: &mut Context) -> Result<()> {
    let v = ctx.v()?;
    let psi0 = ctx.initial(None)?;
    let cfg = ctx.picard()?;
    let sol = solve_mild(&v, &psi0, &cfg)?;
    let traj = &sol.trajectory;
    let substeps = ctx.scenario.params.strang_substeps;
    let strang = if substeps > 0 {
        Some(solve_strang(&v, &psi0, ctx.time.dt() / substeps as f64)?)
    } else {
        None
    };

    let mut header = vec!["t", "norm", "mean_x", "variance_x"];
    if strang.is_some() {
        header.push("mild_minus_strang");
    }
    let mut data = Table::new(&header);
    let norm0 = psi0.l2_norm();
    let mut drift = 0.0f64;
    let mut gap = 0.0f64;
    for j in 0..=ctx.time.steps() {
        let s = traj.state(j);
        drift = drift.max((s.l2_norm() - norm0).abs() / norm0);
        let d = strang.as_ref().map(|st| st.state(j).difference(s).map(|d| d.l2_norm())).transpose()?;
        if let Some(d) = d {
            gap = gap.max(d);
        }
        if ctx.rows().any(|r| r == j) {
            let (mean, var) = s.position_moments(0);
            let mut row: Vec<Cell> = vec![ctx.time.time(j).into(), s.l2_norm().into(), mean.into(), var.into()];
            if let Some(d) = d {
                row.push(d.into());
            }
            data.push(row);
        }
    }
    let mut summary = vec![
        ("norm_drift", drift.into()),
        ("subintervals", sol.report.subintervals.len().into()),
        ("iterations", sol.report.total_iterations().into()),
        ("max_contraction", sol.report.max_contraction().into()),
    ];
    if strang.is_some() {
        summary.push(("mild_minus_strang_sup", gap.into()));
    }
    if let Some(fam) = &ctx.family {
        let norm = mixed_norm(traj, fam.q().value(), fam.theta().value())?;
        summary.push(("mixed_norm_q_theta", norm.into()));
        summary.push(("t_star", t_star(ctx.time.horizon(), fam)?.into()));
    }
    ctx.out.data = data;
    ctx.out.summary = Table::record(summary);
    Ok(())
}

fn delta(ctx: &mut Context) -> Result<()> {
    let (v, w) = (ctx.v()?, ctx.w()?);
    let psi0 = ctx.initial(None)?;
    let cfg = ctx.picard()?;
    let base = solve_mild(&v, &psi0, &cfg)?.trajectory;
    let d = delta_psi_from(&v, &w, &base, &cfg)?;
    let lambda = ctx.scenario.params.lambda;
    let fd = gateaux_fd_from(&v, &w, &psi0, &base, lambda, &cfg)?;
    let remainder = fd.difference(&d)?;
    let mut data = Table::new(&["t", "delta_psi_norm", "fd_residual"]);
    for j in ctx.rows() {
        data.push(vec![
            ctx.time.time(j).into(),
            d.state(j).l2_norm().into(),
            remainder.state(j).l2_norm().into(),
        ]);
    }
    let mut summary = vec![
        ("lambda", lambda.into()),
        ("w_scale", ctx.scenario.params.w_scale.into()),
        ("delta_psi_sup", d.sup_l2().into()),
        ("fd_residual", remainder.sup_l2().into()),
    ];
    if let Some(fam) = &ctx.family {
        summary.push(("t_star", t_star(ctx.time.horizon(), fam)?.into()));
        summary.push(("delta_psi_mixed", mixed_norm(&d, fam.q().value(), fam.theta().value())?.into()));
    }
    ctx.out.data = data;
    ctx.out.summary = Table::record(summary);
    Ok(())
}

fn observable(ctx: &Context, psi0: &StateVector) -> Result<ObservableOperator> {
    Ok(match &ctx.scenario.params.observable {
        ObservableSpec::Projector => ObservableOperator::projector(psi0)?,
        ObservableSpec::Identity => ObservableOperator::identity(&ctx.grid),
        ObservableSpec::Field { expr } => ObservableOperator::field(&ctx.grid, static_field(expr, &ctx.grid)?)?,
    })
}

fn kubo(ctx: &mut Context) -> Result<()> {
    let (v, w) = (ctx.v()?, ctx.w()?);
    let psi0 = ctx.initial(None)?;
    let cfg = ctx.picard()?;
    let a = observable(ctx, &psi0)?;
    let lambda = ctx.scenario.params.lambda;
    let series = kubo_series(&a, &v, &w, &psi0, &cfg)?;
    let fd = expectation_difference_series(&a, &v, &w, &psi0, lambda, &cfg)?;
    let identity = kubo_series(&ObservableOperator::identity(&ctx.grid), &v, &w, &psi0, &cfg)?;
    let mut data = Table::new(&["t", "kubo", "finite_difference", "abs_error", "identity"]);
    for j in ctx.rows() {
        data.push(vec![
            ctx.time.time(j).into(),
            series[j].into(),
            fd[j].into(),
            (series[j] - fd[j]).abs().into(),
            identity[j].into(),
        ]);
    }
    let j = ctx.observation_index()?;
    let rel = (series[j] - fd[j]).abs() / series[j].abs().max(f64::MIN_POSITIVE);
    ctx.out.data = data;
    ctx.out.summary = Table::record(vec![
        ("t", ctx.time.time(j).into()),
        ("lambda", lambda.into()),
        ("kubo", series[j].into()),
        ("finite_difference", fd[j].into()),
        ("relative_error", rel.into()),
        ("identity_max_abs", identity.iter().fold(0.0f64, |m, x| m.max(x.abs())).into()),
    ]);
    Ok(())
}

fn density_experiment(ctx: &mut Context) -> Result<()> {
    let (v, w) = (ctx.v()?, ctx.w()?);
    let psi0 = ctx.initial(None)?;
    let cfg = ctx.picard()?;
    let n_particles = ctx.scenario.particles;
    let j = ctx.observation_index()?;
    let t = ctx.time.time(j);
    let lambda = ctx.scenario.params.lambda;
    let base = solve_mild(&v, &psi0, &cfg)?.trajectory;
    let shifted = solve_mild(&v.plus_scaled(lambda, &w)?, &psi0, &cfg)?.trajectory;
    let n = density(base.state(j), n_particles)?;
    let n_shift = density(shifted.state(j), n_particles)?;
    let dn = delta_density(&v, &w, &psi0, t, n_particles, &cfg)?;
    let fd: Vec<f64> = n_shift
        .field
        .values
        .iter()
        .zip(&n.field.values)
        .map(|(a, b)| (a - b) / lambda)
        .collect();
    let single = &n.field.grid;
    let mut data = Table::new(&["x", "y", "density", "delta_density", "fd_delta_density"]);
    for i in 0..single.len() {
        let x = single.coordinates(i);
        data.push(vec![x[0].into(), x[1].into(), n.field.values[i].into(), dn.values[i].into(), fd[i].into()]);
    }
    let fd_err = dn.values.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ctx.out.data = data;
    ctx.out.summary = Table::record(vec![
        ("t", t.into()),
        ("particles", n_particles.into()),
        ("density_integral", n.integral().into()),
        ("delta_density_integral", dn.integral().into()),
        ("delta_density_max_abs", dn.max_abs().into()),
        ("fd_max_abs_error", fd_err.into()),
        ("fd_relative_error", (fd_err / dn.max_abs().max(f64::MIN_POSITIVE)).into()),
    ]);
    Ok(())
}

fn kernel(ctx: &mut Context) -> Result<()> {
    let v = ctx.v()?;
    let w = ctx.w()?;
    let w_one = ctx.one_body(&ctx.scenario.perturbation, "perturbation")?.scaled(ctx.scenario.params.w_scale);
    let psi0 = ctx.initial(None)?;
    let cfg = ctx.picard()?;
    let n_particles = ctx.scenario.particles;
    let j = ctx.observation_index()?;
    let t = ctx.time.time(j);
    let direct = delta_density(&v, &w, &psi0, t, n_particles, &cfg)?;
    let routed = kernel_delta_density(&v, &psi0, &w_one, t, n_particles, &cfg)?;
    let mut data = Table::new(&["x", "y", "direct", "kernel_route"]);
    for i in 0..direct.grid.len() {
        let x = direct.grid.coordinates(i);
        data.push(vec![x[0].into(), x[1].into(), direct.values[i].into(), routed.values[i].into()]);
    }
    let scale = direct.max_abs().max(f64::MIN_POSITIVE);
    let diff = direct.values.iter().zip(&routed.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let s = ctx.scenario.params.s.unwrap_or(0.0);
    let k = response_kernel(&v, &psi0, t, s, n_particles, &cfg)?;
    let m = k.grid.len();
    let mut matrix = Table::new(&["x_index", "y_index", "chi"]);
    for (idx, value) in k.matrix.iter().enumerate() {
        matrix.push(vec![(idx / m).into(), (idx % m).into(), (*value).into()]);
    }
    ctx.out.extra.push(("kernel.csv".into(), matrix));
    ctx.out.data = data;
    ctx.out.summary = Table::record(vec![
        ("t", t.into()),
        ("s", k.s.into()),
        ("particles", n_particles.into()),
        ("max_abs_difference", diff.into()),
        ("relative_difference", (diff / scale).into()),
    ]);
    Ok(())
}

fn qfield(ctx: &mut Context) -> Result<()> {
    if ctx.scenario.particles != 1 {
        bail!("qfield supports a single particle");
    }
    let v = ctx.v()?;
    let psi0 = ctx.initial(None)?;
    let cfg = ctx.picard()?;
    let traj = solve_mild(&v, &psi0, &cfg)?.trajectory;
    let samples = internal_force_density(&v, &traj)?;
    let max_abs = |x: &[f64]| x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut data = Table::new(&["t", "q_max_abs", "d2n_max_abs", "divergence_max_abs"]);
    let (mut q_max, mut d2_max) = (0.0f64, 0.0f64);
    let stride = ctx.stride();
    for s in &samples {
        q_max = q_max.max(max_abs(&s.q));
        d2_max = d2_max.max(max_abs(&s.second_time_derivative));
        if s.index % stride == 0 {
            data.push(vec![
                s.t.into(),
                max_abs(&s.q).into(),
                max_abs(&s.second_time_derivative).into(),
                max_abs(&s.divergence).into(),
            ]);
        }
    }
    ctx.out.data = data;
    ctx.out.summary = Table::record(vec![
        ("interior_samples", samples.len().into()),
        ("q_max_abs", q_max.into()),
        ("d2n_max_abs", d2_max.into()),
    ]);
    Ok(())
}

fn verify_bounds(ctx: &mut Context) -> Result<()> {
    let family = ctx.family()?.clone();
    let (c0, c_q) = ctx.constants()?;
    let constants = EmpiricalConstants::new(c0, c_q);
    let cfg = ctx.picard()?;
    let cases: Vec<(String, FieldSpec, FieldSpec, Option<InitialSpec>)> = if ctx.scenario.cases.is_empty() {
        vec![(
            ctx.scenario.name.clone(),
            ctx.scenario.potential.clone(),
            ctx.scenario.perturbation.clone(),
            None,
        )]
    } else {
        ctx.scenario
            .cases
            .iter()
            .map(|c| (c.name.clone(), c.potential.clone(), c.perturbation.clone(), c.initial.clone()))
            .collect()
    };
    let mut data = Table::new(&[
        "case", "bound", "lhs", "rhs", "slack", "satisfied", "subintervals", "prefactor", "w_norm",
    ]);
    let mut violations = 0;
    let mut min_ratio = f64::INFINITY;
    for (name, vs, ws, init) in &cases {
        let v = ctx.field(vs, "potential").with_context(|| format!("case {name}"))?;
        let w = ctx
            .field(ws, "perturbation")
            .with_context(|| format!("case {name}"))?
            .scaled(ctx.scenario.params.w_scale);
        let psi0 = ctx.initial(init.as_ref())?;
        let reports = [
            ("frechet", verify_frechet_bound(&v, &w, &psi0, &family, &constants, &cfg)),
            ("difference", verify_difference_bound(&v, &w, &psi0, &family, &constants, &cfg)),
        ];
        for (bound, report) in reports {
            let r = report.with_context(|| format!("case {name}, {bound} bound"))?;
            if !r.satisfied {
                violations += 1;
                log::warn!("case {name}: {bound} bound violated ({:.6e} > {:.6e})", r.lhs, r.rhs);
            }
            if r.rhs > 0.0 {
                min_ratio = min_ratio.min(r.slack / r.rhs);
            }
            let m = r.meta.samples.iter().map(|s| s.1).max().unwrap_or(0);
            data.push(vec![
                name.as_str().into(),
                bound.into(),
                r.lhs.into(),
                r.rhs.into(),
                r.slack.into(),
                r.satisfied.into(),
                m.into(),
                r.meta.prefactor.into(),
                r.meta.w_norm.into(),
            ]);
        }
    }
    ctx.out.notes.push("difference-bound prefactor sampled at λ ∈ {0, 0.5, 1}".into());
    ctx.out.violations = violations;
    ctx.out.data = data;
    ctx.out.summary = Table::record(vec![
        ("cases", cases.len().into()),
        ("checks", (2 * cases.len()).into()),
        ("violations", violations.into()),
        ("c0", c0.into()),
        ("c_q", c_q.into()),
        ("t_star", t_star(ctx.time.horizon(), &family)?.into()),
        ("min_relative_slack", if min_ratio.is_finite() { min_ratio } else { 0.0 }.into()),
    ]);
    Ok(())
}

fn convergence(ctx: &mut Context) -> Result<()> {
    let (v, w) = (ctx.v()?, ctx.w()?);
    let psi0 = ctx.initial(None)?;
    let cfg = ctx.picard()?;
    let study = convergence_study(&v, &w, &psi0, &ctx.scenario.params.lambdas, &cfg)?;
    let mut data = Table::new(&["lambda", "residual"]);
    for r in &study.rows {
        data.push(vec![r.lambda.into(), r.residual.into()]);
    }
    let (status, slope, points) = match study.fit {
        SlopeFit::Slope { slope, points, .. } => ("fitted", slope, points),
        SlopeFit::Saturated => ("saturated", f64::NAN, 0),
    };
    ctx.out.data = data;
    ctx.out.plot_axes = (true, true);
    ctx.out.summary = Table::record(vec![
        ("status", status.into()),
        ("slope", slope.into()),
        ("points", points.into()),
        ("derivative_norm", study.derivative_norm.into()),
        ("floor", study.floor.into()),
    ]);
    Ok(())
}

fn estimate_constants(ctx: &mut Context) -> Result<()> {
    let family = ctx.family()?.clone();
    let spec = ctx.scenario.constants.clone();
    let ens = StateEnsemble::new(ctx.seed);
    let states = ens.generate(&ctx.grid, spec.states)?;
    let c0 = estimate_c0(&family, &ctx.grid, ctx.time, &ens, spec.states)?;
    let pots = PotentialEnsemble::new(ctx.seed.wrapping_add(1), spec.potential_amplitude).generate(
        &ctx.grid,
        ctx.time,
        spec.potentials,
    )?;
    let cq = estimate_cq(&family, &ctx.grid, ctx.time, &pots, &states)?;
    let mut data = Table::new(&["constant", "value", "ensemble_size", "witness"]);
    for e in [&c0, &cq] {
        data.push(vec![e.kind.to_string().into(), e.value.into(), e.ensemble_size.into(), e.witness.clone().into()]);
    }
    let mut summary = vec![("c0", c0.value.into()), ("c_q", cq.value.into())];
    let v = ctx.v()?;
    let part = partition_interval(&v, &family, cq.value)?;
    let cv = compute_cv(part.count, family.theta().value(), c0.value)?;
    data.push(vec!["Cv".into(), cv.into(), 1usize.into(), ctx.scenario.name.clone().into()]);
    summary.push(("subintervals", part.count.into()));
    summary.push(("partition_satisfied", part.satisfied.into()));
    summary.push(("c_v", cv.into()));
    ctx.out.constants.insert("c0".into(), c0.value);
    ctx.out.constants.insert("c_q".into(), cq.value);
    ctx.out.constants.insert("c_v".into(), cv);
    ctx.out.data = data;
    ctx.out.summary = Table::record(summary);
    Ok(())
}

/// Largest relative norm drift of the base evolution, per case (or for the
/// top-level potential when the scenario has no cases).
pub fn norm_drifts(ctx: &mut Context) -> Result<Vec<(String, f64)>> {
    let cfg = ctx.picard()?;
    let mut inputs = vec![(ctx.scenario.name.clone(), ctx.scenario.potential.clone(), None)];
    if !ctx.scenario.cases.is_empty() {
        inputs = ctx
            .scenario
            .cases
            .iter()
            .map(|c| (c.name.clone(), c.potential.clone(), c.initial.clone()))
            .collect();
    }
    inputs
        .into_iter()
        .map(|(name, vs, init)| {
            let v = ctx.field(&vs, "potential")?;
            let psi0 = ctx.initial(init.as_ref())?;
            let traj = solve_mild(&v, &psi0, &cfg)?.trajectory;
            let n0 = psi0.l2_norm();
            let drift = traj.states().iter().map(|s| (s.l2_norm() - n0).abs() / n0).fold(0.0, f64::max);
            Ok((name, drift))
        })
        .collect()
}
