//! Batch front end: scenario files in, CSV tables, a manifest and optional
//! SVG plots out.

pub mod config;
pub mod experiments;
pub mod expr;
pub mod output;
pub mod plot;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};

use crate::config::Scenario;
use crate::experiments::{Context, RunOutput};
use crate::output::{Manifest, Table};

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub plots: bool,
}

#[derive(Debug)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub output: RunOutput,
}

impl Outcome {
    /// 0 on success, 2 if any bound was violated.
    pub fn exit_code(&self) -> i32 {
        if self.output.violations > 0 {
            2
        } else {
            0
        }
    }
}

fn default_out(config: &Path, scenario: &Scenario) -> PathBuf {
    match &scenario.output {
        Some(dir) => Scenario::base_dir(config).join(dir),
        None => PathBuf::from("out").join(&scenario.name),
    }
}

/// Executes a parsed scenario and writes its artifacts into `out_dir`.
pub fn execute(scenario: &Scenario, raw: &toml::Value, base: &Path, out_dir: &Path, opts: &RunOptions) -> Result<Outcome> {
    let seed = opts.seed.unwrap_or(scenario.seed);
    let mut ctx = Context::new(scenario, base, seed)?;
    experiments::run(&mut ctx).with_context(|| format!("scenario {:?}", scenario.name))?;
    let output = ctx.out;

    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut files = vec!["data.csv".to_string(), "summary.csv".to_string()];
    output.data.write_csv(&out_dir.join("data.csv"))?;
    output.summary.write_csv(&out_dir.join("summary.csv"))?;
    for (name, table) in &output.extra {
        table.write_csv(&out_dir.join(name))?;
        files.push(name.clone());
    }
    if opts.plots {
        let (lx, ly) = output.plot_axes;
        if let Some(svg) = plot::line_chart(&output.data, &scenario.name, lx, ly) {
            std::fs::write(out_dir.join("plot.svg"), svg)?;
            files.push("plot.svg".into());
        }
    }
    files.push("manifest.toml".into());
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: scenario.name.clone(),
        seed,
        files,
        constants: output.constants.clone(),
        notes: output.notes.clone(),
        scenario: raw.clone(),
    };
    manifest.write(&out_dir.join("manifest.toml"))?;
    Ok(Outcome {
        out_dir: out_dir.to_path_buf(),
        output,
    })
}

pub fn run(config: &Path, opts: &RunOptions) -> Result<Outcome> {
    let (scenario, raw) = Scenario::load(config)?;
    let out_dir = opts.out.clone().unwrap_or_else(|| default_out(config, &scenario));
    execute(&scenario, &raw, &Scenario::base_dir(config), &out_dir, opts)
}

/// Replaces the value at a dotted path such as `params.lambda`.
pub fn set_path(raw: &mut toml::Value, path: &str, value: toml::Value) -> Result<()> {
    let mut node = raw;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, key) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .with_context(|| format!("{} is not a table", parts[..i].join(".")))?;
        if i + 1 == parts.len() {
            if let Some(existing) = table.get(*key) {
                if existing.is_table() || existing.is_array() {
                    bail!("{path} is not a scalar field");
                }
            }
            table.insert(key.to_string(), value);
            return Ok(());
        }
        node = table
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    unreachable!("split yields at least one part")
}

/// Parses a sweep value as a TOML scalar, falling back to a string.
pub fn parse_value(text: &str) -> toml::Value {
    let text = text.trim();
    toml::from_str::<toml::Table>(&format!("v = {text}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .filter(|v| !v.is_table() && !v.is_array())
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

/// One run per value in `<out>/<index>`, then `sweep.csv` merging the
/// summaries with a leading parameter column. Runs execute in parallel.
pub fn sweep(config: &Path, param: &str, values: &[String], opts: &RunOptions) -> Result<(PathBuf, Vec<Outcome>)> {
    use rayon::prelude::*;
    if values.is_empty() {
        bail!("sweep needs at least one value");
    }
    let (scenario, raw) = Scenario::load(config)?;
    let out_root = opts.out.clone().unwrap_or_else(|| default_out(config, &scenario));
    let base = Scenario::base_dir(config);
    let outcomes = values
        .par_iter()
        .enumerate()
        .map(|(i, value)| {
            let mut raw = raw.clone();
            set_path(&mut raw, param, parse_value(value))?;
            let scenario = Scenario::from_value(raw.clone()).with_context(|| format!("{param} = {value}"))?;
            execute(&scenario, &raw, &base, &out_root.join(format!("{i:03}")), opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let parts: Vec<(String, Table)> = values
        .iter()
        .zip(&outcomes)
        .map(|(v, o)| (v.clone(), o.output.summary.clone()))
        .collect();
    Table::merge(param, &parts)?.write_csv(&out_root.join("sweep.csv"))?;
    Ok((out_root, outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_paths() {
        let mut raw: toml::Value = toml::from_str("[params]\nlambda = 0.1\n[grid]\npoints = 8\n").unwrap();
        set_path(&mut raw, "params.lambda", parse_value("1e-3")).unwrap();
        assert_eq!(raw["params"]["lambda"].as_float(), Some(1e-3));
        set_path(&mut raw, "time.horizon", parse_value("2")).unwrap();
        assert_eq!(raw["time"]["horizon"].as_integer(), Some(2));
        assert!(set_path(&mut raw, "grid", parse_value("1")).is_err());
        assert!(set_path(&mut raw, "params.lambda.x", parse_value("1")).is_err());
        assert_eq!(parse_value("auto"), toml::Value::String("auto".into()));
        assert_eq!(parse_value("\"x^2\""), toml::Value::String("x^2".into()));
    }

    #[test]
    fn violations_map_to_exit_code_two() {
        let mut outcome = Outcome {
            out_dir: PathBuf::new(),
            output: RunOutput::default(),
        };
        assert_eq!(outcome.exit_code(), 0);
        outcome.output.violations = 3;
        assert_eq!(outcome.exit_code(), 2);
    }
}
