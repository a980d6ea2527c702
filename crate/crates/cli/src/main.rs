use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use frechet_cli::RunOptions;

#[derive(Parser)]
#[command(name = "frechet", version, about = "Mild Schrödinger dynamics and functional-response experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (default: `out/<scenario name>`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    plots: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run { config: PathBuf },
    /// Run a scenario once per value of a dotted parameter path.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let opts = RunOptions {
        out: cli.out,
        seed: cli.seed,
        plots: cli.plots,
    };
    let result = match &cli.command {
        Command::Run { config } => frechet_cli::run(config, &opts).map(|o| {
            println!("{}", o.out_dir.display());
            o.exit_code()
        }),
        Command::Sweep { config, param, values } => frechet_cli::sweep(config, param, values, &opts).map(|(dir, outs)| {
            println!("{}", dir.display());
            outs.iter().map(|o| o.exit_code()).max().unwrap_or(0)
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
