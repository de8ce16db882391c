use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ucbf::harness::sweep::{figure1_config, Scale};
use ucbf::harness::{read_curves, render_chart, run_all, run_sweep, write_outputs, write_sweep, ExperimentConfig};
use ucbf::verify::verify_all;
use ucbf::Error;

#[derive(Parser)]
#[command(name = "ucbf", version, about = "Optimistic Q-learning experiments on additive-disturbance MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write CSVs, a chart and metadata.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads, 0 for all cores.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Run the grid over actions, horizons and error budgets in the config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Run the property checks and report one line per check.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Regenerate a preset experiment grid.
    Reproduce {
        figure: Figure,
        #[arg(long, value_enum, default_value_t = ScaleArg::Small)]
        scale: ScaleArg,
        #[arg(long, default_value = "figure1")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Render a chart from a runs or aggregate CSV.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        title: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    Figure1,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Small,
    Paper,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Small => Scale::Small,
            ScaleArg::Paper => Scale::Paper,
        }
    }
}

fn output_dir(out: Option<PathBuf>, cfg: &ExperimentConfig) -> Result<PathBuf, Error> {
    out.or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Error::Argument("no output directory: pass --out or set output_dir".into()))
}

fn sweep_into(cfg: &ExperimentConfig, root: &Path, threads: usize) -> Result<(), Error> {
    let cells = run_sweep(cfg, threads)?;
    for (dir, _) in write_sweep(&cells, root)? {
        println!("wrote {}", dir.display());
    }
    fs::write(root.join("config.toml"), cfg.to_toml()).map_err(|e| Error::Io { path: root.join("config.toml"), source: e })?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Run { config, out, threads } => {
            let cfg = ExperimentConfig::load(&config)?;
            if cfg.sweep.is_some() {
                return Err(Error::Config("config has a sweep grid; use the sweep command".into()));
            }
            let dir = output_dir(out, &cfg)?;
            let metrics = run_all(&cfg, threads)?;
            let files = write_outputs(&metrics, &cfg, &dir, &format!("S={}, A={}, H={}", cfg.gen.num_states, cfg.gen.num_actions, cfg.gen.horizon))?;
            println!("wrote {}", files.runs_csv.display());
            println!("wrote {}", files.aggregate_csv.display());
            println!("wrote {}", files.chart.display());
        }
        Command::Sweep { config, out, threads } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = output_dir(out, &cfg)?;
            sweep_into(&cfg, &dir, threads)?;
        }
        Command::Verify { seed } => {
            let results = verify_all(seed);
            for r in &results {
                println!("{r}");
            }
            return Ok(results.iter().all(|r| r.passed));
        }
        Command::Reproduce { figure: Figure::Figure1, scale, out, seed, threads } => {
            let cfg = figure1_config(scale.into(), seed);
            sweep_into(&cfg, &out, threads)?;
        }
        Command::Plot { csv, out, title } => {
            let curves = read_curves(&csv)?;
            let title = title.unwrap_or_else(|| csv.display().to_string());
            fs::write(&out, render_chart(&curves, &title)).map_err(|e| Error::Io { path: out.clone(), source: e })?;
            println!("wrote {}", out.display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
