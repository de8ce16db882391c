//! Seeded experiments: configuration, execution, metrics and artifacts.

pub mod config;
pub mod metrics;
pub mod output;
pub mod plot;
pub mod run;
pub mod sweep;

pub use config::{AgentKind, AgentSpec, ExperimentConfig, SweepGrid};
pub use metrics::{aggregate_runs, first_episode_below, fit_regret_slope, median, RunMetrics};
pub use output::{aggregate_by_agent, read_curves, write_aggregate_csv, write_outputs, AggregateCurve, OutputFiles};
pub use plot::render_chart;
pub use run::{build_agent, mdp_seed, play_episode, run_agent, run_all, run_experiment, RunContext};
pub use sweep::{figure1_config, plan_sweep, run_sweep, write_sweep, CellResult, Scale};
