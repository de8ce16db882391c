use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::metrics::{aggregate_runs, RunMetrics};
use super::plot::render_chart;
use super::run::mdp_seed;
use crate::error::{Error, Result};

pub const RUNS_HEADER: [&str; 6] = ["agent", "run_index", "episode", "gap_at_s1", "gap_mu", "cum_regret"];
pub const AGGREGATE_HEADER: [&str; 5] = ["agent", "episode", "mean_gap", "std_gap", "mean_regret"];

/// Mean curves of one agent across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCurve {
    pub agent: String,
    pub episodes: Vec<usize>,
    pub mean_gap: Vec<f64>,
    pub std_gap: Vec<f64>,
    pub mean_regret: Vec<f64>,
}

/// Groups runs by agent label, in first-seen order, and averages each group.
pub fn aggregate_by_agent(metrics: &[RunMetrics]) -> Result<Vec<AggregateCurve>> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<&RunMetrics>> = HashMap::new();
    for m in metrics {
        let entry = groups.entry(&m.agent).or_default();
        if entry.is_empty() {
            order.push(&m.agent);
        }
        entry.push(m);
    }
    order
        .into_iter()
        .map(|agent| {
            let mut runs = groups.remove(agent).unwrap_or_default();
            runs.sort_by_key(|m| m.run_index);
            let episodes = runs[0].episodes.clone();
            if runs.iter().any(|m| m.episodes != episodes) {
                return Err(Error::Dimension(format!("runs of {agent} were evaluated at different episodes")));
            }
            let gaps: Vec<&[f64]> = runs.iter().map(|m| m.gap_mu.as_slice()).collect();
            let regrets: Vec<&[f64]> = runs.iter().map(|m| m.cum_regret.as_slice()).collect();
            let (mean_gap, std_gap) = aggregate_runs(&gaps)?;
            let (mean_regret, _) = aggregate_runs(&regrets)?;
            Ok(AggregateCurve {
                agent: agent.to_string(),
                episodes,
                mean_gap,
                std_gap,
                mean_regret,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFiles {
    pub runs_csv: PathBuf,
    pub aggregate_csv: PathBuf,
    pub chart: PathBuf,
    pub metadata: PathBuf,
    pub timing: PathBuf,
}

#[derive(Serialize)]
struct RunSeed {
    run_index: usize,
    mdp_seed: u64,
}

#[derive(Serialize)]
struct Metadata<'a> {
    generator: String,
    config: &'a ExperimentConfig,
    runs: Vec<RunSeed>,
}

#[derive(Serialize)]
struct AgentTiming {
    agent: String,
    mean_episode_seconds: f64,
    q_writes_per_run: f64,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the per-run CSV, the aggregated CSV, an SVG chart, the run
/// metadata and a timing summary into `dir`.
pub fn write_outputs(metrics: &[RunMetrics], cfg: &ExperimentConfig, dir: &Path, title: &str) -> Result<OutputFiles> {
    if metrics.is_empty() {
        return Err(Error::Argument("no runs to write".into()));
    }
    let curves = aggregate_by_agent(metrics)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let labels: Vec<String> = cfg.agents.iter().map(|a| a.label()).collect();
    let rank = |agent: &str| labels.iter().position(|l| l == agent).unwrap_or(usize::MAX);
    let mut sorted: Vec<&RunMetrics> = metrics.iter().collect();
    sorted.sort_by(|a, b| {
        (rank(&a.agent), &a.agent, a.run_index).cmp(&(rank(&b.agent), &b.agent, b.run_index))
    });

    let files = OutputFiles {
        runs_csv: dir.join("runs.csv"),
        aggregate_csv: dir.join("aggregate.csv"),
        chart: dir.join("chart.svg"),
        metadata: dir.join("metadata.json"),
        timing: dir.join("timing.json"),
    };

    let mut writer = csv::Writer::from_path(&files.runs_csv)?;
    writer.write_record(RUNS_HEADER)?;
    for m in &sorted {
        for i in 0..m.episodes.len() {
            writer.write_record([
                m.agent.clone(),
                m.run_index.to_string(),
                m.episodes[i].to_string(),
                m.gap_at_s1[i].to_string(),
                m.gap_mu[i].to_string(),
                m.cum_regret[i].to_string(),
            ])?;
        }
    }
    writer.flush().map_err(|e| Error::io(&files.runs_csv, e))?;

    let mut ordered = curves.clone();
    ordered.sort_by_key(|c| rank(&c.agent));
    write_aggregate_csv(&ordered, &files.aggregate_csv)?;
    write_text(&files.chart, &render_chart(&ordered, title))?;

    let metadata = Metadata {
        generator: format!("ucbf {}", env!("CARGO_PKG_VERSION")),
        config: cfg,
        runs: (0..cfg.num_runs)
            .map(|run_index| RunSeed {
                run_index,
                mdp_seed: mdp_seed(cfg, run_index),
            })
            .collect(),
    };
    write_text(&files.metadata, &serde_json::to_string_pretty(&metadata)?)?;

    let timing: Vec<AgentTiming> = ordered
        .iter()
        .map(|c| {
            let runs: Vec<&&RunMetrics> = sorted.iter().filter(|m| m.agent == c.agent).collect();
            let (secs, count) = runs
                .iter()
                .flat_map(|m| m.episode_seconds.iter())
                .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
            AgentTiming {
                agent: c.agent.clone(),
                mean_episode_seconds: if count == 0 { 0.0 } else { secs / count as f64 },
                q_writes_per_run: runs.iter().map(|m| m.q_writes as f64).sum::<f64>() / runs.len() as f64,
            }
        })
        .collect();
    write_text(&files.timing, &serde_json::to_string_pretty(&timing)?)?;
    Ok(files)
}

pub fn write_aggregate_csv(curves: &[AggregateCurve], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(AGGREGATE_HEADER)?;
    for c in curves {
        for i in 0..c.episodes.len() {
            writer.write_record([
                c.agent.clone(),
                c.episodes[i].to_string(),
                c.mean_gap[i].to_string(),
                c.std_gap[i].to_string(),
                c.mean_regret[i].to_string(),
            ])?;
        }
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn parse<T: std::str::FromStr>(field: &str, path: &Path) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::Argument(format!("{}: cannot parse {field:?}", path.display())))
}

/// Reads either CSV schema back into aggregated curves; per-run files are
/// averaged on the fly.
pub fn read_curves(path: &Path) -> Result<Vec<AggregateCurve>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header == AGGREGATE_HEADER {
        let mut curves: Vec<AggregateCurve> = Vec::new();
        for record in reader.records() {
            let record = record?;
            let agent = &record[0];
            if curves.last().map(|c| c.agent.as_str()) != Some(agent) {
                curves.push(AggregateCurve {
                    agent: agent.to_string(),
                    episodes: Vec::new(),
                    mean_gap: Vec::new(),
                    std_gap: Vec::new(),
                    mean_regret: Vec::new(),
                });
            }
            let c = curves.last_mut().expect("pushed above");
            c.episodes.push(parse(&record[1], path)?);
            c.mean_gap.push(parse(&record[2], path)?);
            c.std_gap.push(parse(&record[3], path)?);
            c.mean_regret.push(parse(&record[4], path)?);
        }
        Ok(curves)
    } else if header == RUNS_HEADER {
        let mut runs: Vec<RunMetrics> = Vec::new();
        for record in reader.records() {
            let record = record?;
            let run_index: usize = parse(&record[1], path)?;
            let fresh = runs
                .last()
                .is_none_or(|m| m.agent != record[0] || m.run_index != run_index);
            if fresh {
                runs.push(RunMetrics {
                    agent: record[0].to_string(),
                    run_index,
                    episodes: Vec::new(),
                    gap_at_s1: Vec::new(),
                    gap_mu: Vec::new(),
                    cum_regret: Vec::new(),
                    episode_seconds: Vec::new(),
                    q_writes: 0,
                });
            }
            let m = runs.last_mut().expect("pushed above");
            m.episodes.push(parse(&record[2], path)?);
            m.gap_at_s1.push(parse(&record[3], path)?);
            m.gap_mu.push(parse(&record[4], path)?);
            m.cum_regret.push(parse(&record[5], path)?);
        }
        aggregate_by_agent(&runs)
    } else {
        Err(Error::Argument(format!(
            "{}: header {header:?} matches neither CSV schema",
            path.display()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envgen::GenConfig;
    use crate::harness::config::{AgentKind, AgentSpec};
    use crate::harness::run::run_all;

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig::new(
            GenConfig::new(8, 2, 3, 2),
            vec![AgentSpec::ucb_f(0), AgentSpec::new(AgentKind::RewardGreedy)],
            30,
            3,
        )
        .with_seed(11)
    }

    #[test]
    fn empty_runs_write_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("never");
        assert!(write_outputs(&[], &small_cfg(), &out, "x").is_err());
        assert!(!out.exists());
    }

    #[test]
    fn headers_match_schema_and_reruns_are_identical() {
        let cfg = small_cfg();
        let dir = tempfile::tempdir().unwrap();
        let first = write_outputs(&run_all(&cfg, 1).unwrap(), &cfg, &dir.path().join("a"), "t").unwrap();
        let second = write_outputs(&run_all(&cfg, 3).unwrap(), &cfg, &dir.path().join("b"), "t").unwrap();

        let runs = fs::read_to_string(&first.runs_csv).unwrap();
        assert!(runs.starts_with("agent,run_index,episode,gap_at_s1,gap_mu,cum_regret\n"));
        let agg = fs::read_to_string(&first.aggregate_csv).unwrap();
        assert!(agg.starts_with("agent,episode,mean_gap,std_gap,mean_regret\n"));
        assert_eq!(runs.lines().count(), 1 + 2 * 3 * 30);

        assert_eq!(fs::read(&first.runs_csv).unwrap(), fs::read(&second.runs_csv).unwrap());
        assert_eq!(fs::read(&first.aggregate_csv).unwrap(), fs::read(&second.aggregate_csv).unwrap());
        assert_eq!(fs::read(&first.metadata).unwrap(), fs::read(&second.metadata).unwrap());
        assert!(fs::read_to_string(&first.chart).unwrap().starts_with("<svg"));
    }

    #[test]
    fn both_schemas_read_back_to_the_same_curves() {
        let cfg = small_cfg();
        let dir = tempfile::tempdir().unwrap();
        let files = write_outputs(&run_all(&cfg, 2).unwrap(), &cfg, dir.path(), "t").unwrap();
        let from_runs = read_curves(&files.runs_csv).unwrap();
        let from_agg = read_curves(&files.aggregate_csv).unwrap();
        assert_eq!(from_runs.len(), 2);
        assert_eq!(from_runs, from_agg);
    }
}
