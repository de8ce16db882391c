use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Evaluation record of one agent over one seeded run.
///
/// Vectors are indexed by evaluation point; `episodes` holds the one-based
/// episode index of each point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub agent: String,
    pub run_index: usize,
    pub episodes: Vec<usize>,
    /// `V*_1(s_1^k) - V^{pi^k}_1(s_1^k)` at the sampled initial state.
    pub gap_at_s1: Vec<f64>,
    /// The same gap in expectation over the initial distribution.
    pub gap_mu: Vec<f64>,
    /// Running sum of `gap_mu` over all episodes so far.
    pub cum_regret: Vec<f64>,
    /// Wall-clock seconds spent on each evaluated episode's interaction.
    pub episode_seconds: Vec<f64>,
    pub q_writes: u64,
}

impl RunMetrics {
    pub fn final_gap(&self) -> f64 {
        *self.gap_mu.last().expect("runs have at least one episode")
    }
}

/// Pointwise mean and population standard deviation across runs.
pub fn aggregate_runs(curves: &[&[f64]]) -> Result<(Vec<f64>, Vec<f64>)> {
    let first = curves
        .first()
        .ok_or_else(|| Error::Argument("no curves to aggregate".into()))?;
    let len = first.len();
    if let Some(bad) = curves.iter().find(|c| c.len() != len) {
        return Err(Error::Dimension(format!(
            "ragged curves: lengths {len} and {}",
            bad.len()
        )));
    }
    let n = curves.len() as f64;
    let mut mean = vec![0.0; len];
    let mut std = vec![0.0; len];
    for i in 0..len {
        let m = curves.iter().map(|c| c[i]).sum::<f64>() / n;
        let var = curves.iter().map(|c| (c[i] - m).powi(2)).sum::<f64>() / n;
        mean[i] = m;
        std[i] = var.sqrt();
    }
    Ok((mean, std))
}

/// Least-squares slope of `log R_k` against `log k` for `k` in
/// `[k_min, k_max]`, where `regret[k - 1] = R_k`.
pub fn fit_regret_slope(regret: &[f64], k_min: usize, k_max: usize) -> Result<f64> {
    if k_min < 2 {
        return Err(Error::Argument(format!("k_min = {k_min} must be at least 2")));
    }
    let k_max = k_max.min(regret.len());
    if k_max < k_min || k_max - k_min + 1 < 10 {
        return Err(Error::Argument(format!(
            "window [{k_min}, {k_max}] has fewer than 10 points"
        )));
    }
    let points: Vec<(f64, f64)> = (k_min..=k_max)
        .map(|k| {
            let r = regret[k - 1];
            if r > 0.0 {
                Ok(((k as f64).ln(), r.ln()))
            } else {
                Err(Error::Argument(format!("regret at episode {k} is {r}, not positive")))
            }
        })
        .collect::<Result<_>>()?;
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// First evaluated episode whose gap is strictly below `threshold`.
pub fn first_episode_below(episodes: &[usize], gaps: &[f64], threshold: f64) -> Option<usize> {
    episodes
        .iter()
        .zip(gaps)
        .find(|(_, &g)| g < threshold)
        .map(|(&k, _)| k)
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
