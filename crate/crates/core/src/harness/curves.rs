use serde::{Deserialize, Serialize};

use crate::harness::metrics::smooth;
use crate::harness::report::{MetricSettings, MetricsReport};
use crate::harness::runner::RunResult;
use crate::Result;

/// Mean learning curve of one method with its standard error band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    pub method: String,
    pub runs: usize,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePayload {
    pub episodes: usize,
    pub smoothing_window: usize,
    pub curves: Vec<CurveSet>,
    pub metrics: MetricsReport,
}

impl CurvePayload {
    /// Per-episode mean (smoothed) steps across all complete runs of each method label.
    pub fn from_runs(runs: &[RunResult], settings: &MetricSettings) -> Result<Self> {
        let metrics = MetricsReport::from_runs(runs, settings)?;
        let episodes = metrics.episodes;
        let mut groups: Vec<(String, Vec<Vec<f64>>)> = Vec::new();
        for run in runs.iter().filter(|r| r.is_complete(episodes)) {
            let raw: Vec<f64> = run.steps.iter().map(|&s| s as f64).collect();
            let curve = smooth(&raw, settings.smoothing_window)?;
            match groups.iter_mut().find(|(n, _)| n == run.label()) {
                Some((_, v)) => v.push(curve),
                None => groups.push((run.label().to_string(), vec![curve])),
            }
        }
        let curves = groups
            .into_iter()
            .map(|(method, rows)| {
                let n = rows.len() as f64;
                let mut mean = vec![0.0; episodes];
                let mut stderr = vec![0.0; episodes];
                for e in 0..episodes {
                    let m = rows.iter().map(|r| r[e]).sum::<f64>() / n;
                    mean[e] = m;
                    if rows.len() > 1 {
                        let var = rows.iter().map(|r| (r[e] - m).powi(2)).sum::<f64>() / (n - 1.0);
                        stderr[e] = (var / n).sqrt();
                    }
                }
                CurveSet {
                    method,
                    runs: rows.len(),
                    mean,
                    stderr,
                }
            })
            .collect();
        Ok(CurvePayload {
            episodes,
            smoothing_window: settings.smoothing_window,
            curves,
            metrics,
        })
    }
}
