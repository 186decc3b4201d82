use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::harness::metrics::{asymptotic_performance, smooth, time_to_threshold};
use crate::harness::runner::RunResult;
use crate::harness::stats::{holm_adjust, one_way_anova, summarize, welch_t_test, Anova, Summary};
use crate::{Error, Result};

/// Settings that turn raw runs into metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSettings {
    pub thresholds: Vec<usize>,
    pub smoothing_window: usize,
    pub asymptotic_tail: usize,
}

impl Default for MetricSettings {
    fn default() -> Self {
        MetricSettings {
            thresholds: vec![500, 300, 100, 50],
            smoothing_window: 1,
            asymptotic_tail: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSummary {
    pub threshold: usize,
    #[serde(flatten)]
    pub summary: Summary,
    /// Runs that never reached the threshold (counted as `episodes + 1`).
    pub censored: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: String,
    pub runs: usize,
    pub time_to_threshold: Vec<ThresholdSummary>,
    pub asymptotic: Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub a: String,
    pub b: String,
    pub mean_difference: f64,
    /// `None` when neither group varies.
    pub t: Option<f64>,
    pub df: Option<f64>,
    pub p: Option<f64>,
    pub p_adjusted: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// `"ttt(50)"` style for time-to-threshold, `"asymptotic"` otherwise.
    pub metric: String,
    pub anova: Option<Anova>,
    /// No within-group variance in any method; pairwise tests were skipped.
    pub degenerate: bool,
    pub pairs: Vec<PairComparison>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub episodes: usize,
    pub settings: MetricSettings,
    /// One entry per method label, pooling all of its subgoal patterns.
    pub methods: Vec<MethodMetrics>,
    /// One entry per `label@pattern` when any method has several patterns.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub patterns: Vec<MethodMetrics>,
    pub comparisons: Vec<Comparison>,
    pub degenerate: bool,
    /// Runs left out because they failed or stopped early.
    pub incomplete_runs: usize,
}

/// Per-run metric values: one time-to-threshold list per threshold plus the asymptote.
struct RunMetrics {
    ttt: Vec<(usize, bool)>,
    asymptotic: f64,
}

fn run_metrics(run: &RunResult, settings: &MetricSettings) -> Result<RunMetrics> {
    let raw: Vec<f64> = run.steps.iter().map(|&s| s as f64).collect();
    let smoothed = smooth(&raw, settings.smoothing_window)?;
    let ttt = settings
        .thresholds
        .iter()
        .map(|&t| {
            let r = time_to_threshold(&smoothed, t as f64);
            (r.episode, r.censored)
        })
        .collect();
    Ok(RunMetrics {
        ttt,
        asymptotic: asymptotic_performance(&raw, settings.asymptotic_tail)?,
    })
}

fn method_metrics(name: &str, runs: &[RunMetrics], settings: &MetricSettings) -> MethodMetrics {
    let time_to_threshold = settings
        .thresholds
        .iter()
        .enumerate()
        .map(|(i, &threshold)| {
            let values: Vec<f64> = runs.iter().map(|r| r.ttt[i].0 as f64).collect();
            ThresholdSummary {
                threshold,
                summary: summarize(&values),
                censored: runs.iter().filter(|r| r.ttt[i].1).count(),
            }
        })
        .collect();
    let asym: Vec<f64> = runs.iter().map(|r| r.asymptotic).collect();
    MethodMetrics {
        method: name.to_string(),
        runs: runs.len(),
        time_to_threshold,
        asymptotic: summarize(&asym),
    }
}

/// ANOVA plus Holm-adjusted pairwise Welch tests over named samples.
pub fn compare_methods(metric: &str, samples: &[(String, Vec<f64>)]) -> Comparison {
    let groups: Vec<&[f64]> = samples.iter().map(|(_, v)| v.as_slice()).collect();
    let anova = one_way_anova(&groups);
    let degenerate = samples.iter().all(|(_, v)| summarize(v).sd == 0.0);
    let mut pairs = Vec::new();
    if !degenerate {
        for i in 0..samples.len() {
            for j in i + 1..samples.len() {
                let (a, b) = (&samples[i], &samples[j]);
                let w = welch_t_test(&a.1, &b.1);
                pairs.push(PairComparison {
                    a: a.0.clone(),
                    b: b.0.clone(),
                    mean_difference: summarize(&a.1).mean - summarize(&b.1).mean,
                    t: w.map(|w| w.t),
                    df: w.map(|w| w.df),
                    p: w.map(|w| w.p),
                    p_adjusted: None,
                });
            }
        }
        let tested: Vec<usize> = (0..pairs.len()).filter(|&i| pairs[i].p.is_some()).collect();
        let raw: Vec<f64> = tested.iter().map(|&i| pairs[i].p.unwrap_or(1.0)).collect();
        for (&i, adj) in tested.iter().zip(holm_adjust(&raw)) {
            pairs[i].p_adjusted = Some(adj);
        }
    }
    Comparison {
        metric: metric.to_string(),
        anova: if degenerate { None } else { anova },
        degenerate,
        pairs,
    }
}

impl MetricsReport {
    /// Builds the report from completed runs; incomplete runs are counted and skipped.
    pub fn from_runs(runs: &[RunResult], settings: &MetricSettings) -> Result<Self> {
        if settings.thresholds.contains(&0) {
            return Err(Error::usage("thresholds must be positive"));
        }
        let episodes = runs.iter().map(|r| r.steps.len()).max().unwrap_or(0);
        let complete: Vec<&RunResult> = runs.iter().filter(|r| r.is_complete(episodes)).collect();
        let incomplete_runs = runs.len() - complete.len();

        let mut by_label: Vec<(String, Vec<RunMetrics>)> = Vec::new();
        let mut by_key: Vec<(String, Vec<RunMetrics>)> = Vec::new();
        for run in &complete {
            for (name, bucket) in [(run.label(), &mut by_label), (run.method.as_str(), &mut by_key)] {
                let m = run_metrics(run, settings)?;
                match bucket.iter_mut().find(|(n, _)| n == name) {
                    Some((_, v)) => v.push(m),
                    None => bucket.push((name.to_string(), vec![m])),
                }
            }
        }

        let methods: Vec<MethodMetrics> = by_label
            .iter()
            .map(|(n, r)| method_metrics(n, r, settings))
            .collect();
        let patterns = if by_key.len() > by_label.len() {
            by_key
                .iter()
                .map(|(n, r)| method_metrics(n, r, settings))
                .collect()
        } else {
            Vec::new()
        };

        let mut comparisons = Vec::new();
        if by_label.len() >= 2 {
            for (i, &t) in settings.thresholds.iter().enumerate() {
                let samples: Vec<(String, Vec<f64>)> = by_label
                    .iter()
                    .map(|(n, r)| (n.clone(), r.iter().map(|m| m.ttt[i].0 as f64).collect()))
                    .collect();
                comparisons.push(compare_methods(&format!("ttt({t})"), &samples));
            }
            let samples: Vec<(String, Vec<f64>)> = by_label
                .iter()
                .map(|(n, r)| (n.clone(), r.iter().map(|m| m.asymptotic).collect()))
                .collect();
            comparisons.push(compare_methods("asymptotic", &samples));
        }
        let degenerate = comparisons.iter().any(|c| c.degenerate);
        Ok(MetricsReport {
            episodes,
            settings: settings.clone(),
            methods,
            patterns,
            comparisons,
            degenerate,
            incomplete_runs,
        })
    }

    pub fn method(&self, name: &str) -> Option<&MethodMetrics> {
        self.methods.iter().find(|m| m.method == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text table of `mean (sd)` per method and metric.
    pub fn to_table(&self) -> String {
        let mut header = vec!["method".to_string()];
        header.extend(self.settings.thresholds.iter().map(|t| format!("ttt({t})")));
        header.push("asymptotic".into());
        let mut rows = vec![header];
        for m in self.methods.iter().chain(&self.patterns) {
            let mut row = vec![m.method.clone()];
            for t in &m.time_to_threshold {
                let mark = if t.censored > 0 { "*" } else { "" };
                row.push(format!("{}{mark}", mean_sd(&t.summary)));
            }
            row.push(mean_sd(&m.asymptotic));
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &rows {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (cell, &w))| {
                    if i == 0 {
                        format!("{cell:<w$}")
                    } else {
                        format!("{cell:>w$}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        if self
            .methods
            .iter()
            .any(|m| m.time_to_threshold.iter().any(|t| t.censored > 0))
        {
            let _ = writeln!(
                out,
                "* includes runs that never reached the threshold, counted as episodes + 1"
            );
        }
        for c in &self.comparisons {
            match &c.anova {
                Some(a) => {
                    let _ = writeln!(
                        out,
                        "{}: F({}, {}) = {:.3}, p = {}",
                        c.metric,
                        a.df_between,
                        a.df_within,
                        a.f,
                        fmt_p(a.p)
                    );
                }
                None if c.degenerate => {
                    let _ = writeln!(out, "{}: degenerate (no within-group variance)", c.metric);
                }
                None => {}
            }
            for p in &c.pairs {
                if let (Some(raw), Some(adj)) = (p.p, p.p_adjusted) {
                    let _ = writeln!(
                        out,
                        "  {} vs {}: diff = {:.2}, p = {}, Holm p = {}",
                        p.a,
                        p.b,
                        p.mean_difference,
                        fmt_p(raw),
                        fmt_p(adj)
                    );
                }
            }
        }
        out
    }
}

fn fmt_p(p: f64) -> String {
    if p < 1e-4 {
        format!("{p:.2e}")
    } else {
        format!("{p:.4}")
    }
}

fn mean_sd(s: &Summary) -> String {
    format!("{:.1} ({:.1})", s.mean, s.sd)
}

#[derive(Serialize, Deserialize)]
struct Row {
    method: String,
    seed: u64,
    episode: usize,
    steps: usize,
    #[serde(rename = "return")]
    ret: f64,
}

/// Writes runs as `method,seed,episode,steps,return` rows (episodes 1-based).
pub fn write_results<W: Write>(runs: &[RunResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for run in runs {
        for (i, (&steps, &ret)) in run.steps.iter().zip(&run.returns).enumerate() {
            w.serialize(Row {
                method: run.method.clone(),
                seed: run.seed,
                episode: i + 1,
                steps,
                ret,
            })?;
        }
    }
    if runs.iter().all(|r| r.steps.is_empty()) {
        w.write_record(["method", "seed", "episode", "steps", "return"])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a results file back into runs, in order of first appearance.
pub fn read_results<R: Read>(input: R) -> Result<Vec<RunResult>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["method", "seed", "episode", "steps", "return"] {
        return Err(Error::config(format!(
            "results header must be method,seed,episode,steps,return, found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut index: BTreeMap<(String, u64), usize> = BTreeMap::new();
    let mut runs: Vec<RunResult> = Vec::new();
    for (line, row) in r.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::config(format!("results row {}: {e}", line + 2)))?;
        let i = *index.entry((row.method.clone(), row.seed)).or_insert_with(|| {
            runs.push(RunResult {
                method: row.method.clone(),
                seed: row.seed,
                steps: Vec::new(),
                returns: Vec::new(),
                duration_ms: 0,
                error: None,
            });
            runs.len() - 1
        });
        let run = &mut runs[i];
        if row.episode != run.steps.len() + 1 {
            return Err(Error::config(format!(
                "results row {}: episode {} of {}/{} out of order",
                line + 2,
                row.episode,
                row.method,
                row.seed
            )));
        }
        run.steps.push(row.steps);
        run.returns.push(row.ret);
    }
    Ok(runs)
}
