use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Mode;
use super::pipeline::seed_file;
use crate::controller::SimResult;
use crate::error::{Error, Result};

/// Describes one result directory written by the simulate step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub case: String,
    /// Open-loop samples behind the case (Hankel plus windows).
    pub n_samples: usize,
    pub mode: Mode,
    pub steps: usize,
    pub dt: f64,
    /// Seeds with a result file, ascending.
    pub seeds: Vec<u64>,
    pub missing_seeds: Vec<u64>,
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, Some(e.line() as u64), e.to_string()))
    }
}

/// Per-step mean and sample standard deviation across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct StepStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub runs: usize,
}

/// Requires equally long, non-empty series.
pub fn step_statistics(series: &[Vec<f64>]) -> Result<StepStats> {
    let n = series.first().map_or(0, Vec::len);
    if series.is_empty() || n == 0 || series.iter().any(|s| s.len() != n) {
        return Err(Error::Dimension("step statistics need equally long, non-empty series".into()));
    }
    let mut mean = Vec::with_capacity(n);
    let mut std = Vec::with_capacity(n);
    for t in 0..n {
        let col: Vec<f64> = series.iter().map(|s| s[t]).collect();
        let (m, s) = mean_std(&col);
        mean.push(m);
        std.push(s);
    }
    Ok(StepStats {
        mean,
        std,
        runs: series.len(),
    })
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// Columns `step, time, mean, std, runs`; time is `step·dt`.
pub fn write_aggregate(path: &Path, stats: &StepStats, dt: f64) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    w.write_record(["step", "time", "mean", "std", "runs"]).map_err(|e| Error::io(path, e.into()))?;
    for (t, (m, s)) in stats.mean.iter().zip(&stats.std).enumerate() {
        w.write_record([t.to_string(), (t as f64 * dt).to_string(), m.to_string(), s.to_string(), stats.runs.to_string()])
            .map_err(|e| Error::io(path, e.into()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_aggregate(path: &Path) -> Result<StepStats> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let (mut mean, mut std, mut runs) = (Vec::new(), Vec::new(), 0);
    for (i, row) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let row = row.map_err(|e| Error::parse(path, Some(line), e.to_string()))?;
        if row.len() != 5 {
            return Err(Error::parse(path, Some(line), format!("expected 5 columns, found {}", row.len())));
        }
        let num = |c: usize| row[c].parse::<f64>().map_err(|_| Error::parse(path, Some(line), format!("bad number '{}'", &row[c])));
        mean.push(num(2)?);
        std.push(num(3)?);
        runs = num(4)? as usize;
    }
    Ok(StepStats { mean, std, runs })
}

/// Closed-loop statistics of one method on one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub case: String,
    pub n_samples: usize,
    pub mode: Mode,
    pub runs: usize,
    pub missing_seeds: Vec<u64>,
    /// Mean over runs of the time-averaged stage profit.
    pub mean_profit: f64,
    pub std_profit: f64,
    /// Time-averaged profit per seed, in seed order.
    pub per_seed: Vec<SeedProfit>,
    /// `mean_profit` over the constant baseline of the same case.
    pub relative_to_constant: Option<f64>,
    pub fallbacks: usize,
    /// Steps whose QP ended with a status other than optimal.
    pub non_optimal_steps: usize,
    pub max_yc_violation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedProfit {
    pub seed: u64,
    pub average_profit: f64,
}

/// The comparison across cases and methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub entries: Vec<ModeSummary>,
}

impl EvaluationSummary {
    pub fn get(&self, case: &str, mode: Mode) -> Option<&ModeSummary> {
        self.entries.iter().find(|e| e.case == case && e.mode == mode)
    }

    /// Cases ordered by data size, then name.
    pub fn cases(&self) -> Vec<(String, usize)> {
        let set: BTreeSet<(usize, String)> = self.entries.iter().map(|e| (e.n_samples, e.case.clone())).collect();
        set.into_iter().map(|(n, c)| (c, n)).collect()
    }

    pub fn modes(&self) -> Vec<Mode> {
        let set: BTreeSet<Mode> = self.entries.iter().map(|e| e.mode).collect();
        set.into_iter().collect()
    }

    /// Method × data-size grid of mean time-averaged profits.
    pub fn table_csv(&self) -> String {
        let cases = self.cases();
        let mut out = String::from("method");
        for (c, n) in &cases {
            let _ = write!(out, ",{c} ({n} samples)");
        }
        out.push('\n');
        for m in self.modes() {
            out.push_str(m.as_str());
            for (c, _) in &cases {
                match self.get(c, m) {
                    Some(e) => {
                        let _ = write!(out, ",{:.4}", e.mean_profit);
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    /// The grid as a Markdown table with `mean ± std` cells.
    pub fn table_markdown(&self) -> String {
        let cases = self.cases();
        let mut out = String::from("| method |");
        for (c, n) in &cases {
            let _ = write!(out, " {c} ({n} samples) |");
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(cases.len()));
        out.push('\n');
        for m in self.modes() {
            let _ = write!(out, "| {} |", m.as_str());
            for (c, _) in &cases {
                match self.get(c, m) {
                    Some(e) => {
                        let _ = write!(out, " {:.4} ± {:.4} |", e.mean_profit, e.std_profit);
                    }
                    None => out.push_str(" – |"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Reads a result directory back and checks its aggregate file against the
/// per-seed files.
pub fn summarize_dir(dir: &Path) -> Result<(RunManifest, Vec<SimResult>, StepStats)> {
    let manifest = RunManifest::load(&dir.join("run.json"))?;
    let mut sims = Vec::with_capacity(manifest.seeds.len());
    for &seed in &manifest.seeds {
        sims.push(SimResult::read_csv(&dir.join(seed_file(seed)), manifest.mode.as_str(), seed)?);
    }
    let profits: Vec<Vec<f64>> = sims.iter().map(SimResult::profits).collect();
    let stats = step_statistics(&profits).map_err(|e| Error::parse(dir, None, e.to_string()))?;
    let agg_path = dir.join("aggregate.csv");
    let stored = read_aggregate(&agg_path)?;
    let close = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()));
    if stored.runs != stats.runs || !close(&stored.mean, &stats.mean) || !close(&stored.std, &stats.std) {
        return Err(Error::parse(&agg_path, None, "aggregate disagrees with the per-seed result files"));
    }
    Ok((manifest, sims, stats))
}

fn mode_summary(manifest: &RunManifest, sims: &[SimResult]) -> ModeSummary {
    let per_seed: Vec<SeedProfit> = sims
        .iter()
        .map(|s| SeedProfit {
            seed: s.seed,
            average_profit: s.average_profit(),
        })
        .collect();
    let avgs: Vec<f64> = per_seed.iter().map(|p| p.average_profit).collect();
    let (mean_profit, std_profit) = mean_std(&avgs);
    ModeSummary {
        case: manifest.case.clone(),
        n_samples: manifest.n_samples,
        mode: manifest.mode,
        runs: sims.len(),
        missing_seeds: manifest.missing_seeds.clone(),
        mean_profit,
        std_profit,
        per_seed,
        relative_to_constant: None,
        fallbacks: sims.iter().map(SimResult::fallbacks).sum(),
        non_optimal_steps: sims
            .iter()
            .flat_map(|s| &s.records)
            .filter(|r| r.status.is_some_and(|st| st != crate::qpsolve::QpStatus::Optimal))
            .count(),
        max_yc_violation: sims.iter().filter_map(SimResult::max_yc_violation).reduce(f64::max),
    }
}

/// Summarizes result directories into `summary.json`, `table.csv`,
/// `table.md` and one `series_<case>_<mode>.csv` per directory under `out`.
/// Nothing written depends on timing, so reruns are byte-identical.
pub fn evaluate(dirs: &[impl AsRef<Path>], out: &Path) -> Result<EvaluationSummary> {
    if dirs.is_empty() {
        return Err(Error::Config("evaluate needs at least one result directory".into()));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut entries = Vec::new();
    for dir in dirs {
        let (manifest, sims, stats) = summarize_dir(dir.as_ref())?;
        let series = out.join(format!("series_{}_{}.csv", manifest.case, manifest.mode.as_str()));
        write_aggregate(&series, &stats, manifest.dt)?;
        entries.push(mode_summary(&manifest, &sims));
    }
    entries.sort_by(|a, b| (a.n_samples, &a.case, a.mode).cmp(&(b.n_samples, &b.case, b.mode)));
    for w in entries.windows(2) {
        if w[0].case == w[1].case && w[0].mode == w[1].mode {
            return Err(Error::Config(format!("duplicate results for {} / {}", w[0].case, w[0].mode.as_str())));
        }
    }
    let baselines: Vec<(String, f64)> = entries.iter().filter(|e| e.mode == Mode::Constant).map(|e| (e.case.clone(), e.mean_profit)).collect();
    for e in &mut entries {
        if let Some((_, b)) = baselines.iter().find(|(c, _)| *c == e.case) {
            e.relative_to_constant = Some(e.mean_profit / b);
        }
    }
    let summary = EvaluationSummary { entries };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Config(format!("summary serialization: {e}")))?;
    let write = |name: &str, text: String| fs::write(out.join(name), text).map_err(|e| Error::io(out.join(name), e));
    write("summary.json", json + "\n")?;
    write("table.csv", summary.table_csv())?;
    write("table.md", summary.table_markdown())?;
    Ok(summary)
}
