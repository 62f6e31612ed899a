use std::fs::File;
use std::path::Path;

use nalgebra::DVector;

use super::config::InitWindow;
use super::policy::Policy;
use crate::error::{Error, Result};
use crate::plant::Plant;
use crate::qpsolve::QpStatus;

/// One closed-loop step: `output` is measured before `input` is applied and
/// `profit` is the plant's stage value of that pair.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub state: DVector<f64>,
    pub output: DVector<f64>,
    pub input: DVector<f64>,
    pub profit: f64,
    pub objective: Option<f64>,
    pub status: Option<QpStatus>,
    pub iterations: usize,
    pub solve_seconds: f64,
    pub fallback: bool,
    pub yc_violation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub label: String,
    pub seed: u64,
    pub records: Vec<StepRecord>,
}

impl SimResult {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Time-averaged stage profit.
    pub fn average_profit(&self) -> f64 {
        if self.records.is_empty() {
            return f64::NAN;
        }
        self.records.iter().map(|r| r.profit).sum::<f64>() / self.records.len() as f64
    }

    pub fn total_solve_seconds(&self) -> f64 {
        self.records.iter().map(|r| r.solve_seconds).sum()
    }

    pub fn fallbacks(&self) -> usize {
        self.records.iter().filter(|r| r.fallback).count()
    }

    pub fn profits(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.profit).collect()
    }

    /// Largest predicted output-box violation over steps with optimal status.
    pub fn max_yc_violation(&self) -> Option<f64> {
        self.records.iter().filter_map(|r| r.yc_violation).reduce(f64::max)
    }

    /// One row per step: `step, x*, y*, u*, profit, objective, status,
    /// iterations, solve_ms, fallback, yc_violation`. Optional fields are
    /// left empty.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let first = self.records.first().ok_or_else(|| Error::Dimension("cannot export an empty simulation".into()))?;
        let (n_x, n_y, n_u) = (first.state.len(), first.output.len(), first.input.len());
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
        let mut header = vec!["step".to_string()];
        header.extend((0..n_x).map(|i| format!("x{i}")));
        header.extend((0..n_y).map(|i| format!("y{i}")));
        header.extend((0..n_u).map(|i| format!("u{i}")));
        header.extend(["profit", "objective", "status", "iterations", "solve_ms", "fallback", "yc_violation"].map(String::from));
        w.write_record(&header).map_err(|e| Error::io(path, e.into()))?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            let mut row = vec![r.step.to_string()];
            row.extend(r.state.iter().chain(r.output.iter()).chain(r.input.iter()).map(f64::to_string));
            row.push(r.profit.to_string());
            row.push(opt(r.objective));
            row.push(r.status.map(status_str).unwrap_or("").to_string());
            row.push(r.iterations.to_string());
            row.push((r.solve_seconds * 1e3).to_string());
            row.push(u8::from(r.fallback).to_string());
            row.push(opt(r.yc_violation));
            w.write_record(&row).map_err(|e| Error::io(path, e.into()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, label: &str, seed: u64) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::Reader::from_reader(file);
        let header = rdr.headers().map_err(|e| Error::parse(path, Some(1), e.to_string()))?.clone();
        let find = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::parse(path, Some(1), format!("missing column '{name}'")))
        };
        let prefixed = |p: char| -> Vec<usize> {
            header
                .iter()
                .enumerate()
                .filter(|(_, h)| h.starts_with(p) && h[1..].parse::<usize>().is_ok())
                .map(|(i, _)| i)
                .collect()
        };
        let (xs, ys, us) = (prefixed('x'), prefixed('y'), prefixed('u'));
        let cols = [
            find("step")?,
            find("profit")?,
            find("objective")?,
            find("status")?,
            find("iterations")?,
            find("solve_ms")?,
            find("fallback")?,
            find("yc_violation")?,
        ];
        let mut records = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let line = i as u64 + 2;
            let row = row.map_err(|e| Error::parse(path, Some(line), e.to_string()))?;
            let num = |c: usize| -> Result<f64> {
                row[c]
                    .parse::<f64>()
                    .map_err(|_| Error::parse(path, Some(line), format!("bad number '{}' in column '{}'", &row[c], &header[c])))
            };
            let opt = |c: usize| -> Result<Option<f64>> { if row[c].is_empty() { Ok(None) } else { num(c).map(Some) } };
            let vec = |idx: &[usize]| -> Result<DVector<f64>> { Ok(DVector::from_vec(idx.iter().map(|&c| num(c)).collect::<Result<_>>()?)) };
            let status = match &row[cols[3]] {
                "" => None,
                s => Some(parse_status(s).ok_or_else(|| Error::parse(path, Some(line), format!("unknown status '{s}'")))?),
            };
            records.push(StepRecord {
                step: num(cols[0])? as usize,
                state: vec(&xs)?,
                output: vec(&ys)?,
                input: vec(&us)?,
                profit: num(cols[1])?,
                objective: opt(cols[2])?,
                status,
                iterations: num(cols[4])? as usize,
                solve_seconds: num(cols[5])? * 1e-3,
                fallback: num(cols[6])? != 0.0,
                yc_violation: opt(cols[7])?,
            });
        }
        Ok(Self {
            label: label.to_string(),
            seed,
            records,
        })
    }
}

pub fn status_str(s: QpStatus) -> &'static str {
    match s {
        QpStatus::Optimal => "optimal",
        QpStatus::Infeasible => "infeasible",
        QpStatus::MaxIterations => "max_iterations",
    }
}

fn parse_status(s: &str) -> Option<QpStatus> {
    match s {
        "optimal" => Some(QpStatus::Optimal),
        "infeasible" => Some(QpStatus::Infeasible),
        "max_iterations" => Some(QpStatus::MaxIterations),
        _ => None,
    }
}

/// Receding-horizon run: `T_ini` warmup steps at `warmup_input` fill the init
/// window (not recorded), then `steps` policy steps follow. Every applied
/// input is clamped to the plant's input box.
pub fn closed_loop(plant: &mut dyn Plant, policy: &mut dyn Policy, steps: usize, warmup_input: &DVector<f64>, seed: u64) -> Result<SimResult> {
    let bounds = plant.input_bounds().clone();
    if warmup_input.len() != bounds.dim() {
        return Err(Error::Dimension("warmup input does not match the plant".into()));
    }
    let mut window = InitWindow::new(policy.t_ini());
    let warm_u = bounds.clamp(warmup_input);
    for _ in 0..policy.t_ini() {
        let y = plant.output();
        plant.advance(&warm_u)?;
        window.push(warm_u.clone(), y);
    }
    let mut records = Vec::with_capacity(steps);
    for step in 0..steps {
        let state = plant.state();
        let y = plant.output();
        let d = policy.decide(&window)?;
        let u = bounds.clamp(&d.input);
        debug_assert!(bounds.contains(&u));
        let profit = plant.stage_value(&u, &y)?;
        plant.advance(&u)?;
        window.push(u.clone(), y.clone());
        records.push(StepRecord {
            step,
            state,
            output: y,
            input: u,
            profit,
            objective: d.objective,
            status: d.status,
            iterations: d.iterations,
            solve_seconds: d.solve_seconds,
            fallback: d.fallback,
            yc_violation: d.yc_violation,
        });
    }
    Ok(SimResult {
        label: policy.label(),
        seed,
        records,
    })
}
