use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::head::{CostHead, Sense};
use super::loss::{HankelData, LossBreakdown, WindowSet};
use super::model::{fit_recon, LiftingModel};
use super::net::TransformNet;
use super::normalize::{NormalizeMode, Normalizer};
use crate::datagen::{Dataset, SplitTag};
use crate::error::{Error, Result};
use crate::trajkit::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub n_z: usize,
    pub hidden: Vec<usize>,
    pub sense: Sense,
    /// Weights of the economic, reconstruction and linearity losses.
    pub alpha: [f64; 3],
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub normalize: NormalizeMode,
    /// Output channels reconstructed by `G`; all outputs when absent.
    pub recon_channels: Option<Vec<usize>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_z: 10,
            hidden: vec![128, 128],
            sense: Sense::Profit,
            alpha: [1.0, 1.0, 1.0],
            epochs: 100,
            batch_size: 100,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            normalize: NormalizeMode::Standard,
            recon_channels: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) || self.alpha.iter().all(|a| *a == 0.0) {
            return Err(Error::Config(format!("loss weights {:?} must be non-negative and not all zero", self.alpha)));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.n_z == 0 || self.hidden.contains(&0) {
            return Err(Error::Config("epochs, batch size, n_z and hidden widths must be positive".into()));
        }
        let unit = |v: f64| (0.0..1.0).contains(&v);
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) || !unit(self.beta1) || !unit(self.beta2) || !(self.eps > 0.0) {
            return Err(Error::Config("Adam needs lr > 0, betas in [0, 1) and eps > 0".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn channels(&self, n_y: usize) -> Vec<usize> {
        self.recon_channels.clone().unwrap_or_else(|| (0..n_y).collect())
    }
}

/// Normalized Hankel trajectory plus training and validation windows.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub normalizer: Normalizer,
    pub channels: Vec<usize>,
    pub hankel: HankelData,
    pub train: WindowSet,
    pub val: WindowSet,
}

type RawWindow = (DMatrix<f64>, DMatrix<f64>, DVector<f64>);

fn normalized_window(n: &Normalizer, w: &Trajectory) -> RawWindow {
    (n.u_rows(w.inputs()), n.y_rows(w.outputs()), w.costs().map(|c| n.c(c)))
}

/// Fits the normalizer on the Hankel trajectory and the training windows and
/// precomputes the fixed linear-loss coefficients.
pub fn prepare(ds: &Dataset, cfg: &TrainConfig) -> Result<PreparedData> {
    ds.validate()?;
    if ds.tags.is_none() {
        return Err(Error::Config("training needs a split dataset".into()));
    }
    let train_w = ds.windows_tagged(SplitTag::Train);
    let val_w = ds.windows_tagged(SplitTag::Val);
    if train_w.is_empty() || val_w.is_empty() {
        return Err(Error::Config("training and validation splits must both be non-empty".into()));
    }
    let rows = ds.hankel.len() + train_w.len() * ds.window_len();
    let (n_u, n_y) = (ds.meta.n_u, ds.meta.n_y);
    let mut u = DMatrix::zeros(rows, n_u);
    let mut y = DMatrix::zeros(rows, n_y);
    let mut c = DVector::zeros(rows);
    let mut at = 0;
    for t in std::iter::once(&ds.hankel).chain(train_w.iter().copied()) {
        u.rows_mut(at, t.len()).copy_from(t.inputs());
        y.rows_mut(at, t.len()).copy_from(t.outputs());
        c.rows_mut(at, t.len()).copy_from(t.costs());
        at += t.len();
    }
    let normalizer = Normalizer::fit(cfg.normalize, &u, &y, &c)?;
    let channels = cfg.channels(n_y);
    let (hu, hy, hc) = normalized_window(&normalizer, &ds.hankel);
    let hankel = HankelData::new(&hu, &hy, &hc, &channels, ds.window_len())?;
    let train_raw: Vec<RawWindow> = train_w.iter().map(|w| normalized_window(&normalizer, w)).collect();
    let val_raw: Vec<RawWindow> = val_w.iter().map(|w| normalized_window(&normalizer, w)).collect();
    Ok(PreparedData {
        train: WindowSet::new(&hankel, &train_raw, &channels)?,
        val: WindowSet::new(&hankel, &val_raw, &channels)?,
        normalizer,
        channels,
        hankel,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: f64,
    pub val: f64,
    pub val_e: f64,
    pub val_re: f64,
    pub val_linear: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainStatus {
    Completed,
    /// Training stopped on a non-finite loss or gradient; the model is the
    /// best checkpoint seen before that.
    Diverged { epoch: usize, detail: String },
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: LiftingModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub status: TrainStatus,
}

/// Adam on a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: DVector<f64>,
    v: DVector<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            m: DVector::zeros(n),
            v: DVector::zeros(n),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut DVector<f64>, grad: &DVector<f64>) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

/// Randomly initialized model: fan-in uniform lift, unit-curvature head and
/// least-squares `G` for that lift.
pub fn init_model(data: &PreparedData, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<LiftingModel> {
    let n_y = data.hankel.y.ncols();
    let net = TransformNet::random(n_y, &cfg.hidden, cfg.n_z, rng);
    let mut y_fit = DMatrix::zeros(data.hankel.len() + data.train.y.nrows(), n_y);
    y_fit.rows_mut(0, data.hankel.len()).copy_from(&data.hankel.y);
    y_fit.rows_mut(data.hankel.len(), data.train.y.nrows()).copy_from(&data.train.y);
    let recon = fit_recon(&net, &y_fit, data.channels.clone())?;
    LiftingModel::new(net, CostHead::new(cfg.sense, cfg.n_z), recon, data.normalizer.clone(), cfg.fingerprint())
}

/// Minibatch Adam over the training windows; keeps the parameters with the
/// lowest validation loss.
pub fn train(data: &PreparedData, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = init_model(data, cfg, &mut rng)?;
    train_from(data, cfg, &mut model, &mut rng)
}

/// Continues training `model` in place; see [`train`].
pub fn train_from(data: &PreparedData, cfg: &TrainConfig, model: &mut LiftingModel, rng: &mut ChaCha8Rng) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut params = model.params();
    let mut adam = Adam::new(params.len(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps);
    let mut history = Vec::with_capacity(cfg.epochs);
    let initial = model.evaluate(&data.hankel, &data.val, cfg.alpha)?;
    let mut best = (initial.total, model.clone(), 0);
    let mut order: Vec<usize> = (0..data.train.count()).collect();
    let mut status = TrainStatus::Completed;

    'epochs: for epoch in 1..=cfg.epochs {
        order.shuffle(rng);
        let mut acc = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = data.train.select(chunk);
            let step = model.loss_and_gradients(&data.hankel, &batch, cfg.alpha);
            let (loss, grads) = match step {
                Ok(v) => v,
                Err(Error::NonFinite(d)) => {
                    status = TrainStatus::Diverged { epoch, detail: d };
                    break 'epochs;
                }
                Err(e) => return Err(e),
            };
            let g = grads.flatten();
            if !loss.total.is_finite() || g.iter().any(|v| !v.is_finite()) {
                status = TrainStatus::Diverged {
                    epoch,
                    detail: format!("non-finite loss {}", loss.total),
                };
                break 'epochs;
            }
            acc += loss.total * chunk.len() as f64;
            adam.step(&mut params, &g);
            model.set_params(&params)?;
        }
        let val: LossBreakdown = match model.evaluate(&data.hankel, &data.val, cfg.alpha) {
            Ok(v) if v.total.is_finite() => v,
            Ok(v) => {
                status = TrainStatus::Diverged {
                    epoch,
                    detail: format!("non-finite validation loss {}", v.total),
                };
                break;
            }
            Err(Error::NonFinite(d)) => {
                status = TrainStatus::Diverged { epoch, detail: d };
                break;
            }
            Err(e) => return Err(e),
        };
        let rec = EpochRecord {
            epoch,
            train: acc / data.train.count() as f64,
            val: val.total,
            val_e: val.econ,
            val_re: val.recon,
            val_linear: val.linear,
        };
        log::debug!(
            "epoch {epoch}: train {:.4e} val {:.4e} (e {:.3e}, re {:.3e}, lin {:.3e})",
            rec.train,
            rec.val,
            rec.val_e,
            rec.val_re,
            rec.val_linear
        );
        history.push(rec);
        if val.total < best.0 {
            best = (val.total, model.clone(), epoch);
        }
    }
    if let TrainStatus::Diverged { epoch, detail } = &status {
        log::warn!("training diverged at epoch {epoch}: {detail}; keeping epoch {} parameters", best.2);
    }
    Ok(TrainOutcome {
        model: best.1,
        history,
        best_epoch: best.2,
        status,
    })
}

pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    for rec in history {
        w.serialize(rec).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
