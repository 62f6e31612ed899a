//! JSON checkpoints with row-major parameter arrays.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::head::{CostHead, ReconMatrix, Sense};
use super::model::LiftingModel;
use super::net::{Layer, TransformNet};
use super::normalize::Normalizer;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct HeadRecord {
    sign: Sense,
    q: Vec<f64>,
    p: Vec<f64>,
    b: f64,
}

#[derive(Serialize, Deserialize)]
struct ReconRecord {
    rows: usize,
    cols: usize,
    g: Vec<f64>,
    channels: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    schema_version: u32,
    n_y: usize,
    n_z: usize,
    n_c: usize,
    hidden: Vec<usize>,
    layers: Vec<LayerRecord>,
    head: HeadRecord,
    recon: ReconRecord,
    normalizer: Normalizer,
    config_fingerprint: String,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn from_row_major(rows: usize, cols: usize, data: &[f64], what: &str) -> Result<DMatrix<f64>> {
    if data.len() != rows * cols {
        return Err(Error::Schema(format!("{what}: {} values for a {rows}x{cols} matrix", data.len())));
    }
    Ok(DMatrix::from_row_slice(rows, cols, data))
}

pub fn save_model(model: &LiftingModel, path: &Path) -> Result<()> {
    let ck = Checkpoint {
        schema_version: SCHEMA_VERSION,
        n_y: model.net.n_y(),
        n_z: model.n_z(),
        n_c: model.recon.n_c(),
        hidden: model.net.hidden(),
        layers: model
            .net
            .layers()
            .iter()
            .map(|l| LayerRecord {
                rows: l.n_out(),
                cols: l.n_in(),
                weights: row_major(&l.w),
                bias: l.b.as_slice().to_vec(),
            })
            .collect(),
        head: HeadRecord {
            sign: model.head.sense,
            q: model.head.q.as_slice().to_vec(),
            p: model.head.p.as_slice().to_vec(),
            b: model.head.b,
        },
        recon: ReconRecord {
            rows: model.recon.g.nrows(),
            cols: model.recon.g.ncols(),
            g: row_major(&model.recon.g),
            channels: model.recon.channels.clone(),
        },
        normalizer: model.normalizer.clone(),
        config_fingerprint: model.config_fingerprint.clone(),
    };
    let text = serde_json::to_string_pretty(&ck).map_err(|e| Error::Schema(e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads a checkpoint; `expected_n_z`, when given, must match the stored
/// lift dimension.
pub fn load_model(path: &Path, expected_n_z: Option<usize>) -> Result<LiftingModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::parse(path, Some(e.line() as u64), e.to_string()))?;
    if ck.schema_version != SCHEMA_VERSION {
        return Err(Error::Schema(format!("checkpoint version {} (expected {SCHEMA_VERSION})", ck.schema_version)));
    }
    if let Some(n_z) = expected_n_z {
        if n_z != ck.n_z {
            return Err(Error::Dimension(format!("checkpoint has n_z = {}, expected {n_z}", ck.n_z)));
        }
    }
    let layers = ck
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| {
            Ok(Layer {
                w: from_row_major(l.rows, l.cols, &l.weights, &format!("layer {i}"))?,
                b: DVector::from_vec(l.bias.clone()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let net = TransformNet::from_layers(layers).map_err(|e| Error::Schema(e.to_string()))?;
    if net.n_y() != ck.n_y || net.n_z() != ck.n_z || net.hidden() != ck.hidden {
        return Err(Error::Schema("layer shapes disagree with the declared dimensions".into()));
    }
    let head = CostHead {
        sense: ck.head.sign,
        q: DVector::from_vec(ck.head.q),
        p: DVector::from_vec(ck.head.p),
        b: ck.head.b,
    };
    let g = from_row_major(ck.recon.rows, ck.recon.cols, &ck.recon.g, "recon")?;
    if g.nrows() != ck.n_c {
        return Err(Error::Schema(format!("recon has {} rows, n_c = {}", g.nrows(), ck.n_c)));
    }
    let recon = ReconMatrix::new(g, ck.recon.channels)?;
    LiftingModel::new(net, head, recon, ck.normalizer, ck.config_fingerprint)
}
