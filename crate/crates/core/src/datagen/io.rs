//! CSV records plus a TOML sidecar. Column layout is documented in
//! `docs/data_formats.md`.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use super::{Dataset, DatasetMeta, SplitTag};
use crate::error::{Error, Result};
use crate::trajkit::Trajectory;

const HANKEL_TAG: &str = "hankel";
const UNTAGGED: &str = "none";

/// Sidecar path: `data.csv` → `data.meta.toml`.
pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.toml")
}

fn header(n_u: usize, n_y: usize) -> Vec<String> {
    let mut h = vec!["traj_id".to_string(), "step".to_string()];
    h.extend((0..n_u).map(|i| format!("u{i}")));
    h.extend((0..n_y).map(|i| format!("y{i}")));
    h.push("c".into());
    h.push("split".into());
    h
}

pub fn save(ds: &Dataset, path: &Path) -> Result<()> {
    ds.validate()?;
    let (n_u, n_y) = (ds.meta.n_u, ds.meta.n_y);
    let csv_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header(n_u, n_y)).map_err(csv_err)?;
    let mut write_traj = |id: usize, t: &Trajectory, tag: &str| -> Result<()> {
        for k in 0..t.len() {
            let mut rec = vec![id.to_string(), k.to_string()];
            rec.extend(t.inputs().row(k).iter().map(|v| v.to_string()));
            rec.extend(t.outputs().row(k).iter().map(|v| v.to_string()));
            rec.push(t.costs()[k].to_string());
            rec.push(tag.to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
        Ok(())
    };
    write_traj(0, &ds.hankel, HANKEL_TAG)?;
    for (i, win) in ds.windows.iter().enumerate() {
        let tag = ds.tags.as_ref().map(|t| t[i].as_str()).unwrap_or(UNTAGGED);
        write_traj(i + 1, win, tag)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let meta = toml::to_string(&ds.meta).map_err(|e| Error::Config(format!("metadata serialization: {e}")))?;
    let mp = meta_path(path);
    fs::write(&mp, meta).map_err(|e| Error::io(&mp, e))
}

struct Rows {
    u: Vec<f64>,
    y: Vec<f64>,
    c: Vec<f64>,
    tag: String,
}

pub fn load(path: &Path) -> Result<Dataset> {
    let mp = meta_path(path);
    let meta_text = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
    let meta: DatasetMeta = toml::from_str(&meta_text).map_err(|e| Error::parse(&mp, None, e.to_string()))?;
    let (n_u, n_y) = (meta.n_u, meta.n_y);

    let mut r = csv::Reader::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let headers = r.headers().map_err(|e| Error::parse(path, Some(1), e.to_string()))?.clone();
    let expected = header(n_u, n_y);
    let mut index = Vec::with_capacity(expected.len());
    for name in &expected {
        match headers.iter().position(|h| h == name) {
            Some(i) => index.push(i),
            None => return Err(Error::parse(path, Some(1), format!("missing column '{name}'"))),
        }
    }

    let mut trajs: Vec<Rows> = Vec::new();
    for (row_no, rec) in r.records().enumerate() {
        let line = row_no as u64 + 2;
        let rec = rec.map_err(|e| Error::parse(path, Some(line), e.to_string()))?;
        let field = |col: usize| -> Result<&str> {
            rec.get(index[col])
                .ok_or_else(|| Error::parse(path, Some(line), format!("missing field '{}'", expected[col])))
        };
        let num = |col: usize| -> Result<f64> {
            let s = field(col)?;
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(path, Some(line), format!("field '{}' is not a number: {s:?}", expected[col])))
        };
        let id: usize = field(0)?
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, Some(line), "field 'traj_id' is not an integer"))?;
        let step: usize = field(1)?
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, Some(line), "field 'step' is not an integer"))?;
        if id == trajs.len() {
            trajs.push(Rows {
                u: Vec::new(),
                y: Vec::new(),
                c: Vec::new(),
                tag: field(expected.len() - 1)?.to_string(),
            });
        } else if id + 1 != trajs.len() {
            return Err(Error::parse(path, Some(line), format!("trajectory ids must be contiguous, got {id} after {}", trajs.len().wrapping_sub(1))));
        }
        let t = trajs.last_mut().expect("pushed above");
        if step != t.c.len() {
            return Err(Error::parse(path, Some(line), format!("expected step {}, got {step}", t.c.len())));
        }
        for i in 0..n_u {
            t.u.push(num(2 + i)?);
        }
        for i in 0..n_y {
            t.y.push(num(2 + n_u + i)?);
        }
        t.c.push(num(2 + n_u + n_y)?);
    }

    let to_traj = |rows: &Rows| -> Result<Trajectory> {
        let len = rows.c.len();
        Trajectory::new(
            DMatrix::from_row_slice(len, n_u, &rows.u),
            DMatrix::from_row_slice(len, n_y, &rows.y),
            DVector::from_vec(rows.c.clone()),
            meta.dt,
        )
    };
    let Some((first, rest)) = trajs.split_first() else {
        return Err(Error::parse(path, None, "no records"));
    };
    if first.tag != HANKEL_TAG {
        return Err(Error::parse(path, Some(2), format!("trajectory 0 must be tagged '{HANKEL_TAG}'")));
    }
    let hankel = to_traj(first)?;
    let windows = rest.iter().map(to_traj).collect::<Result<Vec<_>>>()?;
    let tags = if rest.iter().all(|t| t.tag == UNTAGGED) {
        None
    } else {
        Some(
            rest.iter()
                .map(|t| SplitTag::parse(&t.tag).ok_or_else(|| Error::parse(path, None, format!("unknown split tag '{}'", t.tag))))
                .collect::<Result<Vec<_>>>()?,
        )
    };
    let ds = Dataset { hankel, windows, tags, meta };
    ds.validate()?;
    Ok(ds)
}
