//! Open-loop data collection: excitation, rollout, windowing, splitting and
//! persistence.

mod io;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Uniform;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::{BoxSet, NoiseConfig, Plant};
use crate::trajkit::Trajectory;

pub use io::{load, meta_path, save};

/// Fewest windows [`split`] accepts.
pub const MIN_SPLIT_WINDOWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(SplitTag::Train),
            "val" => Some(SplitTag::Val),
            "test" => Some(SplitTag::Test),
            _ => None,
        }
    }
}

/// Provenance stored next to the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub plant: String,
    pub excitation_seed: u64,
    pub noise_seed: Option<u64>,
    pub noise: Option<NoiseConfig>,
    pub split_seed: Option<u64>,
    pub split_ratio: [f64; 3],
    pub dt: f64,
    pub n_u: usize,
    pub n_y: usize,
    pub window_len: usize,
    pub t_hankel: usize,
    /// Seconds since the Unix epoch at generation time.
    pub generated_at: u64,
}

/// One long trajectory for the Hankel matrix plus L-step training windows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub hankel: Trajectory,
    pub windows: Vec<Trajectory>,
    /// One tag per window once [`split`] has run.
    pub tags: Option<Vec<SplitTag>>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn window_len(&self) -> usize {
        self.meta.window_len
    }

    pub fn windows_tagged(&self, tag: SplitTag) -> Vec<&Trajectory> {
        match &self.tags {
            Some(tags) => self.windows.iter().zip(tags).filter(|(_, t)| **t == tag).map(|(w, _)| w).collect(),
            None => Vec::new(),
        }
    }

    pub fn split_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for t in self.tags.iter().flatten() {
            c[*t as usize] += 1;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.meta.window_len;
        if let Some(w) = self.windows.iter().find(|w| w.len() != l) {
            return Err(Error::Dimension(format!("window of length {} in a dataset with L = {l}", w.len())));
        }
        if let Some(tags) = &self.tags {
            if tags.len() != self.windows.len() {
                return Err(Error::Dimension(format!("{} split tags for {} windows", tags.len(), self.windows.len())));
            }
        }
        Ok(())
    }
}

/// I.i.d. uniform input samples over `bounds`, one row per step.
pub fn excite(bounds: &BoxSet, t: usize, seed: u64) -> Result<DMatrix<f64>> {
    bounds.validate()?;
    if t == 0 {
        return Err(Error::Dimension("excitation length must be at least 1".into()));
    }
    if bounds.lo.iter().chain(&bounds.hi).any(|v| !v.is_finite()) {
        return Err(Error::Domain("excitation needs a bounded input box".into()));
    }
    let dists = (0..bounds.dim())
        .map(|i| Uniform::new_inclusive(bounds.lo[i], bounds.hi[i]).map_err(|e| Error::Domain(format!("input channel {i}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DMatrix::zeros(t, bounds.dim());
    for k in 0..t {
        for (i, d) in dists.iter().enumerate() {
            out[(k, i)] = rng.sample(d);
        }
    }
    Ok(out)
}

/// Rollout sizes for [`generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct GenerateSpec {
    pub t_hankel: usize,
    /// Time steps available for windows; `floor(n / L)` windows are kept.
    pub n_window_samples: usize,
    pub window_len: usize,
    pub excitation_seed: u64,
    pub plant_label: String,
    pub noise: Option<NoiseConfig>,
    pub noise_seed: Option<u64>,
}

/// Drives `plant` open loop with i.i.d. uniform inputs.
///
/// Record `k` holds the input applied at `k`, the output measured just
/// before it, and their stage value. The first `t_hankel` records form the
/// Hankel trajectory; the continuation is cut into non-overlapping windows.
/// Seconds since the epoch, overridable through `SOURCE_DATE_EPOCH` so that
/// regenerated datasets are byte-identical.
pub fn generation_timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.trim().parse().ok()) {
        return t;
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn generate(plant: &mut dyn Plant, spec: &GenerateSpec) -> Result<Dataset> {
    let l = spec.window_len;
    if l == 0 || spec.t_hankel < l {
        return Err(Error::Dimension(format!("need T_hankel >= L >= 1, got T_hankel = {}, L = {l}", spec.t_hankel)));
    }
    let n_windows = spec.n_window_samples / l;
    let total = spec.t_hankel + n_windows * l;
    let inputs = excite(plant.input_bounds(), total, spec.excitation_seed)?;
    let (n_u, n_y) = (plant.n_u(), plant.n_y());
    if inputs.ncols() != n_u {
        return Err(Error::Dimension(format!("input box has {} channels, plant has {n_u}", inputs.ncols())));
    }
    let mut outputs = DMatrix::zeros(total, n_y);
    let mut costs = DVector::zeros(total);
    for k in 0..total {
        let u = inputs.row(k).transpose();
        let y = plant.output();
        costs[k] = plant.stage_value(&u, &y)?;
        outputs.row_mut(k).copy_from(&y.transpose());
        plant.advance(&u).map_err(|e| match e {
            Error::Diverged { step, detail } => Error::Diverged {
                step,
                detail: format!("{detail} (excitation seed {}, record {k})", spec.excitation_seed),
            },
            other => other,
        })?;
    }
    let all = Trajectory::new(inputs, outputs, costs, plant.dt())?;
    let hankel = all.segment(0, spec.t_hankel)?;
    let windows = (0..n_windows)
        .map(|w| all.segment(spec.t_hankel + w * l, l))
        .collect::<Result<Vec<_>>>()?;
    let generated_at = generation_timestamp();
    Ok(Dataset {
        hankel,
        windows,
        tags: None,
        meta: DatasetMeta {
            plant: spec.plant_label.clone(),
            excitation_seed: spec.excitation_seed,
            noise_seed: spec.noise_seed,
            noise: spec.noise.clone(),
            split_seed: None,
            split_ratio: [0.0; 3],
            dt: plant.dt(),
            n_u,
            n_y,
            window_len: l,
            t_hankel: spec.t_hankel,
            generated_at,
        },
    })
}

/// Number of windows per split: `floor(n·r_i / Σr)` for train and
/// validation, the remainder for test.
pub fn split_sizes(n: usize, ratio: [f64; 3]) -> Result<[usize; 3]> {
    let sum: f64 = ratio.iter().sum();
    if ratio.iter().any(|r| !(r.is_finite() && *r >= 0.0)) || sum <= 0.0 {
        return Err(Error::Config(format!("split ratio {ratio:?} must be non-negative with a positive sum")));
    }
    let share = |r: f64| ((n as f64) * r / sum + 1e-9).floor() as usize;
    let train = share(ratio[0]);
    let val = share(ratio[1]).min(n - train);
    Ok([train, val, n - train - val])
}

/// Tags windows after a seeded random permutation.
pub fn split(mut ds: Dataset, ratio: [f64; 3], seed: u64) -> Result<Dataset> {
    let n = ds.windows.len();
    if n < MIN_SPLIT_WINDOWS {
        return Err(Error::Dimension(format!("splitting needs at least {MIN_SPLIT_WINDOWS} windows, got {n}")));
    }
    let [train, val, _] = split_sizes(n, ratio)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut tags = vec![SplitTag::Test; n];
    for (rank, &w) in order.iter().enumerate() {
        tags[w] = if rank < train {
            SplitTag::Train
        } else if rank < train + val {
            SplitTag::Val
        } else {
            SplitTag::Test
        };
    }
    ds.tags = Some(tags);
    ds.meta.split_seed = Some(seed);
    ds.meta.split_ratio = ratio;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_box_is_constant() {
        let b = BoxSet::new(vec![2.5, -1.0], vec![2.5, -1.0]).unwrap();
        let u = excite(&b, 50, 1).unwrap();
        assert!(u.column(0).iter().all(|&v| v == 2.5));
        assert!(u.column(1).iter().all(|&v| v == -1.0));
    }

    #[test]
    fn samples_stay_in_box() {
        let b = BoxSet::new(vec![1.5, -1e4], vec![6.5, 1e5]).unwrap();
        let u = excite(&b, 10_000, 7).unwrap();
        for k in 0..u.nrows() {
            assert!(b.contains(&u.row(k).transpose()));
        }
    }

    #[test]
    fn split_sizes_follow_ratio() {
        assert_eq!(split_sizes(100, [7.0, 2.0, 1.0]).unwrap(), [70, 20, 10]);
        assert_eq!(split_sizes(10, [7.0, 2.0, 1.0]).unwrap(), [7, 2, 1]);
        assert_eq!(split_sizes(142, [7.0, 2.0, 1.0]).unwrap(), [99, 28, 15]);
        assert!(split_sizes(10, [0.0, 0.0, 0.0]).is_err());
    }
}
