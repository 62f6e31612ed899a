use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clipped Gaussian process disturbances. Concentration channels draw from
/// `N(0, conc_std²)` clipped to `±conc_clip`; temperature channels likewise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub conc_std: f64,
    pub conc_clip: f64,
    pub temp_std: f64,
    pub temp_clip: f64,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseConfig {
    pub fn disabled() -> Self {
        Self {
            conc_std: 0.0,
            conc_clip: 1.0,
            temp_std: 0.0,
            temp_clip: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |s: f64, c: f64| s >= 0.0 && s.is_finite() && c > 0.0;
        if !ok(self.conc_std, self.conc_clip) || !ok(self.temp_std, self.temp_clip) {
            return Err(Error::Config(format!(
                "noise needs std >= 0 and clip > 0, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn is_silent(&self) -> bool {
        self.conc_std == 0.0 && self.temp_std == 0.0
    }
}

/// Seeded disturbance stream for the `[C_A1, T1, C_A2, T2]` channels.
#[derive(Debug, Clone)]
pub struct DisturbanceSource {
    rng: ChaCha8Rng,
    conc: Normal<f64>,
    temp: Normal<f64>,
    conc_clip: f64,
    temp_clip: f64,
}

impl DisturbanceSource {
    pub fn new(cfg: &NoiseConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let normal = |s: f64| Normal::new(0.0, s).map_err(|e| Error::Config(format!("noise: {e}")));
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            conc: normal(cfg.conc_std)?,
            temp: normal(cfg.temp_std)?,
            conc_clip: cfg.conc_clip,
            temp_clip: cfg.temp_clip,
        })
    }

    pub fn draw(&mut self) -> [f64; 4] {
        let c1 = self.conc.sample(&mut self.rng).clamp(-self.conc_clip, self.conc_clip);
        let t1 = self.temp.sample(&mut self.rng).clamp(-self.temp_clip, self.temp_clip);
        let c2 = self.conc.sample(&mut self.rng).clamp(-self.conc_clip, self.conc_clip);
        let t2 = self.temp.sample(&mut self.rng).clamp(-self.temp_clip, self.temp_clip);
        [c1, t1, c2, t2]
    }
}
