//! Central finite-difference verification of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::{HankelData, WindowSet};
use super::model::LiftingModel;
use crate::error::Result;

/// Denominator floor of the relative error, well above the round-off of a
/// central difference on an `O(1)` loss.
pub const REL_ERR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub group: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub probes: Vec<Probe>,
    /// Coordinates redrawn because the perturbation crossed a ReLU kink.
    pub skipped: usize,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.probes.iter().map(|p| p.rel_err).fold(0.0, f64::max)
    }
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_ERR_FLOOR)
}

/// Probes `n_probes` coordinates, picking a parameter group uniformly and
/// then an entry within it, with step `1e-5·(1 + |θ|)`.
pub fn gradient_check(
    model: &LiftingModel,
    hankel: &HankelData,
    windows: &WindowSet,
    alpha: [f64; 3],
    n_probes: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let (_, grads) = model.loss_and_gradients(hankel, windows, alpha)?;
    let analytic = grads.flatten();
    let groups = model.param_groups();
    let theta = model.params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = model.clone();
    let mut probes = Vec::with_capacity(n_probes);
    let mut skipped = 0;
    let mut y_all = nalgebra::DMatrix::zeros(hankel.len() + windows.y.nrows(), hankel.y.ncols());
    y_all.rows_mut(0, hankel.len()).copy_from(&hankel.y);
    y_all.rows_mut(hankel.len(), windows.y.nrows()).copy_from(&windows.y);

    while probes.len() < n_probes {
        let grp = &groups[rng.random_range(0..groups.len())];
        let local = rng.random_range(0..grp.len);
        let idx = grp.start + local;
        let h = 1e-5 * (1.0 + theta[idx].abs());
        let mut eval = |delta: f64| -> Result<(f64, Vec<bool>)> {
            let mut t = theta.clone();
            t[idx] += delta;
            work.set_params(&t)?;
            let pattern = work.net.forward(&y_all)?.1.activation_pattern();
            Ok((work.evaluate(hankel, windows, alpha)?.total, pattern))
        };
        let (plus, pat_p) = eval(h)?;
        let (minus, pat_m) = eval(-h)?;
        if pat_p != pat_m {
            skipped += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * h);
        probes.push(Probe {
            group: grp.name.clone(),
            index: local,
            analytic: analytic[idx],
            numeric,
            rel_err: relative_error(analytic[idx], numeric),
        });
    }
    Ok(GradCheckReport { probes, skipped })
}
