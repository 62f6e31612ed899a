//! LTI data helpers.

use edeepc::datagen::{self, Dataset, GenerateSpec};
use edeepc::plant::{BoxSet, LtiPlant, LtiSystem};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_system(seed: u64, n_x: usize, n_u: usize, n_y: usize) -> LtiSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LtiSystem::random_controllable(n_x, n_u, n_y, &mut rng)
}

/// Simulates from `x0` with `y_k = C x_k` recorded before `u_k` is applied.
pub fn simulate(sys: &LtiSystem, x0: &DVector<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
    let mut x = x0.clone();
    let mut y = DMatrix::zeros(u.nrows(), sys.n_y());
    for k in 0..u.nrows() {
        let (next, yk) = sys.step(&x, &u.row(k).transpose()).unwrap();
        y.row_mut(k).copy_from(&yk.transpose());
        x = next;
    }
    y
}

pub fn random_inputs(rng: &mut ChaCha8Rng, t: usize, n_u: usize) -> DMatrix<f64> {
    DMatrix::from_fn(t, n_u, |_, _| rng.random_range(-1.0..1.0))
}

/// LTI plant with stage cost `Σ w_i (y_i − r_i)²` and unit input box.
pub fn quadratic_plant(sys: LtiSystem, weights: Vec<f64>, target: Vec<f64>) -> LtiPlant {
    let n_u = sys.n_u();
    let n_x = sys.n_x();
    LtiPlant::new(sys, DVector::zeros(n_x), BoxSet::new(vec![-1.0; n_u], vec![1.0; n_u]).unwrap(), weights, target, 1.0).unwrap()
}

pub fn dataset(plant: &mut LtiPlant, t_hankel: usize, n_windows: usize, window_len: usize, seed: u64) -> Dataset {
    let spec = GenerateSpec {
        t_hankel,
        n_window_samples: n_windows * window_len,
        window_len,
        excitation_seed: seed,
        plant_label: "lti".into(),
        noise: None,
        noise_seed: None,
    };
    datagen::split(datagen::generate(plant, &spec).unwrap(), [7.0, 2.0, 1.0], seed + 1).unwrap()
}
