//! Shared plant fixtures. CSTR parameters are the standard series-reactor
//! values used by the shipped configs.

use edeepc::plant::{BoxSet, CstrParams, CstrPlant, CstrProcess, CstrState, DisturbanceSource, NoiseConfig};

pub fn cstr_params() -> CstrParams {
    CstrParams {
        v1: 1.0,
        v2: 1.0,
        f1: 5.0,
        f2: 5.0,
        t10: 300.0,
        t20: 300.0,
        k0: 8.46e6,
        e: 5.0e4,
        r: 8.314,
        delta_h: -1.15e4,
        rho: 1000.0,
        cp: 0.231,
    }
}

pub fn cstr_bounds() -> BoxSet {
    BoxSet::new(vec![1.5, -1e4, 1.5, -1e4], vec![6.5, 1e5, 6.5, 1e5]).unwrap()
}

pub fn process_noise() -> NoiseConfig {
    NoiseConfig {
        conc_std: 0.01,
        conc_clip: 1.0,
        temp_std: 1.0,
        temp_clip: 50.0,
        seed: 0,
    }
}

pub fn cstr_plant(noise_seed: Option<u64>) -> CstrPlant {
    let process = CstrProcess::new(cstr_params(), cstr_bounds(), 0.025, 20).unwrap();
    let initial = CstrState {
        ca1: 0.5,
        t1: 510.0,
        ca2: 0.5,
        t2: 510.0,
    };
    let dist = noise_seed.map(|s| DisturbanceSource::new(&process_noise(), s).unwrap());
    CstrPlant::new(process, initial, dist)
}
