#![allow(dead_code)]

use nalgebra::{DVector, Vector3};
use omniwrench_core::model::MultirotorModel;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_command(model: &MultirotorModel, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_iterator(model.rotor_count(), model.rotors().iter().map(|r| rng.gen_range(r.u_min..=r.u_max)))
}

pub fn random_attitude(rng: &mut ChaCha8Rng, max_tilt: f64) -> Vector3<f64> {
    Vector3::new(
        rng.gen_range(-max_tilt..max_tilt),
        rng.gen_range(-max_tilt..max_tilt),
        rng.gen_range(-3.1..3.1),
    )
}

pub fn unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn cube() -> Vec<Vec<f64>> {
    (0..8)
        .map(|c| (0..3).map(|k| if c >> k & 1 == 1 { 1.0 } else { -1.0 }).collect())
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Every vertex of `a` lies within `tol` of some vertex of `b` and vice versa.
pub fn same_vertices(a: &[Vec<f64>], b: &[Vec<f64>], tol: f64) -> bool {
    let covered = |x: &[Vec<f64>], y: &[Vec<f64>]| x.iter().all(|p| y.iter().any(|q| max_abs_diff(p, q) <= tol));
    a.len() == b.len() && covered(a, b) && covered(b, a)
}
