#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use t2var::numerics::{spectral_radius, Matrix};
use t2var::VarModel;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_spd(rng: &mut impl Rng, v: usize) -> Matrix<f64> {
    let a = Matrix::from_fn(v, v, |_, _| rng.gen_range(-1.0..1.0));
    (&(&a * &a.transpose()) + &Matrix::identity(v).scale(0.5)).symmetrized()
}

/// Random VAR(p) whose companion spectral radius is drawn from `radius`.
///
/// Scaling Φ_i by c^i scales every companion eigenvalue by c, which lets the
/// radius be set exactly.
pub fn random_stationary(rng: &mut impl Rng, v: usize, p: usize, radius: (f64, f64)) -> VarModel<f64> {
    loop {
        let raw: Vec<Matrix<f64>> = (0..p)
            .map(|_| Matrix::from_fn(v, v, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        let mu: Vec<f64> = (0..v).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let sigma = random_spd(rng, v);
        let probe = VarModel::new(vec![0.0; v], raw.clone(), sigma.clone()).unwrap();
        let r = spectral_radius(&probe.companion().psi).unwrap();
        if r < 1e-3 {
            continue;
        }
        let c = rng.gen_range(radius.0..radius.1) / r;
        let phis = raw
            .iter()
            .enumerate()
            .map(|(i, m)| m.scale(c.powi(i as i32 + 1)))
            .collect();
        return VarModel::new(mu, phis, sigma).unwrap();
    }
}

pub fn close_matrix(a: &Matrix<f64>, b: &[&[f64]], tol: f64) -> (bool, f64) {
    let b = Matrix::from_rows(&b.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
    let d = a.max_abs_diff(&b);
    (d <= tol + 1e-12, d)
}
