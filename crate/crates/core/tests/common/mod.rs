#![allow(dead_code)]

use dew_core::fock::{pair_index, BasisTag, TwoModeState};
use dew_core::linalg::{CMatrix, CVector};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im)
}

/// Random unit vector of length `d`.
pub fn random_vector(rng: &mut ChaCha8Rng, d: usize) -> CVector {
    let v = CVector::from_fn(d, |_, _| gaussian_complex(rng));
    let n = v.norm();
    v.unscale(n)
}

/// Random unit vector whose amplitudes decay with the level, so high levels carry little weight.
pub fn random_decaying_vector(rng: &mut ChaCha8Rng, d: usize, decay: f64) -> CVector {
    let v = CVector::from_fn(d, |i, _| gaussian_complex(rng) * decay.powi(i as i32));
    let n = v.norm();
    v.unscale(n)
}

/// Random density matrix of rank `rank` on `d` levels.
pub fn random_density(rng: &mut ChaCha8Rng, d: usize, rank: usize) -> CMatrix {
    let g = CMatrix::from_fn(d, rank, |_, _| gaussian_complex(rng));
    let m = &g * g.adjoint();
    let t = m.trace();
    m.unscale(t.re)
}

pub fn random_two_mode(rng: &mut ChaCha8Rng, n_max: usize, rank: usize, basis: BasisTag) -> TwoModeState {
    let d = (n_max + 1) * (n_max + 1);
    TwoModeState::new(random_density(rng, d, rank), n_max, basis).unwrap()
}

/// Convex mixture of `terms` random pure product states.
pub fn random_separable(rng: &mut ChaCha8Rng, n_max: usize, terms: usize, decay: f64, basis: BasisTag) -> TwoModeState {
    let d = n_max + 1;
    let weights: Vec<f64> = (0..terms).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    let mut m = CMatrix::zeros(d * d, d * d);
    for w in weights {
        let a = random_decaying_vector(rng, d, decay);
        let b = random_decaying_vector(rng, d, decay);
        let v = a.kronecker(&b);
        m += &v * v.adjoint() * Complex64::new(w / total, 0.0);
    }
    TwoModeState::new(m, n_max, basis).unwrap()
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| gaussian_complex(rng));
    (&g + g.adjoint()).scale(0.5)
}

/// Phase rotation `exp(i phi n+)` applied to a normal-mode state.
pub fn rotate_plus_phase(rho: &TwoModeState, phi: f64) -> TwoModeState {
    let d = rho.n_max() + 1;
    let m = rho.matrix();
    let out = CMatrix::from_fn(d * d, d * d, |i, j| {
        let (a, b) = (i / d, j / d);
        m[(i, j)] * Complex64::from_polar(1.0, phi * (a as f64 - b as f64))
    });
    debug_assert_eq!(pair_index(1, 0, d), d);
    TwoModeState::new(out, rho.n_max(), rho.basis()).unwrap()
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    dew_core::linalg::herm_eigen(m).0[0]
}

pub fn real_max_abs(m: &DMatrix<f64>) -> f64 {
    m.amax()
}
