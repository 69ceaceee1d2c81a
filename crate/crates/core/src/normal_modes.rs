//! Normal-mode decomposition of two coupled oscillators and the matching
//! passive rotation on the truncated two-mode Fock space.
//!
//! The Hamiltonian is
//! `H = p1^2/2m1 + p2^2/2m2 + m1 w1^2 x1^2/2 + m2 w2^2 x2^2/2 + g x1 x2 / 2`,
//! which makes `x+ ~ cos(theta) x1 + sin(theta) x2` the faster normal mode for
//! `theta = atan2(g, mu (w1^2 - w2^2)) / 2`.

use std::f64::consts::FRAC_PI_4;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{pair_index, BasisTag, FockOperator, TwoModeState};
use crate::linalg::{herm_eigen, to_complex, CMatrix, CVector};

const DEGENERACY_TOL: f64 = 1e-12;

/// Local operations relating a raw mixing angle to its folded value in `[0, pi/4]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AngleFold {
    /// `x2 -> -x2` was applied (raw angle negative).
    pub flip_x2: bool,
    /// The two oscillators were relabelled (|raw angle| above pi/4).
    pub swap_modes: bool,
}

/// Fold any angle onto `[0, pi/4]` using sign flips and relabelling of the oscillators.
pub fn fold_angle(theta: f64) -> (f64, AngleFold) {
    let half_pi = 2.0 * FRAC_PI_4;
    // Reduce to (-pi/2, pi/2] first; the rotation is pi-periodic up to a parity flip.
    let mut t = theta.rem_euclid(2.0 * half_pi);
    if t > half_pi {
        t -= 2.0 * half_pi;
    }
    let flip_x2 = t < 0.0;
    let a = t.abs();
    if a > FRAC_PI_4 {
        (half_pi - a, AngleFold { flip_x2, swap_modes: true })
    } else {
        (a, AngleFold { flip_x2, swap_modes: false })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalModeSpec {
    pub m1: f64,
    pub m2: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub g: f64,
    /// Mixing angle as produced by `atan2(...)/2`, in `(-pi/2, pi/2]`.
    pub theta_raw: f64,
    /// Mixing angle folded onto `[0, pi/4]`; entanglement quantities use this one.
    pub theta: f64,
    pub fold: AngleFold,
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub mu: f64,
}

impl NormalModeSpec {
    pub fn new(m1: f64, m2: f64, omega1: f64, omega2: f64, g: f64) -> Result<Self> {
        Self::build(m1, m2, omega1, omega2, g, None)
    }

    /// Uncoupled, resonant oscillators: any rotation is a valid normal-mode basis,
    /// so the caller picks `theta`.
    pub fn with_angle(m1: f64, m2: f64, omega1: f64, omega2: f64, g: f64, theta: f64) -> Result<Self> {
        Self::build(m1, m2, omega1, omega2, g, Some(theta))
    }

    fn build(m1: f64, m2: f64, omega1: f64, omega2: f64, g: f64, theta: Option<f64>) -> Result<Self> {
        for (name, v) in [("m1", m1), ("m2", m2), ("omega1", omega1), ("omega2", omega2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !g.is_finite() {
            return Err(Error::InvalidParameter(format!("g must be finite, got {g}")));
        }
        let mu = (m1 * m2).sqrt();
        let (w1s, w2s) = (omega1 * omega1, omega2 * omega2);
        let split = mu * (w1s - w2s);
        let scale = mu * (w1s + w2s);
        let degenerate = g.abs() <= DEGENERACY_TOL * scale && split.abs() <= DEGENERACY_TOL * scale;
        let theta_raw = match (degenerate, theta) {
            (true, Some(t)) => t,
            (true, None) => return Err(Error::DegenerateAngle),
            (false, None) => 0.5 * g.atan2(split),
            (false, Some(_)) => {
                return Err(Error::InvalidParameter(
                    "theta is fixed by the parameters unless g = 0 and omega1 = omega2".into(),
                ))
            }
        };
        let mean = 0.5 * (w1s + w2s);
        let rad = ((0.5 * (w1s - w2s)).powi(2) + g * g / (4.0 * mu * mu)).sqrt();
        let (wp2, wm2) = (mean + rad, mean - rad);
        if wm2 <= 0.0 {
            return Err(Error::Unstable(wm2));
        }
        let (theta, fold) = fold_angle(theta_raw);
        Ok(Self {
            m1,
            m2,
            omega1,
            omega2,
            g,
            theta_raw,
            theta,
            fold,
            omega_plus: wp2.sqrt(),
            omega_minus: wm2.sqrt(),
            mu,
        })
    }

    /// Potential-energy matrix `V = x^T K x / 2` in physical coordinates.
    pub fn stiffness(&self) -> Matrix2<f64> {
        Matrix2::new(
            self.m1 * self.omega1 * self.omega1,
            0.5 * self.g,
            0.5 * self.g,
            self.m2 * self.omega2 * self.omega2,
        )
    }

    /// Stiffness matrix rebuilt from `(theta_raw, omega+, omega-, mu)` and the masses.
    pub fn rebuilt_stiffness(&self) -> Matrix2<f64> {
        let (s, c) = self.theta_raw.sin_cos();
        let rot = Matrix2::new(c, s, -s, c);
        let diag = Matrix2::new(self.omega_plus.powi(2), 0.0, 0.0, self.omega_minus.powi(2));
        let root_m = Matrix2::new(self.m1.sqrt(), 0.0, 0.0, self.m2.sqrt());
        root_m * rot.transpose() * diag * rot * root_m
    }

    pub fn energy(&self, x1: f64, p1: f64, x2: f64, p2: f64) -> f64 {
        let k = self.stiffness();
        p1 * p1 / (2.0 * self.m1)
            + p2 * p2 / (2.0 * self.m2)
            + 0.5 * (k[(0, 0)] * x1 * x1 + 2.0 * k[(0, 1)] * x1 * x2 + k[(1, 1)] * x2 * x2)
    }

    pub fn omega(&self, sigma: crate::precession::Sigma) -> f64 {
        match sigma {
            crate::precession::Sigma::Plus => self.omega_plus,
            crate::precession::Sigma::Minus => self.omega_minus,
        }
    }
}

/// Normal coordinates `(x+, p+, x-, p-)`, using the raw mixing angle.
///
/// The momentum rows use reciprocal mass weights so that the map is canonical.
pub fn normal_coordinates(x1: f64, p1: f64, x2: f64, p2: f64, spec: &NormalModeSpec) -> (f64, f64, f64, f64) {
    let (s, c) = spec.theta_raw.sin_cos();
    let r12 = (spec.m1 / spec.m2).powf(0.25);
    let r21 = 1.0 / r12;
    let xp = r12 * c * x1 + r21 * s * x2;
    let xm = r21 * c * x2 - r12 * s * x1;
    let pp = r21 * c * p1 + r12 * s * p2;
    let pm = r12 * c * p2 - r21 * s * p1;
    (xp, pp, xm, pm)
}

/// Inverse of [`normal_coordinates`], returning `(x1, p1, x2, p2)`.
pub fn physical_coordinates(xp: f64, pp: f64, xm: f64, pm: f64, spec: &NormalModeSpec) -> (f64, f64, f64, f64) {
    let (s, c) = spec.theta_raw.sin_cos();
    let r12 = (spec.m1 / spec.m2).powf(0.25);
    let r21 = 1.0 / r12;
    let x1 = (c * xp - s * xm) / r12;
    let x2 = (s * xp + c * xm) / r21;
    let p1 = (c * pp - s * pm) / r21;
    let p2 = (s * pp + c * pm) / r12;
    (x1, p1, x2, p2)
}

/// Basis states `|k, N-k>` of one total-number block that fit inside the box.
fn block_levels(total: usize, n_max: usize) -> Vec<usize> {
    (total.saturating_sub(n_max)..=total.min(n_max)).collect()
}

/// `exp(theta G)` restricted to one total-number block, with
/// `G = a2^dagger a1 - a1^dagger a2`; indexed by the mode-1 occupation `k`.
fn block_rotation(theta: f64, total: usize, ks: &[usize]) -> DMatrix<f64> {
    let b = ks.len();
    let mut gen = CMatrix::zeros(b, b);
    for (i, &k) in ks.iter().enumerate() {
        // a2^dagger a1 |k, N-k> = sqrt(k (N-k+1)) |k-1, N-k+1>
        if i > 0 {
            let amp = ((k * (total - k + 1)) as f64).sqrt();
            gen[(i - 1, i)] += Complex64::new(amp, 0.0);
            gen[(i, i - 1)] -= Complex64::new(amp, 0.0);
        }
    }
    // gen is real antisymmetric: i*gen is Hermitian and exp(theta gen) = V exp(-i theta l) V^dagger.
    let (vals, vecs) = herm_eigen(&(gen * Complex64::i()));
    let mut scaled = vecs.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= Complex64::new(0.0, -theta * vals[j]).exp();
    }
    (scaled * vecs.adjoint()).map(|z| z.re)
}

/// Real orthogonal matrix of the passive rotation on the `(n_max+1)^2` box.
///
/// Maps `{a+, a-}` amplitudes to `{a1, a2}` amplitudes. Blocks of total number
/// `N <= n_max` are exact; the clipped blocks above use the box-restricted generator,
/// which keeps the matrix orthogonal.
pub fn rotation_matrix(theta: f64, n_max: usize) -> DMatrix<f64> {
    let d = n_max + 1;
    let mut u = DMatrix::zeros(d * d, d * d);
    for total in 0..=2 * n_max {
        let ks = block_levels(total, n_max);
        let blk = block_rotation(theta, total, &ks);
        for (i, &ki) in ks.iter().enumerate() {
            for (j, &kj) in ks.iter().enumerate() {
                u[(pair_index(ki, total - ki, d), pair_index(kj, total - kj, d))] = blk[(i, j)];
            }
        }
    }
    u
}

/// The rotation as a Fock operator, tagged with the output labelling `{a1, a2}`.
pub fn mode_rotation_unitary(theta: f64, n_max: usize) -> FockOperator {
    FockOperator::from_real(&rotation_matrix(theta, n_max), n_max, BasisTag::Physical)
        .expect("rotation matrix has box dimensions")
}

/// Exact isometry from the `{a+, a-}` box at `n_inner` into the `{a1, a2}` box at
/// `2 n_inner`, where every total-number block is complete.
pub fn rotation_isometry(theta: f64, n_inner: usize) -> DMatrix<f64> {
    let n_outer = 2 * n_inner;
    let (di, d_o) = (n_inner + 1, n_outer + 1);
    let mut iso = DMatrix::zeros(d_o * d_o, di * di);
    for total in 0..=2 * n_inner {
        let ks = block_levels(total, n_outer);
        let blk = block_rotation(theta, total, &ks);
        for (j, &kj) in ks.iter().enumerate() {
            let (a, b) = (kj, total - kj);
            if a > n_inner || b > n_inner {
                continue;
            }
            for (i, &ki) in ks.iter().enumerate() {
                iso[(pair_index(ki, total - ki, d_o), pair_index(a, b, di))] = blk[(i, j)];
            }
        }
    }
    iso
}

/// Apply the rotation (or its inverse) to a two-mode state vector block by block.
pub fn rotate_vector(theta: f64, v: &CVector, n_max: usize, target: BasisTag) -> Result<CVector> {
    let d = n_max + 1;
    if v.len() != d * d {
        return Err(Error::DimensionMismatch(format!("vector of length {} at n_max={n_max}", v.len())));
    }
    let angle = match target {
        BasisTag::Physical => theta,
        BasisTag::Normal => -theta,
        BasisTag::SingleMode => {
            return Err(Error::WrongBasisTag { expected: BasisTag::Physical, found: BasisTag::SingleMode })
        }
    };
    let mut out = CVector::zeros(d * d);
    for total in 0..=2 * n_max {
        let ks = block_levels(total, n_max);
        let blk = block_rotation(angle, total, &ks);
        for (i, &ki) in ks.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &kj) in ks.iter().enumerate() {
                acc += v[pair_index(kj, total - kj, d)] * blk[(i, j)];
            }
            out[pair_index(ki, total - ki, d)] = acc;
        }
    }
    Ok(out)
}

/// Re-express `rho` in `target` labelling via `U rho U^dagger` on the same box.
pub fn transform_state(rho: &TwoModeState, theta: f64, target: BasisTag) -> Result<TwoModeState> {
    if rho.basis() == target {
        return Err(Error::SameBasis(target));
    }
    let u = to_complex(&rotation_matrix(theta, rho.n_max()));
    let m = match target {
        BasisTag::Physical => &u * rho.matrix() * u.adjoint(),
        BasisTag::Normal => u.adjoint() * rho.matrix() * &u,
        BasisTag::SingleMode => {
            return Err(Error::WrongBasisTag { expected: BasisTag::Physical, found: BasisTag::SingleMode })
        }
    };
    Ok(TwoModeState::from_parts(crate::linalg::hermitize(&m), rho.n_max(), target))
}

/// Exact change to `{a1, a2}`: a normal-mode state at `n` becomes a physical state at `2n`.
pub fn to_physical_exact(rho: &TwoModeState, theta: f64) -> Result<TwoModeState> {
    if rho.basis() != BasisTag::Normal {
        return Err(Error::WrongBasisTag { expected: BasisTag::Normal, found: rho.basis() });
    }
    let iso = to_complex(&rotation_isometry(theta, rho.n_max()));
    let m = &iso * rho.matrix() * iso.adjoint();
    Ok(TwoModeState::from_parts(crate::linalg::hermitize(&m), 2 * rho.n_max(), BasisTag::Physical))
}

/// Exact change to `{a+, a-}`: a physical state at `n` becomes a normal-mode state at `2n`.
pub fn to_normal_exact(rho: &TwoModeState, theta: f64) -> Result<TwoModeState> {
    if rho.basis() != BasisTag::Physical {
        return Err(Error::WrongBasisTag { expected: BasisTag::Physical, found: rho.basis() });
    }
    let iso = to_complex(&rotation_isometry(-theta, rho.n_max()));
    let m = &iso * rho.matrix() * iso.adjoint();
    Ok(TwoModeState::from_parts(crate::linalg::hermitize(&m), 2 * rho.n_max(), BasisTag::Normal))
}
