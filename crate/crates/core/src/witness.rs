//! The canonical witness `W = P_K^c 1 - Q_K (x) 1` and its structural checks:
//! coherent-state expectation, optimality probe and the truncated partial
//! transpose used to test decomposability.

use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64;
use serde::Serialize;
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::fock::{coherent_state, coherent_tail_mass, pair_index, partial_transpose, BasisTag, FockOperator, TwoModeState};
use crate::linalg::{herm_eigen, CMatrix, CVector};
use crate::normal_modes::{mode_rotation_unitary, rotate_vector};
use crate::precession::{classical_bound, qk_real, reduced_state, Sigma};

/// Coherent-state tail mass accepted when building a truncated state.
const AUTO_TAIL: f64 = 1e-13;

/// Tail mass used by [`coherent_expectation_auto`]. Off-diagonal couplings to the
/// dropped levels enter linearly in the amplitude, so the expectation error scales
/// like the square root of the tail.
const EXPECTATION_TAIL: f64 = 1e-24;

#[derive(Debug, Clone)]
pub struct WitnessOperator {
    pub k: usize,
    pub n_max: usize,
    /// Single-mode factor `P_K^c 1 - Q_K` acting on `a+`.
    pub single: CMatrix,
    /// Two-mode operator in the `{a+, a-}` labelling.
    pub operator: FockOperator,
}

impl WitnessOperator {
    pub fn basis(&self) -> BasisTag {
        self.operator.basis()
    }

    /// `tr(W rho)` for a state in the normal-mode labelling.
    pub fn expectation(&self, rho: &TwoModeState) -> Result<f64> {
        if rho.basis() != BasisTag::Normal {
            return Err(Error::WrongBasisTag { expected: BasisTag::Normal, found: rho.basis() });
        }
        if rho.n_max() != self.n_max {
            return Err(Error::DimensionMismatch(format!(
                "state at n_max={} against witness at n_max={}",
                rho.n_max(),
                self.n_max
            )));
        }
        let red = reduced_state(rho, Sigma::Plus);
        Ok(red.iter().zip(self.single.transpose().iter()).map(|(a, b)| a * b).sum::<Complex64>().re)
    }

    /// `<v| W |v>` for a pure normal-mode state vector.
    fn expect_vector(&self, v: &CVector) -> f64 {
        let d = self.n_max + 1;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..d {
            for a in 0..d {
                let va = v[pair_index(a, j, d)];
                if va == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for b in 0..d {
                    acc += va.conj() * self.single[(a, b)] * v[pair_index(b, j, d)];
                }
            }
        }
        acc.re
    }
}

pub fn witness_matrix(k: usize, n_max: usize) -> Result<WitnessOperator> {
    if k % 2 == 0 {
        return Err(Error::EvenK(k));
    }
    let d = n_max + 1;
    let bound = classical_bound(k);
    let single = crate::linalg::to_complex(&(nalgebra::DMatrix::identity(d, d) * bound - qk_real(k, n_max)));
    let operator = FockOperator::new(single.kronecker(&CMatrix::identity(d, d)), n_max, BasisTag::Normal)?;
    Ok(WitnessOperator { k, n_max, single, operator })
}

/// `(1 - 2 erf(r) + erf(2r)) / 6`.
pub fn coherent_expectation_closed_form(r: f64) -> f64 {
    (1.0 - 2.0 * erf(r) + erf(2.0 * r)) / 6.0
}

/// Truncation at which the product `|-r>|-r>` has total-number tail at most `tol`.
pub fn coherent_pair_truncation(r: f64, tol: f64) -> usize {
    let nbar = 2.0 * r * r;
    let mut n = nbar.ceil() as usize;
    while coherent_tail_mass(nbar, n) > tol {
        n += 1;
    }
    n
}

/// Physical product state `|-r>_1 |-r>_2` expressed in the normal-mode labelling at
/// `theta = pi/4`.
fn coherent_pair_normal(r: f64, n_max: usize) -> Result<CVector> {
    let nbar = 2.0 * r * r;
    let tail = coherent_tail_mass(nbar, n_max);
    if tail > AUTO_TAIL {
        return Err(Error::TruncationInsufficient { n_max, tail, tol: AUTO_TAIL });
    }
    let single = coherent_state(Complex64::new(-r, 0.0), n_max, AUTO_TAIL)?;
    let pair = single.kronecker(&single);
    // The total photon number of the pair is Poisson(2 r^2); blocks above n_max carry
    // at most `tail` weight, which the box rotation drops.
    let normal = rotate_vector(FRAC_PI_4, &pair, n_max, BasisTag::Normal)?;
    let norm = normal.norm();
    Ok(normal.unscale(norm))
}

/// `<r|W|r>` for `|r> = |-r>_1 |-r>_2` at K = 3 by explicit two-mode evaluation.
pub fn coherent_expectation(r: f64, n_max: usize) -> Result<f64> {
    let v = coherent_pair_normal(r, n_max)?;
    let w = witness_matrix(3, n_max)?;
    Ok(w.expect_vector(&v))
}

/// [`coherent_expectation`] at an automatically chosen truncation, which is returned too.
pub fn coherent_expectation_auto(r: f64) -> Result<(f64, usize)> {
    let n = coherent_pair_truncation(r, EXPECTATION_TAIL).max(3);
    Ok((coherent_expectation(r, n)?, n))
}

/// Result of the optimality probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeResult {
    /// First radius on the scan grid where the probe is negative.
    pub r_star: f64,
    /// `<r*| (1+eps) W - eps P |r*>`, negative by construction.
    pub value: f64,
    /// Bisected radius where the probe changes sign; zero when it is negative at the vacuum.
    pub crossing: f64,
}

/// Find a coherent product state `|-r>|-r>` on which `(1+eps) W - eps P` is negative.
///
/// `p` is a positive operator in the physical labelling; its truncation bounds the
/// amplitudes that can be tested.
pub fn optimality_probe(p: &FockOperator, epsilon: f64) -> Result<ProbeResult> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    if p.basis() != BasisTag::Physical {
        return Err(Error::WrongBasisTag { expected: BasisTag::Physical, found: p.basis() });
    }
    let n = p.n_max();
    let w = witness_matrix(3, n)?;
    let value_at = |r: f64| -> Result<f64> {
        let single = coherent_state(Complex64::new(-r, 0.0), n, AUTO_TAIL)?;
        let pair = single.kronecker(&single);
        let normal = rotate_vector(FRAC_PI_4, &pair, n, BasisTag::Normal)?;
        let pv = p.expectation(&pair)?.re;
        Ok((1.0 + epsilon) * w.expect_vector(&normal) - epsilon * pv)
    };
    let step = 0.05;
    let mut prev = 0.0;
    let mut r = 0.0;
    loop {
        if coherent_tail_mass(2.0 * r * r, n) > AUTO_TAIL {
            return Err(Error::SearchFailed(prev));
        }
        let v = value_at(r)?;
        if v < 0.0 {
            if r == 0.0 {
                return Ok(ProbeResult { r_star: 0.0, value: v, crossing: 0.0 });
            }
            // Bisect the sign change, keeping the negative end.
            let (mut lo, mut hi) = (prev, r);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if value_at(mid)? < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(ProbeResult { r_star: r, value: v, crossing: hi });
        }
        prev = r;
        r += step;
    }
}

/// Smallest eigenvalue of `W^T2` at `theta = pi/4`, projected on levels `<= proj_level`
/// of both physical modes. `W` is built at the parent truncation and rotated there.
pub fn nondecomposability_check(k: usize, proj_level: usize, parent_n_max: usize) -> Result<f64> {
    if parent_n_max < proj_level {
        return Err(Error::InvalidParameter(format!(
            "parent truncation {parent_n_max} is below the projection level {proj_level}"
        )));
    }
    let w = witness_matrix(k, parent_n_max)?;
    let u = mode_rotation_unitary(FRAC_PI_4, parent_n_max);
    let phys = u.matrix() * w.operator.matrix() * u.matrix().adjoint();
    let phys = FockOperator::new(phys, parent_n_max, BasisTag::Physical)?;
    let pt = partial_transpose(&phys)?;
    let (dp, dl) = (parent_n_max + 1, proj_level + 1);
    let idx: Vec<usize> = (0..dl).flat_map(|a| (0..dl).map(move |b| pair_index(a, b, dp))).collect();
    let block = CMatrix::from_fn(idx.len(), idx.len(), |i, j| pt.matrix()[(idx[i], idx[j])]);
    Ok(herm_eigen(&block).0[0])
}

/// JSON report for the witness analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessReport {
    #[serde(rename = "K")]
    pub k: usize,
    pub proj_level: usize,
    pub min_eigenvalue: f64,
    pub parent_truncation: usize,
    pub erf_check_max_abs_error: f64,
}
