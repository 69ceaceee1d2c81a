//! The precession protocol: sign-of-position measurements at `K` equally spaced
//! times of one normal mode, the operator `Q_K` predicting the score, and bounds.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{BasisTag, FockOperator, TwoModeState};
use crate::linalg::{herm_eigen, sym_eigen, CMatrix};
use crate::normal_modes::NormalModeSpec;

/// Which normal mode the protocol follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sigma {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub k: usize,
    /// Offset of the first measurement, as a fraction of the period.
    #[serde(default)]
    pub t0: f64,
    pub sigma: Sigma,
}

impl ProtocolSpec {
    pub fn new(k: usize, sigma: Sigma) -> Result<Self> {
        Self::with_offset(k, 0.0, sigma)
    }

    pub fn with_offset(k: usize, t0: f64, sigma: Sigma) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidParameter(format!("t0 must be finite, got {t0}")));
        }
        Ok(Self { k, t0, sigma })
    }

    pub fn period(&self, spec: &NormalModeSpec) -> f64 {
        2.0 * PI / spec.omega(self.sigma)
    }

    /// Measurement times `t_k = (k/K + t0) T` in physical time units.
    pub fn times(&self, spec: &NormalModeSpec) -> Vec<f64> {
        let period = self.period(spec);
        (0..self.k).map(|j| (j as f64 / self.k as f64 + self.t0) * period).collect()
    }

    /// Precession phases `omega * t_k`.
    pub fn phases(&self) -> Vec<f64> {
        (0..self.k).map(|j| 2.0 * PI * (j as f64 / self.k as f64 + self.t0)).collect()
    }
}

/// Sign tallies for one measurement time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotCounts {
    pub positive: u64,
    pub zero: u64,
    pub negative: u64,
}

impl SlotCounts {
    pub fn total(&self) -> u64 {
        self.positive + self.zero + self.negative
    }

    /// Positive frequency with zeros counted at half weight.
    pub fn fraction(&self) -> f64 {
        let n = self.total();
        if n == 0 {
            return 0.0;
        }
        (self.positive as f64 + 0.5 * self.zero as f64) / n as f64
    }

    pub fn merge(&mut self, other: &SlotCounts) {
        self.positive += other.positive;
        self.zero += other.zero;
        self.negative += other.negative;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEstimate {
    pub p_value: f64,
    pub stderr: f64,
    pub counts: Vec<SlotCounts>,
}

impl ScoreEstimate {
    /// Average of the per-slot positive frequencies with a binomial standard error.
    pub fn from_counts(counts: Vec<SlotCounts>) -> Self {
        let k = counts.len() as f64;
        let mut p = 0.0;
        let mut var = 0.0;
        for c in &counts {
            let f = c.fraction();
            p += f;
            if c.total() > 0 {
                var += f * (1.0 - f) / c.total() as f64;
            }
        }
        Self { p_value: p / k, stderr: var.sqrt() / k, counts }
    }
}

/// `(numerator, denominator)` of the classical bound in lowest terms.
pub fn classical_bound_ratio(k: usize) -> (u64, u64) {
    assert!(k >= 1, "K must be at least 1");
    let k = k as u64;
    if k % 2 == 0 {
        return (1, 2);
    }
    let (num, den) = (k + 1, 2 * k);
    let g = gcd(num, den);
    (num / g, den / g)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Largest score attainable by a classical precessing system.
pub fn classical_bound(k: usize) -> f64 {
    let (num, den) = classical_bound_ratio(k);
    num as f64 / den as f64
}

/// `psi_n(0)` for `n = 0..len`.
fn hermite_at_origin(len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    if len > 0 {
        v[0] = PI.powf(-0.25);
    }
    for n in (2..len).step_by(2) {
        v[n] = -v[n - 2] * ((n - 1) as f64 / n as f64).sqrt();
    }
    v
}

/// Matrix elements `<m| pos(X) |n> = int_0^inf psi_m psi_n dx` from boundary values
/// of the Hermite functions at the origin.
pub fn pos_x_real(n_max: usize) -> DMatrix<f64> {
    let d = n_max + 1;
    let psi = hermite_at_origin(d + 1);
    let dpsi: Vec<f64> = (0..d)
        .map(|n| {
            let down = if n > 0 { (n as f64 / 2.0).sqrt() * psi[n - 1] } else { 0.0 };
            down - ((n + 1) as f64 / 2.0).sqrt() * psi[n + 1]
        })
        .collect();
    DMatrix::from_fn(d, d, |m, n| {
        if m == n {
            0.5
        } else if (m + n) % 2 == 0 {
            0.0
        } else {
            (psi[n] * dpsi[m] - psi[m] * dpsi[n]) / (2.0 * (m as f64 - n as f64))
        }
    })
}

pub fn pos_x_matrix(n_max: usize) -> FockOperator {
    FockOperator::from_real(&pos_x_real(n_max), n_max, BasisTag::SingleMode).expect("square by construction")
}

/// Real `Q_K` at zero offset: `pos(X)` with only `m = n (mod K)` couplings kept.
pub fn qk_real(k: usize, n_max: usize) -> DMatrix<f64> {
    assert!(k >= 1, "K must be at least 1");
    let pos = pos_x_real(n_max);
    DMatrix::from_fn(n_max + 1, n_max + 1, |m, n| if m.abs_diff(n) % k == 0 { pos[(m, n)] } else { 0.0 })
}

pub fn qk_matrix(k: usize, n_max: usize) -> FockOperator {
    FockOperator::from_real(&qk_real(k, n_max), n_max, BasisTag::SingleMode).expect("square by construction")
}

/// `Q_K` with the measurement times shifted by `t0` periods.
pub fn qk_matrix_offset(k: usize, n_max: usize, t0: f64) -> FockOperator {
    let q = qk_real(k, n_max);
    let m = CMatrix::from_fn(n_max + 1, n_max + 1, |r, c| {
        let phase = 2.0 * PI * t0 * (r as f64 - c as f64);
        Complex64::from_polar(q[(r, c)], phase)
    });
    FockOperator::new(m, n_max, BasisTag::SingleMode).expect("square by construction")
}

/// Top eigenpair of `Q_K` on `n_max + 1` levels.
pub fn max_score(k: usize, n_max: usize) -> (f64, DVector<f64>) {
    let (vals, vecs) = sym_eigen(&qk_real(k, n_max));
    let top = vals.len() - 1;
    (vals[top], vecs.column(top).into_owned())
}

/// Smallest eigenvalue of `Q_K`; scores below it are unreachable.
pub fn min_score(k: usize, n_max: usize) -> f64 {
    sym_eigen(&qk_real(k, n_max)).0[0]
}

/// Reduced density matrix of the chosen mode of a two-mode state.
pub fn reduced_state(rho: &TwoModeState, sigma: Sigma) -> CMatrix {
    let d = rho.n_max() + 1;
    let m = rho.matrix();
    CMatrix::from_fn(d, d, |a, b| {
        (0..d)
            .map(|j| match sigma {
                Sigma::Plus => m[(a * d + j, b * d + j)],
                Sigma::Minus => m[(j * d + a, j * d + b)],
            })
            .sum()
    })
}

/// `tr(rho (Q_K (x) 1))` for `sigma = +`, `tr(rho (1 (x) Q_K))` for `sigma = -`.
pub fn score_state(rho: &TwoModeState, k: usize, sigma: Sigma) -> Result<f64> {
    score_state_offset(rho, k, 0.0, sigma)
}

pub fn score_state_offset(rho: &TwoModeState, k: usize, t0: f64, sigma: Sigma) -> Result<f64> {
    if rho.basis() != BasisTag::Normal {
        return Err(Error::WrongBasisTag { expected: BasisTag::Normal, found: rho.basis() });
    }
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    let red = reduced_state(rho, sigma);
    let q = qk_matrix_offset(k, rho.n_max(), t0);
    let s: Complex64 = red.iter().zip(q.matrix().transpose().iter()).map(|(a, b)| a * b).sum();
    Ok(s.re)
}

/// Hermitian top eigenpair of an arbitrary single-mode Hermitian operator.
pub fn top_eigenpair(op: &FockOperator) -> (f64, nalgebra::DVector<Complex64>) {
    let (vals, vecs) = herm_eigen(op.matrix());
    let top = vals.len() - 1;
    (vals[top], vecs.column(top).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bounds_from_the_protocol() {
        assert_eq!(classical_bound_ratio(3), (2, 3));
        assert_eq!(classical_bound_ratio(4), (1, 2));
        assert_eq!(classical_bound_ratio(5), (3, 5));
        assert_eq!(classical_bound_ratio(1), (1, 1));
    }

    #[test]
    fn pos_elements() {
        let p = pos_x_real(4);
        assert_eq!(p[(0, 0)], 0.5);
        assert_eq!(p[(0, 2)], 0.0);
        assert_abs_diff_eq!(p[(0, 1)], 1.0 / (2.0 * PI).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(p[(0, 3)], -2.0 / (48.0 * PI).sqrt(), epsilon = 1e-15);
        assert!((p.transpose() - &p).amax() == 0.0);
    }

    #[test]
    fn qk_small_truncation_is_diagonal() {
        let q = qk_real(3, 2);
        assert_eq!(q, DMatrix::from_diagonal_element(3, 3, 0.5));
        let (p, _) = max_score(3, 2);
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn vacuum_and_mixed_scores() {
        let vac = TwoModeState::vacuum(4, BasisTag::Normal);
        assert_abs_diff_eq!(score_state(&vac, 3, Sigma::Plus).unwrap(), 0.5, epsilon = 1e-15);
        let mixed = TwoModeState::maximally_mixed(4, BasisTag::Normal);
        assert_abs_diff_eq!(score_state(&mixed, 5, Sigma::Minus).unwrap(), 0.5, epsilon = 1e-15);
        let phys = TwoModeState::vacuum(2, BasisTag::Physical);
        assert!(score_state(&phys, 3, Sigma::Plus).is_err());
    }

    #[test]
    fn estimate_weights_zero_outcomes_by_half() {
        let est = ScoreEstimate::from_counts(vec![
            SlotCounts { positive: 2, zero: 2, negative: 0 },
            SlotCounts { positive: 0, zero: 0, negative: 4 },
        ]);
        assert_abs_diff_eq!(est.p_value, 0.375);
    }
}
