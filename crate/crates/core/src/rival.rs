//! Moment-based entanglement criteria and the family of normal-mode product
//! states that evades them.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{annihilation_matrix, pair_index, BasisTag, TwoModeState};
use crate::linalg::{CMatrix, CVector};
use crate::normal_modes::rotate_vector;

/// Slack below which a strict inequality is treated as unsatisfied.
const DETECTION_TOL: f64 = 1e-9;

/// First, second and mixed fourth moments of the physical mode operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub a1: Complex64,
    pub a2: Complex64,
    pub a1_sq: Complex64,
    pub a2_sq: Complex64,
    pub a1a2: Complex64,
    pub n1: f64,
    pub n2: f64,
    /// `<a1^dagger a2>`.
    pub a1dag_a2: Complex64,
    /// `<a1^dagger a1 a2^dagger a2>`.
    pub n1n2: f64,
}

impl MomentTable {
    pub fn max_first_moment(&self) -> f64 {
        self.a1.norm().max(self.a2.norm())
    }

    /// Largest absolute difference between corresponding entries.
    pub fn max_abs_diff(&self, other: &MomentTable) -> f64 {
        [
            (self.a1 - other.a1).norm(),
            (self.a2 - other.a2).norm(),
            (self.a1_sq - other.a1_sq).norm(),
            (self.a2_sq - other.a2_sq).norm(),
            (self.a1a2 - other.a1a2).norm(),
            (self.n1 - other.n1).abs(),
            (self.n2 - other.n2).abs(),
            (self.a1dag_a2 - other.a1dag_a2).norm(),
            (self.n1n2 - other.n1n2).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn trace_product(rho: &CMatrix, op: &CMatrix) -> Complex64 {
    rho.iter().zip(op.transpose().iter()).map(|(a, b)| a * b).sum()
}

/// Moments by direct traces against the truncated ladder operators.
///
/// Only lowering operators are truncated, and every moment is written as
/// `tr(rho A^dagger B)` with lowering `A`, `B`, so the values are exact for
/// states supported on the box.
pub fn moments(rho: &TwoModeState) -> Result<MomentTable> {
    if rho.basis() != BasisTag::Physical {
        return Err(Error::WrongBasisTag { expected: BasisTag::Physical, found: rho.basis() });
    }
    let n = rho.n_max();
    let a = annihilation_matrix(n).into_matrix();
    let id = CMatrix::identity(n + 1, n + 1);
    let a1 = a.kronecker(&id);
    let a2 = id.kronecker(&a);
    let m = rho.matrix();
    let a12 = &a1 * &a2;
    Ok(MomentTable {
        a1: trace_product(m, &a1),
        a2: trace_product(m, &a2),
        a1_sq: trace_product(m, &(&a1 * &a1)),
        a2_sq: trace_product(m, &(&a2 * &a2)),
        a1a2: trace_product(m, &a12),
        n1: trace_product(m, &(a1.adjoint() * &a1)).re,
        n2: trace_product(m, &(a2.adjoint() * &a2)).re,
        a1dag_a2: trace_product(m, &(a1.adjoint() * &a2)),
        n1n2: trace_product(m, &(a12.adjoint() * &a12)).re,
    })
}

/// Where the coefficient `psi_n` is placed in the `a+` mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportMode {
    /// `psi_n` multiplies `|n>+`.
    Direct,
    /// `psi_n` multiplies `|nK>+`.
    MultiplesOfK,
}

/// Product state `(sum_n psi_n |level(n)>+) (x) |0>-`, kept in both labellings.
#[derive(Debug, Clone)]
pub struct FamilyState {
    pub psi: Vec<Complex64>,
    pub k: usize,
    pub theta: f64,
    pub n_max: usize,
    pub support: SupportMode,
    /// Single-mode `a+` amplitudes indexed by Fock level.
    pub plus_amplitudes: CVector,
    pub normal_vector: CVector,
    pub physical_vector: CVector,
    pub normal: TwoModeState,
    pub physical: TwoModeState,
}

impl FamilyState {
    /// `<n>` of the `a+` state.
    pub fn mean_n(&self) -> f64 {
        self.plus_amplitudes.iter().enumerate().map(|(n, c)| n as f64 * c.norm_sqr()).sum()
    }

    /// `<n^2>` of the `a+` state.
    pub fn mean_n_sq(&self) -> f64 {
        self.plus_amplitudes.iter().enumerate().map(|(n, c)| (n * n) as f64 * c.norm_sqr()).sum()
    }

    /// `<a+^j>` for `j = 1, 2`.
    fn plus_lowering(&self, power: usize) -> Complex64 {
        let v = &self.plus_amplitudes;
        (power..v.len())
            .map(|n| {
                let amp: f64 = (0..power).map(|i| ((n - i) as f64).sqrt()).product();
                v[n - power].conj() * v[n] * amp
            })
            .sum()
    }

    /// Moments predicted from the `a+` state alone. With support on multiples of
    /// `K >= 3` the first and squared moments vanish.
    pub fn closed_form_moments(&self) -> MomentTable {
        let (s, c) = self.theta.sin_cos();
        let a = self.plus_lowering(1);
        let a_sq = self.plus_lowering(2);
        let nbar = self.mean_n();
        MomentTable {
            a1: a * c,
            a2: a * s,
            a1_sq: a_sq * (c * c),
            a2_sq: a_sq * (s * s),
            a1a2: a_sq * (s * c),
            n1: c * c * nbar,
            n2: s * s * nbar,
            a1dag_a2: Complex64::new(s * c * nbar, 0.0),
            n1n2: (s * c).powi(2) * (self.mean_n_sq() - nbar),
        }
    }
}

/// Build a family state and rotate it to the physical labelling.
pub fn family_state(psi: &[Complex64], k: usize, theta: f64, n_max: usize, support: SupportMode) -> Result<FamilyState> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    let norm_sq: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
    if (norm_sq - 1.0).abs() > 1e-9 {
        return Err(Error::NormalizationError(norm_sq));
    }
    if psi.first().map_or(0.0, |c| c.norm_sqr()) >= 1.0 - 1e-12 {
        return Err(Error::PsiZeroUnit);
    }
    let level = |n: usize| match support {
        SupportMode::Direct => n,
        SupportMode::MultiplesOfK => n * k,
    };
    let top = psi.iter().enumerate().filter(|(_, c)| c.norm_sqr() > 0.0).map(|(n, _)| level(n)).max().unwrap_or(0);
    if top > n_max {
        return Err(Error::DimensionMismatch(format!("a+ level {top} exceeds truncation n_max={n_max}")));
    }
    let d = n_max + 1;
    let mut plus = CVector::zeros(d);
    for (n, c) in psi.iter().enumerate() {
        if c.norm_sqr() > 0.0 {
            plus[level(n)] = *c;
        }
    }
    let mut normal_vector = CVector::zeros(d * d);
    for n in 0..d {
        normal_vector[pair_index(n, 0, d)] = plus[n];
    }
    // Every occupied total-number block lies below n_max, so the box rotation is exact here.
    let physical_vector = rotate_vector(theta, &normal_vector, n_max, BasisTag::Physical)?;
    let normal = TwoModeState::from_pure(&normal_vector, n_max, BasisTag::Normal)?;
    let physical = TwoModeState::from_pure(&physical_vector, n_max, BasisTag::Physical)?;
    Ok(FamilyState {
        psi: psi.to_vec(),
        k,
        theta,
        n_max,
        support,
        plus_amplitudes: plus,
        normal_vector,
        physical_vector,
        normal,
        physical,
    })
}

/// Quadrature second moments used by the variance criteria.
struct Quadratures {
    var_x1: f64,
    var_x2: f64,
    var_p1: f64,
    var_p2: f64,
    cov_x: f64,
    cov_p: f64,
    sq_x1: f64,
    sq_x2: f64,
    sq_p1: f64,
    sq_p2: f64,
    corr_x: f64,
    corr_p: f64,
}

/// Moments of `X = a + a^dagger` and `P = (a - a^dagger)/i`.
fn quadratures(m: &MomentTable) -> Quadratures {
    let sq_x1 = 2.0 * m.a1_sq.re + 2.0 * m.n1 + 1.0;
    let sq_x2 = 2.0 * m.a2_sq.re + 2.0 * m.n2 + 1.0;
    let sq_p1 = 2.0 * m.n1 + 1.0 - 2.0 * m.a1_sq.re;
    let sq_p2 = 2.0 * m.n2 + 1.0 - 2.0 * m.a2_sq.re;
    let corr_x = 2.0 * m.a1a2.re + 2.0 * m.a1dag_a2.re;
    let corr_p = -2.0 * m.a1a2.re + 2.0 * m.a1dag_a2.re;
    let (mx1, mx2) = (2.0 * m.a1.re, 2.0 * m.a2.re);
    let (mp1, mp2) = (2.0 * m.a1.im, 2.0 * m.a2.im);
    Quadratures {
        var_x1: sq_x1 - mx1 * mx1,
        var_x2: sq_x2 - mx2 * mx2,
        var_p1: sq_p1 - mp1 * mp1,
        var_p2: sq_p2 - mp2 * mp2,
        cov_x: corr_x - mx1 * mx2,
        cov_p: corr_p - mp1 * mp2,
        sq_x1,
        sq_x2,
        sq_p1,
        sq_p2,
        corr_x,
        corr_p,
    }
}

/// Duan margin `<(du)^2> + <(dv)^2> - (c^2 + 1/c^2)` with
/// `u = |c| x1 + x2/c`, `v = |c| p1 - p2/c` in vacuum-normalized quadratures.
/// A negative margin certifies entanglement.
pub fn duan_margin(m: &MomentTable, c: f64) -> f64 {
    assert!(c != 0.0 && c.is_finite(), "Duan parameter must be finite and nonzero");
    let q = quadratures(m);
    let c2 = c * c;
    let sgn = c.signum();
    let var_u = 0.5 * c2 * q.var_x1 + 0.5 * q.var_x2 / c2 + sgn * q.cov_x;
    let var_v = 0.5 * c2 * q.var_p1 + 0.5 * q.var_p2 / c2 - sgn * q.cov_p;
    var_u + var_v - (c2 + 1.0 / c2)
}

/// Symmetric log grid `+-10^x` for `x` evenly spaced in `[-1, 1]`.
pub fn duan_grid(points_per_sign: usize) -> Vec<f64> {
    let n = points_per_sign.max(2);
    let mut grid = Vec::with_capacity(2 * n);
    for i in 0..n {
        let c = 10f64.powf(-1.0 + 2.0 * i as f64 / (n - 1) as f64);
        grid.push(c);
        grid.push(-c);
    }
    grid
}

/// Smallest Duan margin over the grid and the interior optimum of each sign branch.
pub fn duan_min_margin(m: &MomentTable, grid: &[f64]) -> (f64, f64) {
    let q = quadratures(m);
    let mut best = (f64::INFINITY, 1.0);
    let mut consider = |c: f64| {
        if c.is_finite() && c != 0.0 {
            let v = duan_margin(m, c);
            if v < best.0 {
                best = (v, c);
            }
        }
    };
    grid.iter().copied().for_each(&mut consider);
    // margin(c) = A c^2 + B / c^2 + const, minimized at c^2 = sqrt(B/A) when both are positive.
    let a = 0.5 * (q.var_x1 + q.var_p1) - 1.0;
    let b = 0.5 * (q.var_x2 + q.var_p2) - 1.0;
    if a > 0.0 && b > 0.0 {
        let c = (b / a).sqrt().sqrt();
        consider(c);
        consider(-c);
    }
    best
}

/// Outcome of the simplified Zhang test with both slacks `lhs - rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZhangOutcome {
    pub detected: bool,
    /// `4 <n1><n2> - 4 |<a1 a2>|^2`.
    pub slack_squeezing: f64,
    /// `4 <n1><n2> - 4 |<a1^dagger a2>|^2`.
    pub slack_exchange: f64,
}

/// Simplified Zhang criterion, valid only for states with vanishing first moments.
pub fn zhang_detects(m: &MomentTable) -> Result<ZhangOutcome> {
    let first = m.max_first_moment();
    if first > 1e-9 {
        return Err(Error::NonzeroFirstMoments(first));
    }
    let lhs = 4.0 * m.n1 * m.n2;
    let s1 = lhs - 4.0 * m.a1a2.norm_sqr();
    let s2 = lhs - 4.0 * m.a1dag_a2.norm_sqr();
    Ok(ZhangOutcome { detected: s1 < -DETECTION_TOL || s2 < -DETECTION_TOL, slack_squeezing: s1, slack_exchange: s2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HilleryZubairyOutcome {
    pub detected: bool,
    /// `<n1 n2> - |<a1 a2^dagger>|^2`; detection needs it strictly negative.
    pub slack: f64,
}

pub fn hillery_zubairy_detects(m: &MomentTable) -> HilleryZubairyOutcome {
    let slack = m.n1n2 - m.a1dag_a2.norm_sqr();
    HilleryZubairyOutcome { detected: slack < -DETECTION_TOL, slack }
}

/// Abiuso quadrature criterion margin `<U^2> + <V^2> - (k^2 + k^-2)/2 * s^2/(1+s^2)`,
/// with the coherent-state ancillas averaged over a Gaussian of width `sigma_src`.
pub fn abiuso_margin(m: &MomentTable, kappa: f64, sigma_src: f64) -> f64 {
    assert!(kappa != 0.0 && kappa.is_finite(), "kappa must be finite and nonzero");
    assert!(sigma_src > 0.0, "source width must be positive");
    let q = quadratures(m);
    let k2 = kappa * kappa;
    let sym = k2 + 1.0 / k2;
    let s2 = sigma_src * sigma_src;
    // Ancilla vacuum noise plus the residual displacement (1 - 1/sqrt 2)^2 averaged over the source.
    let ancilla = 0.5 * sym + (3.0 - 2.0 * 2f64.sqrt()) * sym * s2 / 2.0;
    let u_sys = 0.25 * k2 * q.sq_x1 + 0.25 * q.sq_x2 / k2 - 0.5 * q.corr_x;
    let v_sys = 0.25 * k2 * q.sq_p1 + 0.25 * q.sq_p2 / k2 + 0.5 * q.corr_p;
    ancilla + u_sys + v_sys - 0.5 * sym * s2 / (1.0 + s2)
}

/// Smallest Abiuso margin over a `(kappa, sigma)` grid.
pub fn abiuso_min_margin(m: &MomentTable, kappas: &[f64], sigmas: &[f64]) -> f64 {
    kappas
        .iter()
        .flat_map(|&k| sigmas.iter().map(move |&s| (k, s)))
        .map(|(k, s)| abiuso_margin(m, k, s))
        .fold(f64::INFINITY, f64::min)
}

/// `psi` given as real amplitudes.
pub fn real_psi(values: &[f64]) -> Vec<Complex64> {
    values.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// Normalize a real coefficient vector.
pub fn normalized(values: &DVector<f64>) -> Vec<Complex64> {
    let n = values.norm();
    values.iter().map(|&v| Complex64::new(v / n, 0.0)).collect()
}
