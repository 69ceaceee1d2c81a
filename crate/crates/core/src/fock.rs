//! Truncated Fock-space operator algebra.
//!
//! Every operator lives on `n_max + 1` levels per mode. Two-mode matrices use
//! the Kronecker convention `mode1 (x) mode2` with the first index slowest, so
//! the basis vector `|n1, n2>` sits at position `n1 * (n_max + 1) + n2`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{herm_eigen, hermiticity_defect, hermitize, partial_transpose_raw, CMatrix, CVector};

const HERMITIAN_TOL: f64 = 1e-10;
const STATE_TOL: f64 = 1e-9;

/// Which mode labels index a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisTag {
    /// A single oscillator mode.
    SingleMode,
    /// Two modes labelled by the physical oscillators `{a1, a2}`.
    Physical,
    /// Two modes labelled by the normal modes `{a+, a-}`.
    Normal,
}

impl BasisTag {
    pub fn modes(self) -> usize {
        match self {
            BasisTag::SingleMode => 1,
            BasisTag::Physical | BasisTag::Normal => 2,
        }
    }
}

/// Dense complex matrix over a truncated one- or two-mode Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    matrix: CMatrix,
    n_max: usize,
    basis: BasisTag,
}

impl FockOperator {
    pub fn new(matrix: CMatrix, n_max: usize, basis: BasisTag) -> Result<Self> {
        let dim = (n_max + 1).pow(basis.modes() as u32);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "{:?} operator at n_max={n_max} needs {dim}x{dim}, got {}x{}",
                basis,
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { matrix, n_max, basis })
    }

    pub fn from_real(matrix: &DMatrix<f64>, n_max: usize, basis: BasisTag) -> Result<Self> {
        Self::new(crate::linalg::to_complex(matrix), n_max, basis)
    }

    pub fn identity(n_max: usize, basis: BasisTag) -> Self {
        let dim = (n_max + 1).pow(basis.modes() as u32);
        Self { matrix: CMatrix::identity(dim, dim), n_max, basis }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn modes(&self) -> usize {
        self.basis.modes()
    }

    pub fn basis(&self) -> BasisTag {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self { matrix: self.matrix.adjoint(), n_max: self.n_max, basis: self.basis }
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.matrix)
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() <= 1e-12
    }

    /// Product `self * other`; both operands must share truncation and tag.
    pub fn mul(&self, other: &FockOperator) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(Self { matrix: &self.matrix * &other.matrix, n_max: self.n_max, basis: self.basis })
    }

    /// `<v| self |v>` for a state vector on the same space.
    pub fn expectation(&self, v: &CVector) -> Result<Complex64> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} against operator of dimension {}",
                v.len(),
                self.dim()
            )));
        }
        Ok(v.dotc(&(&self.matrix * v)))
    }

    fn check_same_space(&self, other: &FockOperator) -> Result<()> {
        if self.n_max != other.n_max || self.basis != other.basis {
            return Err(Error::DimensionMismatch(format!(
                "operands live on ({:?}, n_max={}) and ({:?}, n_max={})",
                self.basis, self.n_max, other.basis, other.n_max
            )));
        }
        Ok(())
    }
}

/// Single-mode ladder operator `a` with `sqrt(n)` at `(n-1, n)`.
pub fn annihilation_matrix(n_max: usize) -> FockOperator {
    let d = n_max + 1;
    let mut m = CMatrix::zeros(d, d);
    for n in 1..d {
        m[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    FockOperator { matrix: m, n_max, basis: BasisTag::SingleMode }
}

pub fn creation_matrix(n_max: usize) -> FockOperator {
    annihilation_matrix(n_max).adjoint()
}

pub fn number_matrix(n_max: usize) -> FockOperator {
    let d = n_max + 1;
    let m = CMatrix::from_diagonal(&DVector::from_fn(d, |n, _| Complex64::new(n as f64, 0.0)));
    FockOperator { matrix: m, n_max, basis: BasisTag::SingleMode }
}

/// Poisson weight lying above `n_max` for a coherent state of mean photon number `nbar`.
pub fn coherent_tail_mass(nbar: f64, n_max: usize) -> f64 {
    if nbar == 0.0 {
        return 0.0;
    }
    // Walk the Poisson pmf in log space so large amplitudes do not underflow early.
    let mut log_term = -nbar;
    for n in 1..=n_max {
        log_term += nbar.ln() - (n as f64).ln();
    }
    let mut tail = 0.0;
    let mut n = n_max + 1;
    loop {
        log_term += nbar.ln() - (n as f64).ln();
        let term = log_term.exp();
        tail += term;
        if (n as f64) > nbar && term <= tail * 1e-17 + 1e-300 {
            break;
        }
        n += 1;
    }
    tail
}

/// Truncated coherent state `e^{-|a|^2/2} a^n / sqrt(n!)`, renormalized.
pub fn coherent_state(alpha: Complex64, n_max: usize, tol: f64) -> Result<CVector> {
    let tail = coherent_tail_mass(alpha.norm_sqr(), n_max);
    if tail > tol {
        return Err(Error::TruncationInsufficient { n_max, tail, tol });
    }
    let d = n_max + 1;
    let mut v = CVector::zeros(d);
    v[0] = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 1..d {
        v[n] = v[n - 1] * alpha / (n as f64).sqrt();
    }
    let norm = v.norm();
    Ok(v.unscale(norm))
}

/// Smallest truncation whose coherent-state tail mass is at most `tol`.
pub fn coherent_truncation(alpha: Complex64, tol: f64) -> usize {
    let nbar = alpha.norm_sqr();
    let mut n = nbar.ceil() as usize;
    while coherent_tail_mass(nbar, n) > tol {
        n += 1;
    }
    n
}

/// Displacement operator on the truncated space with diagnostics.
#[derive(Debug, Clone)]
pub struct Displacement {
    pub operator: FockOperator,
    /// Largest entry of `|D D^dagger - 1|`.
    pub unitarity_defect: f64,
    /// Largest amplitude that the lower half of the levels sends onto the top level.
    /// Small values mean the truncated exponential agrees with the exact one there.
    pub edge_amplitude: f64,
}

/// `exp(alpha a^dagger - alpha^* a)` evaluated on the truncated space.
pub fn displacement_matrix(alpha: Complex64, n_max: usize) -> Displacement {
    let a = annihilation_matrix(n_max).into_matrix();
    let gen = a.adjoint() * alpha - a * alpha.conj();
    // gen is anti-Hermitian, so i*gen is Hermitian and exp(gen) = V exp(-i lambda) V^dagger.
    let h = gen * Complex64::i();
    let (vals, vecs) = herm_eigen(&h);
    let phases = DVector::from_iterator(vals.len(), vals.iter().map(|&l| Complex64::new(0.0, -l).exp()));
    let mut scaled = vecs.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    let d_mat = &scaled * vecs.adjoint();
    let dim = n_max + 1;
    let defect = (&d_mat * d_mat.adjoint() - CMatrix::identity(dim, dim)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let edge = (0..=n_max / 2).map(|j| d_mat[(n_max, j)].norm()).fold(0.0, f64::max);
    Displacement {
        operator: FockOperator { matrix: d_mat, n_max, basis: BasisTag::SingleMode },
        unitarity_defect: defect,
        edge_amplitude: edge,
    }
}

/// Kronecker product of two single-mode operators, tagged with `basis`.
pub fn tensor(a: &FockOperator, b: &FockOperator, basis: BasisTag) -> Result<FockOperator> {
    if a.basis != BasisTag::SingleMode || b.basis != BasisTag::SingleMode {
        return Err(Error::DimensionMismatch("tensor factors must be single-mode operators".into()));
    }
    if a.n_max != b.n_max {
        return Err(Error::DimensionMismatch(format!(
            "tensor factors truncated at {} and {}; use tensor_raw for mixed truncations",
            a.n_max, b.n_max
        )));
    }
    if basis == BasisTag::SingleMode {
        return Err(Error::DimensionMismatch("a tensor product is a two-mode operator".into()));
    }
    Ok(FockOperator { matrix: a.matrix.kronecker(&b.matrix), n_max: a.n_max, basis })
}

/// Kronecker product of raw matrices with arbitrary dimensions.
pub fn tensor_raw(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Partial transpose on mode 2. Only defined in the physical `{a1, a2}` labelling.
pub fn partial_transpose(op: &FockOperator) -> Result<FockOperator> {
    if op.basis != BasisTag::Physical {
        return Err(Error::WrongBasisTag { expected: BasisTag::Physical, found: op.basis });
    }
    let d = op.n_max + 1;
    Ok(FockOperator { matrix: partial_transpose_raw(&op.matrix, d, d), n_max: op.n_max, basis: op.basis })
}

/// Label of one generalized Gell-Mann element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GellMannKind {
    Identity,
    /// `(E_jk + E_kj)/sqrt(2)`, `j < k`.
    Symmetric(usize, usize),
    /// `-i (E_jk - E_kj)/sqrt(2)`, `j < k`.
    Antisymmetric(usize, usize),
    /// `(sum_{j<l} E_jj - l E_ll)/sqrt(l(l+1))`, `1 <= l < d`.
    Diagonal(usize),
}

impl GellMannKind {
    pub fn is_real(self) -> bool {
        !matches!(self, GellMannKind::Antisymmetric(..))
    }
}

/// Orthonormal Hermitian basis of `d x d` matrices under `tr(A B)`.
#[derive(Debug, Clone)]
pub struct HermitianBasis {
    n_max: usize,
    kinds: Vec<GellMannKind>,
    elements: Vec<CMatrix>,
}

impl HermitianBasis {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kinds(&self) -> &[GellMannKind] {
        &self.kinds
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn element(&self, idx: usize) -> &CMatrix {
        &self.elements[idx]
    }

    /// Coefficients `tr(M B_j)`; real whenever `M` is Hermitian.
    pub fn expand(&self, m: &CMatrix) -> Vec<Complex64> {
        let d = self.dim();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        self.kinds
            .iter()
            .map(|kind| match *kind {
                GellMannKind::Identity => m.trace() / (d as f64).sqrt(),
                GellMannKind::Symmetric(j, k) => (m[(k, j)] + m[(j, k)]) * s,
                GellMannKind::Antisymmetric(j, k) => (m[(k, j)] - m[(j, k)]) * Complex64::new(0.0, -s),
                GellMannKind::Diagonal(l) => {
                    let head: Complex64 = (0..l).map(|j| m[(j, j)]).sum();
                    (head - m[(l, l)] * l as f64) / ((l * (l + 1)) as f64).sqrt()
                }
            })
            .collect()
    }

    pub fn reconstruct(&self, coeffs: &[Complex64]) -> CMatrix {
        let d = self.dim();
        let mut m = CMatrix::zeros(d, d);
        for (c, b) in coeffs.iter().zip(&self.elements) {
            m += b * *c;
        }
        m
    }
}

/// Generalized Gell-Mann basis on `n_max + 1` levels, element 0 proportional to the identity.
pub fn hermitian_basis(n_max: usize) -> HermitianBasis {
    let d = n_max + 1;
    let mut kinds = vec![GellMannKind::Identity];
    for j in 0..d {
        for k in (j + 1)..d {
            kinds.push(GellMannKind::Symmetric(j, k));
            kinds.push(GellMannKind::Antisymmetric(j, k));
        }
    }
    for l in 1..d {
        kinds.push(GellMannKind::Diagonal(l));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let elements = kinds
        .iter()
        .map(|kind| {
            let mut m = CMatrix::zeros(d, d);
            match *kind {
                GellMannKind::Identity => m.fill_diagonal(Complex64::new(1.0 / (d as f64).sqrt(), 0.0)),
                GellMannKind::Symmetric(j, k) => {
                    m[(j, k)] = Complex64::new(s, 0.0);
                    m[(k, j)] = Complex64::new(s, 0.0);
                }
                GellMannKind::Antisymmetric(j, k) => {
                    m[(j, k)] = Complex64::new(0.0, -s);
                    m[(k, j)] = Complex64::new(0.0, s);
                }
                GellMannKind::Diagonal(l) => {
                    let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
                    for j in 0..l {
                        m[(j, j)] = Complex64::new(norm, 0.0);
                    }
                    m[(l, l)] = Complex64::new(-(l as f64) * norm, 0.0);
                }
            }
            m
        })
        .collect();
    HermitianBasis { n_max, kinds, elements }
}

/// Ascending eigenvalues and matching eigenvectors (as columns) of a Hermitian operator.
pub fn eig_hermitian(op: &FockOperator) -> Result<(DVector<f64>, CMatrix)> {
    let scale = op.matrix.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let defect = op.hermiticity_defect();
    if defect > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(defect));
    }
    Ok(herm_eigen(&op.matrix))
}

/// Trace norm of a Hermitian matrix.
pub fn trace_norm(m: &CMatrix) -> f64 {
    herm_eigen(m).0.iter().map(|x| x.abs()).sum()
}

/// Density operator on a truncated two-mode space.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeState {
    matrix: CMatrix,
    n_max: usize,
    basis: BasisTag,
}

impl TwoModeState {
    /// Validates Hermiticity, unit trace and positivity before accepting `matrix`.
    pub fn new(matrix: CMatrix, n_max: usize, basis: BasisTag) -> Result<Self> {
        if basis == BasisTag::SingleMode {
            return Err(Error::InvalidState("a two-mode state needs a two-mode basis tag".into()));
        }
        let d = (n_max + 1) * (n_max + 1);
        if matrix.shape() != (d, d) {
            return Err(Error::DimensionMismatch(format!(
                "two-mode state at n_max={n_max} needs {d}x{d}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let defect = hermiticity_defect(&matrix);
        if defect > STATE_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {defect:.3e})")));
        }
        let matrix = hermitize(&matrix);
        let tr = matrix.trace().re;
        if (tr - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min_eig = herm_eigen(&matrix).0[0];
        if min_eig < -STATE_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:.3e}")));
        }
        Ok(Self { matrix, n_max, basis })
    }

    /// Rank-one state `|v><v|`; `v` is normalized here.
    pub fn from_pure(v: &CVector, n_max: usize, basis: BasisTag) -> Result<Self> {
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        let u = v.unscale(norm);
        Self::new(&u * u.adjoint(), n_max, basis)
    }

    /// Product state `rho1 (x) rho2` of two single-mode density matrices.
    pub fn product(rho1: &CMatrix, rho2: &CMatrix, basis: BasisTag) -> Result<Self> {
        if rho1.shape() != rho2.shape() || rho1.nrows() != rho1.ncols() {
            return Err(Error::DimensionMismatch("product factors must be equal square matrices".into()));
        }
        let n_max = rho1.nrows() - 1;
        Self::new(rho1.kronecker(rho2), n_max, basis)
    }

    pub fn vacuum(n_max: usize, basis: BasisTag) -> Self {
        let d = (n_max + 1) * (n_max + 1);
        let mut m = CMatrix::zeros(d, d);
        m[(0, 0)] = Complex64::new(1.0, 0.0);
        Self { matrix: m, n_max, basis }
    }

    pub fn maximally_mixed(n_max: usize, basis: BasisTag) -> Self {
        let d = (n_max + 1) * (n_max + 1);
        Self { matrix: CMatrix::identity(d, d) / Complex64::new(d as f64, 0.0), n_max, basis }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn basis(&self) -> BasisTag {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn as_operator(&self) -> FockOperator {
        FockOperator { matrix: self.matrix.clone(), n_max: self.n_max, basis: self.basis }
    }

    /// Pads the state with empty levels up to `n_new`.
    pub fn embed(&self, n_new: usize) -> Result<Self> {
        if n_new < self.n_max {
            return Err(Error::DimensionMismatch(format!("cannot embed n_max={} into {n_new}", self.n_max)));
        }
        let m = embed_two_mode(&self.matrix, self.n_max, n_new);
        Ok(Self { matrix: m, n_max: n_new, basis: self.basis })
    }

    /// `tr(rho O)` for an operator on the same space.
    pub fn expect(&self, op: &FockOperator) -> Result<Complex64> {
        if op.n_max != self.n_max || op.basis != self.basis {
            return Err(Error::DimensionMismatch(format!(
                "state on ({:?}, n_max={}) against operator on ({:?}, n_max={})",
                self.basis, self.n_max, op.basis, op.n_max
            )));
        }
        Ok(self.matrix.iter().zip(op.matrix.transpose().iter()).map(|(a, b)| a * b).sum())
    }

    /// Skips validation; callers guarantee the matrix is a density operator.
    pub(crate) fn from_parts(matrix: CMatrix, n_max: usize, basis: BasisTag) -> Self {
        Self { matrix, n_max, basis }
    }
}

/// Index of `|n1, n2>` when each mode has `d` levels.
pub fn pair_index(n1: usize, n2: usize, d: usize) -> usize {
    n1 * d + n2
}

pub(crate) fn embed_two_mode(m: &CMatrix, n_old: usize, n_new: usize) -> CMatrix {
    let (d_old, d_new) = (n_old + 1, n_new + 1);
    let map = |i: usize| pair_index(i / d_old, i % d_old, d_new);
    let mut out = CMatrix::zeros(d_new * d_new, d_new * d_new);
    for i in 0..d_old * d_old {
        for j in 0..d_old * d_old {
            out[(map(i), map(j))] = m[(i, j)];
        }
    }
    out
}

/// Logarithmic negativity `ln tr|rho^T2|` in the physical labelling.
pub fn log_negativity(rho: &TwoModeState) -> Result<f64> {
    let pt = partial_transpose(&rho.as_operator())?;
    let ln = trace_norm(pt.matrix()).ln();
    Ok(if ln < 1e-9 { 0.0 } else { ln })
}
