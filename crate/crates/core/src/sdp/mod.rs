//! Lower bound on logarithmic negativity from an observed precession score.
//!
//! Given `K`, the mixing angle and a target score `p`, the program minimizes
//! `z = 1 + tr N` over normal-mode states `sigma` on the `n_max` box with
//! `tr(sigma (Q_K (x) 1)) = p`, where `rho_12 = V sigma V^T` is the exact physical
//! image on the `2 n_max` box and `rho_12^T2 + N >= 0`, `N >= 0`. At the optimum
//! `z = (1 + ||rho^T2||_1) / 2`, so `S_N = ln(2z - 1)`.
//!
//! Every operator involved is real, so the program is solved over real symmetric
//! matrices. The affine constraints are removed by parametrizing `sigma` around a
//! feasible point with an orthonormal basis of the admissible directions.

mod ipm;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{hermitian_basis, pair_index, BasisTag, HermitianBasis, TwoModeState};
use crate::linalg::{sym_eigen, sym_eigenvalues, symmetrize, to_complex};
use crate::normal_modes::rotation_isometry;
use crate::precession::{max_score, qk_real};

pub use ipm::IpmOptions as SolverOptions;

/// Scores within this distance of an extreme eigenvalue of `Q_K` are treated as lying on it.
const FACE_TOL: f64 = 1e-9;
const SUPPORT_TOL: f64 = 1e-15;

#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub k: usize,
    pub theta: f64,
    pub p_target: f64,
    pub n_max: usize,
    /// Hermitian basis on the `n_max` box.
    pub basis_small: HermitianBasis,
    /// Hermitian basis on the `2 n_max` box that holds the physical image.
    pub basis_large: HermitianBasis,
    /// `tr((Q_K (x) 1)(B_j (x) B_k))` for all product pairs except the identity pair,
    /// indexed `j * len + k - 1`.
    pub q_vec: Vec<f64>,
    /// True when `p_target` sits on the top or bottom eigenvalue of `Q_K`.
    pub on_face: bool,
    /// Columns spanning the allowed support of `sigma` (the identity off the face).
    embed: DMatrix<f64>,
    sigma0: DMatrix<f64>,
    directions: Vec<DMatrix<f64>>,
    r0: DMatrix<f64>,
    r_dirs: Vec<DMatrix<f64>>,
    /// Physical index pairs `(n1, m2)` labelling the rows of the partial transpose block.
    support: Vec<(usize, usize)>,
}

impl SdpProblem {
    /// Number of free real parameters of `sigma`.
    pub fn n_parameters(&self) -> usize {
        self.directions.len()
    }

    /// Dimension of the partial-transpose block after dropping unreachable rows.
    pub fn pt_block_dim(&self) -> usize {
        self.support.len()
    }

    pub fn support(&self) -> &[(usize, usize)] {
        &self.support
    }

    /// Coordinates `tr(rho (B_j (x) B_k))` of a normal-mode state in the product basis,
    /// identity pair excluded, in the order of `q_vec`.
    pub fn coordinates(&self, rho: &TwoModeState) -> Result<Vec<f64>> {
        if rho.basis() != BasisTag::Normal || rho.n_max() != self.n_max {
            return Err(Error::DimensionMismatch(format!(
                "expected a normal-mode state at n_max={}, got {:?} at n_max={}",
                self.n_max,
                rho.basis(),
                rho.n_max()
            )));
        }
        let d = self.n_max + 1;
        let m = rho.matrix();
        let mut out = Vec::with_capacity(d.pow(4) - 1);
        for bj in self.basis_small.elements() {
            // Contract the first mode against B_j, leaving an operator on the second.
            let partial = crate::linalg::CMatrix::from_fn(d, d, |b, e| {
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..d {
                    for c in 0..d {
                        acc += m[(pair_index(a, b, d), pair_index(c, e, d))] * bj[(c, a)];
                    }
                }
                acc
            });
            out.extend(self.basis_small.expand(&partial).into_iter().map(|z| z.re));
        }
        out.remove(0);
        Ok(out)
    }

    /// Physical image `V sigma V^T` of a normal-mode matrix on the `2 n_max` box.
    fn image(&self, iso: &DMatrix<f64>, sigma_full: &DMatrix<f64>) -> DMatrix<f64> {
        iso * sigma_full * iso.transpose()
    }
}

fn restricted_pt(m: &DMatrix<f64>, d_big: usize, support: &[(usize, usize)]) -> DMatrix<f64> {
    let n = support.len();
    DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = support[i];
        let (c, e) = support[j];
        m[(pair_index(a, e, d_big), pair_index(c, b, d_big))]
    })
}

/// Orthonormal basis of symmetric matrices on `d` levels orthogonal to the identity
/// and to `q`. Off-diagonal units outside the support of `q` are kept as they are;
/// the remaining coordinates are handled densely.
fn direction_basis(q: Option<&DMatrix<f64>>, d: usize) -> Vec<DMatrix<f64>> {
    let s2 = std::f64::consts::SQRT_2;
    let coupled_off = |i: usize, j: usize| q.is_some_and(|q| q[(i, j)].abs() > SUPPORT_TOL);
    let mut out = Vec::new();
    let mut coords: Vec<(usize, usize)> = (0..d).map(|i| (i, i)).collect();
    for i in 0..d {
        for j in (i + 1)..d {
            if coupled_off(i, j) {
                coords.push((i, j));
            } else {
                let mut m = DMatrix::zeros(d, d);
                m[(i, j)] = 1.0 / s2;
                m[(j, i)] = 1.0 / s2;
                out.push(m);
            }
        }
    }
    let r = coords.len();
    let mut constraints: Vec<DVector<f64>> = vec![DVector::from_fn(r, |c, _| if coords[c].0 == coords[c].1 { 1.0 } else { 0.0 })];
    if let Some(q) = q {
        constraints.push(DVector::from_fn(r, |c, _| {
            let (i, j) = coords[c];
            if i == j {
                q[(i, i)]
            } else {
                s2 * q[(i, j)]
            }
        }));
    }
    let mut ortho: Vec<DVector<f64>> = Vec::new();
    for mut v in constraints {
        for e in &ortho {
            let proj = e.dot(&v);
            v -= e * proj;
        }
        let n = v.norm();
        if n > 1e-10 {
            ortho.push(v / n);
        }
    }
    let mut proj = DMatrix::<f64>::identity(r, r);
    for e in &ortho {
        proj -= e * e.transpose();
    }
    let (vals, vecs) = sym_eigen(&proj);
    for (idx, &val) in vals.iter().enumerate() {
        if val < 0.5 {
            continue;
        }
        let col = vecs.column(idx);
        let mut m = DMatrix::zeros(d, d);
        for (c, &(i, j)) in coords.iter().enumerate() {
            if i == j {
                m[(i, i)] = col[c];
            } else {
                m[(i, j)] = col[c] / s2;
                m[(j, i)] = col[c] / s2;
            }
        }
        out.push(m);
    }
    out
}

fn q_vector(basis: &HermitianBasis, qk: &DMatrix<f64>) -> Vec<f64> {
    let len = basis.len();
    let sqrt_d = (basis.dim() as f64).sqrt();
    let q_coeffs = basis.expand(&to_complex(qk));
    let mut out = Vec::with_capacity(len * len - 1);
    for (j, qj) in q_coeffs.iter().enumerate() {
        for k in 0..len {
            if j == 0 && k == 0 {
                continue;
            }
            out.push(if k == 0 { qj.re * sqrt_d } else { 0.0 });
        }
    }
    out
}

/// Assemble the program for `K`, mixing angle `theta`, target score `p_target` and
/// normal-mode truncation `n_max`.
pub fn build_problem(k: usize, theta: f64, p_target: f64, n_max: usize) -> Result<SdpProblem> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be positive".into()));
    }
    if !theta.is_finite() || !p_target.is_finite() {
        return Err(Error::InvalidParameter("theta and p_target must be finite".into()));
    }
    let d = n_max + 1;
    let dim = d * d;
    let qk = qk_real(k, n_max);
    let (q_vals, q_vecs) = sym_eigen(&qk);
    let (p_min, p_max) = (q_vals[0], q_vals[d - 1]);
    if p_target > p_max + FACE_TOL || p_target < p_min - FACE_TOL {
        return Err(Error::InfeasibleTarget { p_target, p_min, p_max });
    }
    let qt = qk.kronecker(&DMatrix::<f64>::identity(d, d));
    let top_face = (p_target - p_max).abs() <= FACE_TOL;
    let bottom_face = !top_face && (p_target - p_min).abs() <= FACE_TOL;
    let on_face = top_face || bottom_face;

    let (embed, sigma0, directions) = if on_face {
        let level = if top_face { p_max } else { p_min };
        let cols: Vec<usize> = (0..d).filter(|&i| (q_vals[i] - level).abs() <= FACE_TOL).collect();
        let s = cols.len() * d;
        let mut embed = DMatrix::zeros(dim, s);
        for (ci, &c) in cols.iter().enumerate() {
            for j in 0..d {
                for a in 0..d {
                    embed[(pair_index(a, j, d), ci * d + j)] = q_vecs[(a, c)];
                }
            }
        }
        (embed, DMatrix::identity(s, s) / s as f64, direction_basis(None, s))
    } else {
        let q_bar = qt.trace() / dim as f64;
        let (target_vec, extreme) = if p_target >= q_bar {
            (q_vecs.column(d - 1).into_owned(), p_max)
        } else {
            (q_vecs.column(0).into_owned(), p_min)
        };
        let t = (p_target - q_bar) / (extreme - q_bar);
        let mut v = DVector::zeros(dim);
        for a in 0..d {
            v[pair_index(a, 0, d)] = target_vec[a];
        }
        let sigma0 = DMatrix::identity(dim, dim) * ((1.0 - t) / dim as f64) + &v * v.transpose() * t;
        (DMatrix::identity(dim, dim), sigma0, direction_basis(Some(&qt), dim))
    };

    let iso = rotation_isometry(theta, n_max);
    let d_big = 2 * n_max + 1;
    let mut reach1 = vec![false; d_big];
    let mut reach2 = vec![false; d_big];
    for a in 0..d_big {
        for b in 0..d_big {
            if iso.row(pair_index(a, b, d_big)).amax() > SUPPORT_TOL {
                reach1[a] = true;
                reach2[b] = true;
            }
        }
    }
    let support: Vec<(usize, usize)> = (0..d_big)
        .filter(|&a| reach1[a])
        .flat_map(|a| (0..d_big).filter(|&b| reach2[b]).map(move |b| (a, b)))
        .collect();

    let mut problem = SdpProblem {
        k,
        theta,
        p_target,
        n_max,
        basis_small: hermitian_basis(n_max),
        basis_large: hermitian_basis(2 * n_max),
        q_vec: Vec::new(),
        on_face,
        embed,
        sigma0,
        directions,
        r0: DMatrix::zeros(0, 0),
        r_dirs: Vec::new(),
        support,
    };
    problem.q_vec = q_vector(&problem.basis_small, &qk);
    let lift = |m: &DMatrix<f64>| &problem.embed * m * problem.embed.transpose();
    problem.r0 = symmetrize(&restricted_pt(&problem.image(&iso, &lift(&problem.sigma0)), d_big, &problem.support));
    problem.r_dirs = problem
        .directions
        .iter()
        .map(|s| symmetrize(&restricted_pt(&problem.image(&iso, &lift(s)), d_big, &problem.support)))
        .collect();
    Ok(problem)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// Rounding stopped progress within a hundred tolerances of the optimum.
    NearOptimal,
    MaxIterations,
}

impl SolveStatus {
    pub fn label(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::NearOptimal => "near_optimal",
            SolveStatus::MaxIterations => "max_iterations",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// Primal objective `1 + tr N`.
    pub z: f64,
    /// Dual objective, a lower bound on the optimal `z`.
    pub z_lower: f64,
    /// `ln(2z - 1)`, clamped to zero when `z` is within tolerance of one.
    pub s_n: f64,
    /// `ln(2 z_lower - 1)` with the same clamp.
    pub s_n_lower: f64,
    /// Absolute primal-dual objective difference at termination.
    pub dual_gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    /// Largest value of primal minus dual objective over the run; positive values
    /// beyond rounding would signal a broken certificate.
    pub duality_violation: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    /// Minimizing state in the normal-mode labelling.
    pub rho: TwoModeState,
    /// Optimal `N` on the reachable partial-transpose rows.
    pub negative_part: DMatrix<f64>,
    pub wall_time_s: f64,
}

fn log_neg_of(z: f64, tol: f64) -> f64 {
    let t = 2.0 * z - 1.0;
    if t <= 1.0 + 2.0 * tol {
        0.0
    } else {
        t.ln()
    }
}

/// Solve with default options and the given gap tolerance.
pub fn solve(problem: &SdpProblem, tol: f64) -> Result<SdpSolution> {
    let opts = SolverOptions { gap_tol: tol, feas_tol: tol, ..SolverOptions::default() };
    solve_with(problem, &opts)
}

pub fn solve_with(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    if !(opts.gap_tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", opts.gap_tol)));
    }
    let start = Instant::now();
    let dim3 = problem.support.len();
    let lmin = sym_eigenvalues(&problem.r0)[0];
    let n0 = (-lmin).max(0.0) + 1.0 / dim3 as f64;
    let dim1 = problem.sigma0.nrows();
    let data = ipm::BlockData { s: &problem.directions, r: &problem.r_dirs, c1: &problem.sigma0, c3: &problem.r0 };
    let res = ipm::run(
        data,
        DVector::zeros(problem.directions.len()),
        DMatrix::identity(dim3, dim3) * n0,
        0.5 * n0 * dim1 as f64,
        opts,
    )?;
    let z = 1.0 - res.primal_obj;
    let z_lower = 1.0 - res.dual_obj;
    let sigma = symmetrize(&(&problem.embed * &res.z1 * problem.embed.transpose()));
    let sigma = sigma.unscale(sigma.trace());
    let rho = TwoModeState::from_parts(to_complex(&sigma), problem.n_max, BasisTag::Normal);
    let status = match res.termination {
        ipm::Termination::Converged => SolveStatus::Optimal,
        ipm::Termination::Stalled => SolveStatus::NearOptimal,
        ipm::Termination::MaxIterations => SolveStatus::MaxIterations,
    };
    Ok(SdpSolution {
        z,
        z_lower,
        s_n: log_neg_of(z, opts.gap_tol),
        s_n_lower: log_neg_of(z_lower, opts.gap_tol),
        dual_gap: (z - z_lower).abs(),
        primal_infeasibility: res.primal_infeas,
        dual_infeasibility: res.dual_infeas,
        duality_violation: res.max_duality_violation,
        iterations: res.iterations,
        status,
        rho,
        negative_part: res.n,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// One `(theta, p)` cell of a sweep.
#[derive(Debug)]
pub struct SweepCell {
    pub theta: f64,
    pub p_target: f64,
    pub outcome: Result<SdpSolution>,
}

impl SweepCell {
    pub fn s_n(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|s| s.s_n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Theta,
    Score,
}

/// A pair of neighbouring cells where `S_N` drops by more than the combined gaps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotonicityViolation {
    pub axis: SweepAxis,
    pub from: (f64, f64),
    pub to: (f64, f64),
    pub drop: f64,
}

#[derive(Debug)]
pub struct SweepReport {
    pub k: usize,
    pub n_max: usize,
    pub thetas: Vec<f64>,
    pub scores: Vec<f64>,
    /// Row-major over `thetas` then `scores`.
    pub cells: Vec<SweepCell>,
    pub violations: Vec<MonotonicityViolation>,
}

impl SweepReport {
    pub fn cell(&self, theta_idx: usize, p_idx: usize) -> &SweepCell {
        &self.cells[theta_idx * self.scores.len() + p_idx]
    }
}

/// Solve every `(theta, p)` pair in parallel and flag monotonicity violations.
///
/// Failed cells keep their error and are skipped by the monotonicity scan.
pub fn sweep(k: usize, n_max: usize, thetas: &[f64], scores: &[f64], tol: f64) -> SweepReport {
    let grid: Vec<(f64, f64)> = thetas.iter().flat_map(|&t| scores.iter().map(move |&p| (t, p))).collect();
    let cells: Vec<SweepCell> = grid
        .par_iter()
        .map(|&(theta, p_target)| SweepCell {
            theta,
            p_target,
            outcome: build_problem(k, theta, p_target, n_max).and_then(|prob| solve(&prob, tol)),
        })
        .collect();
    let mut report = SweepReport { k, n_max, thetas: thetas.to_vec(), scores: scores.to_vec(), cells, violations: Vec::new() };
    let check = |a: &SweepCell, b: &SweepCell, axis: SweepAxis| -> Option<MonotonicityViolation> {
        let (sa, sb) = (a.outcome.as_ref().ok()?, b.outcome.as_ref().ok()?);
        let slack = sa.dual_gap + sb.dual_gap + 10.0 * tol;
        (sb.s_n < sa.s_n - slack).then(|| MonotonicityViolation {
            axis,
            from: (a.theta, a.p_target),
            to: (b.theta, b.p_target),
            drop: sa.s_n - sb.s_n,
        })
    };
    let (nt, np) = (thetas.len(), scores.len());
    let mut violations = Vec::new();
    for i in 0..nt {
        for j in 0..np {
            if i + 1 < nt {
                violations.extend(check(report.cell(i, j), report.cell(i + 1, j), SweepAxis::Theta));
            }
            if j + 1 < np {
                violations.extend(check(report.cell(i, j), report.cell(i, j + 1), SweepAxis::Score));
            }
        }
    }
    report.violations = violations;
    report
}

/// `S_N` at the top score `p_max(n)` for each truncation in `n_values`.
#[derive(Debug)]
pub struct TruncationRow {
    pub n_max: usize,
    pub p_target: f64,
    pub outcome: Result<SdpSolution>,
}

pub fn truncation_study(k: usize, theta: f64, n_values: &[usize], tol: f64) -> Vec<TruncationRow> {
    n_values
        .par_iter()
        .map(|&n| {
            let p = max_score(k, n).0;
            TruncationRow { n_max: n, p_target: p, outcome: build_problem(k, theta, p, n).and_then(|prob| solve(&prob, tol)) }
        })
        .collect()
}
