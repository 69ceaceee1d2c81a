//! Primal-dual interior-point method for the negativity program.
//!
//! The program has the block form
//!
//! ```text
//! maximize  -tr N
//! subject to Z1 = C1 + sum_k u_k S_k       >= 0
//!            Z2 = N                         >= 0
//!            Z3 = C3 + sum_k u_k R_k + N   >= 0
//! ```
//!
//! with dual `minimize <C1,X1> + <C3,X3>` over `X >= 0` with
//! `<S_k,X1> + <R_k,X3> = 0` and `X2 + X3 = I`. Search directions use
//! Nesterov-Todd scaling with a Mehrotra predictor-corrector. The `N` block is a
//! full matrix variable; it is eliminated in closed form by simultaneously
//! diagonalizing the two scalings that touch it, so the Schur complement only
//! has the dimension of `u`.

use nalgebra::{Cholesky, DMatrix, DVector, SVD};

use crate::error::{Error, Result};
use crate::linalg::{frob, sym_eigenvalues, symmetrize};

/// Problem data in the block form above.
pub(crate) struct BlockData<'a> {
    pub s: &'a [DMatrix<f64>],
    pub r: &'a [DMatrix<f64>],
    pub c1: &'a DMatrix<f64>,
    pub c3: &'a DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-7, feas_tol: 1e-9, max_iter: 100, step_fraction: 0.95 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Termination {
    Converged,
    MaxIterations,
    /// Rounding stopped progress within a hundred tolerances of the optimum.
    Stalled,
}

pub(crate) struct IpmResult {
    pub n: DMatrix<f64>,
    pub z1: DMatrix<f64>,
    /// `-tr N` at the final iterate.
    pub primal_obj: f64,
    /// `<C1,X1> + <C3,X3>` at the final iterate.
    pub dual_obj: f64,
    pub primal_infeas: f64,
    pub dual_infeas: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Largest `primal - dual` objective difference over all iterates, which should stay <= 0.
    pub max_duality_violation: f64,
}

struct Snapshot {
    merit: f64,
    u: DVector<f64>,
    n: DMatrix<f64>,
    pobj: f64,
    dobj: f64,
    pinf: f64,
    dinf: f64,
    iterations: usize,
}

/// Triple of symmetric block matrices.
#[derive(Clone)]
struct Blocks {
    b1: DMatrix<f64>,
    b2: DMatrix<f64>,
    b3: DMatrix<f64>,
}

impl Blocks {
    fn inner(&self, other: &Blocks) -> f64 {
        frob(&self.b1, &other.b1) + frob(&self.b2, &other.b2) + frob(&self.b3, &other.b3)
    }

    fn axpy(&mut self, alpha: f64, d: &Blocks) {
        self.b1 += &d.b1 * alpha;
        self.b2 += &d.b2 * alpha;
        self.b3 += &d.b3 * alpha;
    }

    fn norm(&self) -> f64 {
        (self.b1.norm_squared() + self.b2.norm_squared() + self.b3.norm_squared()).sqrt()
    }
}

/// NT scaling of one block: `W = G G^T`, with `G^{-1} X G^{-T} = G^T Z G = diag(d)`.
struct Scaling {
    g: DMatrix<f64>,
    d: DVector<f64>,
}

fn chol_lower(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Cholesky::new(symmetrize(m))
        .map(|c| c.l())
        .ok_or_else(|| Error::NumericalFailure("iterate left the semidefinite cone".into()))
}

fn nt_scaling(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<Scaling> {
    let lx = chol_lower(x)?;
    let lz = chol_lower(z)?;
    let svd = SVD::new(lz.transpose() * &lx, false, true);
    let vt = svd.v_t.ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    let sv = svd.singular_values;
    let mut g = lx * vt.transpose();
    for (j, mut col) in g.column_iter_mut().enumerate() {
        col /= sv[j].sqrt();
    }
    Ok(Scaling { g, d: sv })
}

/// Upper triangle stacked column by column, off-diagonal entries scaled by `sqrt 2`
/// so that dot products reproduce the trace inner product.
fn svec(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    let s2 = std::f64::consts::SQRT_2;
    let mut out = DVector::zeros(n * (n + 1) / 2);
    let mut idx = 0;
    for j in 0..n {
        for i in 0..=j {
            out[idx] = if i == j { m[(i, j)] } else { s2 * m[(i, j)] };
            idx += 1;
        }
    }
    out
}

fn smat(v: &DVector<f64>, n: usize) -> DMatrix<f64> {
    let s2 = std::f64::consts::SQRT_2;
    let mut m = DMatrix::zeros(n, n);
    let mut idx = 0;
    for j in 0..n {
        for i in 0..=j {
            if i == j {
                m[(i, i)] = v[idx];
            } else {
                m[(i, j)] = v[idx] / s2;
                m[(j, i)] = v[idx] / s2;
            }
            idx += 1;
        }
    }
    m
}

/// Columns `svec(g^T a_k g)`.
fn packed_congruences(g: &DMatrix<f64>, mats: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n = g.ncols();
    let cols: Vec<DVector<f64>> = mats.iter().map(|a| svec(&congruence(g, a))).collect();
    let mut out = DMatrix::zeros(n * (n + 1) / 2, mats.len());
    for (k, c) in cols.iter().enumerate() {
        out.set_column(k, c);
    }
    out
}

fn congruence(g: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    // g^T m g
    g.transpose() * m * g
}

fn expand(g: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    // g m g^T
    g * m * g.transpose()
}

/// Largest `alpha` keeping `diag(d) + alpha * delta` positive semidefinite.
fn max_step(d: &DVector<f64>, delta: &DMatrix<f64>) -> f64 {
    let n = d.len();
    let scaled = DMatrix::from_fn(n, n, |i, j| delta[(i, j)] / (d[i] * d[j]).sqrt());
    let lmin = sym_eigenvalues(&scaled)[0];
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

struct Solver<'a> {
    data: BlockData<'a>,
    m: usize,
    dim3: usize,
}

impl<'a> Solver<'a> {
    fn a_op(&self, du: &DVector<f64>, dn: &DMatrix<f64>) -> Blocks {
        let d1 = self.data.c1.nrows();
        let mut b1 = DMatrix::zeros(d1, d1);
        let mut b3 = dn.clone();
        for k in 0..self.m {
            if du[k] != 0.0 {
                b1 += &self.data.s[k] * du[k];
                b3 += &self.data.r[k] * du[k];
            }
        }
        Blocks { b1, b2: dn.clone(), b3 }
    }

    fn a_adj(&self, x: &Blocks) -> (DVector<f64>, DMatrix<f64>) {
        let hu = DVector::from_fn(self.m, |k, _| frob(&self.data.s[k], &x.b1) + frob(&self.data.r[k], &x.b3));
        (hu, &x.b2 + &x.b3)
    }
}

/// Everything needed to solve the Newton system for one scaling.
struct Factorization {
    scal: [Scaling; 3],
    /// `T = G2^{-T} Q`; maps the diagonalized `N` coordinates back.
    t: DMatrix<f64>,
    /// `lambda_i lambda_j`.
    ll: DMatrix<f64>,
    /// `ll / (1 + ll)`.
    omega: DMatrix<f64>,
    /// Packed `G^T R_k G` as columns.
    r_hat: DMatrix<f64>,
    schur: Cholesky<f64, nalgebra::Dyn>,
}

struct Direction {
    du: DVector<f64>,
    dn: DMatrix<f64>,
    dz: Blocks,
    dx: Blocks,
    /// Scaled `Delta Z` and `Delta X` per block.
    dz_s: [DMatrix<f64>; 3],
    dx_s: [DMatrix<f64>; 3],
}

impl<'a> Solver<'a> {
    fn factorize(&self, x: &Blocks, z: &Blocks) -> Result<Factorization> {
        let s1 = nt_scaling(&x.b1, &z.b1)?;
        let s2 = nt_scaling(&x.b2, &z.b2)?;
        let s3 = nt_scaling(&x.b3, &z.b3)?;
        // Simultaneous diagonalization: W2 = G2 G2^T and W3 = G2 Q L^2 Q^T G2^T.
        let g2_inv = s2
            .g
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::NumericalFailure("singular scaling in the N block".into()))?;
        let svd = SVD::new(&g2_inv * &s3.g, true, false);
        let q = svd.u.ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
        let lam = svd.singular_values.map(|s| s * s);
        let gm = &s2.g * &q;
        let t = g2_inv.transpose() * &q;
        let n3 = self.dim3;
        let ll = DMatrix::from_fn(n3, n3, |i, j| lam[i] * lam[j]);
        let omega = ll.map(|v| v / (1.0 + v));
        let r_hat = packed_congruences(&gm, self.data.r);
        let s_hat = packed_congruences(&s1.g, self.data.s);
        let omega_packed: Vec<f64> = (0..self.dim3).flat_map(|j| (0..=j).map(move |i| (i, j))).map(|(i, j)| omega[(i, j)].sqrt()).collect();
        let mut weighted = r_hat.clone();
        for (mut row, w) in weighted.row_iter_mut().zip(&omega_packed) {
            row *= *w;
        }
        let mut schur = s_hat.transpose() * &s_hat + weighted.transpose() * &weighted;
        schur = symmetrize(&schur);
        let scale = schur.diagonal().amax().max(1.0);
        let mut reg = 0.0;
        let chol = loop {
            let mut shifted = schur.clone();
            for i in 0..self.m {
                shifted[(i, i)] += reg;
            }
            if let Some(c) = Cholesky::new(shifted) {
                break c;
            }
            reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
            if reg > 1e-4 * scale {
                return Err(Error::NumericalFailure("Schur complement is not positive definite".into()));
            }
        };
        Ok(Factorization { scal: [s1, s2, s3], t, ll, omega, r_hat, schur: chol })
    }

    /// Solve `A*(dX) = rp`, `dZ = A(dy) + rd`, `dX + W dZ W = G Y G^T` where `y_targets`
    /// holds the per-block scaled right-hand sides `Y`.
    fn direction(&self, f: &Factorization, rp: &(DVector<f64>, DMatrix<f64>), rd: &Blocks, y_targets: &[DMatrix<f64>; 3]) -> Direction {
        let rc = Blocks {
            b1: expand(&f.scal[0].g, &y_targets[0]),
            b2: expand(&f.scal[1].g, &y_targets[1]),
            b3: expand(&f.scal[2].g, &y_targets[2]),
        };
        let w_rd_w = Blocks {
            b1: expand(&f.scal[0].g, &congruence(&f.scal[0].g, &rd.b1)),
            b2: expand(&f.scal[1].g, &congruence(&f.scal[1].g, &rd.b2)),
            b3: expand(&f.scal[2].g, &congruence(&f.scal[2].g, &rd.b3)),
        };
        let mut lhs = rc.clone();
        lhs.axpy(-1.0, &w_rd_w);
        let (mut hu, mut hn) = self.a_adj(&lhs);
        hu -= &rp.0;
        hn -= &rp.1;
        let h_hat = f.t.transpose() * &hn * &f.t;
        let oh = h_hat.component_mul(&f.omega);
        let rhs = hu - f.r_hat.tr_mul(&svec(&oh));
        let du = f.schur.solve(&rhs);
        let r_du = smat(&(&f.r_hat * &du), self.dim3);
        let dn_hat = (h_hat - r_du.component_mul(&f.ll)).component_div(&f.ll.map(|v| 1.0 + v));
        let dn = symmetrize(&(&f.t * dn_hat * f.t.transpose()));
        let mut dz = self.a_op(&du, &dn);
        dz.axpy(1.0, rd);
        let dz_s = [
            congruence(&f.scal[0].g, &dz.b1),
            congruence(&f.scal[1].g, &dz.b2),
            congruence(&f.scal[2].g, &dz.b3),
        ];
        let dx_s = [
            symmetrize(&(&y_targets[0] - &dz_s[0])),
            symmetrize(&(&y_targets[1] - &dz_s[1])),
            symmetrize(&(&y_targets[2] - &dz_s[2])),
        ];
        let dx = Blocks {
            b1: expand(&f.scal[0].g, &dx_s[0]),
            b2: expand(&f.scal[1].g, &dx_s[1]),
            b3: expand(&f.scal[2].g, &dx_s[2]),
        };
        Direction { du, dn, dz, dx, dz_s, dx_s }
    }

    fn step_lengths(&self, f: &Factorization, dir: &Direction) -> (f64, f64) {
        let mut ap = f64::INFINITY;
        let mut ad = f64::INFINITY;
        for b in 0..3 {
            ap = ap.min(max_step(&f.scal[b].d, &dir.dz_s[b]));
            ad = ad.min(max_step(&f.scal[b].d, &dir.dx_s[b]));
        }
        (ap, ad)
    }
}

/// Run the interior-point method from a strictly feasible primal point `(u0, n0)`.
pub(crate) fn run(data: BlockData<'_>, u0: DVector<f64>, n0: DMatrix<f64>, x1_scale: f64, opts: &IpmOptions) -> Result<IpmResult> {
    let m = data.s.len();
    let dim1 = data.c1.nrows();
    let dim3 = data.c3.nrows();
    let solver = Solver { data, m, dim3 };
    let nu = (dim1 + 2 * dim3) as f64;

    let mut u = u0;
    let mut nmat = n0;
    let f0 = solver.a_op(&u, &nmat);
    let c = Blocks { b1: solver.data.c1.clone(), b2: DMatrix::zeros(dim3, dim3), b3: solver.data.c3.clone() };
    let mut z = c.clone();
    z.axpy(1.0, &f0);
    let mut x = Blocks {
        b1: DMatrix::identity(dim1, dim1) * x1_scale,
        b2: DMatrix::identity(dim3, dim3) * 0.5,
        b3: DMatrix::identity(dim3, dim3) * 0.5,
    };

    let identity3 = DMatrix::<f64>::identity(dim3, dim3);
    let mut max_violation = f64::NEG_INFINITY;
    let mut iterations = 0;
    let mut best: Option<Snapshot> = None;
    let mut broke_down = false;
    loop {
        let pobj = -nmat.trace();
        let dobj = frob(&c.b1, &x.b1) + frob(&c.b3, &x.b3);
        max_violation = max_violation.max(pobj - dobj);
        let (au, an) = solver.a_adj(&x);
        let rp = (-au, &identity3 - an);
        let mut rd = c.clone();
        rd.axpy(1.0, &solver.a_op(&u, &nmat));
        rd.axpy(-1.0, &z);
        let pinf = rd.norm() / (1.0 + c.norm());
        let dinf = (rp.0.norm_squared() + rp.1.norm_squared()).sqrt() / (1.0 + (dim3 as f64).sqrt());
        let gap = (dobj - pobj).abs();
        let merit = (gap / opts.gap_tol).max(pinf / opts.feas_tol).max(dinf / opts.feas_tol);
        if best.as_ref().is_none_or(|b| merit < b.merit) {
            best = Some(Snapshot { merit, u: u.clone(), n: nmat.clone(), pobj, dobj, pinf, dinf, iterations });
        }
        if merit <= 1.0 || iterations >= opts.max_iter {
            break;
        }
        // Rounding has taken over once the residuals grow far past the best iterate.
        if best.as_ref().is_some_and(|b| b.merit <= 100.0 && merit > 1e3 * b.merit) {
            break;
        }
        iterations += 1;
        let mu = x.inner(&z) / nu;

        let Ok(f) = solver.factorize(&x, &z) else {
            broke_down = true;
            break;
        };

        // Predictor.
        let y_aff: [DMatrix<f64>; 3] = std::array::from_fn(|b| DMatrix::from_diagonal(&(-&f.scal[b].d)));
        let aff = solver.direction(&f, &rp, &rd, &y_aff);
        let (ap, ad) = solver.step_lengths(&f, &aff);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mut z_aff = z.clone();
        z_aff.axpy(ap, &aff.dz);
        let mut x_aff = x.clone();
        x_aff.axpy(ad, &aff.dx);
        let mu_aff = x_aff.inner(&z_aff) / nu;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let y_cor: [DMatrix<f64>; 3] = std::array::from_fn(|b| {
            let d = &f.scal[b].d;
            let n = d.len();
            let cross = symmetrize(&(&aff.dx_s[b] * &aff.dz_s[b]));
            DMatrix::from_fn(n, n, |i, j| {
                let diag = if i == j { sigma * mu - d[i] * d[i] } else { 0.0 };
                2.0 * (diag - cross[(i, j)]) / (d[i] + d[j])
            })
        });
        let dir = solver.direction(&f, &rp, &rd, &y_cor);
        let (ap, ad) = solver.step_lengths(&f, &dir);
        let ap = (opts.step_fraction * ap).min(1.0);
        let ad = (opts.step_fraction * ad).min(1.0);

        u += &dir.du * ap;
        nmat += &dir.dn * ap;
        nmat = symmetrize(&nmat);
        z.axpy(ap, &dir.dz);
        x.axpy(ad, &dir.dx);
        for blk in [&mut z.b1, &mut z.b2, &mut z.b3, &mut x.b1, &mut x.b2, &mut x.b3] {
            *blk = symmetrize(blk);
        }
    }

    let best = best.expect("at least one iterate is evaluated");
    if best.merit > 1e6 && broke_down {
        return Err(Error::NumericalFailure(format!(
            "interior-point iterates broke down after {iterations} iterations"
        )));
    }
    let termination = if best.merit <= 1.0 {
        Termination::Converged
    } else if best.merit <= 100.0 {
        Termination::Stalled
    } else {
        Termination::MaxIterations
    };
    // Z1 is rebuilt from u so the reported state is exactly on the constraint surface.
    let mut z1 = c.b1.clone();
    for k in 0..m {
        z1 += &solver.data.s[k] * best.u[k];
    }
    Ok(IpmResult {
        n: best.n,
        z1,
        primal_obj: best.pobj,
        dual_obj: best.dobj,
        primal_infeas: best.pinf,
        dual_infeas: best.dinf,
        iterations: best.iterations,
        termination,
        max_duality_violation: max_violation,
    })
}
