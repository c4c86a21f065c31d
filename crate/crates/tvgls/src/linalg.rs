//! SPD solvers: a dense Cholesky backend and a block-tridiagonal backend
//! that exploits the structure of the stacked normal equations, where the
//! only nonzero blocks sit on the diagonal and first sub/superdiagonal.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense Cholesky factorization that reports the failing pivot on non-SPD
/// input.
#[derive(Debug, Clone)]
pub struct DenseSpd {
    l: DMatrix<f64>,
}

impl DenseSpd {
    pub fn factor(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::invalid(
                "A",
                format!("matrix is {}x{}, expected square", a.nrows(), a.ncols()),
            ));
        }
        let mut l = a.lower_triangle();
        for j in 0..n {
            let mut d = l[(j, j)];
            for t in 0..j {
                d -= l[(j, t)] * l[(j, t)];
            }
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = l[(i, j)];
                for t in 0..j {
                    s -= l[(i, t)] * l[(j, t)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(DenseSpd { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Lower-triangular factor `L` with `A = L L'`.
    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        for mut col in x.column_iter_mut() {
            let mut v = DVector::from_column_slice(col.as_slice());
            self.solve_in_place(&mut v);
            col.copy_from(&v);
        }
        x
    }

    fn solve_in_place(&self, x: &mut DVector<f64>) {
        let n = self.dim();
        // Forward substitution L y = b.
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.l[(i, j)] * x[j];
            }
            x[i] = s / self.l[(i, i)];
        }
        // Backward substitution L' x = y.
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.l[(j, i)] * x[j];
            }
            x[i] = s / self.l[(i, i)];
        }
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.solve_mat(&DMatrix::identity(self.dim(), self.dim()))
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }
}

/// Convenience solve for a dense SPD system.
pub fn solve_spd(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(DenseSpd::factor(a)?.solve_mat(b))
}

/// Symmetric block-tridiagonal matrix with `n` diagonal blocks of size
/// `m x m`; `sub[t]` is the block at (t+1, t).
#[derive(Debug, Clone)]
pub struct BlockTridiag {
    pub diag: Vec<DMatrix<f64>>,
    pub sub: Vec<DMatrix<f64>>,
}

impl BlockTridiag {
    pub fn n_blocks(&self) -> usize {
        self.diag.len()
    }

    pub fn block_dim(&self) -> usize {
        self.diag.first().map_or(0, |d| d.nrows())
    }

    /// Blockwise Cholesky `A = L L'`, with `L` block lower bidiagonal.
    pub fn factor(&self) -> Result<BlockTridiagChol> {
        let n = self.n_blocks();
        let m = self.block_dim();
        if self.sub.len() + 1 != n {
            return Err(Error::invalid(
                "A",
                format!("{} diagonal blocks need {} subdiagonal blocks", n, n - 1),
            ));
        }
        let mut l_diag = Vec::with_capacity(n);
        let mut l_sub = Vec::with_capacity(n - 1);
        let mut schur = self.diag[0].clone();
        for t in 0..n {
            let chol = DenseSpd::factor(&schur).map_err(|e| match e {
                Error::NotPositiveDefinite { pivot } => Error::NotPositiveDefinite {
                    pivot: t * m + pivot,
                },
                other => other,
            })?;
            if t + 1 < n {
                // L_{t+1,t} = A_{t+1,t} L_t'^{-1}; the next Schur complement
                // is A_{t+1,t+1} - L_{t+1,t} L_{t+1,t}'.
                let w = lower_solve_transpose(chol.l(), &self.sub[t]);
                schur = &self.diag[t + 1] - &w * w.transpose();
                l_sub.push(w);
            }
            l_diag.push(chol);
        }
        Ok(BlockTridiagChol {
            m,
            l_diag,
            l_sub,
            sub: self.sub.clone(),
        })
    }

    /// Dense copy, for the validation suites.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n_blocks();
        let m = self.block_dim();
        let mut a = DMatrix::zeros(n * m, n * m);
        for (t, d) in self.diag.iter().enumerate() {
            a.view_mut((t * m, t * m), (m, m)).copy_from(d);
        }
        for (t, s) in self.sub.iter().enumerate() {
            a.view_mut(((t + 1) * m, t * m), (m, m)).copy_from(s);
            a.view_mut((t * m, (t + 1) * m), (m, m))
                .copy_from(&s.transpose());
        }
        a
    }
}

/// Solve `X L' = B` for X given lower-triangular `L` (i.e. right-divide by
/// the transposed factor), column-block at a time.
fn lower_solve_transpose(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let m = l.nrows();
    let rows = b.nrows();
    let mut x = b.clone();
    for j in 0..m {
        for r in 0..rows {
            let mut s = x[(r, j)];
            for t in 0..j {
                s -= x[(r, t)] * l[(j, t)];
            }
            x[(r, j)] = s / l[(j, j)];
        }
    }
    x
}

/// Factorized block-tridiagonal SPD system.
#[derive(Debug, Clone)]
pub struct BlockTridiagChol {
    m: usize,
    l_diag: Vec<DenseSpd>,
    l_sub: Vec<DMatrix<f64>>,
    sub: Vec<DMatrix<f64>>,
}

impl BlockTridiagChol {
    pub fn n_blocks(&self) -> usize {
        self.l_diag.len()
    }

    pub fn block_dim(&self) -> usize {
        self.m
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.n_blocks();
        let m = self.m;
        let mut x: Vec<DVector<f64>> =
            (0..n).map(|t| b.rows(t * m, m).into_owned()).collect();
        // Forward pass: L y = b.
        for t in 0..n {
            if t > 0 {
                let correction = &self.l_sub[t - 1] * &x[t - 1];
                x[t] -= correction;
            }
            x[t] = lower_solve_vec(self.l_diag[t].l(), &x[t]);
        }
        // Backward pass: L' x = y.
        for t in (0..n).rev() {
            if t + 1 < n {
                let correction = self.l_sub[t].transpose() * &x[t + 1];
                x[t] -= correction;
            }
            x[t] = lower_transpose_solve_vec(self.l_diag[t].l(), &x[t]);
        }
        let mut out = DVector::zeros(n * m);
        for (t, block) in x.iter().enumerate() {
            out.rows_mut(t * m, m).copy_from(block);
        }
        out
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = b.clone();
        for mut col in out.column_iter_mut() {
            let v = DVector::from_column_slice(col.as_slice());
            col.copy_from(&self.solve_vec(&v));
        }
        out
    }

    pub fn log_det(&self) -> f64 {
        self.l_diag.iter().map(|c| c.log_det()).sum()
    }

    /// Diagonal blocks of the inverse, by the backward recursion on the
    /// Schur complements: with `D_t = L_t L_t'`,
    /// `S_n = D_n^{-1}` and `S_t = D_t^{-1} + D_t^{-1} B_t' S_{t+1} B_t D_t^{-1}`
    /// where `B_t` is the subdiagonal block at (t+1, t).
    pub fn inverse_diag_blocks(&self) -> Vec<DMatrix<f64>> {
        let n = self.n_blocks();
        let m = self.m;
        let mut blocks = vec![DMatrix::zeros(m, m); n];
        let mut next = self.l_diag[n - 1].inverse();
        blocks[n - 1] = next.clone();
        for t in (0..n - 1).rev() {
            let d_inv = self.l_diag[t].inverse();
            let w = self.l_diag[t].solve_mat(&self.sub[t].transpose()); // D_t^{-1} B_t'
            let s = &d_inv + &w * &next * w.transpose();
            let s = symmetrize(&s);
            blocks[t] = s.clone();
            next = s;
        }
        blocks
    }
}

/// Square-root (QR) factorization of the stacked weighted least-squares
/// problem whose normal equations are block tridiagonal: rows arrive as
/// per-period observation blocks plus difference blocks chaining period t
/// to t+1. Orthogonal elimination keeps the working condition number at the
/// square root of the normal equations', which survives both nearly
/// singular difference weights and very large design entries.
///
/// The factor is block upper bidiagonal: `R_t` on the diagonal, `S_t` above
/// it, with `A = R'R` for the block-tridiagonal `A` the Cholesky backend
/// would factor.
#[derive(Debug, Clone)]
pub struct StaircaseLs {
    m: usize,
    r_diag: Vec<DMatrix<f64>>,
    s_super: Vec<DMatrix<f64>>,
    d: Vec<DVector<f64>>,
    ssr: f64,
}

/// One period's rows for [`StaircaseLs::factor`]: the weighted design block
/// with its target, and the weighted difference block tying this period to
/// the next (`None` in the last period).
pub struct StaircaseRows {
    /// Weighted observation rows for this period (`rows x m`).
    pub design: DMatrix<f64>,
    /// Weighted observation target (`rows`).
    pub target: DVector<f64>,
    /// Weighted difference operator to the next period (`m x m`), applied
    /// as `diff * (beta_{t+1} - beta_t) = 0`.
    pub diff_next: Option<DMatrix<f64>>,
}

impl StaircaseLs {
    /// Eliminate the per-period rows in time order. `prior` is the weighted
    /// anchor on the first period: rows `prior.0 * beta_1 = prior.1`.
    pub fn factor(
        prior: (DMatrix<f64>, DVector<f64>),
        periods: Vec<StaircaseRows>,
    ) -> Result<Self> {
        let n = periods.len();
        let m = prior.0.ncols();
        if n == 0 {
            return Err(Error::invalid("periods", "no rows to factor"));
        }
        let mut r_diag = Vec::with_capacity(n);
        let mut s_super = Vec::with_capacity(n - 1);
        let mut d = Vec::with_capacity(n);
        let mut ssr = 0.0;
        let (mut carry_p, mut carry_c) = prior;
        for (t, rows) in periods.into_iter().enumerate() {
            let has_next = rows.diff_next.is_some();
            let obs_rows = rows.design.nrows();
            let height = m + obs_rows + if has_next { m } else { 0 };
            let width = m + if has_next { m } else { 0 } + 1;
            let mut stacked = DMatrix::zeros(height, width);
            stacked.view_mut((0, 0), (m, m)).copy_from(&carry_p);
            stacked.view_mut((0, width - 1), (m, 1)).copy_from(&carry_c);
            stacked
                .view_mut((m, 0), (obs_rows, m))
                .copy_from(&rows.design);
            stacked
                .view_mut((m, width - 1), (obs_rows, 1))
                .copy_from(&rows.target);
            if let Some(diff) = &rows.diff_next {
                stacked.view_mut((m + obs_rows, 0), (m, m)).copy_from(&(-diff));
                stacked.view_mut((m + obs_rows, m), (m, m)).copy_from(diff);
            }
            let reduced = stacked.qr().unpack_r();
            let r_t = reduced.view((0, 0), (m, m)).into_owned();
            for i in 0..m {
                let pivot = r_t[(i, i)];
                if pivot == 0.0 || !pivot.is_finite() {
                    return Err(Error::NotPositiveDefinite { pivot: t * m + i });
                }
            }
            d.push(reduced.view((0, width - 1), (m, 1)).column(0).into_owned());
            if has_next {
                s_super.push(reduced.view((0, m), (m, m)).into_owned());
                carry_p = reduced.view((m, m), (m, m)).into_owned();
                carry_c = reduced
                    .view((m, width - 1), (m, 1))
                    .column(0)
                    .into_owned();
                // Row 2m of the reduced block holds the fully eliminated
                // residual component of the target.
                if reduced.nrows() > 2 * m {
                    ssr += reduced[(2 * m, width - 1)].powi(2);
                }
            } else if reduced.nrows() > m {
                ssr += reduced[(m, width - 1)].powi(2);
            }
            r_diag.push(r_t);
        }
        Ok(StaircaseLs {
            m,
            r_diag,
            s_super,
            d,
            ssr,
        })
    }

    pub fn n_blocks(&self) -> usize {
        self.r_diag.len()
    }

    /// Minimized weighted sum of squared residuals.
    pub fn ssr(&self) -> f64 {
        self.ssr
    }

    /// `log |R'R|`, the log determinant of the normal equations matrix.
    pub fn log_det_normal(&self) -> f64 {
        2.0 * self
            .r_diag
            .iter()
            .map(|r| r.diagonal().iter().map(|v| v.abs().ln()).sum::<f64>())
            .sum::<f64>()
    }

    /// The least-squares solution, block by block.
    pub fn solve_path(&self) -> Vec<DVector<f64>> {
        let n = self.n_blocks();
        let mut beta = vec![DVector::zeros(self.m); n];
        for t in (0..n).rev() {
            let mut rhs = self.d[t].clone();
            if t + 1 < n {
                rhs -= &self.s_super[t] * &beta[t + 1];
            }
            beta[t] = upper_solve_vec(&self.r_diag[t], &rhs);
        }
        beta
    }

    /// Diagonal blocks of `(R'R)^{-1}` by the backward recursion
    /// `S_n = R_n^{-1} R_n^{-T}`,
    /// `S_t = R_t^{-1} (I + S_t^{sup} S_{t+1} S_t^{sup'}) R_t^{-T}`.
    pub fn inverse_diag_blocks(&self) -> Vec<DMatrix<f64>> {
        let n = self.n_blocks();
        let m = self.m;
        let mut blocks = vec![DMatrix::zeros(m, m); n];
        let mut next = DMatrix::zeros(m, m);
        for t in (0..n).rev() {
            let mut inner = DMatrix::identity(m, m);
            if t + 1 < n {
                inner += &self.s_super[t] * &next * self.s_super[t].transpose();
            }
            // R_t^{-1} inner R_t^{-T}
            let w = upper_solve_mat(&self.r_diag[t], &inner);
            let block = upper_solve_mat(&self.r_diag[t], &w.transpose());
            let block = symmetrize(&block);
            blocks[t] = block.clone();
            next = block;
        }
        blocks
    }

    /// Solve `(R'R) X = B` for a stacked block right-hand side.
    pub fn solve_normal_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n_blocks();
        let m = self.m;
        let cols = b.ncols();
        // Forward: R' W = B (R' is block lower bidiagonal).
        let mut w = DMatrix::zeros(n * m, cols);
        for t in 0..n {
            let mut rhs = b.view((t * m, 0), (m, cols)).into_owned();
            if t > 0 {
                rhs -= self.s_super[t - 1].transpose() * w.view(((t - 1) * m, 0), (m, cols));
            }
            let solved = upper_transpose_solve_mat(&self.r_diag[t], &rhs);
            w.view_mut((t * m, 0), (m, cols)).copy_from(&solved);
        }
        // Backward: R X = W.
        let mut x = DMatrix::zeros(n * m, cols);
        for t in (0..n).rev() {
            let mut rhs = w.view((t * m, 0), (m, cols)).into_owned();
            if t + 1 < n {
                rhs -= &self.s_super[t] * x.view(((t + 1) * m, 0), (m, cols));
            }
            let solved = upper_solve_mat(&self.r_diag[t], &rhs);
            x.view_mut((t * m, 0), (m, cols)).copy_from(&solved);
        }
        x
    }
}

fn upper_solve_vec(r: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = r.nrows();
    let mut x = b.clone();
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in (i + 1)..n {
            s -= r[(i, j)] * x[j];
        }
        x[i] = s / r[(i, i)];
    }
    x
}

/// Solve `R X = B` columnwise for upper-triangular `R`.
fn upper_solve_mat(r: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut x = b.clone();
    for mut col in x.column_iter_mut() {
        let v = DVector::from_column_slice(col.as_slice());
        col.copy_from(&upper_solve_vec(r, &v));
    }
    x
}

/// Solve `R' X = B` columnwise for upper-triangular `R`.
fn upper_transpose_solve_mat(r: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = r.nrows();
    let mut x = b.clone();
    for mut col in x.column_iter_mut() {
        for i in 0..n {
            let mut s = col[i];
            for j in 0..i {
                s -= r[(j, i)] * col[j];
            }
            col[i] = s / r[(i, i)];
        }
    }
    x
}

fn lower_solve_vec(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut x = b.clone();
    for i in 0..n {
        let mut s = x[i];
        for j in 0..i {
            s -= l[(i, j)] * x[j];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

fn lower_transpose_solve_vec(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut x = b.clone();
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in (i + 1)..n {
            s -= l[(j, i)] * x[j];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

pub(crate) fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}
