//! Matrix-free largest singular value by block Lanczos on `A†A`.

use faer::linalg::matmul::matmul;
use faer::{c64, Accum, Mat, MatMut, MatRef, Par, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A linear map given only through its action on vectors.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `y ← A x`.
    fn apply(&self, x: &[c64], y: &mut [c64]);
    /// `y ← A† x`.
    fn apply_adjoint(&self, x: &[c64], y: &mut [c64]);

    /// `Y ← A X`, column by column unless overridden.
    fn apply_block(&self, x: MatRef<'_, c64>, y: MatMut<'_, c64>) {
        by_columns(x, y, self.nrows(), |a, b| self.apply(a, b));
    }

    /// `Y ← A† X`, column by column unless overridden.
    fn apply_adjoint_block(&self, x: MatRef<'_, c64>, y: MatMut<'_, c64>) {
        by_columns(x, y, self.ncols(), |a, b| self.apply_adjoint(a, b));
    }
}

fn by_columns(x: MatRef<'_, c64>, mut y: MatMut<'_, c64>, out_len: usize, f: impl Fn(&[c64], &mut [c64])) {
    let mut xin = vec![c64::new(0.0, 0.0); x.nrows()];
    let mut yout = vec![c64::new(0.0, 0.0); out_len];
    for j in 0..x.ncols() {
        for (i, v) in xin.iter_mut().enumerate() {
            *v = x[(i, j)];
        }
        f(&xin, &mut yout);
        for (i, v) in yout.iter().enumerate() {
            y[(i, j)] = *v;
        }
    }
}

const BLOCK: usize = 8;
const MAX_BASIS: usize = 320;
const MAX_RESTARTS: usize = 4;
const RELATIVE_RESIDUAL: f64 = 1e-11;
const START_SEED: u64 = 0x1b_2c_3d_4e;

/// Largest singular value of `op`.
///
/// Restarted block Lanczos with full reorthogonalization on `A†A`, stopped
/// when the top Ritz residual drops below `1e-11` of the Ritz value. Spectra
/// that still fail to converge fall back to materializing the operator and
/// taking a full SVD.
pub fn largest_singular_value(op: &dyn LinearOperator) -> f64 {
    if op.ncols() == 0 || op.nrows() == 0 {
        return 0.0;
    }
    match block_lanczos(op) {
        Ok(s) => s,
        Err(estimate) => dense_fallback(op).unwrap_or(estimate),
    }
}

fn dense_fallback(op: &dyn LinearOperator) -> Option<f64> {
    let (m, n) = (op.nrows(), op.ncols());
    let mut a = Mat::<c64>::zeros(m, n);
    let chunk = 64;
    for start in (0..n).step_by(chunk) {
        let w = chunk.min(n - start);
        let e = Mat::<c64>::from_fn(n, w, |i, j| {
            if i == start + j {
                c64::new(1.0, 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        });
        op.apply_block(e.as_ref(), a.as_mut().subcols_mut(start, w));
    }
    a.singular_values().ok().and_then(|s| s.first().copied())
}

/// `Y ← A†A X`.
fn normal_apply(op: &dyn LinearOperator, x: MatRef<'_, c64>, y: MatMut<'_, c64>) {
    let mut ax = Mat::<c64>::zeros(op.nrows(), x.ncols());
    op.apply_block(x, ax.as_mut());
    op.apply_adjoint_block(ax.as_ref(), y);
}

fn col_norm(a: MatRef<'_, c64>, j: usize) -> f64 {
    (0..a.nrows()).map(|i| a[(i, j)].norm_sqr()).sum::<f64>().sqrt()
}

/// Orthogonalizes the columns of `w` against `q` (two passes) and then among
/// themselves, dropping columns that lose almost all of their norm.
fn orthonormal_extension(q: MatRef<'_, c64>, mut w: Mat<c64>) -> Mat<c64> {
    let before: Vec<f64> = (0..w.ncols()).map(|j| col_norm(w.as_ref(), j)).collect();
    if q.ncols() > 0 {
        for _ in 0..2 {
            let mut coeff = Mat::<c64>::zeros(q.ncols(), w.ncols());
            matmul(coeff.as_mut(), Accum::Replace, q.adjoint(), w.as_ref(), c64::new(1.0, 0.0), Par::Seq);
            matmul(w.as_mut(), Accum::Add, q, coeff.as_ref(), c64::new(-1.0, 0.0), Par::Seq);
        }
    }
    let mut kept: Vec<Vec<c64>> = Vec::new();
    for j in 0..w.ncols() {
        let mut v: Vec<c64> = (0..w.nrows()).map(|i| w[(i, j)]).collect();
        for _ in 0..2 {
            for u in &kept {
                let c: c64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                v.iter_mut().zip(u).for_each(|(x, y)| *x -= c * y);
            }
        }
        let nv = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if nv > 1e-10 * before[j] && nv > 0.0 {
            v.iter_mut().for_each(|x| *x /= nv);
            kept.push(v);
        }
    }
    Mat::from_fn(w.nrows(), kept.len(), |i, j| kept[j][i])
}

/// `Ok(σ_max)` on convergence, `Err(estimate)` otherwise.
fn block_lanczos(op: &dyn LinearOperator) -> Result<f64, f64> {
    let n = op.ncols();
    let p = BLOCK.min(n);
    let cap = MAX_BASIS.min(n).max(p);
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut start = Mat::<c64>::from_fn(n, p, |_, _| c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let mut theta = 0.0f64;

    for _ in 0..=MAX_RESTARTS {
        let mut q = Mat::<c64>::zeros(n, cap);
        let mut mq = Mat::<c64>::zeros(n, cap);
        let mut t = Mat::<c64>::zeros(cap, cap);
        let mut k = 0;
        let mut next = orthonormal_extension(q.as_ref().subcols(0, 0), start.clone());
        let mut steps = 0usize;
        loop {
            let (k0, w) = (k, next.ncols().min(cap - k));
            if w == 0 {
                // Invariant subspace: the Ritz values are exact.
                return Ok(theta.max(0.0).sqrt());
            }
            q.as_mut().subcols_mut(k0, w).copy_from(next.as_ref().subcols(0, w));
            normal_apply(op, q.as_ref().subcols(k0, w), mq.as_mut().subcols_mut(k0, w));
            k += w;
            let mut cols = Mat::<c64>::zeros(k, w);
            matmul(
                cols.as_mut(),
                Accum::Replace,
                q.as_ref().subcols(0, k).adjoint(),
                mq.as_ref().subcols(k0, w),
                c64::new(1.0, 0.0),
                Par::Seq,
            );
            for j in 0..w {
                for i in 0..k {
                    t[(i, k0 + j)] = cols[(i, j)];
                    t[(k0 + j, i)] = cols[(i, j)].conj();
                }
            }
            steps += 1;
            let full = k == n;
            let check = full || k + p > cap || k <= 96 || steps % 3 == 0;
            if check {
                let proj = t.as_ref().submatrix(0, 0, k, k);
                let herm = Mat::<c64>::from_fn(k, k, |i, j| (proj[(i, j)] + proj[(j, i)].conj()) * 0.5);
                let Ok(evd) = herm.self_adjoint_eigen(Side::Lower) else {
                    return Err(theta.max(0.0).sqrt());
                };
                theta = evd.S()[k - 1].re;
                if full {
                    return Ok(theta.max(0.0).sqrt());
                }
                let s = evd.U().subcols(k - 1, 1);
                let mut r = Mat::<c64>::zeros(n, 1);
                matmul(r.as_mut(), Accum::Replace, mq.as_ref().subcols(0, k), s, c64::new(1.0, 0.0), Par::Seq);
                matmul(r.as_mut(), Accum::Add, q.as_ref().subcols(0, k), s, c64::new(-theta, 0.0), Par::Seq);
                let resid = col_norm(r.as_ref(), 0);
                if resid <= RELATIVE_RESIDUAL * theta.abs() || (theta <= 0.0 && resid == 0.0) {
                    return Ok(theta.max(0.0).sqrt());
                }
                if k + p > cap {
                    // Restart from the leading Ritz vectors.
                    let lead = p.min(k);
                    start = Mat::<c64>::zeros(n, lead);
                    matmul(
                        start.as_mut(),
                        Accum::Replace,
                        q.as_ref().subcols(0, k),
                        evd.U().subcols(k - lead, lead),
                        c64::new(1.0, 0.0),
                        Par::Seq,
                    );
                    break;
                }
            }
            next = orthonormal_extension(q.as_ref().subcols(0, k), mq.as_ref().subcols(k0, w).to_owned());
        }
    }
    Err(theta.max(0.0).sqrt())
}
