//! Leading eigenpairs of symmetric positive semidefinite operators.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Symmetric operator applied to blocks of column vectors.
pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;
    fn apply_block(&self, x: &DMatrix<f64>) -> DMatrix<f64>;
}

impl SymmetricOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self * x
    }
}

/// How many leading eigenpairs to return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    Count(usize),
    /// Every eigenvalue at or above the threshold.
    Threshold(f64),
}

#[derive(Debug, Clone)]
pub struct EigenPairs {
    /// Non-increasing.
    pub values: Vec<f64>,
    /// One unit column per value.
    pub vectors: DMatrix<f64>,
    /// `‖A v − λ v‖` per pair.
    pub residuals: Vec<f64>,
    /// Largest eigenvalue found, used as the operator norm.
    pub norm: f64,
    pub iterations: usize,
}

/// Flips `v` so that its sum is positive, or its largest entry when the sum
/// vanishes.
pub fn fix_sign(v: &mut [f64]) {
    let sum: f64 = v.iter().sum();
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    let s = if sum.abs() > 1e-8 * l1 {
        sum
    } else {
        let mut best = 0.0f64;
        for &x in v.iter() {
            if x.abs() > best.abs() * (1.0 + 1e-12) {
                best = x;
            }
        }
        best
    };
    if s < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn sorted_eigen(h: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = h.nrows();
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn count_selected(values: &[f64], sel: Selection) -> usize {
    match sel {
        Selection::Count(m) => m.min(values.len()),
        Selection::Threshold(t) => values.iter().take_while(|&&v| v >= t).count(),
    }
}

fn finish(values: Vec<f64>, mut vectors: DMatrix<f64>, op: &dyn SymmetricOperator, keep: usize, iterations: usize) -> EigenPairs {
    let norm = values.first().copied().unwrap_or(0.0).max(0.0);
    let values: Vec<f64> = values[..keep].to_vec();
    vectors = vectors.columns(0, keep).into_owned();
    for mut c in vectors.column_iter_mut() {
        fix_sign(c.as_mut_slice());
    }
    let av = op.apply_block(&vectors);
    let residuals = (0..keep)
        .map(|j| (av.column(j) - vectors.column(j) * values[j]).norm())
        .collect();
    EigenPairs { values, vectors, residuals, norm, iterations }
}

/// Dense symmetric eigendecomposition keeping the selected leading pairs.
pub fn dense_top(a: &DMatrix<f64>, sel: Selection) -> EigenPairs {
    let (values, vectors) = sorted_eigen(a.clone());
    let keep = count_selected(&values, sel);
    finish(values, vectors, a, keep, 1)
}

/// Orthonormalises the columns of `x` in place (SVQB, applied twice).
/// Directions lost to rank deficiency are left tiny rather than removed.
pub fn orthonormalize(x: &mut DMatrix<f64>) {
    for _ in 0..2 {
        let p = x.ncols();
        for j in 0..p {
            let n = x.column(j).norm();
            if n > 0.0 {
                x.column_mut(j).scale_mut(1.0 / n);
            }
        }
        let g = x.tr_mul(x);
        let eig = SymmetricEigen::new(g);
        let dmax = eig.eigenvalues.max().max(f64::MIN_POSITIVE);
        let floor = dmax * 1e-15;
        let scale = DVector::from_iterator(p, eig.eigenvalues.iter().map(|&d| 1.0 / d.max(floor).sqrt()));
        let mut u = eig.eigenvectors;
        for (j, mut c) in u.column_iter_mut().enumerate() {
            c.scale_mut(scale[j]);
        }
        *x = &*x * u;
    }
}

/// Options for [`subspace_top`].
#[derive(Debug, Clone, Copy)]
pub struct SubspaceOptions {
    /// Initial block size.
    pub block: usize,
    /// Residual target relative to the operator norm.
    pub tol: f64,
    /// Residual accepted when progress stalls.
    pub accept: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SubspaceOptions {
    fn default() -> Self {
        Self { block: 32, tol: 1e-10, accept: 1e-8, max_iter: 500, seed: 0x5eed }
    }
}

fn random_block(n: usize, p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng))
}

/// Block subspace iteration with Rayleigh–Ritz projection.
///
/// The block grows while the selection would use more than all but a guard
/// band of its columns, since convergence of the `i`-th pair goes like
/// `(λ_{p+1}/λ_i)^iter`.
pub fn subspace_top(op: &dyn SymmetricOperator, sel: Selection, opts: SubspaceOptions) -> Result<EigenPairs> {
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let min_block = match sel {
        Selection::Count(m) => m + 8,
        Selection::Threshold(_) => 16,
    };
    let mut p = opts.block.max(min_block).min(n);
    let mut v = random_block(n, p, &mut rng);
    orthonormalize(&mut v);
    let mut best = f64::INFINITY;
    let mut stall = 0;
    for it in 1..=opts.max_iter {
        let w = op.apply_block(&v);
        let mut h = v.tr_mul(&w);
        h = (&h + h.transpose()) * 0.5;
        let (values, q) = sorted_eigen(h);
        let vq = &v * &q;
        let wq = &w * &q;
        let norm = values[0].abs().max(f64::MIN_POSITIVE);
        let want = count_selected(&values, sel);
        let guard = (p / 8).max(8);
        if want + guard > p && p < n {
            let extra = (want + guard - p).max(p / 2).min(n - p);
            log::debug!("subspace block grows from {p} to {}", p + extra);
            let mut grown = DMatrix::zeros(n, p + extra);
            grown.columns_mut(0, p).copy_from(&wq);
            grown.columns_mut(p, extra).copy_from(&random_block(n, extra, &mut rng));
            p += extra;
            v = grown;
            orthonormalize(&mut v);
            best = f64::INFINITY;
            stall = 0;
            continue;
        }
        // Pairs to converge: the selection plus one to pin the threshold edge.
        let check = (want + 1).min(p);
        let mut worst: f64 = 0.0;
        for j in 0..check {
            let r = (wq.column(j) - vq.column(j) * values[j]).norm();
            worst = worst.max(r / norm);
        }
        log::trace!("subspace iteration {it}: block {p}, want {want}, residual {worst:.3e}");
        let done = worst <= opts.tol || p == n;
        if worst < best * 0.9 {
            best = worst;
            stall = 0;
        } else {
            stall += 1;
        }
        if done || (stall >= 6 && worst <= opts.accept) {
            let keep = count_selected(&values, sel);
            return Ok(finish(values, vq, op, keep, it));
        }
        v = wq;
        orthonormalize(&mut v);
    }
    Err(Error::NoConvergence { residual: best, iterations: opts.max_iter })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_matrix(n: usize) -> DMatrix<f64> {
        // Symmetric with known-ish spectrum: Q diag Qᵀ with a fast decay.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut q = random_block(n, n, &mut rng);
        orthonormalize(&mut q);
        let d = DVector::from_fn(n, |i, _| if i < 10 { 1.0 - 1e-6 * i as f64 } else { 0.5f64.powi(i as i32 - 9) });
        &q * DMatrix::from_diagonal(&d) * q.transpose()
    }

    #[test]
    fn orthonormalize_gives_identity_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut x = random_block(200, 30, &mut rng);
        orthonormalize(&mut x);
        let g = x.tr_mul(&x);
        assert!((g - DMatrix::identity(30, 30)).amax() < 1e-14);
    }

    #[test]
    fn subspace_matches_dense() {
        let a = test_matrix(120);
        let d = dense_top(&a, Selection::Threshold(0.9));
        assert_eq!(d.values.len(), 10);
        let s = subspace_top(&a, Selection::Threshold(0.9), SubspaceOptions { block: 14, ..Default::default() }).unwrap();
        assert_eq!(s.values.len(), 10);
        for j in 0..10 {
            assert!((d.values[j] - s.values[j]).abs() < 1e-12);
            assert!(s.residuals[j] < 1e-9);
        }
        let s = subspace_top(&a, Selection::Count(4), SubspaceOptions::default()).unwrap();
        assert_eq!(s.values.len(), 4);
        assert!(s.residuals.iter().all(|&r| r < 1e-9));
    }

    #[test]
    fn sign_convention() {
        let mut v = vec![-1.0, -2.0, 0.5];
        fix_sign(&mut v);
        assert_eq!(v, vec![1.0, 2.0, -0.5]);
        let mut v = vec![1.0, -3.0, 2.0];
        fix_sign(&mut v);
        assert_eq!(v, vec![-1.0, 3.0, -2.0]);
    }
}
