//! Thin two-dimensional wrapper over `rustfft`.

use crate::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Smallest `n' ≥ n` whose only prime factors are 2, 3 and 5.
pub fn next_fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Unnormalised 2D transform on a row-major `n[0] × n[1]` buffer.
/// A one-dimensional transform is the case `n[1] == 1`.
#[derive(Clone)]
pub struct Fft2 {
    n: [usize; 2],
    rows: [Arc<dyn Fft<f64>>; 2],
    cols: [Arc<dyn Fft<f64>>; 2],
    scratch_len: usize,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("n", &self.n).finish()
    }
}

impl Fft2 {
    pub fn new(n: [usize; 2]) -> Self {
        let mut planner = FftPlanner::new();
        let rows = [planner.plan_fft_forward(n[1]), planner.plan_fft_inverse(n[1])];
        let cols = [planner.plan_fft_forward(n[0]), planner.plan_fft_inverse(n[0])];
        let scratch_len = rows
            .iter()
            .chain(cols.iter())
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Self { n, rows, cols, scratch_len }
    }

    pub fn shape(&self) -> [usize; 2] {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, 0);
    }

    /// Inverse transform without the `1/N` factor.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, 1);
    }

    fn run(&self, buf: &mut [Complex64], dir: usize) {
        assert_eq!(buf.len(), self.len());
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.scratch_len];
        let [n0, n1] = self.n;
        if n1 > 1 {
            self.rows[dir].process_with_scratch(buf, &mut scratch);
        }
        if n0 > 1 {
            if n1 == 1 {
                self.cols[dir].process_with_scratch(buf, &mut scratch);
            } else {
                let mut t = vec![Complex64::new(0.0, 0.0); buf.len()];
                transpose(buf, &mut t, n0, n1);
                self.cols[dir].process_with_scratch(&mut t, &mut scratch);
                transpose(&t, buf, n1, n0);
            }
        }
    }
}

/// Writes the transpose of the row-major `rows × cols` matrix `src` to `dst`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const B: usize = 32;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn fast_lengths() {
        assert_eq!(next_fast_len(1), 1);
        assert_eq!(next_fast_len(7), 8);
        assert_eq!(next_fast_len(121), 125);
        assert_eq!(next_fast_len(401), 405);
    }

    #[test]
    fn matches_direct_dft() {
        let n = [6, 5];
        let x: Vec<Complex64> = (0..30).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let mut y = x.clone();
        Fft2::new(n).forward(&mut y);
        for a in 0..n[0] {
            for b in 0..n[1] {
                let mut s = Complex64::new(0.0, 0.0);
                for i in 0..n[0] {
                    for j in 0..n[1] {
                        let ph = -2.0 * PI * ((a * i) as f64 / n[0] as f64 + (b * j) as f64 / n[1] as f64);
                        s += x[i * n[1] + j] * Complex64::from_polar(1.0, ph);
                    }
                }
                assert!((s - y[a * n[1] + b]).norm() < 1e-12);
            }
        }
        let f = Fft2::new(n);
        f.inverse(&mut y);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v / 30.0).norm() < 1e-13);
        }
    }
}
