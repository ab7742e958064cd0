//! Discrete Fourier sums `Σ_j w_j e^{−2πi x_j·k}` over points or lattices,
//! evaluated on a [`WavenumberGrid`].
//!
//! Every routine accepts several real weight vectors at once and returns one
//! complex vector per weight vector, indexed like the wavenumber grid.

use crate::error::{invalid, Result};
use crate::fft::{next_fast_len, Fft2};
use crate::geometry::WavenumberGrid;
use crate::{Complex64, Point};
use rayon::prelude::*;
use std::f64::consts::PI;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const POINT_CHUNK: usize = 2048;

/// Oversampling ratio of the gridding transform.
pub const GRIDDING_OVERSAMPLING: f64 = 2.0;
/// Gaussian spreading half-width, in units of the nominal fine-grid step.
pub const GRIDDING_SPREAD: usize = 12;
/// Work above which [`DftMethod::Auto`] switches to gridding.
pub const GRIDDING_THRESHOLD: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DftMethod {
    #[default]
    Auto,
    Direct,
    Fast,
}

#[inline]
fn cis(theta: f64) -> Complex64 {
    let (s, c) = theta.sin_cos();
    Complex64::new(c, s)
}

/// `e^{−2πi x k}` for each `k` in `ks`.
fn exp_row(x: f64, ks: &[f64]) -> Vec<Complex64> {
    ks.iter().map(|&k| cis(-2.0 * PI * x * k)).collect()
}

fn check_weights(weights: &[&[f64]], n: usize) -> Result<()> {
    if weights.iter().any(|w| w.len() != n) {
        return Err(invalid("weight vector length differs from the number of locations"));
    }
    Ok(())
}

/// Direct summation over arbitrary points.
pub fn points_direct(points: &[Point], weights: &[&[f64]], kgrid: &WavenumberGrid) -> Result<Vec<Vec<Complex64>>> {
    check_weights(weights, points.len())?;
    let nm = weights.len();
    let nk = kgrid.len();
    let dim = kgrid.dim();
    match kgrid {
        WavenumberGrid::Regular { len, .. } => {
            let k0 = kgrid.axis(0).unwrap();
            let k1 = kgrid.axis(1).unwrap();
            let (n0, n1) = (len[0], len[1]);
            let mut out = vec![vec![ZERO; nk]; nm];
            for start in (0..points.len()).step_by(POINT_CHUNK) {
                let end = (start + POINT_CHUNK).min(points.len());
                let chunk = &points[start..end];
                let e1: Vec<Vec<Complex64>> = chunk.iter().map(|p| exp_row(p[0], &k0)).collect();
                let e2: Vec<Vec<Complex64>> = if dim == 2 {
                    chunk.iter().map(|p| exp_row(p[1], &k1)).collect()
                } else {
                    vec![vec![Complex64::new(1.0, 0.0)]; chunk.len()]
                };
                let rows: Vec<Vec<Complex64>> = (0..n0)
                    .into_par_iter()
                    .map(|i0| {
                        let mut acc = vec![ZERO; nm * n1];
                        for (j, p) in (start..end).enumerate() {
                            let a = e1[j][i0];
                            let row2 = &e2[j];
                            for i1 in 0..n1 {
                                let t = a * row2[i1];
                                for m in 0..nm {
                                    acc[m * n1 + i1] += t * weights[m][p];
                                }
                            }
                        }
                        acc
                    })
                    .collect();
                for (i0, acc) in rows.into_iter().enumerate() {
                    for m in 0..nm {
                        for i1 in 0..n1 {
                            out[m][i0 * n1 + i1] += acc[m * n1 + i1];
                        }
                    }
                }
            }
            Ok(out)
        }
        WavenumberGrid::Scattered { points: ks, .. } => {
            let cols: Vec<Vec<Complex64>> = ks
                .par_iter()
                .map(|k| {
                    let mut acc = vec![ZERO; nm];
                    for (j, x) in points.iter().enumerate() {
                        let dot = x[0] * k[0] + if dim == 2 { x[1] * k[1] } else { 0.0 };
                        let e = cis(-2.0 * PI * dot);
                        for m in 0..nm {
                            acc[m] += e * weights[m][j];
                        }
                    }
                    acc
                })
                .collect();
            Ok(transpose_cols(cols, nm))
        }
    }
}

fn transpose_cols(cols: Vec<Vec<Complex64>>, nm: usize) -> Vec<Vec<Complex64>> {
    let mut out = vec![Vec::with_capacity(cols.len()); nm];
    for c in cols {
        for m in 0..nm {
            out[m].push(c[m]);
        }
    }
    out
}

/// Per-axis parameters of the gridding transform for a regular axis
/// `k_i = c + (i − (K−1)/2)·step`, rewritten as `k = c + (m + ε)·step` with
/// integer `m = i − ⌊K/2⌋`.
#[derive(Debug, Clone, Copy)]
struct GridAxis {
    k: usize,
    shift: f64,
    step: f64,
    fine: usize,
    tau: f64,
    half_width: usize,
}

impl GridAxis {
    fn new(k: usize, center: f64, step: f64) -> (Self, f64) {
        let eps = (k / 2) as f64 - (k as f64 - 1.0) / 2.0;
        let fine = next_fast_len(((GRIDDING_OVERSAMPLING * k as f64).ceil() as usize).max(2 * GRIDDING_SPREAD + 2));
        let r = GRIDDING_OVERSAMPLING;
        let kk = (k.max(1)) as f64;
        let tau = PI * GRIDDING_SPREAD as f64 / (kk * kk * r * (r - 0.5));
        let half_width = ((GRIDDING_SPREAD as f64) * fine as f64 / (r * kk)).ceil() as usize;
        let half_width = half_width.min((fine - 1) / 2);
        (Self { k, shift: center + eps * step, step, fine, tau, half_width }, eps)
    }

    /// Angle in `[−π, π)` of a location.
    fn angle(&self, x: f64) -> f64 {
        let t = 2.0 * PI * self.step * x;
        t - 2.0 * PI * ((t + PI) / (2.0 * PI)).floor()
    }

    /// Nearest fine node and the Gaussian weights over its window.
    fn spread(&self, t: f64, buf: &mut Vec<(usize, f64)>) {
        buf.clear();
        let h = 2.0 * PI / self.fine as f64;
        let l0 = (t / h).round() as i64;
        let w = self.half_width as i64;
        for l in (l0 - w)..=(l0 + w) {
            let d = t - l as f64 * h;
            let g = (-d * d / (4.0 * self.tau)).exp();
            buf.push((l.rem_euclid(self.fine as i64) as usize, g));
        }
    }

    /// Deconvolution factor and fine-grid index of output index `i`.
    fn output(&self, i: usize) -> (usize, f64) {
        let m = i as i64 - (self.k / 2) as i64;
        let idx = m.rem_euclid(self.fine as i64) as usize;
        let scale = (PI / self.tau).sqrt() * (m as f64 * m as f64 * self.tau).exp() / self.fine as f64;
        (idx, scale)
    }
}

/// Type-1 nonuniform transform by Gaussian gridding onto an oversampled
/// periodic lattice. Requires a regular wavenumber grid.
pub fn points_gridding(points: &[Point], weights: &[&[f64]], kgrid: &WavenumberGrid) -> Result<Vec<Vec<Complex64>>> {
    check_weights(weights, points.len())?;
    let WavenumberGrid::Regular { dim, center, step, len } = *kgrid else {
        return Err(invalid("gridding transform needs a regular wavenumber grid"));
    };
    let (ax0, _) = GridAxis::new(len[0], center[0], step[0]);
    let ax1 = if dim == 2 { Some(GridAxis::new(len[1], center[1], step[1]).0) } else { None };
    let fine = [ax0.fine, ax1.map_or(1, |a| a.fine)];
    let fft = Fft2::new(fine);
    let nm = weights.len();

    let grids: Vec<Vec<Complex64>> = (0..nm)
        .into_par_iter()
        .map(|m| {
            let mut grid = vec![ZERO; fine[0] * fine[1]];
            let mut s0 = Vec::new();
            let mut s1 = vec![(0usize, 1.0f64)];
            for (j, x) in points.iter().enumerate() {
                let mut dot = x[0] * ax0.shift;
                if dim == 2 {
                    dot += x[1] * ax1.unwrap().shift;
                }
                let c = cis(-2.0 * PI * dot) * weights[m][j];
                ax0.spread(ax0.angle(x[0]), &mut s0);
                if let Some(a1) = ax1 {
                    a1.spread(a1.angle(x[1]), &mut s1);
                }
                for &(l0, g0) in &s0 {
                    let row = &mut grid[l0 * fine[1]..(l0 + 1) * fine[1]];
                    let cg = c * g0;
                    for &(l1, g1) in &s1 {
                        row[l1] += cg * g1;
                    }
                }
            }
            fft.forward(&mut grid);
            let mut out = vec![ZERO; len[0] * len[1]];
            for i0 in 0..len[0] {
                let (f0, d0) = ax0.output(i0);
                for i1 in 0..len[1] {
                    let (f1, d1) = match ax1 {
                        Some(a1) => a1.output(i1),
                        None => (0, 1.0),
                    };
                    out[i0 * len[1] + i1] = grid[f0 * fine[1] + f1] * (d0 * d1);
                }
            }
            out
        })
        .collect();
    Ok(grids)
}

/// Sum over points using `method`; `Auto` picks gridding when the direct
/// cost `N·K` exceeds [`GRIDDING_THRESHOLD`] and the grid is regular.
pub fn points_dft(points: &[Point], weights: &[&[f64]], kgrid: &WavenumberGrid, method: DftMethod) -> Result<Vec<Vec<Complex64>>> {
    let regular = matches!(kgrid, WavenumberGrid::Regular { .. });
    let fast = match method {
        DftMethod::Direct => false,
        DftMethod::Fast => true,
        DftMethod::Auto => regular && (points.len() as f64) * (kgrid.len() as f64) > GRIDDING_THRESHOLD,
    };
    if fast {
        points_gridding(points, weights, kgrid)
    } else {
        points_direct(points, weights, kgrid)
    }
}

/// A box of regularly spaced nodes `origin + t∘spacing`, `0 ≤ t < n`,
/// stored row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub dim: usize,
    pub origin: Point,
    pub spacing: Point,
    pub n: [usize; 2],
}

impl Lattice {
    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, i: usize) -> Point {
        let (t0, t1) = (i / self.n[1], i % self.n[1]);
        let mut u = [self.origin[0] + t0 as f64 * self.spacing[0], 0.0];
        if self.dim == 2 {
            u[1] = self.origin[1] + t1 as f64 * self.spacing[1];
        }
        u
    }

    fn axis_nodes(&self, j: usize) -> Vec<f64> {
        if j >= self.dim {
            return vec![0.0];
        }
        (0..self.n[j]).map(|t| self.origin[j] + t as f64 * self.spacing[j]).collect()
    }
}

/// Separable direct summation over a lattice: cost `n0·n1·K1 + n0·K1·K0`
/// on regular grids.
pub fn lattice_direct(lat: &Lattice, values: &[&[f64]], kgrid: &WavenumberGrid) -> Result<Vec<Vec<Complex64>>> {
    check_weights(values, lat.len())?;
    let nm = values.len();
    match kgrid {
        WavenumberGrid::Regular { len, .. } => {
            let k0 = kgrid.axis(0).unwrap();
            let k1 = kgrid.axis(1).unwrap();
            let u0 = lat.axis_nodes(0);
            let u1 = lat.axis_nodes(1);
            let e1: Vec<Vec<Complex64>> = u0.iter().map(|&x| exp_row(x, &k0)).collect();
            let e2: Vec<Vec<Complex64>> = if lat.dim == 2 {
                u1.iter().map(|&y| exp_row(y, &k1)).collect()
            } else {
                vec![vec![Complex64::new(1.0, 0.0)]]
            };
            let (n0, n1) = (lat.n[0], lat.n[1]);
            let (l0, l1) = (len[0], len[1]);
            Ok((0..nm)
                .into_par_iter()
                .map(|m| {
                    let v = values[m];
                    let mut g = vec![ZERO; n0 * l1];
                    for t0 in 0..n0 {
                        let row = &mut g[t0 * l1..(t0 + 1) * l1];
                        for t1 in 0..n1 {
                            let a = v[t0 * n1 + t1];
                            if a == 0.0 {
                                continue;
                            }
                            for (r, e) in row.iter_mut().zip(&e2[t1]) {
                                *r += e * a;
                            }
                        }
                    }
                    let mut out = vec![ZERO; l0 * l1];
                    for t0 in 0..n0 {
                        let grow = &g[t0 * l1..(t0 + 1) * l1];
                        for i0 in 0..l0 {
                            let e = e1[t0][i0];
                            let orow = &mut out[i0 * l1..(i0 + 1) * l1];
                            for (o, x) in orow.iter_mut().zip(grow) {
                                *o += e * x;
                            }
                        }
                    }
                    out
                })
                .collect())
        }
        WavenumberGrid::Scattered { .. } => {
            let mut pts = Vec::new();
            let mut idx = Vec::new();
            for i in 0..lat.len() {
                if values.iter().any(|v| v[i] != 0.0) {
                    pts.push(lat.node(i));
                    idx.push(i);
                }
            }
            let w: Vec<Vec<f64>> = values.iter().map(|v| idx.iter().map(|&i| v[i]).collect()).collect();
            let wr: Vec<&[f64]> = w.iter().map(|v| v.as_slice()).collect();
            points_direct(&pts, &wr, kgrid)
        }
    }
}

/// FFT length `N` with `step·Δ·N = 1` and `N ≥ n`, if one exists.
fn fft_length(step: f64, spacing: f64, n: usize) -> Option<usize> {
    let inv = 1.0 / (step * spacing);
    let nf = inv.round();
    if nf < 1.0 || ((nf - inv) / inv).abs() > 1e-12 || (nf as usize) < n {
        return None;
    }
    Some(nf as usize)
}

/// Whether [`lattice_fft`] applies: regular grid whose step per axis is
/// `1/(N Δ)` for an integer `N` no smaller than the lattice.
pub fn lattice_fft_applies(lat: &Lattice, kgrid: &WavenumberGrid) -> bool {
    fft_plan(lat, kgrid).is_some()
}

fn fft_plan(lat: &Lattice, kgrid: &WavenumberGrid) -> Option<[usize; 2]> {
    let WavenumberGrid::Regular { dim, step, .. } = *kgrid else {
        return None;
    };
    if dim != lat.dim {
        return None;
    }
    let n0 = fft_length(step[0], lat.spacing[0], lat.n[0])?;
    let n1 = if dim == 2 { fft_length(step[1], lat.spacing[1], lat.n[1])? } else { 1 };
    Some([n0, n1])
}

/// Exact lattice transform through a length-`N` FFT per axis.
pub fn lattice_fft(lat: &Lattice, values: &[&[f64]], kgrid: &WavenumberGrid) -> Result<Vec<Vec<Complex64>>> {
    check_weights(values, lat.len())?;
    let nf = fft_plan(lat, kgrid).ok_or_else(|| invalid("wavenumber grid is not a Fourier grid of the lattice"))?;
    let WavenumberGrid::Regular { len, .. } = *kgrid else { unreachable!() };
    let k0 = kgrid.axis(0).unwrap();
    let k1 = kgrid.axis(1).unwrap();
    let fft = Fft2::new(nf);
    // Pre-twiddle by the first wavenumber, post-twiddle by the origin.
    let pre0: Vec<Complex64> = (0..lat.n[0]).map(|t| cis(-2.0 * PI * t as f64 * lat.spacing[0] * k0[0])).collect();
    let pre1: Vec<Complex64> = if lat.dim == 2 {
        (0..lat.n[1]).map(|t| cis(-2.0 * PI * t as f64 * lat.spacing[1] * k1[0])).collect()
    } else {
        vec![Complex64::new(1.0, 0.0)]
    };
    let post0 = exp_row(lat.origin[0], &k0);
    let post1 = if lat.dim == 2 { exp_row(lat.origin[1], &k1) } else { vec![Complex64::new(1.0, 0.0)] };
    Ok((0..values.len())
        .into_par_iter()
        .map(|m| {
            let v = values[m];
            let mut buf = vec![ZERO; nf[0] * nf[1]];
            for t0 in 0..lat.n[0] {
                for t1 in 0..lat.n[1] {
                    buf[t0 * nf[1] + t1] = pre0[t0] * pre1[t1] * v[t0 * lat.n[1] + t1];
                }
            }
            fft.forward(&mut buf);
            let mut out = vec![ZERO; len[0] * len[1]];
            for i0 in 0..len[0] {
                for i1 in 0..len[1] {
                    let a = buf[(i0 % nf[0]) * nf[1] + (i1 % nf[1])];
                    out[i0 * len[1] + i1] = a * post0[i0] * post1[i1];
                }
            }
            out
        })
        .collect())
}

/// Lattice transform using the FFT when applicable under `method`.
pub fn lattice_dft(lat: &Lattice, values: &[&[f64]], kgrid: &WavenumberGrid, method: DftMethod) -> Result<Vec<Vec<Complex64>>> {
    match method {
        DftMethod::Direct => lattice_direct(lat, values, kgrid),
        DftMethod::Fast => lattice_fft(lat, values, kgrid),
        DftMethod::Auto => {
            if lattice_fft_applies(lat, kgrid) {
                lattice_fft(lat, values, kgrid)
            } else {
                lattice_direct(lat, values, kgrid)
            }
        }
    }
}

/// Largest elementwise `|a − b|` relative to the largest `|b|`.
pub fn max_relative_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let err = a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}
