//! Concentrated orthonormal taper families on irregular regions.
//!
//! A base taper is an eigenvector of the concentration operator
//! `A_ij = δ̄ K_b(c_i − c_j)` over the masked reference cells, where `K_b` is
//! the inverse Fourier transform of the indicator of the ball of radius `b`.
//! Its eigenvalue is the fraction of spectral energy inside the ball.
//!
//! Eigenvectors are stored with unit Euclidean norm. The continuous taper is
//! the multilinear interpolant of the nodes scaled by `1/√δ̄`, so that its
//! `L²` norm is one up to an interpolation error bounded by
//! [`interpolation_error_bound`].

use crate::dft::{lattice_dft, DftMethod, Lattice};
use crate::error::{invalid, Error, Result};
use crate::fft::{next_fast_len, Fft2};
use crate::geometry::{Region, SamplingScheme, WavenumberGrid};
use crate::linalg::{dense_top, subspace_top, EigenPairs, Selection, SubspaceOptions, SymmetricOperator};
use crate::special::{bessel_j1, sinc};
use crate::{Complex64, Point};
use nalgebra::DMatrix;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Default lower bound on the concentration of a selected taper.
pub const DEFAULT_THRESHOLD: f64 = 0.99;

/// Largest operator size solved by a dense eigendecomposition.
pub const DEFAULT_DENSE_LIMIT: usize = 500;

/// Kernel of the ball-concentration operator at displacement `r`.
pub fn ball_kernel(dim: usize, b: f64, r: Point) -> f64 {
    if dim == 1 {
        let x = r[0];
        if x == 0.0 {
            2.0 * b
        } else {
            (2.0 * PI * b * x).sin() / (PI * x)
        }
    } else {
        let d = r[0].hypot(r[1]);
        if d == 0.0 {
            PI * b * b
        } else {
            b * bessel_j1(2.0 * PI * b * d) / d
        }
    }
}

/// Expected number of well-concentrated tapers: `2bL` in one dimension,
/// `π b² ℓ(R)` in two.
pub fn shannon_number(region: &Region, b: f64) -> f64 {
    if region.dim() == 1 {
        2.0 * b * region.area()
    } else {
        PI * b * b * region.area()
    }
}

/// The concentration operator restricted to the masked cells, applied by
/// FFT convolution on a zero-padded lattice.
pub struct ConcentrationOperator {
    shape: [usize; 2],
    cells: Vec<usize>,
    padded_pos: Vec<usize>,
    fft: Fft2,
    kernel_hat: Vec<f64>,
    table: Vec<f64>,
}

impl ConcentrationOperator {
    pub fn new(region: &Region, b: f64) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(invalid(format!("bandwidth must be positive, got {b}")));
        }
        let dim = region.dim();
        let shape = region.shape();
        let delta = region.delta();
        let w = region.cell_volume();
        let padded = [next_fast_len(2 * shape[0] - 1), if dim == 2 { next_fast_len(2 * shape[1] - 1) } else { 1 }];
        let tw = [2 * shape[0] - 1, 2 * shape[1] - 1];
        let mut table = vec![0.0; tw[0] * tw[1]];
        let mut kernel = vec![Complex64::new(0.0, 0.0); padded[0] * padded[1]];
        for a in 0..tw[0] {
            let dx = a as i64 - (shape[0] as i64 - 1);
            for c in 0..tw[1] {
                let dy = c as i64 - (shape[1] as i64 - 1);
                let v = w * ball_kernel(dim, b, [dx as f64 * delta[0], dy as f64 * delta[1]]);
                table[a * tw[1] + c] = v;
                let px = dx.rem_euclid(padded[0] as i64) as usize;
                let py = dy.rem_euclid(padded[1] as i64) as usize;
                kernel[px * padded[1] + py] = Complex64::new(v, 0.0);
            }
        }
        let fft = Fft2::new(padded);
        fft.forward(&mut kernel);
        let norm = 1.0 / (padded[0] * padded[1]) as f64;
        let kernel_hat = kernel.iter().map(|z| z.re * norm).collect();
        let cells = region.cells();
        let padded_pos = cells
            .iter()
            .map(|&i| (i / shape[1]) * padded[1] + (i % shape[1]))
            .collect();
        Ok(Self { shape, cells, padded_pos, fft, kernel_hat, table })
    }

    /// Reference-lattice indices of the operator's rows.
    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        let (ci, cj) = (self.cells[i], self.cells[j]);
        let dx = (ci / self.shape[1]) as i64 - (cj / self.shape[1]) as i64 + self.shape[0] as i64 - 1;
        let dy = (ci % self.shape[1]) as i64 - (cj % self.shape[1]) as i64 + self.shape[1] as i64 - 1;
        self.table[dx as usize * (2 * self.shape[1] - 1) + dy as usize]
    }

    /// Explicit matrix, for small operators.
    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.cells.len();
        DMatrix::from_fn(n, n, |i, j| self.entry(i, j))
    }

    fn apply_pair(&self, a: &[f64], b: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft.len()];
        for (k, &p) in self.padded_pos.iter().enumerate() {
            buf[p] = Complex64::new(a[k], b.map_or(0.0, |b| b[k]));
        }
        self.fft.forward(&mut buf);
        for (z, &h) in buf.iter_mut().zip(&self.kernel_hat) {
            *z *= h;
        }
        self.fft.inverse(&mut buf);
        let re = self.padded_pos.iter().map(|&p| buf[p].re).collect();
        let im = self.padded_pos.iter().map(|&p| buf[p].im).collect();
        (re, im)
    }
}

impl SymmetricOperator for ConcentrationOperator {
    fn dim(&self) -> usize {
        self.cells.len()
    }

    fn apply_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = x.nrows();
        let p = x.ncols();
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..p.div_ceil(2))
            .into_par_iter()
            .map(|j| {
                let a = x.column(2 * j);
                let b = (2 * j + 1 < p).then(|| x.column(2 * j + 1));
                self.apply_pair(a.as_slice(), b.as_ref().map(|c| c.as_slice()))
            })
            .collect();
        let mut out = DMatrix::zeros(n, p);
        for (j, (re, im)) in pairs.into_iter().enumerate() {
            out.column_mut(2 * j).copy_from_slice(&re);
            if 2 * j + 1 < p {
                out.column_mut(2 * j + 1).copy_from_slice(&im);
            }
        }
        out
    }
}

/// Options for [`compute_tapers`].
#[derive(Debug, Clone, Copy)]
pub struct TaperOptions {
    pub selection: Selection,
    /// Operators with at most this many cells use a dense eigensolver.
    pub dense_limit: usize,
    pub seed: u64,
}

impl Default for TaperOptions {
    fn default() -> Self {
        Self { selection: Selection::Threshold(DEFAULT_THRESHOLD), dense_limit: DEFAULT_DENSE_LIMIT, seed: 0x7a9e }
    }
}

/// Orthonormal base tapers on the reference lattice of a region.
#[derive(Debug, Clone)]
pub struct TaperFamily {
    region: Region,
    bandwidth: f64,
    /// One unit vector per taper over the whole reference lattice, zero
    /// outside the mask.
    values: Vec<Vec<f64>>,
    concentrations: Vec<f64>,
    residuals: Vec<f64>,
    operator_norm: f64,
}

/// Builds the most concentrated tapers on `region` for bandwidth `b`.
pub fn compute_tapers(region: &Region, b: f64, opts: TaperOptions) -> Result<TaperFamily> {
    let op = ConcentrationOperator::new(region, b)?;
    let n = op.cells().len();
    let pairs: EigenPairs = if n <= opts.dense_limit {
        dense_top(&op.dense(), opts.selection)
    } else {
        let shannon = shannon_number(region, b);
        let block = (1.25 * shannon).ceil() as usize + 12;
        log::info!("tapers: {n} cells, Shannon number {shannon:.1}, block {block}");
        subspace_top(&op, opts.selection, SubspaceOptions { block, seed: opts.seed, ..Default::default() })?
    };
    if pairs.values.is_empty() {
        return match opts.selection {
            Selection::Threshold(t) => Err(Error::InsufficientConcentration { threshold: t, best: pairs.norm }),
            Selection::Count(_) => Err(Error::NoTapers),
        };
    }
    let mut values = Vec::with_capacity(pairs.values.len());
    for v in pairs.vectors.column_iter() {
        let mut full = vec![0.0; region.len()];
        for (k, &c) in op.cells().iter().enumerate() {
            full[c] = v[k];
        }
        values.push(full);
    }
    Ok(TaperFamily {
        region: region.clone(),
        bandwidth: b,
        values,
        concentrations: pairs.values,
        residuals: pairs.residuals,
        operator_norm: pairs.norm,
    })
}

impl TaperFamily {
    /// Reassembles a family from stored parts. Residuals are unknown and
    /// reported as NaN.
    pub fn from_parts(region: Region, bandwidth: f64, values: Vec<Vec<f64>>, concentrations: Vec<f64>) -> Result<Self> {
        if values.len() != concentrations.len() || values.is_empty() {
            return Err(invalid("taper values and concentrations disagree in number"));
        }
        if values.iter().any(|v| v.len() != region.len()) {
            return Err(invalid("taper length differs from the region lattice"));
        }
        let m = values.len();
        Ok(Self {
            region,
            bandwidth,
            values,
            concentrations,
            residuals: vec![f64::NAN; m],
            operator_norm: f64::NAN,
        })
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn concentrations(&self) -> &[f64] {
        &self.concentrations
    }

    /// `‖A v − λ v‖` from the solver, per taper.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn operator_norm(&self) -> f64 {
        self.operator_norm
    }

    /// Unit-norm node values of taper `m` over the reference lattice.
    pub fn values(&self, m: usize) -> &[f64] {
        &self.values[m]
    }

    /// `1/√δ̄`, mapping node values to the continuous taper.
    pub fn norm_scale(&self) -> f64 {
        1.0 / self.region.cell_volume().sqrt()
    }

    /// Keeps the first `m` tapers.
    pub fn truncate(&mut self, m: usize) {
        self.values.truncate(m);
        self.concentrations.truncate(m);
        self.residuals.truncate(m);
    }

    /// Euclidean Gram matrix of the stored node vectors.
    pub fn gram(&self) -> DMatrix<f64> {
        let m = self.len();
        DMatrix::from_fn(m, m, |i, j| self.values[i].iter().zip(&self.values[j]).map(|(a, b)| a * b).sum())
    }

    /// Exact `L²` Gram matrix of the interpolated continuous tapers.
    pub fn interpolated_gram(&self) -> DMatrix<f64> {
        let m = self.len();
        let mut g = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = tent_inner_product(&self.region, &self.values[i], &self.values[j]);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    /// Continuous taper `m` at `u`: multilinear interpolation between cell
    /// centres, with zero beyond the lattice, scaled by [`Self::norm_scale`].
    /// Zero outside the bounding box.
    pub fn interpolated_value(&self, m: usize, u: &Point) -> f64 {
        if !self.region.bbox().contains(u) {
            return 0.0;
        }
        self.norm_scale() * interpolate(&self.region, &self.values[m], u)
    }

    /// Node lattice of the reference cells.
    pub fn lattice(&self) -> Lattice {
        let bb = self.region.bbox();
        let d = self.region.delta();
        let dim = self.region.dim();
        let mut origin = [bb.lo[0] + 0.5 * d[0], 0.0];
        if dim == 2 {
            origin[1] = bb.lo[1] + 0.5 * d[1];
        }
        Lattice { dim, origin, spacing: d, n: self.region.shape() }
    }

    /// Subsamples taper `m` onto the grid `scheme`.
    pub fn sample(&self, m: usize, scheme: &SamplingScheme) -> Result<SampledTaper> {
        let mut all = self.sample_all(scheme)?;
        Ok(all.swap_remove(m))
    }

    /// Subsamples every taper onto the grid `scheme`.
    pub fn sample_all(&self, scheme: &SamplingScheme) -> Result<Vec<SampledTaper>> {
        let nodes = GridNodes::new(scheme, &self.region)?;
        Ok((0..self.len())
            .map(|m| {
                let weights = nodes.points.iter().map(|u| self.interpolated_value(m, u)).collect();
                SampledTaper { index: m, nodes: nodes.clone(), weights }
            })
            .collect())
    }

    /// Continuous transfer functions `H_m(k)` of every taper.
    pub fn transfer_functions(&self, kgrid: &WavenumberGrid) -> Result<Vec<TransferFunction>> {
        self.transfer_functions_with(kgrid, DftMethod::Auto)
    }

    pub fn transfer_functions_with(&self, kgrid: &WavenumberGrid, method: DftMethod) -> Result<Vec<TransferFunction>> {
        let lat = self.lattice();
        let vals: Vec<&[f64]> = self.values.iter().map(|v| v.as_slice()).collect();
        let sums = lattice_dft(&lat, &vals, kgrid, method)?;
        let d = self.region.delta();
        let dim = self.region.dim();
        let s = self.region.cell_volume().sqrt();
        let factor: Vec<f64> = (0..kgrid.len())
            .map(|i| {
                let k = kgrid.point(i);
                let mut f = s;
                for j in 0..dim {
                    let x = sinc(PI * d[j] * k[j]);
                    f *= x * x;
                }
                f
            })
            .collect();
        Ok(sums
            .into_iter()
            .map(|mut v| {
                for (z, f) in v.iter_mut().zip(&factor) {
                    *z *= f;
                }
                TransferFunction { grid: kgrid.clone(), values: v }
            })
            .collect())
    }

    /// Transfer function of taper `m` as seen through `scheme`.
    pub fn transfer_function(&self, m: usize, scheme: &SamplingScheme, kgrid: &WavenumberGrid) -> Result<TransferFunction> {
        match scheme {
            SamplingScheme::Continuous => {
                let mut one = self.clone();
                one.values = vec![self.values[m].clone()];
                Ok(one.transfer_functions(kgrid)?.remove(0))
            }
            SamplingScheme::Grid { .. } => self.sample(m, scheme)?.transfer_function(kgrid),
        }
    }
}

/// Multilinear interpolation of node values at cell centres.
fn interpolate(region: &Region, v: &[f64], u: &Point) -> f64 {
    let bb = region.bbox();
    let d = region.delta();
    let shape = region.shape();
    let dim = region.dim();
    let mut base = [0i64; 2];
    let mut frac = [0.0; 2];
    for j in 0..dim {
        let t = (u[j] - bb.lo[j]) / d[j] - 0.5;
        let f = t.floor();
        base[j] = f as i64;
        frac[j] = t - f;
    }
    let get = |ix: i64, iy: i64| -> f64 {
        if ix < 0 || iy < 0 || ix >= shape[0] as i64 || iy >= shape[1] as i64 {
            0.0
        } else {
            v[ix as usize * shape[1] + iy as usize]
        }
    };
    if dim == 1 {
        (1.0 - frac[0]) * get(base[0], 0) + frac[0] * get(base[0] + 1, 0)
    } else {
        let (fx, fy) = (frac[0], frac[1]);
        let (x0, y0) = (base[0], base[1]);
        (1.0 - fx) * ((1.0 - fy) * get(x0, y0) + fy * get(x0, y0 + 1))
            + fx * ((1.0 - fy) * get(x0 + 1, y0) + fy * get(x0 + 1, y0 + 1))
    }
}

/// `⟨I[g], I[h]⟩/δ̄` for node vectors `g, h`: the tent basis functions have
/// overlaps `2/3` with themselves and `1/6` with each neighbour per axis.
fn tent_inner_product(region: &Region, g: &[f64], h: &[f64]) -> f64 {
    let shape = region.shape();
    let dim = region.dim();
    let w = [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0];
    let mut total = 0.0;
    for ix in 0..shape[0] {
        for iy in 0..shape[1] {
            let a = g[ix * shape[1] + iy];
            if a == 0.0 {
                continue;
            }
            let mut acc = 0.0;
            for (ox, wx) in w.iter().enumerate() {
                let jx = ix as i64 + ox as i64 - 1;
                if jx < 0 || jx >= shape[0] as i64 {
                    continue;
                }
                if dim == 1 {
                    acc += wx * h[jx as usize];
                    continue;
                }
                for (oy, wy) in w.iter().enumerate() {
                    let jy = iy as i64 + oy as i64 - 1;
                    if jy < 0 || jy >= shape[1] as i64 {
                        continue;
                    }
                    acc += wx * wy * h[jx as usize * shape[1] + jy as usize];
                }
            }
            total += a * acc;
        }
    }
    total
}

/// `max_{v ∈ {0,1}^d, z} |g(z + v) − g(z)|` over the zero-padded lattice.
fn max_neighbour_difference(region: &Region, g: &[f64]) -> f64 {
    let shape = region.shape();
    let dim = region.dim();
    let get = |ix: i64, iy: i64| -> f64 {
        if ix < 0 || iy < 0 || ix >= shape[0] as i64 || iy >= shape[1] as i64 {
            0.0
        } else {
            g[ix as usize * shape[1] + iy as usize]
        }
    };
    let offsets: &[(i64, i64)] = if dim == 1 { &[(1, 0)] } else { &[(1, 0), (0, 1), (1, 1)] };
    let ylo = if dim == 1 { 0 } else { -1 };
    let mut best: f64 = 0.0;
    for ix in -1..shape[0] as i64 {
        for iy in ylo..shape[1] as i64 {
            let a = get(ix, iy);
            for &(ox, oy) in offsets {
                best = best.max((get(ix + ox, iy + oy) - a).abs());
            }
        }
    }
    best
}

/// Bound on `|⟨I[h_i], I[h_j]⟩ − ⟨v_i, v_j⟩|` from neighbour differences:
/// `‖v_i‖₁ max|Δv_j| + ‖v_j‖₁ max|Δv_i|`.
pub fn interpolation_error_bound(family: &TaperFamily) -> DMatrix<f64> {
    let m = family.len();
    let l1: Vec<f64> = family.values.iter().map(|v| v.iter().map(|x| x.abs()).sum()).collect();
    let dmax: Vec<f64> = family.values.iter().map(|v| max_neighbour_difference(&family.region, v)).collect();
    DMatrix::from_fn(m, m, |i, j| l1[i] * dmax[j] + l1[j] * dmax[i])
}

/// Grid nodes inside a region, embedded in their bounding lattice box.
#[derive(Debug, Clone)]
pub struct GridNodes {
    pub scheme: SamplingScheme,
    pub points: Vec<Point>,
    /// Lattice box spanning the nodes.
    pub lattice: Lattice,
    /// Position of each node in the lattice box.
    pub positions: Vec<usize>,
    /// Integer grid coordinates `z` of each node, `u = s + z∘Δ`.
    pub index: Vec<[i64; 2]>,
}

impl GridNodes {
    pub fn new(scheme: &SamplingScheme, region: &Region) -> Result<Self> {
        let SamplingScheme::Grid { dim, spacing, offset } = *scheme else {
            return Err(invalid("sampling a taper needs a grid scheme"));
        };
        let nodes = scheme.nodes(region)?;
        if nodes.is_empty() {
            return Err(Error::NoGridNodes);
        }
        let mut zmin = [i64::MAX; 2];
        let mut zmax = [i64::MIN; 2];
        for (_, z) in &nodes {
            for j in 0..2 {
                zmin[j] = zmin[j].min(z[j]);
                zmax[j] = zmax[j].max(z[j]);
            }
        }
        let n = [(zmax[0] - zmin[0] + 1) as usize, (zmax[1] - zmin[1] + 1) as usize];
        let mut origin = [offset[0] + zmin[0] as f64 * spacing[0], 0.0];
        if dim == 2 {
            origin[1] = offset[1] + zmin[1] as f64 * spacing[1];
        }
        let lattice = Lattice { dim, origin, spacing, n };
        let positions = nodes
            .iter()
            .map(|(_, z)| (z[0] - zmin[0]) as usize * n[1] + (z[1] - zmin[1]) as usize)
            .collect();
        let index = nodes.iter().map(|(_, z)| *z).collect();
        let points = nodes.into_iter().map(|(u, _)| u).collect();
        Ok(Self { scheme: *scheme, points, lattice, positions, index })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Spreads node values over the lattice box.
    pub fn embed(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.lattice.len()];
        for (&p, &v) in self.positions.iter().zip(values) {
            out[p] = v;
        }
        out
    }
}

/// A base taper evaluated on grid nodes, with the `∏Δ_j` quadrature weight.
#[derive(Debug, Clone)]
pub struct SampledTaper {
    /// Base taper index.
    pub index: usize,
    pub nodes: GridNodes,
    pub weights: Vec<f64>,
}

impl SampledTaper {
    pub fn scheme(&self) -> &SamplingScheme {
        &self.nodes.scheme
    }

    pub fn scale(&self) -> f64 {
        self.nodes.scheme.cell_volume()
    }

    /// `H^G(k) = ∏Δ_j Σ_u h(u) e^{−2πi u·k}`.
    pub fn transfer_function(&self, kgrid: &WavenumberGrid) -> Result<TransferFunction> {
        let v = self.nodes.embed(&self.weights);
        let mut out = lattice_dft(&self.nodes.lattice, &[&v], kgrid, DftMethod::Auto)?.remove(0);
        let s = self.scale();
        out.iter_mut().for_each(|z| *z *= s);
        Ok(TransferFunction { grid: kgrid.clone(), values: out })
    }
}

/// Transfer function tabulated on a wavenumber grid.
#[derive(Debug, Clone)]
pub struct TransferFunction {
    pub grid: WavenumberGrid,
    pub values: Vec<Complex64>,
}

/// Fraction of `∫|H|²` inside the ball of radius `b`, by midpoint
/// quadrature with cells weighted by the fraction of their area inside.
///
/// The grid must be regular, reach radius `3b` and have step at most `b/16`.
pub fn concentration(tf: &TransferFunction, b: f64) -> Result<f64> {
    let WavenumberGrid::Regular { dim, step, len, .. } = tf.grid else {
        return Err(invalid("concentration needs a regular wavenumber grid"));
    };
    let res = step[..dim].iter().copied().fold(0.0, f64::max);
    let mut reach = f64::INFINITY;
    for j in 0..dim {
        let ax = tf.grid.axis(j).unwrap();
        reach = reach.min(-ax[0]).min(ax[len[j] - 1]);
    }
    if res > b / 16.0 * (1.0 + 1e-12) || reach < 3.0 * b * (1.0 - 1e-12) {
        return Err(Error::InsufficientCoverage { needed: 3.0 * b, resolution: b / 16.0 });
    }
    const SUB: usize = 8;
    let cell: f64 = step[..dim].iter().product();
    let mut total = 0.0;
    for i in 0..tf.grid.len() {
        let k = tf.grid.point(i);
        let p = tf.values[i].norm_sqr();
        if p == 0.0 {
            continue;
        }
        let frac = if dim == 1 {
            let lo = k[0].abs() - 0.5 * step[0];
            let hi = k[0].abs() + 0.5 * step[0];
            ((b - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            let rmin = (k[0].abs() - 0.5 * step[0]).max(0.0).hypot((k[1].abs() - 0.5 * step[1]).max(0.0));
            let rmax = (k[0].abs() + 0.5 * step[0]).hypot(k[1].abs() + 0.5 * step[1]);
            if rmax <= b {
                1.0
            } else if rmin >= b {
                0.0
            } else {
                let mut inside = 0;
                for a in 0..SUB {
                    for c in 0..SUB {
                        let x = k[0] + ((a as f64 + 0.5) / SUB as f64 - 0.5) * step[0];
                        let y = k[1] + ((c as f64 + 0.5) / SUB as f64 - 0.5) * step[1];
                        if x.hypot(y) <= b {
                            inside += 1;
                        }
                    }
                }
                inside as f64 / (SUB * SUB) as f64
            }
        };
        total += frac * p;
    }
    Ok(total * cell)
}

/// How node weights spread into a function of space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spread {
    /// Multilinear interpolation between cell centres.
    Tent,
    /// Constant over each reference cell.
    Cell,
    /// Point masses at the nodes (grid sampling).
    Dirac,
}

/// A real weight function on a lattice, `w(x) = scale · Σ_c a_c φ_c(x)`,
/// with `φ_c` a tent, cell indicator or Dirac mass at node `c`.
///
/// Tapers, sampled tapers and the weights of intensity estimators are all of
/// this form, which gives their Fourier transforms in closed form.
#[derive(Debug, Clone)]
pub struct WeightFunction {
    pub lattice: Lattice,
    pub weights: Vec<f64>,
    pub scale: f64,
    /// Divides `scale`; kept apart so normalised weights total exactly one.
    pub denominator: f64,
    pub spread: Spread,
    pub scheme: SamplingScheme,
}

impl WeightFunction {
    /// Continuous taper `m` of a family.
    pub fn taper(family: &TaperFamily, m: usize) -> Self {
        Self {
            lattice: family.lattice(),
            weights: family.values[m].clone(),
            scale: family.norm_scale(),
            denominator: 1.0,
            spread: Spread::Tent,
            scheme: SamplingScheme::Continuous,
        }
    }

    /// A sampled taper, including its `∏Δ_j` factor.
    pub fn sampled(t: &SampledTaper) -> Self {
        Self {
            lattice: t.nodes.lattice,
            weights: t.nodes.embed(&t.weights),
            scale: t.scale(),
            denominator: 1.0,
            spread: Spread::Dirac,
            scheme: t.nodes.scheme,
        }
    }

    /// `1_R/ℓ(R)`, the weights of the count-over-area intensity estimate.
    pub fn region_mean(region: &Region) -> Self {
        let bb = region.bbox();
        let d = region.delta();
        let mut origin = [bb.lo[0] + 0.5 * d[0], 0.0];
        if region.dim() == 2 {
            origin[1] = bb.lo[1] + 0.5 * d[1];
        }
        Self {
            lattice: Lattice { dim: region.dim(), origin, spacing: d, n: region.shape() },
            weights: region.mask().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
            scale: 1.0,
            denominator: region.count() as f64 * region.cell_volume(),
            spread: Spread::Cell,
            scheme: SamplingScheme::Continuous,
        }
    }

    /// Equal weights on grid nodes, the node-average estimator.
    pub fn node_mean(nodes: &GridNodes) -> Self {
        Self {
            lattice: nodes.lattice,
            weights: nodes.embed(&vec![1.0; nodes.len()]),
            scale: 1.0,
            denominator: nodes.len() as f64,
            spread: Spread::Dirac,
            scheme: nodes.scheme,
        }
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim
    }

    /// Total weight `∫ w`, computed as a ratio so that equal weights give
    /// exactly one.
    pub fn total(&self) -> f64 {
        let sum: f64 = self.weights.iter().sum();
        match self.spread {
            Spread::Dirac => self.scale * sum / self.denominator,
            Spread::Tent | Spread::Cell => {
                let vol: f64 = self.lattice.spacing[..self.dim()].iter().product();
                self.scale * (sum * vol) / self.denominator
            }
        }
    }

    fn factor(&self) -> f64 {
        self.scale / self.denominator
    }

    /// `∫ w(x) e^{−2πi x·k} dx` on a wavenumber grid.
    pub fn transform(&self, kgrid: &WavenumberGrid) -> Result<Vec<Complex64>> {
        let mut v = lattice_dft(&self.lattice, &[&self.weights], kgrid, DftMethod::Auto)?.remove(0);
        let dim = self.dim();
        let d = self.lattice.spacing;
        let vol: f64 = d[..dim].iter().product();
        for (i, z) in v.iter_mut().enumerate() {
            let k = kgrid.point(i);
            let f = match self.spread {
                Spread::Dirac => self.factor(),
                Spread::Cell => self.factor() * vol * (0..dim).map(|j| sinc(PI * d[j] * k[j])).product::<f64>(),
                Spread::Tent => {
                    self.factor() * vol * (0..dim).map(|j| sinc(PI * d[j] * k[j]).powi(2)).product::<f64>()
                }
            };
            *z *= f;
        }
        Ok(v)
    }

    /// Pointwise value, `None` for Dirac combs.
    pub fn value(&self, x: &Point) -> Option<f64> {
        let lat = &self.lattice;
        let dim = self.dim();
        let get = |ix: i64, iy: i64| -> f64 {
            if ix < 0 || iy < 0 || ix >= lat.n[0] as i64 || iy >= lat.n[1] as i64 {
                0.0
            } else {
                self.weights[ix as usize * lat.n[1] + iy as usize]
            }
        };
        let mut t = [0.0; 2];
        for j in 0..dim {
            t[j] = (x[j] - lat.origin[j]) / lat.spacing[j];
        }
        match self.spread {
            Spread::Dirac => None,
            Spread::Cell => {
                let ix = (t[0] + 0.5).floor() as i64;
                let iy = if dim == 2 { (t[1] + 0.5).floor() as i64 } else { 0 };
                Some(self.factor() * get(ix, iy))
            }
            Spread::Tent => {
                let (x0, fx) = (t[0].floor() as i64, t[0] - t[0].floor());
                if dim == 1 {
                    return Some(self.factor() * ((1.0 - fx) * get(x0, 0) + fx * get(x0 + 1, 0)));
                }
                let (y0, fy) = (t[1].floor() as i64, t[1] - t[1].floor());
                let v = (1.0 - fx) * ((1.0 - fy) * get(x0, y0) + fy * get(x0, y0 + 1))
                    + fx * ((1.0 - fy) * get(x0 + 1, y0) + fy * get(x0 + 1, y0 + 1));
                Some(self.factor() * v)
            }
        }
    }

    /// Extent of the support along each axis.
    pub fn extent(&self) -> Point {
        let mut e = [0.0; 2];
        for j in 0..self.dim() {
            e[j] = (self.lattice.n[j] as f64 + 1.0) * self.lattice.spacing[j];
        }
        e
    }

    /// `∫ w_a(x) w_b(x) e^{−2πi x·dk} dx`, when at most one side is a Dirac
    /// comb. Continuous pairs are integrated by 3-point Gauss–Legendre on
    /// half-cells of the finer lattice, which is exact for the piecewise
    /// polynomial parts.
    pub fn overlap(&self, other: &WeightFunction, dk: &Point) -> Option<Complex64> {
        let dim = self.dim();
        let phase = |x: &Point| -> Complex64 {
            let dot: f64 = (0..dim).map(|j| x[j] * dk[j]).sum();
            Complex64::from_polar(1.0, -2.0 * PI * dot)
        };
        match (self.spread, other.spread) {
            (Spread::Dirac, Spread::Dirac) => None,
            (Spread::Dirac, _) | (_, Spread::Dirac) => {
                let (comb, smooth) = if self.spread == Spread::Dirac { (self, other) } else { (other, self) };
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, &w) in comb.weights.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let u = comb.lattice.node(i);
                    acc += phase(&u) * (comb.factor() * w * smooth.value(&u).unwrap());
                }
                Some(acc)
            }
            _ => {
                let h = [
                    0.5 * self.lattice.spacing[0].min(other.lattice.spacing[0]),
                    0.5 * self.lattice.spacing[1].min(other.lattice.spacing[1]),
                ];
                let mut lo = [0.0; 2];
                let mut hi = [0.0; 2];
                for j in 0..dim {
                    lo[j] = (self.lattice.origin[j] - self.lattice.spacing[j])
                        .min(other.lattice.origin[j] - other.lattice.spacing[j]);
                    hi[j] = (self.lattice.origin[j] + self.lattice.n[j] as f64 * self.lattice.spacing[j])
                        .max(other.lattice.origin[j] + other.lattice.n[j] as f64 * other.lattice.spacing[j]);
                }
                let g = [(-(0.6f64).sqrt(), 5.0 / 9.0), (0.0, 8.0 / 9.0), ((0.6f64).sqrt(), 5.0 / 9.0)];
                let steps = |j: usize| -> usize { ((hi[j] - lo[j]) / h[j]).ceil() as usize };
                let (n0, n1) = (steps(0), if dim == 2 { steps(1) } else { 1 });
                let rows: Vec<Complex64> = (0..n0)
                    .into_par_iter()
                    .map(|a| {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for c in 0..n1 {
                            for &(gx, wx) in &g {
                                let x = lo[0] + (a as f64 + 0.5 + 0.5 * gx) * h[0];
                                if dim == 1 {
                                    let p = [x, 0.0];
                                    let v = self.value(&p).unwrap() * other.value(&p).unwrap();
                                    acc += phase(&p) * (v * wx * 0.5 * h[0]);
                                    continue;
                                }
                                for &(gy, wy) in &g {
                                    let p = [x, lo[1] + (c as f64 + 0.5 + 0.5 * gy) * h[1]];
                                    let v = self.value(&p).unwrap() * other.value(&p).unwrap();
                                    if v != 0.0 {
                                        acc += phase(&p) * (v * wx * wy * 0.25 * h[0] * h[1]);
                                    }
                                }
                            }
                        }
                        acc
                    })
                    .collect();
                Some(rows.into_iter().sum())
            }
        }
    }
}
