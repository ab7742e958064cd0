//! Periodograms, multitaper spectral matrices, coherence and group delay,
//! and quadrature oracles for their expectations.
//!
//! The oracles integrate products of transfer functions against a
//! [`Spectrum`]. When both weight functions live on grids sharing an alias
//! period the integrand is periodic and the integral is taken over one period
//! cell against the aliased spectrum. Otherwise it is taken over a box around
//! the transfer-function peaks.

use crate::dft::DftMethod;
use crate::error::{invalid, Error, Result};
use crate::fourier::{intensity_estimate, tapered_dft_field, tapered_dft_points, Process, SpatialDataset, TaperedDft};
use crate::geometry::{alias_intersection, lattice_points, AliasStructure, WavenumberGrid};
use crate::tapers::{TaperFamily, TransferFunction, WeightFunction};
use crate::{Complex64, Point};
use nalgebra::DMatrix;
use rayon::prelude::*;
use std::collections::VecDeque;
use std::f64::consts::PI;

/// A (cross-)spectral density.
pub trait Spectrum: Sync {
    /// Density of the decaying part at `k`.
    fn density(&self, k: &Point) -> Complex64;

    /// Level of a flat part, such as the atom `λ` of a point process.
    ///
    /// A flat part has no aliases: on grid–grid pairs it is taken as the
    /// level of the aliased spectrum itself.
    fn white(&self) -> f64 {
        0.0
    }
}

/// A [`Spectrum`] from a closure plus a flat level.
pub struct FnSpectrum<F> {
    f: F,
    white: f64,
}

impl<F: Fn(&Point) -> Complex64 + Sync> FnSpectrum<F> {
    pub fn new(f: F) -> Self {
        Self { f, white: 0.0 }
    }

    pub fn with_white(f: F, white: f64) -> Self {
        Self { f, white }
    }
}

impl<F: Fn(&Point) -> Complex64 + Sync> Spectrum for FnSpectrum<F> {
    fn density(&self, k: &Point) -> Complex64 {
        (self.f)(k)
    }

    fn white(&self) -> f64 {
        self.white
    }
}

/// A purely flat spectrum.
pub fn white_spectrum(level: f64) -> FnSpectrum<impl Fn(&Point) -> Complex64 + Sync> {
    FnSpectrum::with_white(|_: &Point| Complex64::new(0.0, 0.0), level)
}

/// `I(k) = J^p(k) conj(J^q(k))`.
pub fn periodogram(jp: &TaperedDft, jq: &TaperedDft, allow_mixed: bool) -> Result<Vec<Complex64>> {
    if jp.grid != jq.grid || jp.values.len() != jq.values.len() {
        return Err(Error::GridMismatch);
    }
    if jp.taper_index != jq.taper_index && !allow_mixed {
        return Err(Error::TaperIndexMismatch { left: jp.taper_index, right: jq.taper_index });
    }
    Ok(jp.values.iter().zip(&jq.values).map(|(a, b)| a * b.conj()).collect())
}

#[derive(Debug, Clone, Default)]
pub struct EstimateConfig {
    /// Per-process intensity overrides; `None` uses the estimate.
    pub lambda: Vec<Option<f64>>,
    pub method: DftMethod,
    /// Per-process shift of the base taper index, taken modulo `M`.
    /// Nonzero shifts need `allow_mixed_tapers`.
    pub taper_offsets: Vec<usize>,
    pub allow_mixed_tapers: bool,
}

/// Tapered transforms of every process with every taper.
#[derive(Debug, Clone)]
pub struct TaperedTransforms {
    pub kgrid: WavenumberGrid,
    /// Indexed `[process][slot]`.
    pub dfts: Vec<Vec<TaperedDft>>,
    pub lambda_hat: Vec<f64>,
}

pub fn tapered_transforms(
    data: &SpatialDataset,
    family: &TaperFamily,
    kgrid: &WavenumberGrid,
    cfg: &EstimateConfig,
) -> Result<TaperedTransforms> {
    if family.is_empty() {
        return Err(Error::NoTapers);
    }
    if kgrid.dim() != data.region.dim() {
        return Err(invalid("wavenumber grid dimension differs from the region"));
    }
    let m = family.len();
    let mut transfer = None;
    let mut dfts = Vec::with_capacity(data.len());
    let mut lambda_hat = Vec::with_capacity(data.len());
    for (p, process) in data.processes.iter().enumerate() {
        let lam = match cfg.lambda.get(p).copied().flatten() {
            Some(l) => l,
            None => intensity_estimate(process, &data.region)?,
        };
        let mut j = match process {
            Process::Points(pattern) => {
                if transfer.is_none() && lam != 0.0 {
                    transfer = Some(family.transfer_functions_with(kgrid, cfg.method)?);
                }
                tapered_dft_points(pattern, family, kgrid, lam, transfer.as_deref(), cfg.method)?
            }
            Process::Field(field) => {
                let sampled = family.sample_all(field.scheme())?;
                tapered_dft_field(field, &sampled, kgrid, lam, cfg.method)?
            }
        };
        let offset = cfg.taper_offsets.get(p).copied().unwrap_or(0) % m;
        if offset != 0 && !cfg.allow_mixed_tapers {
            return Err(Error::TaperIndexMismatch { left: 0, right: offset });
        }
        j.rotate_left(offset);
        j.iter_mut().for_each(|t| t.process_index = p);
        dfts.push(j);
        lambda_hat.push(lam);
    }
    Ok(TaperedTransforms { kgrid: kgrid.clone(), dfts, lambda_hat })
}

/// Multitaper spectral matrix on a wavenumber grid.
#[derive(Debug, Clone)]
pub struct SpectralEstimate {
    pub kgrid: WavenumberGrid,
    /// Number of processes.
    pub p: usize,
    /// Number of tapers averaged.
    pub m: usize,
    /// Row-major `p × p` block per wavenumber.
    pub fhat: Vec<Complex64>,
    pub labels: Vec<String>,
    pub lambda_hat: Vec<f64>,
    pub bandwidth: f64,
}

impl SpectralEstimate {
    pub fn len(&self) -> usize {
        self.kgrid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize, p: usize, q: usize) -> Complex64 {
        self.fhat[i * self.p * self.p + p * self.p + q]
    }

    pub fn matrix(&self, i: usize) -> DMatrix<Complex64> {
        let n = self.p;
        DMatrix::from_fn(n, n, |r, c| self.get(i, r, c))
    }

    /// Largest `|f^{pq} − conj(f^{qp})|` over all wavenumbers.
    pub fn hermitian_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            for a in 0..self.p {
                for b in a..self.p {
                    worst = worst.max((self.get(i, a, b) - self.get(i, b, a).conj()).norm());
                }
            }
        }
        worst
    }

    /// Smallest `λ_min / trace` over wavenumbers with positive trace.
    pub fn min_eigen_ratio(&self) -> f64 {
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                let m = self.matrix(i);
                let tr: f64 = (0..self.p).map(|a| m[(a, a)].re).sum();
                if tr <= 0.0 {
                    return 0.0;
                }
                let eig = nalgebra::SymmetricEigen::new(m);
                eig.eigenvalues.min() / tr
            })
            .reduce(|| f64::INFINITY, f64::min)
    }

    /// Largest `|f(−k) − conj(f(k))|`, or `None` if the grid is not symmetric.
    pub fn conjugate_symmetry_error(&self) -> Option<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            let n = self.kgrid.negation_index(i)?;
            for a in 0..self.p {
                for b in 0..self.p {
                    worst = worst.max((self.get(n, a, b) - self.get(i, a, b).conj()).norm());
                }
            }
        }
        Some(worst)
    }
}

/// Averages the periodogram matrices over the first `m` taper slots.
pub fn estimate_from_transforms(
    t: &TaperedTransforms,
    m: usize,
    labels: Vec<String>,
    bandwidth: f64,
    allow_mixed: bool,
) -> Result<SpectralEstimate> {
    let p = t.dfts.len();
    if p == 0 {
        return Err(invalid("no processes"));
    }
    if m == 0 || t.dfts.iter().any(|d| d.len() < m) {
        return Err(Error::NoTapers);
    }
    for d in &t.dfts {
        for j in &d[..m] {
            if j.grid != t.kgrid {
                return Err(Error::GridMismatch);
            }
        }
    }
    if !allow_mixed {
        for s in 0..m {
            let base = t.dfts[0][s].taper_index;
            for d in &t.dfts[1..] {
                if d[s].taper_index != base {
                    return Err(Error::TaperIndexMismatch { left: base, right: d[s].taper_index });
                }
            }
        }
    }
    let nk = t.kgrid.len();
    let mut fhat = vec![Complex64::new(0.0, 0.0); nk * p * p];
    let inv = 1.0 / m as f64;
    fhat.par_chunks_mut(p * p).enumerate().for_each(|(i, block)| {
        for a in 0..p {
            for b in a..p {
                let mut acc = Complex64::new(0.0, 0.0);
                for s in 0..m {
                    acc += t.dfts[a][s].values[i] * t.dfts[b][s].values[i].conj();
                }
                acc *= inv;
                if a == b {
                    acc.im = 0.0;
                }
                block[a * p + b] = acc;
                block[b * p + a] = acc.conj();
            }
        }
    });
    Ok(SpectralEstimate {
        kgrid: t.kgrid.clone(),
        p,
        m,
        fhat,
        labels,
        lambda_hat: t.lambda_hat.clone(),
        bandwidth,
    })
}

/// `f̂(k) = (1/M) Σ_m J_m(k) J_m(k)^H` with `J_m` stacking all processes.
pub fn multitaper_estimate(
    data: &SpatialDataset,
    family: &TaperFamily,
    kgrid: &WavenumberGrid,
    cfg: &EstimateConfig,
) -> Result<SpectralEstimate> {
    let t = tapered_transforms(data, family, kgrid, cfg)?;
    estimate_from_transforms(&t, family.len(), data.labels.clone(), family.bandwidth(), cfg.allow_mixed_tapers)
}

/// Coherence `r` and group delay `θ` per wavenumber and pair.
///
/// Entries whose marginals fall at or below the floor are NaN.
#[derive(Debug, Clone)]
pub struct CoherenceField {
    pub kgrid: WavenumberGrid,
    pub p: usize,
    pub r: Vec<f64>,
    /// In `(−π, π]`.
    pub theta: Vec<f64>,
}

impl CoherenceField {
    pub fn r(&self, i: usize, p: usize, q: usize) -> f64 {
        self.r[i * self.p * self.p + p * self.p + q]
    }

    pub fn theta(&self, i: usize, p: usize, q: usize) -> f64 {
        self.theta[i * self.p * self.p + p * self.p + q]
    }
}

/// Default floor: `1e-12` times the largest marginal estimate.
pub fn default_floor(est: &SpectralEstimate) -> f64 {
    let mut mx: f64 = 0.0;
    for i in 0..est.len() {
        for a in 0..est.p {
            mx = mx.max(est.get(i, a, a).re);
        }
    }
    1e-12 * mx
}

pub fn coherence_and_delay(est: &SpectralEstimate, floor: Option<f64>) -> CoherenceField {
    let floor = floor.unwrap_or_else(|| default_floor(est));
    let p = est.p;
    let mut r = vec![f64::NAN; est.fhat.len()];
    let mut theta = vec![f64::NAN; est.fhat.len()];
    for i in 0..est.len() {
        for a in 0..p {
            for b in 0..p {
                let (fa, fb) = (est.get(i, a, a).re, est.get(i, b, b).re);
                if fa.min(fb) <= floor {
                    continue;
                }
                let idx = i * p * p + a * p + b;
                if a == b {
                    r[idx] = 1.0;
                    theta[idx] = 0.0;
                    continue;
                }
                let f = est.get(i, a, b);
                r[idx] = (f.norm() / (fa * fb).sqrt()).min(1.0);
                let t = f.arg();
                theta[idx] = if t <= -PI { PI } else { t };
            }
        }
    }
    CoherenceField { kgrid: est.kgrid.clone(), p, r, theta }
}

/// Least-squares plane `θ(k) ≈ c + g·k` through unwrapped phases.
#[derive(Debug, Clone, Copy)]
pub struct PlaneFit {
    pub gradient: Point,
    pub intercept: f64,
    pub rms: f64,
    pub used: usize,
}

/// Unwraps `θ^{pq}` over `‖k‖ ≤ kmax` by breadth-first search from the
/// wavenumber nearest the origin and fits a plane. A shift `τ` between two
/// processes shows up as gradient `2πτ`.
pub fn fit_group_delay(coh: &CoherenceField, p: usize, q: usize, kmax: f64) -> Result<PlaneFit> {
    let WavenumberGrid::Regular { dim, len, .. } = coh.kgrid else {
        return Err(invalid("group delay fit needs a regular wavenumber grid"));
    };
    let nk = coh.kgrid.len();
    let norm = |k: &Point| if dim == 1 { k[0].abs() } else { k[0].hypot(k[1]) };
    let usable: Vec<bool> = (0..nk)
        .map(|i| norm(&coh.kgrid.point(i)) <= kmax && coh.theta(i, p, q).is_finite())
        .collect();
    let start = (0..nk)
        .filter(|&i| usable[i])
        .min_by(|&a, &b| norm(&coh.kgrid.point(a)).total_cmp(&norm(&coh.kgrid.point(b))))
        .ok_or_else(|| invalid("no usable wavenumbers for the group delay fit"))?;
    let mut unwrapped = vec![f64::NAN; nk];
    unwrapped[start] = coh.theta(start, p, q);
    let mut queue = VecDeque::from([start]);
    while let Some(i) = queue.pop_front() {
        let (i0, i1) = ((i / len[1]) as i64, (i % len[1]) as i64);
        for (d0, d1) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let (n0, n1) = (i0 + d0, i1 + d1);
            if n0 < 0 || n1 < 0 || n0 >= len[0] as i64 || n1 >= len[1] as i64 {
                continue;
            }
            let n = n0 as usize * len[1] + n1 as usize;
            if !usable[n] || unwrapped[n].is_finite() {
                continue;
            }
            let t = coh.theta(n, p, q);
            unwrapped[n] = t + 2.0 * PI * ((unwrapped[i] - t) / (2.0 * PI)).round();
            queue.push_back(n);
        }
    }
    let rows: Vec<usize> = (0..nk).filter(|&i| unwrapped[i].is_finite()).collect();
    let ncol = dim + 1;
    if rows.len() < ncol + 1 {
        return Err(invalid("too few connected wavenumbers for the group delay fit"));
    }
    let a = DMatrix::from_fn(rows.len(), ncol, |r, c| if c == 0 { 1.0 } else { coh.kgrid.point(rows[r])[c - 1] });
    let y = nalgebra::DVector::from_iterator(rows.len(), rows.iter().map(|&i| unwrapped[i]));
    let sol = a
        .clone()
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| invalid(format!("plane fit failed: {e}")))?;
    let resid = &a * &sol - &y;
    let mut gradient = [0.0; 2];
    gradient[..dim].copy_from_slice(&sol.as_slice()[1..]);
    Ok(PlaneFit {
        gradient,
        intercept: sol[0],
        rms: (resid.norm_squared() / rows.len() as f64).sqrt(),
        used: rows.len(),
    })
}

/// Relative size of the last shell at which a truncated alias sum is accepted.
pub const ALIAS_TAIL_TOLERANCE: f64 = 1e-6;

/// `f̃(k) = Σ_{ψ ∈ Ψ^p ∩ Ψ^q, ‖ψ‖∞ ≤ radius} f(k+ψ) conj(w^p(ψ)) w^q(ψ)`,
/// plus the flat level.
///
/// Fails when the outermost shell holds more than [`ALIAS_TAIL_TOLERANCE`] of
/// the absolute sum.
pub fn aliased_spectrum(
    f: &dyn Spectrum,
    alias_p: &AliasStructure,
    alias_q: &AliasStructure,
    k: &Point,
    radius: f64,
) -> Result<Complex64> {
    let common = alias_p.intersect(alias_q);
    let dim = alias_p.dim;
    let gmax = common.generators[..dim].iter().copied().fold(0.0, f64::max);
    let mut sum = Complex64::new(0.0, 0.0);
    let (mut mag, mut tail) = (0.0, 0.0);
    for z in lattice_points(&common.generators, dim, radius) {
        let psi = common.point(z);
        let kp = [k[0] + psi[0], k[1] + psi[1]];
        let v = f.density(&kp);
        sum += v * alias_p.phase(&psi).conj() * alias_q.phase(&psi);
        mag += v.norm();
        let r = psi[..dim].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if gmax > 0.0 && r > radius - gmax {
            tail += v.norm();
        }
    }
    if gmax > 0.0 && tail > ALIAS_TAIL_TOLERANCE * mag {
        return Err(Error::NonDecayingTail { shell: tail / mag });
    }
    Ok(sum + f.white())
}

/// Alias sum grown shell by shell in integer coordinates until a shell adds
/// at most `tol` of the absolute sum. Dimensions with a zero generator stay
/// at the origin.
fn aliased_density(
    f: &dyn Spectrum,
    common: &AliasStructure,
    alias_p: &AliasStructure,
    alias_q: &AliasStructure,
    k: &Point,
    tol: f64,
    max_shells: usize,
) -> Result<Complex64> {
    let dim = common.dim;
    let active = [common.generators[0] > 0.0, dim == 2 && common.generators[1] > 0.0];
    let mut sum = f.density(k);
    let mut mag = sum.norm();
    if !active[0] && !active[1] {
        return Ok(sum);
    }
    let mut last = 0.0;
    for s in 1..=max_shells as i64 {
        let (mut shell, mut smag) = (Complex64::new(0.0, 0.0), 0.0);
        let r0 = if active[0] { s } else { 0 };
        let r1 = if active[1] { s } else { 0 };
        for z0 in -r0..=r0 {
            for z1 in -r1..=r1 {
                if z0.abs() != s && z1.abs() != s {
                    continue;
                }
                let psi = common.point([z0, z1]);
                let v = f.density(&[k[0] + psi[0], k[1] + psi[1]]);
                shell += v * alias_p.phase(&psi).conj() * alias_q.phase(&psi);
                smag += v.norm();
            }
        }
        sum += shell;
        mag += smag;
        last = smag;
        if smag <= tol * mag {
            return Ok(sum);
        }
    }
    Err(Error::NonDecayingTail { shell: if mag > 0.0 { last / mag } else { 1.0 } })
}

/// Settings for the expectation quadratures.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    /// Taper bandwidth `b`.
    pub bandwidth: f64,
    /// Half-width added around the transfer-function peaks; default `4b`.
    pub extent: Option<f64>,
    /// Relative tolerance on the step-halving error estimate.
    pub tol: f64,
    /// Relative size of the last alias shell.
    pub alias_tol: f64,
    pub max_alias_shells: usize,
}

impl QuadratureOptions {
    pub fn new(bandwidth: f64) -> Self {
        Self { bandwidth, extent: None, tol: 1e-4, alias_tol: 1e-7, max_alias_shells: 400 }
    }
}

/// An integral with its step-halving error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: Complex64,
    pub error: f64,
}

/// `∫ A(k_a − k′) conj(B(k_b − k′)) f(k′) dk′` with `A`, `B` the transforms
/// of two weight functions.
///
/// Grid–grid pairs are integrated over one period of their common alias
/// lattice against the aliased spectrum; all other pairs over a box around
/// both peaks, with the flat part of `f` handled exactly by the spatial
/// overlap of the two weights.
pub fn cross_integral(
    f: &dyn Spectrum,
    a: &WeightFunction,
    ka: &Point,
    b: &WeightFunction,
    kb: &Point,
    opts: &QuadratureOptions,
) -> Result<Quadrature> {
    let dim = a.dim();
    if b.dim() != dim {
        return Err(invalid("weight functions differ in dimension"));
    }
    if !(opts.bandwidth > 0.0) {
        return Err(invalid("quadrature bandwidth must be positive"));
    }
    let (ea, eb) = (a.extent(), b.extent());
    let span = [ea[0].max(eb[0]), ea[1].max(eb[1])];
    let periodic = a.scheme.is_grid() && b.scheme.is_grid();
    let (fine, coarse) = if periodic {
        let common = alias_intersection(&a.scheme, &b.scheme, dim);
        if common.generators[..dim].contains(&0.0) {
            return Err(invalid("grid pair has no common alias period"));
        }
        let mut nc = [1usize; 2];
        for j in 0..dim {
            let g = common.generators[j];
            let need = (4.0 * g * span[j]).max(g / (opts.bandwidth / 4.0));
            nc[j] = 2 * (need / 2.0).ceil() as usize + 1;
        }
        let nf = [2 * nc[0] + 1, if dim == 2 { 2 * nc[1] + 1 } else { 1 }];
        let cell = |n: [usize; 2]| -> Result<WavenumberGrid> {
            let mut step = [1.0; 2];
            for j in 0..dim {
                step[j] = common.generators[j] / n[j] as f64;
            }
            WavenumberGrid::regular(dim, [0.0; 2], step, n)
        };
        (cell(nf)?, cell(nc)?)
    } else {
        let ext = opts.extent.unwrap_or(4.0 * opts.bandwidth);
        let mut center = [0.0; 2];
        let (mut nf, mut nc, mut hf, mut hc) = ([1usize; 2], [1usize; 2], [1.0; 2], [1.0; 2]);
        for j in 0..dim {
            center[j] = 0.5 * (ka[j] + kb[j]);
            let half = 0.5 * (ka[j] - kb[j]).abs() + ext;
            hf[j] = (opts.bandwidth / 8.0).min(1.0 / (8.0 * span[j]));
            hc[j] = 2.0 * hf[j];
            nc[j] = 2 * (half / hc[j]).ceil() as usize + 1;
            nf[j] = 2 * nc[j] - 1;
        }
        (WavenumberGrid::regular(dim, center, hf, nf)?, WavenumberGrid::regular(dim, center, hc, nc)?)
    };
    let white = f.white();
    let exact_white = if periodic || white == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        let dk = [ka[0] - kb[0], ka[1] - kb[1]];
        let o = a
            .overlap(b, &dk)
            .ok_or_else(|| invalid("flat spectrum part needs at least one non-comb weight"))?;
        o * white
    };
    let (vf, sf) = integrate_on(f, a, ka, b, kb, &fine, periodic, opts)?;
    let (vc, _) = integrate_on(f, a, ka, b, kb, &coarse, periodic, opts)?;
    let error = (vf - vc).norm();
    let scale = sf + exact_white.norm();
    if error > opts.tol * scale {
        return Err(Error::QuadratureTooCoarse { estimate: error / scale, tolerance: opts.tol });
    }
    Ok(Quadrature { value: vf + exact_white, error })
}

/// Midpoint sum of the integrand on `grid`, with the absolute integral used
/// to scale the error.
#[allow(clippy::too_many_arguments)]
fn integrate_on(
    f: &dyn Spectrum,
    a: &WeightFunction,
    ka: &Point,
    b: &WeightFunction,
    kb: &Point,
    grid: &WavenumberGrid,
    periodic: bool,
    opts: &QuadratureOptions,
) -> Result<(Complex64, f64)> {
    let WavenumberGrid::Regular { dim, center, step, len } = *grid else {
        unreachable!("quadrature grids are regular")
    };
    let shifted = |k: &Point| -> Result<WavenumberGrid> {
        WavenumberGrid::regular(dim, [k[0] - center[0], k[1] - center[1]], step, len)
    };
    let ta = a.transform(&shifted(ka)?)?;
    let tb = b.transform(&shifted(kb)?)?;
    let n = grid.len();
    let rev = |i: usize| (len[0] - 1 - i / len[1]) * len[1] + (len[1] - 1 - i % len[1]);
    let white = f.white();
    let (ap, aq) = (AliasStructure::of(&a.scheme, dim), AliasStructure::of(&b.scheme, dim));
    let common = ap.intersect(&aq);
    let dens: Vec<Complex64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let k = grid.point(i);
            if periodic {
                aliased_density(f, &common, &ap, &aq, &k, opts.alias_tol, opts.max_alias_shells)
                    .map(|v| v + white)
            } else {
                Ok(f.density(&k))
            }
        })
        .collect::<Result<_>>()?;
    let cell: f64 = step[..dim].iter().product();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut mag = 0.0;
    for i in 0..n {
        let w = ta[rev(i)] * tb[rev(i)].conj();
        acc += w * dens[i];
        mag += w.norm() * dens[i].norm();
    }
    Ok((acc * cell, mag * cell))
}

/// `E[I^{pq}(k)] = ∫ H^p(k−k′) conj(H^q(k−k′)) f(k′) dk′` for a known mean.
pub fn expected_periodogram(
    f: &dyn Spectrum,
    hp: &WeightFunction,
    hq: &WeightFunction,
    k: &Point,
    opts: &QuadratureOptions,
) -> Result<Quadrature> {
    cross_integral(f, hp, k, hq, k, opts)
}

/// The five terms of the periodogram expectation when the intensities are
/// replaced by linear estimates `λ̂ = ∫ g dN` with transfer functions `G`.
#[derive(Debug, Clone, Copy)]
pub struct MeanBiasTerms {
    /// Known-mean expectation.
    pub oracle: Complex64,
    /// `−conj(H^q(k)) ∫ H^p(k−k′) conj(G^q(−k′)) f(k′) dk′`.
    pub cross_p: Complex64,
    /// `−H^p(k) ∫ G^p(−k′) conj(H^q(k−k′)) f(k′) dk′`.
    pub cross_q: Complex64,
    /// `H^p(k) conj(H^q(k)) ∫ G^p(−k′) conj(G^q(−k′)) f(k′) dk′`.
    pub mean_variance: Complex64,
    /// `H^p(k) conj(H^q(k)) λ^p λ^q (1 − G^p(0))(1 − G^q(0))`.
    pub mean_bias: Complex64,
    /// Sum of the quadrature error estimates.
    pub error: f64,
}

impl MeanBiasTerms {
    pub fn correction(&self) -> Complex64 {
        self.cross_p + self.cross_q + self.mean_variance + self.mean_bias
    }

    pub fn total(&self) -> Complex64 {
        self.oracle + self.correction()
    }
}

#[allow(clippy::too_many_arguments)]
pub fn unknown_mean_bias(
    f: &dyn Spectrum,
    hp: &WeightFunction,
    hq: &WeightFunction,
    gp: &WeightFunction,
    gq: &WeightFunction,
    k: &Point,
    lambda: [f64; 2],
    opts: &QuadratureOptions,
) -> Result<MeanBiasTerms> {
    let dim = hp.dim();
    let at = WavenumberGrid::scattered(dim, vec![*k])?;
    let hpk = hp.transform(&at)?[0];
    let hqk = hq.transform(&at)?[0];
    let zero = [0.0; 2];
    let oracle = cross_integral(f, hp, k, hq, k, opts)?;
    let ip = cross_integral(f, hp, k, gq, &zero, opts)?;
    let iq = cross_integral(f, gp, &zero, hq, k, opts)?;
    let ig = cross_integral(f, gp, &zero, gq, &zero, opts)?;
    let hh = hpk * hqk.conj();
    Ok(MeanBiasTerms {
        oracle: oracle.value,
        cross_p: -hqk.conj() * ip.value,
        cross_q: -hpk * iq.value,
        mean_variance: hh * ig.value,
        mean_bias: hh * (lambda[0] * lambda[1] * (1.0 - gp.total()) * (1.0 - gq.total())),
        error: oracle.error + hqk.norm() * ip.error + hpk.norm() * iq.error + hh.norm() * ig.error,
    })
}

/// `∫ |H(k)|² dk` over a tabulated transfer function by the midpoint rule.
pub fn transfer_energy(tf: &TransferFunction) -> Result<f64> {
    let WavenumberGrid::Regular { dim, step, .. } = tf.grid else {
        return Err(invalid("energy needs a regular wavenumber grid"));
    };
    let cell: f64 = step[..dim].iter().product();
    Ok(tf.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * cell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{GriddedField, PointPattern};
    use crate::geometry::{BBox, Region, SamplingScheme};
    use crate::linalg::Selection;
    use crate::tapers::{compute_tapers, GridNodes, TaperOptions};

    fn dft(values: Vec<Complex64>, m: usize) -> TaperedDft {
        let grid = WavenumberGrid::centered(1, [0.1, 0.0], [values.len(), 1]).unwrap();
        TaperedDft { grid, values, taper_index: m, process_index: 0, lambda_hat: 0.0 }
    }

    #[test]
    fn periodogram_examples() {
        let c = Complex64::new;
        let jp = dft(vec![c(1.0, 1.0)], 0);
        let jq = dft(vec![c(2.0, 0.0)], 0);
        assert_eq!(periodogram(&jp, &jq, false).unwrap()[0], c(2.0, 2.0));
        assert_eq!(periodogram(&jq, &jp, false).unwrap()[0], c(2.0, -2.0));
        let pp = periodogram(&jp, &jp, false).unwrap()[0];
        assert_eq!(pp, c(2.0, 0.0));
        let other = dft(vec![c(2.0, 0.0)], 1);
        assert!(matches!(periodogram(&jp, &other, false), Err(Error::TaperIndexMismatch { .. })));
        assert!(periodogram(&jp, &other, true).is_ok());
    }

    fn est_from(block: Vec<Complex64>, p: usize) -> SpectralEstimate {
        SpectralEstimate {
            kgrid: WavenumberGrid::scattered(1, vec![[0.0, 0.0]]).unwrap(),
            p,
            m: 1,
            fhat: block,
            labels: vec![],
            lambda_hat: vec![],
            bandwidth: 1.0,
        }
    }

    #[test]
    fn coherence_examples() {
        let c = Complex64::new;
        let e = est_from(vec![c(2.0, 0.0), c(2.0, 2.0), c(2.0, -2.0), c(8.0, 0.0)], 2);
        let h = coherence_and_delay(&e, None);
        assert!((h.r(0, 0, 1) - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((h.theta(0, 0, 1) - PI / 4.0).abs() < 1e-15);
        assert!((h.theta(0, 1, 0) + PI / 4.0).abs() < 1e-15);
        assert_eq!(h.r(0, 0, 0), 1.0);
        assert_eq!(h.theta(0, 1, 1), 0.0);
        let z = est_from(vec![c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], 2);
        let h = coherence_and_delay(&z, None);
        assert!(h.r(0, 0, 1).is_nan() && h.r(0, 0, 0).is_nan());
        assert_eq!(h.r(0, 1, 1), 1.0);
        let neg = est_from(vec![c(1.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)], 2);
        assert_eq!(coherence_and_delay(&neg, None).theta(0, 0, 1), PI);
    }

    fn small_setup() -> (Region, TaperFamily) {
        let r = Region::rectangle(BBox::new(2, [0.0, 0.0], [24.0, 16.0]).unwrap(), [1.0, 1.0]).unwrap();
        let f = compute_tapers(&r, 0.2, TaperOptions { selection: Selection::Count(4), ..Default::default() }).unwrap();
        (r, f)
    }

    #[test]
    fn single_taper_estimate_is_the_periodogram_matrix() {
        let (r, f) = small_setup();
        let mut one = f.clone();
        one.truncate(1);
        let pts = PointPattern::unmarked(vec![[3.0, 4.0], [10.5, 2.25], [20.0, 15.0]]);
        let g = SamplingScheme::grid(2, [2.0, 2.0], [1.0, 1.0]).unwrap();
        let n = GridNodes::new(&g, &r).unwrap().len();
        let field = GriddedField::new(&g, &r, (0..n).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let data = SpatialDataset::new(
            r,
            vec![Process::Points(pts), Process::Field(field)],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let kg = WavenumberGrid::centered(2, [0.04, 0.05], [9, 7]).unwrap();
        let cfg = EstimateConfig::default();
        let t = tapered_transforms(&data, &one, &kg, &cfg).unwrap();
        let e = estimate_from_transforms(&t, 1, data.labels.clone(), 0.2, false).unwrap();
        let i01 = periodogram(&t.dfts[0][0], &t.dfts[1][0], false).unwrap();
        for i in 0..kg.len() {
            assert!((e.get(i, 0, 1) - i01[i]).norm() < 1e-15);
        }
        let full = multitaper_estimate(&data, &f, &kg, &cfg).unwrap();
        assert_eq!(full.m, 4);
        assert!(full.hermitian_error() < 1e-12);
        assert!(full.min_eigen_ratio() > -1e-10);
        assert!(full.conjugate_symmetry_error().unwrap() < 1e-12);
        let shifted = EstimateConfig { taper_offsets: vec![0, 1], ..Default::default() };
        assert!(multitaper_estimate(&data, &f, &kg, &shifted).is_err());
        let mixed = EstimateConfig { allow_mixed_tapers: true, ..shifted };
        assert!(multitaper_estimate(&data, &f, &kg, &mixed).is_ok());
    }

    #[test]
    fn identical_transforms_give_rank_one() {
        let c = Complex64::new;
        let v = [c(1.0, 2.0), c(-0.5, 0.25)];
        let mk = |m| TaperedDft {
            grid: WavenumberGrid::centered(1, [0.1, 0.0], [1, 1]).unwrap(),
            values: vec![v[0]],
            taper_index: m,
            process_index: 0,
            lambda_hat: 0.0,
        };
        let mk2 = |m| TaperedDft { values: vec![v[1]], ..mk(m) };
        let t = TaperedTransforms {
            kgrid: mk(0).grid,
            dfts: vec![vec![mk(0), mk(1), mk(2)], vec![mk2(0), mk2(1), mk2(2)]],
            lambda_hat: vec![0.0, 0.0],
        };
        let e = estimate_from_transforms(&t, 3, vec![], 1.0, false).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                assert!((e.get(0, a, b) - v[a] * v[b].conj()).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn group_delay_plane_is_recovered() {
        let tau = [10.5, 15.0];
        let kg = WavenumberGrid::centered(2, [0.01, 0.01], [21, 21]).unwrap();
        let mut fhat = Vec::new();
        for i in 0..kg.len() {
            let k = kg.point(i);
            let z = Complex64::from_polar(1.0, 2.0 * PI * (tau[0] * k[0] + tau[1] * k[1]));
            fhat.extend([Complex64::new(1.0, 0.0), z, z.conj(), Complex64::new(1.0, 0.0)]);
        }
        let e = SpectralEstimate { kgrid: kg, p: 2, m: 1, fhat, labels: vec![], lambda_hat: vec![], bandwidth: 0.01 };
        let fit = fit_group_delay(&coherence_and_delay(&e, None), 0, 1, 0.1).unwrap();
        assert!((fit.gradient[0] - 2.0 * PI * tau[0]).abs() < 1e-9);
        assert!((fit.gradient[1] - 2.0 * PI * tau[1]).abs() < 1e-9);
        assert!(fit.rms < 1e-9);
    }

    #[test]
    fn alias_sums() {
        let f = FnSpectrum::new(|k: &Point| Complex64::new((-(k[0] * k[0] + k[1] * k[1]) * 20.0).exp(), 0.0));
        let cont = AliasStructure::of(&SamplingScheme::Continuous, 2);
        let g = AliasStructure::of(&SamplingScheme::grid(2, [1.0, 2.0], [0.3, 0.1]).unwrap(), 2);
        let k = [0.2, -0.1];
        let direct = f.density(&k);
        assert_eq!(aliased_spectrum(&f, &cont, &cont, &k, 10.0).unwrap(), direct);
        assert_eq!(aliased_spectrum(&f, &cont, &g, &k, 10.0).unwrap(), direct);
        let same = aliased_spectrum(&f, &g, &g, &k, 6.0).unwrap();
        assert!(same.re > direct.re && same.im.abs() < 1e-15);
        let adaptive = aliased_density(&f, &g, &g, &g, &k, 1e-14, 50).unwrap();
        assert!((adaptive - same).norm() < 1e-14);
        let flat = white_spectrum(1.0);
        assert!(matches!(
            aliased_spectrum(&FnSpectrum::new(|_: &Point| Complex64::new(1.0, 0.0)), &g, &g, &k, 3.0),
            Err(Error::NonDecayingTail { .. })
        ));
        assert_eq!(aliased_spectrum(&flat, &g, &g, &k, 3.0).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn flat_spectrum_expectation_is_the_taper_energy() {
        let r = Region::rectangle(BBox::new(1, [0.0, 0.0], [50.0, 0.0]).unwrap(), [0.5, 1.0]).unwrap();
        let fam = compute_tapers(&r, 0.1, TaperOptions { selection: Selection::Count(3), ..Default::default() }).unwrap();
        let opts = QuadratureOptions::new(0.1);
        let flat = white_spectrum(2.5);
        let h0 = WeightFunction::taper(&fam, 0);
        let h1 = WeightFunction::taper(&fam, 1);
        let gram = fam.interpolated_gram();
        let e = expected_periodogram(&flat, &h0, &h0, &[0.03, 0.0], &opts).unwrap();
        assert!((e.value.re - 2.5 * gram[(0, 0)]).abs() < 1e-12, "{e:?}");
        let x = expected_periodogram(&flat, &h0, &h1, &[0.03, 0.0], &opts).unwrap();
        assert!((x.value.re - 2.5 * gram[(0, 1)]).abs() < 1e-12);
        // The same integral done numerically over the box.
        let as_density = FnSpectrum::new(|_: &Point| Complex64::new(2.5, 0.0));
        let q = expected_periodogram(&as_density, &h0, &h0, &[0.03, 0.0], &opts).unwrap();
        assert!((q.value - e.value).norm() < 1e-3 * 2.5);
    }

    #[test]
    fn grid_white_noise_expectation() {
        let r = Region::rectangle(BBox::new(1, [0.0, 0.0], [40.0, 0.0]).unwrap(), [1.0, 1.0]).unwrap();
        let fam = compute_tapers(&r, 0.1, TaperOptions { selection: Selection::Count(2), ..Default::default() }).unwrap();
        let g = SamplingScheme::grid(1, [1.0, 1.0], [0.5, 0.0]).unwrap();
        let st = fam.sample_all(&g).unwrap();
        let h = WeightFunction::sampled(&st[0]);
        let opts = QuadratureOptions::new(0.1);
        let e = expected_periodogram(&white_spectrum(3.0), &h, &h, &[0.05, 0.0], &opts).unwrap();
        assert!((e.value.re - 3.0).abs() < 1e-9, "{e:?}");
        let nodes = GridNodes::new(&g, &r).unwrap();
        let gm = WeightFunction::node_mean(&nodes);
        let t = unknown_mean_bias(&white_spectrum(3.0), &h, &h, &gm, &gm, &[0.3, 0.0], [1.0, 1.0], &opts).unwrap();
        assert_eq!(t.mean_bias, Complex64::new(0.0, 0.0));
        assert!(t.correction().norm() < 1e-6 * 3.0);
    }
}
