//! Simulators for the reference models and their true spectra.
//!
//! Matérn covariances use the `√(2ν) r/ℓ` convention. Gaussian fields are
//! drawn by circulant embedding of a lattice covering the region, with a
//! dense Cholesky fallback for small node sets.

use crate::error::{invalid, Error, Result};
use crate::estimator::Spectrum;
use crate::fft::{next_fast_len, Fft2};
use crate::fourier::{GriddedField, PointPattern, Process, SpatialDataset};
use crate::geometry::{rational_approx, Region, SamplingScheme, MAX_RATIO_DENOMINATOR, RATIO_TOLERANCE};
use crate::special::{bessel_j0, bessel_k, ln_gamma};
use crate::tapers::GridNodes;
use crate::{Complex64, Point};
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use std::f64::consts::PI;

/// Generator for stream `stream` of `seed`.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaternSpec {
    pub sigma: f64,
    pub ell: f64,
    pub nu: f64,
}

impl MaternSpec {
    pub fn new(sigma: f64, ell: f64, nu: f64) -> Result<Self> {
        if !(sigma > 0.0 && ell > 0.0 && nu > 0.0) || !(sigma.is_finite() && ell.is_finite() && nu.is_finite()) {
            return Err(invalid("Matérn parameters must be positive and finite"));
        }
        Ok(Self { sigma, ell, nu })
    }

    /// `σ² 2^{1−ν}/Γ(ν) x^ν K_ν(x)` with `x = √(2ν) r/ℓ`.
    pub fn cov(&self, r: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        let x = (2.0 * self.nu).sqrt() * r.abs() / self.ell;
        if x == 0.0 {
            return s2;
        }
        if self.nu == 0.5 {
            s2 * (-x).exp()
        } else if self.nu == 1.5 {
            s2 * (1.0 + x) * (-x).exp()
        } else if self.nu == 2.5 {
            s2 * (1.0 + x + x * x / 3.0) * (-x).exp()
        } else {
            let k = bessel_k(self.nu, x);
            if k == 0.0 {
                return 0.0;
            }
            s2 * ((1.0 - self.nu) * 2f64.ln() - ln_gamma(self.nu) + self.nu * x.ln()).exp() * k
        }
    }

    /// Spectral density in dimension `dim`, integrating to `σ²`:
    /// `σ² (4π)^{d/2} Γ(ν+d/2)/Γ(ν) α^{2ν} (α² + 4π²‖k‖²)^{−ν−d/2}`, `α = √(2ν)/ℓ`.
    pub fn sdf(&self, k: &Point, dim: usize) -> f64 {
        let d = dim as f64;
        let a2 = 2.0 * self.nu / (self.ell * self.ell);
        let k2 = if dim == 1 { k[0] * k[0] } else { k[0] * k[0] + k[1] * k[1] };
        let ln = 0.5 * d * (4.0 * PI).ln() + ln_gamma(self.nu + 0.5 * d) - ln_gamma(self.nu) + self.nu * a2.ln()
            - (self.nu + 0.5 * d) * (a2 + 4.0 * PI * PI * k2).ln();
        self.sigma * self.sigma * ln.exp()
    }

    /// Distance beyond which the covariance is below `tol·σ²`.
    pub fn range(&self, tol: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        let mut r = self.ell;
        while self.cov(r) > tol * s2 {
            r += self.ell;
        }
        r
    }
}

/// `∫ g(‖u‖) e^{−2πi u·k} du` for a radial function in one or two
/// dimensions, by Simpson's rule on `[0, rmax]` with about `r_step` spacing.
pub fn radial_fourier(g: &dyn Fn(f64) -> f64, dim: usize, k: f64, rmax: f64, r_step: f64) -> f64 {
    let mut n = (rmax / r_step).ceil() as usize;
    n += n % 2;
    let h = rmax / n as f64;
    let kern = |r: f64| -> f64 {
        if dim == 1 {
            2.0 * g(r) * (2.0 * PI * k * r).cos()
        } else {
            2.0 * PI * g(r) * bessel_j0(2.0 * PI * k * r) * r
        }
    };
    let mut s = kern(0.0) + kern(rmax);
    for i in 1..n {
        s += kern(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// A radial function of `‖k‖` tabulated on `[0, kmax]`, cubic between nodes
/// and zero beyond.
#[derive(Debug, Clone)]
pub struct RadialTable {
    pub dim: usize,
    pub kmax: f64,
    pub values: Vec<f64>,
}

impl RadialTable {
    pub fn eval(&self, k: &Point) -> f64 {
        let r = if self.dim == 1 { k[0].abs() } else { k[0].hypot(k[1]) };
        let n = self.values.len();
        if r > self.kmax || n < 4 {
            return 0.0;
        }
        let t = r / self.kmax * (n - 1) as f64;
        let i = (t.floor() as usize).min(n - 2);
        let f = t - i as f64;
        let v = |j: i64| -> f64 {
            // Even extension across the origin.
            let j = j.unsigned_abs() as usize;
            self.values[j.min(n - 1)]
        };
        let (p0, p1, p2, p3) = (v(i as i64 - 1), v(i as i64), v(i as i64 + 1), v(i as i64 + 2));
        p1 + 0.5 * f * (p2 - p0 + f * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + f * (3.0 * (p1 - p2) + p3 - p0)))
    }
}

/// Fourier transform of `e^{c(r)} − 1` for a Matérn covariance, tabulated.
pub fn lgcp_excess_table(spec: &MaternSpec, dim: usize, kmax: f64, nk: usize, r_step: f64) -> RadialTable {
    let rmax = spec.range(1e-14);
    let g = |r: f64| spec.cov(r).exp_m1();
    let values = (0..nk)
        .map(|i| radial_fourier(&g, dim, i as f64 * kmax / (nk - 1) as f64, rmax, r_step))
        .collect();
    RadialTable { dim, kmax, values }
}

/// One entry `f^{pq}` of a model spectrum.
#[derive(Debug, Clone)]
pub enum PairSpectrum {
    Zero,
    Flat(f64),
    Matern { spec: MaternSpec, dim: usize, scale: f64 },
    /// `λ e^{2πi τ·k}`.
    Shift { lambda: f64, tau: Point },
    Table { table: RadialTable, scale: f64 },
    Sum(Vec<PairSpectrum>),
}

impl Spectrum for PairSpectrum {
    fn density(&self, k: &Point) -> Complex64 {
        match self {
            Self::Zero | Self::Flat(_) => Complex64::new(0.0, 0.0),
            Self::Matern { spec, dim, scale } => Complex64::new(scale * spec.sdf(k, *dim), 0.0),
            Self::Shift { lambda, tau } => Complex64::from_polar(*lambda, 2.0 * PI * (tau[0] * k[0] + tau[1] * k[1])),
            Self::Table { table, scale } => Complex64::new(scale * table.eval(k), 0.0),
            Self::Sum(parts) => parts.iter().map(|p| p.density(k)).sum(),
        }
    }

    fn white(&self) -> f64 {
        match self {
            Self::Flat(l) => *l,
            Self::Sum(parts) => parts.iter().map(|p| p.white()).sum(),
            _ => 0.0,
        }
    }
}

impl PairSpectrum {
    /// Density plus flat part.
    pub fn value(&self, k: &Point) -> Complex64 {
        self.density(k) + self.white()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evaluation {
    ClosedForm,
    NumericFourier,
}

/// Spectral matrix of a model, entry by entry.
#[derive(Debug, Clone)]
pub struct TrueSpectrum {
    pub p: usize,
    /// Row-major `p × p`.
    pub entries: Vec<PairSpectrum>,
    pub evaluation: Evaluation,
}

impl TrueSpectrum {
    pub fn entry(&self, p: usize, q: usize) -> &PairSpectrum {
        &self.entries[p * self.p + q]
    }

    pub fn matrix(&self, k: &Point) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.p, self.p, |a, b| self.entry(a, b).value(k))
    }

    /// Coherence `|f^{pq}|/√(f^{pp} f^{qq})`.
    pub fn coherence(&self, k: &Point, p: usize, q: usize) -> f64 {
        let m = self.matrix(k);
        m[(p, q)].norm() / (m[(p, p)].re * m[(q, q)].re).sqrt()
    }
}

/// The reference models.
#[derive(Debug, Clone)]
pub enum ModelConfig {
    Poisson { lambda: f64 },
    ShiftedPair { lambda: f64, tau: Point },
    MarkedPoisson { lambda: f64, mark_mean: f64, mark_sd: f64 },
    /// Gaussian field `Y` with mean `mu` and its Cox process with rate `e^Y`.
    Lgcp { mu: f64, matern: MaternSpec, grid: SamplingScheme, refine: usize },
    Colocation { matern: MaternSpec, alpha: [f64; 2], grids: [SamplingScheme; 2] },
}

/// Settings of the tabulated numeric transforms.
#[derive(Debug, Clone, Copy)]
pub struct TableOptions {
    pub kmax: f64,
    pub nk: usize,
    pub r_step: f64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64, what: &str| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{what} must be positive")))
            }
        };
        match self {
            Self::Poisson { lambda } | Self::ShiftedPair { lambda, .. } => pos(*lambda, "intensity"),
            Self::MarkedPoisson { lambda, mark_sd, .. } => {
                pos(*lambda, "intensity")?;
                if *mark_sd < 0.0 {
                    return Err(invalid("mark SD must be non-negative"));
                }
                Ok(())
            }
            Self::Lgcp { grid, refine, .. } => {
                if !grid.is_grid() || *refine == 0 {
                    return Err(invalid("LGCP needs a data grid and refinement ≥ 1"));
                }
                Ok(())
            }
            Self::Colocation { grids, .. } => {
                if !grids.iter().all(|g| g.is_grid()) {
                    return Err(invalid("colocation needs two grids"));
                }
                Ok(())
            }
        }
    }

    /// Process labels in output order.
    pub fn labels(&self) -> Vec<String> {
        match self {
            Self::Poisson { .. } | Self::MarkedPoisson { .. } => vec!["points".into()],
            Self::ShiftedPair { .. } => vec!["original".into(), "shifted".into()],
            Self::Lgcp { .. } => vec!["field".into(), "points".into()],
            Self::Colocation { .. } => vec!["y1".into(), "y2".into()],
        }
    }

    pub fn true_spectrum(&self, dim: usize, table: TableOptions) -> TrueSpectrum {
        use PairSpectrum::*;
        let closed = |p, entries| TrueSpectrum { p, entries, evaluation: Evaluation::ClosedForm };
        match *self {
            Self::Poisson { lambda } => closed(1, vec![Flat(lambda)]),
            Self::MarkedPoisson { lambda, mark_mean, mark_sd } => {
                closed(1, vec![Flat(lambda * (mark_mean * mark_mean + mark_sd * mark_sd))])
            }
            Self::ShiftedPair { lambda, tau } => closed(
                2,
                vec![Flat(lambda), Shift { lambda, tau }, Shift { lambda, tau: [-tau[0], -tau[1]] }, Flat(lambda)],
            ),
            Self::Lgcp { mu, matern, .. } => {
                let lq = lgcp_intensity(mu, &matern);
                let excess = lgcp_excess_table(&matern, dim, table.kmax, table.nk, table.r_step);
                TrueSpectrum {
                    p: 2,
                    entries: vec![
                        Matern { spec: matern, dim, scale: 1.0 },
                        Matern { spec: matern, dim, scale: lq },
                        Matern { spec: matern, dim, scale: lq },
                        Sum(vec![Table { table: excess, scale: lq * lq }, Flat(lq)]),
                    ],
                    evaluation: Evaluation::NumericFourier,
                }
            }
            Self::Colocation { matern, alpha, .. } => {
                let m = |s: f64| Matern { spec: matern, dim, scale: s };
                closed(
                    2,
                    vec![
                        m(1.0 + alpha[0] * alpha[0]),
                        m(alpha[0] * alpha[1]),
                        m(alpha[0] * alpha[1]),
                        m(1.0 + alpha[1] * alpha[1]),
                    ],
                )
            }
        }
    }

    /// One realisation on `region`.
    pub fn simulate(&self, region: &Region, seed: u64) -> Result<SpatialDataset> {
        self.validate()?;
        let mut r = rng(seed, 0);
        let processes = match *self {
            Self::Poisson { lambda } => vec![Process::Points(simulate_poisson(region, lambda, &mut r)?)],
            Self::MarkedPoisson { lambda, mark_mean, mark_sd } => {
                vec![Process::Points(simulate_marked_poisson(region, lambda, mark_mean, mark_sd, &mut r)?)]
            }
            Self::ShiftedPair { lambda, tau } => {
                let (a, b) = simulate_shifted_pair(region, lambda, tau, &mut r)?;
                vec![Process::Points(a), Process::Points(b)]
            }
            Self::Lgcp { mu, matern, grid, refine } => {
                let (f, p) = simulate_lgcp(region, mu, &matern, &grid, refine, &mut r)?;
                vec![Process::Field(f), Process::Points(p)]
            }
            Self::Colocation { matern, alpha, grids } => {
                let (a, b) = simulate_colocation(region, &matern, alpha, &grids, &mut r)?;
                vec![Process::Field(a), Process::Field(b)]
            }
        };
        SpatialDataset::new(region.clone(), processes, self.labels())
    }
}

/// `λ^q = e^{μ + σ²/2}`.
pub fn lgcp_intensity(mu: f64, spec: &MaternSpec) -> f64 {
    (mu + 0.5 * spec.sigma * spec.sigma).exp()
}

/// `μ` giving LGCP intensity `lambda`.
pub fn lgcp_mu_for(lambda: f64, spec: &MaternSpec) -> f64 {
    lambda.ln() - 0.5 * spec.sigma * spec.sigma
}

fn poisson_count<R: Rng>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|e| invalid(format!("Poisson mean {mean}: {e}")))?;
    Ok(d.sample(rng) as u64)
}

fn uniform_in_cell<R: Rng>(region: &Region, cell: usize, rng: &mut R) -> Point {
    let c = region.cell_center(cell);
    let d = region.delta();
    let mut p = [0.0; 2];
    for j in 0..region.dim() {
        p[j] = c[j] + (rng.random::<f64>() - 0.5) * d[j];
    }
    p
}

/// Homogeneous Poisson process on the region mask.
pub fn simulate_poisson<R: Rng>(region: &Region, lambda: f64, rng: &mut R) -> Result<PointPattern> {
    if !(lambda > 0.0) {
        return Err(invalid("intensity must be positive"));
    }
    let n = poisson_count(lambda * region.area(), rng)?;
    let cells = region.cells();
    let locations = (0..n)
        .map(|_| {
            let c = cells[rng.random_range(0..cells.len())];
            uniform_in_cell(region, c, rng)
        })
        .collect();
    Ok(PointPattern::unmarked(locations))
}

pub fn simulate_marked_poisson<R: Rng>(
    region: &Region,
    lambda: f64,
    mark_mean: f64,
    mark_sd: f64,
    rng: &mut R,
) -> Result<PointPattern> {
    let mut p = simulate_poisson(region, lambda, rng)?;
    let normal = Normal::new(mark_mean, mark_sd).map_err(|e| invalid(format!("mark distribution: {e}")))?;
    p.marks = Some((0..p.len()).map(|_| normal.sample(rng)).collect());
    Ok(p)
}

/// A Poisson process on the bounding box dilated by `|τ|`, and its shift by
/// `τ`, both clipped to the region.
pub fn simulate_shifted_pair<R: Rng>(
    region: &Region,
    lambda: f64,
    tau: Point,
    rng: &mut R,
) -> Result<(PointPattern, PointPattern)> {
    if !(lambda > 0.0) {
        return Err(invalid("intensity must be positive"));
    }
    let dim = region.dim();
    let bb = region.bbox();
    let mut lo = [0.0; 2];
    let mut side = [0.0; 2];
    let mut vol = 1.0;
    for j in 0..dim {
        lo[j] = bb.lo[j] - tau[j].abs();
        side[j] = bb.side(j) + 2.0 * tau[j].abs();
        vol *= side[j];
    }
    let n = poisson_count(lambda * vol, rng)?;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for _ in 0..n {
        let mut x = [0.0; 2];
        for j in 0..dim {
            x[j] = lo[j] + rng.random::<f64>() * side[j];
        }
        let mut y = x;
        for j in 0..dim {
            y[j] += tau[j];
        }
        if region.contains(&x) {
            a.push(x);
        }
        if region.contains(&y) {
            b.push(y);
        }
    }
    Ok((PointPattern::unmarked(a), PointPattern::unmarked(b)))
}

/// Regular lattice with its node indices of interest.
#[derive(Debug, Clone)]
pub struct SampleLattice {
    pub dim: usize,
    pub origin: Point,
    pub spacing: Point,
    pub n: [usize; 2],
}

impl SampleLattice {
    pub fn node(&self, idx: [usize; 2]) -> Point {
        [
            self.origin[0] + idx[0] as f64 * self.spacing[0],
            self.origin[1] + idx[1] as f64 * self.spacing[1],
        ]
    }

    /// Lattice index of `x`, if it is a node.
    pub fn index_of(&self, x: &Point) -> Option<[usize; 2]> {
        let mut idx = [0usize; 2];
        for j in 0..self.dim {
            let t = (x[j] - self.origin[j]) / self.spacing[j];
            let r = t.round();
            if (t - r).abs() > 1e-6 || r < 0.0 || r as usize >= self.n[j] {
                return None;
            }
            idx[j] = r as usize;
        }
        Some(idx)
    }

    fn flat(&self, idx: [usize; 2]) -> usize {
        idx[0] * self.n[1] + idx[1]
    }
}

/// Largest circulant torus tried, in lattice cells.
pub const MAX_EMBEDDING: usize = 1 << 22;
/// Largest node count for the dense Cholesky fallback.
pub const DENSE_FALLBACK_LIMIT: usize = 4000;

enum SamplerKind {
    Circulant { fft: Fft2, sqrt_eig: Vec<f64> },
    Dense { factor: DMatrix<f64> },
}

/// Stationary Gaussian field sampler for a fixed set of lattice nodes.
pub struct FieldSampler {
    lattice: SampleLattice,
    targets: Vec<[usize; 2]>,
    kind: SamplerKind,
}

impl FieldSampler {
    pub fn new(spec: &MaternSpec, lattice: SampleLattice, targets: Vec<[usize; 2]>) -> Result<Self> {
        let dim = lattice.dim;
        let n = lattice.n;
        let mut min_eig = f64::NEG_INFINITY;
        for pad in 1..=8usize {
            let mut m = [1usize; 2];
            for j in 0..dim {
                m[j] = next_fast_len((2 * pad * n[j].saturating_sub(1)).max(1));
            }
            if m[0] * m[1] > MAX_EMBEDDING {
                break;
            }
            let mut c = vec![Complex64::new(0.0, 0.0); m[0] * m[1]];
            for a in 0..m[0] {
                for b in 0..m[1] {
                    let dx = a.min(m[0] - a) as f64 * lattice.spacing[0];
                    let dy = if dim == 2 { b.min(m[1] - b) as f64 * lattice.spacing[1] } else { 0.0 };
                    c[a * m[1] + b] = Complex64::new(spec.cov(dx.hypot(dy)), 0.0);
                }
            }
            let fft = Fft2::new(m);
            fft.forward(&mut c);
            let eig: Vec<f64> = c.iter().map(|z| z.re).collect();
            let lmax = eig.iter().copied().fold(0.0, f64::max);
            min_eig = eig.iter().copied().fold(f64::INFINITY, f64::min);
            if min_eig >= -1e-10 * lmax {
                let total = (m[0] * m[1]) as f64;
                let sqrt_eig = eig.iter().map(|&l| (l.max(0.0) / total).sqrt()).collect();
                log::debug!("circulant embedding {m:?} (padding {pad})");
                return Ok(Self { lattice, targets, kind: SamplerKind::Circulant { fft, sqrt_eig } });
            }
        }
        let nodes = targets.len();
        if nodes > DENSE_FALLBACK_LIMIT {
            return Err(Error::EmbeddingFailed { min_eig, nodes });
        }
        log::debug!("circulant embedding failed (min eigenvalue {min_eig:.3e}); dense Cholesky on {nodes} nodes");
        let pts: Vec<Point> = targets.iter().map(|&i| lattice.node(i)).collect();
        let jitter = 1e-12 * spec.sigma * spec.sigma;
        let cov = DMatrix::from_fn(nodes, nodes, |a, b| {
            let d = (pts[a][0] - pts[b][0]).hypot(pts[a][1] - pts[b][1]);
            spec.cov(d) + if a == b { jitter } else { 0.0 }
        });
        let factor = Cholesky::new(cov).ok_or(Error::NotPositiveDefinite)?.l();
        Ok(Self { lattice, targets, kind: SamplerKind::Dense { factor } })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn lattice(&self) -> &SampleLattice {
        &self.lattice
    }

    pub fn targets(&self) -> &[[usize; 2]] {
        &self.targets
    }

    /// Two independent zero-mean draws at the target nodes.
    pub fn draw_pair<R: Rng>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        match &self.kind {
            SamplerKind::Circulant { fft, sqrt_eig } => {
                let m = fft.shape();
                let mut w: Vec<Complex64> = sqrt_eig
                    .iter()
                    .map(|&s| {
                        let a: f64 = StandardNormal.sample(rng);
                        let b: f64 = StandardNormal.sample(rng);
                        Complex64::new(a * s, b * s)
                    })
                    .collect();
                fft.forward(&mut w);
                let pick = |f: fn(&Complex64) -> f64| -> Vec<f64> {
                    self.targets.iter().map(|&[a, b]| f(&w[a * m[1] + b])).collect()
                };
                (pick(|z| z.re), pick(|z| z.im))
            }
            SamplerKind::Dense { factor } => {
                let n = self.targets.len();
                let mut draw = || {
                    let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
                    (factor * z).as_slice().to_vec()
                };
                let a = draw();
                (a, draw())
            }
        }
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.draw_pair(rng).0
    }
}

/// Sampler for the nodes of `scheme` inside `region`, on the node lattice.
pub fn field_sampler(spec: &MaternSpec, scheme: &SamplingScheme, region: &Region) -> Result<(GridNodes, FieldSampler)> {
    let nodes = GridNodes::new(scheme, region)?;
    let lat = nodes.lattice;
    let lattice = SampleLattice { dim: lat.dim, origin: lat.origin, spacing: lat.spacing, n: lat.n };
    let targets = nodes.positions.iter().map(|&p| [p / lat.n[1], p % lat.n[1]]).collect();
    let sampler = FieldSampler::new(spec, lattice, targets)?;
    Ok((nodes, sampler))
}

/// Zero-mean Matérn field at the nodes of `scheme` inside `region`.
pub fn simulate_gaussian_field<R: Rng>(
    spec: &MaternSpec,
    scheme: &SamplingScheme,
    region: &Region,
    rng: &mut R,
) -> Result<GriddedField> {
    let (nodes, sampler) = field_sampler(spec, scheme, region)?;
    let values = sampler.draw(rng);
    Ok(GriddedField { nodes, values })
}

/// Greatest common spacing of `a` and `b` (rational ratio required).
fn common_spacing(a: f64, b: f64) -> Option<f64> {
    if b.abs() < 1e-12 * a.abs() {
        return Some(a);
    }
    let (p, _q) = rational_approx(a / b.abs(), RATIO_TOLERANCE, MAX_RATIO_DENOMINATOR)?;
    Some(a / p as f64)
}

/// Lattice with the given spacing through `anchor`, covering the bounding box
/// of `region` widened by one spacing.
fn covering_lattice(region: &Region, anchor: Point, spacing: Point) -> SampleLattice {
    let dim = region.dim();
    let bb = region.bbox();
    let mut origin = [0.0; 2];
    let mut n = [1usize; 2];
    for j in 0..dim {
        let first = ((bb.lo[j] - spacing[j] - anchor[j]) / spacing[j]).floor();
        let last = ((bb.hi[j] + spacing[j] - anchor[j]) / spacing[j]).ceil();
        origin[j] = anchor[j] + first * spacing[j];
        n[j] = (last - first) as usize + 1;
    }
    SampleLattice { dim, origin, spacing, n }
}

/// Log-Gaussian Cox process. The field `Y = μ + Z` is simulated on the data
/// grid refined `refine` times; points are drawn cell by cell with rate
/// `e^Y` and clipped to the region. Returns `Y` on the data grid and the
/// points.
pub fn simulate_lgcp<R: Rng>(
    region: &Region,
    mu: f64,
    spec: &MaternSpec,
    grid: &SamplingScheme,
    refine: usize,
    rng: &mut R,
) -> Result<(GriddedField, PointPattern)> {
    let SamplingScheme::Grid { dim, spacing, offset } = *grid else {
        return Err(invalid("LGCP needs a data grid"));
    };
    if refine == 0 {
        return Err(invalid("refinement must be at least 1"));
    }
    let mut fine = [1.0; 2];
    for j in 0..dim {
        fine[j] = spacing[j] / refine as f64;
    }
    let lattice = covering_lattice(region, offset, fine);
    let all: Vec<[usize; 2]> = (0..lattice.n[0]).flat_map(|a| (0..lattice.n[1]).map(move |b| [a, b])).collect();
    let sampler = FieldSampler::new(spec, lattice.clone(), all)?;
    let y: Vec<f64> = sampler.draw(rng).into_iter().map(|z| z + mu).collect();
    let mut worst: f64 = 0.0;
    for a in 0..lattice.n[0] {
        for b in 0..lattice.n[1] {
            if a + 1 < lattice.n[0] {
                worst = worst.max((y[lattice.flat([a + 1, b])] - y[lattice.flat([a, b])]).abs());
            }
            if dim == 2 && b + 1 < lattice.n[1] {
                worst = worst.max((y[lattice.flat([a, b + 1])] - y[lattice.flat([a, b])]).abs());
            }
        }
    }
    if worst.exp_m1() > 0.05 {
        log::warn!("LGCP rate varies by {:.1}% between neighbouring cells; refine the grid", 100.0 * worst.exp_m1());
    }
    let cell: f64 = fine[..dim].iter().product();
    let mut locations = Vec::new();
    for a in 0..lattice.n[0] {
        for b in 0..lattice.n[1] {
            let centre = lattice.node([a, b]);
            let n = poisson_count(y[lattice.flat([a, b])].exp() * cell, rng)?;
            for _ in 0..n {
                let mut x = [0.0; 2];
                for j in 0..dim {
                    x[j] = centre[j] + (rng.random::<f64>() - 0.5) * fine[j];
                }
                if region.contains(&x) {
                    locations.push(x);
                }
            }
        }
    }
    let nodes = GridNodes::new(grid, region)?;
    let values = nodes
        .points
        .iter()
        .map(|x| lattice.index_of(x).map(|i| y[lattice.flat(i)]).ok_or_else(|| invalid("data node off the fine lattice")))
        .collect::<Result<Vec<_>>>()?;
    Ok((GriddedField { nodes, values }, PointPattern::unmarked(locations)))
}

/// Joint sampler for the colocation model: a shared field on the union of
/// both grids and one individual field per grid.
pub struct ColocationSampler {
    alpha: [f64; 2],
    nodes: [GridNodes; 2],
    shared: FieldSampler,
    /// Positions of each grid's nodes among the shared sampler's targets.
    shared_index: [Vec<usize>; 2],
    own: [FieldSampler; 2],
}

impl ColocationSampler {
    pub fn new(region: &Region, spec: &MaternSpec, alpha: [f64; 2], grids: &[SamplingScheme; 2]) -> Result<Self> {
        let (n0, s0) = field_sampler(spec, &grids[0], region)?;
        let (n1, s1) = field_sampler(spec, &grids[1], region)?;
        let (SamplingScheme::Grid { dim, spacing: d0, offset: o0 }, SamplingScheme::Grid { spacing: d1, offset: o1, .. }) =
            (grids[0], grids[1])
        else {
            return Err(invalid("colocation needs two grids"));
        };
        let mut fine = [1.0; 2];
        for j in 0..dim {
            let g = common_spacing(d0[j], d1[j]).ok_or_else(|| invalid("grid spacings must have a rational ratio"))?;
            fine[j] = common_spacing(g, o1[j] - o0[j]).ok_or_else(|| invalid("grid offsets are incommensurate"))?;
        }
        let lattice = covering_lattice(region, o0, fine);
        let mut targets: Vec<[usize; 2]> = Vec::new();
        let mut shared_index = [Vec::new(), Vec::new()];
        for (g, nodes) in [&n0, &n1].into_iter().enumerate() {
            for x in &nodes.points {
                let idx = lattice.index_of(x).ok_or_else(|| invalid("grid node off the common lattice"))?;
                let pos = targets.iter().position(|t| *t == idx).unwrap_or_else(|| {
                    targets.push(idx);
                    targets.len() - 1
                });
                shared_index[g].push(pos);
            }
        }
        let shared = FieldSampler::new(spec, lattice, targets)?;
        Ok(Self { alpha, nodes: [n0, n1], shared, shared_index, own: [s0, s1] })
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> (GriddedField, GriddedField) {
        let x = self.shared.draw(rng);
        let u0 = self.own[0].draw(rng);
        let u1 = self.own[1].draw(rng);
        let make = |g: usize, u: Vec<f64>| {
            let values = u.iter().zip(&self.shared_index[g]).map(|(u, &i)| u + self.alpha[g] * x[i]).collect();
            GriddedField { nodes: self.nodes[g].clone(), values }
        };
        (make(0, u0), make(1, u1))
    }
}

/// `Y^j = U^j + α^j X` on grid `j`, with `U^1, U^2, X` independent.
pub fn simulate_colocation<R: Rng>(
    region: &Region,
    spec: &MaternSpec,
    alpha: [f64; 2],
    grids: &[SamplingScheme; 2],
    rng: &mut R,
) -> Result<(GriddedField, GriddedField)> {
    Ok(ColocationSampler::new(region, spec, alpha, grids)?.draw(rng))
}

/// Matérn parameters of the surrogate gradient field.
pub const SURROGATE_MATERN: MaternSpec = MaternSpec { sigma: 4.0, ell: 60.0, nu: 2.5 };

/// One point process of a surrogate dataset.
#[derive(Debug, Clone)]
pub struct SurrogatePattern {
    pub label: String,
    pub intensity: f64,
    /// Empirical marks resampled with replacement.
    pub marks: Option<Vec<f64>>,
}

/// Independent Poisson patterns with the given intensities and, if a grid is
/// given, the finite-difference gradient norm of a Matérn field on it.
pub fn surrogate<R: Rng>(
    region: &Region,
    patterns: &[SurrogatePattern],
    gradient_grid: Option<&SamplingScheme>,
    rng: &mut R,
) -> Result<SpatialDataset> {
    let mut processes = Vec::new();
    let mut labels = Vec::new();
    for p in patterns {
        let mut pat = simulate_poisson(region, p.intensity, rng)?;
        if let Some(pool) = &p.marks {
            if pool.is_empty() {
                return Err(invalid("empty mark pool"));
            }
            pat.marks = Some((0..pat.len()).map(|_| pool[rng.random_range(0..pool.len())]).collect());
        }
        processes.push(Process::Points(pat));
        labels.push(p.label.clone());
    }
    if let Some(grid) = gradient_grid {
        processes.push(Process::Field(gradient_norm_field(region, grid, rng)?));
        labels.push("gradient".into());
    }
    SpatialDataset::new(region.clone(), processes, labels)
}

/// `‖∇Z‖` by central differences (one-sided at the lattice edge) for a
/// surrogate Matérn field `Z`.
pub fn gradient_norm_field<R: Rng>(region: &Region, grid: &SamplingScheme, rng: &mut R) -> Result<GriddedField> {
    let SamplingScheme::Grid { dim, spacing, offset } = *grid else {
        return Err(invalid("gradient field needs a grid"));
    };
    let nodes = GridNodes::new(grid, region)?;
    let lattice = covering_lattice(region, offset, spacing);
    let all: Vec<[usize; 2]> = (0..lattice.n[0]).flat_map(|a| (0..lattice.n[1]).map(move |b| [a, b])).collect();
    let z = FieldSampler::new(&SURROGATE_MATERN, lattice.clone(), all)?.draw(rng);
    let n = lattice.n;
    let diff = |idx: [usize; 2], j: usize| -> f64 {
        let (lo, hi) = (idx[j].saturating_sub(1), (idx[j] + 1).min(n[j] - 1));
        if hi == lo {
            return 0.0;
        }
        let (mut a, mut b) = (idx, idx);
        a[j] = lo;
        b[j] = hi;
        (z[lattice.flat(b)] - z[lattice.flat(a)]) / ((hi - lo) as f64 * spacing[j])
    };
    let values = nodes
        .points
        .iter()
        .map(|x| {
            let idx = lattice.index_of(x).ok_or_else(|| invalid("grid node off the lattice"))?;
            Ok((0..dim).map(|j| diff(idx, j).powi(2)).sum::<f64>().sqrt())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GriddedField { nodes, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;

    fn rect(w: f64, h: f64, d: f64) -> Region {
        Region::rectangle(BBox::new(2, [0.0, 0.0], [w, h]).unwrap(), [d, d]).unwrap()
    }

    #[test]
    fn matern_covariance_forms_agree() {
        for nu in [0.5, 1.5, 2.5] {
            let s = MaternSpec::new(1.3, 30.0, nu).unwrap();
            let g = MaternSpec::new(1.3, 30.0, nu + 1e-13).unwrap();
            assert_eq!(s.cov(0.0), 1.3 * 1.3);
            for r in [0.5, 7.0, 30.0, 95.0] {
                assert!((s.cov(r) - g.cov(r)).abs() < 1e-9 * s.cov(0.0), "nu {nu} r {r}");
            }
        }
    }

    #[test]
    fn matern_sdf_normalisation_and_transform() {
        let s = MaternSpec::new(1.0, 30.0, 2.5).unwrap();
        let rmax = s.range(1e-16);
        for dim in [1, 2] {
            for k in [0.0, 0.003, 0.01, 0.02, 0.05] {
                let want = s.sdf(&[k, 0.0], dim);
                let got = radial_fourier(&|r| s.cov(r), dim, k, rmax, 0.05);
                assert!((got - want).abs() < 1e-4 * want, "dim {dim} k {k}: {got} vs {want}");
            }
        }
        // ∫ f dk = σ² in one dimension.
        let h = 1e-4;
        let total: f64 = (-20000..=20000).map(|i| s.sdf(&[i as f64 * h, 0.0], 1) * h).sum();
        assert!((total - 1.0).abs() < 1e-3);
        let odd = MaternSpec::new(2.0, 10.0, 1.3).unwrap();
        let got = radial_fourier(&|r| odd.cov(r), 2, 0.02, odd.range(1e-16), 0.02);
        assert!((got - odd.sdf(&[0.02, 0.0], 2)).abs() < 1e-4 * got);
    }

    #[test]
    fn poisson_points_fill_the_mask() {
        let bb = BBox::new(2, [0.0, 0.0], [100.0, 50.0]).unwrap();
        let r = Region::from_fn(bb, [1.0, 1.0], |c| c[0] < 50.0 || c[1] < 25.0).unwrap();
        let p = simulate_poisson(&r, 0.05, &mut rng(1, 0)).unwrap();
        assert!(p.locations.iter().all(|x| r.contains(x)));
        let mean = 0.05 * r.area();
        assert!((p.len() as f64 - mean).abs() < 5.0 * mean.sqrt());
        let again = simulate_poisson(&r, 0.05, &mut rng(1, 0)).unwrap();
        assert_eq!(p.locations, again.locations);
    }

    #[test]
    fn shifted_pair_relation() {
        let r = rect(100.0, 80.0, 1.0);
        let (a, b) = simulate_shifted_pair(&r, 0.05, [0.0, 0.0], &mut rng(2, 0)).unwrap();
        assert_eq!(a.locations, b.locations);
        let tau = [10.5, 15.0];
        let (a, b) = simulate_shifted_pair(&r, 0.05, tau, &mut rng(2, 0)).unwrap();
        for x in &a.locations {
            let y = [x[0] + tau[0], x[1] + tau[1]];
            if r.contains(&y) {
                assert!(b.locations.contains(&y));
            }
        }
    }

    #[test]
    fn gaussian_field_moments_and_determinism() {
        let r = rect(200.0, 100.0, 2.0);
        let g = SamplingScheme::grid(2, [5.0, 5.0], [2.5, 2.5]).unwrap();
        let s = MaternSpec::new(1.0, 30.0, 2.5).unwrap();
        let (nodes, sampler) = field_sampler(&s, &g, &r).unwrap();
        let mut rr = rng(3, 0);
        let (mut m, mut v, mut c) = (0.0, 0.0, 0.0);
        let reps = 200;
        let nb = nodes.index.iter().position(|i| *i == [1, 0]).unwrap();
        let n0 = nodes.index.iter().position(|i| *i == [0, 0]).unwrap();
        for _ in 0..reps {
            let (a, b) = sampler.draw_pair(&mut rr);
            for y in [a, b] {
                m += y[n0];
                v += y[n0] * y[n0];
                c += y[n0] * y[nb];
            }
        }
        let n = 2.0 * reps as f64;
        assert!((m / n).abs() < 3.0 / n.sqrt());
        assert!((v / n - 1.0).abs() < 4.0 * (2.0 / n).sqrt());
        assert!((c / n - s.cov(5.0)).abs() < 4.0 * (2.0 / n).sqrt());
        let f1 = simulate_gaussian_field(&s, &g, &r, &mut rng(9, 1)).unwrap();
        let f2 = simulate_gaussian_field(&s, &g, &r, &mut rng(9, 1)).unwrap();
        assert_eq!(f1.values, f2.values);
    }

    #[test]
    fn lgcp_field_sits_on_data_grid() {
        let r = rect(100.0, 60.0, 1.0);
        let s = MaternSpec::new(1.0, 30.0, 2.5).unwrap();
        let g = SamplingScheme::grid(2, [5.0, 5.0], [2.5, 2.5]).unwrap();
        let mu = lgcp_mu_for(0.02, &s);
        let (f, p) = simulate_lgcp(&r, mu, &s, &g, 5, &mut rng(4, 0)).unwrap();
        assert_eq!(f.len(), 20 * 12);
        assert!(p.locations.iter().all(|x| r.contains(x)));
        assert!(f.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn colocation_shares_latent_field() {
        let r = rect(200.0, 100.0, 1.0);
        let s = MaternSpec::new(1.0, 30.0, 2.5).unwrap();
        let grids = [
            SamplingScheme::grid(2, [5.0, 5.0], [0.0, 0.0]).unwrap(),
            SamplingScheme::grid(2, [10.0, 15.0], [0.0, 3.0]).unwrap(),
        ];
        let sm = ColocationSampler::new(&r, &s, [0.8, 0.5], &grids).unwrap();
        let (a, b) = sm.draw(&mut rng(5, 0));
        assert_eq!(a.len(), sm.nodes[0].len());
        assert_eq!(b.len(), sm.nodes[1].len());
        assert!(a.values.iter().chain(&b.values).all(|v| v.is_finite()));
    }

    #[test]
    fn lgcp_table_converges() {
        let s = MaternSpec::new(1.0, 30.0, 2.5).unwrap();
        for dim in [1, 2] {
            let a = lgcp_excess_table(&s, dim, 0.05, 11, 0.5);
            let b = lgcp_excess_table(&s, dim, 0.05, 11, 0.25);
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() <= 1e-3 * y.abs(), "dim {dim}: {:?} vs {:?}", a.values, b.values);
            }
        }
    }

    #[test]
    fn gradient_field_is_nonnegative() {
        let r = rect(120.0, 60.0, 1.0);
        let g = SamplingScheme::grid(2, [4.0, 4.0], [2.0, 2.0]).unwrap();
        let f = gradient_norm_field(&r, &g, &mut rng(6, 0)).unwrap();
        assert!(f.values.iter().all(|&v| v >= 0.0));
    }
}
