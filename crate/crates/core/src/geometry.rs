//! Regions, sampling schemes, wavenumber grids and alias lattices.

use crate::error::{invalid, Error, Result};
use crate::{Complex64, Point};
use std::f64::consts::PI;

/// Default number of reference cells along the shorter side of a region.
pub const DEFAULT_CELLS_PER_SIDE: usize = 256;

/// Tolerance used when recognising rational spacing ratios.
pub const RATIO_TOLERANCE: f64 = 1e-9;

/// Largest denominator accepted for a rational spacing ratio.
pub const MAX_RATIO_DENOMINATOR: u64 = 1000;

fn check_dim(dim: usize) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(invalid(format!("dimension must be 1 or 2, got {dim}")))
    }
}

/// Axis-aligned box `[lo, hi)` in one or two dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub dim: usize,
    pub lo: Point,
    pub hi: Point,
}

impl BBox {
    pub fn new(dim: usize, lo: Point, hi: Point) -> Result<Self> {
        check_dim(dim)?;
        for j in 0..dim {
            if !(hi[j] > lo[j]) || !lo[j].is_finite() || !hi[j].is_finite() {
                return Err(invalid(format!("box side {j} is empty: [{}, {})", lo[j], hi[j])));
            }
        }
        let (mut lo, mut hi) = (lo, hi);
        if dim == 1 {
            lo[1] = 0.0;
            hi[1] = 1.0;
        }
        Ok(Self { dim, lo, hi })
    }

    pub fn side(&self, j: usize) -> f64 {
        self.hi[j] - self.lo[j]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|j| self.side(j)).product()
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..self.dim).all(|j| p[j] >= self.lo[j] && p[j] < self.hi[j])
    }
}

/// Observation window: a bounding box plus an inclusion mask on a
/// cell-centred reference lattice.
///
/// Cell `(ix, iy)` covers `lo + [ix, ix+1)·δ × [iy, iy+1)·δ` and is stored
/// at `ix * shape[1] + iy`. In one dimension `shape[1] == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    bbox: BBox,
    delta: Point,
    shape: [usize; 2],
    mask: Vec<bool>,
    count: usize,
}

impl Region {
    /// Builds a region from an explicit mask. The bounding box is
    /// `lo + shape·δ`.
    pub fn from_mask(dim: usize, lo: Point, delta: Point, shape: [usize; 2], mask: Vec<bool>) -> Result<Self> {
        check_dim(dim)?;
        let mut delta = delta;
        let mut shape = shape;
        if dim == 1 {
            delta[1] = 1.0;
            shape[1] = 1;
        }
        for j in 0..dim {
            if !(delta[j] > 0.0) || !delta[j].is_finite() {
                return Err(invalid(format!("reference spacing must be positive, got {}", delta[j])));
            }
            if shape[j] == 0 {
                return Err(invalid("reference lattice has no cells"));
            }
        }
        if mask.len() != shape[0] * shape[1] {
            return Err(invalid(format!(
                "mask has {} cells, lattice {}x{} needs {}",
                mask.len(),
                shape[0],
                shape[1],
                shape[0] * shape[1]
            )));
        }
        let count = mask.iter().filter(|&&b| b).count();
        if count == 0 {
            return Err(Error::EmptyRegion);
        }
        let mut hi = lo;
        for j in 0..dim {
            hi[j] = lo[j] + shape[j] as f64 * delta[j];
        }
        let bbox = BBox::new(dim, lo, hi)?;
        Ok(Self { bbox, delta, shape, mask, count })
    }

    /// Builds a region on `bbox` with spacing `delta`, keeping cells whose
    /// centre satisfies `keep`. The lattice covers the box to within one cell.
    pub fn from_fn(bbox: BBox, delta: Point, keep: impl Fn(Point) -> bool) -> Result<Self> {
        let mut shape = [1usize; 2];
        for j in 0..bbox.dim {
            if !(delta[j] > 0.0) {
                return Err(invalid(format!("reference spacing must be positive, got {}", delta[j])));
            }
            shape[j] = ((bbox.side(j) / delta[j]) - 1e-9).ceil().max(1.0) as usize;
        }
        let mut d = delta;
        if bbox.dim == 1 {
            d[1] = 1.0;
        }
        let mut mask = Vec::with_capacity(shape[0] * shape[1]);
        for ix in 0..shape[0] {
            for iy in 0..shape[1] {
                let c = [
                    bbox.lo[0] + (ix as f64 + 0.5) * d[0],
                    if bbox.dim == 2 { bbox.lo[1] + (iy as f64 + 0.5) * d[1] } else { 0.0 },
                ];
                mask.push(keep(c));
            }
        }
        Self::from_mask(bbox.dim, bbox.lo, d, shape, mask)
    }

    /// Full rectangle (or interval) region.
    pub fn rectangle(bbox: BBox, delta: Point) -> Result<Self> {
        Self::from_fn(bbox, delta, |_| true)
    }

    /// Default reference spacing: shorter side over 256, equal in every
    /// dimension.
    pub fn default_delta(bbox: &BBox) -> Point {
        let min_side = (0..bbox.dim).map(|j| bbox.side(j)).fold(f64::INFINITY, f64::min);
        let d = min_side / DEFAULT_CELLS_PER_SIDE as f64;
        [d, if bbox.dim == 2 { d } else { 1.0 }]
    }

    pub fn dim(&self) -> usize {
        self.bbox.dim
    }

    pub fn bbox(&self) -> &BBox {
        &self.bbox
    }

    pub fn delta(&self) -> Point {
        self.delta
    }

    /// Product of the reference spacings, the area of one cell.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.delta[j]).product()
    }

    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Number of cells inside the region.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn area(&self) -> f64 {
        self.count as f64 * self.cell_volume()
    }

    pub fn cell_center(&self, idx: usize) -> Point {
        let ix = idx / self.shape[1];
        let iy = idx % self.shape[1];
        let mut c = [self.bbox.lo[0] + (ix as f64 + 0.5) * self.delta[0], 0.0];
        if self.dim() == 2 {
            c[1] = self.bbox.lo[1] + (iy as f64 + 0.5) * self.delta[1];
        }
        c
    }

    /// Index of the reference cell containing `p`, if inside the bounding box.
    pub fn cell_of(&self, p: &Point) -> Option<usize> {
        if !self.bbox.contains(p) {
            return None;
        }
        let mut ij = [0usize; 2];
        for j in 0..self.dim() {
            let t = ((p[j] - self.bbox.lo[j]) / self.delta[j]).floor();
            ij[j] = (t.max(0.0) as usize).min(self.shape[j] - 1);
        }
        Some(ij[0] * self.shape[1] + ij[1])
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.cell_of(p).is_some_and(|i| self.mask[i])
    }

    /// Indices of the cells inside the region, in storage order.
    pub fn cells(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| self.mask[i]).collect()
    }

    /// Diameter of the bounding box along each axis.
    pub fn extent(&self) -> Point {
        [self.bbox.side(0), if self.dim() == 2 { self.bbox.side(1) } else { 0.0 }]
    }
}

/// How a process is observed: as a point pattern (continuous) or on a
/// regular grid `s + z∘Δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplingScheme {
    Continuous,
    Grid { dim: usize, spacing: Point, offset: Point },
}

impl SamplingScheme {
    pub fn grid(dim: usize, spacing: Point, offset: Point) -> Result<Self> {
        check_dim(dim)?;
        let (mut spacing, mut offset) = (spacing, offset);
        if dim == 1 {
            spacing[1] = 1.0;
            offset[1] = 0.0;
        }
        for j in 0..dim {
            if !(spacing[j] > 0.0) || !spacing[j].is_finite() {
                return Err(invalid(format!("grid spacing must be positive, got {}", spacing[j])));
            }
            if !offset[j].is_finite() {
                return Err(invalid("grid offset must be finite"));
            }
        }
        Ok(Self::Grid { dim, spacing, offset })
    }

    pub fn is_grid(&self) -> bool {
        matches!(self, Self::Grid { .. })
    }

    /// `∏Δ_j` for grids, 1 for continuous sampling.
    pub fn cell_volume(&self) -> f64 {
        match *self {
            Self::Continuous => 1.0,
            Self::Grid { dim, spacing, .. } => spacing[..dim].iter().product(),
        }
    }

    /// Grid nodes inside the region, as `(node location, integer index)`.
    /// Nodes are kept when they lie in the bounding box and their reference
    /// cell is masked in.
    pub fn nodes(&self, region: &Region) -> Result<Vec<(Point, [i64; 2])>> {
        let Self::Grid { dim, spacing, offset } = *self else {
            return Err(invalid("continuous sampling has no nodes"));
        };
        if dim != region.dim() {
            return Err(invalid("grid and region dimensions differ"));
        }
        let bb = region.bbox();
        let mut range = [(0i64, 0i64); 2];
        for j in 0..dim {
            let a = ((bb.lo[j] - offset[j]) / spacing[j]).ceil() as i64 - 1;
            let b = ((bb.hi[j] - offset[j]) / spacing[j]).floor() as i64 + 1;
            range[j] = (a, b);
        }
        let mut out = Vec::new();
        for zx in range[0].0..=range[0].1 {
            for zy in range[1].0..=range[1].1 {
                let u = [
                    offset[0] + zx as f64 * spacing[0],
                    if dim == 2 { offset[1] + zy as f64 * spacing[1] } else { 0.0 },
                ];
                if region.contains(&u) {
                    out.push((u, [zx, zy]));
                }
            }
        }
        Ok(out)
    }
}

/// Axis-aligned box in wavenumber space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KBox {
    pub dim: usize,
    pub lo: Point,
    pub hi: Point,
}

impl KBox {
    pub fn contains(&self, k: &Point) -> bool {
        (0..self.dim).all(|j| k[j] >= self.lo[j] && k[j] <= self.hi[j])
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|j| self.hi[j] - self.lo[j]).product()
    }

    /// Intersection of two boxes of equal dimension.
    pub fn intersect(&self, other: &KBox) -> KBox {
        let mut b = *self;
        for j in 0..self.dim {
            b.lo[j] = b.lo[j].max(other.lo[j]);
            b.hi[j] = b.hi[j].min(other.hi[j]);
        }
        b
    }
}

/// `∏[−1/(2Δ_j), 1/(2Δ_j)]`.
pub fn nyquist_box(scheme: &SamplingScheme) -> Result<KBox> {
    match *scheme {
        SamplingScheme::Continuous => Err(Error::NoNyquistBox),
        SamplingScheme::Grid { dim, spacing, .. } => {
            let mut lo = [0.0; 2];
            let mut hi = [0.0; 2];
            for j in 0..dim {
                hi[j] = 0.5 / spacing[j];
                lo[j] = -hi[j];
            }
            Ok(KBox { dim, lo, hi })
        }
    }
}

/// Alias lattice `Ψ` of a sampling scheme with its phase weight
/// `w(ψ) = e^{−2πi s·ψ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AliasStructure {
    pub dim: usize,
    /// Lattice generator per dimension; 0 means the lattice is `{0}` there.
    pub generators: Point,
    pub offset: Point,
}

impl AliasStructure {
    pub fn of(scheme: &SamplingScheme, dim: usize) -> Self {
        match *scheme {
            SamplingScheme::Continuous => Self { dim, generators: [0.0; 2], offset: [0.0; 2] },
            SamplingScheme::Grid { dim, spacing, offset } => {
                let mut g = [0.0; 2];
                for j in 0..dim {
                    g[j] = 1.0 / spacing[j];
                }
                Self { dim, generators: g, offset }
            }
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.generators[..self.dim].iter().all(|&g| g == 0.0)
    }

    pub fn phase(&self, psi: &Point) -> Complex64 {
        let dot: f64 = (0..self.dim).map(|j| self.offset[j] * psi[j]).sum();
        Complex64::from_polar(1.0, -2.0 * PI * dot)
    }

    /// Lattice point with integer coordinates `z`.
    pub fn point(&self, z: [i64; 2]) -> Point {
        [z[0] as f64 * self.generators[0], z[1] as f64 * self.generators[1]]
    }

    /// Intersection of the two lattices, with zero offset.
    pub fn intersect(&self, other: &AliasStructure) -> AliasStructure {
        let mut g = [0.0; 2];
        for j in 0..self.dim {
            let (a, b) = (self.generators[j], other.generators[j]);
            if a == 0.0 || b == 0.0 {
                continue;
            }
            if let Some((p, _q)) = rational_approx(b / a, RATIO_TOLERANCE, MAX_RATIO_DENOMINATOR) {
                g[j] = p as f64 * a;
            }
        }
        AliasStructure { dim: self.dim, generators: g, offset: [0.0; 2] }
    }
}

/// Lattice points with `‖ψ‖∞ ≤ radius`, each paired with its phase.
pub fn alias_set(scheme: &SamplingScheme, dim: usize, radius: f64) -> Vec<(Point, Complex64)> {
    let a = AliasStructure::of(scheme, dim);
    lattice_points(&a.generators, a.dim, radius)
        .into_iter()
        .map(|z| {
            let psi = a.point(z);
            (psi, a.phase(&psi))
        })
        .collect()
}

/// Integer coordinates of the lattice points generated by `gen` within the
/// sup-norm ball of `radius`.
pub fn lattice_points(gen: &Point, dim: usize, radius: f64) -> Vec<[i64; 2]> {
    let mut n = [0i64; 2];
    for j in 0..dim {
        if gen[j] > 0.0 {
            n[j] = (radius / gen[j] + 1e-12).floor() as i64;
        }
    }
    let mut out = Vec::new();
    for zx in -n[0]..=n[0] {
        for zy in -n[1]..=n[1] {
            out.push([zx, zy]);
        }
    }
    out
}

/// Best rational approximation `p/q` of `x > 0` with `q ≤ max_den`,
/// accepted only if within `tol` relative.
pub fn rational_approx(x: f64, tol: f64, max_den: u64) -> Option<(u64, u64)> {
    if !(x > 0.0) || !x.is_finite() {
        return None;
    }
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a > u32::MAX as f64 {
            break;
        }
        let a = a as u64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if ((h1 as f64 / k1 as f64) - x).abs() <= tol * x {
            return Some((h1, k1));
        }
        let frac = r - a as f64;
        if frac <= 0.0 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

/// `Ψ^a ∩ Ψ^b` as a product lattice.
///
/// Along dimension `j` the spacings satisfy `Δ^a/Δ^b = p/q` in lowest terms
/// and the intersection is generated by `p/Δ^a = q/Δ^b`. Irrational ratios
/// (no approximation with denominator ≤ 1000 within 1e-9) give `{0}`.
pub fn alias_intersection(a: &SamplingScheme, b: &SamplingScheme, dim: usize) -> AliasStructure {
    AliasStructure::of(a, dim).intersect(&AliasStructure::of(b, dim))
}

/// Ordered set of wavenumbers.
///
/// Regular grids are indexed row-major, `i = i0 * len[1] + i1`, with
/// `k_j = center_j + (i_j − (len_j − 1)/2)·step_j`, which makes negation exact
/// whenever the centre is zero.
#[derive(Debug, Clone, PartialEq)]
pub enum WavenumberGrid {
    Regular { dim: usize, center: Point, step: Point, len: [usize; 2] },
    Scattered { dim: usize, points: Vec<Point> },
}

impl WavenumberGrid {
    /// Regular grid centred on the origin.
    pub fn centered(dim: usize, step: Point, len: [usize; 2]) -> Result<Self> {
        Self::regular(dim, [0.0; 2], step, len)
    }

    pub fn regular(dim: usize, center: Point, step: Point, len: [usize; 2]) -> Result<Self> {
        check_dim(dim)?;
        let (mut center, mut step, mut len) = (center, step, len);
        if dim == 1 {
            center[1] = 0.0;
            step[1] = 0.0;
            len[1] = 1;
        }
        for j in 0..dim {
            if !(step[j] > 0.0) || len[j] == 0 {
                return Err(invalid("wavenumber grid needs positive step and length"));
            }
        }
        Ok(Self::Regular { dim, center, step, len })
    }

    /// Symmetric regular grid with the given step covering `kbox`.
    pub fn covering(kbox: &KBox, step: Point) -> Result<Self> {
        let mut len = [1usize; 2];
        for j in 0..kbox.dim {
            let half = kbox.hi[j].abs().min(kbox.lo[j].abs());
            len[j] = 2 * ((half / step[j]) * (1.0 + 1e-12)).floor() as usize + 1;
        }
        Self::centered(kbox.dim, step, len)
    }

    pub fn scattered(dim: usize, points: Vec<Point>) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::Scattered { dim, points })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Regular { dim, .. } | Self::Scattered { dim, .. } => *dim,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Regular { len, .. } => len[0] * len[1],
            Self::Scattered { points, .. } => points.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Wavenumbers along axis `j` of a regular grid.
    pub fn axis(&self, j: usize) -> Option<Vec<f64>> {
        match self {
            Self::Regular { center, step, len, .. } => {
                let h = (len[j] as f64 - 1.0) / 2.0;
                Some((0..len[j]).map(|i| center[j] + (i as f64 - h) * step[j]).collect())
            }
            Self::Scattered { .. } => None,
        }
    }

    pub fn point(&self, i: usize) -> Point {
        match self {
            Self::Regular { center, step, len, .. } => {
                let (i0, i1) = (i / len[1], i % len[1]);
                let h0 = (len[0] as f64 - 1.0) / 2.0;
                let h1 = (len[1] as f64 - 1.0) / 2.0;
                [center[0] + (i0 as f64 - h0) * step[0], center[1] + (i1 as f64 - h1) * step[1]]
            }
            Self::Scattered { points, .. } => points[i],
        }
    }

    pub fn points(&self) -> Vec<Point> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Index of `−k_i`, when present.
    pub fn negation_index(&self, i: usize) -> Option<usize> {
        match self {
            Self::Regular { center, len, .. } => {
                if center[0] != 0.0 || center[1] != 0.0 {
                    return None;
                }
                let (i0, i1) = (i / len[1], i % len[1]);
                Some((len[0] - 1 - i0) * len[1] + (len[1] - 1 - i1))
            }
            Self::Scattered { points, dim } => {
                let k = points[i];
                points.iter().position(|q| (0..*dim).all(|j| q[j] == -k[j]))
            }
        }
    }

    /// Whether every point has its negation in the grid.
    pub fn is_symmetric(&self) -> bool {
        (0..self.len()).all(|i| self.negation_index(i).is_some())
    }

    /// Points inside `kbox`, as a scattered grid.
    pub fn restrict(&self, kbox: &KBox) -> Self {
        let dim = self.dim();
        let points = self.points().into_iter().filter(|k| kbox.contains(k)).collect();
        Self::Scattered { dim, points }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1(d: f64, s: f64) -> SamplingScheme {
        SamplingScheme::grid(1, [d, 1.0], [s, 0.0]).unwrap()
    }

    fn g2(d: Point, s: Point) -> SamplingScheme {
        SamplingScheme::grid(2, d, s).unwrap()
    }

    #[test]
    fn nyquist_boxes() {
        let b = nyquist_box(&g2([5.0, 5.0], [0.0, 0.0])).unwrap();
        assert_eq!((b.lo, b.hi), ([-0.1, -0.1], [0.1, 0.1]));
        let b = nyquist_box(&g2([10.0, 15.0], [0.0, 0.0])).unwrap();
        assert_eq!(b.hi[0], 0.05);
        assert!((b.hi[1] - 1.0 / 30.0).abs() < 1e-15);
        let b = nyquist_box(&g1(1.0, 0.0)).unwrap();
        assert_eq!((b.lo[0], b.hi[0]), (-0.5, 0.5));
        assert!(matches!(nyquist_box(&SamplingScheme::Continuous), Err(Error::NoNyquistBox)));
    }

    #[test]
    fn alias_sets() {
        let s = alias_set(&SamplingScheme::Continuous, 2, 10.0);
        assert_eq!(s, vec![([0.0, 0.0], Complex64::new(1.0, 0.0))]);

        let s = alias_set(&g1(5.0, 0.0), 1, 0.45);
        let psi: Vec<f64> = s.iter().map(|p| p.0[0]).collect();
        let want = [-0.4, -0.2, 0.0, 0.2, 0.4];
        assert_eq!(psi.len(), 5);
        for (a, b) in psi.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(s.iter().all(|p| (p.1 - Complex64::new(1.0, 0.0)).norm() < 1e-15));

        let a = AliasStructure::of(&g1(5.0, 2.0), 1);
        let w = a.phase(&[0.2, 0.0]);
        let want = Complex64::from_polar(1.0, -2.0 * PI * 0.4);
        assert!((w - want).norm() < 1e-14);
    }

    #[test]
    fn intersections() {
        let i = alias_intersection(&g2([5.0, 5.0], [0.0; 2]), &g2([10.0, 15.0], [0.0, 3.0]), 2);
        assert!((i.generators[0] - 0.2).abs() < 1e-15);
        assert!((i.generators[1] - 0.2).abs() < 1e-15);
        let i = alias_intersection(&SamplingScheme::Continuous, &g1(5.0, 0.0), 1);
        assert!(i.is_trivial());
        let i = alias_intersection(&g1(1.0, 0.0), &g1(2f64.sqrt(), 0.0), 1);
        assert!(i.is_trivial());
    }

    #[test]
    fn rational_approximations() {
        assert_eq!(rational_approx(0.5, 1e-9, 1000), Some((1, 2)));
        assert_eq!(rational_approx(2.0 / 3.0, 1e-9, 1000), Some((2, 3)));
        assert_eq!(rational_approx(7.0, 1e-9, 1000), Some((7, 1)));
        assert_eq!(rational_approx(std::f64::consts::PI, 1e-9, 1000), None);
    }

    #[test]
    fn region_area_and_cells() {
        let bb = BBox::new(2, [0.0, 0.0], [10.0, 4.0]).unwrap();
        let r = Region::rectangle(bb, [1.0, 1.0]).unwrap();
        assert_eq!(r.shape(), [10, 4]);
        assert_eq!(r.area(), 40.0);
        let r = Region::from_fn(bb, [1.0, 1.0], |c| c[0] < 5.0).unwrap();
        assert_eq!(r.area(), 20.0);
        assert!(r.contains(&[4.9, 1.0]));
        assert!(!r.contains(&[5.1, 1.0]));
        assert!(!r.contains(&[-0.1, 1.0]));
        assert!(matches!(Region::from_fn(bb, [1.0, 1.0], |_| false), Err(Error::EmptyRegion)));
        let d = Region::default_delta(&bb);
        assert_eq!(d, [4.0 / 256.0, 4.0 / 256.0]);
    }

    #[test]
    fn grid_nodes_respect_mask() {
        let bb = BBox::new(2, [0.0, 0.0], [20.0, 10.0]).unwrap();
        let r = Region::rectangle(bb, [1.0, 1.0]).unwrap();
        let n = g2([5.0, 5.0], [0.0, 0.0]).nodes(&r).unwrap();
        assert_eq!(n.len(), 4 * 2);
        let n = g2([10.0, 15.0], [0.0, 3.0]).nodes(&r).unwrap();
        assert_eq!(n.len(), 2);
    }

    #[test]
    fn wavenumber_grid_symmetry() {
        let g = WavenumberGrid::centered(2, [0.1, 0.2], [5, 4]).unwrap();
        assert!(g.is_symmetric());
        for i in 0..g.len() {
            let j = g.negation_index(i).unwrap();
            let (a, b) = (g.point(i), g.point(j));
            assert_eq!(a[0], -b[0]);
            assert_eq!(a[1], -b[1]);
        }
        let g = WavenumberGrid::regular(1, [0.3, 0.0], [0.1, 0.0], [5, 1]).unwrap();
        assert!(!g.is_symmetric());
        let nb = nyquist_box(&g2([5.0, 5.0], [0.0; 2])).unwrap();
        let c = WavenumberGrid::covering(&nb, [0.01, 0.01]).unwrap();
        assert_eq!(c.len(), 21 * 21);
    }
}
