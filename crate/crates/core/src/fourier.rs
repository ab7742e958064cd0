//! Mean-corrected tapered Fourier transforms of point patterns and gridded
//! fields.

use crate::dft::{lattice_dft, points_dft, DftMethod};
use crate::error::{invalid, Error, Result};
use crate::geometry::{Region, SamplingScheme, WavenumberGrid};
use crate::tapers::{GridNodes, SampledTaper, TaperFamily, TransferFunction};
use crate::{Complex64, Point};

/// Points with optional real marks; unmarked points weigh one.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    pub locations: Vec<Point>,
    pub marks: Option<Vec<f64>>,
}

impl PointPattern {
    pub fn new(locations: Vec<Point>, marks: Option<Vec<f64>>) -> Result<Self> {
        if let Some(m) = &marks {
            if m.len() != locations.len() {
                return Err(invalid("marks and locations differ in length"));
            }
        }
        Ok(Self { locations, marks })
    }

    pub fn unmarked(locations: Vec<Point>) -> Self {
        Self { locations, marks: None }
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn mark(&self, i: usize) -> f64 {
        self.marks.as_ref().map_or(1.0, |m| m[i])
    }

    /// Fails when a point lies outside the region mask.
    pub fn check_inside(&self, region: &Region) -> Result<()> {
        match self.locations.iter().position(|x| !region.contains(x)) {
            Some(i) => Err(invalid(format!("point {i} at {:?} lies outside the region", self.locations[i]))),
            None => Ok(()),
        }
    }
}

/// Values of a random field at the grid nodes inside a region.
#[derive(Debug, Clone)]
pub struct GriddedField {
    pub nodes: GridNodes,
    pub values: Vec<f64>,
}

impl GriddedField {
    /// `values` follow the node order of [`GridNodes::new`].
    pub fn new(scheme: &SamplingScheme, region: &Region, values: Vec<f64>) -> Result<Self> {
        let nodes = GridNodes::new(scheme, region)?;
        if values.len() != nodes.len() {
            return Err(invalid(format!("field has {} values for {} nodes", values.len(), nodes.len())));
        }
        Ok(Self { nodes, values })
    }

    /// Builds a field from `(z, value)` pairs, which must cover the grid
    /// nodes inside the region exactly once.
    pub fn from_indexed(scheme: &SamplingScheme, region: &Region, entries: &[([i64; 2], f64)]) -> Result<Self> {
        let nodes = GridNodes::new(scheme, region)?;
        let lookup: std::collections::HashMap<[i64; 2], usize> =
            nodes.index.iter().enumerate().map(|(i, z)| (*z, i)).collect();
        let mut values = vec![f64::NAN; nodes.len()];
        for (z, v) in entries {
            let i = *lookup
                .get(z)
                .ok_or_else(|| invalid(format!("grid index {z:?} is not a node inside the region")))?;
            if !values[i].is_nan() {
                return Err(invalid(format!("grid index {z:?} appears twice")));
            }
            values[i] = *v;
        }
        if let Some(i) = values.iter().position(|v| v.is_nan()) {
            return Err(invalid(format!("grid node {:?} has no value", nodes.index[i])));
        }
        Ok(Self { nodes, values })
    }

    pub fn scheme(&self) -> &SamplingScheme {
        &self.nodes.scheme
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One observed process.
#[derive(Debug, Clone)]
pub enum Process {
    Points(PointPattern),
    Field(GriddedField),
}

impl Process {
    pub fn scheme(&self) -> SamplingScheme {
        match self {
            Self::Points(_) => SamplingScheme::Continuous,
            Self::Field(f) => f.nodes.scheme,
        }
    }
}

/// Several processes observed on one region.
#[derive(Debug, Clone)]
pub struct SpatialDataset {
    pub region: Region,
    pub processes: Vec<Process>,
    pub labels: Vec<String>,
}

impl SpatialDataset {
    pub fn new(region: Region, processes: Vec<Process>, labels: Vec<String>) -> Result<Self> {
        if processes.len() != labels.len() {
            return Err(invalid("one label per process is required"));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if !seen.insert(l) {
                return Err(invalid(format!("duplicate process label {l:?}")));
            }
        }
        Ok(Self { region, processes, labels })
    }

    pub fn len(&self) -> usize {
        self.processes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.processes.is_empty()
    }
}

/// `Σ W(x) / ℓ(R)` for points, the node average for fields.
pub fn intensity_estimate(process: &Process, region: &Region) -> Result<f64> {
    match process {
        Process::Points(p) => {
            let s: f64 = (0..p.len()).map(|i| p.mark(i)).sum();
            Ok(s / region.area())
        }
        Process::Field(f) => {
            if f.is_empty() {
                return Err(Error::NoGridNodes);
            }
            Ok(f.values.iter().sum::<f64>() / f.len() as f64)
        }
    }
}

/// Tapered Fourier transform of one process with one taper.
#[derive(Debug, Clone)]
pub struct TaperedDft {
    pub grid: WavenumberGrid,
    pub values: Vec<Complex64>,
    pub taper_index: usize,
    pub process_index: usize,
    pub lambda_hat: f64,
}

/// `J_m(k) = Σ_x h_m(x) W(x) e^{−2πi x·k} − λ̂ H_m(k)` for every taper.
///
/// `transfer` holds the continuous transfer functions on `kgrid`; they are
/// computed when absent.
pub fn tapered_dft_points(
    pattern: &PointPattern,
    family: &TaperFamily,
    kgrid: &WavenumberGrid,
    lambda_hat: f64,
    transfer: Option<&[TransferFunction]>,
    method: DftMethod,
) -> Result<Vec<TaperedDft>> {
    let m = family.len();
    let weights: Vec<Vec<f64>> = (0..m)
        .map(|t| {
            pattern
                .locations
                .iter()
                .enumerate()
                .map(|(i, x)| family.interpolated_value(t, x) * pattern.mark(i))
                .collect()
        })
        .collect();
    let refs: Vec<&[f64]> = weights.iter().map(|w| w.as_slice()).collect();
    let sums = points_dft(&pattern.locations, &refs, kgrid, method)?;
    let owned;
    let tf = match transfer {
        Some(t) => t,
        None if lambda_hat != 0.0 => {
            owned = family.transfer_functions(kgrid)?;
            &owned[..]
        }
        None => &[],
    };
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(t, mut v)| {
            if lambda_hat != 0.0 {
                for (z, h) in v.iter_mut().zip(&tf[t].values) {
                    *z -= h * lambda_hat;
                }
            }
            TaperedDft { grid: kgrid.clone(), values: v, taper_index: t, process_index: 0, lambda_hat }
        })
        .collect())
}

/// `J_m(k) = ∏Δ_j Σ_u h_m(u)(Y(u) − λ̂) e^{−2πi u·k}` for each sampled taper.
/// The mean is removed before transforming.
pub fn tapered_dft_field(
    field: &GriddedField,
    tapers: &[SampledTaper],
    kgrid: &WavenumberGrid,
    lambda_hat: f64,
    method: DftMethod,
) -> Result<Vec<TaperedDft>> {
    for t in tapers {
        if t.scheme() != field.scheme() || t.nodes.len() != field.len() {
            return Err(Error::SchemeMismatch);
        }
    }
    let centred: Vec<f64> = field.values.iter().map(|y| y - lambda_hat).collect();
    let embedded: Vec<Vec<f64>> = tapers
        .iter()
        .map(|t| {
            let prod: Vec<f64> = t.weights.iter().zip(&centred).map(|(h, y)| h * y).collect();
            field.nodes.embed(&prod)
        })
        .collect();
    let refs: Vec<&[f64]> = embedded.iter().map(|v| v.as_slice()).collect();
    let sums = lattice_dft(&field.nodes.lattice, &refs, kgrid, method)?;
    let scale = field.scheme().cell_volume();
    Ok(sums
        .into_iter()
        .zip(tapers)
        .map(|(mut v, t)| {
            v.iter_mut().for_each(|z| *z *= scale);
            TaperedDft { grid: kgrid.clone(), values: v, taper_index: t.index, process_index: 0, lambda_hat }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use crate::linalg::Selection;
    use crate::tapers::{compute_tapers, TaperOptions};
    use std::f64::consts::PI;

    fn setup() -> (Region, TaperFamily) {
        let r = Region::rectangle(BBox::new(2, [0.0, 0.0], [20.0, 10.0]).unwrap(), [1.0, 1.0]).unwrap();
        let f = compute_tapers(&r, 0.15, TaperOptions { selection: Selection::Count(3), ..Default::default() }).unwrap();
        (r, f)
    }

    #[test]
    fn intensity_estimates() {
        let r = Region::rectangle(BBox::new(2, [0.0, 0.0], [5.0, 2.0]).unwrap(), [1.0, 1.0]).unwrap();
        let p = Process::Points(PointPattern::unmarked(vec![[1.0, 1.0]; 3]));
        assert!((intensity_estimate(&p, &r).unwrap() - 0.3).abs() < 1e-15);
        let r2 = Region::rectangle(BBox::new(2, [0.0, 0.0], [2.0, 1.0]).unwrap(), [1.0, 1.0]).unwrap();
        let p = Process::Points(PointPattern::new(vec![[0.5, 0.5]; 2], Some(vec![2.0, 4.0])).unwrap());
        assert_eq!(intensity_estimate(&p, &r2).unwrap(), 3.0);
        let g = SamplingScheme::grid(2, [2.0, 10.0], [0.5, 0.5]).unwrap();
        let f = GriddedField::new(&g, &r, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(intensity_estimate(&Process::Field(f), &r).unwrap(), 2.0);
    }

    #[test]
    fn point_transform_simple_cases() {
        let (_, f) = setup();
        let kg = WavenumberGrid::centered(2, [0.05, 0.05], [5, 5]).unwrap();
        let empty = PointPattern::unmarked(vec![]);
        let j = tapered_dft_points(&empty, &f, &kg, 0.0, None, DftMethod::Auto).unwrap();
        assert!(j.iter().all(|t| t.values.iter().all(|z| z.norm() == 0.0)));
        let x0 = [7.3, 4.1];
        let one = PointPattern::unmarked(vec![x0]);
        let j = tapered_dft_points(&one, &f, &kg, 0.0, None, DftMethod::Auto).unwrap();
        for (i, z) in j[1].values.iter().enumerate() {
            let k = kg.point(i);
            let want = Complex64::from_polar(f.interpolated_value(1, &x0), -2.0 * PI * (x0[0] * k[0] + x0[1] * k[1]));
            assert!((z - want).norm() < 1e-14);
        }
    }

    #[test]
    fn field_transform_simple_cases() {
        let (r, f) = setup();
        let g = SamplingScheme::grid(2, [2.0, 2.0], [0.5, 1.0]).unwrap();
        let st = f.sample_all(&g).unwrap();
        let kg = WavenumberGrid::centered(2, [0.03, 0.04], [7, 6]).unwrap();
        let n = st[0].nodes.len();
        let c = GriddedField::new(&g, &r, vec![2.5; n]).unwrap();
        let j = tapered_dft_field(&c, &st, &kg, 2.5, DftMethod::Auto).unwrap();
        assert!(j.iter().all(|t| t.values.iter().all(|z| z.norm() == 0.0)));
        let mut vals = vec![0.0; n];
        vals[5] = 1.7;
        let u0 = st[0].nodes.points[5];
        let y = GriddedField::new(&g, &r, vals).unwrap();
        let j = tapered_dft_field(&y, &st, &kg, 0.0, DftMethod::Auto).unwrap();
        for (i, z) in j[0].values.iter().enumerate() {
            let k = kg.point(i);
            let want = Complex64::from_polar(4.0 * st[0].weights[5] * 1.7, -2.0 * PI * (u0[0] * k[0] + u0[1] * k[1]));
            assert!((z - want).norm() < 1e-13);
        }
    }

    #[test]
    fn indexed_fields_must_cover_nodes() {
        let r = Region::rectangle(BBox::new(1, [0.0, 0.0], [10.0, 0.0]).unwrap(), [1.0, 1.0]).unwrap();
        let g = SamplingScheme::grid(1, [5.0, 1.0], [0.0, 0.0]).unwrap();
        assert!(GriddedField::from_indexed(&g, &r, &[([0, 0], 1.0), ([1, 0], 2.0)]).is_ok());
        assert!(GriddedField::from_indexed(&g, &r, &[([0, 0], 1.0)]).is_err());
        assert!(GriddedField::from_indexed(&g, &r, &[([0, 0], 1.0), ([1, 0], 2.0), ([2, 0], 3.0)]).is_err());
    }
}
