//! CSV and JSON formats of regions, data, tapers and estimates.

use crate::config::{point, read_json, resolve, spacing, BBoxSpec, RegionRef, RegionSpec, SchemeSpec};
use crate::error::{config_err, CliResult};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spatspec_core::fourier::{GriddedField, PointPattern};
use spatspec_core::geometry::{BBox, Region, SamplingScheme};
use spatspec_core::tapers::TaperFamily;
use spatspec_core::Point;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Shortest exact text for `x`: 17 significant digits.
pub fn fmt(x: f64) -> String {
    format!("{:.16e}", x + 0.0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_hash(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Hash of a region's lattice and mask.
pub fn region_hash(r: &Region) -> String {
    let mut h = Sha256::new();
    h.update((r.dim() as u64).to_le_bytes());
    for x in [r.bbox().lo, r.delta()].iter().flatten() {
        h.update(x.to_bits().to_le_bytes());
    }
    for s in r.shape() {
        h.update((s as u64).to_le_bytes());
    }
    h.update(r.mask().iter().map(|&b| b as u8).collect::<Vec<_>>());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Loads a region given inline or by path; relative paths follow `base`.
pub fn load_region(r: &RegionRef, base: &Path) -> CliResult<Region> {
    match r {
        RegionRef::Path(p) => {
            let path = resolve(base, p);
            let spec: RegionSpec = read_json(&path)?;
            region_from_spec(&spec, &path)
        }
        RegionRef::Inline(spec) => region_from_spec(spec, base),
    }
}

pub fn region_from_spec(spec: &RegionSpec, base: &Path) -> CliResult<Region> {
    let dim = spec.dim;
    let lo = point(&spec.bbox.lo, dim, "bbox lo")?;
    let hi = point(&spec.bbox.hi, dim, "bbox hi")?;
    let bbox = BBox::new(dim, lo, hi)?;
    let delta = match &spec.delta_ref {
        Some(d) => spacing(d, dim, "delta_ref")?,
        None => Region::default_delta(&bbox),
    };
    match &spec.mask {
        None => Ok(Region::rectangle(bbox, delta)?),
        Some(m) => {
            let (shape, mask) = read_mask(&resolve(base, m), dim)?;
            let region = Region::from_mask(dim, lo, delta, shape, mask)?;
            for j in 0..dim {
                if (region.bbox().hi[j] - hi[j]).abs() >= delta[j] {
                    return Err(config_err(format!(
                        "mask covers {} along axis {j} but the bounding box ends at {}",
                        region.bbox().hi[j],
                        hi[j]
                    )));
                }
            }
            Ok(region)
        }
    }
}

/// Mask CSV: one line per first-axis index, one 0/1 entry per second-axis
/// index (a single entry per line in one dimension).
pub fn read_mask(path: &Path, dim: usize) -> CliResult<([usize; 2], Vec<bool>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
    let mut mask = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec?;
        if width.is_some_and(|w| w != rec.len()) {
            return Err(config_err(format!("{}: ragged mask row {}", path.display(), rows + 1)));
        }
        width = Some(rec.len());
        for v in rec.iter() {
            mask.push(match v {
                "0" => false,
                "1" => true,
                _ => return Err(config_err(format!("{}: mask entries must be 0 or 1, got {v:?}", path.display()))),
            });
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| config_err(format!("{}: empty mask", path.display())))?;
    if dim == 1 && width != 1 {
        return Err(config_err("a one-dimensional mask has one entry per line"));
    }
    Ok(([rows, width], mask))
}

pub fn write_mask(path: &Path, region: &Region) -> CliResult<()> {
    let [n0, n1] = region.shape();
    let mut out = String::with_capacity(2 * n0 * n1);
    for ix in 0..n0 {
        let row: Vec<&str> = (0..n1).map(|iy| if region.mask()[ix * n1 + iy] { "1" } else { "0" }).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(fs::write(path, out)?)
}

pub fn region_spec(region: &Region, mask: Option<PathBuf>) -> RegionSpec {
    let dim = region.dim();
    RegionSpec {
        dim,
        bbox: BBoxSpec { lo: region.bbox().lo[..dim].to_vec(), hi: region.bbox().hi[..dim].to_vec() },
        delta_ref: Some(region.delta()[..dim].to_vec()),
        mask,
    }
}

fn float(s: &str, path: &Path, line: usize) -> CliResult<f64> {
    s.trim()
        .parse()
        .map_err(|_| config_err(format!("{}:{line}: cannot parse {s:?} as a number", path.display())))
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

/// Point CSV with header `x[,y][,mark]`.
pub fn read_points(path: &Path, dim: usize) -> CliResult<PointPattern> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let cx = column(&headers, "x").ok_or_else(|| config_err(format!("{}: no x column", path.display())))?;
    let cy = if dim == 2 {
        Some(column(&headers, "y").ok_or_else(|| config_err(format!("{}: no y column", path.display())))?)
    } else {
        None
    };
    let cm = column(&headers, "mark");
    let mut locations = Vec::new();
    let mut marks = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = n + 2;
        let x = float(&rec[cx], path, line)?;
        let y = match cy {
            Some(c) => float(&rec[c], path, line)?,
            None => 0.0,
        };
        locations.push([x, y]);
        if let Some(c) = cm {
            marks.push(float(&rec[c], path, line)?);
        }
    }
    Ok(PointPattern::new(locations, cm.map(|_| marks))?)
}

pub fn write_points(path: &Path, p: &PointPattern, dim: usize) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["x"];
    if dim == 2 {
        header.push("y");
    }
    if p.marks.is_some() {
        header.push("mark");
    }
    w.write_record(&header)?;
    for (i, x) in p.locations.iter().enumerate() {
        let mut row = vec![fmt(x[0])];
        if dim == 2 {
            row.push(fmt(x[1]));
        }
        if p.marks.is_some() {
            row.push(fmt(p.mark(i)));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// JSON header of a gridded field CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldHeader {
    pub dim: usize,
    pub scheme: SchemeSpec,
}

/// The header path next to a field CSV: `name.csv` → `name.json`.
pub fn field_header_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Field CSV with header `ix[,iy],value`; node `z` sits at `s + z∘Δ`.
pub fn read_field(path: &Path, scheme: &SamplingScheme, region: &Region) -> CliResult<GriddedField> {
    let dim = region.dim();
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let need = |name: &str| column(&headers, name).ok_or_else(|| config_err(format!("{}: no {name} column", path.display())));
    let cx = need("ix")?;
    let cy = if dim == 2 { Some(need("iy")?) } else { None };
    let cv = need("value")?;
    let mut entries = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let int = |c: usize| {
            rec[c].trim().parse::<i64>().map_err(|_| {
                config_err(format!("{}:{}: cannot parse {:?} as an index", path.display(), n + 2, &rec[c]))
            })
        };
        let z = [int(cx)?, match cy {
            Some(c) => int(c)?,
            None => 0,
        }];
        entries.push((z, float(&rec[cv], path, n + 2)?));
    }
    Ok(GriddedField::from_indexed(scheme, region, &entries)?)
}

pub fn write_field(path: &Path, f: &GriddedField, dim: usize) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(if dim == 2 { &["ix", "iy", "value"][..] } else { &["ix", "value"][..] })?;
    for (z, v) in f.nodes.index.iter().zip(&f.values) {
        let mut row = vec![z[0].to_string()];
        if dim == 2 {
            row.push(z[1].to_string());
        }
        row.push(fmt(*v));
        w.write_record(&row)?;
    }
    w.flush()?;
    let header = FieldHeader {
        dim,
        scheme: SchemeSpec::from_scheme(f.scheme()).ok_or_else(|| config_err("field without a grid"))?,
    };
    write_json(&field_header_path(path), &header)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(fs::write(path, text)?)
}

/// Metadata of a stored taper family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaperMetadata {
    pub bandwidth: f64,
    pub count: usize,
    pub concentrations: Vec<f64>,
    /// Factor taking the stored unit-norm node values to the continuous
    /// taper, whose square integrates to one.
    pub scale: f64,
    pub dim: usize,
    pub delta_ref: Vec<f64>,
    pub bbox: BBoxSpec,
    pub shape: Vec<usize>,
    pub region_hash: String,
    pub files: Vec<String>,
}

/// Writes `metadata.json`, `mask.csv` and `taper_NNN.csv` (lattice values,
/// one line per first-axis index).
pub fn write_tapers(dir: &Path, family: &TaperFamily) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    let region = family.region();
    let [n0, n1] = region.shape();
    let mut files = Vec::with_capacity(family.len());
    for m in 0..family.len() {
        let name = format!("taper_{m:03}.csv");
        let v = family.values(m);
        let mut out = fs::File::create(dir.join(&name))?;
        for ix in 0..n0 {
            let row: Vec<String> = (0..n1).map(|iy| fmt(v[ix * n1 + iy])).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        files.push(name);
    }
    write_mask(&dir.join("mask.csv"), region)?;
    let dim = region.dim();
    let spec = region_spec(region, None);
    let meta = TaperMetadata {
        bandwidth: family.bandwidth(),
        count: family.len(),
        concentrations: family.concentrations().to_vec(),
        scale: family.norm_scale(),
        dim,
        delta_ref: region.delta()[..dim].to_vec(),
        bbox: spec.bbox,
        shape: region.shape()[..dim].to_vec(),
        region_hash: region_hash(region),
        files,
    };
    write_json(&dir.join("metadata.json"), &meta)
}

pub fn read_tapers(dir: &Path) -> CliResult<TaperFamily> {
    let meta: TaperMetadata = read_json(&dir.join("metadata.json"))?;
    let dim = meta.dim;
    let (shape, mask) = read_mask(&dir.join("mask.csv"), dim)?;
    let lo: Point = point(&meta.bbox.lo, dim, "bbox lo")?;
    let region = Region::from_mask(dim, lo, spacing(&meta.delta_ref, dim, "delta_ref")?, shape, mask)?;
    if region_hash(&region) != meta.region_hash {
        return Err(config_err(format!("{}: mask does not match the recorded region hash", dir.display())));
    }
    let mut values = Vec::with_capacity(meta.count);
    for name in &meta.files {
        let path = dir.join(name);
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(&path)?;
        let mut v = Vec::with_capacity(region.len());
        for (n, rec) in rdr.records().enumerate() {
            for s in rec?.iter() {
                v.push(float(s, &path, n + 1)?);
            }
        }
        values.push(v);
    }
    Ok(TaperFamily::from_parts(region, meta.bandwidth, values, meta.concentrations)?)
}
