//! The `tapers`, `simulate` and `estimate` subcommands.

use crate::config::{read_json, resolve, truth_table, ModelFile, ModelSpec, ProcessSpec, RunConfig};
use crate::error::{config_err, CliResult};
use crate::io::{
    field_header_path, file_hash, fmt, load_region, read_field, read_points, read_tapers, region_hash, region_spec,
    sha256_hex, write_field, write_json, write_mask, write_points, write_tapers, FieldHeader,
};
use serde::Serialize;
use serde_json::json;
use spatspec_core::estimator::{coherence_and_delay, fit_group_delay, multitaper_estimate, EstimateConfig};
use spatspec_core::fourier::{Process, SpatialDataset};
use spatspec_core::geometry::{nyquist_box, KBox, Region, WavenumberGrid};
use spatspec_core::linalg::Selection;
use spatspec_core::models::{lgcp_intensity, ModelConfig, TrueSpectrum};
use spatspec_core::tapers::{compute_tapers, TaperFamily, TaperOptions};
use spatspec_core::{Complex64, Point};
use std::fs;
use std::path::{Path, PathBuf};

pub fn cmd_tapers(region: &Path, bandwidth: f64, selection: Selection, out: &Path) -> CliResult<TaperFamily> {
    let spec: crate::config::RegionSpec = read_json(region)?;
    let r = crate::io::region_from_spec(&spec, region)?;
    let family = compute_tapers(&r, bandwidth, TaperOptions { selection, ..Default::default() })?;
    write_tapers(out, &family)?;
    log::info!("wrote {} tapers to {}", family.len(), out.display());
    Ok(family)
}

/// Parses the model named on the command line from a model file.
pub fn load_model(name: &str, file: &ModelFile) -> CliResult<ModelSpec> {
    let mut params = file.params.clone();
    let name = name.replace('-', "_");
    if let Some(t) = params.get("type") {
        if t.as_str() != Some(name.as_str()) {
            return Err(config_err(format!("model file describes {t}, command line asks for {name:?}")));
        }
    }
    params.insert("type".into(), json!(name));
    serde_json::from_value(serde_json::Value::Object(params)).map_err(|e| config_err(format!("model parameters: {e}")))
}

/// Intensities of each process of a model.
pub fn model_intensities(model: &ModelConfig) -> Vec<f64> {
    match *model {
        ModelConfig::Poisson { lambda } => vec![lambda],
        ModelConfig::MarkedPoisson { lambda, mark_mean, .. } => vec![lambda * mark_mean],
        ModelConfig::ShiftedPair { lambda, .. } => vec![lambda, lambda],
        ModelConfig::Lgcp { mu, matern, .. } => vec![mu, lgcp_intensity(mu, &matern)],
        ModelConfig::Colocation { .. } => vec![0.0, 0.0],
    }
}

fn k_columns(dim: usize) -> Vec<&'static str> {
    if dim == 2 {
        vec!["kx", "ky"]
    } else {
        vec!["kx"]
    }
}

fn k_fields(k: &Point, dim: usize) -> Vec<String> {
    k[..dim].iter().map(|x| fmt(*x)).collect()
}

fn write_truth(path: &Path, truth: &TrueSpectrum, labels: &[String], kg: &WavenumberGrid) -> CliResult<()> {
    let dim = kg.dim();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = k_columns(dim);
    header.extend(["p", "q", "re", "im"]);
    w.write_record(&header)?;
    for i in 0..kg.len() {
        let k = kg.point(i);
        for p in 0..truth.p {
            for q in 0..truth.p {
                let v = truth.entry(p, q).value(&k);
                let mut row = k_fields(&k, dim);
                row.extend([labels[p].clone(), labels[q].clone(), fmt(v.re), fmt(v.im)]);
                w.write_record(&row)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes every process of `data` as `<label>.csv`, plus the region.
fn write_dataset(out: &Path, data: &SpatialDataset) -> CliResult<Vec<ProcessSpec>> {
    let dim = data.region.dim();
    write_mask(&out.join("mask.csv"), &data.region)?;
    write_json(&out.join("region.json"), &region_spec(&data.region, Some("mask.csv".into())))?;
    let mut specs = Vec::new();
    for (label, process) in data.labels.iter().zip(&data.processes) {
        let name = format!("{label}.csv");
        let path = out.join(&name);
        match process {
            Process::Points(p) => {
                write_points(&path, p, dim)?;
                specs.push(ProcessSpec::Points { label: label.clone(), path: name.into(), lambda: None });
            }
            Process::Field(f) => {
                write_field(&path, f, dim)?;
                specs.push(ProcessSpec::Field { label: label.clone(), path: name.into(), scheme: None, lambda: None });
            }
        }
    }
    Ok(specs)
}

pub fn cmd_simulate(model_name: &str, config: &Path, seed: u64, out: &Path, truth: bool) -> CliResult<()> {
    let file: ModelFile = read_json(config)?;
    let spec = load_model(model_name, &file)?;
    let region = load_region(&file.region, config)?;
    let dim = region.dim();
    let model = spec.model(dim)?;
    let data = model.simulate(&region, seed)?;
    fs::create_dir_all(out)?;
    let processes = write_dataset(out, &data)?;
    write_json(
        &out.join("simulation.json"),
        &json!({
            "model": spec,
            "seed": seed,
            "labels": data.labels,
            "intensities": model_intensities(&model),
            "processes": processes,
            "counts": data.processes.iter().map(|p| match p {
                Process::Points(p) => p.len(),
                Process::Field(f) => f.len(),
            }).collect::<Vec<_>>(),
        }),
    )?;
    if truth {
        let kspec = file.kgrid.as_ref().ok_or_else(|| config_err("--truth needs a \"kgrid\" entry in the model file"))?;
        let kg = kspec.grid(dim)?;
        let t = model.true_spectrum(dim, truth_table(&kg));
        write_truth(&out.join("truth.csv"), &t, &data.labels, &kg)?;
    }
    Ok(())
}

/// Everything `estimate` reads, with content hashes for provenance.
struct Inputs {
    data: SpatialDataset,
    oracle: Option<Vec<f64>>,
    hashes: Vec<(String, String)>,
}

fn load_inputs(cfg: &RunConfig, path: &Path, region: Region) -> CliResult<Inputs> {
    let dim = region.dim();
    let mut hashes = Vec::new();
    if cfg.processes.is_empty() {
        let spec = cfg.model.as_ref().ok_or_else(|| config_err("the run needs either processes or a model"))?;
        let model = spec.model(dim)?;
        let data = model.simulate(&region, cfg.seed)?;
        return Ok(Inputs { data, oracle: Some(model_intensities(&model)), hashes });
    }
    if cfg.model.is_some() {
        return Err(config_err("give either processes or a model, not both"));
    }
    let mut processes = Vec::new();
    let mut labels = Vec::new();
    for p in &cfg.processes {
        match p {
            ProcessSpec::Points { label, path: file, .. } => {
                let file = resolve(path, file);
                hashes.push((file.display().to_string(), file_hash(&file)?));
                processes.push(Process::Points(read_points(&file, dim)?));
                labels.push(label.clone());
            }
            ProcessSpec::Field { label, path: file, scheme, .. } => {
                let file = resolve(path, file);
                let scheme = match scheme {
                    Some(s) => s.scheme(dim)?,
                    None => {
                        let header_path = field_header_path(&file);
                        let h: FieldHeader = read_json(&header_path)?;
                        if h.dim != dim {
                            return Err(config_err(format!("{}: dimension {} differs from the region", header_path.display(), h.dim)));
                        }
                        hashes.push((header_path.display().to_string(), file_hash(&header_path)?));
                        h.scheme.scheme(dim)?
                    }
                };
                hashes.push((file.display().to_string(), file_hash(&file)?));
                processes.push(Process::Field(read_field(&file, &scheme, &region)?));
                labels.push(label.clone());
            }
        }
    }
    for (i, p) in processes.iter().enumerate() {
        if let Process::Points(pat) = p {
            pat.check_inside(&region).map_err(|e| config_err(format!("process {:?}: {e}", labels[i])))?;
        }
    }
    Ok(Inputs { data: SpatialDataset::new(region, processes, labels)?, oracle: None, hashes })
}

fn intensity_overrides(cfg: &RunConfig, inputs: &Inputs) -> CliResult<Vec<Option<f64>>> {
    let n = inputs.data.len();
    let mut out = vec![None; n];
    for (i, p) in cfg.processes.iter().enumerate() {
        out[i] = match p {
            ProcessSpec::Points { lambda, .. } | ProcessSpec::Field { lambda, .. } => *lambda,
        };
    }
    if cfg.flags.oracle_lambda {
        for i in 0..n {
            if out[i].is_none() {
                out[i] = match &inputs.oracle {
                    Some(l) => Some(l[i]),
                    None => {
                        return Err(config_err(format!(
                            "oracle_lambda needs a known intensity for process {:?}",
                            inputs.data.labels[i]
                        )))
                    }
                };
            }
        }
    }
    Ok(out)
}

fn taper_family(cfg: &RunConfig, path: &Path, region: &Region) -> CliResult<(TaperFamily, Option<(String, String)>)> {
    match &cfg.taper.dir {
        Some(dir) => {
            let dir = resolve(path, dir);
            let family = read_tapers(&dir)?;
            if region_hash(family.region()) != region_hash(region) {
                return Err(config_err(format!("taper family in {} was built for a different region", dir.display())));
            }
            if let Some(b) = cfg.taper.bandwidth {
                if b != family.bandwidth() {
                    return Err(config_err(format!("taper family has bandwidth {}, config asks for {b}", family.bandwidth())));
                }
            }
            let mut family = family;
            if let Some(m) = cfg.taper.count {
                if m > family.len() {
                    return Err(config_err(format!("asked for {m} tapers, directory has {}", family.len())));
                }
                family.truncate(m);
            }
            let meta = dir.join("metadata.json");
            Ok((family, Some((meta.display().to_string(), file_hash(&meta)?))))
        }
        None => {
            let b = cfg.taper.bandwidth.ok_or_else(|| config_err("taper bandwidth is required"))?;
            let opts = TaperOptions { selection: cfg.taper.selection()?, ..Default::default() };
            Ok((compute_tapers(region, b, opts)?, None))
        }
    }
}

#[derive(Serialize)]
struct EstimateMetadata {
    #[serde(rename = "M")]
    m: usize,
    bandwidth: f64,
    labels: Vec<String>,
    region_hash: String,
    dim: usize,
    lambda_hat: Vec<f64>,
    concentrations: Vec<f64>,
    kgrid: crate::config::KGridSpec,
    full_k: bool,
    wavenumbers: usize,
    group_delay_kmax: f64,
}

/// The configured wavenumber grid, cut to the tightest Nyquist box of the
/// grid-sampled processes unless `full_k` is set.
fn wavenumbers(cfg: &RunConfig, data: &SpatialDataset) -> CliResult<WavenumberGrid> {
    let dim = data.region.dim();
    let kg = cfg.kgrid.grid(dim)?;
    if cfg.flags.full_k {
        return Ok(kg);
    }
    let mut kbox: Option<KBox> = None;
    for p in &data.processes {
        if let Process::Field(f) = p {
            let b = nyquist_box(f.scheme())?;
            kbox = Some(kbox.map_or(b, |a| a.intersect(&b)));
        }
    }
    let Some(kbox) = kbox else { return Ok(kg) };
    let restricted = kg.restrict(&kbox);
    if restricted.is_empty() {
        return Err(config_err("no wavenumber lies inside the Nyquist box; set full_k to estimate outside it"));
    }
    if restricted.len() < kg.len() {
        log::info!("kept {} of {} wavenumbers inside the Nyquist box", restricted.len(), kg.len());
        Ok(restricted)
    } else {
        Ok(kg)
    }
}

/// Outputs of one `estimate` run.
pub struct EstimateOutputs {
    pub dir: PathBuf,
    pub labels: Vec<String>,
}

/// Command-line overrides of the run flags.
#[derive(Debug, Clone, Copy, Default)]
pub struct FlagOverrides {
    pub full_k: bool,
    pub allow_mixed_tapers: bool,
}

pub fn cmd_estimate(config: &Path, out: Option<&Path>, overrides: FlagOverrides) -> CliResult<EstimateOutputs> {
    let config_bytes = fs::read(config).map_err(|e| config_err(format!("{}: {e}", config.display())))?;
    let mut cfg: RunConfig =
        serde_json::from_slice(&config_bytes).map_err(|e| config_err(format!("{}: {e}", config.display())))?;
    cfg.flags.full_k |= overrides.full_k;
    cfg.flags.allow_mixed_tapers |= overrides.allow_mixed_tapers;
    let out = match (out, &cfg.output) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) => resolve(config, o),
        (None, None) => return Err(config_err("no output directory: pass --out or set \"output\"")),
    };
    let region = load_region(&cfg.region, config)?;
    let dim = region.dim();
    let inputs = load_inputs(&cfg, config, region.clone())?;
    let kg = wavenumbers(&cfg, &inputs.data)?;
    let (family, taper_hash) = taper_family(&cfg, config, &region)?;
    let est_cfg = EstimateConfig {
        lambda: intensity_overrides(&cfg, &inputs)?,
        method: Default::default(),
        taper_offsets: cfg.taper_offsets.clone(),
        allow_mixed_tapers: cfg.flags.allow_mixed_tapers,
    };
    let est = multitaper_estimate(&inputs.data, &family, &kg, &est_cfg)?;
    let coh = coherence_and_delay(&est, None);
    let reach = (0..dim)
        .map(|j| kg.points().iter().fold(0.0f64, |m, k| m.max(k[j].abs())))
        .fold(f64::INFINITY, f64::min);
    let kmax = cfg.group_delay_kmax.unwrap_or((5.0 * family.bandwidth()).min(reach));

    fs::create_dir_all(&out)?;
    let labels = est.labels.clone();
    let p = est.p;

    let mut w = csv::Writer::from_path(out.join("spectrum.csv"))?;
    let mut header = k_columns(dim);
    header.extend(["p", "q", "re", "im"]);
    w.write_record(&header)?;
    for i in 0..kg.len() {
        let k = kg.point(i);
        for a in 0..p {
            for b in 0..p {
                let v: Complex64 = est.get(i, a, b);
                let mut row = k_fields(&k, dim);
                row.extend([labels[a].clone(), labels[b].clone(), fmt(v.re), fmt(v.im)]);
                w.write_record(&row)?;
            }
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join("coherence.csv"))?;
    let mut header = k_columns(dim);
    header.extend(["p", "q", "r", "theta"]);
    w.write_record(&header)?;
    for i in 0..kg.len() {
        let k = kg.point(i);
        for a in 0..p {
            for b in a + 1..p {
                let mut row = k_fields(&k, dim);
                row.extend([labels[a].clone(), labels[b].clone(), fmt(coh.r(i, a, b)), fmt(coh.theta(i, a, b))]);
                w.write_record(&row)?;
            }
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join("group_delay.csv"))?;
    let mut header = vec!["p", "q"];
    header.extend(if dim == 2 { vec!["gx", "gy"] } else { vec!["gx"] });
    header.extend(["intercept", "rms", "used"]);
    w.write_record(&header)?;
    for a in 0..p {
        for b in a + 1..p {
            match fit_group_delay(&coh, a, b, kmax) {
                Ok(fit) => {
                    let mut row = vec![labels[a].clone(), labels[b].clone()];
                    row.extend(fit.gradient[..dim].iter().map(|g| fmt(*g)));
                    row.extend([fmt(fit.intercept), fmt(fit.rms), fit.used.to_string()]);
                    w.write_record(&row)?;
                }
                Err(e) => log::warn!("group delay {} / {}: {e}", labels[a], labels[b]),
            }
        }
    }
    w.flush()?;

    write_json(
        &out.join("metadata.json"),
        &EstimateMetadata {
            m: est.m,
            bandwidth: family.bandwidth(),
            labels: labels.clone(),
            region_hash: region_hash(&region),
            dim,
            lambda_hat: est.lambda_hat.clone(),
            concentrations: family.concentrations().to_vec(),
            kgrid: cfg.kgrid.clone(),
            full_k: cfg.flags.full_k,
            wavenumbers: kg.len(),
            group_delay_kmax: kmax,
        },
    )?;
    let mut inputs_json: Vec<serde_json::Value> =
        inputs.hashes.iter().map(|(p, h)| json!({"path": p, "sha256": h})).collect();
    if let Some((p, h)) = taper_hash {
        inputs_json.push(json!({"path": p, "sha256": h}));
    }
    write_json(
        &out.join("provenance.json"),
        &json!({
            "config": config.display().to_string(),
            "config_sha256": sha256_hex(&config_bytes),
            "inputs": inputs_json,
            "seed": cfg.seed,
            "versions": {"spatspec": env!("CARGO_PKG_VERSION")},
            "float_format": "17 significant digits",
        }),
    )?;
    Ok(EstimateOutputs { dir: out, labels })
}
