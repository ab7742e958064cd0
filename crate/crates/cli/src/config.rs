//! JSON run configuration. Paths are resolved relative to the file that
//! names them.

use crate::error::{config_err, CliResult};
use serde::{Deserialize, Serialize};
use spatspec_core::geometry::{SamplingScheme, WavenumberGrid};
use spatspec_core::linalg::Selection;
use spatspec_core::models::{lgcp_mu_for, MaternSpec, ModelConfig, TableOptions};
use spatspec_core::Point;
use std::path::{Path, PathBuf};

/// Observation region: bounding box, reference lattice and optional mask.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub dim: usize,
    pub bbox: BBoxSpec,
    /// Reference lattice spacing; defaults to the shorter side over 256.
    #[serde(default)]
    pub delta_ref: Option<Vec<f64>>,
    /// CSV of 0/1 cells, one line per first-axis index.
    #[serde(default)]
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BBoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// A region given inline or as a path to a region JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegionRef {
    Path(PathBuf),
    Inline(RegionSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    pub spacing: Vec<f64>,
    #[serde(default)]
    pub offset: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaternJson {
    pub sigma: f64,
    pub ell: f64,
    pub nu: f64,
}

/// Model parameters, tagged by `type`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Poisson {
        lambda: f64,
    },
    ShiftedPair {
        lambda: f64,
        tau: Vec<f64>,
    },
    MarkedPoisson {
        lambda: f64,
        mark_mean: f64,
        mark_sd: f64,
    },
    Lgcp {
        /// Mean of the log-intensity field; derived from `lambda` if absent.
        #[serde(default)]
        mu: Option<f64>,
        /// Point intensity, used when `mu` is absent. Default 0.001.
        #[serde(default)]
        lambda: Option<f64>,
        matern: MaternJson,
        grid: SchemeSpec,
        #[serde(default = "default_refine")]
        refine: usize,
    },
    Colocation {
        matern: MaternJson,
        alpha: [f64; 2],
        grids: [SchemeSpec; 2],
    },
}

fn default_refine() -> usize {
    5
}

/// Wavenumber grid `center + (i − (len−1)/2)·step` per axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KGridSpec {
    pub step: Vec<f64>,
    pub len: Vec<usize>,
    #[serde(default)]
    pub center: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaperSpec {
    #[serde(default)]
    pub bandwidth: Option<f64>,
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub count: Option<usize>,
    /// Precomputed taper directory; its region must match.
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    /// Use the model's true intensities instead of estimates.
    #[serde(default)]
    pub oracle_lambda: bool,
    #[serde(default)]
    pub allow_mixed_tapers: bool,
    /// Write every wavenumber instead of one half of a symmetric grid.
    #[serde(default)]
    pub full_k: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessSpec {
    Points {
        label: String,
        path: PathBuf,
        #[serde(default)]
        lambda: Option<f64>,
    },
    Field {
        label: String,
        path: PathBuf,
        /// Defaults to the JSON header next to the CSV.
        #[serde(default)]
        scheme: Option<SchemeSpec>,
        #[serde(default)]
        lambda: Option<f64>,
    },
}

impl ProcessSpec {
    pub fn label(&self) -> &str {
        match self {
            Self::Points { label, .. } | Self::Field { label, .. } => label,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub region: RegionRef,
    #[serde(default)]
    pub processes: Vec<ProcessSpec>,
    /// Simulated input, used when `processes` is empty.
    #[serde(default)]
    pub model: Option<ModelSpec>,
    pub taper: TaperSpec,
    pub kgrid: KGridSpec,
    #[serde(default)]
    pub flags: Flags,
    /// Base-taper index shift per process; needs `allow_mixed_tapers`.
    #[serde(default)]
    pub taper_offsets: Vec<usize>,
    /// Radius of the group-delay plane fit; default `min(5b, grid reach)`.
    #[serde(default)]
    pub group_delay_kmax: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// Model file for `simulate`: a region, model parameters and an optional
/// wavenumber grid for `--truth`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub region: RegionRef,
    #[serde(default)]
    pub kgrid: Option<KGridSpec>,
    #[serde(flatten)]
    pub params: serde_json::Map<String, serde_json::Value>,
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

/// `path` relative to the directory of `base`.
pub fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(path)
    }
}

pub(crate) fn point(v: &[f64], dim: usize, what: &str) -> CliResult<Point> {
    if v.len() != dim {
        return Err(config_err(format!("{what} needs {dim} components, got {}", v.len())));
    }
    let mut p = [0.0; 2];
    p[..dim].copy_from_slice(v);
    Ok(p)
}

/// Like [`point`], with a unit second component in one dimension.
pub(crate) fn spacing(v: &[f64], dim: usize, what: &str) -> CliResult<Point> {
    let mut p = point(v, dim, what)?;
    if dim == 1 {
        p[1] = 1.0;
    }
    Ok(p)
}

impl SchemeSpec {
    pub fn scheme(&self, dim: usize) -> CliResult<SamplingScheme> {
        let spacing = spacing(&self.spacing, dim, "grid spacing")?;
        let offset = match &self.offset {
            Some(o) => point(o, dim, "grid offset")?,
            None => [0.0; 2],
        };
        Ok(SamplingScheme::grid(dim, spacing, offset)?)
    }

    pub fn from_scheme(s: &SamplingScheme) -> Option<Self> {
        match *s {
            SamplingScheme::Grid { dim, spacing, offset } => {
                Some(Self { spacing: spacing[..dim].to_vec(), offset: Some(offset[..dim].to_vec()) })
            }
            SamplingScheme::Continuous => None,
        }
    }
}

impl MaternJson {
    pub fn spec(&self) -> CliResult<MaternSpec> {
        Ok(MaternSpec::new(self.sigma, self.ell, self.nu)?)
    }
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Poisson { .. } => "poisson",
            Self::ShiftedPair { .. } => "shifted_pair",
            Self::MarkedPoisson { .. } => "marked_poisson",
            Self::Lgcp { .. } => "lgcp",
            Self::Colocation { .. } => "colocation",
        }
    }

    pub fn model(&self, dim: usize) -> CliResult<ModelConfig> {
        let m = match self {
            Self::Poisson { lambda } => ModelConfig::Poisson { lambda: *lambda },
            Self::ShiftedPair { lambda, tau } => ModelConfig::ShiftedPair { lambda: *lambda, tau: point(tau, dim, "tau")? },
            Self::MarkedPoisson { lambda, mark_mean, mark_sd } => {
                ModelConfig::MarkedPoisson { lambda: *lambda, mark_mean: *mark_mean, mark_sd: *mark_sd }
            }
            Self::Lgcp { mu, lambda, matern, grid, refine } => {
                let spec = matern.spec()?;
                let mu = mu.unwrap_or_else(|| lgcp_mu_for(lambda.unwrap_or(0.001), &spec));
                ModelConfig::Lgcp { mu, matern: spec, grid: grid.scheme(dim)?, refine: *refine }
            }
            Self::Colocation { matern, alpha, grids } => ModelConfig::Colocation {
                matern: matern.spec()?,
                alpha: *alpha,
                grids: [grids[0].scheme(dim)?, grids[1].scheme(dim)?],
            },
        };
        m.validate()?;
        Ok(m)
    }
}

impl KGridSpec {
    pub fn grid(&self, dim: usize) -> CliResult<WavenumberGrid> {
        let step = spacing(&self.step, dim, "kgrid step")?;
        if self.len.len() != dim {
            return Err(config_err(format!("kgrid len needs {dim} entries")));
        }
        let len = [self.len[0], if dim == 2 { self.len[1] } else { 1 }];
        let center = match &self.center {
            Some(c) => point(c, dim, "kgrid center")?,
            None => [0.0; 2],
        };
        Ok(WavenumberGrid::regular(dim, center, step, len)?)
    }
}

impl TaperSpec {
    pub fn selection(&self) -> CliResult<Selection> {
        match (self.threshold, self.count) {
            (Some(_), Some(_)) => Err(config_err("give either a taper threshold or a count, not both")),
            (None, Some(m)) => Ok(Selection::Count(m)),
            (Some(t), None) => Ok(Selection::Threshold(t)),
            (None, None) => Ok(Selection::Threshold(0.99)),
        }
    }
}

/// Settings of the tabulated LGCP point spectrum written by `--truth`.
pub fn truth_table(kg: &WavenumberGrid) -> TableOptions {
    let reach = (0..kg.len()).map(|i| kg.point(i)).map(|k| k[0].hypot(k[1])).fold(0.0, f64::max);
    TableOptions { kmax: reach.max(1e-3) * 1.05, nk: 513, r_step: 0.25 }
}
