//! Campaign configuration, read from JSON.
//!
//! ```json
//! {
//!   "model": "TOY1",
//!   "sizes": [10, 25, 50, 100],
//!   "test_points": 200,
//!   "repetitions": 5,
//!   "replicates": 1000,
//!   "seed": 1
//! }
//! ```
//!
//! External data replaces `model` with
//! `"dataset": {"design": "design.csv", "replicates": "replicates.csv"}`
//! (or `"densities"` instead of `"replicates"`); paths are relative to the
//! config file.

use std::fmt;
use std::path::{Path, PathBuf};

use densemu_core::decomposition::Method;
use densemu_core::density::Grid;
use densemu_core::kernel_regression::Metric;
use densemu_core::toy_models::{Model, Scheme, DEFAULT_REPLICATES, GAUSS_GRID};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::io::{GridSpec, Outputs, GRID_POINTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    KrSweep,
    DecompSweep,
    MmpVsRandom,
    LooValidate,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::KrSweep => "KR_SWEEP",
            Kind::DecompSweep => "DECOMP_SWEEP",
            Kind::MmpVsRandom => "MMP_VS_RANDOM",
            Kind::LooValidate => "LOO_VALIDATE",
        }
    }

    fn parse(s: &str) -> Option<Kind> {
        [Kind::KrSweep, Kind::DecompSweep, Kind::MmpVsRandom, Kind::LooValidate]
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which bandwidth parametrizations a kernel-regression campaign fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandwidthMode {
    Isotropic,
    Anisotropic,
    Both,
}

impl BandwidthMode {
    /// `true` for isotropic, in reporting order.
    pub fn variants(self) -> &'static [bool] {
        match self {
            BandwidthMode::Isotropic => &[true],
            BandwidthMode::Anisotropic => &[false],
            BandwidthMode::Both => &[true, false],
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    design: PathBuf,
    replicates: Option<PathBuf>,
    densities: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: Option<String>,
    model: Option<String>,
    dataset: Option<RawDataset>,
    sizes: Option<Vec<usize>>,
    #[serde(default = "default_test_points")]
    test_points: usize,
    #[serde(default = "one")]
    repetitions: usize,
    q_range: Option<(usize, usize)>,
    methods: Option<Vec<String>>,
    #[serde(default = "default_metric")]
    metric: String,
    #[serde(default = "default_mode")]
    bandwidth_mode: String,
    estimators: Option<Vec<String>>,
    replicates: Option<usize>,
    grid: Option<GridSpec>,
    design: Option<String>,
    #[serde(default = "default_baselines")]
    baselines: usize,
    #[serde(default = "default_aqm_iter")]
    aqm_iter_max: usize,
    #[serde(default)]
    seed: u64,
}

fn default_test_points() -> usize {
    200
}
fn one() -> usize {
    1
}
fn default_metric() -> String {
    "L2".into()
}
fn default_mode() -> String {
    "isotropic".into()
}
fn default_baselines() -> usize {
    20
}
fn default_aqm_iter() -> usize {
    20
}

/// Where training data comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Model(Model),
    Dataset { design: PathBuf, outputs: Outputs },
}

/// Validated campaign settings.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub kind: Kind,
    pub source: Source,
    /// Learning-sample sizes, ascending. Empty for a dataset means its full size.
    pub sizes: Vec<usize>,
    pub test_points: usize,
    pub repetitions: usize,
    pub q_range: (usize, usize),
    pub methods: Vec<Method>,
    pub metric: Metric,
    pub bandwidth_mode: BandwidthMode,
    pub estimators: Vec<Metric>,
    pub replicates: usize,
    pub grid: GridSpec,
    pub scheme: Scheme,
    pub baselines: usize,
    pub aqm_iter_max: usize,
    pub seed: u64,
}

pub fn parse_metric(s: &str) -> Result<Metric> {
    match s.to_ascii_uppercase().as_str() {
        "L2" => Ok(Metric::L2),
        "HELLINGER" => Ok(Metric::Hellinger),
        _ => Err(Error::Config(format!("unknown metric {s:?}, expected L2 or HELLINGER"))),
    }
}

pub fn metric_name(m: Metric) -> &'static str {
    match m {
        Metric::L2 => "L2",
        Metric::Hellinger => "HELLINGER",
    }
}

fn parse_mode(s: &str) -> Result<BandwidthMode> {
    match s.to_ascii_lowercase().as_str() {
        "isotropic" => Ok(BandwidthMode::Isotropic),
        "anisotropic" => Ok(BandwidthMode::Anisotropic),
        "both" => Ok(BandwidthMode::Both),
        _ => Err(Error::Config(format!("unknown bandwidth_mode {s:?}, expected isotropic, anisotropic or both"))),
    }
}

/// Default output grid for a toy model.
pub fn default_grid(model: Model) -> GridSpec {
    let (lo, hi) = match model {
        Model::Toy1 => (-2.0, 3.0),
        Model::Toy2 => (-4.0, 34.0),
        Model::GaussFamily => GAUSS_GRID,
    };
    GridSpec::Fixed { lo, hi, points: GRID_POINTS }
}

impl CampaignConfig {
    pub fn from_file(path: &Path, kind: Kind) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, kind, base)
    }

    /// Parses and validates `text`; dataset paths are joined onto `base`.
    pub fn from_json(text: &str, kind: Kind, base: &Path) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(k) = &raw.kind {
            let parsed = Kind::parse(k).ok_or_else(|| Error::Config(format!("unknown kind {k:?}")))?;
            if parsed != kind {
                return Err(Error::Config(format!("config is for {parsed}, not {kind}")));
            }
        }
        let source = match (&raw.model, raw.dataset) {
            (Some(m), None) => Source::Model(m.parse().map_err(|e: densemu_core::Error| Error::Config(e.to_string()))?),
            (None, Some(d)) => {
                let outputs = match (d.replicates, d.densities) {
                    (Some(r), None) => Outputs::Replicates(base.join(r)),
                    (None, Some(f)) => Outputs::Densities(base.join(f)),
                    _ => return Err(Error::Config("dataset needs exactly one of replicates or densities".into())),
                };
                Source::Dataset { design: base.join(d.design), outputs }
            }
            _ => return Err(Error::Config("exactly one of model or dataset is required".into())),
        };

        let model = match source {
            Source::Model(m) => Some(m),
            Source::Dataset { .. } => None,
        };
        let sizes = match (raw.sizes, model) {
            (Some(s), _) => s,
            (None, Some(_)) => vec![50],
            (None, None) => Vec::new(),
        };
        if sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sizes must be strictly ascending".into()));
        }
        if sizes.first() == Some(&0) {
            return Err(Error::Config("sizes must be positive".into()));
        }
        if raw.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if model.is_none() && raw.repetitions != 1 {
            return Err(Error::Config("a fixed dataset allows a single repetition".into()));
        }
        if model.is_none() && kind == Kind::KrSweep {
            return Err(Error::Config("KR_SWEEP needs a generative model for its ground truth".into()));
        }
        if kind == Kind::KrSweep && raw.test_points == 0 {
            return Err(Error::Config("test_points must be at least 1".into()));
        }
        if matches!(kind, Kind::KrSweep | Kind::LooValidate) && sizes.first().is_some_and(|n| *n < 3) {
            return Err(Error::Config("kernel regression needs at least 3 training pairs".into()));
        }

        let q_range = raw.q_range.unwrap_or((1, 20));
        if q_range.0 == 0 || q_range.0 > q_range.1 {
            return Err(Error::Config(format!("invalid q_range {q_range:?}")));
        }
        if let Some(&n) = sizes.first() {
            if matches!(kind, Kind::DecompSweep | Kind::MmpVsRandom) && q_range.1 > n {
                return Err(Error::Config(format!("q_range upper bound {} exceeds the smallest size {n}", q_range.1)));
            }
        }

        let methods = match raw.methods {
            Some(list) => list
                .iter()
                .map(|s| s.parse::<Method>().map_err(|e| Error::Config(e.to_string())))
                .collect::<Result<Vec<_>>>()?,
            None => vec![Method::Cpca, Method::MmpL2, Method::MmpHellinger, Method::Aqm],
        };
        if kind == Kind::DecompSweep && (methods.is_empty() || methods.contains(&Method::Random)) {
            return Err(Error::Config("methods must be a nonempty subset of CPCA, MMP_L2, MMP_HELLINGER, AQM".into()));
        }
        let estimators = match raw.estimators {
            Some(list) => list.iter().map(|s| parse_metric(s)).collect::<Result<Vec<_>>>()?,
            None => vec![Metric::L2, Metric::Hellinger],
        };
        if estimators.is_empty() {
            return Err(Error::Config("estimators must not be empty".into()));
        }
        if kind == Kind::MmpVsRandom && raw.baselines == 0 {
            return Err(Error::Config("baselines must be at least 1".into()));
        }
        let replicates = raw.replicates.unwrap_or(DEFAULT_REPLICATES);
        if replicates < 2 {
            return Err(Error::Config("replicates must be at least 2".into()));
        }
        let grid = match (raw.grid, model) {
            (Some(g), _) => g,
            (None, Some(m)) => default_grid(m),
            (None, None) => GridSpec::Auto,
        };
        if model.is_some() && grid == GridSpec::Auto {
            return Err(Error::Config("toy-model campaigns need a fixed grid shared by all densities".into()));
        }
        grid.resolve()?;
        let scheme = match raw.design {
            Some(s) => s.parse().map_err(|e: densemu_core::Error| Error::Config(e.to_string()))?,
            None => Scheme::NestedUniform,
        };

        Ok(CampaignConfig {
            kind,
            source,
            sizes,
            test_points: raw.test_points,
            repetitions: raw.repetitions,
            q_range,
            methods,
            metric: parse_metric(&raw.metric)?,
            bandwidth_mode: parse_mode(&raw.bandwidth_mode)?,
            estimators,
            replicates,
            grid,
            scheme,
            baselines: raw.baselines,
            aqm_iter_max: raw.aqm_iter_max,
            seed: raw.seed,
        })
    }

    /// Fixed output grid, if configured.
    pub fn fixed_grid(&self) -> Result<Option<Grid>> {
        self.grid.resolve()
    }

    pub fn q_values(&self) -> std::ops::RangeInclusive<usize> {
        self.q_range.0..=self.q_range.1
    }
}
