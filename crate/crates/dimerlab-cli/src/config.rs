//! Experiment configuration: one JSON document naming an experiment, its parameters,
//! output paths and precision. Command-line values are merged into `params` first.

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

/// Environment variable holding the default precision in bits.
pub const PRECISION_ENV: &str = "DIMERLAB_PRECISION";
pub const DEFAULT_PRECISION: u32 = 128;

/// A configuration problem at a JSON field path such as `params.grids[1]`.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        let path = path.into();
        ConfigError { path: if path.is_empty() { ".".into() } else { path }, message: message.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    Exactness,
    Count,
    Temperley,
    Greens,
    RectExpansion,
    Energy,
    CornerLaw,
    Main2,
    Schwarzian,
    CutConstants,
    TwoHole,
    LerwExponent,
    LerwProfile,
    LerwRatio,
    SlitGreens,
}

impl ExperimentId {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Exactness => "exactness",
            ExperimentId::Count => "count",
            ExperimentId::Temperley => "temperley",
            ExperimentId::Greens => "greens",
            ExperimentId::RectExpansion => "rect-expansion",
            ExperimentId::Energy => "energy",
            ExperimentId::CornerLaw => "corner-law",
            ExperimentId::Main2 => "main2",
            ExperimentId::Schwarzian => "schwarzian",
            ExperimentId::CutConstants => "cut-constants",
            ExperimentId::TwoHole => "two-hole",
            ExperimentId::LerwExponent => "lerw-exponent",
            ExperimentId::LerwProfile => "lerw-profile",
            ExperimentId::LerwRatio => "lerw-ratio",
            ExperimentId::SlitGreens => "slit-greens",
        }
    }

    /// Experiments that draw random numbers and so need a seed.
    pub fn is_stochastic(self) -> bool {
        matches!(
            self,
            ExperimentId::Exactness | ExperimentId::Schwarzian | ExperimentId::LerwExponent | ExperimentId::LerwProfile
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: ExperimentId,
    #[serde(default)]
    params: Map<String, Value>,
    #[serde(default)]
    output: OutputPaths,
    precision_bits: Option<u32>,
    #[serde(default)]
    parallel: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub params: Params,
    pub output: OutputPaths,
    pub precision_bits: u32,
    /// Fan independent parameter points out over threads. Results do not depend on it.
    pub parallel: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "experiment", content = "params", rename_all = "kebab-case")]
pub enum Params {
    Exactness(ExactnessParams),
    Count(CountParams),
    Temperley(TemperleyParams),
    Greens(GreensParams),
    RectExpansion(RectParams),
    Energy(EnergyParams),
    CornerLaw(CornerLawParams),
    Main2(Main2Params),
    Schwarzian(SchwarzianParams),
    CutConstants(CutParams),
    TwoHole(TwoHoleParams),
    LerwExponent(ExponentParams),
    LerwProfile(ProfileParams),
    LerwRatio(RatioParams),
    SlitGreens(SlitParams),
}

impl Params {
    pub fn id(&self) -> ExperimentId {
        match self {
            Params::Exactness(_) => ExperimentId::Exactness,
            Params::Count(_) => ExperimentId::Count,
            Params::Temperley(_) => ExperimentId::Temperley,
            Params::Greens(_) => ExperimentId::Greens,
            Params::RectExpansion(_) => ExperimentId::RectExpansion,
            Params::Energy(_) => ExperimentId::Energy,
            Params::CornerLaw(_) => ExperimentId::CornerLaw,
            Params::Main2(_) => ExperimentId::Main2,
            Params::Schwarzian(_) => ExperimentId::Schwarzian,
            Params::CutConstants(_) => ExperimentId::CutConstants,
            Params::TwoHole(_) => ExperimentId::TwoHole,
            Params::LerwExponent(_) => ExperimentId::LerwExponent,
            Params::LerwProfile(_) => ExperimentId::LerwProfile,
            Params::LerwRatio(_) => ExperimentId::LerwRatio,
            Params::SlitGreens(_) => ExperimentId::SlitGreens,
        }
    }
}

/// Random polyominoes checked against enumeration, random grid subgraphs against Kirchhoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExactnessParams {
    pub seed: Option<u64>,
    pub regions: usize,
    pub max_cells: usize,
    pub subgraphs: usize,
    pub max_vertices: usize,
    pub time_limit_s: f64,
}

impl Default for ExactnessParams {
    fn default() -> Self {
        ExactnessParams { seed: None, regions: 50, max_cells: 30, subgraphs: 20, max_vertices: 12, time_limit_s: 60.0 }
    }
}

/// Tiling counts of ASCII region files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountParams {
    pub regions: Vec<PathBuf>,
    /// Regions with at most this many cells are also enumerated.
    pub enumerate_up_to: usize,
    /// Regions with at most this many cells also get an exact count.
    pub exact_up_to: usize,
}

impl Default for CountParams {
    fn default() -> Self {
        CountParams { regions: Vec::new(), enumerate_up_to: 30, exact_up_to: 400 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemperleyParams {
    pub grids: Vec<String>,
}

impl Default for TemperleyParams {
    fn default() -> Self {
        TemperleyParams { grids: strings(&["2x2", "3x3", "3x4"]) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreensParams {
    pub grids: Vec<String>,
    /// Add the built-in non-rectangular subgraphs.
    pub shapes: bool,
    /// Fixtures whose polyomino has more cells are skipped.
    pub max_cells: usize,
}

impl Default for GreensParams {
    fn default() -> Self {
        let grids = ["1x2", "2x2", "2x3", "2x4", "3x3", "2x5", "2x6", "3x4", "2x7", "2x8", "3x5", "4x4", "2x9", "3x6", "2x10"];
        GreensParams { grids: strings(&grids), shapes: true, max_cells: 60 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RectParams {
    pub sizes: Vec<u32>,
    /// Residuals must stay below `bound_constant / (mn)`.
    pub bound_constant: f64,
    pub time_limit_s: f64,
}

impl Default for RectParams {
    fn default() -> Self {
        RectParams { sizes: vec![16, 24, 32, 48, 64], bound_constant: 10.0, time_limit_s: 60.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyParams {
    /// Height over width of the rectangle.
    pub taus: Vec<f64>,
    pub deltas: Vec<f64>,
    pub mesh: f64,
    pub tolerance: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams { taus: vec![1.0, 2.0], deltas: vec![1.0 / 16.0, 1.0 / 32.0], mesh: 1.0 / 256.0, tolerance: 0.03 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CornerLawParams {
    /// Polygon JSON files; empty means the unit square and the L-shape.
    pub polygons: Vec<PathBuf>,
    pub deltas: Vec<f64>,
    pub mesh: Option<f64>,
    pub tolerance: f64,
}

impl Default for CornerLawParams {
    fn default() -> Self {
        CornerLawParams { polygons: Vec::new(), deltas: vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0], mesh: None, tolerance: 0.02 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Main2Params {
    pub aspects: Vec<u32>,
    /// Cell size; `1/eps` must be an even integer.
    pub eps: f64,
    pub tolerance: f64,
}

impl Default for Main2Params {
    fn default() -> Self {
        Main2Params { aspects: vec![1, 2, 3], eps: 1.0 / 64.0, tolerance: 0.02 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchwarzianParams {
    pub seed: Option<u64>,
    pub pairs: usize,
    pub rate_tolerance: f64,
    pub schwarzian_tolerance: f64,
}

impl Default for SchwarzianParams {
    fn default() -> Self {
        SchwarzianParams { seed: None, pairs: 20, rate_tolerance: 1e-4, schwarzian_tolerance: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CutParams {
    pub steps: u32,
    pub eps: f64,
    pub delta: f64,
}

impl Default for CutParams {
    fn default() -> Self {
        CutParams { steps: 32, eps: 1.0 / 64.0, delta: 1e-4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoHoleParams {
    /// `m` gives the `(2m-1) x (2m-1)` square minus its base corner.
    pub sizes: Vec<i32>,
    /// ASCII regions with an `X` base square.
    pub regions: Vec<PathBuf>,
}

impl Default for TwoHoleParams {
    fn default() -> Self {
        TwoHoleParams { sizes: vec![2, 3], regions: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExponentParams {
    pub seed: Option<u64>,
    pub sizes: Vec<usize>,
    pub samples: usize,
    pub range: [f64; 2],
    pub time_limit_s: f64,
}

impl Default for ExponentParams {
    fn default() -> Self {
        ExponentParams { seed: None, sizes: vec![64, 128, 256, 512], samples: 500, range: [1.20, 1.30], time_limit_s: 600.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileParams {
    pub seed: Option<u64>,
    pub n: usize,
    pub samples: usize,
    pub radial_bins: usize,
    pub angular_bins: usize,
    pub range: [f64; 2],
}

impl Default for ProfileParams {
    fn default() -> Self {
        ProfileParams { seed: None, n: 256, samples: 10_000, radial_bins: 6, angular_bins: 9, range: [-0.85, -0.65] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatioParams {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub eps: Vec<f64>,
    pub box_size: f64,
    pub range: [f64; 2],
}

impl Default for RatioParams {
    fn default() -> Self {
        RatioParams {
            alphas: vec![0.25, 0.5, 1.0],
            betas: vec![-0.5, 0.0, 0.5],
            eps: vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
            box_size: 2.0,
            range: [-0.80, -0.70],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlitParams {
    /// Half-width `M` of the box.
    pub half_width: usize,
    pub tolerance: f64,
    /// Also assemble the Green's function from two auxiliary fields with this `n`.
    pub construction_n: Option<usize>,
}

impl Default for SlitParams {
    fn default() -> Self {
        SlitParams { half_width: 512, tolerance: 0.10, construction_n: None }
    }
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Parses `"MxN"` into positive dimensions.
pub fn parse_grid(text: &str) -> Result<(i32, i32), String> {
    let t = text.trim();
    let (a, b) = t.split_once(['x', 'X']).ok_or_else(|| format!("expected MxN, got {t:?}"))?;
    let dim = |s: &str| -> Result<i32, String> {
        let v: i32 = s.trim().parse().map_err(|_| format!("bad dimension {s:?} in {t:?}"))?;
        if !(1..=4096).contains(&v) {
            return Err(format!("dimension {v} in {t:?} is outside 1..=4096"));
        }
        Ok(v)
    };
    Ok((dim(a)?, dim(b)?))
}

fn typed<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = match (prefix.is_empty(), inner.as_str()) {
            (_, ".") => prefix.to_string(),
            (true, _) => inner,
            (false, _) => format!("{prefix}.{inner}"),
        };
        ConfigError::new(path, e.into_inner().to_string())
    })
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::new("", e.to_string()))?;
        Self::from_value(value)
    }

    /// Validates a parsed document. Precision falls back to the environment, then the default.
    pub fn from_value(value: Value) -> Result<Self, ConfigError> {
        let raw: RawConfig = typed(value, "")?;
        let p = Value::Object(raw.params);
        let params = match raw.experiment {
            ExperimentId::Exactness => Params::Exactness(typed(p, "params")?),
            ExperimentId::Count => Params::Count(typed(p, "params")?),
            ExperimentId::Temperley => Params::Temperley(typed(p, "params")?),
            ExperimentId::Greens => Params::Greens(typed(p, "params")?),
            ExperimentId::RectExpansion => Params::RectExpansion(typed(p, "params")?),
            ExperimentId::Energy => Params::Energy(typed(p, "params")?),
            ExperimentId::CornerLaw => Params::CornerLaw(typed(p, "params")?),
            ExperimentId::Main2 => Params::Main2(typed(p, "params")?),
            ExperimentId::Schwarzian => Params::Schwarzian(typed(p, "params")?),
            ExperimentId::CutConstants => Params::CutConstants(typed(p, "params")?),
            ExperimentId::TwoHole => Params::TwoHole(typed(p, "params")?),
            ExperimentId::LerwExponent => Params::LerwExponent(typed(p, "params")?),
            ExperimentId::LerwProfile => Params::LerwProfile(typed(p, "params")?),
            ExperimentId::LerwRatio => Params::LerwRatio(typed(p, "params")?),
            ExperimentId::SlitGreens => Params::SlitGreens(typed(p, "params")?),
        };
        let precision_bits = match raw.precision_bits {
            Some(b) => b,
            None => match std::env::var(PRECISION_ENV) {
                Ok(s) => s.trim().parse().map_err(|_| ConfigError::new("precision_bits", format!("{PRECISION_ENV}={s:?} is not an integer")))?,
                Err(_) => DEFAULT_PRECISION,
            },
        };
        if !(24..=4096).contains(&precision_bits) {
            return Err(ConfigError::new("precision_bits", format!("{precision_bits} is outside 24..=4096")));
        }
        let config = ExperimentConfig { params, output: raw.output, precision_bits, parallel: raw.parallel };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        fn nonempty<T>(name: &str, xs: &[T]) -> Result<(), ConfigError> {
            if xs.is_empty() {
                return Err(ConfigError::new(format!("params.{name}"), "list must not be empty"));
            }
            Ok(())
        }
        fn positive(name: &str, xs: &[f64]) -> Result<(), ConfigError> {
            nonempty(name, xs)?;
            match xs.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
                Some(i) => Err(ConfigError::new(format!("params.{name}[{i}]"), format!("{} must be positive", xs[i]))),
                None => Ok(()),
            }
        }
        fn files(name: &str, xs: &[PathBuf]) -> Result<(), ConfigError> {
            match xs.iter().position(|f| !f.is_file()) {
                Some(i) => Err(ConfigError::new(format!("params.{name}[{i}]"), format!("file {} does not exist", xs[i].display()))),
                None => Ok(()),
            }
        }
        fn grids(name: &str, xs: &[String]) -> Result<(), ConfigError> {
            nonempty(name, xs)?;
            for (i, g) in xs.iter().enumerate() {
                parse_grid(g).map_err(|m| ConfigError::new(format!("params.{name}[{i}]"), m))?;
            }
            Ok(())
        }
        fn at_least(name: &str, v: usize, min: usize) -> Result<(), ConfigError> {
            if v < min {
                return Err(ConfigError::new(format!("params.{name}"), format!("{v} is below {min}")));
            }
            Ok(())
        }
        fn range(name: &str, r: [f64; 2]) -> Result<(), ConfigError> {
            if !(r[0] <= r[1]) {
                return Err(ConfigError::new(format!("params.{name}"), format!("{r:?} is not an interval")));
            }
            Ok(())
        }
        fn seed(s: Option<u64>) -> Result<u64, ConfigError> {
            s.ok_or_else(|| ConfigError::new("params.seed", "a seed is required for stochastic experiments"))
        }
        match &self.params {
            Params::Exactness(p) => {
                seed(p.seed)?;
                at_least("regions", p.regions, 1)?;
                at_least("max_cells", p.max_cells, 2)?;
                at_least("subgraphs", p.subgraphs, 1)?;
                at_least("max_vertices", p.max_vertices, 2)?;
            }
            Params::Count(p) => {
                nonempty("regions", &p.regions)?;
                files("regions", &p.regions)?;
            }
            Params::Temperley(p) => grids("grids", &p.grids)?,
            Params::Greens(p) => {
                if !p.shapes {
                    nonempty("grids", &p.grids)?;
                }
                for (i, g) in p.grids.iter().enumerate() {
                    parse_grid(g).map_err(|m| ConfigError::new(format!("params.grids[{i}]"), m))?;
                }
            }
            Params::RectExpansion(p) => {
                nonempty("sizes", &p.sizes)?;
                if let Some(i) = p.sizes.iter().position(|&s| s < 2) {
                    return Err(ConfigError::new(format!("params.sizes[{i}]"), "size must be at least 2"));
                }
            }
            Params::Energy(p) => {
                positive("taus", &p.taus)?;
                positive("deltas", &p.deltas)?;
                positive("mesh", &[p.mesh])?;
            }
            Params::CornerLaw(p) => {
                files("polygons", &p.polygons)?;
                positive("deltas", &p.deltas)?;
                if let Some(m) = p.mesh {
                    positive("mesh", &[m])?;
                }
            }
            Params::Main2(p) => {
                nonempty("aspects", &p.aspects)?;
                let k = 1.0 / p.eps;
                if !(k.is_finite() && k >= 4.0 && k == k.round() && (k as u64) % 2 == 0) {
                    return Err(ConfigError::new("params.eps", format!("1/eps = {k} must be an even integer of at least 4")));
                }
            }
            Params::Schwarzian(p) => {
                seed(p.seed)?;
                at_least("pairs", p.pairs, 1)?;
            }
            Params::CutConstants(p) => {
                at_least("steps", p.steps as usize, 1)?;
                positive("eps", &[p.eps])?;
                positive("delta", &[p.delta])?;
            }
            Params::TwoHole(p) => {
                if p.sizes.is_empty() {
                    nonempty("regions", &p.regions)?;
                }
                if let Some(i) = p.sizes.iter().position(|&m| !(1..=4).contains(&m)) {
                    return Err(ConfigError::new(format!("params.sizes[{i}]"), "size must be in 1..=4"));
                }
                files("regions", &p.regions)?;
            }
            Params::LerwExponent(p) => {
                seed(p.seed)?;
                nonempty("sizes", &p.sizes)?;
                range("range", p.range)?;
            }
            Params::LerwProfile(p) => {
                seed(p.seed)?;
                at_least("n", p.n, 64)?;
                range("range", p.range)?;
            }
            Params::LerwRatio(p) => {
                positive("alphas", &p.alphas)?;
                nonempty("betas", &p.betas)?;
                positive("eps", &p.eps)?;
                range("range", p.range)?;
            }
            Params::SlitGreens(p) => at_least("half_width", p.half_width, 8)?,
        }
        Ok(())
    }

    /// The seed of a stochastic experiment.
    pub fn seed(&self) -> Option<u64> {
        match &self.params {
            Params::Exactness(p) => p.seed,
            Params::Schwarzian(p) => p.seed,
            Params::LerwExponent(p) => p.seed,
            Params::LerwProfile(p) => p.seed,
            _ => None,
        }
    }
}
