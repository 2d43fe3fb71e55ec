use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generation::{Decoding, Mode};
use crate::intervention::InterventionConfig;
use crate::model::ModelConfig;
use crate::risk::RiskParams;
use crate::testbed::TestbedConfig;

/// Environment variable that overrides the episode seed of a config file.
pub const SEED_ENV: &str = "ADAVBOOST_SEED";

/// Values for a sweep. An axis left out keeps the config's value; an axis
/// given as an empty list makes the grid empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub alpha: Option<Vec<f64>>,
    pub gamma: Option<Vec<f64>>,
    pub m_vis_max: Option<Vec<f64>>,
    pub m_txt_max: Option<Vec<f64>>,
}

impl SweepGrid {
    pub fn is_unset(&self) -> bool {
        self.alpha.is_none() && self.gamma.is_none() && self.m_vis_max.is_none() && self.m_txt_max.is_none()
    }

    /// Cartesian product over the swept axes, alpha varying slowest.
    pub fn points(&self, base: &InterventionConfig) -> Vec<InterventionConfig> {
        let axis = |v: &Option<Vec<f64>>, default: f64| v.clone().unwrap_or_else(|| vec![default]);
        let mut out = Vec::new();
        if self.is_unset() {
            return out;
        }
        for &alpha in &axis(&self.alpha, base.alpha) {
            for &gamma in &axis(&self.gamma, base.gamma) {
                for &m_vis_max in &axis(&self.m_vis_max, base.m_vis_max) {
                    for &m_txt_max in &axis(&self.m_txt_max, base.m_txt_max) {
                        out.push(InterventionConfig {
                            alpha,
                            gamma,
                            m_vis_max,
                            m_txt_max,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        out
    }

    /// Replaces the axes that `other` sets.
    pub fn merge(&mut self, other: SweepGrid) {
        if other.alpha.is_some() {
            self.alpha = other.alpha;
        }
        if other.gamma.is_some() {
            self.gamma = other.gamma;
        }
        if other.m_vis_max.is_some() {
            self.m_vis_max = other.m_vis_max;
        }
        if other.m_txt_max.is_some() {
            self.m_txt_max = other.m_txt_max;
        }
    }
}

/// Parses `name=v1,v2,...` into a one-axis grid. An empty value list is
/// allowed and yields an empty axis.
pub fn parse_grid_arg(arg: &str) -> Result<SweepGrid> {
    let (name, values) = arg
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("grid axis `{arg}` is not of the form name=v1,v2")))?;
    let values = values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse::<f64>()
                .map_err(|_| Error::Config(format!("grid value `{v}` is not a number")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut grid = SweepGrid::default();
    match name.trim() {
        "alpha" => grid.alpha = Some(values),
        "gamma" => grid.gamma = Some(values),
        "m_vis_max" => grid.m_vis_max = Some(values),
        "m_txt_max" => grid.m_txt_max = Some(values),
        other => return Err(Error::Config(format!("unknown grid axis `{other}`"))),
    }
    Ok(grid)
}

/// Everything one invocation needs. Every field has a default, so `{}` is a
/// valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    /// Defaults to the LLaVA-style operating point over all layers.
    pub intervention: Option<InterventionConfig>,
    pub decoding: Decoding,
    pub testbed: TestbedConfig,
    /// Mode names: `vanilla`, `adavboost`, `fixed_boost` or `fixed_boost:<factor>`.
    pub modes: Vec<String>,
    pub fixed_boost_factor: f64,
    pub out_dir: PathBuf,
    pub workers: usize,
    pub sweep: SweepGrid,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            intervention: None,
            decoding: Decoding::Greedy,
            testbed: TestbedConfig::default(),
            modes: vec!["vanilla".into(), "adavboost".into()],
            fixed_boost_factor: 1.2,
            out_dir: PathBuf::from("adavboost-out"),
            workers: 1,
            sweep: SweepGrid::default(),
        }
    }
}

/// Command-line overrides, applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub modes: Option<Vec<String>>,
    pub episodes: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

pub fn parse_mode(text: &str, intervention: &InterventionConfig, fixed_factor: f64) -> Result<Mode> {
    let text = text.trim();
    match text {
        "vanilla" => Ok(Mode::Vanilla),
        "adavboost" => Ok(Mode::AdaVBoost(intervention.clone())),
        "fixed_boost" => Ok(Mode::FixedBoost { factor: fixed_factor }),
        _ => {
            let factor = text
                .strip_prefix("fixed_boost:")
                .ok_or_else(|| Error::Config(format!("unknown mode `{text}`")))?;
            let factor = factor
                .parse()
                .map_err(|_| Error::Config(format!("bad fixed boost factor in `{text}`")))?;
            Ok(Mode::FixedBoost { factor })
        }
    }
}

impl RunConfig {
    /// Reads a JSON config. Unreadable or malformed files are config errors.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))
    }

    /// Applies overrides. Seed precedence: flag, then `ADAVBOOST_SEED`
    /// (passed in as `env_seed`), then the file.
    pub fn apply(&mut self, o: &Overrides, env_seed: Option<&str>) -> Result<()> {
        if let Some(raw) = env_seed {
            self.testbed.seed = raw
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={raw} is not an unsigned integer")))?;
        }
        if let Some(seed) = o.seed {
            self.testbed.seed = seed;
        }
        if let Some(out) = &o.out {
            self.out_dir = out.clone();
        }
        if let Some(modes) = &o.modes {
            self.modes = modes.clone();
        }
        if let Some(n) = o.episodes {
            self.testbed.episodes = n;
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        Ok(())
    }

    /// Loads a file (or defaults when `path` is `None`), applies the overrides
    /// and the seed environment variable, and validates.
    pub fn load(path: Option<&Path>, o: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        let env_seed = std::env::var(SEED_ENV).ok();
        cfg.apply(o, env_seed.as_deref())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn intervention(&self) -> InterventionConfig {
        self.intervention
            .clone()
            .unwrap_or_else(|| InterventionConfig::llava_style(self.model.n_layers))
    }

    /// Risk parameters used to fill the traces of non-adaptive modes.
    pub fn trace_risk(&self) -> RiskParams {
        let i = self.intervention();
        RiskParams {
            alpha: i.alpha,
            gamma: i.gamma,
            m_vis_max: i.m_vis_max,
        }
    }

    pub fn modes(&self) -> Result<Vec<Mode>> {
        let intervention = self.intervention();
        self.modes
            .iter()
            .map(|s| parse_mode(s, &intervention, self.fixed_boost_factor))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.testbed.validate(&self.model)?;
        self.intervention().validate(self.model.n_layers)?;
        if self.testbed.episodes == 0 {
            return Err(Error::Config("episodes must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Config("at least one mode is required".into()));
        }
        for mode in self.modes()? {
            mode.validate(&self.model)?;
        }
        if let Decoding::Sample { temperature, .. } = self.decoding {
            if !(temperature > 0.0 && temperature.is_finite()) {
                return Err(Error::Config(format!("temperature must be positive, got {temperature}")));
            }
        }
        Ok(())
    }

    /// Creates the output directory, reporting failure as a config error.
    pub fn ensure_out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out_dir).map_err(|e| {
            Error::Config(format!("output directory {} is not writable: {e}", self.out_dir.display()))
        })?;
        Ok(&self.out_dir)
    }
}
