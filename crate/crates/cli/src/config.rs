//! Run configuration and the precision schedule.

use std::path::PathBuf;

use circle_renorm::maps::MapSpec;
use circle_renorm::rotation::{ContinuedFraction, DEFAULT_BUDGET};
use circle_renorm::{Error, Result};
use serde::{Deserialize, Serialize};

/// Environment variable that raises the precision floor.
pub const PRECISION_ENV: &str = "CIRCLE_RENORM_PRECISION";

pub const DEFAULT_PRECISION: u32 = 512;

/// Pipeline stages, in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Tune,
    Partitions,
    Renorm,
    Tubular,
    Conjugacy,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Tune,
        Stage::Partitions,
        Stage::Renorm,
        Stage::Tubular,
        Stage::Conjugacy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Tune => "tune",
            Stage::Partitions => "partitions",
            Stage::Renorm => "renorm",
            Stage::Tubular => "tubular",
            Stage::Conjugacy => "conjugacy",
        }
    }
}

fn default_budget() -> u64 {
    DEFAULT_BUDGET
}
fn default_tail() -> usize {
    6
}
fn default_grid() -> usize {
    circle_renorm::renorm::DEFAULT_GRID
}
fn default_band() -> f64 {
    circle_renorm::conjugacy::DEFAULT_BAND
}
fn default_r() -> usize {
    2
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// The map under study.
    pub f: MapSpec,
    /// Comparison map for distances and conjugacy audits.
    #[serde(default)]
    pub g: Option<MapSpec>,
    /// Target partial quotients; each map is tuned to this prefix.
    pub target: Vec<u64>,
    /// Deepest level analysed.
    pub depth: usize,
    /// Working precision in bits; raised to the environment floor.
    #[serde(default)]
    pub precision: Option<u32>,
    /// Tune `a` to the target; when false the given `a` is used as is.
    #[serde(default = "default_true")]
    pub tune: bool,
    /// Ones appended to the target while tuning.
    #[serde(default = "default_tail")]
    pub tail: usize,
    #[serde(default)]
    pub audits: Vec<Stage>,
    pub out: PathBuf,
    /// Map evaluations allowed per orbit computation.
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_band")]
    pub band: f64,
    /// Highest derivative order in the pseudo-distance.
    #[serde(default = "default_r")]
    pub r: usize,
    #[serde(default)]
    pub svg: bool,
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::Config("depth must be at least 1".into()));
        }
        if self.budget == 0 {
            return Err(Error::Config("budget must be positive".into()));
        }
        if self.target.len() < self.depth {
            return Err(Error::Config(format!(
                "target has {} quotients, depth {} needs at least that many",
                self.target.len(),
                self.depth
            )));
        }
        ContinuedFraction::new(self.target.clone())?;
        if self.r > 2 {
            return Err(Error::Config(format!("r = {} must be 0, 1 or 2", self.r)));
        }
        if !(0.0..=1.0).contains(&self.band) {
            return Err(Error::Config(format!("band {} outside [0, 1]", self.band)));
        }
        if self.audits.contains(&Stage::Conjugacy) && self.g.is_none() {
            return Err(Error::Config("conjugacy audits need a map g".into()));
        }
        Ok(())
    }

    pub fn bits(&self) -> Result<u32> {
        resolve_precision(self.precision)
    }

    pub fn wants(&self, stage: Stage) -> bool {
        self.audits.contains(&stage)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        crate::emit::digest(&canonical)
    }
}

/// `max(requested, env floor)`, defaulting to 512 bits.
pub fn resolve_precision(requested: Option<u32>) -> Result<u32> {
    let floor = match std::env::var(PRECISION_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<u32>()
                .map_err(|_| Error::Config(format!("{PRECISION_ENV}={v:?} is not a bit count")))?,
        ),
        Err(_) => None,
    };
    let bits = match (requested, floor) {
        (Some(r), Some(f)) => r.max(f),
        (Some(r), None) => r,
        (None, Some(f)) => f.max(DEFAULT_PRECISION),
        (None, None) => DEFAULT_PRECISION,
    };
    if bits < circle_renorm::numerics::MIN_PRECISION {
        return Err(Error::PrecisionTooLow { bits });
    }
    Ok(bits)
}
