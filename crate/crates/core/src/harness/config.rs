//! Experiment configuration: a versioned TOML document whose unknown keys are
//! rejected, plus opportunity-cost regime presets.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CostParams, EpsilonPolicy, InpProfile, Scenario, SpProfile, TimeGrid};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SLOTS_PER_EPOCH: usize = 168;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Static,
    Update,
    Dynamic,
}

impl SchemeName {
    pub const ALL: [SchemeName; 3] = [SchemeName::Static, SchemeName::Update, SchemeName::Dynamic];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeName::Static => "static",
            SchemeName::Update => "update",
            SchemeName::Dynamic => "dynamic",
        }
    }
}

impl fmt::Display for SchemeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "static" => Ok(SchemeName::Static),
            "update" => Ok(SchemeName::Update),
            "dynamic" => Ok(SchemeName::Dynamic),
            other => Err(Error::Config(format!("unknown scheme {other:?} (expected static, update or dynamic)"))),
        }
    }
}

/// SP opportunity costs drawn from `U(lower, upper)` $ per epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Regime {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

/// Preset ranges, 90 k$ wide and centred on 135, 195, 315 and 375 k$.
pub const REGIME_PRESETS: [(&str, f64, f64); 4] = [
    ("low", 90_000.0, 180_000.0),
    ("moderate", 150_000.0, 240_000.0),
    ("high", 270_000.0, 360_000.0),
    ("very-high", 330_000.0, 420_000.0),
];

impl Regime {
    pub fn preset(name: &str) -> Option<Regime> {
        REGIME_PRESETS.iter().find(|(n, _, _)| *n == name).map(|&(n, lower, upper)| Regime {
            name: n.to_string(),
            lower,
            upper,
        })
    }

    pub fn explicit(lower: f64, upper: f64) -> Result<Regime> {
        if !(lower >= 0.0 && upper >= lower && upper.is_finite()) {
            return Err(Error::Config(format!("regime range must satisfy 0 <= a <= b, got {lower}..{upper}")));
        }
        Ok(Regime {
            name: format!("{lower}..{upper}"),
            lower,
            upper,
        })
    }

    pub fn mean(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

impl FromStr for Regime {
    type Err = Error;

    /// A preset name or an explicit `a..b` range in $.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(r) = Regime::preset(s) {
            return Ok(r);
        }
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| Error::Config(format!("unknown regime {s:?} (expected low, moderate, high, very-high or a..b)")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("regime bound {t:?} is not a number")))
        };
        Regime::explicit(parse(a)?, parse(b)?)
    }
}

impl TryFrom<String> for Regime {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Regime> for String {
    fn from(r: Regime) -> String {
        r.name
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Scenario as written in a config file; the grid scale factor is derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub epochs: usize,
    pub slots_per_epoch: usize,
    pub rho_hours: f64,
    pub epsilon_policy: EpsilonPolicy,
    pub cost: CostParams,
    pub inp: InpProfile,
    pub sps: Vec<SpProfile>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec::from_scenario(&Scenario::default_mec(DEFAULT_SLOTS_PER_EPOCH))
    }
}

impl ScenarioSpec {
    pub fn from_scenario(s: &Scenario) -> Self {
        ScenarioSpec {
            epochs: s.grid.epochs,
            slots_per_epoch: s.grid.slots_per_epoch,
            rho_hours: s.grid.rho_hours,
            epsilon_policy: s.epsilon_policy,
            cost: s.cost,
            inp: s.inp.clone(),
            sps: s.sps.clone(),
        }
    }

    pub fn to_scenario(&self, seed: u64) -> Result<Scenario> {
        if self.epochs == 0 || self.slots_per_epoch == 0 {
            return Err(Error::Config("epochs and slots_per_epoch must be >= 1".into()));
        }
        if !(self.rho_hours > 0.0) {
            return Err(Error::Config(format!("rho_hours must be > 0, got {}", self.rho_hours)));
        }
        let scenario = Scenario {
            inp: self.inp.clone(),
            sps: self.sps.clone(),
            cost: self.cost,
            grid: TimeGrid::new(self.epochs, self.slots_per_epoch, self.rho_hours, self.cost.delta_hours),
            epsilon_policy: self.epsilon_policy,
            seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub runs: usize,
    pub seed: u64,
    pub schemes: Vec<SchemeName>,
    pub regimes: Vec<Regime>,
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    pub parallel: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            runs: 20,
            seed: 2024,
            schemes: SchemeName::ALL.to_vec(),
            regimes: REGIME_PRESETS.iter().map(|(n, _, _)| Regime::preset(n).expect("preset")).collect(),
            out: PathBuf::from("out"),
            parallel: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Restoration rates in $/vcore.
    pub kappa: Vec<f64>,
    /// Intervention charges in $.
    pub gamma: Vec<f64>,
    pub regime: Regime,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            kappa: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            gamma: vec![2000.0, 2500.0, 3000.0, 3500.0, 4000.0],
            regime: Regime::preset("moderate").expect("preset"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub scenario: ScenarioSpec,
    #[serde(default)]
    pub sweep: SweepSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            experiment: ExperimentSection::default(),
            scenario: ScenarioSpec::default(),
            sweep: SweepSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (this build reads {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.runs == 0 {
            return Err(Error::Config("runs must be >= 1".into()));
        }
        if self.experiment.regimes.is_empty() {
            return Err(Error::Config("at least one regime is required".into()));
        }
        if self.experiment.schemes.is_empty() {
            return Err(Error::Config("at least one scheme is required".into()));
        }
        self.scenario.to_scenario(self.experiment.seed)?;
        Ok(())
    }

    /// The scenario for one run: SP opportunity costs follow the regime.
    pub fn scenario_for(&self, regime: &Regime, seed: u64) -> Result<Scenario> {
        Ok(self.scenario.to_scenario(seed)?.with_sp_opportunity(regime.lower, regime.upper))
    }
}

/// Parses a comma-separated list.
pub fn parse_list<T: FromStr<Err = Error>>(s: &str) -> Result<Vec<T>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let cfg = ExperimentConfig::from_toml("schema_version = 1\n[experiment]\nruns = 3\nregimes = [\"high\", \"1000..2000\"]\n").unwrap();
        assert_eq!(cfg.experiment.runs, 3);
        assert_eq!(cfg.experiment.regimes[1].lower, 1000.0);
        assert_eq!(cfg.scenario.sps.len(), 5);
        let s = cfg.scenario_for(&cfg.experiment.regimes[0], 7).unwrap();
        assert_eq!(s.sps[0].opportunity.lower, 270_000.0);
        assert!((s.grid.scale_factor - 8760.0 / 168.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_keys_and_versions_are_fatal() {
        assert!(ExperimentConfig::from_toml("schema_version = 1\n[experiment]\nrunz = 3\n").is_err());
        assert!(ExperimentConfig::from_toml("schema_version = 1\n[scenario.cost]\ngama = 3\n").is_err());
        assert!(ExperimentConfig::from_toml("schema_version = 2\n").is_err());
        assert!(ExperimentConfig::from_toml("[experiment]\nruns = 3\n").is_err());
        assert!(ExperimentConfig::from_toml("schema_version = 1\n[experiment]\nruns = 0\n").is_err());
        assert!(ExperimentConfig::from_toml("schema_version = 1\n[scenario.cost]\nkappa = 20.0\n").is_err());
    }

    #[test]
    fn regimes_parse() {
        assert_eq!("very-high".parse::<Regime>().unwrap().mean(), 375_000.0);
        assert!("medium".parse::<Regime>().is_err());
        assert!("5..1".parse::<Regime>().is_err());
        let means: Vec<f64> = REGIME_PRESETS.iter().map(|(n, _, _)| Regime::preset(n).unwrap().mean()).collect();
        assert_eq!(means, vec![135_000.0, 195_000.0, 315_000.0, 375_000.0]);
        assert_eq!(parse_list::<SchemeName>("static, dynamic").unwrap(), vec![SchemeName::Static, SchemeName::Dynamic]);
    }
}
