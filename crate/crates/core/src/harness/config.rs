use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnosis::DiagnosisConfig;
use crate::error::{Error, Result};
use crate::inference::{FlagRule, McmcConfig, DEFAULT_FORGETTING};
use crate::monitor::{DEFAULT_INTERVAL_S, DEFAULT_WINDOW_EPOCHS};
use crate::simulator::{FaultKind, FaultSpec, LatencyModel, SideChannelModel};
use crate::topology::{ComponentId, TopologySpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorConfig {
    /// Use exactly these monitors and skip selection.
    pub fixed: Vec<ComponentId>,
    /// Candidates for selection; empty means every client.
    pub candidates: Vec<ComponentId>,
    pub budget: usize,
    /// Number of concurrent failures the placement must tolerate.
    pub k: usize,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            fixed: Vec::new(),
            candidates: Vec::new(),
            budget: 6,
            k: 1,
        }
    }
}

/// Random fault mix drawn per scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub failures: usize,
    pub overloads: usize,
    pub failure_kinds: Vec<FaultKind>,
    /// Severity ranges (inclusive) per kind; P1 and P2 always use 1.0.
    pub gray_severity: (f64, f64),
    pub slow_severity: (f64, f64),
    pub overload_severity: (f64, f64),
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            failures: 1,
            overloads: 1,
            failure_kinds: FaultKind::FAILURES.to_vec(),
            gray_severity: (0.5, 1.0),
            slow_severity: (0.3, 1.0),
            overload_severity: (0.8, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Topology preset (`minimal`, `ci`, `full`); ignored when `topology` is set.
    pub scale: String,
    pub topology: Option<TopologySpec>,
    pub seed: u64,
    /// Scenario length in inference windows.
    pub windows: u32,
    pub window_epochs: u32,
    pub interval_s: u32,
    pub monitors: MonitorConfig,
    /// Faults injected as given.
    pub faults: Vec<FaultSpec>,
    /// Faults drawn at random in addition to `faults`.
    pub generator: Option<GeneratorConfig>,
    pub latency: LatencyModel,
    pub side_channels: SideChannelModel,
    pub mcmc: McmcConfig,
    pub flag: FlagRule,
    pub forgetting: f64,
    pub diagnosis: DiagnosisConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            scale: "ci".into(),
            topology: None,
            seed: 0,
            windows: 5,
            window_epochs: DEFAULT_WINDOW_EPOCHS,
            interval_s: DEFAULT_INTERVAL_S,
            monitors: MonitorConfig::default(),
            faults: Vec::new(),
            generator: None,
            latency: LatencyModel::default(),
            side_channels: SideChannelModel::default(),
            mcmc: McmcConfig::default(),
            flag: FlagRule {
                max_credible_width: Some(0.5),
                ..FlagRule::default()
            },
            forgetting: DEFAULT_FORGETTING,
            diagnosis: DiagnosisConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Topology spec in effect. Presets take the pipeline seed so their LNET
    /// grouping varies across runs; explicit specs keep their own seed.
    pub fn topology_spec(&self) -> Result<TopologySpec> {
        match &self.topology {
            Some(spec) => Ok(spec.clone()),
            None => Ok(TopologySpec::preset(&self.scale)?.with_seed(self.seed)),
        }
    }

    pub fn horizon_epochs(&self) -> u32 {
        self.windows * self.window_epochs
    }

    pub fn validate(&self) -> Result<()> {
        if self.windows == 0 || self.window_epochs == 0 {
            return Err(Error::Config("windows and window_epochs must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.forgetting) {
            return Err(Error::Config(format!(
                "forgetting factor {} outside [0, 1]",
                self.forgetting
            )));
        }
        self.latency.validate()?;
        self.mcmc.validate()?;
        self.flag.validate()?;
        if let Some(g) = &self.generator {
            if g.failures > 0 && g.failure_kinds.iter().all(|k| !k.is_failure()) {
                return Err(Error::Config("failure_kinds lists no failure pattern".into()));
            }
            for (lo, hi) in [g.gray_severity, g.slow_severity, g.overload_severity] {
                if !(0.0 < lo && lo <= hi && hi <= 1.0) {
                    return Err(Error::Config(format!("severity range ({lo}, {hi}) invalid")));
                }
            }
        }
        Ok(())
    }
}
