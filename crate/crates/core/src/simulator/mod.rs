//! Seeded fault-injection simulator standing in for a live cluster: it
//! produces probe outcomes, load metrics and error logs for a scenario.

mod outcome;
mod side_channels;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monitor::{OpKind, ProbePlan};
use crate::rng::{self, SimRng};
use crate::topology::{ComponentId, ProbePath, Topology};

pub use outcome::{sample_outcome, LatencyModel, LogNormalParams, Outcome};
pub use side_channels::{emit_side_channels, LogRecord, MetricSample, SideChannelModel};

/// Failure patterns that can be injected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaultKind {
    /// Whole component stops.
    #[serde(rename = "P1_FailStop")]
    P1FailStop,
    /// Service process or thread stops; the host stays up.
    #[serde(rename = "P2_ProcessCrash")]
    P2ProcessCrash,
    /// Requests fail intermittently while heartbeats look healthy.
    #[serde(rename = "P3_Gray")]
    P3Gray,
    /// Slowdown that redundancy masks from correctness but not from latency.
    #[serde(rename = "P4_FailSlowMasked")]
    P4FailSlowMasked,
    /// Slowdown from load or contention.
    #[serde(rename = "P5_Overload")]
    P5Overload,
}

impl FaultKind {
    pub const FAILURES: [FaultKind; 4] = [
        FaultKind::P1FailStop,
        FaultKind::P2ProcessCrash,
        FaultKind::P3Gray,
        FaultKind::P4FailSlowMasked,
    ];

    /// P1 through P4 are component failures; P5 is a resource overload.
    pub fn is_failure(self) -> bool {
        self != FaultKind::P5Overload
    }

    pub fn is_stop(self) -> bool {
        matches!(self, FaultKind::P1FailStop | FaultKind::P2ProcessCrash)
    }

    pub fn label(self) -> &'static str {
        match self {
            FaultKind::P1FailStop => "P1_FailStop",
            FaultKind::P2ProcessCrash => "P2_ProcessCrash",
            FaultKind::P3Gray => "P3_Gray",
            FaultKind::P4FailSlowMasked => "P4_FailSlowMasked",
            FaultKind::P5Overload => "P5_Overload",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub kind: FaultKind,
    pub target: ComponentId,
    pub start_epoch: u32,
    /// Inclusive.
    pub end_epoch: u32,
    /// Probability of affecting a request (P3) or slowdown/load scale (P4, P5).
    #[serde(default = "full_severity")]
    pub severity: f64,
}

fn full_severity() -> f64 {
    1.0
}

impl FaultSpec {
    pub fn new(kind: FaultKind, target: ComponentId, start_epoch: u32, end_epoch: u32) -> Self {
        FaultSpec {
            kind,
            target,
            start_epoch,
            end_epoch,
            severity: 1.0,
        }
    }

    pub fn with_severity(mut self, severity: f64) -> Self {
        self.severity = severity;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.start_epoch > self.end_epoch {
            return Err(Error::Config(format!(
                "fault on {} starts at {} after it ends at {}",
                self.target, self.start_epoch, self.end_epoch
            )));
        }
        if !(self.severity > 0.0 && self.severity <= 1.0) {
            return Err(Error::Config(format!(
                "fault severity {} outside (0, 1]",
                self.severity
            )));
        }
        Ok(())
    }

    pub fn active_at(&self, epoch: u32) -> bool {
        (self.start_epoch..=self.end_epoch).contains(&epoch)
    }

    pub fn overlaps(&self, epochs: &std::ops::Range<u32>) -> bool {
        self.start_epoch < epochs.end && self.end_epoch >= epochs.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub topology_fingerprint: u64,
    pub horizon_epochs: u32,
    #[serde(default)]
    pub faults: Vec<FaultSpec>,
    #[serde(default)]
    pub latency: LatencyModel,
    #[serde(default)]
    pub side_channels: SideChannelModel,
}

impl Scenario {
    pub fn new(topo: &Topology, id: impl Into<String>, horizon_epochs: u32) -> Self {
        Scenario {
            id: id.into(),
            topology_fingerprint: topo.fingerprint(),
            horizon_epochs,
            faults: Vec::new(),
            latency: LatencyModel::default(),
            side_channels: SideChannelModel::default(),
        }
    }

    /// Adds a fault. Several faults may target one component; failures
    /// dominate slowdowns and slowdowns compose multiplicatively.
    pub fn inject(mut self, topo: &Topology, fault: FaultSpec) -> Result<Self> {
        topo.require(fault.target)?;
        fault.validate()?;
        if fault.end_epoch >= self.horizon_epochs {
            return Err(Error::Config(format!(
                "fault on {} ends at epoch {} beyond horizon {}",
                fault.target, fault.end_epoch, self.horizon_epochs
            )));
        }
        self.faults.push(fault);
        Ok(self)
    }

    pub fn active_faults(&self, epoch: u32) -> Vec<&FaultSpec> {
        self.faults.iter().filter(|f| f.active_at(epoch)).collect()
    }

    pub fn validate(&self, topo: &Topology) -> Result<()> {
        if self.topology_fingerprint != topo.fingerprint() {
            return Err(Error::Config(format!(
                "scenario `{}` was built for a different topology",
                self.id
            )));
        }
        self.latency.validate()?;
        for f in &self.faults {
            topo.require(f.target)?;
            f.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeStatus {
    Ok,
    Slow,
    Timeout,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub epoch: u32,
    pub monitor: ComponentId,
    pub target: ComponentId,
    pub op: OpKind,
    pub latency_ms: f64,
    pub status: ProbeStatus,
    /// LNET router that carried the request.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lnet: Option<ComponentId>,
    /// Data server that served an OSD request.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub server: Option<ComponentId>,
    /// A gray-failing component touched this request while still heartbeating.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub gray: bool,
}

impl ProbeResult {
    /// Components the request actually went through.
    pub fn route<'a>(&'a self, path: &'a ProbePath) -> impl Iterator<Item = ComponentId> + 'a {
        path.serial
            .iter()
            .copied()
            .chain(self.lnet)
            .chain(self.server)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub scenario_id: String,
    pub seed: u64,
    pub horizon_epochs: u32,
    pub window_epochs: u32,
    pub slo_ms: f64,
    pub timeout_ms: f64,
    pub probes: Vec<ProbeResult>,
    pub metrics: Vec<MetricSample>,
    pub logs: Vec<LogRecord>,
    /// Injected faults, kept apart from the observable records for scoring.
    pub ground_truth: Vec<FaultSpec>,
}

impl Trace {
    pub fn window_count(&self) -> u32 {
        self.horizon_epochs.div_ceil(self.window_epochs)
    }

    pub fn window_epochs(&self, window: u32) -> std::ops::Range<u32> {
        let w = self.window_epochs;
        window * w..((window + 1) * w).min(self.horizon_epochs)
    }
}

/// Runs every planned probe in every epoch of the horizon, then emits side
/// channels for that epoch. A single RNG stream drives everything in a fixed
/// order, so (scenario, plan, seed) fully determines the trace.
pub fn run_scenario(
    topo: &Topology,
    scenario: &Scenario,
    plan: &ProbePlan,
    seed: u64,
) -> Result<Trace> {
    if plan.topology_fingerprint != topo.fingerprint() {
        return Err(Error::Config("probe plan was built for a different topology".into()));
    }
    scenario.validate(topo)?;

    let mut paths: HashMap<(ComponentId, ComponentId), ProbePath> = HashMap::new();
    let mut cursors: HashMap<(ComponentId, ComponentId), usize> = HashMap::new();
    for p in &plan.probes {
        let key = (p.monitor, p.target);
        if !paths.contains_key(&key) {
            paths.insert(key, topo.enumerate_paths(p.monitor, p.target)?);
            let start = rng::derive_seed(
                seed ^ topo.spec().seed,
                &[rng::fnv1a(b"lnet-rr"), u64::from(p.monitor.index), rng::fnv1a(p.target.to_string().as_bytes())],
            );
            cursors.insert(key, start as usize % topo.spec().lnet_group_size);
        }
    }

    let mut rng: SimRng = rng::rng_for(seed, &[rng::fnv1a(scenario.id.as_bytes())]);
    let mut probes = Vec::with_capacity(plan.probes.len() * scenario.horizon_epochs as usize);
    let mut metrics = Vec::new();
    let mut logs = Vec::new();
    for epoch in 0..scenario.horizon_epochs {
        let active = scenario.active_faults(epoch);
        for p in &plan.probes {
            let key = (p.monitor, p.target);
            let cursor = cursors.get_mut(&key).expect("cursor per planned pair");
            let o = sample_outcome(&paths[&key], p.op, &active, *cursor, &scenario.latency, &mut rng);
            *cursor += 1;
            probes.push(ProbeResult {
                epoch,
                monitor: p.monitor,
                target: p.target,
                op: p.op,
                latency_ms: o.latency_ms,
                status: o.status,
                lnet: o.lnet,
                server: o.server,
                gray: o.gray,
            });
        }
        let (m, l) = emit_side_channels(topo, scenario, epoch, &mut rng);
        metrics.extend(m);
        logs.extend(l);
    }

    Ok(Trace {
        scenario_id: scenario.id.clone(),
        seed,
        horizon_epochs: scenario.horizon_epochs,
        window_epochs: plan.inference_window_epochs,
        slo_ms: scenario.latency.slo_ms,
        timeout_ms: scenario.latency.timeout_ms,
        probes,
        metrics,
        logs,
        ground_truth: scenario.faults.clone(),
    })
}
