//! Probe planning, monitor placement and per-path evidence aggregation.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::simulator::{ProbeResult, ProbeStatus};
use crate::topology::{check_identifiability, ComponentId, ComponentKind, Topology};

/// Store-Ping operation types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OpKind {
    /// Create and write a file (metadata path).
    CrWr,
    /// Write to an existing file pinned on a data server or OSD.
    WrEx,
    /// Remove an existing file (metadata path).
    RmEx,
}

impl OpKind {
    pub fn name(self) -> &'static str {
        match self {
            OpKind::CrWr => "CrWr",
            OpKind::WrEx => "WrEx",
            OpKind::RmEx => "RmEx",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlannedProbe {
    pub monitor: ComponentId,
    pub target: ComponentId,
    pub op: OpKind,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub crwr: usize,
    pub wrex: usize,
    pub rmex: usize,
}

impl OpCounts {
    pub fn total(&self) -> usize {
        self.crwr + self.wrex + self.rmex
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbePlan {
    pub topology_fingerprint: u64,
    pub monitors: Vec<ComponentId>,
    pub interval_s: u32,
    pub inference_window_epochs: u32,
    /// Probes issued every epoch, in issue order.
    pub probes: Vec<PlannedProbe>,
}

pub const DEFAULT_INTERVAL_S: u32 = 60;
pub const DEFAULT_WINDOW_EPOCHS: u32 = 5;

impl ProbePlan {
    pub fn counts(&self) -> OpCounts {
        let mut c = OpCounts::default();
        for p in &self.probes {
            match p.op {
                OpKind::CrWr => c.crwr += 1,
                OpKind::WrEx => c.wrex += 1,
                OpKind::RmEx => c.rmex += 1,
            }
        }
        c
    }

    /// Planned probes per (monitor, target) per epoch.
    pub fn per_pair(&self) -> BTreeMap<(ComponentId, ComponentId), u32> {
        let mut m = BTreeMap::new();
        for p in &self.probes {
            *m.entry((p.monitor, p.target)).or_insert(0) += 1;
        }
        m
    }

    pub fn window_of(&self, epoch: u32) -> u32 {
        epoch / self.inference_window_epochs
    }

    pub fn window_epochs(&self, window: u32) -> std::ops::Range<u32> {
        let w = self.inference_window_epochs;
        window * w..(window + 1) * w
    }

    pub fn with_window(mut self, epochs: u32) -> Self {
        self.inference_window_epochs = epochs.max(1);
        self
    }
}

/// Plans one epoch of probes. Every monitor probes each metadata server and
/// metadata target with CrWr and RmEx, and each data server (in memory) and
/// OSD (on disk) with WrEx.
pub fn plan_probes(topo: &Topology, monitors: &[ComponentId], interval_s: u32) -> Result<ProbePlan> {
    let mut seen = HashSet::new();
    for &m in monitors {
        topo.client_info(m)?;
        if !seen.insert(m) {
            return Err(Error::Config(format!("monitor {m} listed twice")));
        }
    }
    if interval_s == 0 {
        return Err(Error::Config("probe interval must be positive".into()));
    }
    let meta: Vec<ComponentId> = topo
        .components_of(ComponentKind::Mds)
        .chain(topo.components_of(ComponentKind::Mdt))
        .collect();
    let data: Vec<ComponentId> = topo
        .components_of(ComponentKind::DataServer)
        .chain(topo.components_of(ComponentKind::Osd))
        .collect();
    let mut probes = Vec::with_capacity(monitors.len() * (2 * meta.len() + data.len()));
    for &monitor in monitors {
        for &target in &meta {
            for op in [OpKind::CrWr, OpKind::RmEx] {
                probes.push(PlannedProbe { monitor, target, op });
            }
        }
        for &target in &data {
            probes.push(PlannedProbe {
                monitor,
                target,
                op: OpKind::WrEx,
            });
        }
    }
    Ok(ProbePlan {
        topology_fingerprint: topo.fingerprint(),
        monitors: monitors.to_vec(),
        interval_s,
        inference_window_epochs: DEFAULT_WINDOW_EPOCHS,
        probes,
    })
}

/// Greedy monitor placement. Each candidate covers every storage component
/// from its vantage point; the candidate adding the most uncovered
/// (vantage, component) pairs is taken next, ties broken by a seeded draw.
/// Selection stops when coverage saturates or the budget runs out, and the
/// result must be `k`-identifiable.
pub fn select_monitors(
    topo: &Topology,
    candidates: &[ComponentId],
    budget: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<ComponentId>> {
    if candidates.is_empty() {
        return Err(Error::Config("no candidate monitors".into()));
    }
    let mut infos = Vec::with_capacity(candidates.len());
    for &c in candidates {
        infos.push(topo.client_info(c)?);
    }
    if budget == 0 {
        let report = check_identifiability(topo, &[], k)?;
        let witness = report
            .witness
            .expect("an empty monitor set observes nothing");
        return Err(Error::Infeasible { witness });
    }

    let storage: Vec<ComponentId> = topo.components().filter(|c| c.kind.is_storage()).collect();
    let mut covered: HashSet<String> = HashSet::new();
    let mut chosen: Vec<ComponentId> = Vec::new();
    let mut rng = rng::rng_for(seed, &[rng::fnv1a(b"select-monitors")]);

    while chosen.len() < budget {
        let mut best_gain = 0usize;
        let mut best: Vec<ComponentId> = Vec::new();
        for info in &infos {
            if chosen.contains(&info.id) {
                continue;
            }
            let gain = if covered.contains(&info.vantage_key()) {
                0
            } else {
                storage.len()
            };
            if gain > best_gain {
                best_gain = gain;
                best.clear();
            }
            if gain == best_gain && gain > 0 {
                best.push(info.id);
            }
        }
        let Some(&pick) = best.choose(&mut rng) else {
            break;
        };
        let info = topo.client_info(pick)?;
        covered.insert(info.vantage_key());
        chosen.push(pick);
    }

    // Coverage saturated without identifiability: keep adding monitors while
    // budget remains; extra monitors can only add routes.
    loop {
        let report = check_identifiability(topo, &chosen, k)?;
        if report.identifiable {
            chosen.sort();
            return Ok(chosen);
        }
        let rest: Vec<ComponentId> = candidates
            .iter()
            .copied()
            .filter(|c| !chosen.contains(c))
            .collect();
        if chosen.len() >= budget || rest.is_empty() {
            return Err(Error::Infeasible {
                witness: report.witness.expect("non-identifiable report carries witness"),
            });
        }
        chosen.push(*rest.choose(&mut rng).expect("non-empty"));
    }
}

/// Binomial evidence for one (monitor, target) path over one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathObservation {
    pub monitor: ComponentId,
    pub target: ComponentId,
    pub window: u32,
    /// Probes sent.
    pub n: u32,
    /// Probes completed within the SLO.
    pub y: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aggregation {
    pub observations: Vec<PathObservation>,
    /// Planned pairs with no records in the window.
    pub empty: Vec<(ComponentId, ComponentId)>,
}

/// Folds the probe records that fall inside `window` into one observation per
/// (monitor, target). Only status `ok` (latency within the SLO) counts as a
/// success; slow probes are failures for the Binomial model.
pub fn aggregate(records: &[ProbeResult], plan: &ProbePlan, window: u32) -> Aggregation {
    let epochs = plan.window_epochs(window);
    let mut counts: HashMap<(ComponentId, ComponentId), (u32, u32)> = HashMap::new();
    for r in records.iter().filter(|r| epochs.contains(&r.epoch)) {
        let e = counts.entry((r.monitor, r.target)).or_insert((0, 0));
        e.0 += 1;
        if r.status == ProbeStatus::Ok {
            e.1 += 1;
        }
    }
    let mut out = Aggregation::default();
    let mut order: Vec<(ComponentId, ComponentId)> = Vec::new();
    let mut seen = BTreeSet::new();
    for p in &plan.probes {
        if seen.insert((p.monitor, p.target)) {
            order.push((p.monitor, p.target));
        }
    }
    let mut extra: Vec<_> = counts
        .keys()
        .filter(|k| !seen.contains(k))
        .copied()
        .collect();
    extra.sort();
    order.extend(extra);
    for key in order {
        match counts.get(&key) {
            Some(&(n, y)) if n > 0 => out.observations.push(PathObservation {
                monitor: key.0,
                target: key.1,
                window,
                n,
                y,
            }),
            _ => out.empty.push(key),
        }
    }
    out
}
