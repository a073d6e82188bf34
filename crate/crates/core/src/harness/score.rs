use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::diagnosis::{Diagnosis, Verdict};
use crate::error::Result;
use crate::simulator::{FaultSpec, ProbeStatus, Trace};
use crate::topology::{ComponentId, ComponentKind, ProbePath, Topology};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Localization {
    pub true_positives: usize,
    pub false_negatives: usize,
    pub false_positives: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributionCount {
    pub correct: usize,
    pub incorrect: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribution {
    pub failure: AttributionCount,
    pub overload: AttributionCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultOutcome {
    pub fault: FaultSpec,
    /// Some probe through the target failed while the fault was active.
    pub in_scope: bool,
    pub detected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub scenario_id: String,
    pub localization: Localization,
    pub attribution: Attribution,
    pub faults: Vec<FaultOutcome>,
    /// (window, component) pairs flagged with no matching fault.
    pub false_positive_flags: Vec<(u32, ComponentId)>,
    /// Wall-clock analysis time per window, in milliseconds.
    pub window_latency_ms: Vec<f64>,
}

impl ScoreReport {
    pub fn recall(&self) -> f64 {
        let l = &self.localization;
        let denom = l.true_positives + l.false_negatives;
        if denom == 0 {
            1.0
        } else {
            l.true_positives as f64 / denom as f64
        }
    }

    /// The report without run-dependent timings.
    pub fn without_timing(&self) -> Self {
        ScoreReport {
            window_latency_ms: Vec::new(),
            ..self.clone()
        }
    }
}

/// Components whose flag is explained by `f`: the target itself and its
/// failover partner, which carries the failed-over load.
fn explains(topo: &Topology, f: &FaultSpec, c: ComponentId) -> bool {
    let partner = match f.target.kind {
        ComponentKind::DataServer => topo.ha_partner(f.target).ok(),
        ComponentKind::Mds => topo.mds_partner(f.target),
        _ => None,
    };
    c == f.target || partner == Some(c)
}

/// Faults whose target sat on the route of at least one non-ok probe while
/// active. Faults masked completely by redundancy are out of scope.
pub fn probe_visible(topo: &Topology, trace: &Trace) -> Result<Vec<bool>> {
    let mut paths: HashMap<(ComponentId, ComponentId), ProbePath> = HashMap::new();
    let mut visible = vec![false; trace.ground_truth.len()];
    for r in trace.probes.iter().filter(|r| r.status != ProbeStatus::Ok) {
        let key = (r.monitor, r.target);
        if !paths.contains_key(&key) {
            paths.insert(key, topo.enumerate_paths(r.monitor, r.target)?);
        }
        let path = &paths[&key];
        for (i, f) in trace.ground_truth.iter().enumerate() {
            if !visible[i] && f.active_at(r.epoch) && r.route(path).any(|c| c == f.target) {
                visible[i] = true;
            }
        }
    }
    Ok(visible)
}

/// Scores flagged components and verdicts against the ground truth carried
/// by `trace`. A fault is detected when its target is flagged in a window
/// it overlaps; its verdict is the one from the last such window.
pub fn score(
    topo: &Topology,
    trace: &Trace,
    flagged: &BTreeMap<u32, BTreeSet<ComponentId>>,
    diagnoses: &[Diagnosis],
    window_latency_ms: Vec<f64>,
) -> Result<ScoreReport> {
    let visible = probe_visible(topo, trace)?;
    let verdicts: HashMap<(u32, ComponentId), Verdict> = diagnoses
        .iter()
        .map(|d| ((d.window, d.component), d.verdict))
        .collect();

    let mut report = ScoreReport {
        scenario_id: trace.scenario_id.clone(),
        localization: Localization::default(),
        attribution: Attribution::default(),
        faults: Vec::new(),
        false_positive_flags: Vec::new(),
        window_latency_ms,
    };

    for (f, &in_scope) in trace.ground_truth.iter().zip(&visible) {
        let hits: Vec<u32> = flagged
            .iter()
            .filter(|(&w, set)| f.overlaps(&trace.window_epochs(w)) && set.contains(&f.target))
            .map(|(&w, _)| w)
            .collect();
        let detected = !hits.is_empty();
        let verdict = hits.last().and_then(|&w| verdicts.get(&(w, f.target)).copied());
        if in_scope {
            if detected {
                report.localization.true_positives += 1;
                let expected = if f.kind.is_failure() {
                    Verdict::Failure
                } else {
                    Verdict::Overload
                };
                let bucket = if f.kind.is_failure() {
                    &mut report.attribution.failure
                } else {
                    &mut report.attribution.overload
                };
                if verdict == Some(expected) {
                    bucket.correct += 1;
                } else {
                    bucket.incorrect += 1;
                }
            } else {
                report.localization.false_negatives += 1;
            }
        }
        report.faults.push(FaultOutcome {
            fault: *f,
            in_scope,
            detected,
            verdict,
        });
    }

    for (&w, set) in flagged {
        let epochs = trace.window_epochs(w);
        for &c in set {
            let explained = trace
                .ground_truth
                .iter()
                .any(|f| f.overlaps(&epochs) && explains(topo, f, c));
            if !explained {
                report.false_positive_flags.push((w, c));
            }
        }
    }
    let distinct: BTreeSet<ComponentId> =
        report.false_positive_flags.iter().map(|&(_, c)| c).collect();
    report.localization.false_positives = distinct.len();
    Ok(report)
}
