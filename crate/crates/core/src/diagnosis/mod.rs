//! Root-cause attribution for unhealthy components: metric outliers point
//! at overload, log templates unseen on healthy peers point at failure.

mod lof;
mod logs;
mod overload;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::{LogRecord, MetricSample};
use crate::topology::ComponentId;

pub use lof::{default_k, lof};
pub use logs::{log_delta, template_logs, LogEvidence, LogNormalizer, LogTemplate};
pub use overload::{detect_overload, Metric, OverloadConfig, OverloadEvidence, PeerClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Failure,
    Overload,
    Both,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub window: u32,
    pub component: ComponentId,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_evidence: Option<LogEvidence>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overload_evidence: Vec<OverloadEvidence>,
}

/// One verdict per unhealthy component: failure when the log delta is
/// non-empty, overload when some metric is an outlier, both, or unknown.
pub fn attribute(
    window: u32,
    unhealthy: &BTreeSet<ComponentId>,
    overload: &[OverloadEvidence],
    logs: &BTreeMap<ComponentId, LogEvidence>,
) -> Vec<Diagnosis> {
    unhealthy
        .iter()
        .map(|&c| {
            let ov: Vec<OverloadEvidence> =
                overload.iter().filter(|e| e.component == c).copied().collect();
            let le = logs.get(&c).filter(|e| !e.delta.is_empty()).cloned();
            let verdict = match (le.is_some(), !ov.is_empty()) {
                (true, true) => Verdict::Both,
                (true, false) => Verdict::Failure,
                (false, true) => Verdict::Overload,
                (false, false) => Verdict::Unknown,
            };
            Diagnosis {
                window,
                component: c,
                verdict,
                log_evidence: le,
                overload_evidence: ov,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosisConfig {
    pub overload: OverloadConfig,
    /// Templates seen fewer times than this on the unhealthy component are
    /// dropped from its delta. 1 keeps everything.
    pub min_occurrences: usize,
}

impl Default for DiagnosisConfig {
    fn default() -> Self {
        DiagnosisConfig {
            overload: OverloadConfig::default(),
            min_occurrences: 1,
        }
    }
}

/// Log deltas for unhealthy components against the healthy members of
/// their peer class that logged in the window.
pub fn collect_log_evidence(
    records: &[LogRecord],
    unhealthy: &BTreeSet<ComponentId>,
    normalizer: &LogNormalizer,
    min_occurrences: usize,
) -> Result<BTreeMap<ComponentId, LogEvidence>> {
    let templates = template_logs(records, normalizer);
    let mut counts: HashMap<(ComponentId, &str), usize> = HashMap::new();
    let normalized: Vec<(ComponentId, String)> = if min_occurrences > 1 {
        records
            .iter()
            .filter(|r| unhealthy.contains(&r.component))
            .map(|r| (r.component, normalizer.normalize(&r.text)))
            .collect()
    } else {
        Vec::new()
    };
    for (c, t) in &normalized {
        *counts.entry((*c, t.as_str())).or_insert(0) += 1;
    }

    let mut out = BTreeMap::new();
    let empty = BTreeSet::new();
    for &c in unhealthy {
        let Some(class) = PeerClass::of(c.kind) else {
            continue;
        };
        let peers: Vec<ComponentId> = templates
            .keys()
            .filter(|p| !unhealthy.contains(p) && PeerClass::of(p.kind) == Some(class))
            .copied()
            .collect();
        let healthy: Vec<&BTreeSet<LogTemplate>> = peers.iter().map(|p| &templates[p]).collect();
        let mine = templates.get(&c).unwrap_or(&empty);
        let mut delta = match log_delta(mine, &healthy) {
            Ok(d) => d,
            Err(Error::Config(msg)) => {
                log::warn!("no log baseline for {c}: {msg}");
                continue;
            }
            Err(e) => return Err(e),
        };
        if min_occurrences > 1 {
            delta.retain(|t| counts.get(&(c, t.as_str())).copied().unwrap_or(0) >= min_occurrences);
        }
        out.insert(
            c,
            LogEvidence {
                component: c,
                delta,
                comparison_group: peers,
            },
        );
    }
    Ok(out)
}

/// Runs both evidence collectors over one window and attributes causes.
pub fn diagnose_window(
    metrics: &[MetricSample],
    logs: &[LogRecord],
    unhealthy: &BTreeSet<ComponentId>,
    epochs: Range<u32>,
    window: u32,
    normalizer: &LogNormalizer,
    cfg: &DiagnosisConfig,
) -> Result<Vec<Diagnosis>> {
    if unhealthy.is_empty() {
        return Ok(Vec::new());
    }
    let overload = detect_overload(metrics, unhealthy, epochs.clone(), window, &cfg.overload)?;
    let in_window: Vec<LogRecord> = logs
        .iter()
        .filter(|r| epochs.contains(&r.epoch))
        .cloned()
        .collect();
    let log_ev = collect_log_evidence(&in_window, unhealthy, normalizer, cfg.min_occurrences)?;
    Ok(attribute(window, unhealthy, &overload, &log_ev))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(c: ComponentId) -> OverloadEvidence {
        OverloadEvidence {
            component: c,
            metric: Metric::Loadavg,
            lof_score: 3.0,
            k: 5,
            window: 0,
            value: 300.0,
            group_median: 30.0,
        }
    }

    fn le(c: ComponentId, delta: &[&str]) -> LogEvidence {
        LogEvidence {
            component: c,
            delta: delta.iter().map(|s| s.to_string()).collect(),
            comparison_group: vec![],
        }
    }

    #[test]
    fn verdict_lattice() {
        let (a, b, c, d) = (
            ComponentId::ds(0),
            ComponentId::ds(1),
            ComponentId::ds(2),
            ComponentId::ds(3),
        );
        let unhealthy: BTreeSet<_> = [a, b, c, d].into();
        let logs: BTreeMap<_, _> = [(a, le(a, &["T"])), (c, le(c, &["T"])), (d, le(d, &[]))].into();
        let out = attribute(0, &unhealthy, &[ev(b), ev(c)], &logs);
        let v: Vec<_> = out.iter().map(|d| d.verdict).collect();
        assert_eq!(
            v,
            vec![Verdict::Failure, Verdict::Overload, Verdict::Both, Verdict::Unknown]
        );
        assert!(out[0].log_evidence.is_some() && out[0].overload_evidence.is_empty());
        assert!(out[3].log_evidence.is_none());
    }

    #[test]
    fn min_occurrences_filters_rare_templates() {
        let rec = |c: ComponentId, t: &str| LogRecord {
            component: c,
            epoch: 0,
            text: t.into(),
        };
        let logs = vec![
            rec(ComponentId::ds(0), "disk gone"),
            rec(ComponentId::ds(0), "disk gone"),
            rec(ComponentId::ds(0), "odd noise"),
            rec(ComponentId::ds(1), "routine"),
        ];
        let n = LogNormalizer::default();
        let unhealthy: BTreeSet<_> = [ComponentId::ds(0)].into();
        let all = collect_log_evidence(&logs, &unhealthy, &n, 1).unwrap();
        assert_eq!(all[&ComponentId::ds(0)].delta.len(), 2);
        let filtered = collect_log_evidence(&logs, &unhealthy, &n, 2).unwrap();
        assert_eq!(
            filtered[&ComponentId::ds(0)].delta,
            ["disk gone".to_string()].into()
        );
    }
}
