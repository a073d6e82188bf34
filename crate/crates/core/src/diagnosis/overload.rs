use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::lof::{default_k, lof};
use crate::error::{Error, Result};
use crate::simulator::MetricSample;
use crate::topology::{ComponentId, ComponentKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Loadavg,
    Await,
    Utilization,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Loadavg, Metric::Await, Metric::Utilization];

    pub fn read(self, s: &MetricSample) -> Option<f64> {
        match self {
            Metric::Loadavg => s.loadavg,
            Metric::Await => s.await_ms,
            Metric::Utilization => s.utilization,
        }
    }
}

/// Homogeneous peer groups: servers are compared with servers and disks with
/// disks, whatever their role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeerClass {
    Server,
    Disk,
    Router,
}

impl PeerClass {
    pub fn of(kind: ComponentKind) -> Option<Self> {
        match kind {
            ComponentKind::Mds | ComponentKind::Mgs | ComponentKind::DataServer => {
                Some(PeerClass::Server)
            }
            ComponentKind::Osd | ComponentKind::Mdt => Some(PeerClass::Disk),
            ComponentKind::Lnet => Some(PeerClass::Router),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OverloadConfig {
    pub lof_threshold: f64,
    /// Fixed neighborhood size; `None` uses `max(5, ceil(10% of points))`.
    pub k: Option<usize>,
}

impl Default for OverloadConfig {
    fn default() -> Self {
        OverloadConfig {
            lof_threshold: 1.5,
            k: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverloadEvidence {
    pub component: ComponentId,
    pub metric: Metric,
    pub lof_score: f64,
    pub k: usize,
    pub window: u32,
    /// Component's mean metric value over the window.
    pub value: f64,
    pub group_median: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// LOF outlier detection over peer groups.
///
/// Each metric is scored on its own in one dimension, one epoch at a time,
/// so the neighborhood size follows the number of peers rather than the
/// window length. A component's score is the median of its per-epoch
/// scores, and an epoch where it reads at or below the group median counts
/// as an inlier. Evidence is reported for unhealthy components scoring above
/// the threshold whose mean value over the window also exceeds the median of
/// the peer means.
pub fn detect_overload(
    metrics: &[MetricSample],
    unhealthy: &BTreeSet<ComponentId>,
    epochs: Range<u32>,
    window: u32,
    cfg: &OverloadConfig,
) -> Result<Vec<OverloadEvidence>> {
    for c in unhealthy {
        let has = metrics
            .iter()
            .any(|m| m.component == *c && epochs.contains(&m.epoch));
        if !has && PeerClass::of(c.kind).is_some_and(|p| p != PeerClass::Router) {
            log::info!("{c} has no metrics in window {window}; skipping overload check");
        }
    }
    let mut out = Vec::new();
    for metric in Metric::ALL {
        let mut groups: BTreeMap<PeerClass, BTreeMap<u32, Vec<(ComponentId, f64)>>> =
            BTreeMap::new();
        for m in metrics.iter().filter(|m| epochs.contains(&m.epoch)) {
            if let (Some(class), Some(v)) = (PeerClass::of(m.component.kind), metric.read(m)) {
                groups
                    .entry(class)
                    .or_default()
                    .entry(m.epoch)
                    .or_default()
                    .push((m.component, v));
            }
        }
        for by_epoch in groups.values() {
            if !by_epoch.values().flatten().any(|(c, _)| unhealthy.contains(c)) {
                continue;
            }
            let mut per: BTreeMap<ComponentId, (Vec<f64>, f64)> = BTreeMap::new();
            let mut k_used = 0;
            for (epoch, points) in by_epoch {
                let k = cfg.k.unwrap_or_else(|| default_k(points.len()));
                let scores = match lof(
                    &points.iter().map(|&(_, v)| vec![v]).collect::<Vec<_>>(),
                    k,
                ) {
                    Ok(s) => s,
                    Err(Error::InsufficientData(msg)) => {
                        log::warn!("skipping {metric:?} epoch {epoch}: {msg}");
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                k_used = k_used.max(k);
                let epoch_med = median(points.iter().map(|&(_, v)| v).collect());
                for (&(c, v), s) in points.iter().zip(scores) {
                    let e = per.entry(c).or_default();
                    // A sparse low reading says nothing about load.
                    e.0.push(if v > epoch_med { s } else { s.min(1.0) });
                    e.1 += v;
                }
            }
            if per.is_empty() {
                continue;
            }
            let med = median(per.values().map(|(s, v)| v / s.len() as f64).collect());
            for (&c, (s, v)) in &per {
                if !unhealthy.contains(&c) {
                    continue;
                }
                let value = v / s.len() as f64;
                let score = median(s.clone());
                if score > cfg.lof_threshold && value > med {
                    out.push(OverloadEvidence {
                        component: c,
                        metric,
                        lof_score: score,
                        k: k_used,
                        window,
                        value,
                        group_median: med,
                    });
                }
            }
        }
    }
    out.sort_by(|a, b| (a.component, a.metric).cmp(&(b.component, b.metric)));
    Ok(out)
}
