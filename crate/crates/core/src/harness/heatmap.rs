use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monitor::ProbePlan;
use crate::simulator::{ProbeStatus, Trace};
use crate::topology::{ComponentId, Topology};

/// Share of probes from each monitor to each target in one filesystem
/// domain that missed the SLO during a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapMatrix {
    pub window: u32,
    pub domain: u32,
    pub rows: Vec<ComponentId>,
    pub cols: Vec<ComponentId>,
    /// `cells[r][c]` in [0, 1]; `None` when no probe was recorded.
    pub cells: Vec<Vec<Option<f64>>>,
    pub denominators: Vec<Vec<u32>>,
}

impl HeatmapMatrix {
    pub fn cell(&self, row: ComponentId, col: ComponentId) -> Option<f64> {
        let r = self.rows.iter().position(|&x| x == row)?;
        let c = self.cols.iter().position(|&x| x == col)?;
        self.cells[r][c]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["monitor".to_string()];
        header.extend(self.cols.iter().map(ToString::to_string));
        w.write_record(&header)?;
        for (r, row) in self.rows.iter().enumerate() {
            let mut rec = vec![row.to_string()];
            rec.extend(self.cells[r].iter().map(|c| match c {
                Some(v) => format!("{v:.4}"),
                None => String::new(),
            }));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One matrix per filesystem domain for `window`. Rows are the plan's
/// monitors, columns every probe target in the domain.
pub fn emit_heatmap(
    topo: &Topology,
    plan: &ProbePlan,
    trace: &Trace,
    window: u32,
) -> Result<Vec<HeatmapMatrix>> {
    let epochs = trace.window_epochs(window);
    let mut counts: HashMap<(ComponentId, ComponentId), (u32, u32)> = HashMap::new();
    for r in trace.probes.iter().filter(|r| epochs.contains(&r.epoch)) {
        let e = counts.entry((r.monitor, r.target)).or_insert((0, 0));
        e.0 += 1;
        if r.status != ProbeStatus::Ok {
            e.1 += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::EmptyWindow(window));
    }
    let mut by_domain: BTreeMap<u32, Vec<ComponentId>> = BTreeMap::new();
    for t in topo.probe_targets() {
        if let Some(d) = topo.domain_of(t) {
            by_domain.entry(d).or_default().push(t);
        }
    }
    Ok(by_domain
        .into_iter()
        .map(|(domain, cols)| {
            let mut cells = Vec::with_capacity(plan.monitors.len());
            let mut denominators = Vec::with_capacity(plan.monitors.len());
            for &m in &plan.monitors {
                let (row, den): (Vec<_>, Vec<_>) = cols
                    .iter()
                    .map(|&t| match counts.get(&(m, t)) {
                        Some(&(n, bad)) if n > 0 => (Some(f64::from(bad) / f64::from(n)), n),
                        _ => (None, 0),
                    })
                    .unzip();
                cells.push(row);
                denominators.push(den);
            }
            HeatmapMatrix {
                window,
                domain,
                rows: plan.monitors.clone(),
                cols,
                cells,
                denominators,
            }
        })
        .collect())
}
