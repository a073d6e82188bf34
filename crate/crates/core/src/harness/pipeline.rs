use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::heatmap::emit_heatmap;
use super::scenario::build_scenario;
use super::score::{score, ScoreReport};
use crate::diagnosis::{diagnose_window, Diagnosis, LogNormalizer};
use crate::error::Result;
use crate::inference::{
    build_graph, carry_forward, flag_unhealthy, infer, ConvergenceWarning, HealthBelief,
    HealthPosterior, McmcConfig,
};
use crate::io;
use crate::monitor::{aggregate, plan_probes, select_monitors, ProbePlan};
use crate::rng;
use crate::simulator::{run_scenario, Scenario, Trace};
use crate::topology::{ComponentId, Topology};

/// Line written to `posteriors.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorRecord {
    pub window: u32,
    #[serde(flatten)]
    pub posterior: HealthPosterior,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowResult {
    pub window: u32,
    pub posteriors: BTreeMap<ComponentId, HealthPosterior>,
    pub flagged: BTreeSet<ComponentId>,
    pub diagnoses: Vec<Diagnosis>,
    pub warning: Option<ConvergenceWarning>,
    pub elapsed_ms: f64,
}

/// Topology, monitors, plan and scenario derived from a config.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub topology: Topology,
    pub plan: ProbePlan,
    pub scenario: Scenario,
}

pub fn prepare(cfg: &PipelineConfig) -> Result<Prepared> {
    cfg.validate()?;
    let topology = Topology::build(cfg.topology_spec()?)?;
    let monitors = if cfg.monitors.fixed.is_empty() {
        let candidates: Vec<ComponentId> = if cfg.monitors.candidates.is_empty() {
            topology.clients().iter().map(|c| c.id).collect()
        } else {
            cfg.monitors.candidates.clone()
        };
        select_monitors(&topology, &candidates, cfg.monitors.budget, cfg.monitors.k, cfg.seed)?
    } else {
        cfg.monitors.fixed.clone()
    };
    let plan = plan_probes(&topology, &monitors, cfg.interval_s)?.with_window(cfg.window_epochs);
    let scenario = build_scenario(&topology, cfg)?;
    Ok(Prepared {
        topology,
        plan,
        scenario,
    })
}

pub fn simulate(prepared: &Prepared, cfg: &PipelineConfig) -> Result<Trace> {
    run_scenario(&prepared.topology, &prepared.scenario, &prepared.plan, cfg.seed)
}

fn mcmc_for_window(cfg: &PipelineConfig, window: u32) -> McmcConfig {
    McmcConfig {
        seed: rng::derive_seed(cfg.mcmc.seed ^ cfg.seed, &[rng::fnv1a(b"window"), u64::from(window)]),
        ..cfg.mcmc
    }
}

/// Health inference for every window, carrying each window's posterior
/// forward as the next window's prior.
pub fn infer_windows(
    topo: &Topology,
    plan: &ProbePlan,
    trace: &Trace,
    cfg: &PipelineConfig,
) -> Result<Vec<WindowResult>> {
    let mut priors: BTreeMap<ComponentId, HealthBelief> = BTreeMap::new();
    let mut history = Vec::new();
    let mut out = Vec::new();
    for window in 0..trace.window_count() {
        let started = Instant::now();
        let agg = aggregate(&trace.probes, plan, window);
        if !agg.empty.is_empty() {
            log::warn!("window {window}: {} planned paths have no records", agg.empty.len());
        }
        let graph = build_graph(topo, &agg.observations, &priors)?;
        let result = infer(&graph, &mcmc_for_window(cfg, window))?;
        history.push(result.posteriors.clone());
        let flagged = flag_unhealthy(&history, &cfg.flag);
        priors = carry_forward(&result.posteriors, cfg.forgetting);
        out.push(WindowResult {
            window,
            posteriors: result.posteriors,
            flagged,
            diagnoses: Vec::new(),
            warning: result.warning,
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(out)
}

/// Attributes causes for the flagged components of every window.
pub fn diagnose_windows(
    trace: &Trace,
    flagged: &BTreeMap<u32, BTreeSet<ComponentId>>,
    cfg: &PipelineConfig,
) -> Result<Vec<Diagnosis>> {
    let normalizer = LogNormalizer::default();
    let mut out = Vec::new();
    for (&w, set) in flagged {
        out.extend(diagnose_window(
            &trace.metrics,
            &trace.logs,
            set,
            trace.window_epochs(w),
            w,
            &normalizer,
            &cfg.diagnosis,
        )?);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub prepared: Prepared,
    pub trace: Trace,
    pub windows: Vec<WindowResult>,
    pub score: ScoreReport,
}

impl PipelineOutput {
    pub fn flagged(&self) -> BTreeMap<u32, BTreeSet<ComponentId>> {
        self.windows
            .iter()
            .map(|w| (w.window, w.flagged.clone()))
            .collect()
    }

    pub fn diagnoses(&self) -> Vec<Diagnosis> {
        self.windows.iter().flat_map(|w| w.diagnoses.clone()).collect()
    }

    pub fn posterior_records(&self) -> Vec<PosteriorRecord> {
        posterior_records(&self.windows)
    }
}

pub fn posterior_records(windows: &[WindowResult]) -> Vec<PosteriorRecord> {
    windows
        .iter()
        .flat_map(|w| {
            w.posteriors.values().map(|p| PosteriorRecord {
                window: w.window,
                posterior: *p,
                flagged: w.flagged.contains(&p.component),
            })
        })
        .collect()
}

/// Simulate, infer, diagnose and score one scenario.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let prepared = prepare(cfg)?;
    let trace = simulate(&prepared, cfg)?;
    let mut windows = infer_windows(&prepared.topology, &prepared.plan, &trace, cfg)?;
    let normalizer = LogNormalizer::default();
    for w in &mut windows {
        let started = Instant::now();
        w.diagnoses = diagnose_window(
            &trace.metrics,
            &trace.logs,
            &w.flagged,
            trace.window_epochs(w.window),
            w.window,
            &normalizer,
            &cfg.diagnosis,
        )?;
        w.elapsed_ms += started.elapsed().as_secs_f64() * 1e3;
    }
    let flagged = windows.iter().map(|w| (w.window, w.flagged.clone())).collect();
    let diagnoses: Vec<Diagnosis> = windows.iter().flat_map(|w| w.diagnoses.clone()).collect();
    let latency = windows.iter().map(|w| w.elapsed_ms).collect();
    let score = score(&prepared.topology, &trace, &flagged, &diagnoses, latency)?;
    Ok(PipelineOutput {
        prepared,
        trace,
        windows,
        score,
    })
}

/// Output file names inside an output directory.
pub mod files {
    pub const TOPOLOGY: &str = "topology.json";
    pub const PLAN: &str = "plan.json";
    pub const SCENARIO: &str = "scenario.json";
    pub const TRACE: &str = "trace.jsonl";
    pub const GROUND_TRUTH: &str = "ground_truth.json";
    pub const POSTERIORS: &str = "posteriors.jsonl";
    pub const DIAGNOSES: &str = "diagnoses.jsonl";
    pub const SCORE: &str = "score.json";

    pub fn heatmap(window: u32, domain: u32) -> String {
        format!("heatmap_w{window}_d{domain}.csv")
    }
}

/// Writes heatmap CSVs for every window; returns the paths written.
pub fn write_heatmaps(
    topo: &Topology,
    plan: &ProbePlan,
    trace: &Trace,
    dir: &Path,
) -> Result<Vec<std::path::PathBuf>> {
    let mut written = Vec::new();
    for w in 0..trace.window_count() {
        for m in emit_heatmap(topo, plan, trace, w)? {
            let p = dir.join(files::heatmap(w, m.domain));
            m.write_csv(&p)?;
            written.push(p);
        }
    }
    Ok(written)
}

/// Writes every artifact of a pipeline run into `dir`.
pub fn write_outputs(out: &PipelineOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let p = &out.prepared;
    io::write_json(&dir.join(files::TOPOLOGY), &p.topology.document())?;
    io::write_json(&dir.join(files::PLAN), &p.plan)?;
    io::write_json(&dir.join(files::SCENARIO), &p.scenario)?;
    io::write_trace(&out.trace, &dir.join(files::TRACE), &dir.join(files::GROUND_TRUTH))?;
    io::write_jsonl(&dir.join(files::POSTERIORS), &out.posterior_records())?;
    io::write_jsonl(&dir.join(files::DIAGNOSES), &out.diagnoses())?;
    io::write_json(&dir.join(files::SCORE), &out.score)?;
    write_heatmaps(&p.topology, &p.plan, &out.trace, dir)?;
    Ok(())
}

/// Flagged sets per window recovered from posterior records.
pub fn flagged_from_records(records: &[PosteriorRecord]) -> BTreeMap<u32, BTreeSet<ComponentId>> {
    let mut out: BTreeMap<u32, BTreeSet<ComponentId>> = BTreeMap::new();
    for r in records {
        let e = out.entry(r.window).or_default();
        if r.flagged {
            e.insert(r.posterior.component);
        }
    }
    out
}
