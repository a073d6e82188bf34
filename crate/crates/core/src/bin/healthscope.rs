//! Command-line driver for the health localization pipeline.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use healthscope::harness::{
    self, files, flagged_from_records, PipelineConfig, PosteriorRecord,
};
use healthscope::monitor::ProbePlan;
use healthscope::simulator::Trace;
use healthscope::{io, Result, Topology};

#[derive(Parser)]
#[command(name = "healthscope", version, about = "Probe-based health localization and root-cause diagnosis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML pipeline config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Overrides the number of inference windows.
    #[arg(long)]
    windows: Option<u32>,
    /// Topology preset: minimal, ci or full.
    #[arg(long)]
    scale: Option<String>,
}

impl Common {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.windows {
            cfg.windows = w;
        }
        if let Some(s) = &self.scale {
            cfg.scale = s.clone();
            cfg.topology = None;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn dir(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.out_dir)?;
        Ok(&self.out_dir)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Topology operations.
    Topo {
        #[command(subcommand)]
        action: TopoAction,
    },
    /// Simulation operations.
    Sim {
        #[command(subcommand)]
        action: SimAction,
    },
    /// Infer component health from a trace in the output directory.
    Infer(Common),
    /// Attribute causes for flagged components.
    Diagnose(Common),
    /// Score posteriors and diagnoses against the ground truth.
    Score(Common),
    /// Write per-window, per-domain failure-ratio heatmaps.
    Heatmap(Common),
    /// Run every stage end to end.
    Pipeline(Common),
}

#[derive(Subcommand)]
enum TopoAction {
    /// Build the topology and write it as JSON.
    Gen(Common),
}

#[derive(Subcommand)]
enum SimAction {
    /// Simulate the scenario and write the trace, plan and ground truth.
    Run(Common),
}

fn load_trace(dir: &Path, with_truth: bool) -> Result<Trace> {
    let truth = dir.join(files::GROUND_TRUTH);
    io::read_trace(
        &dir.join(files::TRACE),
        with_truth.then_some(truth.as_path()),
    )
}

fn topology(cfg: &PipelineConfig) -> Result<Topology> {
    Topology::build(cfg.topology_spec()?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Topo {
            action: TopoAction::Gen(c),
        } => {
            let cfg = c.load()?;
            let topo = topology(&cfg)?;
            let path = c.dir()?.join(files::TOPOLOGY);
            io::write_json(&path, &topo.document())?;
            println!(
                "{} components, {} HA pairs, {} LNET groups -> {}",
                topo.component_count(),
                topo.ha_pairs().len(),
                topo.lnet_groups().len(),
                path.display()
            );
        }
        Command::Sim {
            action: SimAction::Run(c),
        } => {
            let cfg = c.load()?;
            let dir = c.dir()?;
            let prepared = harness::prepare(&cfg)?;
            let trace = harness::simulate(&prepared, &cfg)?;
            io::write_json(&dir.join(files::TOPOLOGY), &prepared.topology.document())?;
            io::write_json(&dir.join(files::PLAN), &prepared.plan)?;
            io::write_json(&dir.join(files::SCENARIO), &prepared.scenario)?;
            io::write_trace(&trace, &dir.join(files::TRACE), &dir.join(files::GROUND_TRUTH))?;
            let counts = prepared.plan.counts();
            println!(
                "{} monitors; per epoch {} CrWr + {} RmEx + {} WrEx; {} probe records over {} epochs",
                prepared.plan.monitors.len(),
                counts.crwr,
                counts.rmex,
                counts.wrex,
                trace.probes.len(),
                trace.horizon_epochs
            );
        }
        Command::Infer(c) => {
            let cfg = c.load()?;
            let dir = c.dir()?;
            let topo = topology(&cfg)?;
            let plan: ProbePlan = io::read_json(&dir.join(files::PLAN))?;
            let trace = load_trace(dir, false)?;
            let windows = harness::infer_windows(&topo, &plan, &trace, &cfg)?;
            io::write_jsonl(&dir.join(files::POSTERIORS), &harness::posterior_records(&windows))?;
            for w in &windows {
                println!("window {}: {} flagged", w.window, w.flagged.len());
            }
        }
        Command::Diagnose(c) => {
            let cfg = c.load()?;
            let dir = c.dir()?;
            let trace = load_trace(dir, false)?;
            let records: Vec<PosteriorRecord> = io::read_jsonl(&dir.join(files::POSTERIORS))?;
            let diagnoses =
                harness::diagnose_windows(&trace, &flagged_from_records(&records), &cfg)?;
            io::write_jsonl(&dir.join(files::DIAGNOSES), &diagnoses)?;
            for d in &diagnoses {
                println!("window {} {}: {:?}", d.window, d.component, d.verdict);
            }
        }
        Command::Score(c) => {
            let cfg = c.load()?;
            let dir = c.dir()?;
            let topo = topology(&cfg)?;
            let trace = load_trace(dir, true)?;
            let records: Vec<PosteriorRecord> = io::read_jsonl(&dir.join(files::POSTERIORS))?;
            let diagnoses = io::read_jsonl(&dir.join(files::DIAGNOSES))?;
            let report = harness::score(
                &topo,
                &trace,
                &flagged_from_records(&records),
                &diagnoses,
                Vec::new(),
            )?;
            io::write_json(&dir.join(files::SCORE), &report)?;
            print_score(&report);
        }
        Command::Heatmap(c) => {
            let cfg = c.load()?;
            let dir = c.dir()?;
            let topo = topology(&cfg)?;
            let plan: ProbePlan = io::read_json(&dir.join(files::PLAN))?;
            let trace = load_trace(dir, false)?;
            let written = harness::write_heatmaps(&topo, &plan, &trace, dir)?;
            println!("wrote {} heatmaps", written.len());
        }
        Command::Pipeline(c) => {
            let cfg = c.load()?;
            let dir = c.dir()?.to_path_buf();
            let out = harness::run_pipeline(&cfg)?;
            harness::write_outputs(&out, &dir)?;
            print_score(&out.score);
        }
    }
    Ok(())
}

fn print_score(r: &harness::ScoreReport) {
    let l = &r.localization;
    let a = &r.attribution;
    println!(
        "{}: TP {} FN {} FP {} | failure {}/{} overload {}/{} correct",
        r.scenario_id,
        l.true_positives,
        l.false_negatives,
        l.false_positives,
        a.failure.correct,
        a.failure.correct + a.failure.incorrect,
        a.overload.correct,
        a.overload.correct + a.overload.incorrect,
    );
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
