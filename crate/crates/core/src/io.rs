//! File formats: line-delimited trace records with a separate ground-truth
//! sidecar, and generic JSON / JSONL helpers for the other outputs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::{FaultSpec, LogRecord, MetricSample, ProbeResult, Trace};

/// Header line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub scenario_id: String,
    pub seed: u64,
    pub horizon_epochs: u32,
    pub window_epochs: u32,
    pub slo_ms: f64,
    pub timeout_ms: f64,
}

/// One line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TraceRecord {
    Meta(TraceMeta),
    Probe(ProbeResult),
    Metric(MetricSample),
    Log(LogRecord),
}

/// Ground truth written next to the trace, never read by the pipeline stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub scenario_id: String,
    pub faults: Vec<FaultSpec>,
}

pub fn write_trace(trace: &Trace, trace_path: &Path, truth_path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(trace_path)?);
    let meta = TraceRecord::Meta(TraceMeta {
        scenario_id: trace.scenario_id.clone(),
        seed: trace.seed,
        horizon_epochs: trace.horizon_epochs,
        window_epochs: trace.window_epochs,
        slo_ms: trace.slo_ms,
        timeout_ms: trace.timeout_ms,
    });
    write_line(&mut w, &meta)?;
    for p in &trace.probes {
        write_line(&mut w, &TraceRecord::Probe(p.clone()))?;
    }
    for m in &trace.metrics {
        write_line(&mut w, &TraceRecord::Metric(*m))?;
    }
    for l in &trace.logs {
        write_line(&mut w, &TraceRecord::Log(l.clone()))?;
    }
    w.flush()?;
    write_json(
        truth_path,
        &GroundTruth {
            scenario_id: trace.scenario_id.clone(),
            faults: trace.ground_truth.clone(),
        },
    )
}

/// Reads a trace file. Ground truth is attached only when a sidecar is given.
pub fn read_trace(trace_path: &Path, truth_path: Option<&Path>) -> Result<Trace> {
    let records: Vec<TraceRecord> = read_jsonl(trace_path)?;
    let mut meta = None;
    let (mut probes, mut metrics, mut logs) = (Vec::new(), Vec::new(), Vec::new());
    for r in records {
        match r {
            TraceRecord::Meta(m) => {
                if meta.replace(m).is_some() {
                    return Err(Error::Parse("trace has more than one meta record".into()));
                }
            }
            TraceRecord::Probe(p) => probes.push(p),
            TraceRecord::Metric(m) => metrics.push(m),
            TraceRecord::Log(l) => logs.push(l),
        }
    }
    let meta = meta.ok_or_else(|| Error::Parse("trace has no meta record".into()))?;
    let ground_truth = match truth_path {
        Some(p) => {
            let gt: GroundTruth = read_json(p)?;
            if gt.scenario_id != meta.scenario_id {
                return Err(Error::Config(format!(
                    "ground truth is for `{}`, trace is `{}`",
                    gt.scenario_id, meta.scenario_id
                )));
            }
            gt.faults
        }
        None => Vec::new(),
    };
    Ok(Trace {
        scenario_id: meta.scenario_id,
        seed: meta.seed,
        horizon_epochs: meta.horizon_epochs,
        window_epochs: meta.window_epochs,
        slo_ms: meta.slo_ms,
        timeout_ms: meta.timeout_ms,
        probes,
        metrics,
        logs,
        ground_truth,
    })
}

fn write_line<W: Write, T: Serialize>(w: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for it in items {
        write_line(&mut w, it)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path)?;
    serde_json::from_reader(BufReader::new(f))
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}
