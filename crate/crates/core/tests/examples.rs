//! Worked examples run end to end on seeded scenarios, each checked against
//! an independent expectation.

mod common;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, LogNormal};

use common::grid_posterior_means;
use common::GridPath;
use healthscope::diagnosis::{LogNormalizer, Metric, Verdict};
use healthscope::harness::{emit_heatmap, run_pipeline, PipelineConfig};
use healthscope::inference::{infer, FactorGraph, HealthBelief, McmcConfig};
use healthscope::monitor::{plan_probes, OpKind, ProbePlan};
use healthscope::simulator::{
    run_scenario, sample_outcome, FaultKind, FaultSpec, LatencyModel, LogNormalParams,
    ProbeStatus, Scenario, Trace,
};
use healthscope::topology::check_identifiability;
use healthscope::{ComponentId, ComponentKind, Error, Topology, TopologySpec};

fn ci() -> Topology {
    Topology::build(TopologySpec::ci()).unwrap()
}

fn clients(t: &Topology) -> Vec<ComponentId> {
    t.components_of(ComponentKind::Client).collect()
}

fn id(kind: ComponentKind, index: u32) -> ComponentId {
    ComponentId::new(kind, index)
}

fn simulate(t: &Topology, faults: &[FaultSpec], epochs: u32, seed: u64) -> (ProbePlan, Trace) {
    let plan = plan_probes(t, &clients(t), 60).unwrap();
    let mut s = Scenario::new(t, "example", epochs);
    for f in faults {
        s = s.inject(t, f.clone()).unwrap();
    }
    let trace = run_scenario(t, &s, &plan, seed).unwrap();
    (plan, trace)
}

#[test]
fn baseline_success_rate_matches_lognormal_cdf() {
    let t = Topology::build(TopologySpec::minimal()).unwrap();
    let path = t
        .enumerate_paths(ComponentId::client(0), id(ComponentKind::Osd, 0))
        .unwrap();
    let p = LogNormalParams {
        mu: 20f64.ln(),
        sigma: 0.5,
    };
    for (params, slo) in [(p, 1000.0), (p, 25.0), (LatencyModel::default().wrex, 1000.0)] {
        let model = LatencyModel {
            crwr: params,
            wrex: params,
            rmex: params,
            slo_ms: slo,
            ..LatencyModel::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let ok = (0..draws)
            .filter(|_| {
                sample_outcome(&path, OpKind::WrEx, &[], 0, &model, &mut rng).status
                    == ProbeStatus::Ok
            })
            .count();
        let rate = ok as f64 / draws as f64;
        let expected = LogNormal::new(params.mu, params.sigma).unwrap().cdf(slo);
        assert!(
            (rate - expected).abs() <= 0.005,
            "slo {slo}: {rate} vs closed form {expected}"
        );
        if slo == 1000.0 {
            assert!(rate >= 0.99);
        }
    }
}

#[test]
fn zero_fault_traces_rarely_time_out() {
    let t = ci();
    let (_, trace) = simulate(&t, &[], 5, 4);
    let timeouts = trace
        .probes
        .iter()
        .filter(|r| r.status == ProbeStatus::Timeout)
        .count();
    assert!((timeouts as f64) < 0.005 * trace.probes.len() as f64);
    assert!(trace.ground_truth.is_empty());
}

#[test]
fn metadata_overload_inflates_metadata_latency() {
    let t = ci();
    let mds0 = id(ComponentKind::Mds, 0);
    let mds1 = id(ComponentKind::Mds, 1);
    let fault = FaultSpec::new(FaultKind::P5Overload, mds0, 0, 2).with_severity(0.9);
    let (_, trace) = simulate(&t, &[fault], 3, 8);
    let median = |target: ComponentId, op: OpKind| {
        let mut v: Vec<f64> = trace
            .probes
            .iter()
            .filter(|r| r.target == target && r.op == op)
            .map(|r| r.latency_ms)
            .collect();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    // Expected inflation is 1 + 0.9 * 6 = 6.4 on the median.
    for op in [OpKind::CrWr, OpKind::RmEx] {
        let ratio = median(mds0, op) / median(mds1, op);
        assert!((4.5..9.0).contains(&ratio), "{op:?}: ratio {ratio}");
    }
}

#[test]
fn injecting_on_a_missing_component_is_not_found() {
    let t = ci();
    let s = Scenario::new(&t, "missing", 3);
    let fault = FaultSpec::new(FaultKind::P1FailStop, id(ComponentKind::DataServer, 999), 0, 1);
    assert!(matches!(s.inject(&t, fault), Err(Error::NotFound(_))));
}

#[test]
fn heatmap_shows_a_failed_server_as_a_column() {
    let t = ci();
    let ds = id(ComponentKind::DataServer, 9);
    let fault = FaultSpec::new(FaultKind::P1FailStop, ds, 0, 4);
    let (plan, trace) = simulate(&t, &[fault], 5, 2);
    let maps = emit_heatmap(&t, &plan, &trace, 0).unwrap();
    let domain = t.domain_of(ds).unwrap();
    let m = maps.iter().find(|m| m.domain == domain).unwrap();
    for &row in &m.rows {
        assert!(m.cell(row, ds).unwrap() > 0.95);
        for &col in m.cols.iter().filter(|&&c| c != ds) {
            assert!(m.cell(row, col).unwrap() < 0.05, "{row} -> {col}");
        }
    }
}

#[test]
fn heatmap_shows_a_network_outage_as_rows() {
    let t = ci();
    let cn = id(ComponentKind::ComputeNet, 0);
    let fault = FaultSpec::new(FaultKind::P1FailStop, cn, 0, 4);
    let (plan, trace) = simulate(&t, &[fault], 5, 3);
    let behind: Vec<ComponentId> = t
        .clients()
        .iter()
        .filter(|c| c.network == 0)
        .map(|c| c.id)
        .collect();
    assert!(!behind.is_empty() && behind.len() < plan.monitors.len());
    for m in emit_heatmap(&t, &plan, &trace, 0).unwrap() {
        for &row in &m.rows {
            for &col in &m.cols {
                let v = m.cell(row, col).unwrap();
                if behind.contains(&row) {
                    assert!(v > 0.95, "{row} -> {col}: {v}");
                } else {
                    assert!(v < 0.05, "{row} -> {col}: {v}");
                }
            }
        }
    }
}

#[test]
fn healthy_heatmap_is_quiet_and_denominators_follow_the_plan() {
    let t = ci();
    let (plan, trace) = simulate(&t, &[], 5, 5);
    let epochs = trace.window_epochs(0).len() as u32;
    for m in emit_heatmap(&t, &plan, &trace, 0).unwrap() {
        for (i, &row) in m.rows.iter().enumerate() {
            for (j, &col) in m.cols.iter().enumerate() {
                assert!(m.cells[i][j].unwrap() < 0.02);
                let per_pair = plan
                    .probes
                    .iter()
                    .filter(|p| p.monitor == row && p.target == col)
                    .count() as u32;
                assert!(per_pair > 0);
                assert_eq!(m.denominators[i][j], per_pair * epochs);
            }
        }
    }
}

fn ci_config(faults: Vec<FaultSpec>, windows: u32, seed: u64) -> PipelineConfig {
    PipelineConfig {
        scale: "ci".into(),
        seed,
        windows,
        faults,
        ..PipelineConfig::default()
    }
}

#[test]
fn fail_stop_server_is_flagged_with_its_error_template() {
    let ds17 = id(ComponentKind::DataServer, 17);
    let fault = FaultSpec::new(FaultKind::P1FailStop, ds17, 5, 9);
    let out = run_pipeline(&ci_config(vec![fault], 2, 21)).unwrap();

    assert!(!out.flagged()[&0].contains(&ds17));
    assert!(out.flagged()[&1].contains(&ds17));
    assert_eq!(out.score.localization.true_positives, 1);
    assert_eq!(out.score.localization.false_positives, 0);

    let normalizer = LogNormalizer::default();
    let injected = out
        .trace
        .logs
        .iter()
        .find(|r| r.component == ds17 && r.text.contains("rejecting I/O to offline device"))
        .map(|r| normalizer.normalize(&r.text))
        .expect("fault line emitted");
    let d = out
        .diagnoses()
        .into_iter()
        .find(|d| d.window == 1 && d.component == ds17)
        .unwrap();
    assert_eq!(d.verdict, Verdict::Failure);
    assert!(d.log_evidence.unwrap().delta.contains(&injected));
}

#[test]
fn overloaded_disk_is_flagged_on_await() {
    let osd = id(ComponentKind::Osd, 5);
    let fault = FaultSpec::new(FaultKind::P5Overload, osd, 5, 9).with_severity(1.0);
    let out = run_pipeline(&ci_config(vec![fault], 2, 6)).unwrap();
    assert!(out.flagged()[&1].contains(&osd));
    let d = out
        .diagnoses()
        .into_iter()
        .find(|d| d.window == 1 && d.component == osd)
        .unwrap();
    assert_eq!(d.verdict, Verdict::Overload);
    assert!(d.overload_evidence.iter().any(|e| e.metric == Metric::Await));
}

#[test]
fn zero_fault_pipeline_scores_all_zeros() {
    let out = run_pipeline(&ci_config(Vec::new(), 2, 13)).unwrap();
    assert!(out.flagged().values().all(|f| f.is_empty()));
    let l = &out.score.localization;
    let a = &out.score.attribution;
    assert_eq!(
        [
            l.true_positives,
            l.false_negatives,
            l.false_positives,
            a.failure.correct,
            a.failure.incorrect,
            a.overload.correct,
            a.overload.incorrect
        ],
        [0; 7]
    );
}

#[test]
fn all_clients_identify_single_failures_on_the_desk_topology() {
    let t = ci();
    let report = check_identifiability(&t, &clients(&t), 1).unwrap();
    assert!(report.identifiable, "{:?}", report.witness);
}

#[test]
fn three_component_chain_matches_the_grid() {
    let comps: Vec<ComponentId> = (0..3).map(|i| id(ComponentKind::Osd, i)).collect();
    let beliefs: BTreeMap<ComponentId, HealthBelief> = comps
        .iter()
        .map(|&c| (c, HealthBelief::new(c, 2.0, 1.0).unwrap()))
        .collect();
    let mut g = FactorGraph::new(comps.iter().copied(), &beliefs);
    let path = healthscope::ProbePath {
        client: ComponentId::client(0),
        target: comps[2],
        serial: comps.clone(),
        groups: Vec::new(),
    };
    g.add_observation(&path, 30, 15).unwrap();
    let post = infer(&g, &McmcConfig::default()).unwrap();
    let oracle = grid_posterior_means(
        &[(2.0, 1.0); 3],
        &[GridPath {
            serial: vec![0, 1, 2],
            groups: Vec::new(),
            n: 30,
            y: 15,
        }],
    );
    for (c, o) in comps.iter().zip(&oracle) {
        let m = post.posteriors[c].mean;
        assert!((m - o).abs() <= 0.02, "{c}: {m} vs grid {o}");
    }
}
