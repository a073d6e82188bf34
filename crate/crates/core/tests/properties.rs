mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use healthscope::diagnosis::{attribute, lof, log_delta, LogNormalizer, Verdict};
use healthscope::inference::{
    carry_forward, infer, moment_match, path_availability, FactorGraph, HealthBelief,
    McmcConfig,
};
use healthscope::monitor::{aggregate, plan_probes, select_monitors, OpKind};
use healthscope::simulator::{
    run_scenario, sample_outcome, FaultKind, FaultSpec, LatencyModel, ProbeStatus, Scenario,
};
use healthscope::topology::check_identifiability;
use healthscope::{ComponentId, ComponentKind, ProbePath, Topology, TopologySpec};

fn small_spec() -> impl Strategy<Value = TopologySpec> {
    (
        1..=4usize,
        1..=3usize,
        1..=3usize,
        0..=3usize,
        1..=4usize,
        1..=6usize,
        1..=8usize,
        1..=4usize,
        any::<u64>(),
    )
        .prop_map(
            |(clients, compute_nets, mds, mdts, pairs, osds, lnets, g, seed)| TopologySpec {
                clients,
                client_groups: Vec::new(),
                compute_nets,
                mds,
                mgs: 1,
                mdts,
                data_servers: 2 * pairs,
                osds,
                lnets,
                lnet_group_size: g.min(lnets),
                seed,
            },
        )
}

fn clients(t: &Topology) -> Vec<ComponentId> {
    t.clients().iter().map(|c| c.id).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn paths_reference_existing_disjoint_components(spec in small_spec()) {
        let t = Topology::build(spec).unwrap();
        let g = t.spec().lnet_group_size;
        for &c in &clients(&t) {
            for target in t.probe_targets() {
                let p = t.enumerate_paths(c, target).unwrap();
                prop_assert_eq!(&p, &t.enumerate_paths(c, target).unwrap());
                for x in p.components() {
                    prop_assert!(t.contains(x), "{} missing", x);
                }
                let serial: BTreeSet<_> = p.serial.iter().copied().collect();
                prop_assert_eq!(serial.len(), p.serial.len());
                for grp in &p.groups {
                    prop_assert!(grp.iter().all(|m| !serial.contains(m)));
                }
                prop_assert_eq!(p.groups[0].len(), g);
                prop_assert!(p.groups[0].iter().all(|l| l.kind == ComponentKind::Lnet));
                if target.kind == ComponentKind::Osd {
                    let owners = t.osd_owners(target).unwrap();
                    prop_assert_eq!(&p.groups[1], &owners.to_vec());
                    prop_assert_eq!(t.ha_partner(owners[0]).unwrap(), owners[1]);
                }
            }
        }
    }

    #[test]
    fn plan_counts_follow_the_formula(spec in small_spec(), take in 1..=4usize) {
        let t = Topology::build(spec).unwrap();
        let monitors: Vec<_> = clients(&t).into_iter().take(take).collect();
        let plan = plan_probes(&t, &monitors, 60).unwrap();
        let c = plan.counts();
        let m = monitors.len();
        let meta = t.count(ComponentKind::Mds) + t.count(ComponentKind::Mdt);
        prop_assert_eq!(c.crwr, m * meta);
        prop_assert_eq!(c.rmex, m * meta);
        prop_assert_eq!(
            c.wrex,
            m * (t.count(ComponentKind::DataServer) + t.count(ComponentKind::Osd))
        );
        let unique: std::collections::HashSet<_> = plan.probes.iter().collect();
        prop_assert_eq!(unique.len(), plan.probes.len());
    }

    #[test]
    fn identifiability_matches_brute_force(spec in small_spec(), k in 1..=2usize) {
        let t = Topology::build(spec).unwrap();
        prop_assume!(t.component_count() <= 24);
        let monitors = vec![clients(&t)[0]];
        let report = check_identifiability(&t, &monitors, k).unwrap();
        let brute = brute_identifiability(&t, &monitors, k);
        prop_assert_eq!(report.identifiable, brute.values().all(Option::is_none));
    }

    #[test]
    fn selected_monitors_are_identifiable(spec in small_spec(), seed in any::<u64>()) {
        let t = Topology::build(spec).unwrap();
        let all = clients(&t);
        if let Ok(m) = select_monitors(&t, &all, all.len(), 1, seed) {
            prop_assert!(m.len() <= all.len());
            prop_assert!(check_identifiability(&t, &m, 1).unwrap().identifiable);
        }
    }
}

fn health_path() -> impl Strategy<Value = (ProbePath, HashMap<ComponentId, f64>)> {
    (
        prop::collection::vec(0.0..=1.0f64, 1..5),
        prop::collection::vec(prop::collection::vec(0.0..=1.0f64, 1..5), 0..3),
    )
        .prop_map(|(serial, groups)| {
            let mut next = 0;
            let mut h = HashMap::new();
            let mut id = |x: f64| {
                let c = ComponentId::new(ComponentKind::Osd, next);
                next += 1;
                h.insert(c, x);
                c
            };
            let serial: Vec<_> = serial.into_iter().map(&mut id).collect();
            let groups = groups
                .into_iter()
                .map(|g| g.into_iter().map(&mut id).collect())
                .collect();
            let path = ProbePath {
                client: ComponentId::client(0),
                target: serial[0],
                serial,
                groups,
            };
            (path, h)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn availability_is_bounded_and_monotone(
        (path, h) in health_path(),
        pick in any::<prop::sample::Index>(),
        frac in 0.0..=1.0f64,
    ) {
        let a = path_availability(&path, &h).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        let members: Vec<_> = path.components().collect();
        let c = members[pick.index(members.len())];
        let mut up = h.clone();
        up.insert(c, h[&c] + (1.0 - h[&c]) * frac);
        prop_assert!(path_availability(&path, &up).unwrap() >= a - 1e-15);
    }

    #[test]
    fn availability_ignores_order_within_a_group((path, h) in health_path()) {
        prop_assume!(!path.groups.is_empty());
        let a = path_availability(&path, &h).unwrap();
        let mut rev = path.clone();
        for g in &mut rev.groups {
            g.reverse();
        }
        prop_assert!((path_availability(&rev, &h).unwrap() - a).abs() <= 1e-12);
    }

    #[test]
    fn lof_matches_definition(
        pts in prop::collection::vec(prop::collection::vec(-20i32..20, 1..=2), 11..=40),
        k in prop::sample::select(vec![1usize, 3, 5, 10]),
    ) {
        let dims = pts[0].len();
        let points: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| (0..dims).map(|d| f64::from(*p.get(d).unwrap_or(&0))).collect())
            .collect();
        let got = lof(&points, k).unwrap();
        let want = brute_lof(&points, k);
        for (a, b) in got.iter().zip(&want) {
            if a.is_finite() || b.is_finite() {
                prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
            } else {
                prop_assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn delta_obeys_set_laws(
        unhealthy in prop::collection::btree_set("[a-e]{1,2}", 0..10),
        healthy in prop::collection::vec(prop::collection::btree_set("[a-e]{1,2}", 0..10), 1..4),
        extra in prop::collection::btree_set("[a-e]{1,2}", 0..10),
    ) {
        let refs: Vec<_> = healthy.iter().collect();
        let d = log_delta(&unhealthy, &refs).unwrap();
        let union: BTreeSet<String> = healthy.iter().flatten().cloned().collect();
        prop_assert!(d.is_subset(&unhealthy));
        prop_assert!(d.is_disjoint(&union));
        let mut grown = healthy.clone();
        grown[0].extend(extra);
        let grown_refs: Vec<_> = grown.iter().collect();
        prop_assert!(log_delta(&unhealthy, &grown_refs).unwrap().is_subset(&d));
    }

    #[test]
    fn normalization_is_idempotent(s in "\\PC{0,80}") {
        let n = LogNormalizer::default();
        let once = n.normalize(&s);
        prop_assert_eq!(n.normalize(&once), once);
    }

    #[test]
    fn structured_log_lines_normalize_idempotently(
        host in "(ds|osd|mds|lnet|c)[0-9]{1,3}",
        num in any::<u32>(),
        hex in any::<u64>(),
        word in "[a-z_]{1,10}",
    ) {
        let n = LogNormalizer::default();
        let line = format!("2023-03-04T05:06:07 {host} {word}[{num}]: 0x{hex:x} {hex:x} 10.0.{}.1@o2ib", num % 256);
        let once = n.normalize(&line);
        prop_assert!(!once.contains(&host));
        prop_assert_eq!(n.normalize(&once), once);
    }

    #[test]
    fn moment_matching_recovers_the_moments(m in 0.02..0.98f64, frac in 0.01..0.95f64) {
        let v = frac * m * (1.0 - m);
        let (a, b) = moment_match(m, v);
        let mean = a / (a + b);
        let var = a * b / ((a + b).powi(2) * (a + b + 1.0));
        prop_assert!((mean - m).abs() < 1e-9);
        prop_assert!((var - v).abs() < 1e-9);
    }

    #[test]
    fn attribution_is_total(
        flags in prop::collection::vec((any::<bool>(), any::<bool>()), 0..12),
    ) {
        use healthscope::diagnosis::{LogEvidence, Metric, OverloadEvidence};
        let mut unhealthy = BTreeSet::new();
        let mut over = Vec::new();
        let mut logs = BTreeMap::new();
        for (i, &(o, l)) in flags.iter().enumerate() {
            let c = ComponentId::ds(i as u32);
            unhealthy.insert(c);
            if o {
                over.push(OverloadEvidence {
                    component: c, metric: Metric::Loadavg, lof_score: 3.0, k: 5,
                    window: 0, value: 300.0, group_median: 30.0,
                });
            }
            if l {
                logs.insert(c, LogEvidence {
                    component: c,
                    delta: ["x".to_string()].into(),
                    comparison_group: vec![ComponentId::ds(99)],
                });
            }
        }
        let ds = attribute(0, &unhealthy, &over, &logs);
        prop_assert_eq!(ds.len(), unhealthy.len());
        for (d, &(o, l)) in ds.iter().zip(&flags) {
            let want = match (l, o) {
                (true, true) => Verdict::Both,
                (true, false) => Verdict::Failure,
                (false, true) => Verdict::Overload,
                (false, false) => Verdict::Unknown,
            };
            prop_assert_eq!(d.verdict, want);
        }
    }
}

fn status_rank(s: ProbeStatus) -> u8 {
    match s {
        ProbeStatus::Ok => 0,
        ProbeStatus::Slow => 1,
        ProbeStatus::Timeout | ProbeStatus::Error => 2,
    }
}

fn fault_kind() -> impl Strategy<Value = FaultKind> {
    prop::sample::select(vec![
        FaultKind::P1FailStop,
        FaultKind::P2ProcessCrash,
        FaultKind::P3Gray,
        FaultKind::P4FailSlowMasked,
        FaultKind::P5Overload,
    ])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adding_a_fault_never_improves_a_paired_draw(
        spec in small_spec(),
        kind in fault_kind(),
        severity in 0.05..=1.0f64,
        pick in any::<prop::sample::Index>(),
        seed in any::<u64>(),
        cursor in 0..8usize,
    ) {
        let t = Topology::build(spec).unwrap();
        let osd = ComponentId::osd(0);
        let path = t.enumerate_paths(clients(&t)[0], osd).unwrap();
        let members: Vec<_> = path.components().collect();
        let target = members[pick.index(members.len())];
        let sev = if kind.is_stop() { 1.0 } else { severity };
        let fault = FaultSpec::new(kind, target, 0, 0).with_severity(sev);
        let model = LatencyModel::default();
        for draw in 0..50u64 {
            let mut r1 = ChaCha8Rng::seed_from_u64(seed ^ draw);
            let mut r2 = ChaCha8Rng::seed_from_u64(seed ^ draw);
            let clean = sample_outcome(&path, OpKind::WrEx, &[], cursor, &model, &mut r1);
            let hit = sample_outcome(&path, OpKind::WrEx, &[&fault], cursor, &model, &mut r2);
            prop_assert!(status_rank(hit.status) >= status_rank(clean.status));
            if hit.status != ProbeStatus::Error {
                prop_assert!(hit.latency_ms >= clean.latency_ms);
            }
        }
    }

    #[test]
    fn one_failed_ha_member_never_times_out_its_osds(
        spec in small_spec(),
        which in 0..2usize,
        crash in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let t = Topology::build(spec).unwrap();
        let pair = t.ha_pairs()[0];
        let kind = if crash { FaultKind::P2ProcessCrash } else { FaultKind::P1FailStop };
        let scenario = Scenario::new(&t, "masking", 2)
            .inject(&t, FaultSpec::new(kind, pair[which], 0, 1))
            .unwrap();
        let plan = plan_probes(&t, &clients(&t), 60).unwrap();
        let trace = run_scenario(&t, &scenario, &plan, seed).unwrap();
        for r in trace.probes.iter().filter(|r| r.target.kind == ComponentKind::Osd) {
            if t.osd_owners(r.target).unwrap().contains(&pair[which]) {
                prop_assert_ne!(r.status, ProbeStatus::Timeout);
                prop_assert_eq!(r.server, Some(pair[1 - which]));
            }
        }
    }

    #[test]
    fn traces_are_deterministic_and_well_formed(
        spec in small_spec(),
        kind in fault_kind(),
        severity in 0.1..=1.0f64,
        seed in any::<u64>(),
    ) {
        let t = Topology::build(spec).unwrap();
        let targets = t.probe_targets();
        let target = targets[(seed % targets.len() as u64) as usize];
        let sev = if kind.is_stop() { 1.0 } else { severity };
        let scenario = Scenario::new(&t, "det", 4)
            .inject(&t, FaultSpec::new(kind, target, 1, 3).with_severity(sev))
            .unwrap();
        let plan = plan_probes(&t, &clients(&t), 60).unwrap().with_window(2);
        let a = run_scenario(&t, &scenario, &plan, seed).unwrap();
        let b = run_scenario(&t, &scenario, &plan, seed).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());

        let m = LatencyModel::default();
        for r in &a.probes {
            match r.status {
                ProbeStatus::Ok => prop_assert!(r.latency_ms <= m.slo_ms),
                ProbeStatus::Slow => {
                    prop_assert!(r.latency_ms > m.slo_ms && r.latency_ms <= m.timeout_ms)
                }
                ProbeStatus::Timeout => prop_assert_eq!(r.latency_ms, m.timeout_ms),
                ProbeStatus::Error => prop_assert_eq!(r.monitor.kind, ComponentKind::Client),
            }
        }

        for w in 0..2 {
            let agg = aggregate(&a.probes, &plan, w);
            let in_window = a.probes.iter().filter(|r| plan.window_epochs(w).contains(&r.epoch)).count();
            let total: u32 = agg.observations.iter().map(|o| o.n).sum();
            prop_assert_eq!(total as usize, in_window);
            let per_pair = plan.per_pair();
            for o in &agg.observations {
                prop_assert!(o.y <= o.n);
                prop_assert_eq!(o.n, per_pair[&(o.monitor, o.target)] * 2);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn posterior_summaries_are_ordered_and_reproducible(
        n in 1..60u32,
        frac in 0.0..=1.0f64,
        seed in any::<u64>(),
    ) {
        let t = Topology::build(TopologySpec::minimal()).unwrap();
        let path = t.enumerate_paths(ComponentId::client(0), ComponentId::osd(0)).unwrap();
        let mut g = FactorGraph::new(t.components(), &BTreeMap::new());
        let y = (f64::from(n) * frac).round() as u32;
        g.add_observation(&path, n, y).unwrap();
        let cfg = McmcConfig { samples: 1000, burn_in: 300, seed, ..McmcConfig::default() };
        let a = infer(&g, &cfg).unwrap();
        let b = infer(&g, &cfg).unwrap();
        prop_assert_eq!(&a.posteriors, &b.posteriors);
        for p in a.posteriors.values() {
            prop_assert!(p.credible_low <= p.mean && p.mean <= p.credible_high);
            prop_assert!((0.0..=1.0).contains(&p.mean));
        }
        let priors = carry_forward(&a.posteriors, 0.9);
        for (c, b) in &priors {
            prop_assert!(HealthBelief::new(*c, b.alpha, b.beta).is_ok(), "{}: {:?}", c, b);
        }
    }
}

#[test]
fn beliefs_reject_non_positive_parameters() {
    let c = ComponentId::osd(0);
    assert!(HealthBelief::new(c, 0.0, 1.0).is_err());
    assert!(HealthBelief::new(c, 1.0, f64::NAN).is_err());
    assert!(HealthBelief::new(c, 2.0, 3.0).is_ok());
}
