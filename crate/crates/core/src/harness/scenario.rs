use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;

use super::config::{GeneratorConfig, PipelineConfig};
use crate::error::{Error, Result};
use crate::rng;
use crate::simulator::{FaultKind, FaultSpec, Scenario};
use crate::topology::{ComponentId, ComponentKind, Topology};

const FAILURE_TARGETS: [ComponentKind; 4] = [
    ComponentKind::Mds,
    ComponentKind::Mdt,
    ComponentKind::DataServer,
    ComponentKind::Osd,
];
const OVERLOAD_TARGETS: [ComponentKind; 3] = [
    ComponentKind::Mds,
    ComponentKind::DataServer,
    ComponentKind::Osd,
];

/// Key that two faults must not share: a server stands for its whole
/// failover pair, so no pair loses both members at once.
fn exclusion_key(topo: &Topology, c: ComponentId) -> ComponentId {
    match c.kind {
        ComponentKind::DataServer => topo.ha_pairs()[(c.index / 2) as usize][0],
        ComponentKind::Mds if topo.count(ComponentKind::Mdt) > 0 => {
            topo.mds_partner(c).map_or(c, |p| p.min(c))
        }
        _ => c,
    }
}

/// Draws the generator's faults. The first window is left clean as a
/// baseline; each fault starts at a random epoch of the second window and
/// lasts to the end of the horizon. Targets are distinct.
pub fn generate_faults(
    topo: &Topology,
    gen: &GeneratorConfig,
    window_epochs: u32,
    horizon_epochs: u32,
    seed: u64,
    taken: &[FaultSpec],
) -> Result<Vec<FaultSpec>> {
    if horizon_epochs < 2 * window_epochs {
        return Err(Error::Config(
            "generated faults need at least two windows (one clean)".into(),
        ));
    }
    let mut rng = rng::rng_for(seed, &[rng::fnv1a(b"fault-generator")]);
    let mut used: BTreeSet<ComponentId> = taken
        .iter()
        .map(|f| exclusion_key(topo, f.target))
        .collect();
    let failure_kinds: Vec<FaultKind> = gen
        .failure_kinds
        .iter()
        .copied()
        .filter(|k| k.is_failure())
        .collect();
    let mut out = Vec::with_capacity(gen.failures + gen.overloads);
    let plan = std::iter::repeat_n(true, gen.failures).chain(std::iter::repeat_n(false, gen.overloads));
    for failure in plan {
        let kinds: &[ComponentKind] = if failure { &FAILURE_TARGETS } else { &OVERLOAD_TARGETS };
        let pool: Vec<ComponentId> = kinds
            .iter()
            .flat_map(|&k| topo.components_of(k))
            .filter(|&c| !used.contains(&exclusion_key(topo, c)))
            .collect();
        let &target = pool.choose(&mut rng).ok_or_else(|| {
            Error::Config("not enough distinct targets for the requested faults".into())
        })?;
        used.insert(exclusion_key(topo, target));
        let kind = if failure {
            *failure_kinds.choose(&mut rng).expect("validated non-empty")
        } else {
            FaultKind::P5Overload
        };
        let range = match kind {
            FaultKind::P1FailStop | FaultKind::P2ProcessCrash => (1.0, 1.0),
            FaultKind::P3Gray => gen.gray_severity,
            FaultKind::P4FailSlowMasked => gen.slow_severity,
            FaultKind::P5Overload => gen.overload_severity,
        };
        let severity = if range.0 < range.1 {
            rng.random_range(range.0..=range.1)
        } else {
            range.0
        };
        let start = rng.random_range(window_epochs..2 * window_epochs);
        out.push(FaultSpec {
            kind,
            target,
            start_epoch: start,
            end_epoch: horizon_epochs - 1,
            severity,
        });
    }
    Ok(out)
}

/// Scenario for a pipeline config: explicit faults plus generated ones.
pub fn build_scenario(topo: &Topology, cfg: &PipelineConfig) -> Result<Scenario> {
    let horizon = cfg.horizon_epochs();
    let mut s = Scenario::new(topo, format!("scenario-{}", cfg.seed), horizon);
    s.latency = cfg.latency.clone();
    s.side_channels = cfg.side_channels.clone();
    for f in &cfg.faults {
        s = s.inject(topo, *f)?;
    }
    if let Some(gen) = &cfg.generator {
        for f in generate_faults(topo, gen, cfg.window_epochs, horizon, cfg.seed, &cfg.faults)? {
            s = s.inject(topo, f)?;
        }
    }
    Ok(s)
}
