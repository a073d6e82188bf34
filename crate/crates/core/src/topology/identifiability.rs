//! Sufficient identifiability of up to `k` concurrent storage-component
//! failures: for every non-monitor storage component `v` and every failure set
//! `F` with `|F| <= k` and `v` not in `F`, some monitored route goes through
//! `v` and avoids all of `F`.
//!
//! Routes are concrete: one member is picked from each redundancy group, so a
//! single redundant member failing never blocks its group. Only storage
//! components (LNETs, metadata servers and targets, data servers, OSDs) take
//! part; clients and the shared network segments are outside the check.

use std::collections::{BTreeSet, HashMap};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ComponentId, Topology};
use crate::error::{Error, Result, Witness};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentifiabilityReport {
    pub identifiable: bool,
    pub witness: Option<Witness>,
    /// False when the verdict came from sampled failure sets.
    pub exhaustive: bool,
}

/// All distinct concrete routes (restricted to storage components) that the
/// monitors can measure.
pub fn measurement_routes(
    topo: &Topology,
    monitors: &[ComponentId],
) -> Result<Vec<Vec<ComponentId>>> {
    let mut routes = BTreeSet::new();
    let targets = topo.probe_targets();
    for &m in monitors {
        topo.client_info(m)?;
        for &t in &targets {
            let path = topo.enumerate_paths(m, t)?;
            let base: Vec<ComponentId> = path
                .serial
                .iter()
                .copied()
                .filter(|c| c.kind.is_storage())
                .collect();
            let mut partial = vec![base];
            for group in &path.groups {
                let members: Vec<ComponentId> =
                    group.iter().copied().filter(|c| c.kind.is_storage()).collect();
                if members.is_empty() {
                    continue;
                }
                partial = partial
                    .into_iter()
                    .flat_map(|r| {
                        members.iter().map(move |&c| {
                            let mut r = r.clone();
                            r.push(c);
                            r
                        })
                    })
                    .collect();
            }
            for mut r in partial {
                r.sort();
                r.dedup();
                routes.insert(r);
            }
        }
    }
    Ok(routes.into_iter().collect())
}

struct RouteIndex {
    domain: Vec<ComponentId>,
    routes: Vec<Vec<u32>>,
    through: Vec<Vec<u32>>,
}

impl RouteIndex {
    fn new(topo: &Topology, monitors: &[ComponentId], k: usize) -> Result<Self> {
        let domain: Vec<ComponentId> = topo.components().filter(|c| c.kind.is_storage()).collect();
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if k > domain.len() {
            return Err(Error::Config(format!(
                "k = {k} exceeds the {} storage components",
                domain.len()
            )));
        }
        let pos: HashMap<ComponentId, u32> =
            domain.iter().enumerate().map(|(i, &c)| (c, i as u32)).collect();
        let routes: Vec<Vec<u32>> = measurement_routes(topo, monitors)?
            .into_iter()
            .map(|r| r.iter().map(|c| pos[c]).collect())
            .collect();
        let mut through = vec![Vec::new(); domain.len()];
        for (ri, r) in routes.iter().enumerate() {
            for &n in r {
                through[n as usize].push(ri as u32);
            }
        }
        Ok(RouteIndex {
            domain,
            routes,
            through,
        })
    }

    /// Smallest set of at most `k` nodes (excluding `v`) that intersects every
    /// route through `v`, if any.
    fn smallest_blocker(&self, v: u32, k: usize) -> Option<Vec<u32>> {
        let routes: Vec<&[u32]> = self.through[v as usize]
            .iter()
            .map(|&ri| self.routes[ri as usize].as_slice())
            .collect();
        let mut chosen = Vec::new();
        (0..=k).find_map(|budget| {
            chosen.clear();
            block(&routes, v, budget, &mut chosen).then(|| chosen.clone())
        })
    }

    fn witness(&self, v: u32, f: &[u32]) -> Witness {
        let mut failure_set: Vec<ComponentId> =
            f.iter().map(|&i| self.domain[i as usize]).collect();
        failure_set.sort();
        Witness {
            component: self.domain[v as usize],
            failure_set,
        }
    }

    fn covered_avoiding(&self, v: u32, f: &[u32]) -> bool {
        self.through[v as usize]
            .iter()
            .any(|&ri| !self.routes[ri as usize].iter().any(|n| f.contains(n)))
    }
}

fn block(routes: &[&[u32]], v: u32, budget: usize, chosen: &mut Vec<u32>) -> bool {
    let Some(unhit) = routes
        .iter()
        .find(|r| !r.iter().any(|n| chosen.contains(n)))
    else {
        return true;
    };
    if chosen.len() == budget {
        return false;
    }
    for &u in unhit.iter() {
        if u == v {
            continue;
        }
        chosen.push(u);
        if block(routes, v, budget, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// Exact check. The search branches on the members of an unblocked route, so
/// its cost grows with route length to the power `k` rather than with the
/// number of failure sets.
pub fn check_identifiability(
    topo: &Topology,
    monitors: &[ComponentId],
    k: usize,
) -> Result<IdentifiabilityReport> {
    let idx = RouteIndex::new(topo, monitors, k)?;
    for v in 0..idx.domain.len() as u32 {
        if let Some(f) = idx.smallest_blocker(v, k) {
            return Ok(IdentifiabilityReport {
                identifiable: false,
                witness: Some(idx.witness(v, &f)),
                exhaustive: true,
            });
        }
    }
    Ok(IdentifiabilityReport {
        identifiable: true,
        witness: None,
        exhaustive: true,
    })
}

/// Monte Carlo variant for very large `k`: draws `samples` random (v, F)
/// pairs with `|F| = k`. A `true` verdict is only as strong as the budget.
pub fn check_identifiability_sampled(
    topo: &Topology,
    monitors: &[ComponentId],
    k: usize,
    samples: usize,
    seed: u64,
) -> Result<IdentifiabilityReport> {
    let idx = RouteIndex::new(topo, monitors, k)?;
    let n = idx.domain.len();
    let mut rng = rng::rng_for(seed, &[rng::fnv1a(b"identifiability")]);
    for _ in 0..samples {
        let v = rng.random_range(0..n) as u32;
        let size = k.min(n - 1);
        let f: Vec<u32> = index::sample(&mut rng, n - 1, size)
            .into_iter()
            .map(|i| if i as u32 >= v { i as u32 + 1 } else { i as u32 })
            .collect();
        if !idx.covered_avoiding(v, &f) {
            return Ok(IdentifiabilityReport {
                identifiable: false,
                witness: Some(idx.witness(v, &f)),
                exhaustive: false,
            });
        }
    }
    Ok(IdentifiabilityReport {
        identifiable: true,
        witness: None,
        exhaustive: false,
    })
}
