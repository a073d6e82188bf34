//! Reference implementations used as test oracles. Each one follows the
//! textbook definition directly and shares no code with the library.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use healthscope::{ComponentId, ProbePath, Topology};

/// LOF straight from the definition: k-distance, tie-inclusive
/// neighborhoods, reachability distance, local reachability density.
/// Infinite densities (a point with k exact duplicates) compare as equal to
/// each other.
pub fn brute_lof(points: &[Vec<f64>], k: usize) -> Vec<f64> {
    let n = points.len();
    let d = |a: usize, b: usize| -> f64 {
        points[a]
            .iter()
            .zip(&points[b])
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let k_distance: Vec<f64> = (0..n)
        .map(|p| {
            let mut ds: Vec<f64> = (0..n).filter(|&o| o != p).map(|o| d(p, o)).collect();
            ds.sort_by(f64::total_cmp);
            ds[k - 1]
        })
        .collect();
    let hood: Vec<Vec<usize>> = (0..n)
        .map(|p| (0..n).filter(|&o| o != p && d(p, o) <= k_distance[p]).collect())
        .collect();
    let lrd: Vec<f64> = (0..n)
        .map(|p| {
            let reach: f64 = hood[p].iter().map(|&o| k_distance[o].max(d(p, o))).sum();
            hood[p].len() as f64 / reach
        })
        .collect();
    (0..n)
        .map(|p| {
            let ratios: f64 = hood[p]
                .iter()
                .map(|&o| {
                    if lrd[o].is_infinite() && lrd[p].is_infinite() {
                        1.0
                    } else {
                        lrd[o] / lrd[p]
                    }
                })
                .sum();
            ratios / hood[p].len() as f64
        })
        .collect()
}

/// One path of a small inference problem, as variable indices.
#[derive(Debug, Clone)]
pub struct GridPath {
    pub serial: Vec<usize>,
    pub groups: Vec<Vec<usize>>,
    pub n: u32,
    pub y: u32,
}

fn ln_beta_pdf_unnorm(x: f64, a: f64, b: f64) -> f64 {
    let la = if a == 1.0 { 0.0 } else { (a - 1.0) * x.ln() };
    let lb = if b == 1.0 { 0.0 } else { (b - 1.0) * (1.0 - x).ln() };
    la + lb
}

/// Exact posterior means on a 101-point grid per variable: every grid cell
/// is weighted by prior times Binomial likelihood and summed.
pub fn grid_posterior_means(priors: &[(f64, f64)], paths: &[GridPath]) -> Vec<f64> {
    const G: usize = 101;
    let v = priors.len();
    let xs: Vec<f64> = (0..G).map(|i| i as f64 / (G - 1) as f64).collect();
    let ln_prior: Vec<Vec<f64>> = priors
        .iter()
        .map(|&(a, b)| xs.iter().map(|&x| ln_beta_pdf_unnorm(x, a, b)).collect())
        .collect();

    let total = G.pow(v as u32);
    let mut log_w = Vec::with_capacity(total);
    let mut idx = vec![0usize; v];
    for _ in 0..total {
        let mut lw: f64 = (0..v).map(|j| ln_prior[j][idx[j]]).sum();
        if lw.is_finite() {
            for p in paths {
                let mut a: f64 = p.serial.iter().map(|&j| xs[idx[j]]).product();
                for g in &p.groups {
                    a *= 1.0 - g.iter().map(|&j| 1.0 - xs[idx[j]]).product::<f64>();
                }
                let ll = f64::from(p.y) * a.ln() + f64::from(p.n - p.y) * (1.0 - a).ln();
                // 0 * ln 0 = 0
                let ll = if ll.is_nan() {
                    let s = if p.y == 0 { 0.0 } else { f64::from(p.y) * a.ln() };
                    let f = if p.y == p.n { 0.0 } else { f64::from(p.n - p.y) * (1.0 - a).ln() };
                    s + f
                } else {
                    ll
                };
                lw += ll;
            }
        }
        log_w.push(lw);
        for j in 0..v {
            idx[j] += 1;
            if idx[j] < G {
                break;
            }
            idx[j] = 0;
        }
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut sums = vec![0.0; v];
    let mut idx = vec![0usize; v];
    for lw in &log_w {
        let w = (lw - max).exp();
        z += w;
        for j in 0..v {
            sums[j] += w * xs[idx[j]];
        }
        for j in 0..v {
            idx[j] += 1;
            if idx[j] < G {
                break;
            }
            idx[j] = 0;
        }
    }
    sums.iter().map(|s| s / z).collect()
}

/// Success probability of a client-to-OSD request written out term by term:
/// client, compute net, storage net, the LNET group, the HA pair and the OSD.
pub fn osd_availability_direct(
    topo: &Topology,
    client: ComponentId,
    osd: ComponentId,
    x: &BTreeMap<ComponentId, f64>,
) -> f64 {
    let info = topo.client_info(client).unwrap();
    let cn = ComponentId::new(healthscope::ComponentKind::ComputeNet, info.network);
    let sn = ComponentId::new(healthscope::ComponentKind::StorageNet, 0);
    let lnet_all_down: f64 = topo
        .lnet_group(client, osd)
        .iter()
        .map(|l| 1.0 - x[l])
        .product();
    let [ds1, ds2] = topo.osd_owners(osd).unwrap();
    let r_osd = (1.0 - (1.0 - x[&ds1]) * (1.0 - x[&ds2])) * x[&osd];
    x[&client] * x[&cn] * x[&sn] * (1.0 - lnet_all_down) * r_osd
}

/// Storage components whose failure a concrete route through `path` must
/// avoid, split into the serial part and the redundancy groups.
fn storage_view(path: &ProbePath) -> (Vec<ComponentId>, Vec<Vec<ComponentId>>) {
    let serial = path
        .serial
        .iter()
        .copied()
        .filter(|c| c.kind.is_storage())
        .collect();
    let groups = path
        .groups
        .iter()
        .map(|g| g.iter().copied().filter(|c| c.kind.is_storage()).collect::<Vec<_>>())
        .filter(|g| !g.is_empty())
        .collect();
    (serial, groups)
}

/// Does some monitored path measure `v` while every member of `failed` is
/// down? A path measures `v` if `v` lies on it, no serial member failed and
/// each redundancy group keeps a working member (`v` itself in its group).
pub fn measured_avoiding(
    paths: &[ProbePath],
    v: ComponentId,
    failed: &BTreeSet<ComponentId>,
) -> bool {
    paths.iter().any(|p| {
        let (serial, groups) = storage_view(p);
        let on_path = serial.contains(&v) || groups.iter().any(|g| g.contains(&v));
        on_path
            && serial.iter().all(|c| !failed.contains(c))
            && groups.iter().all(|g| g.iter().any(|c| !failed.contains(c)))
    })
}

fn subsets_up_to(items: &[ComponentId], k: usize, out: &mut Vec<BTreeSet<ComponentId>>) {
    fn rec(
        items: &[ComponentId],
        start: usize,
        k: usize,
        cur: &mut Vec<ComponentId>,
        out: &mut Vec<BTreeSet<ComponentId>>,
    ) {
        out.push(cur.iter().copied().collect());
        if cur.len() == k {
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            rec(items, i + 1, k, cur, out);
            cur.pop();
        }
    }
    rec(items, 0, k, &mut Vec::new(), out);
}

/// Exhaustive identifiability: for every storage component `v` returns the
/// size of the smallest failure set (not containing `v`, at most `k`
/// members) under which no monitored path measures `v`, if any.
pub fn brute_identifiability(
    topo: &Topology,
    monitors: &[ComponentId],
    k: usize,
) -> BTreeMap<ComponentId, Option<usize>> {
    let mut paths = Vec::new();
    for &m in monitors {
        for t in topo.probe_targets() {
            paths.push(topo.enumerate_paths(m, t).unwrap());
        }
    }
    let domain: Vec<ComponentId> = topo.components().filter(|c| c.kind.is_storage()).collect();
    let mut out = BTreeMap::new();
    for &v in &domain {
        let others: Vec<ComponentId> = domain.iter().copied().filter(|&c| c != v).collect();
        let mut sets = Vec::new();
        subsets_up_to(&others, k, &mut sets);
        let smallest = sets
            .iter()
            .filter(|f| !measured_avoiding(&paths, v, f))
            .map(BTreeSet::len)
            .min();
        out.insert(v, smallest);
    }
    out
}

/// Paths from every monitor to every probe target.
pub fn monitored_paths(topo: &Topology, monitors: &[ComponentId]) -> Vec<ProbePath> {
    monitors
        .iter()
        .flat_map(|&m| {
            topo.probe_targets()
                .into_iter()
                .map(move |t| topo.enumerate_paths(m, t).unwrap())
        })
        .collect()
}
