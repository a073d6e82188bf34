//! Component health inference: each component's health is a Beta-distributed
//! probability of serving a request, every path observation is a Binomial
//! draw on the path's availability, and posteriors are sampled by MCMC.

mod mcmc;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monitor::PathObservation;
use crate::topology::{ComponentId, ProbePath, Topology};

pub use mcmc::{infer, ConvergenceWarning, InferenceResult, McmcConfig};

/// Beta(alpha, beta) belief over a component's health.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HealthBelief {
    pub component: ComponentId,
    pub alpha: f64,
    pub beta: f64,
}

impl HealthBelief {
    pub fn uniform(component: ComponentId) -> Self {
        HealthBelief {
            component,
            alpha: 1.0,
            beta: 1.0,
        }
    }

    pub fn new(component: ComponentId, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite() && alpha > 0.0 && beta > 0.0) {
            return Err(Error::Config(format!(
                "Beta({alpha}, {beta}) prior for {component} is not proper"
            )));
        }
        Ok(HealthBelief {
            component,
            alpha,
            beta,
        })
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HealthPosterior {
    pub component: ComponentId,
    pub mean: f64,
    pub variance: f64,
    pub credible_low: f64,
    pub credible_high: f64,
    pub effective_samples: u64,
    pub rhat: f64,
    /// False when no observation touched the component; the summary is then
    /// the prior mean with a full-width interval.
    pub observed: bool,
}

impl HealthPosterior {
    pub fn width(&self) -> f64 {
        self.credible_high - self.credible_low
    }
}

/// Probability that a request along `path` succeeds: the product of serial
/// healths times `1 - prod(1 - X_j)` for each redundancy group.
pub fn path_availability(path: &ProbePath, healths: &HashMap<ComponentId, f64>) -> Result<f64> {
    let get = |c: &ComponentId| -> Result<f64> {
        let x = *healths
            .get(c)
            .ok_or_else(|| Error::NotFound(format!("no health value for {c}")))?;
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Config(format!("health {x} for {c} outside [0, 1]")));
        }
        Ok(x)
    };
    let mut a = 1.0;
    for c in &path.serial {
        a *= get(c)?;
    }
    for g in &path.groups {
        let mut all_down = 1.0;
        for c in g {
            all_down *= 1.0 - get(c)?;
        }
        a *= 1.0 - all_down;
    }
    Ok(a)
}

/// Binomial evidence `y ~ Binomial(A_p, n)` on one path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    /// Indices into the graph's variables.
    pub serial: Vec<u32>,
    /// Indices into the graph's interned redundancy groups.
    pub groups: Vec<u32>,
    pub n: u32,
    pub y: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorGraph {
    pub variables: Vec<HealthBelief>,
    pub factors: Vec<Factor>,
    /// Distinct redundancy groups, as variable indices.
    pub groups: Vec<Vec<u32>>,
    index: HashMap<ComponentId, u32>,
    group_index: HashMap<Vec<u32>, u32>,
}

impl FactorGraph {
    /// A graph of priors only. Components missing from `priors` get Beta(1, 1).
    pub fn new(
        components: impl IntoIterator<Item = ComponentId>,
        priors: &BTreeMap<ComponentId, HealthBelief>,
    ) -> Self {
        let mut g = FactorGraph {
            variables: Vec::new(),
            factors: Vec::new(),
            groups: Vec::new(),
            index: HashMap::new(),
            group_index: HashMap::new(),
        };
        for c in components {
            if g.index.contains_key(&c) {
                continue;
            }
            g.index.insert(c, g.variables.len() as u32);
            g.variables
                .push(priors.get(&c).copied().unwrap_or(HealthBelief::uniform(c)));
        }
        g
    }

    pub fn variable(&self, c: ComponentId) -> Option<usize> {
        self.index.get(&c).map(|&i| i as usize)
    }

    /// Attaches a Binomial factor for `path`. Zero-trial observations carry no
    /// evidence and are skipped.
    pub fn add_observation(&mut self, path: &ProbePath, n: u32, y: u32) -> Result<bool> {
        if y > n {
            return Err(Error::Config(format!(
                "observation on {} -> {} has {y} successes out of {n}",
                path.client, path.target
            )));
        }
        if n == 0 {
            log::warn!("skipping empty observation {} -> {}", path.client, path.target);
            return Ok(false);
        }
        let var = |c: &ComponentId| {
            self.index
                .get(c)
                .copied()
                .ok_or_else(|| Error::NotFound(format!("{c} has no variable in the graph")))
        };
        let serial = path.serial.iter().map(var).collect::<Result<Vec<_>>>()?;
        let mut groups = Vec::with_capacity(path.groups.len());
        for g in &path.groups {
            let mut members = g.iter().map(var).collect::<Result<Vec<_>>>()?;
            members.sort_unstable();
            let next = self.groups.len() as u32;
            let gid = *self.group_index.entry(members.clone()).or_insert(next);
            if gid == next {
                self.groups.push(members);
            }
            groups.push(gid);
        }
        self.factors.push(Factor {
            serial,
            groups,
            n,
            y,
        });
        Ok(true)
    }

    /// Number of factors each variable participates in.
    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.variables.len()];
        for f in &self.factors {
            for &v in &f.serial {
                d[v as usize] += 1;
            }
            for &g in &f.groups {
                for &v in &self.groups[g as usize] {
                    d[v as usize] += 1;
                }
            }
        }
        d
    }

    /// Components with no attached factor: unobservable this window.
    pub fn unobserved(&self) -> Vec<ComponentId> {
        self.degrees()
            .iter()
            .zip(&self.variables)
            .filter(|(&d, _)| d == 0)
            .map(|(_, b)| b.component)
            .collect()
    }
}

/// One variable per topology component and one factor per observation.
pub fn build_graph(
    topo: &Topology,
    observations: &[PathObservation],
    priors: &BTreeMap<ComponentId, HealthBelief>,
) -> Result<FactorGraph> {
    let mut g = FactorGraph::new(topo.components(), priors);
    let mut paths: HashMap<(ComponentId, ComponentId), ProbePath> = HashMap::new();
    for o in observations {
        if !paths.contains_key(&(o.monitor, o.target)) {
            paths.insert((o.monitor, o.target), topo.enumerate_paths(o.monitor, o.target)?);
        }
        g.add_observation(&paths[&(o.monitor, o.target)], o.n, o.y)?;
    }
    Ok(g)
}

/// Forgetting factor applied by [`carry_forward`].
pub const DEFAULT_FORGETTING: f64 = 0.9;

/// Moment-matches a Beta to the posterior mean `m` and variance `v`.
/// Over-dispersed moments (`v >= m(1-m)`) fall back to Beta(1, 1).
pub fn moment_match(m: f64, v: f64) -> (f64, f64) {
    if !(m > 0.0 && m < 1.0 && v > 0.0) || v >= m * (1.0 - m) {
        return (1.0, 1.0);
    }
    let s = m * (1.0 - m) / v - 1.0;
    (m * s, (1.0 - m) * s)
}

/// Next window's priors from this window's posteriors: moment-matched, then
/// pulled toward Beta(1, 1) as `1 + lambda * (alpha - 1)` so evidence from
/// old windows decays geometrically.
pub fn carry_forward(
    posteriors: &BTreeMap<ComponentId, HealthPosterior>,
    lambda: f64,
) -> BTreeMap<ComponentId, HealthBelief> {
    posteriors
        .values()
        .map(|p| {
            let (a, b) = moment_match(p.mean, p.variance);
            let damp = |x: f64| (1.0 + lambda * (x - 1.0)).max(f64::MIN_POSITIVE);
            (
                p.component,
                HealthBelief {
                    component: p.component,
                    alpha: damp(a),
                    beta: damp(b),
                },
            )
        })
        .collect()
}

/// Decision rule for calling a component unhealthy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlagRule {
    pub threshold_mean: f64,
    pub min_windows: usize,
    /// When set, the credible interval must also be at most this wide; a wide
    /// interval means the data cannot pin the component down.
    pub max_credible_width: Option<f64>,
}

impl Default for FlagRule {
    fn default() -> Self {
        FlagRule {
            threshold_mean: 0.9,
            min_windows: 1,
            max_credible_width: None,
        }
    }
}

impl FlagRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_mean > 0.0 && self.threshold_mean < 1.0) {
            return Err(Error::Config(format!(
                "flag threshold {} outside (0, 1)",
                self.threshold_mean
            )));
        }
        if self.min_windows == 0 {
            return Err(Error::Config("min_windows must be at least 1".into()));
        }
        Ok(())
    }

    pub fn is_unhealthy(&self, p: &HealthPosterior) -> bool {
        p.observed
            && p.mean < self.threshold_mean
            && self.max_credible_width.is_none_or(|w| p.width() <= w)
    }
}

/// Components unhealthy in each of the last `min_windows` windows of
/// `history` (oldest first).
pub fn flag_unhealthy(
    history: &[BTreeMap<ComponentId, HealthPosterior>],
    rule: &FlagRule,
) -> BTreeSet<ComponentId> {
    if history.len() < rule.min_windows || rule.min_windows == 0 {
        return BTreeSet::new();
    }
    let recent = &history[history.len() - rule.min_windows..];
    let Some(last) = recent.last() else {
        return BTreeSet::new();
    };
    last.values()
        .filter(|p| {
            recent.iter().all(|w| {
                w.get(&p.component)
                    .is_some_and(|q| rule.is_unhealthy(q))
            })
        })
        .map(|p| p.component)
        .collect()
}
