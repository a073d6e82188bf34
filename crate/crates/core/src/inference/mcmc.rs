use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FactorGraph, HealthPosterior};
use crate::error::{Error, Result};
use crate::rng;
use crate::topology::ComponentId;

const EPS: f64 = 1e-12;
const TARGET_ACCEPT: f64 = 0.44;
const ADAPT_EVERY: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub chains: usize,
    /// Retained draws per chain.
    pub samples: usize,
    pub burn_in: usize,
    pub rhat_max: f64,
    pub seed: u64,
    /// Lower and upper quantiles of the reported credible interval.
    pub credible: (f64, f64),
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            chains: 4,
            samples: 2500,
            burn_in: 1000,
            rhat_max: 1.1,
            seed: 0,
            credible: (0.05, 0.95),
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 1000 {
            return Err(Error::Config(format!(
                "{} samples per chain; at least 1000 required",
                self.samples
            )));
        }
        if self.chains == 0 {
            return Err(Error::Config("at least one chain required".into()));
        }
        let (lo, hi) = self.credible;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::Config(format!("bad credible quantiles ({lo}, {hi})")));
        }
        Ok(())
    }
}

/// Chains disagree beyond the configured R-hat bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceWarning {
    pub max_rhat: f64,
    pub components: Vec<ComponentId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub posteriors: BTreeMap<ComponentId, HealthPosterior>,
    pub warning: Option<ConvergenceWarning>,
}

fn sigmoid(z: f64) -> f64 {
    (1.0 / (1.0 + (-z).exp())).clamp(EPS, 1.0 - EPS)
}

/// Precomputed likelihood structure for one variable.
///
/// The Binomial log-likelihood `y ln A + (n - y) ln(1 - A)` splits: `ln A` is
/// a sum over serial members and group terms, so the `y ln A` part reduces to
/// per-variable weights on `ln x` and on the log of each group term. Only
/// factors with failures need their own `ln(1 - A)`.
#[derive(Debug, Default, Clone)]
struct Touch {
    serial_weight: f64,
    /// (group, summed successes over factors using the group).
    groups: Vec<(u32, f64)>,
    /// (factor with failures, how the variable enters it).
    failing: Vec<(u32, Role)>,
}

#[derive(Debug, Clone, Copy)]
enum Role {
    Serial,
    Group(u32),
}

struct Model<'a> {
    graph: &'a FactorGraph,
    /// Observed variables, in graph order.
    active: Vec<u32>,
    touch: Vec<Touch>,
    /// Factors with at least one failure.
    failing: Vec<u32>,
}

impl<'a> Model<'a> {
    fn new(graph: &'a FactorGraph) -> Self {
        let nv = graph.variables.len();
        let mut touch = vec![Touch::default(); nv];
        let mut group_w: Vec<BTreeMap<u32, f64>> = vec![BTreeMap::new(); nv];
        let mut failing = Vec::new();
        for (fi, f) in graph.factors.iter().enumerate() {
            let fi = fi as u32;
            let fails = f.n > f.y;
            if fails {
                failing.push(fi);
            }
            for &v in &f.serial {
                touch[v as usize].serial_weight += f64::from(f.y);
                if fails {
                    touch[v as usize].failing.push((fi, Role::Serial));
                }
            }
            for &g in &f.groups {
                for &v in &graph.groups[g as usize] {
                    *group_w[v as usize].entry(g).or_insert(0.0) += f64::from(f.y);
                    if fails {
                        touch[v as usize].failing.push((fi, Role::Group(g)));
                    }
                }
            }
        }
        for (t, gw) in touch.iter_mut().zip(group_w) {
            t.groups = gw.into_iter().collect();
        }
        let active = graph
            .degrees()
            .iter()
            .enumerate()
            .filter(|(_, &d)| d > 0)
            .map(|(i, _)| i as u32)
            .collect();
        Model {
            graph,
            active,
            touch,
            failing,
        }
    }
}

struct State {
    x: Vec<f64>,
    z: Vec<f64>,
    /// 1 - prod(1 - x) per group.
    g: Vec<f64>,
    /// Availability per factor (kept current only for failing factors).
    a: Vec<f64>,
}

impl State {
    fn group_term(&self, model: &Model, g: u32, v: u32, xv: f64) -> f64 {
        let mut down = 1.0;
        for &m in &model.graph.groups[g as usize] {
            down *= 1.0 - if m == v { xv } else { self.x[m as usize] };
        }
        (1.0 - down).max(EPS * EPS)
    }

    fn refresh(&mut self, model: &Model) {
        for g in 0..model.graph.groups.len() {
            self.g[g] = self.group_term(model, g as u32, u32::MAX, 0.0);
        }
        for &fi in &model.failing {
            let f = &model.graph.factors[fi as usize];
            let mut a = 1.0;
            for &v in &f.serial {
                a *= self.x[v as usize];
            }
            for &g in &f.groups {
                a *= self.g[g as usize];
            }
            self.a[fi as usize] = a;
        }
    }
}

fn log1m(a: f64) -> f64 {
    (1.0 - a).max(EPS * EPS).ln()
}

/// Runs one chain; returns retained draws per active variable.
fn run_chain(model: &Model, cfg: &McmcConfig, chain: usize) -> Vec<Vec<f64>> {
    let graph = model.graph;
    let mut rng = rng::rng_for(cfg.seed, &[rng::fnv1a(b"mcmc"), chain as u64]);
    let nv = graph.variables.len();
    let mut st = State {
        x: vec![0.5; nv],
        z: vec![0.0; nv],
        g: vec![1.0; graph.groups.len()],
        a: vec![1.0; graph.factors.len()],
    };
    for &v in &model.active {
        let b = &graph.variables[v as usize];
        let m = b.mean().clamp(0.05, 0.95);
        let z0 = (m / (1.0 - m)).ln() + rng.sample::<f64, _>(StandardNormal);
        st.z[v as usize] = z0;
        st.x[v as usize] = sigmoid(z0);
    }
    st.refresh(model);

    let mut step = vec![1.0f64; nv];
    let mut accepted = vec![0u32; nv];
    let mut draws: Vec<Vec<f64>> = model
        .active
        .iter()
        .map(|_| Vec::with_capacity(cfg.samples))
        .collect();
    let mut new_g: Vec<(u32, f64)> = Vec::new();
    let mut new_a: Vec<(u32, f64)> = Vec::new();

    for iter in 0..cfg.burn_in + cfg.samples {
        for &v in &model.active {
            let vi = v as usize;
            let t = &model.touch[vi];
            let prior = &graph.variables[vi];
            let x = st.x[vi];
            let z1 = st.z[vi] + step[vi] * rng.sample::<f64, _>(StandardNormal);
            let x1 = sigmoid(z1);

            // Beta prior on x plus the logit Jacobian x(1 - x).
            let (lx, lx1) = (x.ln(), x1.ln());
            let (l1x, l1x1) = ((1.0 - x).ln(), (1.0 - x1).ln());
            let mut delta = prior.alpha * (lx1 - lx) + prior.beta * (l1x1 - l1x);
            delta += t.serial_weight * (lx1 - lx);
            new_g.clear();
            for &(g, w) in &t.groups {
                let g1 = st.group_term(model, g, v, x1);
                delta += w * (g1.ln() - st.g[g as usize].ln());
                new_g.push((g, g1));
            }
            new_a.clear();
            for &(fi, role) in &t.failing {
                let f = &graph.factors[fi as usize];
                let a = st.a[fi as usize];
                let ratio = match role {
                    Role::Serial => x1 / x,
                    Role::Group(g) => {
                        let g1 = new_g.iter().find(|(h, _)| *h == g).expect("group of v").1;
                        g1 / st.g[g as usize]
                    }
                };
                let a1 = (a * ratio).min(1.0);
                delta += f64::from(f.n - f.y) * (log1m(a1) - log1m(a));
                new_a.push((fi, a1));
            }

            if delta >= 0.0 || rng.random::<f64>().ln() < delta {
                st.x[vi] = x1;
                st.z[vi] = z1;
                for &(g, g1) in &new_g {
                    st.g[g as usize] = g1;
                }
                for &(fi, a1) in &new_a {
                    st.a[fi as usize] = a1;
                }
                accepted[vi] += 1;
            }
        }
        // Multiplicative updates drift; recompute exactly once per sweep.
        st.refresh(model);

        if iter < cfg.burn_in {
            if (iter + 1) % ADAPT_EVERY == 0 {
                let k = ((iter + 1) / ADAPT_EVERY) as f64;
                let rate = (0.1f64).min(1.0 / k.sqrt());
                for &v in &model.active {
                    let acc = f64::from(accepted[v as usize]) / ADAPT_EVERY as f64;
                    let adj = if acc > TARGET_ACCEPT { rate } else { -rate };
                    step[v as usize] = (step[v as usize] * adj.exp()).clamp(1e-3, 50.0);
                    accepted[v as usize] = 0;
                }
            }
        } else {
            for (d, &v) in draws.iter_mut().zip(&model.active) {
                d.push(st.x[v as usize]);
            }
        }
    }
    draws
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, v)
}

/// Gelman-Rubin potential scale reduction. A single chain is split in half.
pub(crate) fn rhat(chains: &[&[f64]]) -> f64 {
    let split: Vec<&[f64]> = if chains.len() == 1 {
        let c = chains[0];
        let h = c.len() / 2;
        vec![&c[..h], &c[h..2 * h]]
    } else {
        chains.to_vec()
    };
    let n = split.iter().map(|c| c.len()).min().unwrap_or(0);
    if n < 2 {
        return f64::NAN;
    }
    let stats: Vec<(f64, f64)> = split.iter().map(|c| mean_var(&c[..n])).collect();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / stats.len() as f64;
    let means: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let b = n as f64 * mean_var(&means).1;
    if w <= 0.0 {
        return if b <= 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b / n as f64;
    (var_plus / w).sqrt()
}

/// Effective sample size of one chain by Geyer's initial positive sequence.
pub(crate) fn ess(chain: &[f64]) -> f64 {
    let n = chain.len();
    if n < 4 {
        return n as f64;
    }
    let (m, v) = mean_var(chain);
    if v <= 0.0 {
        return n as f64;
    }
    let denom = v * (n as f64 - 1.0);
    let acf = |lag: usize| -> f64 {
        chain[..n - lag]
            .iter()
            .zip(&chain[lag..])
            .map(|(a, b)| (a - m) * (b - m))
            .sum::<f64>()
            / denom
    };
    let mut sum = 0.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = acf(lag) + acf(lag + 1);
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        lag += 2;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / n as f64);
    (n as f64 / tau).min(n as f64 * (n as f64).log10())
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Samples the posterior of every observed component. Chains run in
/// parallel, each from its own seed, so results do not depend on scheduling.
/// Unobserved components report their prior mean with interval [0, 1].
pub fn infer(graph: &FactorGraph, cfg: &McmcConfig) -> Result<InferenceResult> {
    cfg.validate()?;
    let model = Model::new(graph);
    let chains: Vec<Vec<Vec<f64>>> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| run_chain(&model, cfg, c))
        .collect();

    let mut posteriors = BTreeMap::new();
    let mut bad = Vec::new();
    let mut max_rhat: f64 = 1.0;
    let mut active = model.active.iter().enumerate().peekable();
    for (vi, b) in graph.variables.iter().enumerate() {
        let p = match active.peek() {
            Some(&(ai, &v)) if v as usize == vi => {
                active.next();
                let per_chain: Vec<&[f64]> = chains.iter().map(|c| c[ai].as_slice()).collect();
                let mut pooled: Vec<f64> = per_chain.concat();
                let (mean, variance) = mean_var(&pooled);
                pooled.sort_by(f64::total_cmp);
                let r = rhat(&per_chain);
                if !(r <= cfg.rhat_max) {
                    bad.push(b.component);
                }
                if r.is_finite() {
                    max_rhat = max_rhat.max(r);
                } else {
                    max_rhat = f64::INFINITY;
                }
                let ess_total: f64 = per_chain.iter().map(|c| ess(c)).sum();
                HealthPosterior {
                    component: b.component,
                    mean,
                    variance,
                    credible_low: quantile(&pooled, cfg.credible.0).min(mean),
                    credible_high: quantile(&pooled, cfg.credible.1).max(mean),
                    effective_samples: ess_total.round() as u64,
                    rhat: r,
                    observed: true,
                }
            }
            _ => HealthPosterior {
                component: b.component,
                mean: b.mean(),
                variance: b.variance(),
                credible_low: 0.0,
                credible_high: 1.0,
                effective_samples: 0,
                rhat: 1.0,
                observed: false,
            },
        };
        posteriors.insert(b.component, p);
    }
    let warning = (!bad.is_empty()).then(|| {
        log::warn!(
            "{} components exceed R-hat {} (max {max_rhat:.3})",
            bad.len(),
            cfg.rhat_max
        );
        ConvergenceWarning {
            max_rhat,
            components: bad,
        }
    });
    Ok(InferenceResult {
        posteriors,
        warning,
    })
}
