use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::{FaultKind, FaultSpec, ProbeStatus};
use crate::error::{Error, Result};
use crate::monitor::OpKind;
use crate::topology::{ComponentId, ComponentKind, ProbePath};

/// Log-normal parameters in log-milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalParams {
    pub mu: f64,
    pub sigma: f64,
}

impl LogNormalParams {
    pub fn from_median_ms(median_ms: f64, sigma: f64) -> Self {
        LogNormalParams {
            mu: median_ms.ln(),
            sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatencyModel {
    pub crwr: LogNormalParams,
    pub wrex: LogNormalParams,
    pub rmex: LogNormalParams,
    /// Worst-case slowdown of a fail-slow component at severity 1.
    pub p4_multiplier: f64,
    /// Load slowdown at severity 1; 1 + 6 gives a 7x mean completion time.
    pub p5_multiplier: f64,
    /// Latency factor for each redundancy-group member bypassed.
    pub failover_penalty: f64,
    pub slo_ms: f64,
    pub timeout_ms: f64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        // Median 125 ms keeps the healthy mean near 1/7 s, so a 7x overload
        // lands the mean completion time around the 1 s SLO.
        let base = LogNormalParams::from_median_ms(125.0, 0.5);
        LatencyModel {
            crwr: base,
            wrex: base,
            rmex: base,
            p4_multiplier: 52.7,
            p5_multiplier: 6.0,
            failover_penalty: 1.5,
            slo_ms: 1000.0,
            timeout_ms: 30_000.0,
        }
    }
}

impl LatencyModel {
    pub fn params(&self, op: OpKind) -> LogNormalParams {
        match op {
            OpKind::CrWr => self.crwr,
            OpKind::WrEx => self.wrex,
            OpKind::RmEx => self.rmex,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.slo_ms < self.timeout_ms) {
            return Err(Error::Config(format!(
                "slo {} ms must be below timeout {} ms",
                self.slo_ms, self.timeout_ms
            )));
        }
        for p in [self.crwr, self.wrex, self.rmex] {
            if !(p.sigma > 0.0) || !p.mu.is_finite() {
                return Err(Error::Config(format!("bad latency parameters {p:?}")));
            }
        }
        if self.failover_penalty < 1.0 || self.p4_multiplier < 0.0 || self.p5_multiplier < 0.0 {
            return Err(Error::Config("latency multipliers must not shrink latency".into()));
        }
        Ok(())
    }

    pub fn classify(&self, latency_ms: f64) -> (f64, ProbeStatus) {
        if latency_ms > self.timeout_ms {
            (self.timeout_ms, ProbeStatus::Timeout)
        } else if latency_ms > self.slo_ms {
            (latency_ms, ProbeStatus::Slow)
        } else {
            (latency_ms, ProbeStatus::Ok)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub latency_ms: f64,
    pub status: ProbeStatus,
    pub lnet: Option<ComponentId>,
    pub server: Option<ComponentId>,
    pub gray: bool,
}

#[derive(Debug, Default, Clone, Copy)]
struct Effect {
    stopped: bool,
    gray: f64,
    slowdown: f64,
}

impl Effect {
    fn of(c: ComponentId, faults: &[&FaultSpec], model: &LatencyModel) -> Self {
        let mut e = Effect {
            stopped: false,
            gray: 0.0,
            slowdown: 1.0,
        };
        for f in faults.iter().filter(|f| f.target == c) {
            match f.kind {
                FaultKind::P1FailStop | FaultKind::P2ProcessCrash => e.stopped = true,
                FaultKind::P3Gray => e.gray = 1.0 - (1.0 - e.gray) * (1.0 - f.severity),
                FaultKind::P4FailSlowMasked => e.slowdown *= 1.0 + f.severity * model.p4_multiplier,
                FaultKind::P5Overload => e.slowdown *= 1.0 + f.severity * model.p5_multiplier,
            }
        }
        e
    }

    fn is_clear(&self) -> bool {
        !self.stopped && self.gray == 0.0 && self.slowdown == 1.0
    }
}

/// Draws one Store-Ping outcome.
///
/// Serial components apply their faults directly: a stopped component times
/// the request out (an error if it is the monitor itself), a gray one fails
/// it with probability `severity`, slow ones multiply latency. Within a
/// redundancy group the request starts at the preferred member (LNETs rotate
/// from `lnet_cursor`) and moves on past any faulted member at a
/// `failover_penalty` cost; only when every member is faulted does the
/// preferred member's fault reach the request.
pub fn sample_outcome<R: Rng + ?Sized>(
    path: &ProbePath,
    op: OpKind,
    faults: &[&FaultSpec],
    lnet_cursor: usize,
    model: &LatencyModel,
    rng: &mut R,
) -> Outcome {
    let p = model.params(op);
    let base = LogNormal::new(p.mu, p.sigma)
        .expect("validated latency parameters")
        .sample(rng);

    let mut failed = false;
    let mut gray_hit = false;
    let mut factor = 1.0;
    let mut apply = |e: &Effect, rng: &mut R, failed: &mut bool, gray_hit: &mut bool| {
        if e.stopped {
            *failed = true;
        }
        if e.gray > 0.0 && rng.random::<f64>() < e.gray {
            *failed = true;
            *gray_hit = true;
        }
        factor *= e.slowdown;
    };

    for &c in &path.serial {
        let e = Effect::of(c, faults, model);
        if c.kind == ComponentKind::Client && e.stopped {
            return Outcome {
                latency_ms: 0.0,
                status: ProbeStatus::Error,
                lnet: None,
                server: None,
                gray: false,
            };
        }
        if !e.is_clear() {
            apply(&e, rng, &mut failed, &mut gray_hit);
        }
    }

    let mut lnet = None;
    let mut server = None;
    let mut hops = 0i32;
    for group in &path.groups {
        let rotate = if group.first().map(|c| c.kind) == Some(ComponentKind::Lnet) {
            lnet_cursor % group.len()
        } else {
            0
        };
        let order = || (0..group.len()).map(|i| group[(i + rotate) % group.len()]);
        let mut chosen = None;
        for m in order() {
            let e = Effect::of(m, faults, model);
            let bypass = if e.stopped || e.slowdown > 1.0 {
                true
            } else if e.gray > 0.0 && rng.random::<f64>() < e.gray {
                gray_hit = true;
                true
            } else {
                false
            };
            if !bypass {
                chosen = Some(m);
                break;
            }
            hops += 1;
        }
        let served = match chosen {
            Some(m) => m,
            None => {
                let primary = order().next().expect("non-empty group");
                hops -= group.len() as i32;
                let e = Effect::of(primary, faults, model);
                apply(&e, rng, &mut failed, &mut gray_hit);
                primary
            }
        };
        match served.kind {
            ComponentKind::Lnet => lnet = Some(served),
            ComponentKind::DataServer => server = Some(served),
            _ => {}
        }
    }

    let (latency_ms, status) = if failed {
        (model.timeout_ms, ProbeStatus::Timeout)
    } else {
        model.classify(base * factor * model.failover_penalty.powi(hops.max(0)))
    };
    Outcome {
        latency_ms,
        status,
        lnet,
        server,
        gray: gray_hit,
    }
}
