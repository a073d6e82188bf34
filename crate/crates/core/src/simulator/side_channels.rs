use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{FaultKind, Scenario};
use crate::topology::{ComponentId, ComponentKind, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    pub component: ComponentId,
    pub epoch: u32,
    /// Servers only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loadavg: Option<f64>,
    /// Disks only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub await_ms: Option<f64>,
    /// Disks only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utilization: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub component: ComponentId,
    pub epoch: u32,
    pub text: String,
}

/// Mean and standard deviation of a healthy metric, plus the shift applied
/// under overload at severity 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricModel {
    pub mean: f64,
    pub sd: f64,
    pub overload_mean_shift: f64,
    pub overload_sd_shift: f64,
}

impl MetricModel {
    fn draw<R: Rng + ?Sized>(&self, overload: f64, rng: &mut R) -> f64 {
        let mean = self.mean + overload * self.overload_mean_shift;
        let sd = self.sd + overload * self.overload_sd_shift;
        Normal::new(mean, sd).expect("finite sd").sample(rng).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SideChannelModel {
    pub loadavg: MetricModel,
    pub await_ms: MetricModel,
    pub utilization: MetricModel,
    /// Chance that each background template shows up on a component in an epoch.
    pub background_log_rate: f64,
}

impl Default for SideChannelModel {
    fn default() -> Self {
        SideChannelModel {
            loadavg: MetricModel {
                mean: 30.0,
                sd: 10.0,
                overload_mean_shift: 340.0,
                overload_sd_shift: 20.0,
            },
            await_ms: MetricModel {
                mean: 8.0,
                sd: 2.0,
                overload_mean_shift: 400.0,
                overload_sd_shift: 20.0,
            },
            utilization: MetricModel {
                mean: 0.35,
                sd: 0.08,
                overload_mean_shift: 0.6,
                overload_sd_shift: 0.0,
            },
            background_log_rate: 0.6,
        }
    }
}

fn host(c: ComponentId) -> String {
    format!("{}{}", c.kind.prefix().to_ascii_lowercase(), c.index)
}

fn timestamp<R: Rng + ?Sized>(epoch: u32, rng: &mut R) -> String {
    let minute = epoch as u64;
    let day = 1 + (minute / 1440) % 28;
    let h = (minute / 60) % 24;
    let m = minute % 60;
    let s: u32 = rng.random_range(0..60);
    format!("2023-03-{day:02}T{h:02}:{m:02}:{s:02}")
}

fn nid<R: Rng + ?Sized>(rng: &mut R) -> String {
    format!(
        "10.{}.{}.{}@o2ib",
        rng.random_range(0..=255u8),
        rng.random_range(0..=255u8),
        rng.random_range(1..=254u8)
    )
}

const BACKGROUND: usize = 8;

/// Background noise shared by every component; rendered with fresh
/// timestamps, addresses and counters each time.
fn background<R: Rng + ?Sized>(i: usize, c: ComponentId, rng: &mut R) -> String {
    let h = host(c);
    let n: u32 = rng.random_range(1..100_000);
    match i {
        0 => format!("{h} kernel: Lustre: {n}:0:(client.c:{}:ptlrpc_expire_one_request()) Request sent has timed out for slow reply", rng.random_range(100..3000)),
        1 => format!("{h} kernel: LNet: {n}:0:(o2iblnd_cb.c:{}:kiblnd_check_conns()) Timed out tx for {}", rng.random_range(100..4000), nid(rng)),
        2 => format!("{h} kernel: Lustre: {h}: Connection restored to {} (at {})", uuid(rng), nid(rng)),
        3 => format!("{h} sshd[{n}]: Accepted publickey for admin from {} port {}", ip(rng), rng.random_range(1024..65535)),
        4 => format!("{h} kernel: Lustre: {n}:0:(ldlm_lib.c:{}:target_handle_connect()) client reconnecting", rng.random_range(100..3000)),
        5 => format!("{h} crond[{n}]: (root) CMD (/usr/lib64/sa/sa1 1 1)"),
        6 => format!("{h} kernel: Lustre: {n}:0:(service.c:{}:ptlrpc_at_send_early_reply()) Already past deadline, not sending early reply", rng.random_range(100..3000)),
        _ => format!("{h} systemd[1]: Started Session {n} of user root."),
    }
}

fn uuid<R: Rng + ?Sized>(rng: &mut R) -> String {
    let a: u128 = rng.random();
    let s = format!("{a:032x}");
    format!("{}-{}-{}-{}-{}", &s[0..8], &s[8..12], &s[12..16], &s[16..20], &s[20..32])
}

fn ip<R: Rng + ?Sized>(rng: &mut R) -> String {
    format!(
        "172.{}.{}.{}",
        rng.random_range(16..32u8),
        rng.random_range(0..=255u8),
        rng.random_range(1..=254u8)
    )
}

/// Error lines characteristic of a fault kind on a component.
fn fault_lines<R: Rng + ?Sized>(kind: FaultKind, c: ComponentId, rng: &mut R) -> Vec<String> {
    let h = host(c);
    let n: u32 = rng.random_range(1..100_000);
    let dev = format!("sd{}", (b'a' + rng.random_range(0..26u8)) as char);
    let target = format!("scratch-OST{:04}", c.index);
    match kind {
        FaultKind::P1FailStop => vec![
            format!("{h} kernel: {dev}: rejecting I/O to offline device"),
            format!("{h} ipmievd[{n}]: Power Unit #0x{:02x} Power off/down", rng.random_range(0..256u32)),
        ],
        FaultKind::P2ProcessCrash => vec![
            format!("{h} kernel: LustreError: {n}:0:(service.c:{}:ptlrpc_main()) ASSERTION( rc == 0 ) failed", rng.random_range(100..3000)),
            format!("{h} kernel: LustreError: dumping log to /tmp/lustre-log.{}.{n}", rng.random_range(1_000_000_000u64..2_000_000_000)),
        ],
        FaultKind::P3Gray => vec![format!(
            "{h} kernel: LustreError: {n}:0:(events.c:{}:reply_in_callback()) {target}: bulk transfer dropped, status -{}",
            rng.random_range(100..3000),
            rng.random_range(1..200)
        )],
        FaultKind::P4FailSlowMasked => vec![
            format!("{h} kernel: md/raid6 md{}: recovering, {dev} degraded", rng.random_range(0..16)),
            format!("{h} kernel: Lustre: {target}: slow commitrw {}s due to heavy IO load", rng.random_range(30..900)),
        ],
        FaultKind::P5Overload => Vec::new(),
    }
}

/// Emits one epoch of load metrics and error logs.
///
/// Servers report `loadavg`; disks report `await` and `utilization`. Healthy
/// components draw from a shared baseline, overloaded ones from a shifted
/// distribution. Fail-stopped components report no metrics. Every running
/// component emits a random subset of the background log pool; failed
/// components add their fault-specific error lines.
pub fn emit_side_channels<R: Rng + ?Sized>(
    topo: &Topology,
    scenario: &Scenario,
    epoch: u32,
    rng: &mut R,
) -> (Vec<MetricSample>, Vec<LogRecord>) {
    let model = &scenario.side_channels;
    let active = scenario.active_faults(epoch);
    let mut metrics = Vec::new();
    let mut logs = Vec::new();
    let kinds = [
        ComponentKind::Lnet,
        ComponentKind::Mds,
        ComponentKind::Mgs,
        ComponentKind::DataServer,
        ComponentKind::Osd,
        ComponentKind::Mdt,
    ];
    for c in kinds.into_iter().flat_map(|k| topo.components_of(k)) {
        let mine: Vec<_> = active.iter().filter(|f| f.target == c).collect();
        let stopped = mine.iter().any(|f| f.kind.is_stop());
        let overload = mine
            .iter()
            .filter(|f| f.kind == FaultKind::P5Overload)
            .map(|f| f.severity)
            .fold(0.0, f64::max);

        if !stopped {
            if c.kind.is_server() {
                metrics.push(MetricSample {
                    component: c,
                    epoch,
                    loadavg: Some(model.loadavg.draw(overload, rng)),
                    await_ms: None,
                    utilization: None,
                });
            } else if c.kind.is_disk() {
                metrics.push(MetricSample {
                    component: c,
                    epoch,
                    loadavg: None,
                    await_ms: Some(model.await_ms.draw(overload, rng)),
                    utilization: Some(model.utilization.draw(overload, rng).min(1.0)),
                });
            }
        }

        let mut emit = |line: String, rng: &mut R| {
            logs.push(LogRecord {
                component: c,
                epoch,
                text: format!("{} {line}", timestamp(epoch, rng)),
            });
        };
        if !stopped {
            for i in 0..BACKGROUND {
                if rng.random::<f64>() < model.background_log_rate {
                    let line = background(i, c, rng);
                    emit(line, rng);
                }
            }
        }
        for f in &mine {
            for line in fault_lines(f.kind, c, rng) {
                emit(line, rng);
            }
        }
    }
    (metrics, logs)
}
