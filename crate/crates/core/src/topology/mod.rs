//! Typed component graph of a parallel storage cluster and the probe paths
//! that traverse it.
//!
//! Clients reach storage through a compute-network segment, one LNET router
//! chosen from a fixed group, and the storage network. Object storage targets
//! (OSDs) sit behind an active-active pair of data servers; metadata targets
//! (MDTs) sit behind a failover pair of metadata servers.

mod identifiability;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub use identifiability::{
    check_identifiability, check_identifiability_sampled, measurement_routes, IdentifiabilityReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ComponentKind {
    Client,
    ComputeNet,
    StorageNet,
    Lnet,
    Mds,
    Mgs,
    DataServer,
    Osd,
    Mdt,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 9] = [
        ComponentKind::Client,
        ComponentKind::ComputeNet,
        ComponentKind::StorageNet,
        ComponentKind::Lnet,
        ComponentKind::Mds,
        ComponentKind::Mgs,
        ComponentKind::DataServer,
        ComponentKind::Osd,
        ComponentKind::Mdt,
    ];

    pub fn prefix(self) -> &'static str {
        match self {
            ComponentKind::Client => "C",
            ComponentKind::ComputeNet => "CN",
            ComponentKind::StorageNet => "SN",
            ComponentKind::Lnet => "LNET",
            ComponentKind::Mds => "MDS",
            ComponentKind::Mgs => "MGS",
            ComponentKind::DataServer => "DS",
            ComponentKind::Osd => "OSD",
            ComponentKind::Mdt => "MDT",
        }
    }

    fn from_prefix(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.prefix() == s)
    }

    /// Components whose health the monitors are responsible for localizing.
    pub fn is_storage(self) -> bool {
        matches!(
            self,
            ComponentKind::Lnet
                | ComponentKind::Mds
                | ComponentKind::DataServer
                | ComponentKind::Osd
                | ComponentKind::Mdt
        )
    }

    pub fn is_server(self) -> bool {
        matches!(
            self,
            ComponentKind::Mds | ComponentKind::Mgs | ComponentKind::DataServer
        )
    }

    pub fn is_disk(self) -> bool {
        matches!(self, ComponentKind::Osd | ComponentKind::Mdt)
    }

    pub fn is_probe_target(self) -> bool {
        matches!(
            self,
            ComponentKind::Mds | ComponentKind::Mdt | ComponentKind::DataServer | ComponentKind::Osd
        )
    }
}

/// A component is identified by its kind and a zero-based index within that
/// kind. Rendered as e.g. `DS17`, `OSD3`, `C0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ComponentId {
    pub kind: ComponentKind,
    pub index: u32,
}

impl ComponentId {
    pub const fn new(kind: ComponentKind, index: u32) -> Self {
        ComponentId { kind, index }
    }
    pub const fn client(i: u32) -> Self {
        Self::new(ComponentKind::Client, i)
    }
    pub const fn ds(i: u32) -> Self {
        Self::new(ComponentKind::DataServer, i)
    }
    pub const fn osd(i: u32) -> Self {
        Self::new(ComponentKind::Osd, i)
    }
    pub const fn mds(i: u32) -> Self {
        Self::new(ComponentKind::Mds, i)
    }
    pub const fn lnet(i: u32) -> Self {
        Self::new(ComponentKind::Lnet, i)
    }
}

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.kind.prefix(), self.index)
    }
}

impl FromStr for ComponentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let split = s
            .find(|c: char| c.is_ascii_digit())
            .ok_or_else(|| Error::Parse(format!("component id `{s}` has no index")))?;
        let (prefix, digits) = s.split_at(split);
        let kind = ComponentKind::from_prefix(&prefix.to_ascii_uppercase())
            .ok_or_else(|| Error::Parse(format!("unknown component kind in `{s}`")))?;
        let index = digits
            .parse()
            .map_err(|_| Error::Parse(format!("bad component index in `{s}`")))?;
        Ok(ComponentId { kind, index })
    }
}

impl Serialize for ComponentId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ComponentId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How a client group counts toward monitor coverage. Members of a `Shared`
/// group are interchangeable vantage points (same network, same stack); each
/// `PerNode` member is a distinct vantage point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vantage {
    #[default]
    PerNode,
    Shared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientGroupSpec {
    pub name: String,
    pub count: usize,
    #[serde(default)]
    pub network: usize,
    #[serde(default)]
    pub vantage: Vantage,
}

fn one() -> usize {
    1
}
fn default_group_size() -> usize {
    4
}

/// Declarative shape of a cluster. Counts mirror the roles of a production
/// Lustre deployment but are free parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    /// Plain client count; ignored when `client_groups` is non-empty.
    #[serde(default)]
    pub clients: usize,
    #[serde(default)]
    pub client_groups: Vec<ClientGroupSpec>,
    #[serde(default = "one")]
    pub compute_nets: usize,
    #[serde(default = "one")]
    pub mds: usize,
    #[serde(default = "one")]
    pub mgs: usize,
    /// Metadata targets; MDT `i` is served by MDS `i % mds`, which fails
    /// over to its pair partner (MDS `2j` pairs with `2j + 1`).
    #[serde(default)]
    pub mdts: usize,
    pub data_servers: usize,
    pub osds: usize,
    pub lnets: usize,
    #[serde(default = "default_group_size")]
    pub lnet_group_size: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for TopologySpec {
    fn default() -> Self {
        Self::minimal()
    }
}

impl TopologySpec {
    /// Smallest legal cluster: one of everything, one HA pair.
    pub fn minimal() -> Self {
        TopologySpec {
            clients: 1,
            client_groups: Vec::new(),
            compute_nets: 1,
            mds: 1,
            mgs: 1,
            mdts: 0,
            data_servers: 2,
            osds: 1,
            lnets: 4,
            lnet_group_size: 4,
            seed: 0,
        }
    }

    /// Desk-scale cluster used by tests and CI runs.
    pub fn ci() -> Self {
        TopologySpec {
            clients: 8,
            compute_nets: 2,
            mds: 2,
            data_servers: 32,
            osds: 32,
            lnets: 8,
            ..Self::minimal()
        }
    }

    /// Production-shaped cluster: 4 login nodes, 64 service nodes and 25
    /// import/export nodes on three networks; 6 metadata servers with their
    /// targets; 432 data servers and OSDs.
    pub fn full() -> Self {
        TopologySpec {
            clients: 0,
            client_groups: vec![
                ClientGroupSpec {
                    name: "login".into(),
                    count: 4,
                    network: 0,
                    vantage: Vantage::PerNode,
                },
                ClientGroupSpec {
                    name: "service".into(),
                    count: 64,
                    network: 1,
                    vantage: Vantage::Shared,
                },
                ClientGroupSpec {
                    name: "ie".into(),
                    count: 25,
                    network: 2,
                    vantage: Vantage::Shared,
                },
            ],
            compute_nets: 3,
            mds: 6,
            mgs: 6,
            mdts: 6,
            data_servers: 432,
            osds: 432,
            lnets: 36,
            lnet_group_size: 4,
            seed: 0,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "minimal" => Ok(Self::minimal()),
            "ci" => Ok(Self::ci()),
            "full" | "production" => Ok(Self::full()),
            other => Err(Error::Config(format!("unknown topology preset `{other}`"))),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientInfo {
    pub id: ComponentId,
    pub group: String,
    pub network: u32,
    pub vantage: Vantage,
}

impl ClientInfo {
    /// Key identifying this client's vantage point for coverage purposes.
    pub fn vantage_key(&self) -> String {
        match self.vantage {
            Vantage::Shared => format!("group:{}", self.group),
            Vantage::PerNode => format!("node:{}", self.id),
        }
    }
}

/// A measurement path from a monitor client to a probe target.
///
/// `serial` lists every component the request must traverse, ending with the
/// target. `groups` lists redundancy groups (the LNET group, and for OSDs the
/// data-server HA pair); a group is available if any member is. Group members
/// are listed in routing-preference order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProbePath {
    pub client: ComponentId,
    pub target: ComponentId,
    pub serial: Vec<ComponentId>,
    pub groups: Vec<Vec<ComponentId>>,
}

impl ProbePath {
    pub fn components(&self) -> impl Iterator<Item = ComponentId> + '_ {
        self.serial.iter().chain(self.groups.iter().flatten()).copied()
    }

    pub fn contains(&self, c: ComponentId) -> bool {
        self.components().any(|x| x == c)
    }
}

/// Immutable cluster model. Cheap to share across threads.
#[derive(Debug, Clone)]
pub struct Topology {
    spec: TopologySpec,
    clients: Vec<ClientInfo>,
    ha_pairs: Vec<[ComponentId; 2]>,
    osd_pair: Vec<u32>,
    osd_primary: Vec<u8>,
    lnet_groups: Vec<Vec<ComponentId>>,
    client_lnet_offset: Vec<u32>,
    pair_domain: Vec<u32>,
    fingerprint: u64,
}

/// Serializable snapshot of a built topology, written by `topo gen`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopologyDocument {
    pub spec: TopologySpec,
    pub fingerprint: String,
    pub clients: Vec<ClientInfo>,
    pub ha_pairs: Vec<[ComponentId; 2]>,
    pub osd_owners: Vec<(ComponentId, [ComponentId; 2])>,
    pub lnet_groups: Vec<Vec<ComponentId>>,
    pub domains: Vec<DomainDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainDocument {
    pub domain: u32,
    pub mds: ComponentId,
    pub data_servers: Vec<ComponentId>,
}

pub fn build_topology(spec: &TopologySpec) -> Result<Topology> {
    Topology::build(spec.clone())
}

impl Topology {
    pub fn build(spec: TopologySpec) -> Result<Self> {
        if spec.data_servers % 2 == 1 {
            return Err(Error::Pairing(format!(
                "{} data servers cannot be split into HA pairs",
                spec.data_servers
            )));
        }
        let client_total = if spec.client_groups.is_empty() {
            spec.clients
        } else {
            spec.client_groups.iter().map(|g| g.count).sum()
        };
        if client_total == 0 {
            return Err(Error::Spec("no monitor-eligible clients".into()));
        }
        for (name, n) in [
            ("compute_nets", spec.compute_nets),
            ("mds", spec.mds),
            ("mgs", spec.mgs),
            ("data_servers", spec.data_servers),
            ("osds", spec.osds),
            ("lnets", spec.lnets),
            ("lnet_group_size", spec.lnet_group_size),
        ] {
            if n == 0 {
                return Err(Error::Spec(format!("{name} must be at least 1")));
            }
        }
        if spec.lnets < spec.lnet_group_size {
            return Err(Error::Spec(format!(
                "{} LNETs cannot form a group of {}",
                spec.lnets, spec.lnet_group_size
            )));
        }

        let mut clients = Vec::with_capacity(client_total);
        if spec.client_groups.is_empty() {
            for i in 0..spec.clients {
                clients.push(ClientInfo {
                    id: ComponentId::client(i as u32),
                    group: "clients".into(),
                    network: (i % spec.compute_nets) as u32,
                    vantage: Vantage::PerNode,
                });
            }
        } else {
            for g in &spec.client_groups {
                if g.network >= spec.compute_nets {
                    return Err(Error::Spec(format!(
                        "client group `{}` on network {} but only {} compute nets",
                        g.name, g.network, spec.compute_nets
                    )));
                }
                for _ in 0..g.count {
                    let id = ComponentId::client(clients.len() as u32);
                    clients.push(ClientInfo {
                        id,
                        group: g.name.clone(),
                        network: g.network as u32,
                        vantage: g.vantage,
                    });
                }
            }
        }

        let n_pairs = spec.data_servers / 2;
        let ha_pairs: Vec<[ComponentId; 2]> = (0..n_pairs as u32)
            .map(|p| [ComponentId::ds(2 * p), ComponentId::ds(2 * p + 1)])
            .collect();
        let osd_pair: Vec<u32> = (0..spec.osds).map(|o| (o % n_pairs) as u32).collect();
        let osd_primary: Vec<u8> = (0..spec.osds).map(|o| ((o / n_pairs) % 2) as u8).collect();

        // Seeded partition of the LNETs into fixed groups of G; when G does not
        // divide the count the last group wraps around to stay exactly G wide.
        let mut rng = rng::rng_for(spec.seed, &[rng::fnv1a(b"lnet-groups")]);
        let mut perm: Vec<u32> = (0..spec.lnets as u32).collect();
        perm.shuffle(&mut rng);
        let g = spec.lnet_group_size;
        let n_groups = spec.lnets.div_ceil(g);
        let lnet_groups: Vec<Vec<ComponentId>> = (0..n_groups)
            .map(|gi| {
                (0..g)
                    .map(|j| ComponentId::lnet(perm[(gi * g + j) % spec.lnets]))
                    .collect()
            })
            .collect();
        let client_lnet_offset: Vec<u32> = (0..client_total)
            .map(|_| rng.random_range(0..n_groups as u32))
            .collect();

        let pair_domain: Vec<u32> = (0..n_pairs)
            .map(|p| (p * spec.mds / n_pairs) as u32)
            .collect();

        let fingerprint = rng::fnv1a(
            serde_json::to_string(&spec)
                .expect("spec serializes")
                .as_bytes(),
        );

        Ok(Topology {
            spec,
            clients,
            ha_pairs,
            osd_pair,
            osd_primary,
            lnet_groups,
            client_lnet_offset,
            pair_domain,
            fingerprint,
        })
    }

    pub fn spec(&self) -> &TopologySpec {
        &self.spec
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn count(&self, kind: ComponentKind) -> usize {
        match kind {
            ComponentKind::Client => self.clients.len(),
            ComponentKind::ComputeNet => self.spec.compute_nets,
            ComponentKind::StorageNet => 1,
            ComponentKind::Lnet => self.spec.lnets,
            ComponentKind::Mds => self.spec.mds,
            ComponentKind::Mgs => self.spec.mgs,
            ComponentKind::DataServer => self.spec.data_servers,
            ComponentKind::Osd => self.spec.osds,
            ComponentKind::Mdt => self.spec.mdts,
        }
    }

    pub fn component_count(&self) -> usize {
        ComponentKind::ALL.iter().map(|&k| self.count(k)).sum()
    }

    pub fn components(&self) -> impl Iterator<Item = ComponentId> + '_ {
        ComponentKind::ALL
            .into_iter()
            .flat_map(move |k| (0..self.count(k) as u32).map(move |i| ComponentId::new(k, i)))
    }

    pub fn components_of(&self, kind: ComponentKind) -> impl Iterator<Item = ComponentId> {
        (0..self.count(kind) as u32).map(move |i| ComponentId::new(kind, i))
    }

    pub fn contains(&self, c: ComponentId) -> bool {
        (c.index as usize) < self.count(c.kind)
    }

    pub fn require(&self, c: ComponentId) -> Result<()> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(Error::NotFound(format!("component {c} is not in the topology")))
        }
    }

    pub fn clients(&self) -> &[ClientInfo] {
        &self.clients
    }

    pub fn client_info(&self, c: ComponentId) -> Result<&ClientInfo> {
        if c.kind != ComponentKind::Client {
            return Err(Error::Config(format!("{c} is not a client")));
        }
        self.clients
            .get(c.index as usize)
            .ok_or_else(|| Error::NotFound(format!("client {c} is not in the topology")))
    }

    pub fn ha_pairs(&self) -> &[[ComponentId; 2]] {
        &self.ha_pairs
    }

    /// HA pair owning an OSD, active member first.
    pub fn osd_owners(&self, osd: ComponentId) -> Result<[ComponentId; 2]> {
        if osd.kind != ComponentKind::Osd {
            return Err(Error::Config(format!("{osd} is not an OSD")));
        }
        self.require(osd)?;
        let pair = self.ha_pairs[self.osd_pair[osd.index as usize] as usize];
        Ok(if self.osd_primary[osd.index as usize] == 0 {
            pair
        } else {
            [pair[1], pair[0]]
        })
    }

    pub fn ha_partner(&self, ds: ComponentId) -> Result<ComponentId> {
        if ds.kind != ComponentKind::DataServer {
            return Err(Error::Config(format!("{ds} is not a data server")));
        }
        self.require(ds)?;
        Ok(ComponentId::ds(ds.index ^ 1))
    }

    /// Active metadata server of an MDT.
    pub fn mdt_owner(&self, mdt: ComponentId) -> ComponentId {
        ComponentId::mds(mdt.index % self.spec.mds as u32)
    }

    /// Metadata servers able to serve an MDT, active one first. An MDS
    /// without a pair partner (odd count) serves alone.
    pub fn mdt_owners(&self, mdt: ComponentId) -> Vec<ComponentId> {
        let owner = self.mdt_owner(mdt);
        let partner = owner.index ^ 1;
        if (partner as usize) < self.spec.mds {
            vec![owner, ComponentId::mds(partner)]
        } else {
            vec![owner]
        }
    }

    /// Failover partner of a metadata server, if it has one.
    pub fn mds_partner(&self, mds: ComponentId) -> Option<ComponentId> {
        let partner = mds.index ^ 1;
        (mds.kind == ComponentKind::Mds && (partner as usize) < self.spec.mds)
            .then(|| ComponentId::mds(partner))
    }

    pub fn lnet_groups(&self) -> &[Vec<ComponentId>] {
        &self.lnet_groups
    }

    pub fn domain_count(&self) -> usize {
        self.spec.mds
    }

    /// Filesystem domain a probe target belongs to. Each MDS heads one
    /// domain; data-server pairs are split into contiguous blocks.
    pub fn domain_of(&self, c: ComponentId) -> Option<u32> {
        if !self.contains(c) {
            return None;
        }
        match c.kind {
            ComponentKind::Mds => Some(c.index),
            ComponentKind::Mdt => Some(self.mdt_owner(c).index),
            ComponentKind::DataServer => Some(self.pair_domain[(c.index / 2) as usize]),
            ComponentKind::Osd => {
                Some(self.pair_domain[self.osd_pair[c.index as usize] as usize])
            }
            _ => None,
        }
    }

    /// All probe targets in canonical order: MDS, MDT, DS, OSD.
    pub fn probe_targets(&self) -> Vec<ComponentId> {
        [
            ComponentKind::Mds,
            ComponentKind::Mdt,
            ComponentKind::DataServer,
            ComponentKind::Osd,
        ]
        .into_iter()
        .flat_map(|k| self.components_of(k))
        .collect()
    }

    fn target_ordinal(&self, t: ComponentId) -> usize {
        let base = match t.kind {
            ComponentKind::Mds => 0,
            ComponentKind::Mdt => self.spec.mds,
            ComponentKind::DataServer => self.spec.mds + self.spec.mdts,
            ComponentKind::Osd => self.spec.mds + self.spec.mdts + self.spec.data_servers,
            _ => 0,
        };
        base + t.index as usize
    }

    /// The fixed LNET group serving a (client, target) pair. Groups are
    /// assigned round robin over targets from a seeded per-client offset.
    pub fn lnet_group(&self, client: ComponentId, target: ComponentId) -> &[ComponentId] {
        let off = self.client_lnet_offset[client.index as usize] as usize;
        let gi = (off + self.target_ordinal(target)) % self.lnet_groups.len();
        &self.lnet_groups[gi]
    }

    pub fn enumerate_paths(&self, client: ComponentId, target: ComponentId) -> Result<ProbePath> {
        let info = self.client_info(client)?;
        self.require(target)?;
        if !target.kind.is_probe_target() {
            return Err(Error::Config(format!("{target} is not a probe target")));
        }
        let mut serial = vec![
            client,
            ComponentId::new(ComponentKind::ComputeNet, info.network),
            ComponentId::new(ComponentKind::StorageNet, 0),
        ];
        let mut groups = vec![self.lnet_group(client, target).to_vec()];
        match target.kind {
            ComponentKind::Osd => groups.push(self.osd_owners(target)?.to_vec()),
            ComponentKind::Mdt => groups.push(self.mdt_owners(target)),
            _ => {}
        }
        serial.push(target);
        Ok(ProbePath {
            client,
            target,
            serial,
            groups,
        })
    }

    pub fn document(&self) -> TopologyDocument {
        let mut domains: HashMap<u32, Vec<ComponentId>> = HashMap::new();
        for ds in self.components_of(ComponentKind::DataServer) {
            domains
                .entry(self.domain_of(ds).unwrap_or(0))
                .or_default()
                .push(ds);
        }
        TopologyDocument {
            spec: self.spec.clone(),
            fingerprint: format!("{:016x}", self.fingerprint),
            clients: self.clients.clone(),
            ha_pairs: self.ha_pairs.clone(),
            osd_owners: self
                .components_of(ComponentKind::Osd)
                .map(|o| (o, self.osd_owners(o).expect("valid osd")))
                .collect(),
            lnet_groups: self.lnet_groups.clone(),
            domains: (0..self.spec.mds as u32)
                .map(|d| DomainDocument {
                    domain: d,
                    mds: ComponentId::mds(d),
                    data_servers: domains.remove(&d).unwrap_or_default(),
                })
                .collect(),
        }
    }
}
