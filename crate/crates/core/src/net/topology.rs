//! Two-tier fat tree: hosts under ToRs, every ToR wired to every spine.
//!
//! Node ids are dense: hosts first, then ToRs, then spines. Port layout:
//!
//! * host `h`: port 0 goes to its ToR;
//! * ToR `t`: ports `0..hosts_per_tor` go down to hosts, `hosts_per_tor + s`
//!   goes up to spine `s`;
//! * spine `s`: port `t` goes down to ToR `t`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ecmp::ecmp_select;
use super::packet::{FlowId, HostId};
use crate::error::ConfigError;
use crate::time::SimTime;

pub type NodeId = u32;

pub const GBPS: u64 = 1_000_000_000;

fn default_gbps() -> u64 {
    400
}

fn default_oversub() -> u32 {
    1
}

fn default_rtt_us() -> f64 {
    8.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub hosts: u32,
    pub tors: u32,
    pub spines: u32,
    #[serde(default = "default_gbps")]
    pub host_link_gbps: u64,
    /// Host-facing over spine-facing capacity per ToR: 1, 4 or 8.
    #[serde(default = "default_oversub")]
    pub oversub: u32,
    /// `(tor, spine)` pairs whose link is down in both directions.
    #[serde(default)]
    pub failed_links: Vec<(u32, u32)>,
    /// Fabric-wide base RTT; link latency is derived from it unless given.
    #[serde(default = "default_rtt_us")]
    pub net_base_rtt_us: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_latency_ns: Option<u64>,
}

impl TopologySpec {
    pub fn new(hosts: u32, tors: u32, spines: u32) -> Self {
        TopologySpec {
            hosts,
            tors,
            spines,
            host_link_gbps: default_gbps(),
            oversub: 1,
            failed_links: Vec::new(),
            net_base_rtt_us: default_rtt_us(),
            link_latency_ns: None,
        }
    }

    /// Takes `k` uplinks down on every ToR, staggered so that ToR `t` loses
    /// spines `t, t+1, .., t+k-1 (mod spines)`.
    pub fn fail_uplinks_per_tor(mut self, k: u32) -> Self {
        for t in 0..self.tors {
            for j in 0..k {
                self.failed_links.push((t, (t + j) % self.spines));
            }
        }
        self
    }

    pub fn net_base_rtt(&self) -> SimTime {
        SimTime::from_micros_f64(self.net_base_rtt_us)
    }

    pub fn host_bps(&self) -> u64 {
        self.host_link_gbps * GBPS
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Host(u32),
    Tor(u32),
    Spine(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PortSpec {
    pub peer_node: NodeId,
    pub peer_port: u16,
    pub rate_bps: u64,
    pub failed: bool,
}

/// A validated fat tree with routing tables.
#[derive(Clone, Debug)]
pub struct FatTree {
    pub spec: TopologySpec,
    pub hosts_per_tor: u32,
    pub host_bps: u64,
    pub uplink_bps: u64,
    pub link_latency: SimTime,
    pub net_base_rtt: SimTime,
    failed: Vec<bool>,
    /// `eligible[src_tor * tors + dst_tor]`: spines reachable from both.
    eligible: Vec<Vec<u16>>,
}

/// Bytes of a SACK/ACK/CNP/PFC frame on the wire.
pub const CONTROL_BYTES: u32 = 64;

pub fn build_fat_tree(spec: &TopologySpec, mtu: u32) -> Result<FatTree, ConfigError> {
    if spec.hosts == 0 || spec.tors == 0 || spec.spines == 0 {
        return Err(ConfigError::new("topology", "hosts, tors and spines must be positive"));
    }
    if !spec.hosts.is_multiple_of(spec.tors) {
        return Err(ConfigError::new(
            "topology.hosts",
            format!("{} hosts do not divide evenly over {} ToRs", spec.hosts, spec.tors),
        ));
    }
    if !matches!(spec.oversub, 1 | 4 | 8) {
        return Err(ConfigError::new(
            "topology.oversub",
            format!("{} is not one of 1, 4, 8", spec.oversub),
        ));
    }
    if spec.host_link_gbps == 0 {
        return Err(ConfigError::new("topology.host_link_gbps", "must be positive"));
    }
    if !(spec.net_base_rtt_us > 0.0) {
        return Err(ConfigError::new("topology.net_base_rtt_us", "must be positive"));
    }
    let hosts_per_tor = spec.hosts / spec.tors;
    let host_bps = spec.host_bps();
    let up_total = hosts_per_tor as u128 * host_bps as u128;
    let den = spec.spines as u128 * spec.oversub as u128;
    if !up_total.is_multiple_of(den) {
        return Err(ConfigError::new(
            "topology.spines",
            "uplink rate (hosts_per_tor * host rate / (spines * oversub)) is not a whole bit rate",
        ));
    }
    let uplink_bps = (up_total / den) as u64;

    let tors = spec.tors as usize;
    let spines = spec.spines as usize;
    let mut failed = vec![false; tors * spines];
    for &(t, s) in &spec.failed_links {
        if t >= spec.tors || s >= spec.spines {
            return Err(ConfigError::new(
                "topology.failed_links",
                format!("({t}, {s}) is outside the {}x{} ToR/spine grid", spec.tors, spec.spines),
            ));
        }
        failed[t as usize * spines + s as usize] = true;
    }
    let mut eligible = Vec::with_capacity(tors * tors);
    for a in 0..tors {
        if (0..spines).all(|s| failed[a * spines + s]) && tors > 1 {
            return Err(ConfigError::new(
                "topology.failed_links",
                format!("ToR {a} has no working uplink"),
            ));
        }
        for b in 0..tors {
            let common: Vec<u16> = (0..spines)
                .filter(|&s| !failed[a * spines + s] && !failed[b * spines + s])
                .map(|s| s as u16)
                .collect();
            if a != b && common.is_empty() {
                return Err(ConfigError::new(
                    "topology.failed_links",
                    format!("ToRs {a} and {b} share no working spine; fabric is disconnected"),
                ));
            }
            eligible.push(common);
        }
    }

    let net_base_rtt = spec.net_base_rtt();
    let link_latency = match spec.link_latency_ns {
        Some(ns) => SimTime::from_nanos(ns),
        None => {
            // Cross-ToR round trip: four hops each way, one MTU out, one
            // control frame back.
            let ser = |bytes: u32, bps: u64| SimTime::serialization(bytes as u64, bps);
            let serial = (ser(mtu, host_bps)
                + ser(mtu, uplink_bps)
                + ser(CONTROL_BYTES, host_bps)
                + ser(CONTROL_BYTES, uplink_bps))
            .mul(2);
            if serial >= net_base_rtt {
                return Err(ConfigError::new(
                    "topology.net_base_rtt_us",
                    "shorter than the serialization time of one round trip",
                ));
            }
            SimTime((net_base_rtt - serial).as_ps() / 8)
        }
    };

    Ok(FatTree {
        spec: spec.clone(),
        hosts_per_tor,
        host_bps,
        uplink_bps,
        link_latency,
        net_base_rtt,
        failed,
        eligible,
    })
}

impl FatTree {
    pub fn hosts(&self) -> u32 {
        self.spec.hosts
    }

    pub fn tors(&self) -> u32 {
        self.spec.tors
    }

    pub fn spines(&self) -> u32 {
        self.spec.spines
    }

    pub fn node_count(&self) -> u32 {
        self.spec.hosts + self.spec.tors + self.spec.spines
    }

    pub fn tor_node(&self, tor: u32) -> NodeId {
        self.spec.hosts + tor
    }

    pub fn spine_node(&self, spine: u32) -> NodeId {
        self.spec.hosts + self.spec.tors + spine
    }

    pub fn tor_of(&self, host: HostId) -> u32 {
        host / self.hosts_per_tor
    }

    pub fn kind(&self, node: NodeId) -> NodeKind {
        let h = self.spec.hosts;
        let t = self.spec.tors;
        if node < h {
            NodeKind::Host(node)
        } else if node < h + t {
            NodeKind::Tor(node - h)
        } else {
            NodeKind::Spine(node - h - t)
        }
    }

    pub fn link_failed(&self, tor: u32, spine: u32) -> bool {
        self.failed[(tor * self.spec.spines + spine) as usize]
    }

    /// Bandwidth-delay product of a host link, in bytes.
    pub fn bdp_bytes(&self) -> u64 {
        bdp_bytes(self.host_bps, self.net_base_rtt)
    }

    pub fn ports(&self, node: NodeId) -> Vec<PortSpec> {
        match self.kind(node) {
            NodeKind::Host(h) => vec![PortSpec {
                peer_node: self.tor_node(self.tor_of(h)),
                peer_port: (h % self.hosts_per_tor) as u16,
                rate_bps: self.host_bps,
                failed: false,
            }],
            NodeKind::Tor(t) => {
                let mut v: Vec<PortSpec> = (0..self.hosts_per_tor)
                    .map(|i| PortSpec {
                        peer_node: t * self.hosts_per_tor + i,
                        peer_port: 0,
                        rate_bps: self.host_bps,
                        failed: false,
                    })
                    .collect();
                v.extend((0..self.spec.spines).map(|s| PortSpec {
                    peer_node: self.spine_node(s),
                    peer_port: t as u16,
                    rate_bps: self.uplink_bps,
                    failed: self.link_failed(t, s),
                }));
                v
            }
            NodeKind::Spine(s) => (0..self.spec.tors)
                .map(|t| PortSpec {
                    peer_node: self.tor_node(t),
                    peer_port: (self.hosts_per_tor + s) as u16,
                    rate_bps: self.uplink_bps,
                    failed: self.link_failed(t, s),
                })
                .collect(),
        }
    }

    /// Egress port at `node` for a packet of `flow` to `dst` with `entropy`.
    pub fn route(&self, node: NodeId, flow: FlowId, entropy: u16, dst: HostId) -> u16 {
        match self.kind(node) {
            NodeKind::Host(_) => 0,
            NodeKind::Tor(t) => {
                let dst_tor = self.tor_of(dst);
                if dst_tor == t {
                    (dst % self.hosts_per_tor) as u16
                } else {
                    let cands = &self.eligible[(t * self.spec.tors + dst_tor) as usize];
                    let pick = ecmp_select(flow, entropy, node, cands.len());
                    (self.hosts_per_tor + cands[pick] as u32) as u16
                }
            }
            NodeKind::Spine(_) => self.tor_of(dst) as u16,
        }
    }

    /// Hop-by-hop `(node, egress port)` list from `src` to `dst`.
    pub fn path(&self, flow: FlowId, entropy: u16, src: HostId, dst: HostId) -> Vec<(NodeId, u16)> {
        let mut hops = Vec::new();
        let mut node = src;
        loop {
            let port = self.route(node, flow, entropy, dst);
            hops.push((node, port));
            let next = self.ports(node)[port as usize].peer_node;
            if next == dst {
                return hops;
            }
            node = next;
        }
    }

    pub fn host_links(&self) -> u32 {
        self.spec.hosts
    }

    /// Working directed ToR<->spine links.
    pub fn inter_switch_directed_links(&self) -> u32 {
        2 * self.failed.iter().filter(|f| !**f).count() as u32
    }
}

pub fn bdp_bytes(bps: u64, rtt: SimTime) -> u64 {
    (bps as u128 * rtt.as_ps() as u128 / 8 / 1_000_000_000_000u128) as u64
}

impl NodeKind {
    pub fn tor_index(self) -> u32 {
        match self {
            NodeKind::Tor(t) => t,
            _ => panic!("not a ToR: {self:?}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_by_construction() {
        let ft = build_fat_tree(&TopologySpec::new(32, 2, 2), 4096).unwrap();
        assert_eq!(ft.host_links(), 32);
        assert_eq!(ft.inter_switch_directed_links(), 8);
        assert_eq!(ft.ports(ft.tor_node(0)).len(), 16 + 2);
        assert_eq!(ft.ports(ft.spine_node(1)).len(), 2);
    }

    #[test]
    fn oversubscription_scales_uplinks() {
        let mut spec = TopologySpec::new(128, 16, 8);
        spec.oversub = 4;
        let ft = build_fat_tree(&spec, 4096).unwrap();
        let host_side = ft.hosts_per_tor as u64 * ft.host_bps;
        let up_side = ft.spines() as u64 * ft.uplink_bps;
        assert_eq!(up_side * 4, host_side);
        assert_eq!(ft.uplink_bps, 100 * GBPS);
    }

    #[test]
    fn bad_oversub_rejected() {
        let mut spec = TopologySpec::new(16, 2, 2);
        spec.oversub = 3;
        let err = build_fat_tree(&spec, 4096).unwrap_err();
        assert_eq!(err.key, "topology.oversub");
    }

    #[test]
    fn all_uplinks_of_a_tor_failed_is_an_error() {
        let mut spec = TopologySpec::new(16, 2, 2);
        spec.failed_links = vec![(0, 0), (0, 1)];
        assert!(build_fat_tree(&spec, 4096).is_err());
    }

    #[test]
    fn disjoint_spines_disconnect() {
        let mut spec = TopologySpec::new(16, 2, 2);
        spec.failed_links = vec![(0, 0), (1, 1)];
        assert!(build_fat_tree(&spec, 4096).is_err());
    }

    #[test]
    fn base_rtt_is_met_by_link_latency() {
        let ft = build_fat_tree(&TopologySpec::new(128, 16, 8), 4096).unwrap();
        let ser = |b: u64, r: u64| SimTime::serialization(b, r);
        let rtt = ft.link_latency.mul(8)
            + (ser(4096, ft.host_bps) + ser(4096, ft.uplink_bps) + ser(64, ft.host_bps) + ser(64, ft.uplink_bps))
                .mul(2);
        assert!(ft.net_base_rtt.as_ps() - rtt.as_ps() < 8);
        assert_eq!(ft.bdp_bytes(), 400_000);
    }

    #[test]
    fn paths_avoid_failed_links_and_are_stable() {
        let spec = TopologySpec::new(64, 8, 8).fail_uplinks_per_tor(1);
        let ft = build_fat_tree(&spec, 4096).unwrap();
        for e in 0..64u16 {
            let p = ft.path(5, e, 0, 63);
            assert_eq!(p, ft.path(5, e, 0, 63));
            assert_eq!(p.len(), 4);
            let (tor, up) = p[1];
            let spine = up as u32 - ft.hosts_per_tor;
            assert!(!ft.link_failed(ft.kind(tor).tor_index(), spine));
            assert!(!ft.link_failed(ft.tor_of(63), spine));
        }
        // Same-ToR traffic turns around at the ToR.
        assert_eq!(ft.path(1, 0, 0, 1).len(), 2);
    }
}
