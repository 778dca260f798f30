use serde::{Deserialize, Serialize};

use crate::net::topology::bdp_bytes;
use crate::time::SimTime;

/// Reference point at which the bandwidth and delay scaling factors are 1.
const REF_BPS: u64 = 100_000_000_000;
const REF_RTT: SimTime = SimTime::from_micros(12);

fn d_max_paths() -> u16 {
    256
}
fn d_min_ooo() -> u32 {
    5
}
fn d_probe_mult() -> u32 {
    3
}
fn d_rto_us() -> f64 {
    500.0
}
fn d_coalesce() -> u32 {
    4
}
fn d_window() -> u32 {
    1024
}
fn d_ewma() -> f64 {
    0.125
}
fn d_gamma() -> f64 {
    0.8
}
fn d_beta() -> f64 {
    5.0
}
fn d_eta() -> f64 {
    0.15
}
fn d_alpha() -> f64 {
    4.0
}
fn d_one() -> f64 {
    1.0
}

/// User-facing STrack knobs. Everything else in [`CcParams`] is derived.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrackConfig {
    #[serde(default = "d_max_paths")]
    pub max_paths: u16,
    #[serde(default = "d_min_ooo")]
    pub min_ooo_threshold: u32,
    /// Probe after this many fabric base RTTs without a SACK.
    #[serde(default = "d_probe_mult")]
    pub probe_multiplier: u32,
    #[serde(default = "d_rto_us")]
    pub rto_us: f64,
    /// Receiver SACKs after this many MTUs of new data.
    #[serde(default = "d_coalesce")]
    pub coalesce_mtus: u32,
    /// Receiver arrival bitmap length in packets.
    #[serde(default = "d_window")]
    pub bitmap_window: u32,
    /// Defaults to the fabric base RTT.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_qdelay_us: Option<f64>,
    #[serde(default = "d_ewma")]
    pub ewma: f64,
    #[serde(default = "d_gamma")]
    pub gamma: f64,
    /// Additive increase, in MTUs before bandwidth scaling.
    #[serde(default = "d_beta")]
    pub beta_mtus: f64,
    /// Fairness increment, in MTUs before bandwidth scaling.
    #[serde(default = "d_eta")]
    pub eta_mtus: f64,
    #[serde(default = "d_alpha")]
    pub alpha_gain: f64,
    /// Window cap in host-link BDPs.
    #[serde(default = "d_one")]
    pub max_cwnd_bdp: f64,
    /// Also clear the whole ECN bitmap every this many base RTTs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bitmap_reset_rtts: Option<u32>,
}

impl Default for StrackConfig {
    fn default() -> Self {
        StrackConfig {
            max_paths: d_max_paths(),
            min_ooo_threshold: d_min_ooo(),
            probe_multiplier: d_probe_mult(),
            rto_us: d_rto_us(),
            coalesce_mtus: d_coalesce(),
            bitmap_window: d_window(),
            target_qdelay_us: None,
            ewma: d_ewma(),
            gamma: d_gamma(),
            beta_mtus: d_beta(),
            eta_mtus: d_eta(),
            alpha_gain: d_alpha(),
            max_cwnd_bdp: d_one(),
            bitmap_reset_rtts: None,
        }
    }
}

/// Resolved congestion-control constants for one network configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct CcParams {
    pub net_base_rtt: SimTime,
    pub target_qdelay: SimTime,
    pub target_qhigh: SimTime,
    pub ewma: f64,
    pub bdp_sf: f64,
    pub delay_sf: f64,
    /// Bytes per RTT of additive increase.
    pub beta: f64,
    /// Bytes added once per base RTT for fairness.
    pub eta: f64,
    /// Bytes per picosecond of delay headroom, per RTT.
    pub alpha: f64,
    pub gamma: f64,
    pub mtu: u32,
    pub max_cwnd: f64,
    pub max_paths: u16,
    pub min_ooo_threshold: u32,
    pub probe_multiplier: u32,
    pub rto: SimTime,
    pub coalesce_bytes: u64,
    pub bitmap_window: u32,
    pub bitmap_reset: Option<SimTime>,
    /// Ignore ECN feedback when picking entropies (oblivious spraying).
    pub oblivious: bool,
}

impl CcParams {
    pub fn derive(link_bps: u64, net_base_rtt: SimTime, mtu: u32, cfg: &StrackConfig) -> Self {
        let bdp = bdp_bytes(link_bps, net_base_rtt) as f64;
        let ref_bdp = bdp_bytes(REF_BPS, REF_RTT) as f64;
        let bdp_sf = bdp / ref_bdp;
        let delay_sf = net_base_rtt.as_ps() as f64 / REF_RTT.as_ps() as f64;
        let target_qdelay = match cfg.target_qdelay_us {
            Some(us) => SimTime::from_micros_f64(us),
            None => net_base_rtt,
        };
        let mtu_f = mtu as f64;
        CcParams {
            net_base_rtt,
            target_qdelay,
            target_qhigh: target_qdelay.mul(3),
            ewma: cfg.ewma,
            bdp_sf,
            delay_sf,
            beta: cfg.beta_mtus * mtu_f * bdp_sf,
            eta: cfg.eta_mtus * mtu_f * bdp_sf,
            alpha: cfg.alpha_gain * bdp_sf * delay_sf * mtu_f / net_base_rtt.as_ps() as f64,
            gamma: cfg.gamma,
            mtu,
            max_cwnd: libm::floor(bdp * cfg.max_cwnd_bdp),
            max_paths: cfg.max_paths,
            min_ooo_threshold: cfg.min_ooo_threshold,
            probe_multiplier: cfg.probe_multiplier,
            rto: SimTime::from_micros_f64(cfg.rto_us),
            coalesce_bytes: cfg.coalesce_mtus as u64 * mtu as u64,
            bitmap_window: cfg.bitmap_window,
            bitmap_reset: cfg.bitmap_reset_rtts.map(|k| net_base_rtt.mul(k as u64)),
            oblivious: false,
        }
    }

    /// 400 Gbps, 8 us base RTT, 4 KB MTU.
    pub fn default_400g() -> Self {
        Self::derive(400_000_000_000, SimTime::from_micros(8), 4096, &StrackConfig::default())
    }

    pub fn probe_interval(&self) -> SimTime {
        self.net_base_rtt.mul(self.probe_multiplier as u64)
    }
}
