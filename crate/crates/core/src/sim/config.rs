//! Run configuration. Every section rejects unknown keys; defaults are
//! resolved by serde so the effective config can be written back out.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::net::topology::{build_fat_tree, FatTree, TopologySpec};
use crate::rng::{stream, RngStream};
use crate::rocev2::RoceConfig;
use crate::strack::{CcParams, StrackConfig};
use crate::time::SimTime;
use crate::workload::{
    gen_collective, gen_incast, gen_permutation, incast_senders, place_jobs, ByteSize, CollectiveAlgo, CollectiveSpec,
    MessageRecord, PlacementMode, Trace,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    Strack,
    /// STrack congestion control with round-robin spraying that ignores ECN.
    StrackObliviousSpray,
    Rocev2,
}

impl TransportKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TransportKind::Strack => "strack",
            TransportKind::StrackObliviousSpray => "strack_oblivious_spray",
            TransportKind::Rocev2 => "rocev2",
        }
    }

    pub fn is_strack(self) -> bool {
        self != TransportKind::Rocev2
    }
}

fn d_seed() -> u64 {
    1
}
fn d_mtu() -> u32 {
    4096
}
fn d_limit_ms() -> f64 {
    1000.0
}
fn d_drop_bdp() -> f64 {
    5.0
}
fn d_pfc_alpha() -> f64 {
    0.25
}
fn d_hyst() -> u32 {
    2
}
fn d_buf_mb() -> f64 {
    256.0
}
fn d_thresh_us() -> f64 {
    8.0
}
fn d_window_us() -> f64 {
    100.0
}
fn d_true() -> bool {
    true
}
fn d_jobs() -> u32 {
    1
}
fn d_dst() -> u32 {
    0
}

/// Egress queue policy. Thresholds are in BDPs of the egress link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchConfig {
    /// Defaults: 0.25 for STrack, 1.0 (step marking) for RoCEv2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ecn_kmin_bdp: Option<f64>,
    /// Defaults: 0.75 for STrack, 1.0 for RoCEv2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ecn_kmax_bdp: Option<f64>,
    /// Lossy tail-drop limit.
    #[serde(default = "d_drop_bdp")]
    pub drop_bdp: f64,
    /// PFC instead of tail drop. Defaults to on for RoCEv2 only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lossless: Option<bool>,
    #[serde(default = "d_pfc_alpha")]
    pub pfc_alpha: f64,
    #[serde(default = "d_hyst")]
    pub pfc_hysteresis_mtus: u32,
    /// Shared buffer per 51.2 Tbps of switch capacity, in MB.
    #[serde(default = "d_buf_mb")]
    pub buffer_mb_per_51_2_tbps: f64,
}

impl Default for SwitchConfig {
    fn default() -> Self {
        SwitchConfig {
            ecn_kmin_bdp: None,
            ecn_kmax_bdp: None,
            drop_bdp: d_drop_bdp(),
            lossless: None,
            pfc_alpha: d_pfc_alpha(),
            pfc_hysteresis_mtus: d_hyst(),
            buffer_mb_per_51_2_tbps: d_buf_mb(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelemetryConfig {
    /// Queue samples are kept only above this delay unless `full_logging`.
    #[serde(default = "d_thresh_us")]
    pub qdelay_threshold_us: f64,
    #[serde(default)]
    pub full_logging: bool,
    /// Minimum spacing of samples from one queue; 0 keeps every enqueue.
    #[serde(default)]
    pub qdelay_min_interval_us: f64,
    #[serde(default = "d_window_us")]
    pub tput_window_us: f64,
    #[serde(default = "d_true")]
    pub log_events: bool,
}

impl Default for TelemetryConfig {
    fn default() -> Self {
        TelemetryConfig {
            qdelay_threshold_us: d_thresh_us(),
            full_logging: false,
            qdelay_min_interval_us: 0.0,
            tput_window_us: d_window_us(),
            log_events: true,
        }
    }
}

/// Random DATA loss on one ToR-spine link, both directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkLoss {
    pub tor: u32,
    pub spine: u32,
    pub rate: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Impairments {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub link_loss: Vec<LinkLoss>,
    /// Probability that a SACK/ACK is lost on arrival at the sender.
    #[serde(default)]
    pub sack_loss_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WorkloadSpec {
    Permutation {
        size: ByteSize,
    },
    Incast {
        fanin: u32,
        #[serde(default = "d_dst")]
        dst: u32,
        size: ByteSize,
        /// Prefer senders under other ToRs.
        #[serde(default = "d_true")]
        spread: bool,
    },
    Collective {
        algorithm: CollectiveAlgo,
        ranks: u32,
        collective_bytes: ByteSize,
        #[serde(default = "d_chunk")]
        chunk_bytes: ByteSize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        parallel_degree: Option<u32>,
        #[serde(default = "d_jobs")]
        jobs: u32,
        #[serde(default)]
        placement: PlacementMode,
    },
    /// Inline message records.
    Trace {
        records: Vec<MessageRecord>,
    },
    /// Records in a trace file; the loader replaces this with `Trace`.
    TraceFile {
        path: String,
    },
}

fn d_chunk() -> ByteSize {
    ByteSize(128_000)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "d_seed")]
    pub seed: u64,
    pub transport: TransportKind,
    pub topology: TopologySpec,
    pub workload: WorkloadSpec,
    #[serde(default = "d_mtu")]
    pub mtu: u32,
    #[serde(default)]
    pub strack: StrackConfig,
    #[serde(default)]
    pub roce: RoceConfig,
    #[serde(default)]
    pub switch: SwitchConfig,
    #[serde(default)]
    pub telemetry: TelemetryConfig,
    #[serde(default)]
    pub impairments: Impairments,
    /// Simulated time after which the run is abandoned.
    #[serde(default = "d_limit_ms")]
    pub time_limit_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(key, format!("must be positive, got {v}")))
    }
}

fn probability(key: &str, v: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(ConfigError::new(key, format!("must be in [0, 1], got {v}")))
    }
}

impl SimConfig {
    pub fn new(transport: TransportKind, topology: TopologySpec, workload: WorkloadSpec) -> Self {
        SimConfig {
            seed: d_seed(),
            transport,
            topology,
            workload,
            mtu: d_mtu(),
            strack: StrackConfig::default(),
            roce: RoceConfig::default(),
            switch: SwitchConfig::default(),
            telemetry: TelemetryConfig::default(),
            impairments: Impairments::default(),
            time_limit_ms: d_limit_ms(),
            output_dir: None,
        }
    }

    pub fn lossless(&self) -> bool {
        self.switch.lossless.unwrap_or(self.transport == TransportKind::Rocev2)
    }

    /// `(kmin, kmax)` in BDPs.
    pub fn ecn_bdp(&self) -> (f64, f64) {
        let (dmin, dmax) = match self.transport {
            TransportKind::Rocev2 => (1.0, 1.0),
            _ => (0.25, 0.75),
        };
        (
            self.switch.ecn_kmin_bdp.unwrap_or(dmin),
            self.switch.ecn_kmax_bdp.unwrap_or(dmax),
        )
    }

    pub fn time_limit(&self) -> SimTime {
        SimTime::from_micros_f64(self.time_limit_ms * 1000.0)
    }

    pub fn cc_params(&self, fat: &FatTree) -> CcParams {
        let mut p = CcParams::derive(fat.host_bps, fat.net_base_rtt, self.mtu, &self.strack);
        p.oblivious = self.transport == TransportKind::StrackObliviousSpray;
        p
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<FatTree, ConfigError> {
        if self.mtu < 256 {
            return Err(ConfigError::new("mtu", "must be at least 256 bytes"));
        }
        let fat = build_fat_tree(&self.topology, self.mtu)?;
        positive("time_limit_ms", self.time_limit_ms)?;

        let s = &self.strack;
        if s.max_paths == 0 {
            return Err(ConfigError::new("strack.max_paths", "must be positive"));
        }
        if s.bitmap_window == 0 || !s.bitmap_window.is_multiple_of(64) {
            return Err(ConfigError::new(
                "strack.bitmap_window",
                "must be a positive multiple of 64",
            ));
        }
        if s.coalesce_mtus == 0 {
            return Err(ConfigError::new("strack.coalesce_mtus", "must be positive"));
        }
        if s.probe_multiplier == 0 {
            return Err(ConfigError::new("strack.probe_multiplier", "must be positive"));
        }
        positive("strack.rto_us", s.rto_us)?;
        positive("strack.beta_mtus", s.beta_mtus)?;
        positive("strack.eta_mtus", s.eta_mtus)?;
        positive("strack.alpha_gain", s.alpha_gain)?;
        positive("strack.max_cwnd_bdp", s.max_cwnd_bdp)?;
        if let Some(t) = s.target_qdelay_us {
            positive("strack.target_qdelay_us", t)?;
        }
        if !(s.ewma > 0.0 && s.ewma <= 1.0) {
            return Err(ConfigError::new("strack.ewma", "must be in (0, 1]"));
        }
        if !(s.gamma > 0.0 && s.gamma <= 1.0) {
            return Err(ConfigError::new("strack.gamma", "must be in (0, 1]"));
        }
        if s.bitmap_reset_rtts == Some(0) {
            return Err(ConfigError::new("strack.bitmap_reset_rtts", "must be positive"));
        }
        if self.cc_params(&fat).max_cwnd < self.mtu as f64 {
            return Err(ConfigError::new("strack.max_cwnd_bdp", "window cap is below one MTU"));
        }

        let r = &self.roce;
        if !matches!(r.qps_per_conn, 1 | 4) {
            return Err(ConfigError::new(
                "roce.qps_per_conn",
                format!("{} is not one of 1, 4", r.qps_per_conn),
            ));
        }
        positive("roce.rto_us", r.rto_us)?;
        if r.ack_coalesce_mtus == 0 {
            return Err(ConfigError::new("roce.ack_coalesce_mtus", "must be positive"));
        }
        let d = &r.dcqcn;
        if !(d.g > 0.0 && d.g <= 1.0) {
            return Err(ConfigError::new("roce.dcqcn.g", "must be in (0, 1]"));
        }
        positive("roce.dcqcn.cnp_interval_us", d.cnp_interval_us)?;
        positive("roce.dcqcn.timer_us", d.timer_us)?;
        if d.byte_counter == 0 {
            return Err(ConfigError::new("roce.dcqcn.byte_counter", "must be positive"));
        }
        positive("roce.dcqcn.rai_fraction", d.rai_fraction)?;
        positive("roce.dcqcn.hai_multiple", d.hai_multiple)?;
        if !(d.min_rate_fraction > 0.0 && d.min_rate_fraction <= 1.0) {
            return Err(ConfigError::new("roce.dcqcn.min_rate_fraction", "must be in (0, 1]"));
        }

        let sw = &self.switch;
        let (kmin, kmax) = self.ecn_bdp();
        if !(kmin >= 0.0 && kmax >= kmin) {
            return Err(ConfigError::new("switch.ecn_kmin_bdp", "need 0 <= kmin <= kmax"));
        }
        positive("switch.drop_bdp", sw.drop_bdp)?;
        probability("switch.pfc_alpha", sw.pfc_alpha)?;
        positive("switch.pfc_alpha", sw.pfc_alpha)?;
        positive("switch.buffer_mb_per_51_2_tbps", sw.buffer_mb_per_51_2_tbps)?;

        let t = &self.telemetry;
        if !(t.qdelay_threshold_us >= 0.0) {
            return Err(ConfigError::new(
                "telemetry.qdelay_threshold_us",
                "must be non-negative",
            ));
        }
        if !(t.qdelay_min_interval_us >= 0.0) {
            return Err(ConfigError::new(
                "telemetry.qdelay_min_interval_us",
                "must be non-negative",
            ));
        }
        positive("telemetry.tput_window_us", t.tput_window_us)?;

        for (i, l) in self.impairments.link_loss.iter().enumerate() {
            if l.tor >= fat.tors() || l.spine >= fat.spines() {
                return Err(ConfigError::new(
                    format!("impairments.link_loss[{i}]"),
                    format!("({}, {}) is outside the ToR/spine grid", l.tor, l.spine),
                ));
            }
            probability(&format!("impairments.link_loss[{i}].rate"), l.rate)?;
        }
        probability("impairments.sack_loss_rate", self.impairments.sack_loss_rate)?;

        self.build_trace(&fat)?.validate(fat.hosts())?;
        Ok(fat)
    }

    /// Expands the workload section into message records.
    pub fn build_trace(&self, fat: &FatTree) -> Result<Trace, ConfigError> {
        let hosts = fat.hosts();
        match &self.workload {
            WorkloadSpec::Permutation { size } => {
                if hosts < 2 {
                    return Err(ConfigError::new("workload", "permutation needs at least two hosts"));
                }
                if size.0 == 0 {
                    return Err(ConfigError::new("workload.size", "must be positive"));
                }
                let mut rng = RngStream::new(self.seed, stream::WORKLOAD);
                Ok(gen_permutation(hosts, size.0, &mut rng))
            }
            WorkloadSpec::Incast {
                fanin,
                dst,
                size,
                spread,
            } => {
                if *fanin == 0 {
                    return Err(ConfigError::new("workload.fanin", "must be positive"));
                }
                if size.0 == 0 {
                    return Err(ConfigError::new("workload.size", "must be positive"));
                }
                let senders = incast_senders(*fanin, *dst, hosts, fat.hosts_per_tor, *spread).ok_or_else(|| {
                    ConfigError::new(
                        "workload.fanin",
                        format!("{fanin} senders to host {dst} need more than {hosts} hosts"),
                    )
                })?;
                Ok(gen_incast(&senders, *dst, size.0))
            }
            WorkloadSpec::Collective {
                algorithm,
                ranks,
                collective_bytes,
                chunk_bytes,
                parallel_degree,
                jobs,
                placement,
            } => {
                let spec = CollectiveSpec {
                    algorithm: *algorithm,
                    ranks: *ranks,
                    collective_bytes: *collective_bytes,
                    chunk_bytes: *chunk_bytes,
                    parallel_degree: *parallel_degree,
                };
                spec.validate()?;
                if *jobs == 0 {
                    return Err(ConfigError::new("workload.jobs", "must be positive"));
                }
                let mut rng = RngStream::new(self.seed, stream::PLACEMENT);
                let placed = place_jobs(*jobs, *ranks, hosts, *placement, &mut rng)?;
                let mut records = Vec::new();
                for (j, hs) in placed.iter().enumerate() {
                    let first = records.len() as u32;
                    records.extend(gen_collective(&spec, hs, j as u32, first)?);
                }
                Ok(Trace::new(records))
            }
            WorkloadSpec::Trace { records } => Ok(Trace::new(records.clone())),
            WorkloadSpec::TraceFile { path } => Err(ConfigError::new(
                "workload.path",
                format!("trace file {path} was not loaded"),
            )),
        }
    }
}
