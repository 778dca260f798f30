//! Measurement records collected during a run and the statistics computed
//! over them.

pub mod stats;

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::net::packet::{FlowId, HostId, Psn};
use crate::net::topology::NodeId;
use crate::time::SimTime;
use crate::workload::MsgId;

pub use stats::{jain_index, nearest_rank, summarize, Summary};

/// Version stamped into every CSV row.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub flow_id: FlowId,
    pub msg_id: MsgId,
    pub job_id: u32,
    pub src: HostId,
    pub dst: HostId,
    pub bytes: u64,
    pub release_time: SimTime,
    pub first_send_time: Option<SimTime>,
    /// Last byte acknowledged at the sender.
    pub completion_time: Option<SimTime>,
    /// Last byte delivered at the receiver.
    pub delivered_time: Option<SimTime>,
    pub retransmitted_bytes: u64,
    pub drops_experienced: u64,
}

impl FlowRecord {
    pub fn fct(&self) -> Option<SimTime> {
        self.completion_time.map(|c| c - self.release_time)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: u32,
    pub messages: u32,
    pub first_send: SimTime,
    pub last_finish: SimTime,
}

impl JobRecord {
    pub fn cct(&self) -> SimTime {
        self.last_finish - self.first_send
    }
}

/// Collapses per-message records into per-job completion records.
pub fn jobs_from_flows(flows: &[FlowRecord]) -> Vec<JobRecord> {
    let mut jobs: BTreeMap<u32, JobRecord> = BTreeMap::new();
    for f in flows {
        let (Some(s), Some(c)) = (f.first_send_time, f.completion_time) else {
            continue;
        };
        let j = jobs.entry(f.job_id).or_insert(JobRecord {
            job_id: f.job_id,
            messages: 0,
            first_send: s,
            last_finish: c,
        });
        j.messages += 1;
        j.first_send = j.first_send.min(s);
        j.last_finish = j.last_finish.max(c);
    }
    jobs.into_values().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueueSample {
    pub time: SimTime,
    pub switch_id: NodeId,
    pub queue_id: u16,
    /// Occupancy divided by the egress rate, at enqueue.
    pub delay: SimTime,
    pub occupancy_bytes: u64,
    /// Bytes arriving at this queue since its previous sample, as a rate.
    pub arrival_gbps: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Drop,
    PfcPause,
    PfcResume,
    /// Injected impairment loss.
    LinkLoss,
    SackLoss,
    Recovery,
    Probe,
    Timeout,
    Nack,
    Cnp,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Drop => "DROP",
            EventKind::PfcPause => "PFC_PAUSE",
            EventKind::PfcResume => "PFC_RESUME",
            EventKind::LinkLoss => "LINK_LOSS",
            EventKind::SackLoss => "SACK_LOSS",
            EventKind::Recovery => "RECOVERY",
            EventKind::Probe => "PROBE",
            EventKind::Timeout => "TIMEOUT",
            EventKind::Nack => "NACK",
            EventKind::Cnp => "CNP",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: SimTime,
    pub kind: EventKind,
    pub node: NodeId,
    pub port: u16,
    pub flow: Option<FlowId>,
    pub psn: Option<Psn>,
}

/// Delivered bytes per flow in fixed windows.
#[derive(Clone, Debug)]
pub struct ThroughputBins {
    window: SimTime,
    bins: BTreeMap<FlowId, Vec<u64>>,
}

impl ThroughputBins {
    pub fn new(window: SimTime) -> Self {
        assert!(window > SimTime::ZERO);
        ThroughputBins {
            window,
            bins: BTreeMap::new(),
        }
    }

    pub fn window(&self) -> SimTime {
        self.window
    }

    pub fn record(&mut self, flow: FlowId, at: SimTime, bytes: u64) {
        let i = (at.as_ps() / self.window.as_ps()) as usize;
        let v = self.bins.entry(flow).or_default();
        if v.len() <= i {
            v.resize(i + 1, 0);
        }
        v[i] += bytes;
    }

    /// Registers a flow so it reports zeros even if it never delivers.
    pub fn touch(&mut self, flow: FlowId) {
        self.bins.entry(flow).or_default();
    }

    pub fn bytes(&self, flow: FlowId) -> &[u64] {
        self.bins.get(&flow).map_or(&[], |v| v.as_slice())
    }

    pub fn gbps(&self, bytes: u64) -> f64 {
        bytes as f64 * 8.0 / self.window.as_secs_f64() / 1e9
    }

    /// `(flow, window index, bytes)` over a dense grid of `n_windows`.
    pub fn rows(&self, n_windows: usize) -> Vec<(FlowId, usize, u64)> {
        let mut out = Vec::new();
        for (&f, v) in &self.bins {
            for i in 0..n_windows {
                out.push((f, i, v.get(i).copied().unwrap_or(0)));
            }
        }
        out
    }

    pub fn flows(&self) -> impl Iterator<Item = FlowId> + '_ {
        self.bins.keys().copied()
    }

    /// Bytes of each listed flow delivered in `[from, to)`, to window
    /// resolution.
    pub fn totals_between(&self, flows: &[FlowId], from: SimTime, to: SimTime) -> Vec<u64> {
        let a = (from.as_ps() / self.window.as_ps()) as usize;
        let b = (to.as_ps() / self.window.as_ps()) as usize;
        flows
            .iter()
            .map(|f| {
                let v = self.bytes(*f);
                (a..b).map(|i| v.get(i).copied().unwrap_or(0)).sum()
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug)]
struct QueueTrack {
    last_sample: Option<SimTime>,
    since: SimTime,
    bytes: u64,
}

/// Enqueue-time queue delay sampling with a log threshold and an optional
/// per-queue minimum spacing.
#[derive(Clone, Debug)]
pub struct QueueSampler {
    pub threshold: SimTime,
    pub full_logging: bool,
    pub min_interval: SimTime,
    track: BTreeMap<(NodeId, u16), QueueTrack>,
    pub samples: Vec<QueueSample>,
}

impl QueueSampler {
    pub fn new(threshold: SimTime, full_logging: bool, min_interval: SimTime) -> Self {
        QueueSampler {
            threshold,
            full_logging,
            min_interval,
            track: BTreeMap::new(),
            samples: Vec::new(),
        }
    }

    /// Called for every enqueue with the occupancy in front of the packet.
    pub fn on_enqueue(&mut self, now: SimTime, node: NodeId, port: u16, occupancy: u64, rate_bps: u64, pkt_bytes: u32) {
        let delay = SimTime::serialization(occupancy, rate_bps);
        let t = self.track.entry((node, port)).or_insert(QueueTrack {
            last_sample: None,
            since: now,
            bytes: 0,
        });
        t.bytes += pkt_bytes as u64;
        if !(self.full_logging || delay > self.threshold) {
            return;
        }
        if t.last_sample.is_some_and(|l| now - l < self.min_interval) {
            return;
        }
        let elapsed = now - t.since;
        let arrival_gbps = if elapsed > SimTime::ZERO {
            t.bytes as f64 * 8.0 / elapsed.as_secs_f64() / 1e9
        } else {
            0.0
        };
        *t = QueueTrack {
            last_sample: Some(now),
            since: now,
            bytes: 0,
        };
        self.samples.push(QueueSample {
            time: now,
            switch_id: node,
            queue_id: port,
            delay,
            occupancy_bytes: occupancy,
            arrival_gbps,
        });
    }
}

/// Byte ledger for the conservation check.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conservation {
    pub injected: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_network: u64,
}

impl Conservation {
    pub fn balances(&self) -> bool {
        self.injected == self.delivered + self.dropped + self.in_network
    }
}

/// Queue samples of one egress, for plotting and checks.
pub fn samples_for(samples: &[QueueSample], node: NodeId, port: u16) -> Vec<&QueueSample> {
    samples
        .iter()
        .filter(|s| s.switch_id == node && s.queue_id == port)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn us(x: u64) -> SimTime {
        SimTime::from_micros(x)
    }

    #[test]
    fn idle_flow_reports_zeros() {
        let mut t = ThroughputBins::new(us(100));
        t.touch(3);
        assert_eq!(t.rows(2), [(3, 0, 0), (3, 1, 0)]);
    }

    #[test]
    fn line_rate_window() {
        let mut t = ThroughputBins::new(us(100));
        // 400 Gbps for 100 us = 5 MB.
        t.record(0, us(50), 5_000_000);
        assert!((t.gbps(t.bytes(0)[0]) - 400.0).abs() < 1e-9);
    }

    #[test]
    fn fair_share_window() {
        let mut t = ThroughputBins::new(us(100));
        for f in 0..32 {
            t.record(f, us(10), 5_000_000 / 32);
        }
        for f in 0..32 {
            assert!((t.gbps(t.bytes(f)[0]) - 12.5).abs() < 1e-9);
        }
    }

    #[test]
    fn thresholded_sampler_skips_shallow_queues() {
        let mut s = QueueSampler::new(us(8), false, SimTime::ZERO);
        let rate = 400_000_000_000;
        // 400 KB is exactly 8 us at 400 Gbps: not above the threshold.
        s.on_enqueue(us(1), 5, 0, 400_000, rate, 4096);
        assert!(s.samples.is_empty());
        s.on_enqueue(us(2), 5, 0, 800_000, rate, 4096);
        assert_eq!(s.samples.len(), 1);
        assert_eq!(s.samples[0].delay, us(16));
        let mut full = QueueSampler::new(us(8), true, SimTime::ZERO);
        full.on_enqueue(us(1), 5, 0, 0, rate, 4096);
        assert_eq!(full.samples.len(), 1);
    }

    #[test]
    fn job_cct_spans_first_send_to_last_finish() {
        let f = |job, s, c| FlowRecord {
            flow_id: 0,
            msg_id: 0,
            job_id: job,
            src: 0,
            dst: 1,
            bytes: 1,
            release_time: SimTime::ZERO,
            first_send_time: Some(us(s)),
            completion_time: Some(us(c)),
            delivered_time: Some(us(c)),
            retransmitted_bytes: 0,
            drops_experienced: 0,
        };
        let jobs = jobs_from_flows(&[f(0, 5, 10), f(0, 2, 7), f(1, 1, 3)]);
        assert_eq!(jobs.len(), 2);
        assert_eq!(jobs[0].cct(), us(8));
        assert_eq!(jobs[0].messages, 2);
        assert_eq!(jobs[1].cct(), us(2));
    }
}
