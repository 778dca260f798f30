//! Egress data queue with ECN marking at dequeue and a lossy tail-drop or
//! lossless admission policy.

use alloc::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::packet::Packet;
use crate::rng::RngStream;
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueueMode {
    Lossy,
    Lossless,
}

/// RED-style marking ramp: no marks at or below `kmin`, certain marks at or
/// above `kmax`, linear in between. `kmin == kmax` gives a step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EcnRamp {
    pub kmin_bytes: u64,
    pub kmax_bytes: u64,
}

impl EcnRamp {
    pub fn probability(&self, queued_bytes: u64) -> f64 {
        if queued_bytes <= self.kmin_bytes {
            0.0
        } else if queued_bytes >= self.kmax_bytes {
            1.0
        } else {
            (queued_bytes - self.kmin_bytes) as f64 / (self.kmax_bytes - self.kmin_bytes) as f64
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Accepted,
    Dropped,
    /// Accepted, and the arriving ingress crossed its pause threshold.
    PfcTriggered,
}

#[derive(Clone, Debug)]
pub struct Queued {
    pub pkt: Packet,
    pub ingress: u16,
    pub enqueued_at: SimTime,
}

#[derive(Clone, Debug)]
pub struct SwitchQueue {
    pub capacity_bytes: u64,
    pub ecn: EcnRamp,
    pub mode: QueueMode,
    occupancy_bytes: u64,
    fifo: VecDeque<Queued>,
}

impl SwitchQueue {
    pub fn new(capacity_bytes: u64, ecn: EcnRamp, mode: QueueMode) -> Self {
        SwitchQueue {
            capacity_bytes,
            ecn,
            mode,
            occupancy_bytes: 0,
            fifo: VecDeque::new(),
        }
    }

    pub fn occupancy_bytes(&self) -> u64 {
        self.occupancy_bytes
    }

    pub fn len(&self) -> usize {
        self.fifo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fifo.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Queued> {
        self.fifo.iter()
    }

    /// Whether a lossy queue has room for `size` more bytes. The limit is
    /// inclusive: a queue already holding exactly `capacity` drops.
    pub fn admits(&self, size: u64) -> bool {
        match self.mode {
            QueueMode::Lossless => true,
            QueueMode::Lossy => self.occupancy_bytes + size <= self.capacity_bytes,
        }
    }

    /// Tail-drop admission. Lossless queues always accept; PFC is the
    /// switch's business (see [`super::pfc::SharedBuffer`]).
    pub fn enqueue(&mut self, pkt: Packet, ingress: u16, now: SimTime) -> EnqueueOutcome {
        if !self.admits(pkt.size_bytes as u64) {
            return EnqueueOutcome::Dropped;
        }
        self.occupancy_bytes += pkt.size_bytes as u64;
        self.fifo.push_back(Queued {
            pkt,
            ingress,
            enqueued_at: now,
        });
        EnqueueOutcome::Accepted
    }

    /// Appends without admission control, for probes that must see the
    /// data queueing delay but are never dropped.
    pub fn enqueue_forced(&mut self, pkt: Packet, ingress: u16, now: SimTime) {
        self.occupancy_bytes += pkt.size_bytes as u64;
        self.fifo.push_back(Queued {
            pkt,
            ingress,
            enqueued_at: now,
        });
    }

    /// Pops the head packet and marks it CE with probability given by the
    /// bytes still queued behind it.
    pub fn dequeue_and_mark(&mut self, rng: &mut RngStream) -> Option<Queued> {
        let mut q = self.fifo.pop_front()?;
        self.occupancy_bytes -= q.pkt.size_bytes as u64;
        if q.pkt.is_data() {
            let p = self.ecn.probability(self.occupancy_bytes);
            if p >= 1.0 || (p > 0.0 && rng.uniform(0.0, 1.0) < p) {
                q.pkt.ecn_ce = true;
            }
        }
        Some(q)
    }
}
