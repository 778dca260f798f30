//! Shared-buffer accounting and PFC pause/resume decisions for lossless
//! switches.
//!
//! An ingress is paused when its buffered bytes exceed `alpha` times the free
//! shared buffer (dynamic threshold) and resumed once it drops below that
//! threshold minus a hysteresis. Every PAUSE is followed by a RESUME before
//! the next PAUSE on the same ingress.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PfcAction {
    Pause(u16),
    Resume(u16),
}

#[derive(Clone, Debug)]
pub struct SharedBuffer {
    pub total_bytes: u64,
    pub alpha: f64,
    pub hysteresis_bytes: u64,
    used_bytes: u64,
    per_ingress: Vec<u64>,
    paused: Vec<bool>,
    /// Bytes admitted past `total_bytes`; lossless switches never drop, so
    /// this records missing headroom instead.
    overcommit_peak: u64,
}

impl SharedBuffer {
    pub fn new(total_bytes: u64, ingress_ports: usize, alpha: f64, hysteresis_bytes: u64) -> Self {
        SharedBuffer {
            total_bytes,
            alpha,
            hysteresis_bytes,
            used_bytes: 0,
            per_ingress: vec![0; ingress_ports],
            paused: vec![false; ingress_ports],
            overcommit_peak: 0,
        }
    }

    pub fn used_bytes(&self) -> u64 {
        self.used_bytes
    }

    pub fn ingress_usage(&self, ingress: u16) -> u64 {
        self.per_ingress[ingress as usize]
    }

    pub fn is_paused(&self, ingress: u16) -> bool {
        self.paused[ingress as usize]
    }

    pub fn overcommit_peak(&self) -> u64 {
        self.overcommit_peak
    }

    /// Current dynamic pause threshold.
    pub fn threshold(&self) -> u64 {
        let free = self.total_bytes.saturating_sub(self.used_bytes);
        (self.alpha * free as f64) as u64
    }

    pub fn on_enqueue(&mut self, ingress: u16, bytes: u64) -> Option<PfcAction> {
        let i = ingress as usize;
        self.per_ingress[i] += bytes;
        self.used_bytes += bytes;
        if self.used_bytes > self.total_bytes {
            self.overcommit_peak = self.overcommit_peak.max(self.used_bytes - self.total_bytes);
        }
        if !self.paused[i] && self.per_ingress[i] > self.threshold() {
            self.paused[i] = true;
            return Some(PfcAction::Pause(ingress));
        }
        None
    }

    /// Releases `bytes` from `ingress` and reports every paused ingress now
    /// below its resume point. Freed buffer raises the threshold for all of
    /// them, not just the one that drained.
    pub fn on_dequeue(&mut self, ingress: u16, bytes: u64, out: &mut Vec<PfcAction>) {
        let i = ingress as usize;
        debug_assert!(self.per_ingress[i] >= bytes);
        self.per_ingress[i] -= bytes;
        self.used_bytes -= bytes;
        let resume_below = self.threshold().saturating_sub(self.hysteresis_bytes);
        for (idx, paused) in self.paused.iter_mut().enumerate() {
            if *paused && self.per_ingress[idx] <= resume_below {
                *paused = false;
                out.push(PfcAction::Resume(idx as u16));
            }
        }
    }
}
