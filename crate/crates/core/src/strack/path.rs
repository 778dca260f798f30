//! Adaptive packet spraying over ECMP entropies.
//!
//! One bit per entropy; a set bit means the entropy recently came back
//! ECN-marked and should be skipped. A clean ACK's entropy is reused for the
//! very next packet. Otherwise a round-robin cursor walks a window of
//! `clamp(2 * cwnd_pkts, 8, max_paths)` entropies, skipping marked ones and
//! clearing at most one skipped bit per call so stale marks age out.

use alloc::vec;
use alloc::vec::Vec;

pub const MIN_PATHS: u16 = 8;

#[derive(Clone, Debug)]
pub struct PathState {
    max_paths: u16,
    bits: Vec<u64>,
    rr: u16,
    next_path: Option<u16>,
    oblivious: bool,
}

impl PathState {
    pub fn new(max_paths: u16, oblivious: bool) -> Self {
        assert!(max_paths >= 1);
        PathState {
            max_paths,
            bits: vec![0; (max_paths as usize).div_ceil(64)],
            rr: 0,
            next_path: None,
            oblivious,
        }
    }

    pub fn rr(&self) -> u16 {
        self.rr
    }

    pub fn next_path(&self) -> Option<u16> {
        self.next_path
    }

    pub fn is_marked(&self, path: u16) -> bool {
        self.bits[path as usize / 64] >> (path % 64) & 1 == 1
    }

    pub fn marked_count(&self) -> u32 {
        self.bits.iter().map(|w| w.count_ones()).sum()
    }

    fn set(&mut self, path: u16, on: bool) {
        let w = &mut self.bits[path as usize / 64];
        let m = 1u64 << (path % 64);
        if on {
            *w |= m;
        } else {
            *w &= !m;
        }
    }

    pub fn mark(&mut self, path: u16) {
        self.set(path, true);
    }

    /// Number of entropies in play for a window of `cwnd_pkts` packets.
    pub fn window(&self, cwnd_pkts: u32) -> u16 {
        let want = cwnd_pkts.saturating_mul(2).min(self.max_paths as u32);
        let lo = (MIN_PATHS).min(self.max_paths) as u32;
        want.max(lo) as u16
    }

    /// Feedback from an ACK that echoed `path`.
    pub fn update_ecn_bitmap(&mut self, ecn: bool, path: u16) {
        debug_assert!(path < self.max_paths);
        if ecn {
            self.set(path, true);
            self.next_path = None;
        } else {
            self.set(path, false);
            self.next_path = Some(path);
        }
    }

    /// Entropy for the next data packet.
    pub fn choose_path(&mut self, cwnd_pkts: u32) -> u16 {
        let paths = self.window(cwnd_pkts);
        if self.oblivious {
            self.rr = (self.rr + 1) % paths;
            return self.rr;
        }
        if let Some(p) = self.next_path.take() {
            self.rr = p;
            return p;
        }
        self.rr = (self.rr + 1) % paths;
        let mut cleared = false;
        // Terminates: the first set bit met is cleared, so at worst the walk
        // returns to it after one lap.
        while self.is_marked(self.rr) {
            if !cleared {
                self.set(self.rr, false);
                cleared = true;
            }
            self.rr = (self.rr + 1) % paths;
        }
        self.rr
    }

    /// Clears every mark (optional periodic reset).
    pub fn reset(&mut self) {
        self.bits.iter_mut().for_each(|w| *w = 0);
    }
}
