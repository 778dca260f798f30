//! Sender side: ACK processing, window-gated transmission, inflight
//! accounting and the three loss detectors (out-of-order, probe, timeout).

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use super::cc::{CongestionState, CwndUpdate};
use super::params::CcParams;
use super::path::PathState;
use super::sack::SackPayload;
use crate::error::SimError;
use crate::net::packet::{FlowId, Psn};
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Recovery {
    pub epsn: Psn,
    /// Recovery ends once every PSN up to and including this one is acked.
    pub high: Psn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossTrigger {
    OutOfOrder,
    Probe,
    Timeout,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SenderStats {
    pub sacks: u64,
    pub data_sent_pkts: u64,
    pub retransmitted_pkts: u64,
    pub retransmitted_bytes: u64,
    pub probes_sent: u64,
    pub ooo_recoveries: u64,
    pub probe_recoveries: u64,
    pub timeouts: u64,
}

impl SenderStats {
    pub fn recoveries(&self) -> u64 {
        self.ooo_recoveries + self.probe_recoveries + self.timeouts
    }
}

/// A DATA packet the sender is ready to put on the wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DataTx {
    pub psn: Psn,
    pub size: u32,
    pub entropy: u16,
    pub attempt: u16,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AckOutcome {
    pub acked_bytes: u64,
    pub cwnd: CwndUpdate,
    pub entered_recovery: Option<LossTrigger>,
    pub completed: bool,
}

#[derive(Clone, Debug)]
pub struct SenderState {
    flow: FlowId,
    p: CcParams,
    pub cc: CongestionState,
    pub path: PathState,
    total_bytes: u64,
    total_pkts: u32,
    next_psn: Psn,
    /// Transmissions per PSN.
    tx: Vec<u16>,
    /// Times each PSN was declared lost; always `tx - 1` or `tx`.
    claims: Vec<u16>,
    acked: Vec<u64>,
    lost: BTreeSet<Psn>,
    cum_ack: Psn,
    highest_acked: Option<Psn>,
    bytes_sent: u64,
    bytes_recvd: u64,
    bytes_claimed_retransmit: u64,
    recovery: Option<Recovery>,
    probe_timer_ts: SimTime,
    rto_deadline: SimTime,
    sack_since_probe: bool,
    last_acked_bytes_ts: SimTime,
    last_bitmap_reset: SimTime,
    stats: SenderStats,
}

impl SenderState {
    pub fn new(flow: FlowId, bytes: u64, p: &CcParams, now: SimTime) -> Self {
        assert!(bytes > 0);
        let pkts = bytes.div_ceil(p.mtu as u64);
        let total_pkts = u32::try_from(pkts).expect("message too large for 32-bit PSNs");
        SenderState {
            flow,
            cc: CongestionState::new(p, now),
            path: PathState::new(p.max_paths, p.oblivious),
            p: p.clone(),
            total_bytes: bytes,
            total_pkts,
            next_psn: 0,
            tx: vec![0; total_pkts as usize],
            claims: vec![0; total_pkts as usize],
            acked: vec![0; total_pkts.div_ceil(64) as usize],
            lost: BTreeSet::new(),
            cum_ack: 0,
            highest_acked: None,
            bytes_sent: 0,
            bytes_recvd: 0,
            bytes_claimed_retransmit: 0,
            recovery: None,
            probe_timer_ts: now + p.probe_interval(),
            rto_deadline: now + p.rto,
            sack_since_probe: true,
            last_acked_bytes_ts: now,
            last_bitmap_reset: now,
            stats: SenderStats::default(),
        }
    }

    pub fn flow(&self) -> FlowId {
        self.flow
    }
    pub fn params(&self) -> &CcParams {
        &self.p
    }
    pub fn total_bytes(&self) -> u64 {
        self.total_bytes
    }
    pub fn total_pkts(&self) -> u32 {
        self.total_pkts
    }
    pub fn next_psn(&self) -> Psn {
        self.next_psn
    }
    pub fn cum_ack(&self) -> Psn {
        self.cum_ack
    }
    pub fn recovery(&self) -> Option<Recovery> {
        self.recovery
    }
    pub fn stats(&self) -> &SenderStats {
        &self.stats
    }
    pub fn bytes_sent(&self) -> u64 {
        self.bytes_sent
    }
    pub fn bytes_recvd(&self) -> u64 {
        self.bytes_recvd
    }
    pub fn bytes_claimed_retransmit(&self) -> u64 {
        self.bytes_claimed_retransmit
    }
    pub fn probe_timer_ts(&self) -> SimTime {
        self.probe_timer_ts
    }
    pub fn rto_deadline(&self) -> SimTime {
        self.rto_deadline
    }
    pub fn lost_pending(&self) -> usize {
        self.lost.len()
    }
    pub fn cwnd(&self) -> f64 {
        self.cc.cwnd
    }

    pub fn pkt_size(&self, psn: Psn) -> u32 {
        let mtu = self.p.mtu as u64;
        let off = psn as u64 * mtu;
        (self.total_bytes - off).min(mtu) as u32
    }

    pub fn is_acked(&self, psn: Psn) -> bool {
        self.acked[psn as usize / 64] >> (psn % 64) & 1 == 1
    }

    pub fn is_complete(&self) -> bool {
        self.cum_ack == self.total_pkts
    }

    /// Some sent PSN is not yet cumulatively acknowledged.
    pub fn has_outstanding(&self) -> bool {
        self.cum_ack < self.next_psn
    }

    /// `bytes_sent - bytes_recvd - bytes_claimed_retransmit`, floored at 0.
    /// The raw value dips below zero when the receiver's byte count already
    /// includes a packet that the sender has declared lost but has not yet
    /// seen in a SACK bitmap.
    pub fn inflight(&self) -> u64 {
        self.bytes_sent
            .saturating_sub(self.bytes_recvd)
            .saturating_sub(self.bytes_claimed_retransmit)
    }

    /// Sum of sizes of sent, unacknowledged, unclaimed PSNs.
    pub fn inflight_by_psn(&self) -> u64 {
        (self.cum_ack..self.next_psn)
            .filter(|&p| !self.is_acked(p) && self.tx[p as usize] > self.claims[p as usize])
            .map(|p| self.pkt_size(p) as u64)
            .sum()
    }

    /// Loss threshold on the receiver's out-of-order counter.
    pub fn ooo_threshold(&self) -> u32 {
        let pkts = libm::ceil(self.cc.cwnd / self.p.mtu as f64) as u32;
        pkts.max(self.p.min_ooo_threshold)
    }

    fn candidate(&self) -> Option<Psn> {
        if let Some(&p) = self.lost.first() {
            return Some(p);
        }
        let limit = self.cum_ack.saturating_add(self.p.bitmap_window);
        (self.next_psn < self.total_pkts && self.next_psn < limit).then_some(self.next_psn)
    }

    /// Whether [`Self::next_data`] would release a packet now.
    pub fn ready(&self) -> bool {
        match self.candidate() {
            Some(p) => (self.inflight() + self.pkt_size(p) as u64) as f64 <= self.cc.cwnd,
            None => false,
        }
    }

    /// Next DATA packet if the window admits it: lost PSNs first (lowest
    /// first), then new data.
    pub fn next_data(&mut self, now: SimTime) -> Option<DataTx> {
        if !self.ready() {
            return None;
        }
        let outstanding_before = self.has_outstanding();
        let psn = match self.lost.pop_first() {
            Some(p) => {
                let size = self.pkt_size(p) as u64;
                self.stats.retransmitted_pkts += 1;
                self.stats.retransmitted_bytes += size;
                p
            }
            None => {
                let p = self.next_psn;
                self.next_psn += 1;
                p
            }
        };
        let size = self.pkt_size(psn);
        self.tx[psn as usize] += 1;
        self.bytes_sent += size as u64;
        self.stats.data_sent_pkts += 1;
        if !outstanding_before {
            self.rto_deadline = now + self.p.rto;
            self.probe_timer_ts = now + self.p.probe_interval();
        }
        if let Some(iv) = self.p.bitmap_reset {
            if now - self.last_bitmap_reset >= iv {
                self.path.reset();
                self.last_bitmap_reset = now;
            }
        }
        let cwnd_pkts = (self.cc.cwnd / self.p.mtu as f64) as u32;
        let entropy = self.path.choose_path(cwnd_pkts.max(1));
        Some(DataTx {
            psn,
            size,
            entropy,
            attempt: self.tx[psn as usize] - 1,
        })
    }

    fn set_acked(&mut self, psn: Psn) {
        if self.is_acked(psn) {
            return;
        }
        self.acked[psn as usize / 64] |= 1 << (psn % 64);
        let i = psn as usize;
        if self.claims[i] == self.tx[i] && self.tx[i] > 0 {
            self.claims[i] -= 1;
            self.bytes_claimed_retransmit -= self.pkt_size(psn) as u64;
            self.lost.remove(&psn);
        }
        self.highest_acked = Some(self.highest_acked.map_or(psn, |h| h.max(psn)));
    }

    fn mark_lost(&mut self, psn: Psn) {
        let i = psn as usize;
        if self.is_acked(psn) || self.claims[i] >= self.tx[i] {
            return;
        }
        self.claims[i] += 1;
        self.bytes_claimed_retransmit += self.pkt_size(psn) as u64;
        self.lost.insert(psn);
    }

    fn enter_recovery(&mut self, high: Psn) {
        self.recovery = Some(Recovery {
            epsn: self.cum_ack,
            high,
        });
        for p in self.cum_ack..=high.min(self.next_psn.saturating_sub(1)) {
            self.mark_lost(p);
        }
    }

    fn achieved_window(&self) -> u64 {
        self.cc.base_rtt.as_ps().saturating_add(self.p.target_qdelay.as_ps())
    }

    pub fn on_sack(&mut self, sack: &SackPayload, now: SimTime) -> Result<AckOutcome, SimError> {
        if sack.epsn > self.next_psn {
            return Err(SimError::SackForUnsent {
                flow: self.flow,
                psn: sack.epsn - 1,
            });
        }
        if let Some(p) = sack.selected().find(|&p| p >= self.next_psn) {
            return Err(SimError::SackForUnsent {
                flow: self.flow,
                psn: p,
            });
        }
        self.stats.sacks += 1;

        // Probes are never ECN-marked, so their responses say nothing about
        // the entropy they echo.
        if !sack.for_probe && sack.echo_entropy < self.p.max_paths {
            self.path.update_ecn_bitmap(sack.echo_ecn, sack.echo_entropy);
        }
        let rtt = now - sack.echo_tx_timestamp;
        let delay = self.cc.observe_rtt(rtt);
        self.probe_timer_ts = now + self.p.probe_interval();

        let acked_bytes = sack.bytes_recvd.saturating_sub(self.bytes_recvd);
        self.bytes_recvd = self.bytes_recvd.max(sack.bytes_recvd);
        if sack.epsn > self.cum_ack {
            for p in self.cum_ack..sack.epsn {
                self.set_acked(p);
            }
            self.cum_ack = sack.epsn;
            self.rto_deadline = now + self.p.rto;
        }
        for p in sack.selected() {
            self.set_acked(p);
        }
        if let Some(r) = self.recovery {
            if self.cum_ack > r.high {
                self.recovery = None;
            }
        }

        let mut entered = None;
        let recent_bdp = if (now - self.last_acked_bytes_ts).as_ps() > self.achieved_window() {
            0
        } else {
            self.cc.achieved_bdp
        };
        if sack.for_probe
            && rtt < self.p.net_base_rtt.mul(2)
            && recent_bdp == 0
            && !self.sack_since_probe
            && self.has_outstanding()
        {
            self.stats.probe_recoveries += 1;
            self.enter_recovery(self.next_psn - 1);
            entered = Some(LossTrigger::Probe);
        }
        if !sack.for_probe {
            self.sack_since_probe = true;
            if acked_bytes > 0 {
                self.last_acked_bytes_ts = now;
            }
        }

        let achieved = self.cc.update_achieved_bdp(&self.p, sack.for_probe, acked_bytes, now);
        let cwnd = self
            .cc
            .adjust_cwnd(&self.p, sack.echo_ecn, delay, achieved, acked_bytes, now);

        if entered.is_none() && self.recovery.is_none() && sack.ooo_count > self.ooo_threshold() {
            if let Some(h) = self.highest_acked.filter(|&h| h >= self.cum_ack) {
                self.stats.ooo_recoveries += 1;
                self.enter_recovery(h);
                entered = Some(LossTrigger::OutOfOrder);
            }
        }
        Ok(AckOutcome {
            acked_bytes,
            cwnd,
            entered_recovery: entered,
            completed: self.is_complete(),
        })
    }

    /// Earliest time [`Self::on_timer`] has work to do.
    pub fn next_deadline(&self) -> Option<SimTime> {
        self.has_outstanding()
            .then(|| self.probe_timer_ts.min(self.rto_deadline))
    }

    /// Fires the timeout and probe timers. Returns the SACK base to request
    /// if a probe should be sent.
    pub fn on_timer(&mut self, now: SimTime) -> Option<Psn> {
        if !self.has_outstanding() {
            return None;
        }
        if now >= self.rto_deadline {
            self.stats.timeouts += 1;
            self.enter_recovery(self.next_psn - 1);
            self.rto_deadline = now + self.p.rto;
        }
        if now >= self.probe_timer_ts {
            self.probe_timer_ts = now + self.p.probe_interval();
            self.sack_since_probe = false;
            self.stats.probes_sent += 1;
            return Some(self.cum_ack);
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strack::cc::CwndBranch;
    use proptest::prelude::*;

    const MTU: u32 = 4096;

    fn us(x: u64) -> SimTime {
        SimTime::from_micros(x)
    }

    fn sack(epsn: Psn, bytes: u64, ts: SimTime) -> SackPayload {
        SackPayload {
            epsn,
            sack_base: epsn,
            sack_bitmap: 0,
            bytes_recvd: bytes,
            ooo_count: 0,
            echo_entropy: 1,
            echo_ecn: false,
            echo_tx_timestamp: ts,
            for_probe: false,
        }
    }

    fn send_n(s: &mut SenderState, n: u32, now: SimTime) {
        for _ in 0..n {
            s.next_data(now).expect("window admits");
        }
    }

    #[test]
    fn inflight_arithmetic() {
        let p = CcParams::default_400g();
        let mut s = SenderState::new(0, 20 * MTU as u64, &p, SimTime::ZERO);
        send_n(&mut s, 20, SimTime::ZERO);
        assert_eq!(s.inflight(), 81_920);
        s.on_sack(&sack(10, 40_960, SimTime::ZERO), us(8)).unwrap();
        assert_eq!(s.bytes_recvd(), 40_960);
        assert_eq!(s.inflight(), 40_960);
        assert_eq!(s.inflight_by_psn(), 40_960);
    }

    #[test]
    fn first_ack_sets_base_rtt() {
        let p = CcParams::default_400g();
        let mut s = SenderState::new(0, 4 * MTU as u64, &p, SimTime::ZERO);
        send_n(&mut s, 1, SimTime::ZERO);
        let o = s.on_sack(&sack(1, MTU as u64, SimTime::ZERO), us(8)).unwrap();
        assert_eq!(s.cc.base_rtt, us(8));
        assert_eq!(o.cwnd.branch, CwndBranch::LowDelayIncrease);
    }

    #[test]
    fn ooo_threshold_uses_window_and_floor() {
        let p = CcParams::default_400g();
        let mut s = SenderState::new(0, 100 * MTU as u64, &p, SimTime::ZERO);
        s.cc.cwnd = 40_960.0;
        assert_eq!(s.ooo_threshold(), 10);
        s.cc.cwnd = 8192.0;
        assert_eq!(s.ooo_threshold(), 5);
    }

    fn ooo_sack(epsn: Psn, bits: u64, ooo: u32, bytes: u64) -> SackPayload {
        SackPayload {
            sack_bitmap: bits,
            ooo_count: ooo,
            ..sack(epsn, bytes, SimTime::ZERO)
        }
    }

    #[test]
    fn ooo_enters_recovery_above_threshold() {
        let p = CcParams::default_400g();
        let mut s = SenderState::new(0, 64 * MTU as u64, &p, SimTime::ZERO);
        send_n(&mut s, 20, SimTime::ZERO);
        s.cc.cwnd = 40_960.0;
        s.cc.base_rtt = us(8);
        s.cc.last_selfai_ts = us(8);
        s.cc.last_decrease_ts = us(8);
        // PSN 0 lost, 1..=11 received. The clean ACK grows the window first,
        // so the counter has to clear the post-update threshold.
        let bits = ((1u64 << 11) - 1) << 1;
        let o = s.on_sack(&ooo_sack(0, bits, 30, 11 * MTU as u64), us(8)).unwrap();
        assert!(s.ooo_threshold() < 30);
        assert_eq!(o.entered_recovery, Some(LossTrigger::OutOfOrder));
        assert_eq!(s.recovery(), Some(Recovery { epsn: 0, high: 11 }));
        assert_eq!(s.lost_pending(), 1);
        // The retransmission goes out first.
        let tx = s.next_data(us(8)).unwrap();
        assert_eq!((tx.psn, tx.attempt), (0, 1));
        // Filling the hole up to the recorded high PSN exits recovery.
        s.on_sack(&ooo_sack(12, 0, 0, 12 * MTU as u64), us(16)).unwrap();
        assert_eq!(s.recovery(), None);
    }

    #[test]
    fn small_window_needs_five() {
        let p = CcParams::default_400g();
        let mut s = SenderState::new(0, 64 * MTU as u64, &p, SimTime::ZERO);
        send_n(&mut s, 8, SimTime::ZERO);
        s.cc.cwnd = 8192.0;
        s.cc.base_rtt = us(8);
        s.cc.last_selfai_ts = us(8);
        let o = s.on_sack(&ooo_sack(0, 0b11110, 4, 4 * MTU as u64), us(8)).unwrap();
        assert_eq!(o.entered_recovery, None);
        assert_eq!(s.recovery(), None);
    }

    #[test]
    fn probe_schedule() {
        let p = CcParams::default_400g();
        let mut s = SenderState::new(0, 64 * MTU as u64, &p, SimTime::ZERO);
        send_n(&mut s, 4, SimTime::ZERO);
        s.on_sack(&sack(1, MTU as u64, SimTime::ZERO), us(8)).unwrap();
        assert_eq!(s.next_deadline(), Some(us(32)));
        assert_eq!(s.on_timer(us(31)), None);
        assert_eq!(s.on_timer(us(32)), Some(1));
        assert_eq!(s.stats().probes_sent, 1);
        // Probe lost: the next one follows a probe interval later.
        assert_eq!(s.on_timer(us(40)), None);
        assert_eq!(s.on_timer(us(56)), Some(1));
    }

    #[test]
    fn probe_reply_enters_recovery() {
        let p = CcParams::default_400g();
        let mut s = SenderState::new(0, 64 * MTU as u64, &p, SimTime::ZERO);
        send_n(&mut s, 5, SimTime::ZERO);
        assert_eq!(s.on_timer(us(24)), Some(0));
        let reply = SackPayload {
            for_probe: true,
            ..sack(0, 0, us(24))
        };
        let o = s.on_sack(&reply, us(30)).unwrap();
        assert_eq!(o.entered_recovery, Some(LossTrigger::Probe));
        assert_eq!(s.lost_pending(), 5);
        assert_eq!(s.inflight(), 0);
        assert_eq!(s.inflight_by_psn(), 0);
    }

    #[test]
    fn probe_reply_after_other_sack_does_not_recover() {
        let p = CcParams::default_400g();
        let mut s = SenderState::new(0, 64 * MTU as u64, &p, SimTime::ZERO);
        send_n(&mut s, 5, SimTime::ZERO);
        assert_eq!(s.on_timer(us(24)), Some(0));
        s.on_sack(&sack(1, MTU as u64, SimTime::ZERO), us(26)).unwrap();
        let reply = SackPayload {
            for_probe: true,
            ..sack(1, MTU as u64, us(24))
        };
        assert_eq!(s.on_sack(&reply, us(30)).unwrap().entered_recovery, None);
    }

    #[test]
    fn timeout_claims_everything_unacked() {
        let p = CcParams::default_400g();
        let mut s = SenderState::new(0, 64 * MTU as u64, &p, SimTime::ZERO);
        send_n(&mut s, 3, SimTime::ZERO);
        assert_eq!(s.rto_deadline(), us(500));
        s.on_timer(us(500));
        assert_eq!(s.stats().timeouts, 1);
        assert_eq!(s.lost_pending(), 3);
        assert_eq!(s.rto_deadline(), us(1000));
    }

    #[test]
    fn epsn_advance_pushes_deadline() {
        let p = CcParams::default_400g();
        let mut s = SenderState::new(0, 64 * MTU as u64, &p, SimTime::ZERO);
        send_n(&mut s, 3, SimTime::ZERO);
        s.on_sack(&sack(1, MTU as u64, SimTime::ZERO), us(100)).unwrap();
        assert_eq!(s.rto_deadline(), us(600));
    }

    #[test]
    fn idle_sender_has_no_deadline() {
        let p = CcParams::default_400g();
        let mut s = SenderState::new(0, MTU as u64, &p, SimTime::ZERO);
        assert_eq!(s.next_deadline(), None);
        send_n(&mut s, 1, SimTime::ZERO);
        s.on_sack(&sack(1, MTU as u64, SimTime::ZERO), us(8)).unwrap();
        assert!(s.is_complete());
        assert_eq!(s.next_deadline(), None);
        assert_eq!(s.on_timer(us(10_000)), None);
    }

    #[test]
    fn sack_for_unsent_is_rejected() {
        let p = CcParams::default_400g();
        let mut s = SenderState::new(7, 64 * MTU as u64, &p, SimTime::ZERO);
        send_n(&mut s, 2, SimTime::ZERO);
        let e = s.on_sack(&sack(3, 0, SimTime::ZERO), us(8)).unwrap_err();
        assert_eq!(e, SimError::SackForUnsent { flow: 7, psn: 2 });
        let e = s.on_sack(&ooo_sack(0, 1 << 5, 1, 0), us(8)).unwrap_err();
        assert_eq!(e, SimError::SackForUnsent { flow: 7, psn: 5 });
    }

    #[test]
    fn window_limits_new_data() {
        let p = CcParams::default_400g();
        let mut s = SenderState::new(0, 1000 * MTU as u64, &p, SimTime::ZERO);
        let mut n = 0;
        while s.next_data(SimTime::ZERO).is_some() {
            n += 1;
        }
        // 400 KB window of 4 KB packets.
        assert_eq!(n, 97);
    }

    #[test]
    fn last_packet_is_short() {
        let p = CcParams::default_400g();
        let s = SenderState::new(0, 2 * MTU as u64 + 100, &p, SimTime::ZERO);
        assert_eq!(s.total_pkts(), 3);
        assert_eq!(s.pkt_size(2), 100);
    }

    proptest! {
        /// Random loss and reordering between a sender and a real receiver:
        /// the two inflight bookkeeping methods agree whenever the receiver's
        /// byte count has been fully reflected in the bitmap, cwnd stays in
        /// bounds and the message always completes.
        #[test]
        fn lossy_channel_completes(seed in any::<u64>(), loss_pct in 0u32..20) {
            use crate::rng::RngStream;
            use crate::strack::receiver::{Echo, ReceiverState};
            let p = CcParams::default_400g();
            let mut s = SenderState::new(0, 300 * MTU as u64, &p, SimTime::ZERO);
            let mut r = ReceiverState::new(p.bitmap_window, p.coalesce_bytes);
            let mut rng = RngStream::new(seed, 0);
            let mut now = SimTime::ZERO;
            let mut wire: Vec<DataTx> = Vec::new();
            for _ in 0..20_000 {
                if s.is_complete() {
                    break;
                }
                now += SimTime::from_micros(1);
                while let Some(tx) = s.next_data(now) {
                    wire.push(tx);
                }
                rng.shuffle(&mut wire);
                let batch: Vec<DataTx> = std::mem::take(&mut wire);
                for tx in batch {
                    if rng.below(100) < loss_pct as u64 {
                        continue;
                    }
                    let o = r.on_data(tx.psn, tx.size);
                    if o.sack_due {
                        let sk = r.build_sack(false, None, Echo { entropy: tx.entropy, ecn: false, tx_timestamp: now });
                        s.on_sack(&sk, now).unwrap();
                        prop_assert!(s.cwnd() >= MTU as f64 && s.cwnd() <= p.max_cwnd);
                        prop_assert!(s.inflight() <= s.inflight_by_psn());
                    }
                }
                if let Some(base) = s.on_timer(now) {
                    let sk = r.build_sack(true, Some(base), Echo { entropy: 0, ecn: false, tx_timestamp: now });
                    s.on_sack(&sk, now).unwrap();
                }
            }
            prop_assert!(s.is_complete());
            prop_assert_eq!(r.bytes_recvd(), 300 * MTU as u64);
        }
    }
}
