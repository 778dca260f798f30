//! Queue pairs: rate-paced single-path senders with go-back-N recovery.

use alloc::vec::Vec;

use super::dcqcn::{Dcqcn, DcqcnConfig};
use crate::net::packet::Psn;
use crate::time::SimTime;

/// Per-QP byte counts when a message is striped packet by packet,
/// round-robin, over `qps` queue pairs. QPs that would carry nothing are
/// omitted.
pub fn stripe(bytes: u64, mtu: u32, qps: u32) -> Vec<u64> {
    assert!(qps >= 1 && mtu > 0);
    let mtu = mtu as u64;
    let pkts = bytes.div_ceil(mtu);
    let short = pkts * mtu - bytes;
    let last_qp = (pkts + qps as u64 - 1) % qps as u64;
    (0..qps as u64)
        .filter_map(|j| {
            let n = pkts / qps as u64 + u64::from(j < pkts % qps as u64);
            let b = n * mtu - if j == last_qp && n > 0 { short } else { 0 };
            (b > 0).then_some(b)
        })
        .collect()
}

fn pkt_size(total: u64, mtu: u32, psn: Psn) -> u32 {
    let mtu = mtu as u64;
    (total - psn as u64 * mtu).min(mtu) as u32
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QpStats {
    pub data_sent_pkts: u64,
    pub retransmitted_pkts: u64,
    pub retransmitted_bytes: u64,
    pub nacks: u64,
    pub timeouts: u64,
}

#[derive(Clone, Debug)]
pub struct QpSender {
    pub entropy: u16,
    mtu: u32,
    total_bytes: u64,
    total_pkts: u32,
    next_psn: Psn,
    una: Psn,
    max_sent: Psn,
    pub cc: Dcqcn,
    next_send_at: SimTime,
    rto: SimTime,
    rto_deadline: SimTime,
    stats: QpStats,
}

impl QpSender {
    pub fn new(
        entropy: u16,
        bytes: u64,
        mtu: u32,
        line_bps: u64,
        cfg: &DcqcnConfig,
        rto: SimTime,
        now: SimTime,
    ) -> Self {
        assert!(bytes > 0);
        let total_pkts = u32::try_from(bytes.div_ceil(mtu as u64)).expect("message too large for 32-bit PSNs");
        QpSender {
            entropy,
            mtu,
            total_bytes: bytes,
            total_pkts,
            next_psn: 0,
            una: 0,
            max_sent: 0,
            cc: Dcqcn::new(line_bps, cfg, now),
            next_send_at: now,
            rto,
            rto_deadline: now + rto,
            stats: QpStats::default(),
        }
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
    pub fn una(&self) -> Psn {
        self.una
    }
    pub fn stats(&self) -> &QpStats {
        &self.stats
    }
    pub fn pkt_size(&self, psn: Psn) -> u32 {
        pkt_size(self.total_bytes, self.mtu, psn)
    }
    pub fn is_complete(&self) -> bool {
        self.una == self.total_pkts
    }

    /// When the pacer next allows a packet, if there is anything to send.
    pub fn next_send_time(&self) -> Option<SimTime> {
        (self.next_psn < self.total_pkts).then_some(self.next_send_at)
    }

    pub fn ready(&self, now: SimTime) -> bool {
        self.next_psn < self.total_pkts && now >= self.next_send_at
    }

    /// Releases the next packet: `(psn, size, attempt_is_retransmission)`.
    pub fn next_data(&mut self, now: SimTime) -> Option<(Psn, u32, bool)> {
        if !self.ready(now) {
            return None;
        }
        self.cc.advance(now);
        let psn = self.next_psn;
        let size = self.pkt_size(psn);
        let retx = psn < self.max_sent;
        if retx {
            self.stats.retransmitted_pkts += 1;
            self.stats.retransmitted_bytes += size as u64;
        }
        if self.una == self.max_sent {
            self.rto_deadline = now + self.rto;
        }
        self.next_psn += 1;
        self.max_sent = self.max_sent.max(self.next_psn);
        self.stats.data_sent_pkts += 1;
        self.cc.on_bytes_sent(size as u64);
        let gap_ps = libm::ceil(size as f64 * 8.0 * 1e12 / self.cc.rate_current) as u64;
        self.next_send_at = now + SimTime(gap_ps);
        Some((psn, size, retx))
    }

    pub fn on_ack(&mut self, epsn: Psn, now: SimTime) {
        let epsn = epsn.min(self.max_sent);
        if epsn > self.una {
            self.una = epsn;
            self.rto_deadline = now + self.rto;
        }
        if self.next_psn < self.una {
            self.next_psn = self.una;
        }
    }

    /// Go-back-N: resume from the receiver's expected PSN.
    pub fn on_nack(&mut self, epsn: Psn, now: SimTime) {
        self.stats.nacks += 1;
        self.on_ack(epsn, now);
        if epsn < self.next_psn {
            self.next_psn = epsn.max(self.una);
        }
    }

    pub fn on_cnp(&mut self, now: SimTime) {
        self.cc.on_cnp(now);
    }

    pub fn next_deadline(&self) -> Option<SimTime> {
        (self.una < self.max_sent).then_some(self.rto_deadline)
    }

    pub fn on_timer(&mut self, now: SimTime) {
        if self.una < self.max_sent && now >= self.rto_deadline {
            self.stats.timeouts += 1;
            self.next_psn = self.una;
            self.rto_deadline = now + self.rto;
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RxOutcome {
    /// The packet was new and in order.
    pub delivered: bool,
    /// Send a cumulative ACK carrying this expected PSN.
    pub ack: Option<Psn>,
    pub nack: Option<Psn>,
    pub cnp: bool,
}

#[derive(Clone, Debug)]
pub struct QpReceiver {
    total_pkts: u32,
    epsn: Psn,
    bytes_recvd: u64,
    ack_every: u64,
    accum: u64,
    nacked_at: Option<Psn>,
    cnp_interval: SimTime,
    last_cnp: Option<SimTime>,
}

impl QpReceiver {
    pub fn new(total_pkts: u32, ack_every: u64, cnp_interval: SimTime) -> Self {
        QpReceiver {
            total_pkts,
            epsn: 0,
            bytes_recvd: 0,
            ack_every,
            accum: 0,
            nacked_at: None,
            cnp_interval,
            last_cnp: None,
        }
    }

    pub fn epsn(&self) -> Psn {
        self.epsn
    }
    pub fn bytes_recvd(&self) -> u64 {
        self.bytes_recvd
    }
    pub fn is_complete(&self) -> bool {
        self.epsn == self.total_pkts
    }

    pub fn on_data(&mut self, psn: Psn, size: u32, ecn: bool, now: SimTime) -> RxOutcome {
        let mut out = RxOutcome::default();
        if ecn && self.last_cnp.is_none_or(|t| now - t >= self.cnp_interval) {
            self.last_cnp = Some(now);
            out.cnp = true;
        }
        if psn == self.epsn {
            self.epsn += 1;
            self.bytes_recvd += size as u64;
            self.accum += size as u64;
            self.nacked_at = None;
            out.delivered = true;
            if self.accum >= self.ack_every || self.epsn == self.total_pkts {
                self.accum = 0;
                out.ack = Some(self.epsn);
            }
        } else if psn > self.epsn {
            if self.nacked_at != Some(self.epsn) {
                self.nacked_at = Some(self.epsn);
                out.nack = Some(self.epsn);
            }
        } else if psn + 1 == self.total_pkts {
            // Duplicate tail after a rewind: repeat the final ACK.
            out.ack = Some(self.epsn);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const MTU: u32 = 4096;
    const LINE: u64 = 400_000_000_000;

    fn qp(bytes: u64) -> QpSender {
        QpSender::new(
            0,
            bytes,
            MTU,
            LINE,
            &DcqcnConfig::default(),
            SimTime::from_micros(500),
            SimTime::ZERO,
        )
    }

    #[test]
    fn stripe_cases() {
        assert_eq!(stripe(10 * MTU as u64, MTU, 1), vec![10 * MTU as u64]);
        assert_eq!(stripe(16_000_000, MTU, 4).iter().sum::<u64>(), 16_000_000);
        assert_eq!(stripe(1 << 24, MTU, 4), vec![1 << 22; 4]);
        let m = MTU as u64;
        assert_eq!(stripe(10 * m, MTU, 4), vec![3 * m, 3 * m, 2 * m, 2 * m]);
        // The short tail lands on the QP that carries the last packet.
        assert_eq!(stripe(9 * m + 100, MTU, 4), vec![3 * m, 2 * m + 100, 2 * m, 2 * m]);
        assert_eq!(stripe(2 * m, MTU, 4), vec![m, m]);
    }

    fn run_pacer(q: &mut QpSender, until: SimTime) -> u32 {
        let mut now = SimTime::ZERO;
        let mut n = 0;
        while now <= until {
            match q.next_send_time() {
                Some(t) if t <= until => {
                    now = now.max(t);
                    q.next_data(now).unwrap();
                    n += 1;
                }
                _ => break,
            }
        }
        n
    }

    #[test]
    fn paces_at_line_rate() {
        let mut q = qp(1 << 20);
        // 81.92 ns per 4 KB packet at 400 Gbps.
        let n = run_pacer(&mut q, SimTime::from_nanos(819));
        assert_eq!(n, 10);
    }

    #[test]
    fn halved_rate_halves_pace() {
        let mut q = qp(1 << 20);
        q.on_cnp(SimTime::ZERO);
        let n = run_pacer(&mut q, SimTime::from_nanos(1638));
        assert_eq!(n, 10);
    }

    #[test]
    fn go_back_n_rewinds() {
        let mut q = qp(10 * MTU as u64);
        let mut now = SimTime::ZERO;
        while let Some(t) = q.next_send_time() {
            now = now.max(t);
            q.next_data(now);
        }
        assert_eq!(q.next_psn(), 10);
        q.on_nack(4, now);
        assert_eq!(q.next_psn(), 4);
        let mut resent = vec![];
        while let Some(t) = q.next_send_time() {
            now = now.max(t);
            resent.push(q.next_data(now).unwrap());
        }
        assert_eq!(resent.len(), 6);
        assert!(resent.iter().all(|&(_, _, retx)| retx));
        assert_eq!(q.stats().retransmitted_bytes, 6 * MTU as u64);
    }

    #[test]
    fn receiver_gbn_rules() {
        let mut r = QpReceiver::new(10, 4 * MTU as u64, SimTime::from_micros(50));
        let now = SimTime::ZERO;
        for p in 0..3 {
            assert!(r.on_data(p, MTU, false, now).delivered);
        }
        let o = r.on_data(4, MTU, false, now);
        assert_eq!(o.nack, Some(3));
        // One NACK per hole.
        assert_eq!(r.on_data(5, MTU, false, now).nack, None);
        let o = r.on_data(3, MTU, false, now);
        assert!(o.delivered);
        assert_eq!(o.ack, Some(4));
        // Duplicates leave the expected PSN alone.
        let o = r.on_data(1, MTU, false, now);
        assert!(!o.delivered);
        assert_eq!(r.epsn(), 4);
        assert_eq!(r.bytes_recvd(), 4 * MTU as u64);
    }

    #[test]
    fn cnp_spacing() {
        let mut r = QpReceiver::new(100, 1 << 30, SimTime::from_micros(50));
        assert!(r.on_data(0, MTU, true, SimTime::ZERO).cnp);
        assert!(!r.on_data(1, MTU, true, SimTime::from_micros(49)).cnp);
        assert!(r.on_data(2, MTU, true, SimTime::from_micros(50)).cnp);
    }

    #[test]
    fn timeout_rewinds_to_una() {
        let mut q = qp(4 * MTU as u64);
        let mut now = SimTime::ZERO;
        while let Some(t) = q.next_send_time() {
            now = now.max(t);
            q.next_data(now);
        }
        q.on_ack(2, now);
        assert!(q.next_deadline().is_some());
        let dl = q.next_deadline().unwrap();
        q.on_timer(dl);
        assert_eq!(q.next_psn(), 2);
        assert_eq!(q.stats().timeouts, 1);
        q.on_ack(4, dl);
        assert!(q.is_complete());
        assert_eq!(q.next_deadline(), None);
    }
}
