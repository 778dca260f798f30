//! Window control driven by measured queuing delay, ECN and achieved BDP.

use super::params::CcParams;
use crate::time::SimTime;

/// Which rule of [`CongestionState::adjust_cwnd`] changed the window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CwndBranch {
    /// No ECN, delay above the high target: constant additive increase.
    HighDelayIncrease,
    /// No ECN, delay below target: increase proportional to headroom.
    LowDelayIncrease,
    /// Heavy congestion: window set to the achieved BDP.
    AchievedBdp,
    MultiplicativeDecrease,
    NoChange,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CwndUpdate {
    pub branch: CwndBranch,
    pub fairness_added: bool,
}

#[derive(Clone, Debug)]
pub struct CongestionState {
    /// Bytes.
    pub cwnd: f64,
    /// Per-flow minimum measured RTT; `SimTime::MAX` until the first sample.
    pub base_rtt: SimTime,
    /// EWMA of queuing delay, picoseconds.
    pub avg_delay: f64,
    pub last_decrease_ts: SimTime,
    pub last_selfai_ts: SimTime,
    pub rx_count: u64,
    pub rxcount_clear_ts: SimTime,
    pub achieved_bdp: u64,
}

/// Multiplicative decrease factor, floored at one half.
pub fn decrease_factor(avg_delay: f64, target: f64, gamma: f64) -> f64 {
    (1.0 - gamma * (avg_delay - target) / avg_delay).max(0.5)
}

impl CongestionState {
    /// Starts at the window cap, as if the path were idle.
    pub fn new(p: &CcParams, now: SimTime) -> Self {
        CongestionState {
            cwnd: p.max_cwnd,
            base_rtt: SimTime::MAX,
            avg_delay: 0.0,
            last_decrease_ts: now,
            last_selfai_ts: now,
            rx_count: 0,
            rxcount_clear_ts: now,
            achieved_bdp: 0,
        }
    }

    /// Folds an RTT sample into the per-flow minimum and returns the
    /// queuing delay it implies.
    pub fn observe_rtt(&mut self, rtt: SimTime) -> SimTime {
        if rtt < self.base_rtt {
            self.base_rtt = rtt;
        }
        rtt - self.base_rtt
    }

    /// Bytes acknowledged per `base_rtt + target_qdelay` window. Probe
    /// responses do not count.
    pub fn update_achieved_bdp(&mut self, p: &CcParams, for_probe: bool, acked_bytes: u64, now: SimTime) -> u64 {
        let window = self.base_rtt.as_ps().saturating_add(p.target_qdelay.as_ps());
        let can_clear = (now - self.rxcount_clear_ts).as_ps() > window;
        if !for_probe {
            self.rx_count += acked_bytes;
        }
        if can_clear {
            self.achieved_bdp = self.rx_count;
            self.rx_count = 0;
            self.rxcount_clear_ts = now;
        }
        self.achieved_bdp
    }

    pub fn adjust_cwnd(
        &mut self,
        p: &CcParams,
        ecn: bool,
        delay: SimTime,
        achieved_bdp: u64,
        acked_bytes: u64,
        now: SimTime,
    ) -> CwndUpdate {
        let base = self.base_rtt.as_ps();
        let can_decrease = (now - self.last_decrease_ts).as_ps() > base;
        let can_fairness = (now - self.last_selfai_ts).as_ps() > base;
        let d = delay.as_ps() as f64;
        let target = p.target_qdelay.as_ps() as f64;
        let qhigh = p.target_qhigh.as_ps() as f64;
        self.avg_delay = self.avg_delay * (1.0 - p.ewma) + p.ewma * d;
        let acked = acked_bytes as f64;

        let branch = if !ecn && d > qhigh {
            self.cwnd += p.beta * acked / self.cwnd;
            CwndBranch::HighDelayIncrease
        } else if !ecn && d < target {
            self.cwnd += p.alpha * (target - d) * acked / self.cwnd;
            CwndBranch::LowDelayIncrease
        } else if can_decrease && self.avg_delay > target {
            if d > qhigh && (achieved_bdp as f64) < p.max_cwnd / 8.0 {
                self.cwnd = achieved_bdp as f64;
                self.last_decrease_ts = now;
                CwndBranch::AchievedBdp
            } else if d > target {
                self.cwnd *= decrease_factor(self.avg_delay, target, p.gamma);
                self.last_decrease_ts = now;
                CwndBranch::MultiplicativeDecrease
            } else {
                CwndBranch::NoChange
            }
        } else {
            CwndBranch::NoChange
        };

        let fairness_added = can_fairness;
        if can_fairness {
            self.cwnd += p.eta;
            self.last_selfai_ts = now;
        }
        self.cwnd = self.cwnd.clamp(p.mtu as f64, p.max_cwnd);
        CwndUpdate { branch, fairness_added }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn us(x: u64) -> SimTime {
        SimTime::from_micros(x)
    }

    fn state(p: &CcParams) -> CongestionState {
        let mut s = CongestionState::new(p, SimTime::ZERO);
        s.base_rtt = us(8);
        s
    }

    #[test]
    fn no_growth_past_cap() {
        let p = CcParams::default_400g();
        let mut s = state(&p);
        let now = us(100);
        let u = s.adjust_cwnd(&p, false, SimTime::ZERO, 0, 4096, now);
        assert_eq!(u.branch, CwndBranch::LowDelayIncrease);
        assert_eq!(s.cwnd, p.max_cwnd);
    }

    #[test]
    fn decrease_factor_hand_trace() {
        // avg 16us against an 8us target: 1 - 0.8 * 8/16 = 0.6.
        assert_eq!(decrease_factor(16e6, 8e6, 0.8), 0.6);
        // Floor.
        assert_eq!(decrease_factor(1e9, 8e6, 0.8), 0.5);
    }

    #[test]
    fn multiplicative_decrease_through_adjust() {
        let p = CcParams::default_400g();
        let mut s = state(&p);
        s.cwnd = 200_000.0;
        // Pre-load the EWMA so that it lands on 16us after folding in 10us.
        s.avg_delay = (16e6 - p.ewma * 10e6) / (1.0 - p.ewma);
        let now = us(100);
        s.last_selfai_ts = now;
        let u = s.adjust_cwnd(&p, true, us(10), 0, 4096, now);
        assert_eq!(u.branch, CwndBranch::MultiplicativeDecrease);
        assert!(!u.fairness_added);
        assert!((s.avg_delay - 16e6).abs() < 1e-6);
        assert!((s.cwnd - 120_000.0).abs() < 1e-6, "cwnd {}", s.cwnd);
        assert_eq!(s.last_decrease_ts, now);
    }

    #[test]
    fn heavy_congestion_takes_achieved_bdp() {
        let p = CcParams::default_400g();
        assert_eq!(p.max_cwnd / 8.0, 50_000.0);
        let mut s = state(&p);
        s.avg_delay = 30e6;
        let now = us(100);
        s.last_selfai_ts = now;
        let u = s.adjust_cwnd(&p, true, us(30), 20_000, 4096, now);
        assert_eq!(u.branch, CwndBranch::AchievedBdp);
        assert_eq!(s.cwnd, 20_000.0);
    }

    #[test]
    fn unmarked_high_delay_increases() {
        let p = CcParams::default_400g();
        let mut s = state(&p);
        s.cwnd = 100_000.0;
        let now = us(100);
        s.last_selfai_ts = now;
        let u = s.adjust_cwnd(&p, false, us(30), 0, 4096, now);
        assert_eq!(u.branch, CwndBranch::HighDelayIncrease);
        assert!((s.cwnd - (100_000.0 + p.beta * 4096.0 / 100_000.0)).abs() < 1e-9);
    }

    #[test]
    fn decrease_waits_a_base_rtt() {
        let p = CcParams::default_400g();
        let mut s = state(&p);
        s.avg_delay = 20e6;
        s.cwnd = 200_000.0;
        s.last_decrease_ts = us(95);
        s.last_selfai_ts = us(100);
        let u = s.adjust_cwnd(&p, true, us(12), 0, 4096, us(100));
        assert_eq!(u.branch, CwndBranch::NoChange);
        assert_eq!(s.cwnd, 200_000.0);
    }

    #[test]
    fn fairness_once_per_base_rtt() {
        let p = CcParams::default_400g();
        let mut s = state(&p);
        s.cwnd = 100_000.0;
        s.avg_delay = 8e6;
        // ECN-marked, on target: no branch fires, only fairness.
        let u = s.adjust_cwnd(&p, true, us(8), 0, 0, us(9));
        assert!(u.fairness_added);
        assert!((s.cwnd - (100_000.0 + p.eta)).abs() < 1e-9);
        let u = s.adjust_cwnd(&p, true, us(8), 0, 0, us(10));
        assert!(!u.fairness_added);
    }

    #[test]
    fn achieved_bdp_window_rollover() {
        let p = CcParams::default_400g();
        let mut s = state(&p);
        // Probe responses never count.
        assert_eq!(s.update_achieved_bdp(&p, true, 4096, us(1)), 0);
        assert_eq!(s.rx_count, 0);
        s.update_achieved_bdp(&p, false, 8192, us(2));
        assert_eq!(s.rx_count, 8192);
        s.rx_count = 120_000 - 8192;
        // Window is base_rtt + target = 16us; at 17us it rolls over.
        let got = s.update_achieved_bdp(&p, false, 8192, us(17));
        assert_eq!(got, 120_000);
        assert_eq!(s.rx_count, 0);
        assert_eq!(s.rxcount_clear_ts, us(17));
    }

    #[test]
    fn ewma_converges_geometrically() {
        let p = CcParams::default_400g();
        let mut s = state(&p);
        s.avg_delay = 2e6;
        let d = 13e6;
        let a0 = s.avg_delay;
        for n in 1..=200 {
            s.adjust_cwnd(&p, true, SimTime(d as u64), 0, 0, us(9 + n));
            let expect = d + (a0 - d) * (1.0 - p.ewma).powi(n as i32);
            let rel = ((s.avg_delay - expect) / expect).abs();
            assert!(rel <= 1e-9, "n={n} rel={rel}");
        }
    }

    proptest! {
        #[test]
        fn window_stays_bounded(
            steps in proptest::collection::vec((any::<bool>(), 0u64..100_000_000, 0u64..600_000, 0u64..65_536), 1..300)
        ) {
            let p = CcParams::default_400g();
            let mut s = state(&p);
            let mut now = us(10);
            for (ecn, delay_ps, abdp, acked) in steps {
                now += SimTime::from_nanos(500);
                s.adjust_cwnd(&p, ecn, SimTime(delay_ps), abdp, acked, now);
                prop_assert!(s.cwnd >= p.mtu as f64 && s.cwnd <= p.max_cwnd);
                prop_assert!(s.avg_delay >= 0.0);
            }
        }
    }
}
