//! DCQCN reaction point: per-QP rate control driven by CNPs, a rate-increase
//! timer and a byte counter. Timers are evaluated lazily up to the caller's
//! notion of now, so no per-QP timer events are needed.

use serde::{Deserialize, Serialize};

use crate::time::SimTime;

fn d_g() -> f64 {
    1.0 / 256.0
}
fn d_cnp_us() -> f64 {
    50.0
}
fn d_timer_us() -> f64 {
    55.0
}
fn d_bc() -> u64 {
    10_000_000
}
fn d_f() -> u32 {
    5
}
fn d_rai() -> f64 {
    0.001
}
fn d_hai() -> f64 {
    5.0
}
fn d_min() -> f64 {
    0.01
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcqcnConfig {
    #[serde(default = "d_g")]
    pub g: f64,
    /// Minimum spacing of CNPs per QP at the notification point.
    #[serde(default = "d_cnp_us")]
    pub cnp_interval_us: f64,
    /// Rate-increase and alpha-decay period.
    #[serde(default = "d_timer_us")]
    pub timer_us: f64,
    #[serde(default = "d_bc")]
    pub byte_counter: u64,
    /// Fast-recovery stages.
    #[serde(default = "d_f")]
    pub f: u32,
    /// Additive increase step as a fraction of line rate.
    #[serde(default = "d_rai")]
    pub rai_fraction: f64,
    /// Hyper increase step in units of the additive step.
    #[serde(default = "d_hai")]
    pub hai_multiple: f64,
    /// Rate floor as a fraction of line rate.
    #[serde(default = "d_min")]
    pub min_rate_fraction: f64,
}

impl Default for DcqcnConfig {
    fn default() -> Self {
        DcqcnConfig {
            g: d_g(),
            cnp_interval_us: d_cnp_us(),
            timer_us: d_timer_us(),
            byte_counter: d_bc(),
            f: d_f(),
            rai_fraction: d_rai(),
            hai_multiple: d_hai(),
            min_rate_fraction: d_min(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Dcqcn {
    line_bps: f64,
    g: f64,
    timer: SimTime,
    byte_counter: u64,
    f: u32,
    r_ai: f64,
    r_hai: f64,
    min_bps: f64,
    pub rate_current: f64,
    pub rate_target: f64,
    pub alpha: f64,
    t_stage: u32,
    bc_stage: u32,
    bytes: u64,
    next_rate_timer: SimTime,
    next_alpha_timer: SimTime,
    cnp_since_alpha: bool,
    pub cnps: u64,
}

impl Dcqcn {
    pub fn new(line_bps: u64, cfg: &DcqcnConfig, now: SimTime) -> Self {
        let line = line_bps as f64;
        let timer = SimTime::from_micros_f64(cfg.timer_us);
        let r_ai = line * cfg.rai_fraction;
        Dcqcn {
            line_bps: line,
            g: cfg.g,
            timer,
            byte_counter: cfg.byte_counter,
            f: cfg.f,
            r_ai,
            r_hai: r_ai * cfg.hai_multiple,
            min_bps: line * cfg.min_rate_fraction,
            rate_current: line,
            rate_target: line,
            alpha: 1.0,
            t_stage: 0,
            bc_stage: 0,
            bytes: 0,
            next_rate_timer: now + timer,
            next_alpha_timer: now + timer,
            cnp_since_alpha: false,
            cnps: 0,
        }
    }

    pub fn min_rate(&self) -> f64 {
        self.min_bps
    }

    fn increase(&mut self) {
        let lo = self.t_stage.min(self.bc_stage);
        let hi = self.t_stage.max(self.bc_stage);
        if hi < self.f {
            // Fast recovery toward the pre-cut rate.
        } else if lo > self.f {
            self.rate_target += (lo - self.f) as f64 * self.r_hai;
        } else {
            self.rate_target += self.r_ai;
        }
        self.rate_target = self.rate_target.min(self.line_bps);
        self.rate_current = ((self.rate_target + self.rate_current) / 2.0).min(self.line_bps);
    }

    /// Runs every timer expiry up to and including `now`.
    pub fn advance(&mut self, now: SimTime) {
        loop {
            let t = self.next_rate_timer.min(self.next_alpha_timer);
            if t > now {
                break;
            }
            if self.next_alpha_timer == t {
                if !self.cnp_since_alpha {
                    self.alpha *= 1.0 - self.g;
                }
                self.cnp_since_alpha = false;
                self.next_alpha_timer = t + self.timer;
            }
            if self.next_rate_timer == t {
                if self.rate_current >= self.line_bps && self.rate_target >= self.line_bps {
                    // Nothing left to recover; skip ahead.
                    let behind = (now - t).as_ps() / self.timer.as_ps();
                    self.next_rate_timer = t + self.timer.mul(behind + 1);
                } else {
                    self.t_stage += 1;
                    self.increase();
                    self.next_rate_timer = t + self.timer;
                }
            }
        }
    }

    pub fn on_cnp(&mut self, now: SimTime) {
        self.advance(now);
        self.cnps += 1;
        self.rate_target = self.rate_current;
        self.rate_current = (self.rate_current * (1.0 - self.alpha / 2.0)).max(self.min_bps);
        self.alpha = (1.0 - self.g) * self.alpha + self.g;
        self.cnp_since_alpha = true;
        self.t_stage = 0;
        self.bc_stage = 0;
        self.bytes = 0;
        self.next_rate_timer = now + self.timer;
        self.next_alpha_timer = now + self.timer;
    }

    pub fn on_bytes_sent(&mut self, bytes: u64) {
        self.bytes += bytes;
        while self.bytes >= self.byte_counter {
            self.bytes -= self.byte_counter;
            self.bc_stage += 1;
            self.increase();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINE: u64 = 400_000_000_000;

    fn us(x: u64) -> SimTime {
        SimTime::from_micros(x)
    }

    #[test]
    fn single_cnp_at_alpha_one_halves() {
        let mut d = Dcqcn::new(LINE, &DcqcnConfig::default(), SimTime::ZERO);
        d.on_cnp(us(1));
        assert_eq!(d.rate_current, LINE as f64 / 2.0);
        assert_eq!(d.rate_target, LINE as f64);
        assert!((d.alpha - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_to_line_rate_without_cnps() {
        let mut d = Dcqcn::new(LINE, &DcqcnConfig::default(), SimTime::ZERO);
        d.on_cnp(us(1));
        d.advance(us(20_000));
        assert!((d.rate_current - LINE as f64).abs() / (LINE as f64) < 1e-3);
        // Alpha decays on every quiet period.
        assert!(d.alpha < 0.5);
    }

    #[test]
    fn fast_recovery_halves_the_gap() {
        let mut d = Dcqcn::new(LINE, &DcqcnConfig::default(), SimTime::ZERO);
        d.on_cnp(SimTime::ZERO);
        d.advance(us(55));
        assert_eq!(d.rate_current, 0.75 * LINE as f64);
        assert_eq!(d.rate_target, LINE as f64);
    }

    #[test]
    fn cnp_storm_reaches_floor() {
        let cfg = DcqcnConfig::default();
        let mut d = Dcqcn::new(LINE, &cfg, SimTime::ZERO);
        for i in 0..2000 {
            d.on_cnp(us(50 * i));
        }
        assert_eq!(d.rate_current, d.min_rate());
        assert_eq!(d.min_rate(), 0.01 * LINE as f64);
    }

    #[test]
    fn byte_counter_drives_increase() {
        let mut d = Dcqcn::new(LINE, &DcqcnConfig::default(), SimTime::ZERO);
        d.on_cnp(SimTime::ZERO);
        let before = d.rate_current;
        d.on_bytes_sent(10_000_000);
        assert!(d.rate_current > before);
    }

    #[test]
    fn alpha_follows_ewma() {
        let mut d = Dcqcn::new(LINE, &DcqcnConfig::default(), SimTime::ZERO);
        d.advance(us(55));
        let g = 1.0 / 256.0;
        assert!((d.alpha - (1.0 - g)).abs() < 1e-15);
        d.on_cnp(us(60));
        assert!((d.alpha - ((1.0 - g) * (1.0 - g) + g)).abs() < 1e-15);
    }
}
