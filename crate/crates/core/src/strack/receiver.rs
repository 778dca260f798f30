//! Receiver side: arrival window anchored at the expected PSN and SACK
//! generation with byte-based coalescing.

use alloc::vec;
use alloc::vec::Vec;

use super::sack::{SackPayload, SACK_BITS};
use crate::net::packet::Psn;
use crate::time::SimTime;

/// Metadata of the packet that triggered a SACK, echoed back to the sender.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Echo {
    pub entropy: u16,
    pub ecn: bool,
    pub tx_timestamp: SimTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arrival {
    New,
    Duplicate,
    /// Beyond the arrival window; discarded.
    Overflow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DataOutcome {
    pub arrival: Arrival,
    pub sack_due: bool,
}

#[derive(Clone, Debug)]
pub struct ReceiverState {
    epsn: Psn,
    window: u32,
    /// Ring of `window` bits; PSN `p` lives at bit `p % window`.
    bits: Vec<u64>,
    lpsn: Option<Psn>,
    ooo_counter: u32,
    bytes_recvd: u64,
    coalesce_accum: u64,
    coalesce_bytes: u64,
    overflows: u64,
}

impl ReceiverState {
    pub fn new(window: u32, coalesce_bytes: u64) -> Self {
        assert!(
            window >= SACK_BITS && window.is_multiple_of(SACK_BITS),
            "arrival window must be a positive multiple of 64"
        );
        ReceiverState {
            epsn: 0,
            window,
            bits: vec![0; (window / 64) as usize],
            lpsn: None,
            ooo_counter: 0,
            bytes_recvd: 0,
            coalesce_accum: 0,
            coalesce_bytes,
            overflows: 0,
        }
    }

    pub fn epsn(&self) -> Psn {
        self.epsn
    }
    pub fn bytes_recvd(&self) -> u64 {
        self.bytes_recvd
    }
    pub fn ooo_counter(&self) -> u32 {
        self.ooo_counter
    }
    pub fn overflows(&self) -> u64 {
        self.overflows
    }
    pub fn lpsn(&self) -> Option<Psn> {
        self.lpsn
    }

    /// Whether `psn` has been received.
    pub fn has(&self, psn: Psn) -> bool {
        if psn < self.epsn {
            return true;
        }
        if psn - self.epsn >= self.window {
            return false;
        }
        let i = (psn % self.window) as usize;
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    fn put(&mut self, psn: Psn, on: bool) {
        let i = (psn % self.window) as usize;
        if on {
            self.bits[i / 64] |= 1 << (i % 64);
        } else {
            self.bits[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn on_data(&mut self, psn: Psn, size: u32) -> DataOutcome {
        self.coalesce_accum += size as u64;
        let in_order = psn == self.epsn;
        let arrival = if self.has(psn) {
            Arrival::Duplicate
        } else if psn - self.epsn >= self.window {
            self.overflows += 1;
            Arrival::Overflow
        } else {
            self.put(psn, true);
            self.bytes_recvd += size as u64;
            self.lpsn = Some(self.lpsn.map_or(psn, |l| l.min(psn)));
            if in_order {
                while self.has(self.epsn) {
                    let e = self.epsn;
                    self.put(e, false);
                    self.epsn += 1;
                }
                self.ooo_counter = 0;
            } else {
                self.ooo_counter += 1;
            }
            Arrival::New
        };
        let sack_due = in_order || self.coalesce_accum >= self.coalesce_bytes;
        DataOutcome { arrival, sack_due }
    }

    /// Builds a SACK. `base` is a probe's requested segment start; otherwise
    /// the segment holding the lowest PSN received since the last SACK.
    pub fn build_sack(&mut self, for_probe: bool, base: Option<Psn>, echo: Echo) -> SackPayload {
        let sack_base = match base {
            Some(b) => b.max(self.epsn),
            None => match self.lpsn {
                Some(l) if l >= self.epsn => self.epsn + (l - self.epsn) / SACK_BITS * SACK_BITS,
                _ => self.epsn,
            },
        };
        let mut bitmap = 0u64;
        for i in 0..SACK_BITS {
            if self.has(sack_base + i) && sack_base + i >= self.epsn {
                bitmap |= 1 << i;
            }
        }
        self.lpsn = None;
        self.coalesce_accum = 0;
        SackPayload {
            epsn: self.epsn,
            sack_base,
            sack_bitmap: bitmap,
            bytes_recvd: self.bytes_recvd,
            ooo_count: self.ooo_counter,
            echo_entropy: echo.entropy,
            echo_ecn: echo.ecn,
            echo_tx_timestamp: echo.tx_timestamp,
            for_probe,
        }
    }
}
