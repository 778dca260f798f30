use crate::net::packet::Psn;
use crate::time::SimTime;

/// Bits carried by one SACK.
pub const SACK_BITS: u32 = 64;

/// Acknowledgment fields beyond the plain header.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SackPayload {
    /// Every PSN below this has been received.
    pub epsn: Psn,
    /// First PSN described by `sack_bitmap`; never below `epsn`.
    pub sack_base: Psn,
    /// Bit `i` set iff `sack_base + i` has been received.
    pub sack_bitmap: u64,
    /// Unique bytes received so far.
    pub bytes_recvd: u64,
    /// Arrivals since `epsn` last advanced that were not `epsn`.
    pub ooo_count: u32,
    pub echo_entropy: u16,
    pub echo_ecn: bool,
    pub echo_tx_timestamp: SimTime,
    pub for_probe: bool,
}

impl SackPayload {
    /// PSNs the bitmap marks as received.
    pub fn selected(&self) -> impl Iterator<Item = Psn> + '_ {
        (0..SACK_BITS)
            .filter(|i| self.sack_bitmap >> i & 1 == 1)
            .map(|i| self.sack_base + i)
    }
}
