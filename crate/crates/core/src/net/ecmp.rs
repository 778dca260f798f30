use crate::rng::mix64;

use super::packet::FlowId;

/// Picks one of `eligible` equal-cost ports for a packet.
///
/// A pure function of `(flow, entropy, switch, eligible)`, so a given
/// `(flow, entropy)` always takes the same path while the eligible set is
/// unchanged.
pub fn ecmp_select(flow: FlowId, entropy: u16, switch_id: u32, eligible: usize) -> usize {
    debug_assert!(eligible > 0, "no eligible ports");
    if eligible == 1 {
        return 0;
    }
    let key = ((flow as u64) << 32) | ((entropy as u64) << 16);
    let h = mix64(mix64(key) ^ mix64(0x5eed_0000_0000 | switch_id as u64));
    (h % eligible as u64) as usize
}
