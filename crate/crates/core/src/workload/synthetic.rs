use alloc::vec::Vec;

use super::{MessageRecord, Trace};
use crate::net::packet::HostId;
use crate::rng::RngStream;

/// Random pairing where every host sends one message and receives one,
/// never to itself.
pub fn gen_permutation(n: u32, msg_size: u64, rng: &mut RngStream) -> Trace {
    assert!(n >= 2, "permutation needs at least two hosts");
    let mut dst: Vec<HostId> = (0..n).collect();
    loop {
        rng.shuffle(&mut dst);
        if dst.iter().enumerate().all(|(i, &d)| i as u32 != d) {
            break;
        }
    }
    Trace::new(
        dst.iter()
            .enumerate()
            .map(|(i, &d)| MessageRecord {
                msg_id: i as u32,
                src: i as u32,
                dst: d,
                size_bytes: msg_size,
                depends_on: Vec::new(),
                job_id: 0,
            })
            .collect(),
    )
}

/// Incast senders for `dst`. With `spread`, hosts under other ToRs come
/// first, one per ToR in turn; otherwise ascending host order.
pub fn incast_senders(fanin: u32, dst: HostId, hosts: u32, hosts_per_tor: u32, spread: bool) -> Option<Vec<HostId>> {
    if fanin >= hosts || dst >= hosts {
        return None;
    }
    let order: Vec<HostId> = if spread {
        let tors = hosts / hosts_per_tor;
        let home = dst / hosts_per_tor;
        let mut v = Vec::with_capacity(hosts as usize);
        for slot in 0..hosts_per_tor {
            for k in 1..tors {
                v.push(((home + k) % tors) * hosts_per_tor + slot);
            }
        }
        v.extend(
            (0..hosts_per_tor)
                .map(|s| home * hosts_per_tor + s)
                .filter(|&h| h != dst),
        );
        v
    } else {
        (0..hosts).filter(|&h| h != dst).collect()
    };
    Some(order.into_iter().take(fanin as usize).collect())
}

pub fn gen_incast(senders: &[HostId], dst: HostId, msg_size: u64) -> Trace {
    Trace::new(
        senders
            .iter()
            .enumerate()
            .map(|(i, &s)| MessageRecord {
                msg_id: i as u32,
                src: s,
                dst,
                size_bytes: msg_size,
                depends_on: Vec::new(),
                job_id: 0,
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;
    use proptest::prelude::*;

    #[test]
    fn two_hosts_swap() {
        let t = gen_permutation(2, 10, &mut RngStream::new(1, 2));
        assert_eq!((t.records[0].dst, t.records[1].dst), (1, 0));
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let a = gen_permutation(64, 10, &mut RngStream::new(9, 2));
        let b = gen_permutation(64, 10, &mut RngStream::new(9, 2));
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn permutation_degrees(n in 2u32..300, seed in any::<u64>()) {
            let t = gen_permutation(n, 10, &mut RngStream::new(seed, 2));
            let srcs: BTreeSet<_> = t.records.iter().map(|r| r.src).collect();
            let dsts: BTreeSet<_> = t.records.iter().map(|r| r.dst).collect();
            prop_assert_eq!(srcs.len() as u32, n);
            prop_assert_eq!(dsts.len() as u32, n);
            prop_assert!(t.records.iter().all(|r| r.src != r.dst));
        }
    }

    #[test]
    fn incast_shapes() {
        for fanin in [8, 32, 127] {
            let s = incast_senders(fanin, 0, 128, 8, true).unwrap();
            let t = gen_incast(&s, 0, 16_000_000);
            assert_eq!(t.len() as u32, fanin);
            assert!(t.records.iter().all(|r| r.dst == 0 && r.src != 0));
            let uniq: BTreeSet<_> = s.iter().collect();
            assert_eq!(uniq.len() as u32, fanin);
        }
        assert!(incast_senders(128, 0, 128, 8, true).is_none());
        assert_eq!(incast_senders(128, 0, 256, 8, true).unwrap().len(), 128);
    }

    #[test]
    fn spread_uses_distinct_tors_first() {
        let s = incast_senders(15, 3, 128, 8, true).unwrap();
        let tors: BTreeSet<_> = s.iter().map(|h| h / 8).collect();
        assert_eq!(tors.len(), 15);
        assert!(!tors.contains(&0));
        let packed = incast_senders(7, 3, 128, 8, false).unwrap();
        assert_eq!(packed, [0, 1, 2, 4, 5, 6, 7]);
    }
}
