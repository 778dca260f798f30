//! Message traces: records with dependencies, plus generators for the
//! synthetic and collective scenarios.

pub mod collective;
pub mod placement;
pub mod size;
pub mod synthetic;

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::net::packet::HostId;

pub use collective::{gen_allreduce, gen_alltoall, gen_collective, CollectiveAlgo, CollectiveSpec};
pub use placement::{place_jobs, PlacementMode};
pub use size::ByteSize;
pub use synthetic::{gen_incast, gen_permutation, incast_senders};

pub type MsgId = u32;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub msg_id: MsgId,
    pub src: HostId,
    pub dst: HostId,
    pub size_bytes: u64,
    pub depends_on: Vec<MsgId>,
    pub job_id: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<MessageRecord>,
}

impl Trace {
    pub fn new(records: Vec<MessageRecord>) -> Self {
        Trace { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Checks record invariants against a fabric of `hosts` hosts and
    /// returns a dependency-respecting order of record indices.
    pub fn validate(&self, hosts: u32) -> Result<Vec<usize>, ConfigError> {
        let key = "workload";
        let mut index = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            if index.insert(r.msg_id, i).is_some() {
                return Err(ConfigError::new(key, format!("duplicate msg_id {}", r.msg_id)));
            }
            if r.src == r.dst {
                return Err(ConfigError::new(key, format!("message {} sends to itself", r.msg_id)));
            }
            if r.size_bytes == 0 {
                return Err(ConfigError::new(key, format!("message {} is empty", r.msg_id)));
            }
            if r.src >= hosts || r.dst >= hosts {
                return Err(ConfigError::new(
                    key,
                    format!("message {} uses a host outside 0..{hosts}", r.msg_id),
                ));
            }
        }
        let mut indeg = vec![0usize; self.records.len()];
        let mut children = vec![Vec::new(); self.records.len()];
        for (i, r) in self.records.iter().enumerate() {
            for d in &r.depends_on {
                let Some(&j) = index.get(d) else {
                    return Err(ConfigError::new(
                        key,
                        format!("message {} depends on unknown message {d}", r.msg_id),
                    ));
                };
                indeg[i] += 1;
                children[j].push(i);
            }
        }
        let mut ready: VecDeque<usize> = (0..indeg.len()).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(indeg.len());
        while let Some(i) = ready.pop_front() {
            order.push(i);
            for &c in &children[i] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.push_back(c);
                }
            }
        }
        if order.len() != self.records.len() {
            return Err(ConfigError::new(key, "dependency graph has a cycle"));
        }
        Ok(order)
    }

    /// Total bytes each host sends.
    pub fn bytes_by_src(&self, hosts: u32) -> Vec<u64> {
        let mut v = vec![0; hosts as usize];
        for r in &self.records {
            v[r.src as usize] += r.size_bytes;
        }
        v
    }
}
