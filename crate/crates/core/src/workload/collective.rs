//! Collective traces. Every message is one chunk; a chunk depends on the
//! chunks whose data it forwards, so consecutive steps pipeline.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::size::ByteSize;
use super::{MessageRecord, MsgId};
use crate::error::ConfigError;
use crate::net::packet::HostId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CollectiveAlgo {
    /// Allreduce over two complementary binary trees.
    #[serde(rename = "DBT")]
    Dbt,
    #[serde(rename = "RING")]
    Ring,
    /// Recursive halving (reduce-scatter) then doubling (allgather).
    #[serde(rename = "HD")]
    Hd,
    /// All-to-all with bounded in-flight destinations.
    #[serde(rename = "A2A")]
    A2a,
}

fn d_chunk() -> ByteSize {
    ByteSize(128_000)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectiveSpec {
    pub algorithm: CollectiveAlgo,
    pub ranks: u32,
    pub collective_bytes: ByteSize,
    #[serde(default = "d_chunk")]
    pub chunk_bytes: ByteSize,
    /// A2A only: destinations a rank works on at once. Defaults to all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallel_degree: Option<u32>,
}

impl CollectiveSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let key = "workload.collective";
        if self.ranks < 2 {
            return Err(ConfigError::new(format!("{key}.ranks"), "need at least 2 ranks"));
        }
        if self.algorithm == CollectiveAlgo::Hd && !self.ranks.is_power_of_two() {
            return Err(ConfigError::new(
                format!("{key}.ranks"),
                format!("HD needs a power-of-two rank count, got {}", self.ranks),
            ));
        }
        if self.chunk_bytes.0 == 0 || self.chunk_bytes > self.collective_bytes {
            return Err(ConfigError::new(
                format!("{key}.chunk_bytes"),
                "must be positive and no larger than collective_bytes",
            ));
        }
        if self.collective_bytes.0 < self.ranks as u64 {
            return Err(ConfigError::new(
                format!("{key}.collective_bytes"),
                "smaller than one byte per rank",
            ));
        }
        if let Some(pd) = self.parallel_degree {
            if pd == 0 || pd > self.ranks - 1 {
                return Err(ConfigError::new(
                    format!("{key}.parallel_degree"),
                    format!("must be in 1..={}", self.ranks - 1),
                ));
            }
        }
        Ok(())
    }
}

struct Builder<'a> {
    hosts: &'a [HostId],
    job: u32,
    next_id: MsgId,
    chunk: u64,
    out: Vec<MessageRecord>,
}

impl Builder<'_> {
    fn emit(&mut self, src: u32, dst: u32, size: u64, deps: Vec<MsgId>) -> MsgId {
        let id = self.next_id;
        self.next_id += 1;
        self.out.push(MessageRecord {
            msg_id: id,
            src: self.hosts[src as usize],
            dst: self.hosts[dst as usize],
            size_bytes: size,
            depends_on: deps,
            job_id: self.job,
        });
        id
    }

    fn chunks(&self, lo: u64, hi: u64) -> impl Iterator<Item = (u64, u64)> {
        let c = self.chunk;
        (lo..hi).step_by(c as usize).map(move |a| (a, (a + c).min(hi)))
    }
}

/// Per-rank record of which message last delivered each byte range.
struct Writers(Vec<Vec<(u64, u64, MsgId)>>);

impl Writers {
    fn new(ranks: u32) -> Self {
        Writers(vec![Vec::new(); ranks as usize])
    }

    fn deps(&self, rank: u32, lo: u64, hi: u64) -> Vec<MsgId> {
        let mut d: Vec<MsgId> = self.0[rank as usize]
            .iter()
            .filter(|&&(a, b, _)| a < hi && lo < b)
            .map(|&(_, _, m)| m)
            .collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    fn write(&mut self, rank: u32, lo: u64, hi: u64, id: MsgId) {
        let v = &mut self.0[rank as usize];
        let mut kept = Vec::with_capacity(v.len() + 2);
        for &(a, b, m) in v.iter() {
            if b <= lo || hi <= a {
                kept.push((a, b, m));
                continue;
            }
            if a < lo {
                kept.push((a, lo, m));
            }
            if hi < b {
                kept.push((hi, b, m));
            }
        }
        kept.push((lo, hi, id));
        *v = kept;
    }
}

/// One round of simultaneous transfers `(src, dst, lo, hi)`.
fn round(b: &mut Builder<'_>, w: &mut Writers, sends: &[(u32, u32, u64, u64)]) {
    let mut writes = Vec::new();
    for &(src, dst, lo, hi) in sends {
        for (a, z) in b.chunks(lo, hi).collect::<Vec<_>>() {
            let id = b.emit(src, dst, z - a, w.deps(src, a, z));
            writes.push((dst, a, z, id));
        }
    }
    for (dst, a, z, id) in writes {
        w.write(dst, a, z, id);
    }
}

fn ring(b: &mut Builder<'_>, p: u32, d: u64) {
    let seg = |s: u32| (d * s as u64 / p as u64, d * (s as u64 + 1) / p as u64);
    let mut w = Writers::new(p);
    for t in 0..2 * (p - 1) {
        let sends: Vec<_> = (0..p)
            .map(|i| {
                let (lo, hi) = seg((i + p - t % p) % p);
                (i, (i + 1) % p, lo, hi)
            })
            .collect();
        round(b, &mut w, &sends);
    }
}

fn halving_doubling(b: &mut Builder<'_>, p: u32, d: u64) {
    let k = p.trailing_zeros();
    let mut range = vec![(0u64, d); p as usize];
    let mut w = Writers::new(p);
    for r in 0..k {
        let bit = p >> (r + 1);
        let mut sends = Vec::new();
        let mut next = range.clone();
        for i in 0..p {
            let (lo, hi) = range[i as usize];
            let mid = lo + (hi - lo) / 2;
            let (keep, send) = if i & bit == 0 {
                ((lo, mid), (mid, hi))
            } else {
                ((mid, hi), (lo, mid))
            };
            next[i as usize] = keep;
            sends.push((i, i ^ bit, send.0, send.1));
        }
        round(b, &mut w, &sends);
        range = next;
    }
    for j in 0..k {
        let bit = 1 << j;
        let sends: Vec<_> = (0..p)
            .map(|i| {
                let (lo, hi) = range[i as usize];
                (i, i ^ bit, lo, hi)
            })
            .collect();
        round(b, &mut w, &sends);
        let prev = range.clone();
        for i in 0..p {
            let (a, z) = prev[i as usize];
            let (pa, pz) = prev[(i ^ bit) as usize];
            range[i as usize] = (a.min(pa), z.max(pz));
        }
    }
}

/// Tree shape used for both halves: binary heap over positions. The second
/// tree maps position `q` to rank `p - 1 - q`.
pub fn dbt_rank(tree: u32, p: u32, pos: u32) -> u32 {
    if tree == 0 {
        pos
    } else {
        p - 1 - pos
    }
}

fn dbt(b: &mut Builder<'_>, p: u32, d: u64) {
    let halves = [d.div_ceil(2), d / 2];
    let mut offset = 0;
    for (tree, &h) in halves.iter().enumerate() {
        let tree = tree as u32;
        if h == 0 {
            continue;
        }
        let chunks: Vec<(u64, u64)> = b.chunks(offset, offset + h).collect();
        offset += h;
        let rank = |q: u32| dbt_rank(tree, p, q);
        let kids = |q: u32| [2 * q + 1, 2 * q + 2].into_iter().filter(move |&c| c < p);
        let mut up = vec![vec![0 as MsgId; chunks.len()]; p as usize];
        let mut down = vec![vec![0 as MsgId; chunks.len()]; p as usize];
        for (c, &(lo, hi)) in chunks.iter().enumerate() {
            for q in (1..p).rev() {
                let deps = kids(q).map(|k| up[k as usize][c]).collect();
                up[q as usize][c] = b.emit(rank(q), rank((q - 1) / 2), hi - lo, deps);
            }
        }
        for (c, &(lo, hi)) in chunks.iter().enumerate() {
            for q in 0..p {
                let deps: Vec<MsgId> = if q == 0 {
                    kids(0).map(|k| up[k as usize][c]).collect()
                } else {
                    vec![down[q as usize][c]]
                };
                for k in kids(q) {
                    down[k as usize][c] = b.emit(rank(q), rank(k), hi - lo, deps.clone());
                }
            }
        }
    }
}

fn alltoall(b: &mut Builder<'_>, p: u32, d: u64, pd: u32) {
    let per = d / p as u64;
    for n in 0..p {
        let mut rounds: Vec<Vec<MsgId>> = Vec::new();
        for k in 1..p {
            let deps = if k > pd {
                rounds[(k - pd - 1) as usize].clone()
            } else {
                Vec::new()
            };
            let ids = b
                .chunks(0, per)
                .collect::<Vec<_>>()
                .into_iter()
                .map(|(lo, hi)| b.emit(n, (n + k) % p, hi - lo, deps.clone()))
                .collect();
            rounds.push(ids);
        }
    }
}

/// Messages of one collective job. `hosts[r]` is the host of rank `r`;
/// ids are allocated from `first_id` upward.
pub fn gen_collective(
    spec: &CollectiveSpec,
    hosts: &[HostId],
    job: u32,
    first_id: MsgId,
) -> Result<Vec<MessageRecord>, ConfigError> {
    spec.validate()?;
    assert_eq!(
        hosts.len(),
        spec.ranks as usize,
        "placement must give one host per rank"
    );
    let mut b = Builder {
        hosts,
        job,
        next_id: first_id,
        chunk: spec.chunk_bytes.0,
        out: Vec::new(),
    };
    let (p, d) = (spec.ranks, spec.collective_bytes.0);
    match spec.algorithm {
        CollectiveAlgo::Ring => ring(&mut b, p, d),
        CollectiveAlgo::Hd => halving_doubling(&mut b, p, d),
        CollectiveAlgo::Dbt => dbt(&mut b, p, d),
        CollectiveAlgo::A2a => alltoall(&mut b, p, d, spec.parallel_degree.unwrap_or(p - 1)),
    }
    Ok(b.out)
}

pub fn gen_allreduce(
    spec: &CollectiveSpec,
    hosts: &[HostId],
    job: u32,
    first_id: MsgId,
) -> Result<Vec<MessageRecord>, ConfigError> {
    if spec.algorithm == CollectiveAlgo::A2a {
        return Err(ConfigError::new(
            "workload.collective.algorithm",
            "A2A is not an allreduce",
        ));
    }
    gen_collective(spec, hosts, job, first_id)
}

pub fn gen_alltoall(
    spec: &CollectiveSpec,
    hosts: &[HostId],
    job: u32,
    first_id: MsgId,
) -> Result<Vec<MessageRecord>, ConfigError> {
    if spec.algorithm != CollectiveAlgo::A2a {
        return Err(ConfigError::new("workload.collective.algorithm", "expected A2A"));
    }
    gen_collective(spec, hosts, job, first_id)
}
