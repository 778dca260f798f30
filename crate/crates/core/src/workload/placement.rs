use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::net::packet::HostId;
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementMode {
    /// Disjoint uniformly random host sets.
    #[default]
    Random,
    /// Job `j` takes hosts `j*ranks..(j+1)*ranks`.
    Packed,
}

/// Host of each rank, per job. One host per rank.
pub fn place_jobs(
    jobs: u32,
    ranks_per_job: u32,
    hosts: u32,
    mode: PlacementMode,
    rng: &mut RngStream,
) -> Result<Vec<Vec<HostId>>, ConfigError> {
    let need = jobs as u64 * ranks_per_job as u64;
    if need > hosts as u64 {
        return Err(ConfigError::new(
            "workload.jobs",
            format!("{jobs} jobs x {ranks_per_job} ranks need {need} hosts, fabric has {hosts}"),
        ));
    }
    let mut pool: Vec<HostId> = (0..hosts).collect();
    if mode == PlacementMode::Random {
        rng.shuffle(&mut pool);
    }
    Ok(pool
        .chunks(ranks_per_job as usize)
        .take(jobs as usize)
        .map(|c| c.to_vec())
        .collect())
}
