//! RoCEv2 baseline: DCQCN rate control, go-back-N recovery and QP striping
//! over a lossless fabric.

pub mod dcqcn;
pub mod qp;

use serde::{Deserialize, Serialize};

pub use dcqcn::{Dcqcn, DcqcnConfig};
pub use qp::{stripe, QpReceiver, QpSender, QpStats, RxOutcome};

fn d_qps() -> u32 {
    1
}
fn d_rto_us() -> f64 {
    500.0
}
fn d_ack_mtus() -> u32 {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoceConfig {
    #[serde(default = "d_qps")]
    pub qps_per_conn: u32,
    #[serde(default)]
    pub dcqcn: DcqcnConfig,
    /// Go-back-N timeout for tail losses, which no NACK can report.
    #[serde(default = "d_rto_us")]
    pub rto_us: f64,
    /// Receiver coalesces cumulative ACKs over this many MTUs.
    #[serde(default = "d_ack_mtus")]
    pub ack_coalesce_mtus: u32,
}

impl Default for RoceConfig {
    fn default() -> Self {
        RoceConfig {
            qps_per_conn: d_qps(),
            dcqcn: DcqcnConfig::default(),
            rto_us: d_rto_us(),
            ack_coalesce_mtus: d_ack_mtus(),
        }
    }
}
