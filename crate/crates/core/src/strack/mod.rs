//! STrack: adaptive multipath spraying, delay/ECN window control and
//! selective loss recovery.

pub mod cc;
pub mod params;
pub mod path;
pub mod receiver;
pub mod sack;
pub mod sender;

pub use cc::{decrease_factor, CongestionState, CwndBranch, CwndUpdate};
pub use params::{CcParams, StrackConfig};
pub use path::PathState;
pub use receiver::{Arrival, DataOutcome, Echo, ReceiverState};
pub use sack::{SackPayload, SACK_BITS};
pub use sender::{AckOutcome, DataTx, LossTrigger, Recovery, SenderState, SenderStats};
