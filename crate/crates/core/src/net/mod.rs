//! Fabric model: fat-tree topology, output-queued switches, ECMP.

pub mod ecmp;
pub mod packet;
pub mod pfc;
pub mod queue;
pub mod topology;

pub use ecmp::ecmp_select;
pub use packet::{FlowId, HostId, Packet, PacketKind, Psn};
pub use pfc::{PfcAction, SharedBuffer};
pub use queue::{EcnRamp, EnqueueOutcome, QueueMode, SwitchQueue};
pub use topology::{build_fat_tree, FatTree, NodeId, NodeKind, TopologySpec, CONTROL_BYTES, GBPS};
