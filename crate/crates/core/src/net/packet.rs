use crate::strack::SackPayload;
use crate::time::SimTime;

pub type FlowId = u32;
pub type Psn = u32;
pub type HostId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PacketKind {
    Data,
    /// Selective acknowledgment. RoCEv2 receivers send these as plain
    /// cumulative ACKs (empty bitmap).
    Sack,
    /// Carries the requested SACK base in `psn`.
    Probe,
    /// Go-back-N negative ACK; `psn` is the receiver's expected PSN.
    Nack,
    Cnp,
    PfcPause,
    PfcResume,
}

impl PacketKind {
    pub fn is_control(self) -> bool {
        !matches!(self, PacketKind::Data)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PacketKind::Data => "DATA",
            PacketKind::Sack => "SACK",
            PacketKind::Probe => "PROBE",
            PacketKind::Nack => "NACK",
            PacketKind::Cnp => "CNP",
            PacketKind::PfcPause => "PFC_PAUSE",
            PacketKind::PfcResume => "PFC_RESUME",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Packet {
    pub kind: PacketKind,
    pub flow: FlowId,
    pub src: HostId,
    pub dst: HostId,
    pub psn: Psn,
    pub size_bytes: u32,
    /// ECMP entropy (path id). Fixed once the packet leaves the sender.
    pub entropy: u16,
    pub ecn_ce: bool,
    pub tx_timestamp: SimTime,
    /// Transmission attempt of this PSN, 0 for the first.
    pub attempt: u16,
    pub sack: Option<SackPayload>,
}

impl Packet {
    pub fn data(flow: FlowId, src: HostId, dst: HostId, psn: Psn, size: u32, entropy: u16) -> Self {
        Packet {
            kind: PacketKind::Data,
            flow,
            src,
            dst,
            psn,
            size_bytes: size,
            entropy,
            ecn_ce: false,
            tx_timestamp: SimTime::ZERO,
            attempt: 0,
            sack: None,
        }
    }

    pub fn control(kind: PacketKind, flow: FlowId, src: HostId, dst: HostId, size: u32) -> Self {
        debug_assert!(kind.is_control());
        Packet {
            kind,
            flow,
            src,
            dst,
            psn: 0,
            size_bytes: size,
            entropy: 0,
            ecn_ce: false,
            tx_timestamp: SimTime::ZERO,
            attempt: 0,
            sack: None,
        }
    }

    pub fn is_data(&self) -> bool {
        self.kind == PacketKind::Data
    }
}
