//! The fabric, hosts and transports wired into one event loop.
//!
//! Hosts pull: a NIC that goes idle asks its control queue first, then its
//! flows in round-robin order, so STrack's window check and RoCE's pacer are
//! evaluated at the moment a packet would leave. Switch egresses hold a
//! strict-priority control FIFO in front of the data queue; PFC pauses only
//! data. Probes are the exception: they wait in the data FIFO, exempt from
//! drops, so the RTT of a probe reply reflects the queues it crossed.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use super::config::SimConfig;
use crate::engine::Scheduler;
use crate::error::{ConfigError, SimError};
use crate::net::packet::{FlowId, HostId, Packet, PacketKind, Psn};
use crate::net::pfc::{PfcAction, SharedBuffer};
use crate::net::queue::{EcnRamp, QueueMode, SwitchQueue};
use crate::net::topology::{bdp_bytes, FatTree, NodeId, NodeKind, CONTROL_BYTES};
use crate::rng::{stream, stream_id, RngStream};
use crate::rocev2::{stripe, QpReceiver, QpSender};
use crate::strack::{Arrival, CcParams, Echo, LossTrigger, ReceiverState, SenderState};
use crate::telemetry::{
    jobs_from_flows, Conservation, EventKind, EventRecord, FlowRecord, JobRecord, QueueSample, QueueSampler,
    ThroughputBins,
};
use crate::time::SimTime;
use crate::workload::{MsgId, Trace};

#[derive(Debug)]
enum Ev {
    Arrive { node: NodeId, port: u16, pkt: Packet },
    TxDone { node: NodeId, port: u16 },
    HostKick { host: HostId },
    FlowTimer { flow: FlowId },
}

impl Ev {
    fn tag(&self) -> u64 {
        match self {
            Ev::Arrive { node, pkt, .. } => (1 << 60) | ((*node as u64) << 32) | pkt.psn as u64,
            Ev::TxDone { node, port } => (2 << 60) | ((*node as u64) << 16) | *port as u64,
            Ev::HostKick { host } => (3 << 60) | *host as u64,
            Ev::FlowTimer { flow } => (4 << 60) | *flow as u64,
        }
    }
}

struct Port {
    peer: NodeId,
    peer_port: u16,
    rate: u64,
    busy: bool,
    /// DATA held back by a PAUSE from the peer.
    paused: bool,
    ctrl: VecDeque<Packet>,
    data: SwitchQueue,
    mark_rng: RngStream,
    loss_rate: f64,
}

struct Node {
    ports: Vec<Port>,
    buffer: Option<SharedBuffer>,
}

#[derive(Default)]
struct Host {
    active: Vec<FlowId>,
    rr: usize,
    kick_at: Option<SimTime>,
}

#[allow(clippy::large_enum_variant)] // one per flow, never moved after setup
enum Endpoint {
    Strack { tx: SenderState, rx: ReceiverState },
    Roce { tx: QpSender, rx: QpReceiver },
}

struct Flow {
    msg: usize,
    src: HostId,
    dst: HostId,
    ep: Endpoint,
    timer_at: Option<SimTime>,
    tx_done: bool,
    rx_done: bool,
    drops: u64,
    probe_seq: u16,
}

struct Msg {
    waiting: usize,
    dependents: Vec<usize>,
    flows: Vec<FlowId>,
    release: Option<SimTime>,
    first_send: Option<SimTime>,
    completion: Option<SimTime>,
    delivered: Option<SimTime>,
    flows_tx_done: usize,
    flows_rx_done: usize,
}

/// Run-wide counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    pub data_drops: u64,
    pub dropped_bytes: u64,
    pub link_losses: u64,
    pub link_lost_bytes: u64,
    pub sack_losses: u64,
    pub pfc_pauses: u64,
    pub pfc_resumes: u64,
    pub pfc_overcommit_peak: u64,
    pub data_pkts_sent: u64,
    pub retransmitted_pkts: u64,
    pub retransmitted_bytes: u64,
    pub ooo_recoveries: u64,
    pub probe_recoveries: u64,
    pub probes: u64,
    pub timeouts: u64,
    pub nacks: u64,
    pub cnps: u64,
    /// Window outside `[MTU, max_cwnd]` after an ACK.
    pub cwnd_violations: u64,
    /// Entropy handed out while its ECN bit was set.
    pub marked_entropy_picks: u64,
    pub events: u64,
    pub dispatch_hash: u64,
}

impl RunStats {
    pub fn recoveries(&self) -> u64 {
        self.ooo_recoveries + self.probe_recoveries + self.timeouts
    }
}

pub struct RunResult {
    pub flows: Vec<FlowRecord>,
    pub jobs: Vec<JobRecord>,
    pub qdelay: Vec<QueueSample>,
    pub tput: ThroughputBins,
    pub events: Vec<EventRecord>,
    pub conservation: Conservation,
    pub stats: RunStats,
    pub end_time: SimTime,
    pub net_base_rtt: SimTime,
    pub host_bps: u64,
}

impl RunResult {
    pub fn max_fct(&self) -> Option<SimTime> {
        self.flows.iter().filter_map(|f| f.fct()).max()
    }

    pub fn max_cct(&self) -> Option<SimTime> {
        self.jobs.iter().map(|j| j.cct()).max()
    }
}

pub struct Simulation {
    cfg: SimConfig,
    fat: FatTree,
    params: CcParams,
    sched: Scheduler<Ev>,
    nodes: Vec<Node>,
    hosts: Vec<Host>,
    flows: Vec<Flow>,
    trace: Trace,
    msgs: Vec<Msg>,
    incomplete: usize,
    sampler: QueueSampler,
    tput: ThroughputBins,
    events: Vec<EventRecord>,
    cons: Conservation,
    stats: RunStats,
    loss_rng: RngStream,
    sack_rng: RngStream,
    pfc_out: Vec<PfcAction>,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self, ConfigError> {
        let fat = cfg.validate()?;
        let trace = cfg.build_trace(&fat)?;
        trace.validate(fat.hosts())?;
        let params = cfg.cc_params(&fat);
        let lossless = cfg.lossless();
        let (kmin, kmax) = cfg.ecn_bdp();
        let rtt = fat.net_base_rtt;
        let mtu = cfg.mtu as u64;

        let mut nodes = Vec::with_capacity(fat.node_count() as usize);
        for n in 0..fat.node_count() {
            let specs = fat.ports(n);
            let is_switch = !matches!(fat.kind(n), NodeKind::Host(_));
            let mut ports = Vec::with_capacity(specs.len());
            for (i, s) in specs.iter().enumerate() {
                let bdp = bdp_bytes(s.rate_bps, rtt) as f64;
                let ecn = EcnRamp {
                    kmin_bytes: (kmin * bdp) as u64,
                    kmax_bytes: (kmax * bdp) as u64,
                };
                let mode = if lossless {
                    QueueMode::Lossless
                } else {
                    QueueMode::Lossy
                };
                let loss_rate = match fat.kind(n) {
                    NodeKind::Tor(t) if i as u32 >= fat.hosts_per_tor => {
                        let sp = i as u32 - fat.hosts_per_tor;
                        link_loss(&cfg, t, sp)
                    }
                    NodeKind::Spine(sp) => link_loss(&cfg, i as u32, sp),
                    _ => 0.0,
                };
                ports.push(Port {
                    peer: s.peer_node,
                    peer_port: s.peer_port,
                    rate: s.rate_bps,
                    busy: false,
                    paused: false,
                    ctrl: VecDeque::new(),
                    data: SwitchQueue::new((cfg.switch.drop_bdp * bdp) as u64, ecn, mode),
                    mark_rng: RngStream::new(cfg.seed, stream_id(stream::ECN_MARK, ((n as u64) << 16) | i as u64)),
                    loss_rate,
                });
            }
            let buffer = (lossless && is_switch).then(|| {
                let capacity: u64 = specs.iter().map(|s| s.rate_bps).sum();
                let total = cfg.switch.buffer_mb_per_51_2_tbps * 1e6 * capacity as f64 / 51.2e12;
                SharedBuffer::new(
                    total as u64,
                    specs.len(),
                    cfg.switch.pfc_alpha,
                    cfg.switch.pfc_hysteresis_mtus as u64 * mtu,
                )
            });
            nodes.push(Node { ports, buffer });
        }

        let index: BTreeMap<MsgId, usize> = trace.records.iter().enumerate().map(|(i, r)| (r.msg_id, i)).collect();
        let mut msgs: Vec<Msg> = trace
            .records
            .iter()
            .map(|r| Msg {
                waiting: r.depends_on.len(),
                dependents: Vec::new(),
                flows: Vec::new(),
                release: None,
                first_send: None,
                completion: None,
                delivered: None,
                flows_tx_done: 0,
                flows_rx_done: 0,
            })
            .collect();
        for (i, r) in trace.records.iter().enumerate() {
            for d in &r.depends_on {
                msgs[index[d]].dependents.push(i);
            }
        }

        let t = &cfg.telemetry;
        let sampler = QueueSampler::new(
            SimTime::from_micros_f64(t.qdelay_threshold_us),
            t.full_logging,
            SimTime::from_micros_f64(t.qdelay_min_interval_us),
        );
        let tput = ThroughputBins::new(SimTime::from_micros_f64(t.tput_window_us));
        let incomplete = msgs.len();
        let hosts = (0..fat.hosts()).map(|_| Host::default()).collect();
        Ok(Simulation {
            loss_rng: RngStream::new(cfg.seed, stream::LINK_LOSS),
            sack_rng: RngStream::new(cfg.seed, stream::SACK_LOSS),
            cfg,
            fat,
            params,
            sched: Scheduler::new(),
            nodes,
            hosts,
            flows: Vec::new(),
            trace,
            msgs,
            incomplete,
            sampler,
            tput,
            events: Vec::new(),
            cons: Conservation::default(),
            stats: RunStats::default(),
            pfc_out: Vec::new(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn fabric(&self) -> &FatTree {
        &self.fat
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn run(mut self) -> Result<RunResult, SimError> {
        let now = SimTime::ZERO;
        for i in 0..self.msgs.len() {
            if self.msgs[i].waiting == 0 {
                self.release(i, now);
            }
        }
        let limit = self.cfg.time_limit();
        while self.incomplete > 0 {
            let Some(ev) = self.sched.pop_until(SimTime::MAX) else {
                return Err(SimError::Deadlock {
                    at: self.sched.now(),
                    pending: self.incomplete,
                });
            };
            if ev.fire_at > limit {
                return Err(SimError::TimeLimit {
                    limit,
                    incomplete: self.incomplete,
                });
            }
            self.sched.note_dispatch(ev.payload.tag());
            self.dispatch(ev.payload)?;
        }
        Ok(self.finish())
    }

    fn now(&self) -> SimTime {
        self.sched.now()
    }

    fn log(&mut self, kind: EventKind, node: NodeId, port: u16, flow: Option<FlowId>, psn: Option<Psn>) {
        if self.cfg.telemetry.log_events {
            self.events.push(EventRecord {
                time: self.now(),
                kind,
                node,
                port,
                flow,
                psn,
            });
        }
    }

    fn dispatch(&mut self, ev: Ev) -> Result<(), SimError> {
        match ev {
            Ev::Arrive { node, port, pkt } => {
                if node < self.fat.hosts() {
                    self.host_receive(node, pkt)?;
                } else {
                    self.switch_receive(node, port, pkt);
                }
            }
            Ev::TxDone { node, port } => {
                self.nodes[node as usize].ports[port as usize].busy = false;
                self.kick(node, port);
            }
            Ev::HostKick { host } => {
                if self.hosts[host as usize].kick_at == Some(self.now()) {
                    self.hosts[host as usize].kick_at = None;
                }
                self.host_try_send(host);
            }
            Ev::FlowTimer { flow } => self.flow_timer(flow),
        }
        Ok(())
    }

    fn kick(&mut self, node: NodeId, port: u16) {
        if node < self.fat.hosts() {
            self.host_try_send(node);
        } else {
            self.switch_try_send(node, port);
        }
    }

    // ---- release and completion ----

    fn release(&mut self, i: usize, now: SimTime) {
        self.msgs[i].release = Some(now);
        let r = &self.trace.records[i];
        let (src, dst, size) = (r.src, r.dst, r.size_bytes);
        let mtu = self.cfg.mtu;
        let parts: Vec<(u16, Endpoint)> = if self.cfg.transport.is_strack() {
            let id = self.flows.len() as FlowId;
            vec![(
                0,
                Endpoint::Strack {
                    tx: SenderState::new(id, size, &self.params, now),
                    rx: ReceiverState::new(self.params.bitmap_window, self.params.coalesce_bytes),
                },
            )]
        } else {
            let roce = &self.cfg.roce;
            let rto = SimTime::from_micros_f64(roce.rto_us);
            let cnp_iv = SimTime::from_micros_f64(roce.dcqcn.cnp_interval_us);
            stripe(size, mtu, roce.qps_per_conn)
                .into_iter()
                .enumerate()
                .map(|(j, bytes)| {
                    let tx = QpSender::new(j as u16, bytes, mtu, self.fat.host_bps, &roce.dcqcn, rto, now);
                    let rx = QpReceiver::new(tx.total_pkts(), roce.ack_coalesce_mtus as u64 * mtu as u64, cnp_iv);
                    (j as u16, Endpoint::Roce { tx, rx })
                })
                .collect()
        };
        for (_, ep) in parts {
            let id = self.flows.len() as FlowId;
            self.flows.push(Flow {
                msg: i,
                src,
                dst,
                ep,
                timer_at: None,
                tx_done: false,
                rx_done: false,
                drops: 0,
                probe_seq: 0,
            });
            self.msgs[i].flows.push(id);
            self.hosts[src as usize].active.push(id);
            self.tput.touch(self.trace.records[i].msg_id);
        }
        self.host_try_send(src);
    }

    fn flow_tx_complete(&mut self, f: FlowId) {
        let now = self.now();
        let fl = &mut self.flows[f as usize];
        if fl.tx_done {
            return;
        }
        fl.tx_done = true;
        let (src, m) = (fl.src, fl.msg);
        let h = &mut self.hosts[src as usize];
        if let Some(pos) = h.active.iter().position(|&x| x == f) {
            h.active.remove(pos);
            if h.rr > pos {
                h.rr -= 1;
            }
        }
        let msg = &mut self.msgs[m];
        msg.flows_tx_done += 1;
        if msg.flows_tx_done == msg.flows.len() {
            msg.completion = Some(now);
            self.incomplete -= 1;
            let deps = core::mem::take(&mut self.msgs[m].dependents);
            for d in deps {
                self.msgs[d].waiting -= 1;
                if self.msgs[d].waiting == 0 {
                    self.release(d, now);
                }
            }
        }
    }

    fn flow_rx_complete(&mut self, f: FlowId) {
        let fl = &mut self.flows[f as usize];
        if fl.rx_done {
            return;
        }
        fl.rx_done = true;
        let msg = &mut self.msgs[fl.msg];
        msg.flows_rx_done += 1;
        if msg.flows_rx_done == msg.flows.len() {
            msg.delivered = Some(self.sched.now());
        }
    }

    // ---- hosts ----

    fn host_try_send(&mut self, h: HostId) {
        let now = self.now();
        let port = &mut self.nodes[h as usize].ports[0];
        if port.busy {
            return;
        }
        if let Some(pkt) = port.ctrl.pop_front() {
            self.start_tx(h, 0, pkt);
            return;
        }
        if port.paused {
            return;
        }
        let n = self.hosts[h as usize].active.len();
        let mut wake: Option<SimTime> = None;
        for k in 0..n {
            let idx = (self.hosts[h as usize].rr + k) % n;
            let f = self.hosts[h as usize].active[idx];
            if let Some(pkt) = self.flow_next_packet(f, now, &mut wake) {
                self.hosts[h as usize].rr = (idx + 1) % n;
                let m = self.flows[f as usize].msg;
                self.msgs[m].first_send.get_or_insert(now);
                self.start_tx(h, 0, pkt);
                self.arm_timer(f);
                return;
            }
        }
        if let Some(t) = wake {
            let host = &mut self.hosts[h as usize];
            if host.kick_at.is_none_or(|k| t < k || k < now) {
                host.kick_at = Some(t);
                self.sched.schedule(t, Ev::HostKick { host: h });
            }
        }
    }

    fn flow_next_packet(&mut self, f: FlowId, now: SimTime, wake: &mut Option<SimTime>) -> Option<Packet> {
        let fl = &mut self.flows[f as usize];
        let (src, dst) = (fl.src, fl.dst);
        match &mut fl.ep {
            Endpoint::Strack { tx, .. } => {
                let d = tx.next_data(now)?;
                if !self.params.oblivious && tx.path.is_marked(d.entropy) {
                    self.stats.marked_entropy_picks += 1;
                }
                let mut pkt = Packet::data(f, src, dst, d.psn, d.size, d.entropy);
                pkt.tx_timestamp = now;
                pkt.attempt = d.attempt;
                Some(pkt)
            }
            Endpoint::Roce { tx, .. } => {
                if !tx.ready(now) {
                    if let Some(t) = tx.next_send_time().filter(|&t| t > now) {
                        *wake = Some(wake.map_or(t, |w| w.min(t)));
                    }
                    return None;
                }
                let (psn, size, retx) = tx.next_data(now)?;
                let mut pkt = Packet::data(f, src, dst, psn, size, tx.entropy);
                pkt.tx_timestamp = now;
                pkt.attempt = u16::from(retx);
                Some(pkt)
            }
        }
    }

    fn arm_timer(&mut self, f: FlowId) {
        let now = self.now();
        let fl = &mut self.flows[f as usize];
        let d = match &fl.ep {
            Endpoint::Strack { tx, .. } => tx.next_deadline(),
            Endpoint::Roce { tx, .. } => tx.next_deadline(),
        };
        if let Some(d) = d {
            let d = d.max(now);
            if fl.timer_at.is_none_or(|t| d < t) {
                fl.timer_at = Some(d);
                self.sched.schedule(d, Ev::FlowTimer { flow: f });
            }
        }
    }

    fn flow_timer(&mut self, f: FlowId) {
        let now = self.now();
        let fl = &mut self.flows[f as usize];
        if fl.timer_at != Some(now) {
            return;
        }
        fl.timer_at = None;
        if fl.tx_done {
            return;
        }
        let (src, dst) = (fl.src, fl.dst);
        match &mut fl.ep {
            Endpoint::Strack { tx, .. } => {
                let before = tx.stats().timeouts;
                let probe = tx.on_timer(now);
                let timed_out = tx.stats().timeouts > before;
                let seq = fl.probe_seq;
                fl.probe_seq = fl.probe_seq.wrapping_add(1);
                if timed_out {
                    self.stats.timeouts += 1;
                    self.log(EventKind::Timeout, src, 0, Some(f), None);
                }
                if let Some(base) = probe {
                    self.stats.probes += 1;
                    self.log(EventKind::Probe, src, 0, Some(f), Some(base));
                    let mut pkt = Packet::control(PacketKind::Probe, f, src, dst, CONTROL_BYTES);
                    pkt.psn = base;
                    pkt.tx_timestamp = now;
                    pkt.entropy = seq % self.params.max_paths;
                    self.nodes[src as usize].ports[0].ctrl.push_back(pkt);
                }
            }
            Endpoint::Roce { tx, .. } => {
                let before = tx.stats().timeouts;
                tx.on_timer(now);
                if tx.stats().timeouts > before {
                    let una = tx.una();
                    self.stats.timeouts += 1;
                    self.log(EventKind::Timeout, src, 0, Some(f), Some(una));
                }
            }
        }
        self.arm_timer(f);
        self.host_try_send(src);
    }

    fn send_control(&mut self, h: HostId, pkt: Packet) {
        self.nodes[h as usize].ports[0].ctrl.push_back(pkt);
        self.host_try_send(h);
    }

    fn host_receive(&mut self, h: HostId, pkt: Packet) -> Result<(), SimError> {
        let now = self.now();
        match pkt.kind {
            PacketKind::PfcPause | PacketKind::PfcResume => {
                self.nodes[h as usize].ports[0].paused = pkt.kind == PacketKind::PfcPause;
                self.host_try_send(h);
            }
            PacketKind::Data => self.receive_data(h, pkt),
            PacketKind::Probe => {
                let f = pkt.flow;
                let Endpoint::Strack { rx, .. } = &mut self.flows[f as usize].ep else {
                    return Ok(());
                };
                let echo = Echo {
                    entropy: pkt.entropy,
                    ecn: false,
                    tx_timestamp: pkt.tx_timestamp,
                };
                let sack = rx.build_sack(true, Some(pkt.psn), echo);
                let mut reply = Packet::control(PacketKind::Sack, f, h, pkt.src, CONTROL_BYTES);
                reply.entropy = pkt.entropy;
                reply.psn = sack.epsn;
                reply.sack = Some(sack);
                self.send_control(h, reply);
            }
            PacketKind::Sack | PacketKind::Nack | PacketKind::Cnp => {
                let f = pkt.flow;
                if pkt.kind == PacketKind::Sack
                    && self.cfg.impairments.sack_loss_rate > 0.0
                    && self.sack_rng.uniform(0.0, 1.0) < self.cfg.impairments.sack_loss_rate
                {
                    self.stats.sack_losses += 1;
                    self.log(EventKind::SackLoss, h, 0, Some(f), Some(pkt.psn));
                    return Ok(());
                }
                if self.flows[f as usize].tx_done {
                    return Ok(());
                }
                self.sender_feedback(f, pkt, now)?;
                self.arm_timer(f);
                self.host_try_send(h);
            }
        }
        Ok(())
    }

    fn sender_feedback(&mut self, f: FlowId, pkt: Packet, now: SimTime) -> Result<(), SimError> {
        let src = self.flows[f as usize].src;
        let completed;
        match &mut self.flows[f as usize].ep {
            Endpoint::Strack { tx, .. } => {
                let Some(sack) = pkt.sack else {
                    return Ok(());
                };
                let out = tx.on_sack(&sack, now)?;
                let cwnd = tx.cwnd();
                if cwnd < self.params.mtu as f64 || cwnd > self.params.max_cwnd {
                    self.stats.cwnd_violations += 1;
                }
                completed = out.completed;
                if let Some(trig) = out.entered_recovery {
                    match trig {
                        LossTrigger::OutOfOrder => self.stats.ooo_recoveries += 1,
                        LossTrigger::Probe => self.stats.probe_recoveries += 1,
                        LossTrigger::Timeout => {}
                    }
                    let epsn = tx.cum_ack();
                    self.log(EventKind::Recovery, src, 0, Some(f), Some(epsn));
                }
            }
            Endpoint::Roce { tx, .. } => {
                match pkt.kind {
                    PacketKind::Sack => tx.on_ack(pkt.psn, now),
                    PacketKind::Nack => {
                        tx.on_nack(pkt.psn, now);
                        self.stats.nacks += 1;
                    }
                    PacketKind::Cnp => tx.on_cnp(now),
                    _ => {}
                }
                completed = tx.is_complete();
                if pkt.kind == PacketKind::Nack {
                    self.log(EventKind::Nack, src, 0, Some(f), Some(pkt.psn));
                }
            }
        }
        if completed {
            self.flow_tx_complete(f);
        }
        Ok(())
    }

    fn receive_data(&mut self, h: HostId, pkt: Packet) {
        let now = self.now();
        let size = pkt.size_bytes as u64;
        self.cons.delivered += size;
        let f = pkt.flow;
        let msg_id = self.trace.records[self.flows[f as usize].msg].msg_id;
        let mut new_bytes = 0;
        let mut replies: [Option<Packet>; 3] = [None, None, None];
        let rx_complete;
        let fl = &mut self.flows[f as usize];
        let total = match &fl.ep {
            Endpoint::Strack { tx, .. } => tx.total_bytes(),
            Endpoint::Roce { tx, .. } => tx.total_bytes(),
        };
        match &mut fl.ep {
            Endpoint::Strack { rx, .. } => {
                let out = rx.on_data(pkt.psn, pkt.size_bytes);
                if out.arrival == Arrival::New {
                    new_bytes = size;
                }
                rx_complete = rx.bytes_recvd() == total;
                if out.sack_due {
                    let echo = Echo {
                        entropy: pkt.entropy,
                        ecn: pkt.ecn_ce,
                        tx_timestamp: pkt.tx_timestamp,
                    };
                    let sack = rx.build_sack(false, None, echo);
                    let mut r = Packet::control(PacketKind::Sack, f, h, pkt.src, CONTROL_BYTES);
                    r.entropy = pkt.entropy;
                    r.psn = sack.epsn;
                    r.sack = Some(sack);
                    replies[0] = Some(r);
                }
            }
            Endpoint::Roce { rx, tx } => {
                let out = rx.on_data(pkt.psn, pkt.size_bytes, pkt.ecn_ce, now);
                if out.delivered {
                    new_bytes = size;
                }
                rx_complete = rx.is_complete();
                let mk = |kind, psn| {
                    let mut r = Packet::control(kind, f, h, pkt.src, CONTROL_BYTES);
                    r.entropy = tx.entropy;
                    r.psn = psn;
                    r
                };
                if out.cnp {
                    replies[0] = Some(mk(PacketKind::Cnp, pkt.psn));
                }
                if let Some(e) = out.nack {
                    replies[1] = Some(mk(PacketKind::Nack, e));
                }
                if let Some(e) = out.ack {
                    replies[2] = Some(mk(PacketKind::Sack, e));
                }
            }
        }
        if new_bytes > 0 {
            self.tput.record(msg_id, now, new_bytes);
        }
        if rx_complete {
            self.flow_rx_complete(f);
        }
        for r in replies.into_iter().flatten() {
            if r.kind == PacketKind::Cnp {
                self.stats.cnps += 1;
                self.log(EventKind::Cnp, h, 0, Some(f), Some(pkt.psn));
            }
            self.nodes[h as usize].ports[0].ctrl.push_back(r);
        }
        self.host_try_send(h);
    }

    // ---- switches and links ----

    fn start_tx(&mut self, node: NodeId, port: u16, pkt: Packet) {
        let now = self.now();
        let is_host = node < self.fat.hosts();
        let latency = self.fat.link_latency;
        let p = &mut self.nodes[node as usize].ports[port as usize];
        p.busy = true;
        let ser = SimTime::serialization(pkt.size_bytes as u64, p.rate);
        let (peer, peer_port, loss) = (p.peer, p.peer_port, p.loss_rate);
        self.sched.schedule(now + ser, Ev::TxDone { node, port });
        if pkt.is_data() {
            if is_host {
                self.cons.injected += pkt.size_bytes as u64;
                self.stats.data_pkts_sent += 1;
                if pkt.attempt > 0 {
                    self.stats.retransmitted_pkts += 1;
                    self.stats.retransmitted_bytes += pkt.size_bytes as u64;
                }
            }
            if loss > 0.0 && self.loss_rng.uniform(0.0, 1.0) < loss {
                self.stats.link_losses += 1;
                self.stats.link_lost_bytes += pkt.size_bytes as u64;
                self.cons.dropped += pkt.size_bytes as u64;
                self.flows[pkt.flow as usize].drops += 1;
                self.log(EventKind::LinkLoss, node, port, Some(pkt.flow), Some(pkt.psn));
                return;
            }
        }
        self.sched.schedule(
            now + ser + latency,
            Ev::Arrive {
                node: peer,
                port: peer_port,
                pkt,
            },
        );
    }

    fn send_pfc(&mut self, node: NodeId, action: PfcAction) {
        let (kind, port, ev) = match action {
            PfcAction::Pause(i) => (PacketKind::PfcPause, i, EventKind::PfcPause),
            PfcAction::Resume(i) => (PacketKind::PfcResume, i, EventKind::PfcResume),
        };
        if kind == PacketKind::PfcPause {
            self.stats.pfc_pauses += 1;
        } else {
            self.stats.pfc_resumes += 1;
        }
        self.log(ev, node, port, None, None);
        let peer = self.nodes[node as usize].ports[port as usize].peer;
        let frame = Packet::control(kind, 0, 0, peer, CONTROL_BYTES);
        self.nodes[node as usize].ports[port as usize].ctrl.push_back(frame);
        self.switch_try_send(node, port);
    }

    fn switch_receive(&mut self, node: NodeId, in_port: u16, pkt: Packet) {
        let now = self.now();
        if matches!(pkt.kind, PacketKind::PfcPause | PacketKind::PfcResume) {
            self.nodes[node as usize].ports[in_port as usize].paused = pkt.kind == PacketKind::PfcPause;
            self.switch_try_send(node, in_port);
            return;
        }
        let out = self.fat.route(node, pkt.flow, pkt.entropy, pkt.dst);
        if pkt.kind == PacketKind::Probe {
            self.nodes[node as usize].ports[out as usize]
                .data
                .enqueue_forced(pkt, in_port, now);
            self.switch_try_send(node, out);
            return;
        }
        if pkt.kind.is_control() {
            self.nodes[node as usize].ports[out as usize].ctrl.push_back(pkt);
            self.switch_try_send(node, out);
            return;
        }
        let size = pkt.size_bytes as u64;
        let p = &mut self.nodes[node as usize].ports[out as usize];
        self.sampler
            .on_enqueue(now, node, out, p.data.occupancy_bytes(), p.rate, pkt.size_bytes);
        if !p.data.admits(size) {
            let (flow, psn) = (pkt.flow, pkt.psn);
            self.stats.data_drops += 1;
            self.stats.dropped_bytes += size;
            self.cons.dropped += size;
            self.flows[flow as usize].drops += 1;
            self.log(EventKind::Drop, node, out, Some(flow), Some(psn));
            return;
        }
        p.data.enqueue(pkt, in_port, now);
        let action = self.nodes[node as usize]
            .buffer
            .as_mut()
            .and_then(|b| b.on_enqueue(in_port, size));
        if let Some(a) = action {
            self.send_pfc(node, a);
        }
        self.switch_try_send(node, out);
    }

    fn switch_try_send(&mut self, node: NodeId, port: u16) {
        let n = &mut self.nodes[node as usize];
        let p = &mut n.ports[port as usize];
        if p.busy {
            return;
        }
        if let Some(pkt) = p.ctrl.pop_front() {
            self.start_tx(node, port, pkt);
            return;
        }
        if p.paused {
            return;
        }
        let Some(q) = p.data.dequeue_and_mark(&mut p.mark_rng) else {
            return;
        };
        let mut actions = core::mem::take(&mut self.pfc_out);
        if let Some(b) = n.buffer.as_mut().filter(|_| q.pkt.is_data()) {
            b.on_dequeue(q.ingress, q.pkt.size_bytes as u64, &mut actions);
        }
        self.start_tx(node, port, q.pkt);
        for a in actions.drain(..) {
            self.send_pfc(node, a);
        }
        self.pfc_out = actions;
    }

    // ---- results ----

    fn finish(mut self) -> RunResult {
        let mut in_network = 0;
        for n in &self.nodes {
            for p in &n.ports {
                in_network += p
                    .data
                    .iter()
                    .filter(|q| q.pkt.is_data())
                    .map(|q| q.pkt.size_bytes as u64)
                    .sum::<u64>();
            }
            if let Some(b) = &n.buffer {
                self.stats.pfc_overcommit_peak = self.stats.pfc_overcommit_peak.max(b.overcommit_peak());
            }
        }
        for ev in self.sched.pending_payloads() {
            if let Ev::Arrive { pkt, .. } = ev {
                if pkt.is_data() {
                    in_network += pkt.size_bytes as u64;
                }
            }
        }
        self.cons.in_network = in_network;
        self.stats.events = self.sched.dispatched();
        self.stats.dispatch_hash = self.sched.dispatch_hash();

        let mut flows = Vec::with_capacity(self.msgs.len());
        for (i, m) in self.msgs.iter().enumerate() {
            let r = &self.trace.records[i];
            let (mut retx, mut drops) = (0, 0);
            for &f in &m.flows {
                let fl = &self.flows[f as usize];
                drops += fl.drops;
                retx += match &fl.ep {
                    Endpoint::Strack { tx, .. } => tx.stats().retransmitted_bytes,
                    Endpoint::Roce { tx, .. } => tx.stats().retransmitted_bytes,
                };
            }
            flows.push(FlowRecord {
                flow_id: m.flows.first().copied().unwrap_or(0),
                msg_id: r.msg_id,
                job_id: r.job_id,
                src: r.src,
                dst: r.dst,
                bytes: r.size_bytes,
                release_time: m.release.unwrap_or(SimTime::ZERO),
                first_send_time: m.first_send,
                completion_time: m.completion,
                delivered_time: m.delivered,
                retransmitted_bytes: retx,
                drops_experienced: drops,
            });
        }
        let jobs = jobs_from_flows(&flows);
        RunResult {
            flows,
            jobs,
            qdelay: self.sampler.samples,
            tput: self.tput,
            events: self.events,
            conservation: self.cons,
            stats: self.stats,
            end_time: self.sched.now(),
            net_base_rtt: self.fat.net_base_rtt,
            host_bps: self.fat.host_bps,
        }
    }
}

fn link_loss(cfg: &SimConfig, tor: u32, spine: u32) -> f64 {
    cfg.impairments
        .link_loss
        .iter()
        .filter(|l| l.tor == tor && l.spine == spine)
        .map(|l| l.rate)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::topology::TopologySpec;
    use crate::sim::{run, LinkLoss, TransportKind, WorkloadSpec};
    use crate::workload::{ByteSize, MessageRecord};

    fn msg(msg_id: MsgId, src: HostId, dst: HostId, size_bytes: u64, depends_on: Vec<MsgId>) -> MessageRecord {
        MessageRecord {
            msg_id,
            src,
            dst,
            size_bytes,
            depends_on,
            job_id: 0,
        }
    }

    fn cfg(t: TransportKind, records: Vec<MessageRecord>) -> SimConfig {
        SimConfig::new(t, TopologySpec::new(16, 2, 8), WorkloadSpec::Trace { records })
    }

    const ALL: [TransportKind; 3] = [
        TransportKind::Strack,
        TransportKind::StrackObliviousSpray,
        TransportKind::Rocev2,
    ];

    #[test]
    fn lone_message_runs_near_line_rate() {
        let size = 4_000_000u64;
        for t in ALL {
            let r = run(cfg(t, vec![msg(0, 0, 9, size, vec![])])).unwrap();
            let fct = r.max_fct().unwrap().as_secs_f64();
            let ideal = size as f64 * 8.0 / 400e9 + 8e-6;
            assert!(fct >= ideal * 0.99 && fct <= ideal * 1.05, "{t:?}: {fct} vs {ideal}");
            assert_eq!(r.stats.recoveries(), 0);
            assert_eq!(r.stats.probes, 0);
        }
    }

    #[test]
    fn incast_conserves_bytes_for_every_transport() {
        for t in ALL {
            let mut c = cfg(t, vec![]);
            c.workload = WorkloadSpec::Incast {
                fanin: 12,
                dst: 0,
                size: ByteSize(1_000_000),
                spread: true,
            };
            let r = run(c).unwrap();
            assert!(r.conservation.balances(), "{t:?}: {:?}", r.conservation);
            assert_eq!(r.conservation.in_network, 0);
            assert_eq!(r.flows.len(), 12);
            assert!(r
                .flows
                .iter()
                .all(|f| f.completion_time.is_some() && f.delivered_time.is_some()));
            assert_eq!(r.stats.cwnd_violations, 0);
            assert_eq!(r.stats.marked_entropy_picks, 0);
        }
    }

    #[test]
    fn rocev2_incast_is_lossless() {
        let mut c = cfg(TransportKind::Rocev2, vec![]);
        c.workload = WorkloadSpec::Incast {
            fanin: 15,
            dst: 3,
            size: ByteSize(2_000_000),
            spread: true,
        };
        let r = run(c).unwrap();
        assert_eq!(r.stats.data_drops, 0);
        assert!(r.stats.pfc_pauses > 0);
        assert_eq!(r.stats.pfc_pauses, r.stats.pfc_resumes);
    }

    #[test]
    fn same_seed_same_dispatch_order() {
        let mk = || {
            let mut c = cfg(TransportKind::Strack, vec![]);
            c.workload = WorkloadSpec::Permutation {
                size: ByteSize(500_000),
            };
            c.impairments.link_loss.push(LinkLoss {
                tor: 0,
                spine: 1,
                rate: 0.01,
            });
            c
        };
        let a = run(mk()).unwrap();
        let b = run(mk()).unwrap();
        assert_eq!(a.stats, b.stats);
        assert_eq!(a.flows, b.flows);
        let mut c = mk();
        c.seed = 2;
        let c = run(c).unwrap();
        assert_ne!(a.stats.dispatch_hash, c.stats.dispatch_hash);
    }

    #[test]
    fn dependents_release_on_completion() {
        let recs = vec![
            msg(0, 0, 9, 200_000, vec![]),
            msg(1, 9, 3, 200_000, vec![0]),
            msg(2, 3, 12, 200_000, vec![0, 1]),
        ];
        for t in ALL {
            let r = run(cfg(t, recs.clone())).unwrap();
            let f = &r.flows;
            assert_eq!(f[0].release_time, SimTime::ZERO);
            assert_eq!(f[1].release_time, f[0].completion_time.unwrap());
            assert_eq!(f[2].release_time, f[1].completion_time.unwrap());
            assert!(f[2].first_send_time.unwrap() >= f[2].release_time);
        }
    }

    #[test]
    fn link_loss_is_repaired() {
        for t in [TransportKind::Strack, TransportKind::Rocev2] {
            let mut c = cfg(t, vec![]);
            c.workload = WorkloadSpec::Permutation {
                size: ByteSize(1_000_000),
            };
            for s in 0..8 {
                c.impairments.link_loss.push(LinkLoss {
                    tor: 0,
                    spine: s,
                    rate: 0.02,
                });
            }
            let r = run(c).unwrap();
            assert!(r.stats.link_losses > 0, "{t:?}");
            assert!(r.stats.retransmitted_pkts >= r.stats.link_losses, "{t:?}");
            assert!(r.conservation.balances());
        }
    }

    #[test]
    fn lost_sacks_are_survived() {
        let mut c = cfg(TransportKind::Strack, vec![msg(0, 0, 9, 2_000_000, vec![])]);
        c.impairments.sack_loss_rate = 0.3;
        let r = run(c).unwrap();
        assert!(r.stats.sack_losses > 0);
        assert!(r.flows[0].completion_time.is_some());
    }

    #[test]
    fn time_limit_is_enforced() {
        let mut c = cfg(TransportKind::Strack, vec![msg(0, 0, 9, 100_000_000, vec![])]);
        c.time_limit_ms = 0.1;
        match run(c) {
            Err(SimError::TimeLimit { incomplete, .. }) => assert_eq!(incomplete, 1),
            other => panic!("expected a time limit, got {:?}", other.map(|r| r.end_time)),
        }
    }

    #[test]
    fn empty_message_is_rejected() {
        let r = run(cfg(TransportKind::Strack, vec![msg(0, 1, 2, 0, vec![])]));
        assert!(matches!(r, Err(SimError::Config(_))));
    }
}
