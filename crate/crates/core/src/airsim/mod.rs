//! Deterministic discrete-event radio simulation.
//!
//! A single event queue ordered by (time, insertion order) drives frame
//! deliveries, delayed transmissions and device timers. Time is in
//! microseconds. Reception strength comes from a log-distance path-loss
//! model over 2-D positions; there is no fading, so a given scenario and
//! seed always produce the same log.

mod channel;
mod log;
mod snapshot;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::devices::{DeviceEvent, EndDevice, Initiator, Reaction};
use crate::wire::hexlog::HexLine;
use crate::wire::{
    decode_frame, encode_frame, is_valid_channel, AckFrame, ExtendedAddr, Frame, WireError,
};

pub use channel::{PathLossModel, Position};
pub use log::LogRecord;
pub use snapshot::DeviceSnapshot;

/// Simulated time in microseconds.
pub type SimTime = u64;

/// Airtime per encoded byte at 250 kbit/s.
pub const AIRTIME_US_PER_BYTE: u64 = 32;
/// Fixed propagation delay added to every delivery.
pub const PROPAGATION_DELAY_US: u64 = 1;
/// Receive-to-transmit turnaround of a hardware MAC (12 symbols).
pub const ACK_TURNAROUND_US: u64 = 192;

/// Base of the extended addresses assigned to simulated nodes.
const EXTENDED_ADDR_BASE: u64 = 0x0012_4B00_0000_0000;

pub fn airtime_us(len: usize) -> u64 {
    AIRTIME_US_PER_BYTE * len as u64
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("channel {0} is outside 11..=26")]
    InvalidChannel(u8),
    #[error("frame encoding failed: {0}")]
    Wire(#[from] WireError),
    #[error("no node {0}")]
    UnknownNode(NodeId),
}

/// Radio behavior of an attacker node: promiscuous capture and an optional
/// (usually too slow) software acknowledgment path.
#[derive(Clone, Debug, Default)]
pub struct AttackerRadio {
    pub ack_latency_us: Option<u64>,
}

#[derive(Clone, Debug)]
pub enum Role {
    EndDevice(EndDevice),
    Initiator(Initiator),
    Attacker(AttackerRadio),
}

/// A frame as heard by a node.
#[derive(Clone, Debug, PartialEq)]
pub struct Received {
    pub at: SimTime,
    pub channel: u8,
    pub rssi_dbm: f64,
    pub frame: Frame,
}

#[derive(Clone, Debug)]
pub struct Node {
    pub name: String,
    pub position: Position,
    pub tx_power_dbm: f64,
    pub channel: u8,
    pub extended_addr: ExtendedAddr,
    pub role: Role,
    /// Frames kept for the node's driver: everything heard for attackers,
    /// addressed or broadcast frames for initiators.
    pub inbox: Vec<Received>,
    /// Whether an initiator's MAC acknowledges frames addressed to it.
    pub auto_ack: bool,
}

impl Node {
    fn ack_latency(&self) -> Option<u64> {
        match &self.role {
            Role::EndDevice(d) => (!d.factory_new).then_some(ACK_TURNAROUND_US),
            Role::Initiator(i) => {
                (self.auto_ack && !i.is_factory_new()).then_some(ACK_TURNAROUND_US)
            }
            Role::Attacker(r) => r.ack_latency_us,
        }
    }
}

#[derive(Clone, Debug)]
enum Event {
    Deliver {
        to: NodeId,
        channel: u8,
        rssi_dbm: f64,
        bytes: Arc<[u8]>,
    },
    Transmit {
        from: NodeId,
        channel: u8,
        frame: Frame,
    },
    Wake {
        node: NodeId,
    },
}

#[derive(Clone, Debug)]
struct Scheduled {
    at: SimTime,
    order: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.order) == (other.at, other.order)
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed so the max-heap pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.order).cmp(&(self.at, self.order))
    }
}

pub struct Simulation {
    now: SimTime,
    model: PathLossModel,
    nodes: Vec<Node>,
    queue: BinaryHeap<Scheduled>,
    next_order: u64,
    log: Vec<LogRecord>,
    rng: ChaCha8Rng,
}

impl Simulation {
    pub fn new(model: PathLossModel, seed: u64) -> Self {
        Simulation {
            now: 0,
            model,
            nodes: Vec::new(),
            queue: BinaryHeap::new(),
            next_order: 0,
            log: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn model(&self) -> &PathLossModel {
        &self.model
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Fresh nonzero 32-bit transaction identifier.
    pub fn random_transaction_id(&mut self) -> u32 {
        loop {
            let id = self.rng.next_u32();
            if id != 0 {
                return id;
            }
        }
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    pub fn log_text(&self) -> String {
        let mut out = String::new();
        for record in &self.log {
            out.push_str(&record.to_string());
            out.push('\n');
        }
        out
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.log.push(LogRecord::Note {
            at: self.now,
            text: text.into(),
        });
    }

    pub fn add_node(
        &mut self,
        name: impl Into<String>,
        position: Position,
        tx_power_dbm: f64,
        mut role: Role,
    ) -> NodeId {
        let id = NodeId(self.nodes.len());
        let extended_addr = ExtendedAddr(EXTENDED_ADDR_BASE + id.0 as u64 + 1);
        let channel = match &mut role {
            Role::EndDevice(d) => {
                d.extended_addr = extended_addr;
                d.channel()
            }
            Role::Initiator(i) => {
                i.extended_addr = extended_addr;
                i.net
                    .as_ref()
                    .map_or(crate::devices::FACTORY_NEW_CHANNEL, |n| n.channel)
            }
            Role::Attacker(_) => crate::wire::PRIMARY_CHANNELS[0],
        };
        self.nodes.push(Node {
            name: name.into(),
            position,
            tx_power_dbm,
            channel,
            extended_addr,
            role,
            inbox: Vec::new(),
            auto_ack: true,
        });
        id
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Node)> {
        self.nodes.iter().enumerate().map(|(i, n)| (NodeId(i), n))
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut Node {
        &mut self.nodes[id.0]
    }

    pub fn find_by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name).map(NodeId)
    }

    pub fn find_by_extended(&self, addr: ExtendedAddr) -> Option<NodeId> {
        self.nodes
            .iter()
            .position(|n| n.extended_addr == addr)
            .map(NodeId)
    }

    pub fn end_device(&self, id: NodeId) -> Option<&EndDevice> {
        match &self.nodes.get(id.0)?.role {
            Role::EndDevice(d) => Some(d),
            _ => None,
        }
    }

    pub fn end_device_mut(&mut self, id: NodeId) -> Option<&mut EndDevice> {
        match &mut self.nodes.get_mut(id.0)?.role {
            Role::EndDevice(d) => Some(d),
            _ => None,
        }
    }

    pub fn initiator(&self, id: NodeId) -> Option<&Initiator> {
        match &self.nodes.get(id.0)?.role {
            Role::Initiator(i) => Some(i),
            _ => None,
        }
    }

    pub fn initiator_mut(&mut self, id: NodeId) -> Option<&mut Initiator> {
        match &mut self.nodes.get_mut(id.0)?.role {
            Role::Initiator(i) => Some(i),
            _ => None,
        }
    }

    /// Re-derives a device node's listening channel from its state. Call
    /// after mutating device state outside the event loop.
    pub fn sync_channel(&mut self, id: NodeId) {
        if let Role::EndDevice(d) = &self.nodes[id.0].role {
            self.nodes[id.0].channel = d.channel();
        }
    }

    pub fn rssi_between(&self, from: NodeId, to: NodeId) -> f64 {
        let a = &self.nodes[from.0];
        let b = &self.nodes[to.0];
        self.model
            .rssi(a.tx_power_dbm, a.position.distance(&b.position))
    }

    pub fn snapshot(&self, id: NodeId) -> Option<DeviceSnapshot> {
        DeviceSnapshot::of(&self.nodes[id.0], self.now)
    }

    fn schedule(&mut self, at: SimTime, event: Event) {
        let order = self.next_order;
        self.next_order += 1;
        self.queue.push(Scheduled { at, order, event });
    }

    /// Puts `frame` on the air now; every other node listening on `channel`
    /// with a received strength at or above the noise floor gets a delivery
    /// after propagation plus airtime. Returns the number of deliveries.
    pub fn transmit(
        &mut self,
        from: NodeId,
        channel: u8,
        frame: &Frame,
    ) -> Result<usize, SimError> {
        if from.0 >= self.nodes.len() {
            return Err(SimError::UnknownNode(from));
        }
        if !is_valid_channel(channel) {
            return Err(SimError::InvalidChannel(channel));
        }
        let bytes: Arc<[u8]> = encode_frame(frame)?.into();
        let src = &self.nodes[from.0];
        self.log.push(LogRecord::Tx {
            at: self.now,
            node: from,
            name: src.name.clone(),
            channel,
            label: frame.label(),
            len: bytes.len(),
        });
        let at = self.now + PROPAGATION_DELAY_US + airtime_us(bytes.len());
        let mut deliveries = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if i == from.0 || node.channel != channel {
                continue;
            }
            let rssi_dbm = self
                .model
                .rssi(src.tx_power_dbm, src.position.distance(&node.position));
            if rssi_dbm < self.model.noise_floor_dbm {
                continue;
            }
            deliveries.push((NodeId(i), rssi_dbm));
        }
        let count = deliveries.len();
        for (to, rssi_dbm) in deliveries {
            self.schedule(
                at,
                Event::Deliver {
                    to,
                    channel,
                    rssi_dbm,
                    bytes: bytes.clone(),
                },
            );
        }
        Ok(count)
    }

    /// Schedules `frame` for transmission `delay_us` from now.
    pub fn transmit_later(&mut self, from: NodeId, channel: u8, frame: Frame, delay_us: u64) {
        self.schedule(
            self.now + delay_us,
            Event::Transmit {
                from,
                channel,
                frame,
            },
        );
    }

    /// Processes every event due at or before `t_end` and returns the log
    /// records appended meanwhile.
    pub fn run_until(&mut self, t_end: SimTime) -> &[LogRecord] {
        let start = self.log.len();
        while self.queue.peek().is_some_and(|e| e.at <= t_end) {
            let Scheduled { at, event, .. } = self.queue.pop().expect("peeked");
            self.now = self.now.max(at);
            self.dispatch(event);
        }
        self.now = self.now.max(t_end);
        &self.log[start..]
    }

    pub fn advance(&mut self, duration_us: u64) -> &[LogRecord] {
        self.run_until(self.now + duration_us)
    }

    fn dispatch(&mut self, event: Event) {
        match event {
            Event::Transmit {
                from,
                channel,
                frame,
            } => {
                if let Err(e) = self.transmit(from, channel, &frame) {
                    self.note(format!(
                        "transmit from {} failed: {e}",
                        self.nodes[from.0].name
                    ));
                }
            }
            Event::Wake { node } => {
                let now = self.now;
                let reaction = match &mut self.nodes[node.0].role {
                    Role::EndDevice(d) => d.on_wake(now),
                    Role::Initiator(i) => i.on_wake(now),
                    Role::Attacker(_) => Reaction::default(),
                };
                self.apply(node, reaction);
            }
            Event::Deliver {
                to,
                channel,
                rssi_dbm,
                bytes,
            } => self.deliver(to, channel, rssi_dbm, &bytes),
        }
    }

    fn deliver(&mut self, to: NodeId, channel: u8, rssi_dbm: f64, bytes: &[u8]) {
        let now = self.now;
        if self.nodes[to.0].channel != channel {
            return;
        }
        let frame = match decode_frame(bytes) {
            Ok(f) => f,
            Err(e) => {
                self.note(format!(
                    "undecodable frame at {}: {e}",
                    self.nodes[to.0].name
                ));
                return;
            }
        };
        self.log.push(LogRecord::Frame(HexLine {
            time_us: now,
            channel,
            rssi_dbm,
            bytes: bytes.to_vec(),
        }));

        let node = &mut self.nodes[to.0];
        if let Some(header) = frame.header() {
            if header.ack_requested && header.dst_extended == Some(node.extended_addr) {
                if let Some(latency) = node.ack_latency() {
                    let ack = Frame::Ack(AckFrame {
                        sequence_number: header.sequence_number,
                    });
                    self.transmit_later(to, channel, ack, latency);
                }
            }
        }

        let node = &mut self.nodes[to.0];
        let received = Received {
            at: now,
            channel,
            rssi_dbm,
            frame: frame.clone(),
        };
        let reaction = match &mut node.role {
            Role::EndDevice(d) => d.handle_frame(&frame, rssi_dbm, now, &mut self.rng),
            Role::Initiator(i) => {
                let for_me = frame.header().is_some_and(|h| {
                    h.is_broadcast() || h.dst_extended == Some(node.extended_addr)
                });
                if for_me {
                    node.inbox.push(received);
                }
                i.handle_frame(&frame, rssi_dbm, now, &mut self.rng)
            }
            Role::Attacker(_) => {
                node.inbox.push(received);
                Reaction::default()
            }
        };
        self.apply(to, reaction);
    }

    fn apply(&mut self, id: NodeId, reaction: Reaction) {
        let now = self.now;
        for t in reaction.transmissions {
            self.transmit_later(id, t.channel, t.frame, t.delay_us);
        }
        for at in reaction.wake_at {
            self.schedule(at.max(now), Event::Wake { node: id });
        }
        let name = self.nodes[id.0].name.clone();
        for event in reaction.events {
            let record = match event {
                DeviceEvent::Dropped { reason, .. } if reason.is_filtering() => continue,
                DeviceEvent::Dropped { frame, reason } => LogRecord::Drop {
                    at: now,
                    node: id,
                    name: name.clone(),
                    frame,
                    reason,
                },
                DeviceEvent::Changed(change) => LogRecord::State {
                    at: now,
                    node: id,
                    name: name.clone(),
                    change,
                },
                DeviceEvent::Applied { src, command } => LogRecord::Applied {
                    at: now,
                    node: id,
                    name: name.clone(),
                    src,
                    command,
                },
            };
            self.log.push(record);
        }
        self.sync_channel(id);
    }
}
