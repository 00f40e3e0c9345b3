//! Initiator-side procedures: touchlink join, the Hue bridge recovery
//! path, and ordinary user commands.

use thiserror::Error;

use super::{DropReason, NetworkParams};
use crate::airsim::{LogRecord, NodeId, SimError, SimTime, Simulation};
use crate::crypto::{wrap_network_key, TransactionContext};
use crate::wire::{
    ClusterCommand, ExtendedAddr, Frame, MacHeader, ScanResponse, ShortAddr, TouchlinkCommand,
    IDENTIFY_DEFAULT, IDENTIFY_STOP, JOIN_STATUS_SUCCESS, KEY_INDEX_MASTER, PRIMARY_CHANNELS,
};

/// Listen time after each scan request.
pub const SCAN_DWELL_US: u64 = 250_000;
/// Pause between consecutive unicast touchlink requests.
pub const COMMAND_GAP_US: u64 = 10_000;
/// How long the initiator waits for a join response.
pub const JOIN_WAIT_US: u64 = 50_000;
/// Settling time after a network-layer command.
pub const COMMAND_SETTLE_US: u64 = 5_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CommissioningError {
    #[error("node is not an initiator")]
    NotInitiator,
    #[error("initiator has no network")]
    NotJoined,
    #[error("no touchlink target answered the scan")]
    NoDeviceFound,
    #[error("target did not receive a MAC acknowledgment in time")]
    AckTimeout,
    #[error("join refused (status {status:?})")]
    JoinRefused { status: Option<u8> },
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Which scan respondent the initiator selects.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum TargetFilter {
    Any,
    FactoryNew,
    Extended(ExtendedAddr),
}

impl TargetFilter {
    fn accepts(&self, addr: ExtendedAddr, rsp: &ScanResponse) -> bool {
        match self {
            TargetFilter::Any => true,
            TargetFilter::FactoryNew => rsp.factory_new,
            TargetFilter::Extended(want) => *want == addr,
        }
    }
}

/// A scan respondent.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub extended_addr: ExtendedAddr,
    pub channel: u8,
    pub rssi_dbm: f64,
    pub response: ScanResponse,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Direction {
    Sent,
    Received,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExchangedFrame {
    pub at: SimTime,
    pub direction: Direction,
    pub frame: Frame,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JoinReport {
    pub target: ExtendedAddr,
    pub target_node: Option<NodeId>,
    pub transaction_id: u32,
    pub response_id: u32,
    pub short_addr: ShortAddr,
    pub frames: Vec<ExchangedFrame>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryReport {
    pub target: ExtendedAddr,
    pub before: NetworkParams,
    pub after: NetworkParams,
    /// True when the bridge took over the target's newer network settings.
    pub adopted_target_settings: bool,
    pub join: Option<JoinReport>,
}

/// Result of one user command sent by an initiator.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CommandDelivery {
    pub applied_by: Vec<NodeId>,
    pub drops: Vec<(NodeId, DropReason)>,
}

struct Driver {
    node: NodeId,
    ext: ExtendedAddr,
    frames: Vec<ExchangedFrame>,
}

impl Driver {
    fn new(sim: &Simulation, node: NodeId) -> Result<Self, CommissioningError> {
        sim.initiator(node)
            .ok_or(CommissioningError::NotInitiator)?;
        Ok(Driver {
            node,
            ext: sim.node(node).extended_addr,
            frames: Vec::new(),
        })
    }

    fn net(&self, sim: &Simulation) -> Result<NetworkParams, CommissioningError> {
        sim.initiator(self.node)
            .and_then(|i| i.net.clone())
            .ok_or(CommissioningError::NotJoined)
    }

    fn seq(&self, sim: &mut Simulation) -> u8 {
        sim.initiator_mut(self.node).expect("initiator").next_seq()
    }

    fn send(&mut self, sim: &mut Simulation, frame: Frame) -> Result<(), CommissioningError> {
        let channel = sim.node(self.node).channel;
        sim.transmit(self.node, channel, &frame)?;
        self.frames.push(ExchangedFrame {
            at: sim.now(),
            direction: Direction::Sent,
            frame,
        });
        Ok(())
    }

    fn unicast(
        &mut self,
        sim: &mut Simulation,
        dst: ExtendedAddr,
        command: TouchlinkCommand,
    ) -> Result<(), CommissioningError> {
        let seq = self.seq(sim);
        self.send(
            sim,
            Frame::InterPan {
                header: MacHeader::inter_pan_unicast(seq, self.ext, dst, false),
                command,
            },
        )
    }

    /// Collects inbox entries from `mark` on into the exchange record.
    fn collect(&mut self, sim: &Simulation, mark: usize) -> Vec<(u8, f64, Frame)> {
        let inbox = &sim.node(self.node).inbox[mark..];
        let mut out = Vec::new();
        for r in inbox {
            if r.frame.touchlink().is_some() {
                self.frames.push(ExchangedFrame {
                    at: r.at,
                    direction: Direction::Received,
                    frame: r.frame.clone(),
                });
                out.push((r.channel, r.rssi_dbm, r.frame.clone()));
            }
        }
        out
    }

    fn scan(
        &mut self,
        sim: &mut Simulation,
        transaction_id: u32,
        filter: TargetFilter,
    ) -> Result<Vec<Candidate>, CommissioningError> {
        let mut found = Vec::new();
        for channel in PRIMARY_CHANNELS {
            sim.node_mut(self.node).channel = channel;
            let mark = sim.node(self.node).inbox.len();
            let seq = self.seq(sim);
            self.send(
                sim,
                Frame::InterPan {
                    header: MacHeader::inter_pan_broadcast(seq, self.ext),
                    command: TouchlinkCommand::ScanRequest { transaction_id },
                },
            )?;
            sim.advance(SCAN_DWELL_US);
            for (ch, rssi_dbm, frame) in self.collect(sim, mark) {
                let Frame::InterPan {
                    header,
                    command: TouchlinkCommand::ScanResponse(rsp),
                } = frame
                else {
                    continue;
                };
                let Some(src) = header.src_extended else {
                    continue;
                };
                if rsp.transaction_id == transaction_id
                    && ch == channel
                    && filter.accepts(src, &rsp)
                    && !found.iter().any(|c: &Candidate| c.extended_addr == src)
                {
                    found.push(Candidate {
                        extended_addr: src,
                        channel,
                        rssi_dbm,
                        response: rsp,
                    });
                }
            }
        }
        Ok(found)
    }

    fn return_home(&self, sim: &mut Simulation) {
        if let Ok(net) = self.net(sim) {
            sim.node_mut(self.node).channel = net.channel;
        }
    }

    fn join(
        mut self,
        sim: &mut Simulation,
        transaction_id: u32,
        target: &Candidate,
    ) -> Result<JoinReport, CommissioningError> {
        let net = self.net(sim)?;
        let master = sim.initiator(self.node).expect("initiator").master_key;
        sim.node_mut(self.node).channel = target.channel;
        let mark = sim.node(self.node).inbox.len();
        let dst = target.extended_addr;

        self.unicast(
            sim,
            dst,
            TouchlinkCommand::DeviceInfoRequest { transaction_id },
        )?;
        sim.advance(COMMAND_GAP_US);
        self.unicast(
            sim,
            dst,
            TouchlinkCommand::IdentifyRequest {
                transaction_id,
                duration: IDENTIFY_DEFAULT,
            },
        )?;
        sim.advance(COMMAND_GAP_US);
        self.unicast(
            sim,
            dst,
            TouchlinkCommand::IdentifyRequest {
                transaction_id,
                duration: IDENTIFY_STOP,
            },
        )?;
        sim.advance(COMMAND_GAP_US);

        let ctx = TransactionContext::new(transaction_id, target.response.response_id, 0)
            .expect("scan transaction ids are nonzero");
        let encrypted_network_key =
            wrap_network_key(&master, &ctx, &net.network_key).expect("nonzero transaction id");
        let rejoining = !target.response.factory_new
            && target.response.extended_pan_id == net.extended_pan_id
            && !target.response.network_address.is_broadcast();
        let short_addr = if rejoining {
            target.response.network_address
        } else {
            sim.initiator_mut(self.node)
                .expect("initiator")
                .allocate_short_addr()
        };
        self.unicast(
            sim,
            dst,
            TouchlinkCommand::NetworkJoinEndDeviceRequest {
                transaction_id,
                extended_pan_id: net.extended_pan_id,
                key_index: KEY_INDEX_MASTER,
                encrypted_network_key,
                channel: net.channel,
                pan_id: net.pan_id,
                network_update_id: net.network_update_id,
                assigned_short_addr: short_addr,
            },
        )?;
        sim.advance(JOIN_WAIT_US);

        let status = self
            .collect(sim, mark)
            .into_iter()
            .find_map(|(_, _, f)| match f {
                Frame::InterPan {
                    header,
                    command:
                        TouchlinkCommand::NetworkJoinEndDeviceResponse {
                            transaction_id: tid,
                            status,
                        },
                } if tid == transaction_id && header.src_extended == Some(dst) => Some(status),
                _ => None,
            });
        self.return_home(sim);
        let target_node = sim.find_by_extended(dst);

        match status {
            Some(JOIN_STATUS_SUCCESS) => Ok(JoinReport {
                target: dst,
                target_node,
                transaction_id,
                response_id: target.response.response_id,
                short_addr,
                frames: self.frames,
            }),
            Some(other) => Err(CommissioningError::JoinRefused {
                status: Some(other),
            }),
            None if target_node.is_some_and(|n| ack_timed_out(sim, n, transaction_id)) => {
                Err(CommissioningError::AckTimeout)
            }
            None => Err(CommissioningError::JoinRefused { status: None }),
        }
    }
}

/// True if `node` logged an acknowledgment timeout for the transaction.
pub fn ack_timed_out(sim: &Simulation, node: NodeId, transaction_id: u32) -> bool {
    sim.log().iter().any(|r| {
        matches!(r, LogRecord::Drop { node: n, reason: DropReason::AckTimeout { transaction_id: t }, .. }
            if *n == node && *t == transaction_id)
    })
}

fn best(candidates: Vec<Candidate>) -> Option<Candidate> {
    candidates
        .into_iter()
        .reduce(|a, b| if b.rssi_dbm > a.rssi_dbm { b } else { a })
}

/// Full touchlink commissioning: scan the primary channels, pick the
/// strongest matching respondent, identify it and transfer the network key.
pub fn run_touchlink_join(
    sim: &mut Simulation,
    initiator: NodeId,
    filter: TargetFilter,
) -> Result<JoinReport, CommissioningError> {
    let mut driver = Driver::new(sim, initiator)?;
    driver.net(sim)?;
    let transaction_id = sim.random_transaction_id();
    let candidates = driver.scan(sim, transaction_id, filter);
    let candidates = match candidates {
        Ok(c) => c,
        Err(e) => {
            driver.return_home(sim);
            return Err(e);
        }
    };
    let Some(target) = best(candidates) else {
        driver.return_home(sim);
        return Err(CommissioningError::NoDeviceFound);
    };
    driver.join(sim, transaction_id, &target)
}

/// Touchlink a previously joined device back as a Hue bridge does: when the
/// device reports the bridge's own extended PAN with a newer update
/// identifier, the bridge adopts those settings instead of restoring the
/// device. Otherwise the device is rejoined to the bridge's network.
pub fn bridge_touchlink_recovery(
    sim: &mut Simulation,
    bridge: NodeId,
    filter: TargetFilter,
) -> Result<RecoveryReport, CommissioningError> {
    let mut driver = Driver::new(sim, bridge)?;
    let before = driver.net(sim)?;
    let transaction_id = sim.random_transaction_id();
    let candidates = match driver.scan(sim, transaction_id, filter) {
        Ok(c) => c,
        Err(e) => {
            driver.return_home(sim);
            return Err(e);
        }
    };
    let Some(target) = best(candidates) else {
        driver.return_home(sim);
        return Err(CommissioningError::NoDeviceFound);
    };
    let rsp = &target.response;
    if !rsp.factory_new
        && rsp.extended_pan_id == before.extended_pan_id
        && rsp.network_update_id > before.network_update_id
    {
        let mut after = before.clone();
        after.channel = rsp.channel;
        after.pan_id = rsp.pan_id;
        after.network_update_id = rsp.network_update_id;
        sim.initiator_mut(bridge).expect("initiator").net = Some(after.clone());
        sim.node_mut(bridge).channel = after.channel;
        sim.note(format!(
            "{} adopts channel={} update_id={}",
            sim.node(bridge).name,
            after.channel,
            after.network_update_id
        ));
        return Ok(RecoveryReport {
            target: target.extended_addr,
            before,
            after,
            adopted_target_settings: true,
            join: None,
        });
    }
    let join = driver.join(sim, transaction_id, &target)?;
    let after = sim
        .initiator(bridge)
        .and_then(|i| i.net.clone())
        .expect("initiator keeps its network");
    Ok(RecoveryReport {
        target: target.extended_addr,
        before,
        after,
        adopted_target_settings: false,
        join: Some(join),
    })
}

/// Sends one encrypted application command from an initiator's network and
/// reports which nodes applied it.
pub fn send_user_command(
    sim: &mut Simulation,
    initiator: NodeId,
    dst: ShortAddr,
    command: ClusterCommand,
) -> Result<CommandDelivery, CommissioningError> {
    let frame = sim
        .initiator_mut(initiator)
        .ok_or(CommissioningError::NotInitiator)?
        .seal_command(dst, command)
        .ok_or(CommissioningError::NotJoined)?;
    let channel = sim.node(initiator).channel;
    sim.transmit(initiator, channel, &frame)?;
    let mut delivery = CommandDelivery::default();
    for record in sim.advance(COMMAND_SETTLE_US) {
        match record {
            LogRecord::Applied { node, .. } => delivery.applied_by.push(*node),
            LogRecord::Drop { node, reason, .. } => delivery.drops.push((*node, *reason)),
            _ => {}
        }
    }
    Ok(delivery)
}
