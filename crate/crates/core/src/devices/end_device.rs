use std::collections::BTreeMap;

use rand::RngCore;

use super::*;
use crate::airsim::airtime_us;
use crate::crypto::{self, TransactionContext};
use crate::wire::{
    encode_frame, next_sequence, ExtendedAddr, MacHeader, ScanResponse, SecuredNwkFrame,
    SubDeviceRecord, TouchlinkCommand, BROADCAST_ENDPOINT, BROADCAST_PAN, JOIN_STATUS_SUCCESS,
    KEY_BIT_MASTER, KEY_INDEX_MASTER,
};

/// Acknowledgment a bulb waits for after sending a scan response.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct PendingAck {
    pub sequence_number: u8,
    pub transaction_id: u32,
    /// Latest delivery time at which the acknowledgment is accepted.
    pub deadline: SimTime,
}

/// A touchlink end device (light bulb).
#[derive(Clone, Debug)]
pub struct EndDevice {
    pub profile: VendorProfile,
    pub extended_addr: ExtendedAddr,
    pub master_key: Key128,
    pub factory_new: bool,
    pub net: Option<NetworkParams>,
    /// Listening channel while factory-new.
    pub idle_channel: u8,
    pub lamp: LampState,
    pub identify_started_at: Option<SimTime>,
    pub identify_until: Option<SimTime>,
    pub pending: Option<TransactionContext>,
    pub awaiting_ack: Option<PendingAck>,
    pub rx_frame_counters: BTreeMap<ShortAddr, u32>,
    sequence: u8,
}

/// Checks a touchlink request against the pending transaction.
pub(crate) fn bind_transaction(
    pending: &mut Option<TransactionContext>,
    awaiting_ack: Option<&PendingAck>,
    transaction_id: u32,
    now: SimTime,
) -> Result<TransactionContext, DropReason> {
    let ctx = pending.ok_or(DropReason::NoTransaction)?;
    if ctx.transaction_id != transaction_id {
        return Err(DropReason::TransactionMismatch);
    }
    if !ctx.is_live(now) {
        *pending = None;
        return Err(DropReason::TransactionExpired);
    }
    if awaiting_ack.is_some_and(|a| a.transaction_id == transaction_id) {
        return Err(DropReason::AwaitingAck);
    }
    Ok(ctx)
}

/// True when a unicast inter-PAN frame is for `me`, or the frame is broadcast.
pub(crate) fn addressed_to(header: &MacHeader, me: ExtendedAddr) -> bool {
    match header.dst_extended {
        Some(dst) => dst == me,
        None => header.is_broadcast(),
    }
}

/// Builds the scan response a touchlink target sends and opens a transaction.
#[allow(clippy::too_many_arguments)]
pub(crate) fn answer_scan(
    request: &MacHeader,
    transaction_id: u32,
    me: ExtendedAddr,
    net: Option<&NetworkParams>,
    channel: u8,
    sequence: u8,
    ack_requested: bool,
    now: SimTime,
    rng: &mut dyn RngCore,
) -> Result<(Frame, TransactionContext), DropReason> {
    let requester = request.src_extended.ok_or(DropReason::MissingSource)?;
    let response_id = rng.next_u32();
    let ctx = TransactionContext {
        transaction_id,
        response_id,
        expires_at: now + TRANSACTION_LIFETIME_US,
    };
    let response = ScanResponse {
        transaction_id,
        response_id,
        key_bitmask: KEY_BIT_MASTER,
        network_update_id: net.map_or(0, |n| n.network_update_id),
        channel,
        pan_id: net.map_or(BROADCAST_PAN, |n| n.pan_id),
        extended_pan_id: net.map_or(0, |n| n.extended_pan_id),
        network_address: net.map_or(crate::wire::BROADCAST_SHORT, |n| n.short_addr),
        factory_new: net.is_none(),
        sub_device_count: 1,
    };
    let frame = Frame::InterPan {
        header: MacHeader::inter_pan_unicast(sequence, me, requester, ack_requested),
        command: TouchlinkCommand::ScanResponse(response),
    };
    Ok((frame, ctx))
}

fn frame_airtime(frame: &Frame) -> u64 {
    encode_frame(frame).map_or(0, |b| airtime_us(b.len()))
}

impl EndDevice {
    /// A factory-new bulb provisioned with the light-link master key.
    pub fn new(kind: ProfileKind, master_key: Key128) -> Self {
        EndDevice {
            profile: kind.profile(),
            extended_addr: ExtendedAddr(0),
            master_key,
            factory_new: true,
            net: None,
            idle_channel: FACTORY_NEW_CHANNEL,
            lamp: LampState::DEFAULT,
            identify_started_at: None,
            identify_until: None,
            pending: None,
            awaiting_ack: None,
            rx_frame_counters: BTreeMap::new(),
            sequence: 0,
        }
    }

    /// A bulb already joined to `net`.
    pub fn joined(kind: ProfileKind, master_key: Key128, net: NetworkParams) -> Self {
        let mut dev = EndDevice::new(kind, master_key);
        dev.factory_new = false;
        dev.net = Some(net);
        dev
    }

    /// Channel the radio currently listens on.
    pub fn channel(&self) -> u8 {
        self.net.as_ref().map_or(self.idle_channel, |n| n.channel)
    }

    pub fn is_identifying(&self, now: SimTime) -> bool {
        self.identify_until.is_some_and(|until| now < until)
    }

    fn next_seq(&mut self) -> u8 {
        self.sequence = next_sequence(self.sequence);
        self.sequence
    }

    fn wipe(&mut self) {
        self.factory_new = true;
        self.net = None;
        self.lamp = LampState::DEFAULT;
        self.identify_started_at = None;
        self.identify_until = None;
        self.pending = None;
        self.awaiting_ack = None;
        self.rx_frame_counters.clear();
    }

    fn end_identify(&mut self, reaction: &mut Reaction) {
        self.identify_started_at = None;
        self.identify_until = None;
        if self.profile.blink_aftermath == BlinkAftermath::DefaultState {
            self.lamp = LampState::DEFAULT;
        }
        reaction.changed("identify ended");
    }

    /// Handles a delivered frame; `rssi_dbm` is the RSSI at this device's antenna.
    pub fn handle_frame(
        &mut self,
        frame: &Frame,
        rssi_dbm: f64,
        now: SimTime,
        rng: &mut dyn RngCore,
    ) -> Reaction {
        match frame {
            Frame::Ack(ack) => self.handle_ack(frame, ack.sequence_number, now),
            Frame::InterPan { header, command } => {
                if !addressed_to(header, self.extended_addr) {
                    return Reaction::drop(frame, DropReason::NotAddressed);
                }
                if !self.profile.accepts_touchlink_rssi(rssi_dbm) {
                    return Reaction::drop(frame, DropReason::RssiBelowThreshold);
                }
                self.handle_touchlink(frame, header, command, now, rng)
            }
            Frame::Network { header, payload } => self.handle_secured(frame, header, payload, now),
        }
    }

    fn handle_ack(&mut self, frame: &Frame, sequence_number: u8, now: SimTime) -> Reaction {
        let Some(pending_ack) = self.awaiting_ack else {
            return Reaction::drop(frame, DropReason::NotAddressed);
        };
        if pending_ack.sequence_number != sequence_number {
            return Reaction::drop(frame, DropReason::NotAddressed);
        }
        self.awaiting_ack = None;
        if now <= pending_ack.deadline {
            let mut r = Reaction::default();
            r.changed(format!(
                "ack accepted tid=0x{:08x}",
                pending_ack.transaction_id
            ));
            r
        } else {
            self.pending = None;
            Reaction::drop(
                frame,
                DropReason::AckTimeout {
                    transaction_id: pending_ack.transaction_id,
                },
            )
        }
    }

    fn handle_touchlink(
        &mut self,
        frame: &Frame,
        header: &MacHeader,
        command: &TouchlinkCommand,
        now: SimTime,
        rng: &mut dyn RngCore,
    ) -> Reaction {
        use TouchlinkCommand::*;

        if let ScanRequest { transaction_id } = command {
            let seq = self.next_seq();
            let ack = self.profile.requires_mac_ack;
            let (response, ctx) = match answer_scan(
                header,
                *transaction_id,
                self.extended_addr,
                self.net.as_ref(),
                self.channel(),
                seq,
                ack,
                now,
                rng,
            ) {
                Ok(v) => v,
                Err(reason) => return Reaction::drop(frame, reason),
            };
            let mut r = Reaction::default();
            self.pending = Some(ctx);
            self.awaiting_ack = None;
            r.wake_at.push(ctx.expires_at + 1);
            if ack {
                let tx_end = now + RESPONSE_DELAY_US + frame_airtime(&response);
                let deadline = tx_end + self.profile.ack_deadline_us;
                self.awaiting_ack = Some(PendingAck {
                    sequence_number: seq,
                    transaction_id: *transaction_id,
                    deadline,
                });
                r.wake_at.push(deadline + 1);
            }
            r.transmissions.push(Transmission {
                frame: response,
                delay_us: RESPONSE_DELAY_US,
                channel: self.channel(),
            });
            return r;
        }

        // Responses belong to initiators.
        if matches!(
            command,
            ScanResponse(_) | DeviceInfoResponse { .. } | NetworkJoinEndDeviceResponse { .. }
        ) {
            return Reaction::drop(frame, DropReason::Unsupported);
        }

        let ctx = match bind_transaction(
            &mut self.pending,
            self.awaiting_ack.as_ref(),
            command.transaction_id(),
            now,
        ) {
            Ok(ctx) => ctx,
            Err(reason) => return Reaction::drop(frame, reason),
        };
        let requester = header.src_extended;
        let mut r = Reaction::default();

        match command {
            DeviceInfoRequest { transaction_id } => {
                let Some(dst) = requester else {
                    return Reaction::drop(frame, DropReason::MissingSource);
                };
                let seq = self.next_seq();
                r.transmissions.push(Transmission {
                    frame: Frame::InterPan {
                        header: MacHeader::inter_pan_unicast(seq, self.extended_addr, dst, false),
                        command: DeviceInfoResponse {
                            transaction_id: *transaction_id,
                            sub_device_records: vec![SubDeviceRecord {
                                extended_addr: self.extended_addr,
                                endpoint: LIGHT_ENDPOINT,
                                device_id: LIGHT_DEVICE_ID,
                            }],
                        },
                    },
                    delay_us: RESPONSE_DELAY_US,
                    channel: self.channel(),
                });
            }
            IdentifyRequest { duration, .. } => {
                match self.profile.effective_identify_s(*duration) {
                    Some(secs) => {
                        let until = now + u64::from(secs) * MICROS_PER_SECOND;
                        self.identify_started_at = Some(now);
                        self.identify_until = Some(until);
                        r.wake_at.push(until);
                        r.changed(format!("identify for {secs} s until {until}"));
                    }
                    None => {
                        if self.identify_until.is_some() {
                            self.end_identify(&mut r);
                        }
                    }
                }
            }
            ResetToFactoryNewRequest { .. } => {
                self.wipe();
                r.changed("reset to factory-new");
            }
            NetworkUpdateRequest {
                extended_pan_id,
                network_update_id,
                channel,
                pan_id,
                short_addr,
                ..
            } => {
                let Some(net) = self.net.as_mut() else {
                    return Reaction::drop(frame, DropReason::NotJoined);
                };
                if net.extended_pan_id != *extended_pan_id {
                    return Reaction::drop(frame, DropReason::ExtendedPanMismatch);
                }
                if *network_update_id <= net.network_update_id {
                    return Reaction::drop(frame, DropReason::StaleUpdateId);
                }
                net.channel = *channel;
                net.pan_id = *pan_id;
                net.short_addr = *short_addr;
                net.network_update_id = *network_update_id;
                r.changed(format!(
                    "network update: channel={channel} pan=0x{pan_id:04x} update_id={network_update_id}"
                ));
            }
            NetworkJoinEndDeviceRequest {
                transaction_id,
                extended_pan_id,
                key_index,
                encrypted_network_key,
                channel,
                pan_id,
                network_update_id,
                assigned_short_addr,
            } => {
                if *key_index != KEY_INDEX_MASTER {
                    return Reaction::drop(frame, DropReason::UnsupportedKeyIndex);
                }
                let Some(dst) = requester else {
                    return Reaction::drop(frame, DropReason::MissingSource);
                };
                let reply_channel = self.channel();
                self.adopt(
                    &ctx,
                    encrypted_network_key,
                    NetworkParams {
                        pan_id: *pan_id,
                        extended_pan_id: *extended_pan_id,
                        channel: *channel,
                        network_key: Key128::ZERO,
                        network_update_id: *network_update_id,
                        short_addr: *assigned_short_addr,
                    },
                    &mut r,
                );
                let seq = self.next_seq();
                r.transmissions.push(Transmission {
                    frame: Frame::InterPan {
                        header: MacHeader::inter_pan_unicast(seq, self.extended_addr, dst, false),
                        command: NetworkJoinEndDeviceResponse {
                            transaction_id: *transaction_id,
                            status: JOIN_STATUS_SUCCESS,
                        },
                    },
                    delay_us: RESPONSE_DELAY_US,
                    channel: reply_channel,
                });
            }
            NetworkStartRequest {
                extended_pan_id,
                key_index,
                encrypted_network_key,
                channel,
                pan_id,
                ..
            } => {
                if *key_index != KEY_INDEX_MASTER {
                    return Reaction::drop(frame, DropReason::UnsupportedKeyIndex);
                }
                let short_addr = self
                    .net
                    .as_ref()
                    .map_or(ShortAddr(0x0001), |n| n.short_addr);
                self.adopt(
                    &ctx,
                    encrypted_network_key,
                    NetworkParams {
                        pan_id: *pan_id,
                        extended_pan_id: *extended_pan_id,
                        channel: *channel,
                        network_key: Key128::ZERO,
                        network_update_id: 0,
                        short_addr,
                    },
                    &mut r,
                );
            }
            ScanRequest { .. }
            | ScanResponse(_)
            | DeviceInfoResponse { .. }
            | NetworkJoinEndDeviceResponse { .. } => unreachable!("handled above"),
        }
        r
    }

    /// Leaves the current network and joins the one described by `params`,
    /// with the network key recovered from `encrypted` via the transaction.
    fn adopt(
        &mut self,
        ctx: &TransactionContext,
        encrypted: &[u8; 16],
        mut params: NetworkParams,
        r: &mut Reaction,
    ) {
        // The context was validated by bind_transaction; the id is nonzero.
        params.network_key = crypto::unwrap_network_key(&self.master_key, ctx, encrypted)
            .expect("bound transaction has a nonzero id");
        r.changed(format!(
            "joined pan=0x{:04x} channel={} short={} key={}",
            params.pan_id, params.channel, params.short_addr, params.network_key
        ));
        self.factory_new = false;
        self.net = Some(params);
        self.pending = None;
        self.rx_frame_counters.clear();
    }

    fn handle_secured(
        &mut self,
        frame: &Frame,
        header: &MacHeader,
        payload: &SecuredNwkFrame,
        now: SimTime,
    ) -> Reaction {
        let Some(net) = self.net.as_ref() else {
            return Reaction::drop(frame, DropReason::NotJoined);
        };
        if header.dst_pan != net.pan_id && header.dst_pan != BROADCAST_PAN {
            return Reaction::drop(frame, DropReason::NotAddressed);
        }
        if payload.dst_short != net.short_addr && !payload.dst_short.is_broadcast() {
            return Reaction::drop(frame, DropReason::NotAddressed);
        }
        if payload.endpoint != LIGHT_ENDPOINT && payload.endpoint != BROADCAST_ENDPOINT {
            return Reaction::drop(frame, DropReason::UnknownEndpoint);
        }
        let plaintext = match crypto::ccm_decrypt(
            &net.network_key,
            payload.src_short.0,
            payload.frame_counter,
            &payload.ciphertext,
            payload.mic,
        ) {
            Ok(p) => p,
            Err(_) => return Reaction::drop(frame, DropReason::IntegrityFailure),
        };
        if self
            .rx_frame_counters
            .get(&payload.src_short)
            .is_some_and(|&last| payload.frame_counter <= last)
        {
            return Reaction::drop(frame, DropReason::ReplayedCounter);
        }
        self.rx_frame_counters
            .insert(payload.src_short, payload.frame_counter);
        if self.is_identifying(now) {
            return Reaction::drop(frame, DropReason::IdentifyActive);
        }
        let command = match ClusterCommand::from_bytes(&plaintext) {
            Ok(c) => c,
            Err(_) => return Reaction::drop(frame, DropReason::MalformedPayload),
        };
        self.lamp.apply(command);
        Reaction {
            events: vec![DeviceEvent::Applied {
                src: payload.src_short,
                command,
            }],
            ..Default::default()
        }
    }

    /// Processes timers due at `now`: ACK deadlines, identify expiry and
    /// transaction expiry.
    pub fn on_wake(&mut self, now: SimTime) -> Reaction {
        let mut r = Reaction::default();
        if let Some(pending_ack) = self.awaiting_ack {
            if now > pending_ack.deadline {
                self.awaiting_ack = None;
                self.pending = None;
                r.events.push(DeviceEvent::Dropped {
                    frame: "ack",
                    reason: DropReason::AckTimeout {
                        transaction_id: pending_ack.transaction_id,
                    },
                });
            }
        }
        if self.identify_until.is_some_and(|until| until <= now) {
            self.end_identify(&mut r);
        }
        if self.pending.is_some_and(|ctx| !ctx.is_live(now)) {
            self.pending = None;
        }
        r
    }

    /// Manufacturer-specific power-cycle reset.
    pub fn physical_reset(&mut self) -> Result<(), DeviceError> {
        if !self.profile.supports_physical_reset {
            return Err(DeviceError::Unsupported("physical reset"));
        }
        self.wipe();
        Ok(())
    }

    /// Classical-commissioning stand-in: a factory-new bulb immediately
    /// joins an open network.
    pub fn rejoin_via_classical(&mut self, net: NetworkParams) -> Result<(), DeviceError> {
        if !self.factory_new {
            return Err(DeviceError::Unsupported("classical rejoin while joined"));
        }
        self.factory_new = false;
        self.net = Some(net);
        self.rx_frame_counters.clear();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{ccm_encrypt, wrap_network_key};
    use crate::wire::{AckFrame, MacHeader, BROADCAST_SHORT};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const INITIATOR: ExtendedAddr = ExtendedAddr(0xAAAA);
    const BULB: ExtendedAddr = ExtendedAddr(0xB0B);
    const S: u64 = MICROS_PER_SECOND;

    fn net() -> NetworkParams {
        NetworkParams {
            pan_id: 0x1A2B,
            extended_pan_id: 0x1122_3344_5566_7788,
            channel: 11,
            network_key: Key128([0x42; 16]),
            network_update_id: 3,
            short_addr: ShortAddr(0x0001),
        }
    }

    fn bulb(kind: ProfileKind) -> EndDevice {
        let mut d = EndDevice::joined(kind, Key128([9; 16]), net());
        d.extended_addr = BULB;
        d
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    fn scan(tid: u32) -> Frame {
        Frame::InterPan {
            header: MacHeader::inter_pan_broadcast(1, INITIATOR),
            command: TouchlinkCommand::ScanRequest {
                transaction_id: tid,
            },
        }
    }

    fn unicast(command: TouchlinkCommand) -> Frame {
        Frame::InterPan {
            header: MacHeader::inter_pan_unicast(2, INITIATOR, BULB, false),
            command,
        }
    }

    fn open_transaction(d: &mut EndDevice, tid: u32, now: SimTime) -> ScanResponse {
        let r = d.handle_frame(&scan(tid), -30.0, now, &mut rng());
        match &r.transmissions[0].frame {
            Frame::InterPan {
                command: TouchlinkCommand::ScanResponse(rsp),
                ..
            } => rsp.clone(),
            other => panic!("expected scan response, got {other:?}"),
        }
    }

    fn secured(key: &Key128, counter: u32, cmd: ClusterCommand) -> Frame {
        let (ciphertext, mic) = ccm_encrypt(key, 0x0000, counter, &cmd.to_bytes());
        Frame::Network {
            header: MacHeader {
                sequence_number: 0,
                src_pan: 0x1A2B,
                dst_pan: 0x1A2B,
                src_short: Some(ShortAddr(0)),
                dst_short: Some(BROADCAST_SHORT),
                src_extended: None,
                dst_extended: None,
                ack_requested: false,
            },
            payload: SecuredNwkFrame {
                src_short: ShortAddr(0),
                dst_short: ShortAddr(0x0001),
                frame_counter: counter,
                endpoint: LIGHT_ENDPOINT,
                ciphertext,
                mic,
            },
        }
    }

    #[test]
    fn scan_response_gated_by_rssi() {
        let mut d = bulb(ProfileKind::HueBulb);
        let r = d.handle_frame(&scan(5), -35.0, 0, &mut rng());
        assert_eq!(r.transmissions.len(), 1);
        let mut d = bulb(ProfileKind::HueBulb);
        let r = d.handle_frame(&scan(5), -45.0, 0, &mut rng());
        assert!(r.transmissions.is_empty());
        assert_eq!(
            r.dropped_reasons().collect::<Vec<_>>(),
            vec![DropReason::RssiBelowThreshold]
        );
        assert!(d.pending.is_none());
    }

    #[test]
    fn scan_response_carries_network_parameters() {
        let mut d = bulb(ProfileKind::HueBulb);
        let rsp = open_transaction(&mut d, 5, 0);
        assert_eq!(rsp.transaction_id, 5);
        assert_eq!(rsp.channel, 11);
        assert_eq!(rsp.network_update_id, 3);
        assert!(!rsp.factory_new);
        assert_eq!(d.pending.unwrap().response_id, rsp.response_id);
    }

    #[test]
    fn blink_caps() {
        for (kind, cap) in [
            (ProfileKind::HueBulb, 65534u64),
            (ProfileKind::LightifyBulb, 33173),
            (ProfileKind::LinkBulb, 32791),
        ] {
            let mut d = bulb(kind);
            open_transaction(&mut d, 5, 0);
            d.awaiting_ack = None;
            let now = 1_000;
            d.handle_frame(
                &unicast(TouchlinkCommand::IdentifyRequest {
                    transaction_id: 5,
                    duration: 0xFFFE,
                }),
                -30.0,
                now,
                &mut rng(),
            );
            assert_eq!(d.identify_until.unwrap() - now, cap * S, "{kind}");
        }
    }

    #[test]
    fn identify_stop_and_default() {
        let mut d = bulb(ProfileKind::HueBulb);
        open_transaction(&mut d, 5, 0);
        let identify = |duration| {
            unicast(TouchlinkCommand::IdentifyRequest {
                transaction_id: 5,
                duration,
            })
        };
        d.handle_frame(&identify(0xFFFF), -30.0, 10, &mut rng());
        assert_eq!(d.identify_until, Some(10 + 3 * S));
        d.handle_frame(&identify(0), -30.0, 20, &mut rng());
        assert_eq!(d.identify_until, None);
    }

    #[test]
    fn identify_without_transaction_is_dropped() {
        let mut d = EndDevice::new(ProfileKind::HueBulb, Key128::ZERO);
        d.extended_addr = BULB;
        let r = d.handle_frame(
            &unicast(TouchlinkCommand::IdentifyRequest {
                transaction_id: 5,
                duration: 10,
            }),
            -30.0,
            0,
            &mut rng(),
        );
        assert_eq!(
            r.dropped_reasons().collect::<Vec<_>>(),
            vec![DropReason::NoTransaction]
        );
        assert!(d.identify_until.is_none());
    }

    #[test]
    fn blink_aftermath_per_vendor() {
        for (kind, restored) in [
            (ProfileKind::HueBulb, true),
            (ProfileKind::LightifyBulb, false),
        ] {
            let mut d = bulb(kind);
            d.lamp = LampState {
                on: false,
                hue: 1,
                brightness: 10,
            };
            let before = d.lamp;
            open_transaction(&mut d, 5, 0);
            d.awaiting_ack = None;
            d.handle_frame(
                &unicast(TouchlinkCommand::IdentifyRequest {
                    transaction_id: 5,
                    duration: 2,
                }),
                -30.0,
                0,
                &mut rng(),
            );
            d.on_wake(2 * S);
            assert!(d.identify_until.is_none());
            if restored {
                assert_eq!(d.lamp, before);
            } else {
                assert_eq!(d.lamp, LampState::DEFAULT);
            }
        }
    }

    #[test]
    fn update_requires_strictly_greater_id() {
        let mut d = bulb(ProfileKind::HueBulb);
        open_transaction(&mut d, 5, 0);
        let update = |id| {
            unicast(TouchlinkCommand::NetworkUpdateRequest {
                transaction_id: 5,
                extended_pan_id: net().extended_pan_id,
                network_update_id: id,
                channel: 20,
                pan_id: 0x1A2B,
                short_addr: ShortAddr(1),
            })
        };
        let r = d.handle_frame(&update(3), -30.0, 1, &mut rng());
        assert_eq!(
            r.dropped_reasons().collect::<Vec<_>>(),
            vec![DropReason::StaleUpdateId]
        );
        assert_eq!(d.net, Some(net()));
        d.handle_frame(&update(4), -30.0, 2, &mut rng());
        assert_eq!(d.channel(), 20);
        assert_eq!(d.net.as_ref().unwrap().network_update_id, 4);
        assert_eq!(d.net.as_ref().unwrap().network_key, net().network_key);
    }

    #[test]
    fn update_with_foreign_extended_pan_is_dropped() {
        let mut d = bulb(ProfileKind::HueBulb);
        open_transaction(&mut d, 5, 0);
        let r = d.handle_frame(
            &unicast(TouchlinkCommand::NetworkUpdateRequest {
                transaction_id: 5,
                extended_pan_id: 1,
                network_update_id: 9,
                channel: 20,
                pan_id: 0x1A2B,
                short_addr: ShortAddr(1),
            }),
            -30.0,
            1,
            &mut rng(),
        );
        assert_eq!(
            r.dropped_reasons().collect::<Vec<_>>(),
            vec![DropReason::ExtendedPanMismatch]
        );
    }

    #[test]
    fn join_unwraps_key_and_replies_on_old_channel() {
        let mut d = bulb(ProfileKind::HueBulb);
        let rsp = open_transaction(&mut d, 5, 0);
        let ctx = TransactionContext::new(5, rsp.response_id, 1).unwrap();
        let new_key = Key128([0x77; 16]);
        let enc = wrap_network_key(&Key128([9; 16]), &ctx, &new_key).unwrap();
        let r = d.handle_frame(
            &unicast(TouchlinkCommand::NetworkJoinEndDeviceRequest {
                transaction_id: 5,
                extended_pan_id: 0xE,
                key_index: KEY_INDEX_MASTER,
                encrypted_network_key: enc,
                channel: 25,
                pan_id: 0xBEEF,
                network_update_id: 0,
                assigned_short_addr: ShortAddr(7),
            }),
            -30.0,
            1,
            &mut rng(),
        );
        let n = d.net.as_ref().unwrap();
        assert_eq!(n.network_key, new_key);
        assert_eq!(n.channel, 25);
        assert_eq!(r.transmissions[0].channel, 11);
        assert!(matches!(
            r.transmissions[0].frame.touchlink(),
            Some(TouchlinkCommand::NetworkJoinEndDeviceResponse {
                transaction_id: 5,
                status: 0
            })
        ));
        assert!(d.pending.is_none());
    }

    #[test]
    fn reset_wipes_network() {
        let mut d = bulb(ProfileKind::HueBulb);
        d.lamp.on = false;
        open_transaction(&mut d, 5, 0);
        d.handle_frame(
            &unicast(TouchlinkCommand::ResetToFactoryNewRequest { transaction_id: 5 }),
            -30.0,
            1,
            &mut rng(),
        );
        assert!(d.factory_new);
        assert!(d.net.is_none());
        assert_eq!(d.lamp, LampState::DEFAULT);
        assert_eq!(d.channel(), FACTORY_NEW_CHANNEL);
    }

    #[test]
    fn mismatched_and_expired_transactions() {
        let mut d = bulb(ProfileKind::HueBulb);
        open_transaction(&mut d, 5, 0);
        let reset = |tid| {
            unicast(TouchlinkCommand::ResetToFactoryNewRequest {
                transaction_id: tid,
            })
        };
        let r = d.handle_frame(&reset(6), -30.0, 1, &mut rng());
        assert_eq!(
            r.dropped_reasons().collect::<Vec<_>>(),
            vec![DropReason::TransactionMismatch]
        );
        let r = d.handle_frame(&reset(5), -30.0, TRANSACTION_LIFETIME_US + 1, &mut rng());
        assert_eq!(
            r.dropped_reasons().collect::<Vec<_>>(),
            vec![DropReason::TransactionExpired]
        );
        assert!(!d.factory_new);
    }

    #[test]
    fn ack_gating_deadline_is_inclusive() {
        for (offset, accepted) in [(0i64, true), (1, false)] {
            let mut d = bulb(ProfileKind::LightifyBulb);
            let r = d.handle_frame(&scan(5), -20.0, 0, &mut rng());
            let seq = r.transmissions[0].frame.sequence_number();
            let deadline = d.awaiting_ack.unwrap().deadline;
            let at = (deadline as i64 + offset) as u64;
            let r = d.handle_frame(
                &Frame::Ack(AckFrame {
                    sequence_number: seq,
                }),
                -20.0,
                at,
                &mut rng(),
            );
            if accepted {
                assert!(r.dropped_reasons().next().is_none());
                assert!(d.pending.is_some());
            } else {
                assert_eq!(
                    r.dropped_reasons().collect::<Vec<_>>(),
                    vec![DropReason::AckTimeout { transaction_id: 5 }]
                );
                assert!(d.pending.is_none());
            }
        }
    }

    #[test]
    fn commands_blocked_while_awaiting_ack() {
        let mut d = bulb(ProfileKind::LinkBulb);
        d.handle_frame(&scan(5), -20.0, 0, &mut rng());
        let r = d.handle_frame(
            &unicast(TouchlinkCommand::ResetToFactoryNewRequest { transaction_id: 5 }),
            -20.0,
            10,
            &mut rng(),
        );
        assert_eq!(
            r.dropped_reasons().collect::<Vec<_>>(),
            vec![DropReason::AwaitingAck]
        );
        let deadline = d.awaiting_ack.unwrap().deadline;
        let r = d.on_wake(deadline + 1);
        assert_eq!(
            r.dropped_reasons().collect::<Vec<_>>(),
            vec![DropReason::AckTimeout { transaction_id: 5 }]
        );
        assert!(d.pending.is_none());
    }

    #[test]
    fn secured_frames_apply_once() {
        let mut d = bulb(ProfileKind::HueBulb);
        let key = net().network_key;
        let r = d.handle_frame(
            &secured(&key, 10, ClusterCommand::Off),
            -60.0,
            0,
            &mut rng(),
        );
        assert!(matches!(r.events[0], DeviceEvent::Applied { .. }));
        assert!(!d.lamp.on);
        let r = d.handle_frame(&secured(&key, 10, ClusterCommand::On), -60.0, 1, &mut rng());
        assert_eq!(
            r.dropped_reasons().collect::<Vec<_>>(),
            vec![DropReason::ReplayedCounter]
        );
        assert!(!d.lamp.on);
        let r = d.handle_frame(
            &secured(&Key128([1; 16]), 11, ClusterCommand::On),
            -60.0,
            2,
            &mut rng(),
        );
        assert_eq!(
            r.dropped_reasons().collect::<Vec<_>>(),
            vec![DropReason::IntegrityFailure]
        );
        assert!(!d.lamp.on);
    }

    #[test]
    fn user_commands_ignored_during_identify() {
        let mut d = bulb(ProfileKind::HueBulb);
        d.identify_until = Some(100 * S);
        let r = d.handle_frame(
            &secured(&net().network_key, 1, ClusterCommand::Off),
            -60.0,
            S,
            &mut rng(),
        );
        assert_eq!(
            r.dropped_reasons().collect::<Vec<_>>(),
            vec![DropReason::IdentifyActive]
        );
        assert!(d.lamp.on);
    }

    #[test]
    fn physical_reset_support() {
        let mut link = bulb(ProfileKind::LinkBulb);
        link.physical_reset().unwrap();
        assert!(link.factory_new);
        link.physical_reset().unwrap();
        assert!(link.factory_new);

        let mut hue = bulb(ProfileKind::HueBulb);
        assert_eq!(
            hue.physical_reset(),
            Err(DeviceError::Unsupported("physical reset"))
        );
        assert!(!hue.factory_new);
    }

    #[test]
    fn classical_rejoin_stub() {
        let mut d = EndDevice::new(ProfileKind::HueBulb, Key128::ZERO);
        d.rejoin_via_classical(net()).unwrap();
        assert_eq!(d.net, Some(net()));
        assert!(d.rejoin_via_classical(net()).is_err());
    }
}
