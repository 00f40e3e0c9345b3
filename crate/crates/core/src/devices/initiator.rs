use rand::RngCore;

use super::end_device::{addressed_to, answer_scan, bind_transaction};
use super::*;
use crate::crypto::{ccm_encrypt, TransactionContext};
use crate::wire::{next_sequence, ExtendedAddr, MacHeader, SecuredNwkFrame, TouchlinkCommand};

/// A bridge, gateway or hub: drives touchlink as initiator and answers a
/// subset of touchlink requests according to its vendor profile.
#[derive(Clone, Debug)]
pub struct Initiator {
    pub profile: VendorProfile,
    pub extended_addr: ExtendedAddr,
    pub master_key: Key128,
    pub net: Option<NetworkParams>,
    pub button_pressed_at: Option<SimTime>,
    /// Outgoing network-layer frame counter.
    pub frame_counter: u32,
    pub next_short_addr: u16,
    /// Transaction opened when this device answered a scan request.
    pub pending: Option<TransactionContext>,
    sequence: u8,
}

impl Initiator {
    pub fn new(kind: ProfileKind, master_key: Key128, net: Option<NetworkParams>) -> Self {
        Initiator {
            profile: kind.profile(),
            extended_addr: ExtendedAddr(0),
            master_key,
            net,
            button_pressed_at: None,
            frame_counter: 0,
            next_short_addr: 0x0001,
            pending: None,
            sequence: 0,
        }
    }

    pub fn is_factory_new(&self) -> bool {
        self.net.is_none()
    }

    pub fn next_seq(&mut self) -> u8 {
        self.sequence = next_sequence(self.sequence);
        self.sequence
    }

    /// Opens the touchlink window of a Hue bridge.
    pub fn press_button(&mut self, now: SimTime) -> Result<(), DeviceError> {
        if self.profile.scan_response_policy != ScanResponsePolicy::ButtonWindow {
            return Err(DeviceError::Unsupported("link button"));
        }
        self.button_pressed_at = Some(self.button_pressed_at.map_or(now, |t| t.max(now)));
        Ok(())
    }

    pub fn button_window_open(&self, now: SimTime) -> bool {
        self.button_pressed_at.is_some_and(|at| {
            now >= at && now - at <= self.profile.button_window_s * MICROS_PER_SECOND
        })
    }

    /// Whether touchlink requests from other initiators are honored right now.
    pub fn answers_touchlink(&self, now: SimTime) -> bool {
        match self.profile.scan_response_policy {
            ScanResponsePolicy::Always => true,
            ScanResponsePolicy::ButtonWindow => self.button_window_open(now),
            ScanResponsePolicy::Never => false,
        }
    }

    /// Hands out the next short address for a joining device.
    pub fn allocate_short_addr(&mut self) -> ShortAddr {
        let addr = ShortAddr(self.next_short_addr);
        self.next_short_addr = self.next_short_addr.wrapping_add(1).max(1);
        addr
    }

    /// Builds an encrypted application frame from this initiator's network.
    pub fn seal_command(&mut self, dst: ShortAddr, command: ClusterCommand) -> Option<Frame> {
        let net = self.net.clone()?;
        self.frame_counter += 1;
        let counter = self.frame_counter;
        let (ciphertext, mic) = ccm_encrypt(
            &net.network_key,
            net.short_addr.0,
            counter,
            &command.to_bytes(),
        );
        let seq = self.next_seq();
        Some(Frame::Network {
            header: MacHeader {
                sequence_number: seq,
                src_pan: net.pan_id,
                dst_pan: net.pan_id,
                src_short: Some(net.short_addr),
                dst_short: Some(dst),
                src_extended: None,
                dst_extended: None,
                ack_requested: false,
            },
            payload: SecuredNwkFrame {
                src_short: net.short_addr,
                dst_short: dst,
                frame_counter: counter,
                endpoint: LIGHT_ENDPOINT,
                ciphertext,
                mic,
            },
        })
    }

    /// Handles touchlink requests aimed at this device as a target.
    ///
    /// Responses to this device's own touchlink exchanges are consumed by the
    /// commissioning driver from the node inbox, not here.
    pub fn handle_frame(
        &mut self,
        frame: &Frame,
        rssi_dbm: f64,
        now: SimTime,
        rng: &mut dyn RngCore,
    ) -> Reaction {
        let Frame::InterPan { header, command } = frame else {
            return Reaction::default();
        };
        if !addressed_to(header, self.extended_addr) {
            return Reaction::drop(frame, DropReason::NotAddressed);
        }
        match command {
            TouchlinkCommand::ScanRequest { transaction_id } => {
                if !self.profile.accepts_touchlink_rssi(rssi_dbm) {
                    return Reaction::drop(frame, DropReason::RssiBelowThreshold);
                }
                if !self.answers_touchlink(now) {
                    return Reaction::drop(frame, DropReason::ScanPolicy);
                }
                let seq = self.next_seq();
                let channel = self.net.as_ref().map_or(FACTORY_NEW_CHANNEL, |n| n.channel);
                match answer_scan(
                    header,
                    *transaction_id,
                    self.extended_addr,
                    self.net.as_ref(),
                    channel,
                    seq,
                    false,
                    now,
                    rng,
                ) {
                    Ok((response, ctx)) => {
                        self.pending = Some(ctx);
                        Reaction {
                            transmissions: vec![Transmission {
                                frame: response,
                                delay_us: RESPONSE_DELAY_US,
                                channel,
                            }],
                            wake_at: vec![ctx.expires_at + 1],
                            events: vec![],
                        }
                    }
                    Err(reason) => Reaction::drop(frame, reason),
                }
            }
            TouchlinkCommand::ResetToFactoryNewRequest { transaction_id } => {
                if !self.profile.accepts_touchlink_rssi(rssi_dbm) {
                    return Reaction::drop(frame, DropReason::RssiBelowThreshold);
                }
                if !self.answers_touchlink(now) {
                    return Reaction::drop(frame, DropReason::ScanPolicy);
                }
                if let Err(reason) = bind_transaction(&mut self.pending, None, *transaction_id, now)
                {
                    return Reaction::drop(frame, reason);
                }
                self.net = None;
                self.pending = None;
                self.button_pressed_at = None;
                let mut r = Reaction::default();
                r.changed("reset to factory-new");
                r
            }
            TouchlinkCommand::ScanResponse(_)
            | TouchlinkCommand::DeviceInfoResponse { .. }
            | TouchlinkCommand::NetworkJoinEndDeviceResponse { .. } => Reaction::default(),
            _ => Reaction::drop(frame, DropReason::Unsupported),
        }
    }

    pub fn on_wake(&mut self, now: SimTime) -> Reaction {
        if self.pending.is_some_and(|ctx| !ctx.is_live(now)) {
            self.pending = None;
        }
        Reaction::default()
    }
}
