//! Touchlink device models: bulbs (end devices) and bridges/gateways
//! (initiators), parameterized by vendor profiles.

mod end_device;
mod initiator;
mod profile;
pub mod touchlink;

use std::fmt;

use thiserror::Error;

use crate::airsim::SimTime;
use crate::crypto::Key128;
use crate::wire::{ClusterCommand, Frame, ShortAddr};

pub use end_device::{EndDevice, PendingAck};
pub use initiator::Initiator;
pub use profile::{
    BlinkAftermath, ProfileKind, ScanResponsePolicy, VendorProfile, ACK_DEADLINE_US,
    BUTTON_WINDOW_S, DEFAULT_IDENTIFY_S, TOUCHLINK_RSSI_THRESHOLD_DBM,
};

/// Lifetime of a pending touchlink transaction.
pub const TRANSACTION_LIFETIME_US: SimTime = 8_000_000;
/// Delay between receiving a touchlink request and transmitting the reply.
pub const RESPONSE_DELAY_US: u64 = 192;
/// Application endpoint of the light on every modeled device.
pub const LIGHT_ENDPOINT: u8 = 0x0B;
/// Device identifier advertised for the light endpoint.
pub const LIGHT_DEVICE_ID: u16 = 0x0100;
/// Channel a device without network settings listens on.
pub const FACTORY_NEW_CHANNEL: u8 = 11;

pub(crate) const MICROS_PER_SECOND: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkParams {
    pub pan_id: u16,
    pub extended_pan_id: u64,
    pub channel: u8,
    pub network_key: Key128,
    pub network_update_id: u8,
    pub short_addr: ShortAddr,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct LampState {
    pub on: bool,
    pub hue: u16,
    pub brightness: u8,
}

impl LampState {
    /// Warm white at full brightness.
    pub const DEFAULT: LampState = LampState {
        on: true,
        hue: 8000,
        brightness: 254,
    };

    pub fn apply(&mut self, command: ClusterCommand) {
        match command {
            ClusterCommand::Off => self.on = false,
            ClusterCommand::On => self.on = true,
            ClusterCommand::Level(level) => self.brightness = level,
            ClusterCommand::Color { hue } => self.hue = hue,
        }
    }
}

impl Default for LampState {
    fn default() -> Self {
        LampState::DEFAULT
    }
}

/// Why a device discarded a frame.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum DropReason {
    NotAddressed,
    RssiBelowThreshold,
    ScanPolicy,
    MissingSource,
    NoTransaction,
    TransactionMismatch,
    TransactionExpired,
    AwaitingAck,
    AckTimeout { transaction_id: u32 },
    NotJoined,
    ExtendedPanMismatch,
    StaleUpdateId,
    UnsupportedKeyIndex,
    Unsupported,
    UnknownEndpoint,
    IntegrityFailure,
    ReplayedCounter,
    IdentifyActive,
    MalformedPayload,
}

impl DropReason {
    /// Drops that are routine address filtering rather than protocol events.
    pub fn is_filtering(self) -> bool {
        matches!(self, DropReason::NotAddressed)
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DropReason::NotAddressed => "not-addressed",
            DropReason::RssiBelowThreshold => "rssi-below-threshold",
            DropReason::ScanPolicy => "scan-policy",
            DropReason::MissingSource => "missing-source",
            DropReason::NoTransaction => "no-transaction",
            DropReason::TransactionMismatch => "transaction-mismatch",
            DropReason::TransactionExpired => "transaction-expired",
            DropReason::AwaitingAck => "awaiting-ack",
            DropReason::AckTimeout { transaction_id } => {
                return write!(f, "ack-timeout tid=0x{transaction_id:08x}")
            }
            DropReason::NotJoined => "not-joined",
            DropReason::ExtendedPanMismatch => "extended-pan-mismatch",
            DropReason::StaleUpdateId => "stale-update-id",
            DropReason::UnsupportedKeyIndex => "unsupported-key-index",
            DropReason::Unsupported => "unsupported",
            DropReason::UnknownEndpoint => "unknown-endpoint",
            DropReason::IntegrityFailure => "integrity-failure",
            DropReason::ReplayedCounter => "replayed-counter",
            DropReason::IdentifyActive => "identify-active",
            DropReason::MalformedPayload => "malformed-payload",
        };
        f.write_str(s)
    }
}

/// Something a device reports while handling a frame or timer.
#[derive(Clone, Debug, PartialEq)]
pub enum DeviceEvent {
    Dropped {
        frame: &'static str,
        reason: DropReason,
    },
    Changed(String),
    Applied {
        src: ShortAddr,
        command: ClusterCommand,
    },
}

/// A frame a device wants transmitted `delay_us` after the triggering event.
#[derive(Clone, Debug, PartialEq)]
pub struct Transmission {
    pub frame: Frame,
    pub delay_us: u64,
    pub channel: u8,
}

/// Outcome of handing a frame or timer to a device.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Reaction {
    pub transmissions: Vec<Transmission>,
    pub wake_at: Vec<SimTime>,
    pub events: Vec<DeviceEvent>,
}

impl Reaction {
    pub(crate) fn drop(frame: &Frame, reason: DropReason) -> Self {
        Reaction {
            events: vec![DeviceEvent::Dropped {
                frame: frame.label(),
                reason,
            }],
            ..Default::default()
        }
    }

    pub(crate) fn changed(&mut self, change: impl Into<String>) {
        self.events.push(DeviceEvent::Changed(change.into()));
    }

    pub fn dropped_reasons(&self) -> impl Iterator<Item = DropReason> + '_ {
        self.events.iter().filter_map(|e| match e {
            DeviceEvent::Dropped { reason, .. } => Some(*reason),
            _ => None,
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DeviceError {
    #[error("{0} is not supported by this device")]
    Unsupported(&'static str),
}
