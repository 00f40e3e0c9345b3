//! Frame definitions and the canonical byte layout ("touchlink-lab wire format v1").
//!
//! Every frame on the simulated air is one of three kinds: an inter-PAN
//! touchlink command, a secured network-layer application frame, or a MAC
//! acknowledgment. The layout is documented in `docs/wire-format.md`; all
//! multi-byte integers are little-endian.

mod codec;
pub mod hexlog;
mod payload;

use std::fmt;

use thiserror::Error;

pub use codec::{decode_frame, encode_frame};
pub use payload::ClusterCommand;

/// Short address that addresses every node of a PAN.
pub const BROADCAST_SHORT: ShortAddr = ShortAddr(0xFFFF);
/// PAN identifier used for inter-PAN destinations.
pub const BROADCAST_PAN: u16 = 0xFFFF;
/// Application endpoint that addresses every application on a device.
pub const BROADCAST_ENDPOINT: u8 = 0xFF;
/// Largest permitted value of the leading length byte.
pub const MAX_FRAME_LEN: usize = 127;
/// Upper bound on sub-device records carried by one device information response.
pub const MAX_SUB_DEVICE_RECORDS: usize = 5;

/// Key bitmask bit advertising the (development) test key.
pub const KEY_BIT_DEVELOPMENT: u16 = 1 << 0;
/// Key bitmask bit advertising the light-link master key.
pub const KEY_BIT_MASTER: u16 = 1 << 4;
/// Key index that selects the master key slot in join and start requests.
pub const KEY_INDEX_MASTER: u8 = 4;

/// Identify duration that aborts a running identify procedure.
pub const IDENTIFY_STOP: u16 = 0x0000;
/// Identify duration that requests the vendor default duration.
pub const IDENTIFY_DEFAULT: u16 = 0xFFFF;

/// Join status reported on success.
pub const JOIN_STATUS_SUCCESS: u8 = 0x00;

/// Channel range of the 2.4 GHz band.
pub const CHANNEL_MIN: u8 = 11;
pub const CHANNEL_MAX: u8 = 26;
/// Channels on which touchlink scans are performed.
pub const PRIMARY_CHANNELS: [u8; 4] = [11, 15, 20, 25];

pub fn is_valid_channel(channel: u8) -> bool {
    (CHANNEL_MIN..=CHANNEL_MAX).contains(&channel)
}

/// 16-bit network (short) address.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ShortAddr(pub u16);

impl ShortAddr {
    pub fn is_broadcast(self) -> bool {
        self == BROADCAST_SHORT
    }
}

impl fmt::Display for ShortAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:04x}", self.0)
    }
}

/// 64-bit IEEE (extended) address.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ExtendedAddr(pub u64);

impl fmt::Display for ExtendedAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:016x}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("invariant violated: {field}")]
    InvariantViolation { field: &'static str },
    #[error("truncated frame at offset {offset}")]
    Truncated { offset: usize },
    #[error("unknown command tag 0x{tag:02x} at offset {offset}")]
    UnknownCommandTag { offset: usize, tag: u8 },
    #[error("field {field} out of range at offset {offset}")]
    FieldOutOfRange { offset: usize, field: &'static str },
    #[error("declared length disagrees with content at offset {offset}")]
    LengthMismatch { offset: usize },
}

/// MAC header shared by inter-PAN and network frames.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MacHeader {
    pub sequence_number: u8,
    pub src_pan: u16,
    pub dst_pan: u16,
    pub src_short: Option<ShortAddr>,
    pub dst_short: Option<ShortAddr>,
    pub src_extended: Option<ExtendedAddr>,
    pub dst_extended: Option<ExtendedAddr>,
    pub ack_requested: bool,
}

impl MacHeader {
    /// Header of a broadcast inter-PAN frame sent from `src`.
    pub fn inter_pan_broadcast(sequence_number: u8, src: ExtendedAddr) -> Self {
        MacHeader {
            sequence_number,
            src_pan: BROADCAST_PAN,
            dst_pan: BROADCAST_PAN,
            src_short: None,
            dst_short: Some(BROADCAST_SHORT),
            src_extended: Some(src),
            dst_extended: None,
            ack_requested: false,
        }
    }

    /// Header of a unicast inter-PAN frame between two extended addresses.
    pub fn inter_pan_unicast(
        sequence_number: u8,
        src: ExtendedAddr,
        dst: ExtendedAddr,
        ack_requested: bool,
    ) -> Self {
        MacHeader {
            sequence_number,
            src_pan: BROADCAST_PAN,
            dst_pan: BROADCAST_PAN,
            src_short: None,
            dst_short: None,
            src_extended: Some(src),
            dst_extended: Some(dst),
            ack_requested,
        }
    }

    /// True when the frame is addressed to every node.
    pub fn is_broadcast(&self) -> bool {
        self.dst_extended.is_none() && self.dst_short.is_none_or(ShortAddr::is_broadcast)
    }
}

/// Information record describing one sub-device (endpoint) of a touchlink target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubDeviceRecord {
    pub extended_addr: ExtendedAddr,
    pub endpoint: u8,
    pub device_id: u16,
}

/// Payload of a scan response.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScanResponse {
    pub transaction_id: u32,
    pub response_id: u32,
    pub key_bitmask: u16,
    pub network_update_id: u8,
    pub channel: u8,
    pub pan_id: u16,
    pub extended_pan_id: u64,
    pub network_address: ShortAddr,
    pub factory_new: bool,
    pub sub_device_count: u8,
}

/// Inter-PAN touchlink commands.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TouchlinkCommand {
    ScanRequest {
        transaction_id: u32,
    },
    ScanResponse(ScanResponse),
    DeviceInfoRequest {
        transaction_id: u32,
    },
    DeviceInfoResponse {
        transaction_id: u32,
        sub_device_records: Vec<SubDeviceRecord>,
    },
    IdentifyRequest {
        transaction_id: u32,
        duration: u16,
    },
    ResetToFactoryNewRequest {
        transaction_id: u32,
    },
    NetworkUpdateRequest {
        transaction_id: u32,
        extended_pan_id: u64,
        network_update_id: u8,
        channel: u8,
        pan_id: u16,
        short_addr: ShortAddr,
    },
    NetworkJoinEndDeviceRequest {
        transaction_id: u32,
        extended_pan_id: u64,
        key_index: u8,
        encrypted_network_key: [u8; 16],
        channel: u8,
        pan_id: u16,
        network_update_id: u8,
        assigned_short_addr: ShortAddr,
    },
    NetworkJoinEndDeviceResponse {
        transaction_id: u32,
        status: u8,
    },
    NetworkStartRequest {
        transaction_id: u32,
        extended_pan_id: u64,
        key_index: u8,
        encrypted_network_key: [u8; 16],
        channel: u8,
        pan_id: u16,
    },
}

impl TouchlinkCommand {
    pub fn transaction_id(&self) -> u32 {
        use TouchlinkCommand::*;
        match self {
            ScanRequest { transaction_id }
            | DeviceInfoRequest { transaction_id }
            | DeviceInfoResponse { transaction_id, .. }
            | IdentifyRequest { transaction_id, .. }
            | ResetToFactoryNewRequest { transaction_id }
            | NetworkUpdateRequest { transaction_id, .. }
            | NetworkJoinEndDeviceRequest { transaction_id, .. }
            | NetworkJoinEndDeviceResponse { transaction_id, .. }
            | NetworkStartRequest { transaction_id, .. } => *transaction_id,
            ScanResponse(rsp) => rsp.transaction_id,
        }
    }

    /// Command identifier used on the wire.
    pub fn command_id(&self) -> u8 {
        use TouchlinkCommand::*;
        match self {
            ScanRequest { .. } => 0x00,
            ScanResponse(_) => 0x01,
            DeviceInfoRequest { .. } => 0x02,
            DeviceInfoResponse { .. } => 0x03,
            IdentifyRequest { .. } => 0x06,
            ResetToFactoryNewRequest { .. } => 0x07,
            NetworkStartRequest { .. } => 0x10,
            NetworkJoinEndDeviceRequest { .. } => 0x14,
            NetworkJoinEndDeviceResponse { .. } => 0x15,
            NetworkUpdateRequest { .. } => 0x16,
        }
    }

    pub fn name(&self) -> &'static str {
        use TouchlinkCommand::*;
        match self {
            ScanRequest { .. } => "scan-request",
            ScanResponse(_) => "scan-response",
            DeviceInfoRequest { .. } => "device-info-request",
            DeviceInfoResponse { .. } => "device-info-response",
            IdentifyRequest { .. } => "identify-request",
            ResetToFactoryNewRequest { .. } => "reset-to-factory-new-request",
            NetworkStartRequest { .. } => "network-start-request",
            NetworkJoinEndDeviceRequest { .. } => "network-join-end-device-request",
            NetworkJoinEndDeviceResponse { .. } => "network-join-end-device-response",
            NetworkUpdateRequest { .. } => "network-update-request",
        }
    }
}

/// Network-layer frame protected with AES-CCM* under the network key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecuredNwkFrame {
    pub src_short: ShortAddr,
    pub dst_short: ShortAddr,
    pub frame_counter: u32,
    pub endpoint: u8,
    pub ciphertext: Vec<u8>,
    pub mic: u32,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct AckFrame {
    pub sequence_number: u8,
}

/// Any frame exchanged on the simulated air.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Frame {
    InterPan {
        header: MacHeader,
        command: TouchlinkCommand,
    },
    Network {
        header: MacHeader,
        payload: SecuredNwkFrame,
    },
    Ack(AckFrame),
}

impl Frame {
    pub fn header(&self) -> Option<&MacHeader> {
        match self {
            Frame::InterPan { header, .. } | Frame::Network { header, .. } => Some(header),
            Frame::Ack(_) => None,
        }
    }

    pub fn sequence_number(&self) -> u8 {
        match self {
            Frame::InterPan { header, .. } | Frame::Network { header, .. } => {
                header.sequence_number
            }
            Frame::Ack(ack) => ack.sequence_number,
        }
    }

    pub fn touchlink(&self) -> Option<&TouchlinkCommand> {
        match self {
            Frame::InterPan { command, .. } => Some(command),
            _ => None,
        }
    }

    /// Short human-readable label used in logs and reports.
    pub fn label(&self) -> &'static str {
        match self {
            Frame::InterPan { command, .. } => command.name(),
            Frame::Network { .. } => "secured-nwk",
            Frame::Ack(_) => "ack",
        }
    }
}

/// Next MAC sequence number, wrapping modulo 256.
pub fn next_sequence(counter: u8) -> u8 {
    counter.wrapping_add(1)
}
