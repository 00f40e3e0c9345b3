use super::*;

const KIND_ACK: u16 = 0;
const KIND_INTER_PAN: u16 = 1;
const KIND_NETWORK: u16 = 2;

const FC_KIND_MASK: u16 = 0b11;
const FC_ACK_REQUESTED: u16 = 1 << 2;
const FC_DST_SHORT: u16 = 1 << 3;
const FC_DST_EXTENDED: u16 = 1 << 4;
const FC_SRC_SHORT: u16 = 1 << 5;
const FC_SRC_EXTENDED: u16 = 1 << 6;
const FC_KNOWN_BITS: u16 = FC_KIND_MASK
    | FC_ACK_REQUESTED
    | FC_DST_SHORT
    | FC_DST_EXTENDED
    | FC_SRC_SHORT
    | FC_SRC_EXTENDED;

const MIC_LEN: usize = 4;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn bytes(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }
}

fn check_channel(channel: u8) -> Result<(), WireError> {
    if is_valid_channel(channel) {
        Ok(())
    } else {
        Err(WireError::InvariantViolation { field: "channel" })
    }
}

fn check_transaction(transaction_id: u32) -> Result<(), WireError> {
    if transaction_id == 0 {
        Err(WireError::InvariantViolation {
            field: "transaction_id",
        })
    } else {
        Ok(())
    }
}

fn write_header(w: &mut Writer, kind: u16, h: &MacHeader) -> Result<(), WireError> {
    if h.src_short.is_none() && h.src_extended.is_none() {
        return Err(WireError::InvariantViolation {
            field: "source address",
        });
    }
    let mut fc = kind;
    if h.ack_requested {
        fc |= FC_ACK_REQUESTED;
    }
    if h.dst_short.is_some() {
        fc |= FC_DST_SHORT;
    }
    if h.dst_extended.is_some() {
        fc |= FC_DST_EXTENDED;
    }
    if h.src_short.is_some() {
        fc |= FC_SRC_SHORT;
    }
    if h.src_extended.is_some() {
        fc |= FC_SRC_EXTENDED;
    }
    w.u16(fc);
    w.u8(h.sequence_number);
    w.u16(h.dst_pan);
    w.u16(h.src_pan);
    if let Some(a) = h.dst_short {
        w.u16(a.0);
    }
    if let Some(a) = h.dst_extended {
        w.u64(a.0);
    }
    if let Some(a) = h.src_short {
        w.u16(a.0);
    }
    if let Some(a) = h.src_extended {
        w.u64(a.0);
    }
    Ok(())
}

fn write_command(w: &mut Writer, cmd: &TouchlinkCommand) -> Result<(), WireError> {
    use TouchlinkCommand::*;
    check_transaction(cmd.transaction_id())?;
    w.u8(cmd.command_id());
    w.u32(cmd.transaction_id());
    match cmd {
        ScanRequest { .. } | DeviceInfoRequest { .. } | ResetToFactoryNewRequest { .. } => {}
        ScanResponse(rsp) => {
            check_channel(rsp.channel)?;
            w.u32(rsp.response_id);
            w.u16(rsp.key_bitmask);
            w.u8(rsp.network_update_id);
            w.u8(rsp.channel);
            w.u16(rsp.pan_id);
            w.u64(rsp.extended_pan_id);
            w.u16(rsp.network_address.0);
            w.u8(rsp.factory_new as u8);
            w.u8(rsp.sub_device_count);
        }
        DeviceInfoResponse {
            sub_device_records, ..
        } => {
            if sub_device_records.len() > MAX_SUB_DEVICE_RECORDS {
                return Err(WireError::InvariantViolation {
                    field: "sub_device_records",
                });
            }
            w.u8(sub_device_records.len() as u8);
            for r in sub_device_records {
                w.u64(r.extended_addr.0);
                w.u8(r.endpoint);
                w.u16(r.device_id);
            }
        }
        IdentifyRequest { duration, .. } => w.u16(*duration),
        NetworkUpdateRequest {
            extended_pan_id,
            network_update_id,
            channel,
            pan_id,
            short_addr,
            ..
        } => {
            check_channel(*channel)?;
            w.u64(*extended_pan_id);
            w.u8(*network_update_id);
            w.u8(*channel);
            w.u16(*pan_id);
            w.u16(short_addr.0);
        }
        NetworkJoinEndDeviceRequest {
            extended_pan_id,
            key_index,
            encrypted_network_key,
            channel,
            pan_id,
            network_update_id,
            assigned_short_addr,
            ..
        } => {
            check_channel(*channel)?;
            w.u64(*extended_pan_id);
            w.u8(*key_index);
            w.bytes(encrypted_network_key);
            w.u8(*channel);
            w.u16(*pan_id);
            w.u8(*network_update_id);
            w.u16(assigned_short_addr.0);
        }
        NetworkJoinEndDeviceResponse { status, .. } => w.u8(*status),
        NetworkStartRequest {
            extended_pan_id,
            key_index,
            encrypted_network_key,
            channel,
            pan_id,
            ..
        } => {
            check_channel(*channel)?;
            w.u64(*extended_pan_id);
            w.u8(*key_index);
            w.bytes(encrypted_network_key);
            w.u8(*channel);
            w.u16(*pan_id);
        }
    }
    Ok(())
}

/// Encodes a frame into its canonical length-prefixed byte form.
pub fn encode_frame(frame: &Frame) -> Result<Vec<u8>, WireError> {
    let mut w = Writer {
        buf: Vec::with_capacity(48),
    };
    w.u8(0); // length, patched below
    match frame {
        Frame::Ack(ack) => {
            w.u16(KIND_ACK);
            w.u8(ack.sequence_number);
        }
        Frame::InterPan { header, command } => {
            write_header(&mut w, KIND_INTER_PAN, header)?;
            write_command(&mut w, command)?;
        }
        Frame::Network { header, payload } => {
            write_header(&mut w, KIND_NETWORK, header)?;
            w.u16(payload.src_short.0);
            w.u16(payload.dst_short.0);
            w.u32(payload.frame_counter);
            w.u8(payload.endpoint);
            w.bytes(&payload.ciphertext);
            w.u32(payload.mic);
        }
    }
    let len = w.buf.len() - 1;
    if len > MAX_FRAME_LEN {
        return Err(WireError::InvariantViolation { field: "length" });
    }
    w.buf[0] = len as u8;
    Ok(w.buf)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.buf.len() - self.pos < n {
            return Err(WireError::Truncated { offset: self.pos });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, WireError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }
    fn u32(&mut self) -> Result<u32, WireError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, WireError> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }
    fn key(&mut self) -> Result<[u8; 16], WireError> {
        Ok(self.take(16)?.try_into().unwrap())
    }
    fn channel(&mut self) -> Result<u8, WireError> {
        let offset = self.pos;
        let c = self.u8()?;
        if is_valid_channel(c) {
            Ok(c)
        } else {
            Err(WireError::FieldOutOfRange {
                offset,
                field: "channel",
            })
        }
    }
    fn flag(&mut self, field: &'static str) -> Result<bool, WireError> {
        let offset = self.pos;
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(WireError::FieldOutOfRange { offset, field }),
        }
    }
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

fn read_header(r: &mut Reader<'_>, fc: u16, fc_offset: usize) -> Result<MacHeader, WireError> {
    if fc & FC_SRC_SHORT == 0 && fc & FC_SRC_EXTENDED == 0 {
        return Err(WireError::FieldOutOfRange {
            offset: fc_offset,
            field: "source address",
        });
    }
    let sequence_number = r.u8()?;
    let dst_pan = r.u16()?;
    let src_pan = r.u16()?;
    let dst_short = if fc & FC_DST_SHORT != 0 {
        Some(ShortAddr(r.u16()?))
    } else {
        None
    };
    let dst_extended = if fc & FC_DST_EXTENDED != 0 {
        Some(ExtendedAddr(r.u64()?))
    } else {
        None
    };
    let src_short = if fc & FC_SRC_SHORT != 0 {
        Some(ShortAddr(r.u16()?))
    } else {
        None
    };
    let src_extended = if fc & FC_SRC_EXTENDED != 0 {
        Some(ExtendedAddr(r.u64()?))
    } else {
        None
    };
    Ok(MacHeader {
        sequence_number,
        src_pan,
        dst_pan,
        src_short,
        dst_short,
        src_extended,
        dst_extended,
        ack_requested: fc & FC_ACK_REQUESTED != 0,
    })
}

fn read_command(r: &mut Reader<'_>) -> Result<TouchlinkCommand, WireError> {
    use TouchlinkCommand::*;
    let tag_offset = r.pos;
    let tag = r.u8()?;
    let tid_offset = r.pos;
    let transaction_id = r.u32()?;
    if transaction_id == 0 {
        return Err(WireError::FieldOutOfRange {
            offset: tid_offset,
            field: "transaction_id",
        });
    }
    let cmd = match tag {
        0x00 => ScanRequest { transaction_id },
        0x01 => ScanResponse(super::ScanResponse {
            transaction_id,
            response_id: r.u32()?,
            key_bitmask: r.u16()?,
            network_update_id: r.u8()?,
            channel: r.channel()?,
            pan_id: r.u16()?,
            extended_pan_id: r.u64()?,
            network_address: ShortAddr(r.u16()?),
            factory_new: r.flag("factory_new")?,
            sub_device_count: r.u8()?,
        }),
        0x02 => DeviceInfoRequest { transaction_id },
        0x03 => {
            let count_offset = r.pos;
            let count = r.u8()? as usize;
            if count > MAX_SUB_DEVICE_RECORDS {
                return Err(WireError::FieldOutOfRange {
                    offset: count_offset,
                    field: "sub_device_records",
                });
            }
            let mut sub_device_records = Vec::with_capacity(count);
            for _ in 0..count {
                sub_device_records.push(SubDeviceRecord {
                    extended_addr: ExtendedAddr(r.u64()?),
                    endpoint: r.u8()?,
                    device_id: r.u16()?,
                });
            }
            DeviceInfoResponse {
                transaction_id,
                sub_device_records,
            }
        }
        0x06 => IdentifyRequest {
            transaction_id,
            duration: r.u16()?,
        },
        0x07 => ResetToFactoryNewRequest { transaction_id },
        0x10 => NetworkStartRequest {
            transaction_id,
            extended_pan_id: r.u64()?,
            key_index: r.u8()?,
            encrypted_network_key: r.key()?,
            channel: r.channel()?,
            pan_id: r.u16()?,
        },
        0x14 => NetworkJoinEndDeviceRequest {
            transaction_id,
            extended_pan_id: r.u64()?,
            key_index: r.u8()?,
            encrypted_network_key: r.key()?,
            channel: r.channel()?,
            pan_id: r.u16()?,
            network_update_id: r.u8()?,
            assigned_short_addr: ShortAddr(r.u16()?),
        },
        0x15 => NetworkJoinEndDeviceResponse {
            transaction_id,
            status: r.u8()?,
        },
        0x16 => NetworkUpdateRequest {
            transaction_id,
            extended_pan_id: r.u64()?,
            network_update_id: r.u8()?,
            channel: r.channel()?,
            pan_id: r.u16()?,
            short_addr: ShortAddr(r.u16()?),
        },
        _ => {
            return Err(WireError::UnknownCommandTag {
                offset: tag_offset,
                tag,
            })
        }
    };
    Ok(cmd)
}

/// Decodes one frame from the front of `bytes`.
///
/// Bytes past the declared length are ignored; bytes inside it must be
/// consumed exactly.
pub fn decode_frame(bytes: &[u8]) -> Result<Frame, WireError> {
    let Some(&len) = bytes.first() else {
        return Err(WireError::Truncated { offset: 0 });
    };
    let len = len as usize;
    if len > MAX_FRAME_LEN {
        return Err(WireError::FieldOutOfRange {
            offset: 0,
            field: "length",
        });
    }
    if bytes.len() < 1 + len {
        return Err(WireError::Truncated {
            offset: bytes.len(),
        });
    }
    let mut r = Reader {
        buf: &bytes[..1 + len],
        pos: 1,
    };
    let fc_offset = r.pos;
    let fc = r.u16()?;
    if fc & !FC_KNOWN_BITS != 0 {
        return Err(WireError::FieldOutOfRange {
            offset: fc_offset,
            field: "frame_control",
        });
    }
    let frame = match fc & FC_KIND_MASK {
        KIND_ACK => {
            if fc != KIND_ACK {
                return Err(WireError::FieldOutOfRange {
                    offset: fc_offset,
                    field: "frame_control",
                });
            }
            Frame::Ack(AckFrame {
                sequence_number: r.u8()?,
            })
        }
        KIND_INTER_PAN => {
            let header = read_header(&mut r, fc, fc_offset)?;
            let command = read_command(&mut r)?;
            Frame::InterPan { header, command }
        }
        KIND_NETWORK => {
            let header = read_header(&mut r, fc, fc_offset)?;
            let src_short = ShortAddr(r.u16()?);
            let dst_short = ShortAddr(r.u16()?);
            let frame_counter = r.u32()?;
            let endpoint = r.u8()?;
            if r.remaining() < MIC_LEN {
                return Err(WireError::Truncated { offset: r.pos });
            }
            let ciphertext = r.take(r.remaining() - MIC_LEN)?.to_vec();
            let mic = r.u32()?;
            Frame::Network {
                header,
                payload: SecuredNwkFrame {
                    src_short,
                    dst_short,
                    frame_counter,
                    endpoint,
                    ciphertext,
                    mic,
                },
            }
        }
        _ => {
            return Err(WireError::FieldOutOfRange {
                offset: fc_offset,
                field: "frame_kind",
            })
        }
    };
    if r.remaining() != 0 {
        return Err(WireError::LengthMismatch { offset: r.pos });
    }
    Ok(frame)
}
