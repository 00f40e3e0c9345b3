use proptest::prelude::*;
use touchlink_lab::wire::*;

fn scan_request_from_zero() -> Frame {
    Frame::InterPan {
        header: MacHeader {
            sequence_number: 0,
            src_pan: 0,
            dst_pan: 0,
            src_short: None,
            dst_short: None,
            src_extended: Some(ExtendedAddr(0)),
            dst_extended: None,
            ack_requested: false,
        },
        command: TouchlinkCommand::ScanRequest { transaction_id: 1 },
    }
}

#[test]
fn scan_request_matches_hand_encoding() {
    let bytes = encode_frame(&scan_request_from_zero()).unwrap();
    let want = hex::decode(concat!(
        "14",   // length
        "4100", // frame control: inter-PAN, source extended present
        "00",   // sequence number
        "0000",
        "0000",             // destination and source PAN
        "0000000000000000", // source extended address
        "00",               // scan request
        "01000000",         // transaction id
    ))
    .unwrap();
    assert_eq!(bytes, want);
    assert_eq!(decode_frame(&want).unwrap(), scan_request_from_zero());
}

#[test]
fn identify_duration_is_little_endian() {
    let frame = Frame::InterPan {
        header: MacHeader::inter_pan_unicast(9, ExtendedAddr(1), ExtendedAddr(2), false),
        command: TouchlinkCommand::IdentifyRequest {
            transaction_id: 0x0102_0304,
            duration: 0xFFFE,
        },
    };
    let bytes = encode_frame(&frame).unwrap();
    assert_eq!(
        &bytes[bytes.len() - 7..],
        &[0x06, 0x04, 0x03, 0x02, 0x01, 0xFE, 0xFF]
    );
}

#[test]
fn ack_is_four_bytes() {
    let bytes = encode_frame(&Frame::Ack(AckFrame {
        sequence_number: 0x5a,
    }))
    .unwrap();
    assert_eq!(bytes, [0x03, 0x00, 0x00, 0x5a]);
}

#[test]
fn encoder_refuses_invalid_frames() {
    let mut f = scan_request_from_zero();
    if let Frame::InterPan { command, .. } = &mut f {
        *command = TouchlinkCommand::ScanRequest { transaction_id: 0 };
    }
    assert!(matches!(
        encode_frame(&f),
        Err(WireError::InvariantViolation { .. })
    ));

    let f = Frame::InterPan {
        header: MacHeader::inter_pan_unicast(1, ExtendedAddr(1), ExtendedAddr(2), false),
        command: TouchlinkCommand::NetworkUpdateRequest {
            transaction_id: 1,
            extended_pan_id: 1,
            network_update_id: 1,
            channel: 27,
            pan_id: 1,
            short_addr: ShortAddr(1),
        },
    };
    assert_eq!(
        encode_frame(&f),
        Err(WireError::InvariantViolation { field: "channel" })
    );

    let mut header = MacHeader::inter_pan_broadcast(1, ExtendedAddr(1));
    header.src_extended = None;
    let f = Frame::InterPan {
        header,
        command: TouchlinkCommand::ScanRequest { transaction_id: 1 },
    };
    assert!(encode_frame(&f).is_err());

    let records = vec![
        SubDeviceRecord {
            extended_addr: ExtendedAddr(1),
            endpoint: 1,
            device_id: 1,
        };
        MAX_SUB_DEVICE_RECORDS + 1
    ];
    let f = Frame::InterPan {
        header: MacHeader::inter_pan_unicast(1, ExtendedAddr(1), ExtendedAddr(2), false),
        command: TouchlinkCommand::DeviceInfoResponse {
            transaction_id: 1,
            sub_device_records: records,
        },
    };
    assert!(encode_frame(&f).is_err());
}

#[test]
fn decoder_reports_typed_errors() {
    let good = encode_frame(&scan_request_from_zero()).unwrap();
    assert_eq!(decode_frame(&[]), Err(WireError::Truncated { offset: 0 }));
    assert!(matches!(
        decode_frame(&good[..good.len() - 1]),
        Err(WireError::Truncated { .. })
    ));

    let mut zero_tid = good.clone();
    let n = zero_tid.len();
    zero_tid[n - 4] = 0;
    assert!(matches!(
        decode_frame(&zero_tid),
        Err(WireError::FieldOutOfRange {
            field: "transaction_id",
            ..
        })
    ));

    let mut unknown = good.clone();
    unknown[n - 5] = 0x42;
    assert_eq!(
        decode_frame(&unknown),
        Err(WireError::UnknownCommandTag {
            offset: n - 5,
            tag: 0x42
        })
    );

    let mut reserved = good.clone();
    reserved[2] |= 0x80;
    assert!(matches!(
        decode_frame(&reserved),
        Err(WireError::FieldOutOfRange {
            field: "frame_control",
            ..
        })
    ));

    // One extra byte inside the declared length.
    let mut long = good.clone();
    long[0] += 1;
    long.push(0);
    assert!(matches!(
        decode_frame(&long),
        Err(WireError::LengthMismatch { .. })
    ));

    // Bytes past the declared length are not part of the frame.
    let mut trailing = good.clone();
    trailing.extend_from_slice(&[0xde, 0xad]);
    assert_eq!(decode_frame(&trailing).unwrap(), scan_request_from_zero());
}

fn channel() -> impl Strategy<Value = u8> {
    CHANNEL_MIN..=CHANNEL_MAX
}

fn header() -> impl Strategy<Value = MacHeader> {
    (
        any::<u8>(),
        any::<u16>(),
        any::<u16>(),
        proptest::option::of(any::<u16>().prop_map(ShortAddr)),
        proptest::option::of(any::<u16>().prop_map(ShortAddr)),
        proptest::option::of(any::<u64>().prop_map(ExtendedAddr)),
        proptest::option::of(any::<u64>().prop_map(ExtendedAddr)),
        any::<bool>(),
    )
        .prop_filter("a source address is required", |h| {
            h.5.is_some() || h.3.is_some()
        })
        .prop_map(|(seq, sp, dp, ss, ds, se, de, ack)| MacHeader {
            sequence_number: seq,
            src_pan: sp,
            dst_pan: dp,
            src_short: ss,
            dst_short: ds,
            src_extended: se,
            dst_extended: de,
            ack_requested: ack,
        })
}

fn command() -> impl Strategy<Value = TouchlinkCommand> {
    use TouchlinkCommand::*;
    let tid = 1u32..;
    let record = (any::<u64>(), any::<u8>(), any::<u16>()).prop_map(|(a, e, d)| SubDeviceRecord {
        extended_addr: ExtendedAddr(a),
        endpoint: e,
        device_id: d,
    });
    prop_oneof![
        tid.clone().prop_map(|t| ScanRequest { transaction_id: t }),
        (
            tid.clone(),
            any::<u32>(),
            any::<u16>(),
            any::<u8>(),
            channel(),
            any::<u16>(),
            any::<u64>(),
            any::<u16>(),
            any::<bool>(),
            any::<u8>()
        )
            .prop_map(|(t, r, k, u, c, p, e, n, f, s)| ScanResponse(
                touchlink_lab::wire::ScanResponse {
                    transaction_id: t,
                    response_id: r,
                    key_bitmask: k,
                    network_update_id: u,
                    channel: c,
                    pan_id: p,
                    extended_pan_id: e,
                    network_address: ShortAddr(n),
                    factory_new: f,
                    sub_device_count: s,
                }
            )),
        tid.clone()
            .prop_map(|t| DeviceInfoRequest { transaction_id: t }),
        (
            tid.clone(),
            proptest::collection::vec(record, 0..=MAX_SUB_DEVICE_RECORDS)
        )
            .prop_map(|(t, r)| DeviceInfoResponse {
                transaction_id: t,
                sub_device_records: r
            }),
        (tid.clone(), any::<u16>()).prop_map(|(t, d)| IdentifyRequest {
            transaction_id: t,
            duration: d
        }),
        tid.clone()
            .prop_map(|t| ResetToFactoryNewRequest { transaction_id: t }),
        (
            tid.clone(),
            any::<u64>(),
            any::<u8>(),
            channel(),
            any::<u16>(),
            any::<u16>()
        )
            .prop_map(|(t, e, u, c, p, s)| NetworkUpdateRequest {
                transaction_id: t,
                extended_pan_id: e,
                network_update_id: u,
                channel: c,
                pan_id: p,
                short_addr: ShortAddr(s),
            }),
        (
            tid.clone(),
            any::<u64>(),
            any::<u8>(),
            any::<[u8; 16]>(),
            channel(),
            any::<u16>(),
            any::<u8>(),
            any::<u16>()
        )
            .prop_map(|(t, e, k, key, c, p, u, s)| NetworkJoinEndDeviceRequest {
                transaction_id: t,
                extended_pan_id: e,
                key_index: k,
                encrypted_network_key: key,
                channel: c,
                pan_id: p,
                network_update_id: u,
                assigned_short_addr: ShortAddr(s),
            }),
        (tid.clone(), any::<u8>()).prop_map(|(t, s)| NetworkJoinEndDeviceResponse {
            transaction_id: t,
            status: s
        }),
        (
            tid,
            any::<u64>(),
            any::<u8>(),
            any::<[u8; 16]>(),
            channel(),
            any::<u16>()
        )
            .prop_map(|(t, e, k, key, c, p)| NetworkStartRequest {
                transaction_id: t,
                extended_pan_id: e,
                key_index: k,
                encrypted_network_key: key,
                channel: c,
                pan_id: p,
            }),
    ]
}

fn frame() -> impl Strategy<Value = Frame> {
    prop_oneof![
        any::<u8>().prop_map(|s| Frame::Ack(AckFrame { sequence_number: s })),
        (header(), command()).prop_map(|(header, command)| Frame::InterPan { header, command }),
        (
            header(),
            any::<u16>(),
            any::<u16>(),
            any::<u32>(),
            any::<u8>(),
            proptest::collection::vec(any::<u8>(), 0..48),
            any::<u32>()
        )
            .prop_map(|(header, s, d, fc, ep, ct, mic)| Frame::Network {
                header,
                payload: SecuredNwkFrame {
                    src_short: ShortAddr(s),
                    dst_short: ShortAddr(d),
                    frame_counter: fc,
                    endpoint: ep,
                    ciphertext: ct,
                    mic,
                },
            }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn encode_decode_round_trip(f in frame()) {
        match encode_frame(&f) {
            Ok(bytes) => {
                prop_assert!(bytes.len() <= MAX_FRAME_LEN + 1);
                prop_assert_eq!(bytes[0] as usize, bytes.len() - 1);
                prop_assert_eq!(decode_frame(&bytes)?, f);
            }
            Err(e) => prop_assert_eq!(e, WireError::InvariantViolation { field: "length" }),
        }
    }

    #[test]
    fn distinct_frames_encode_differently(a in frame(), b in frame()) {
        if let (Ok(x), Ok(y)) = (encode_frame(&a), encode_frame(&b)) {
            prop_assert_eq!(x == y, a == b);
        }
    }

    /// The decoder is total: any input yields a frame or a typed error, and
    /// a decoded frame re-encodes to the bytes it came from.
    #[test]
    fn decoder_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..1024)) {
        if let Ok(f) = decode_frame(&bytes) {
            let again = encode_frame(&f)?;
            prop_assert_eq!(&again[..], &bytes[..again.len()]);
        }
    }

    #[test]
    fn decoder_handles_mutated_valid_frames(f in frame(), pos in any::<usize>(), val in any::<u8>()) {
        if let Ok(mut bytes) = encode_frame(&f) {
            let i = pos % bytes.len();
            bytes[i] = val;
            let _ = decode_frame(&bytes);
            let _ = decode_frame(&bytes[..i]);
        }
    }
}
