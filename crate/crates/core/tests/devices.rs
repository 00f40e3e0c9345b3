mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use touchlink_lab::airsim::{PathLossModel, Position, Simulation};
use touchlink_lab::crypto::{ccm_encrypt, Key128};
use touchlink_lab::devices::*;
use touchlink_lab::wire::*;

const ME: ExtendedAddr = ExtendedAddr(0x00ab);
const PEER: ExtendedAddr = ExtendedAddr(0x00cd);
const NEAR: f64 = -30.0;

fn bulb(kind: ProfileKind, net: Option<NetworkParams>) -> EndDevice {
    let mut dev = match net {
        Some(n) => EndDevice::joined(kind, MASTER, n),
        None => EndDevice::new(kind, MASTER),
    };
    dev.extended_addr = ME;
    dev
}

fn touchlink(command: TouchlinkCommand) -> Frame {
    Frame::InterPan {
        header: MacHeader::inter_pan_unicast(1, PEER, ME, false),
        command,
    }
}

/// Opens a transaction on a device that needs no MAC acknowledgment.
fn open(dev: &mut EndDevice, tid: u32, now: u64, rng: &mut ChaCha8Rng) {
    let scan = Frame::InterPan {
        header: MacHeader::inter_pan_broadcast(1, PEER),
        command: TouchlinkCommand::ScanRequest {
            transaction_id: tid,
        },
    };
    let r = dev.handle_frame(&scan, NEAR, now, rng);
    assert_eq!(r.transmissions.len(), 1);
    assert!(dev.pending.is_some());
}

fn secured(
    key: &Key128,
    src: u16,
    counter: u32,
    cmd: ClusterCommand,
    net: &NetworkParams,
) -> Frame {
    let (ciphertext, mic) = ccm_encrypt(key, src, counter, &cmd.to_bytes());
    Frame::Network {
        header: MacHeader {
            sequence_number: 1,
            src_pan: net.pan_id,
            dst_pan: net.pan_id,
            src_short: Some(ShortAddr(src)),
            dst_short: Some(net.short_addr),
            src_extended: None,
            dst_extended: None,
            ack_requested: false,
        },
        payload: SecuredNwkFrame {
            src_short: ShortAddr(src),
            dst_short: net.short_addr,
            frame_counter: counter,
            endpoint: LIGHT_ENDPOINT,
            ciphertext,
            mic,
        },
    }
}

#[test]
fn commands_outside_a_transaction_are_dropped() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut dev = bulb(ProfileKind::HueBulb, Some(network(1)));
    let r = dev.handle_frame(
        &touchlink(TouchlinkCommand::ResetToFactoryNewRequest { transaction_id: 5 }),
        NEAR,
        0,
        &mut rng,
    );
    assert_eq!(
        r.dropped_reasons().collect::<Vec<_>>(),
        [DropReason::NoTransaction]
    );
    assert!(!dev.factory_new);

    open(&mut dev, 5, 0, &mut rng);
    let r = dev.handle_frame(
        &touchlink(TouchlinkCommand::ResetToFactoryNewRequest { transaction_id: 6 }),
        NEAR,
        10,
        &mut rng,
    );
    assert_eq!(
        r.dropped_reasons().collect::<Vec<_>>(),
        [DropReason::TransactionMismatch]
    );
}

#[test]
fn transactions_expire_after_eight_seconds() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut dev = bulb(ProfileKind::HueBulb, Some(network(1)));
    open(&mut dev, 5, 0, &mut rng);
    let reset = touchlink(TouchlinkCommand::ResetToFactoryNewRequest { transaction_id: 5 });
    let r = dev.handle_frame(&reset, NEAR, TRANSACTION_LIFETIME_US + 1, &mut rng);
    assert_eq!(
        r.dropped_reasons().collect::<Vec<_>>(),
        [DropReason::TransactionExpired]
    );

    open(&mut dev, 7, 0, &mut rng);
    let reset = touchlink(TouchlinkCommand::ResetToFactoryNewRequest { transaction_id: 7 });
    dev.handle_frame(&reset, NEAR, TRANSACTION_LIFETIME_US, &mut rng);
    assert!(dev.factory_new);
}

#[test]
fn weak_touchlink_frames_are_ignored() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut dev = bulb(ProfileKind::HueBulb, None);
    let scan = Frame::InterPan {
        header: MacHeader::inter_pan_broadcast(1, PEER),
        command: TouchlinkCommand::ScanRequest { transaction_id: 1 },
    };
    let r = dev.handle_frame(&scan, -40.01, 0, &mut rng);
    assert_eq!(
        r.dropped_reasons().collect::<Vec<_>>(),
        [DropReason::RssiBelowThreshold]
    );
    let r = dev.handle_frame(&scan, -40.0, 0, &mut rng);
    assert_eq!(r.transmissions.len(), 1);
}

#[test]
fn replayed_frames_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let net = network(1);
    let mut dev = bulb(ProfileKind::HueBulb, Some(net.clone()));
    let off = secured(&HOME_KEY, 0, 10, ClusterCommand::Off, &net);
    dev.handle_frame(&off, NEAR, 0, &mut rng);
    assert!(!dev.lamp.on);
    dev.lamp.on = true;
    let r = dev.handle_frame(&off, NEAR, 1, &mut rng);
    assert_eq!(
        r.dropped_reasons().collect::<Vec<_>>(),
        [DropReason::ReplayedCounter]
    );
    assert!(dev.lamp.on);
}

#[test]
fn frames_under_a_foreign_key_fail_integrity() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let net = network(1);
    let mut dev = bulb(ProfileKind::HueBulb, Some(net.clone()));
    let forged = secured(&Key128([7; 16]), 0, 1, ClusterCommand::Off, &net);
    let r = dev.handle_frame(&forged, NEAR, 0, &mut rng);
    assert_eq!(
        r.dropped_reasons().collect::<Vec<_>>(),
        [DropReason::IntegrityFailure]
    );
    assert!(dev.lamp.on);
}

#[test]
fn hue_bulbs_cannot_be_reset_by_hand() {
    assert!(bulb(ProfileKind::HueBulb, Some(network(1)))
        .physical_reset()
        .is_err());
    for kind in [ProfileKind::LightifyBulb, ProfileKind::LinkBulb] {
        let mut dev = bulb(kind, Some(network(1)));
        dev.physical_reset().unwrap();
        assert!(dev.factory_new);
    }
}

#[test]
fn bridge_button_window_is_thirty_seconds_inclusive() {
    let mut sim = Simulation::new(PathLossModel::default(), 0);
    let bridge = add_initiator(
        &mut sim,
        "bridge",
        ProfileKind::HueBridge,
        Position::new(0.0, 0.0),
        Some(network(0)),
    );
    let pressed = 5_000_000;
    sim.initiator_mut(bridge)
        .unwrap()
        .press_button(pressed)
        .unwrap();
    let i = sim.initiator(bridge).unwrap();
    assert!(!i.answers_touchlink(pressed - 1));
    assert!(i.answers_touchlink(pressed));
    assert!(i.answers_touchlink(pressed + 30_000_000));
    assert!(!i.answers_touchlink(pressed + 30_000_001));

    let mut gw = Initiator::new(ProfileKind::LinkHub, MASTER, Some(network(0)));
    assert!(gw.press_button(0).is_err());
    assert!(!gw.answers_touchlink(0));
}

proptest! {
    #[test]
    fn identify_is_capped_per_profile(duration in 1u16..0xFFFF, k in 0usize..3) {
        let kind = BULBS[k];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut dev = bulb(kind, None);
        // Lightify and Link need an acknowledged scan response; accept it
        // through the ack path by clearing the wait.
        open(&mut dev, 3, 0, &mut rng);
        dev.awaiting_ack = None;
        dev.handle_frame(
            &touchlink(TouchlinkCommand::IdentifyRequest { transaction_id: 3, duration }),
            NEAR,
            100,
            &mut rng,
        );
        let cap = kind.profile().max_identify_s;
        let secs = (dev.identify_until.unwrap() - 100) / 1_000_000;
        prop_assert_eq!(secs, u64::from(duration.min(cap)));
    }

    #[test]
    fn network_update_requires_strictly_newer_id(current in any::<u8>(), offered in any::<u8>(), same_epan in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = network(1);
        net.network_update_id = current;
        let mut dev = bulb(ProfileKind::HueBulb, Some(net.clone()));
        open(&mut dev, 9, 0, &mut rng);
        dev.handle_frame(
            &touchlink(TouchlinkCommand::NetworkUpdateRequest {
                transaction_id: 9,
                extended_pan_id: if same_epan { net.extended_pan_id } else { !net.extended_pan_id },
                network_update_id: offered,
                channel: 26,
                pan_id: net.pan_id,
                short_addr: net.short_addr,
            }),
            NEAR,
            10,
            &mut rng,
        );
        let moved = dev.channel() == 26;
        prop_assert_eq!(moved, same_epan && offered > current);
    }

    #[test]
    fn frames_for_other_devices_change_nothing(dst in any::<u64>(), tid in 1u32..) {
        prop_assume!(ExtendedAddr(dst) != ME);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut dev = bulb(ProfileKind::HueBulb, Some(network(1)));
        open(&mut dev, tid, 0, &mut rng);
        let before = format!("{dev:?}");
        let frame = Frame::InterPan {
            header: MacHeader::inter_pan_unicast(1, PEER, ExtendedAddr(dst), false),
            command: TouchlinkCommand::ResetToFactoryNewRequest { transaction_id: tid },
        };
        let r = dev.handle_frame(&frame, NEAR, 5, &mut rng);
        prop_assert!(r.transmissions.is_empty());
        prop_assert_eq!(before, format!("{dev:?}"));
    }
}
