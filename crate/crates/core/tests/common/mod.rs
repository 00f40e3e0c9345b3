//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use touchlink_lab::airsim::{NodeId, PathLossModel, Position, Role, Simulation};
use touchlink_lab::attacks::{Attacker, AttackerConfig};
use touchlink_lab::crypto::Key128;
use touchlink_lab::devices::{EndDevice, Initiator, NetworkParams, ProfileKind};
use touchlink_lab::wire::ShortAddr;

/// Stand-in light-link master key shared by devices and attacker.
pub const MASTER: Key128 = Key128([
    0x9f, 0x3c, 0x5a, 0x7e, 0x1b, 0x2d, 0x4c, 0x6f, 0x8a, 0x0e, 0x2b, 0x4d, 0x6c, 0x8f, 0x1a, 0x3e,
]);

pub const HOME_KEY: Key128 = Key128([
    0x2b, 0x7e, 0x15, 0x16, 0x28, 0xae, 0xd2, 0xa6, 0xab, 0xf7, 0x15, 0x88, 0x09, 0xcf, 0x4f, 0x3c,
]);

pub const HOME_CHANNEL: u8 = 15;

pub fn network(short: u16) -> NetworkParams {
    NetworkParams {
        pan_id: 0x4a21,
        extended_pan_id: 0x0017_8801_a2b3_c4d5,
        channel: HOME_CHANNEL,
        network_key: HOME_KEY,
        network_update_id: 0,
        short_addr: ShortAddr(short),
    }
}

pub fn add_bulb(
    sim: &mut Simulation,
    name: &str,
    kind: ProfileKind,
    pos: Position,
    net: Option<NetworkParams>,
) -> NodeId {
    let device = match net {
        Some(net) => EndDevice::joined(kind, MASTER, net),
        None => EndDevice::new(kind, MASTER),
    };
    sim.add_node(name, pos, 0.0, Role::EndDevice(device))
}

pub fn add_initiator(
    sim: &mut Simulation,
    name: &str,
    kind: ProfileKind,
    pos: Position,
    net: Option<NetworkParams>,
) -> NodeId {
    let mut initiator = Initiator::new(kind, MASTER, net);
    initiator.next_short_addr = 0x0010;
    sim.add_node(name, pos, 0.0, Role::Initiator(initiator))
}

/// The bridge, gateway or hub sold with a bulb.
pub fn controller_for(bulb: ProfileKind) -> ProfileKind {
    match bulb {
        ProfileKind::HueBulb => ProfileKind::HueBridge,
        ProfileKind::LightifyBulb => ProfileKind::LightifyGateway,
        ProfileKind::LinkBulb => ProfileKind::LinkHub,
        other => panic!("{other} is not a bulb"),
    }
}

pub const BULBS: [ProfileKind; 3] = [
    ProfileKind::HueBulb,
    ProfileKind::LightifyBulb,
    ProfileKind::LinkBulb,
];

/// A controller at the origin and one joined bulb 0.5 m away (inside the
/// legitimate touchlink range of every profile).
pub struct Home {
    pub sim: Simulation,
    pub controller: NodeId,
    pub bulb: NodeId,
}

pub fn home(kind: ProfileKind, seed: u64) -> Home {
    let mut sim = Simulation::new(PathLossModel::default(), seed);
    let controller = add_initiator(
        &mut sim,
        "controller",
        controller_for(kind),
        Position::new(0.0, 0.0),
        Some(network(0x0000)),
    );
    let bulb = add_bulb(
        &mut sim,
        "bulb",
        kind,
        Position::new(0.5, 0.0),
        Some(network(0x0001)),
    );
    Home {
        sim,
        controller,
        bulb,
    }
}

impl Home {
    /// An attacker with the master key that spoofs the controller's
    /// extended address.
    pub fn attacker(&mut self, pos: Position, tx_power_dbm: f64) -> Attacker {
        let spoof = self.sim.node(self.controller).extended_addr;
        Attacker::deploy(
            &mut self.sim,
            "attacker",
            AttackerConfig {
                tx_power_dbm,
                spoof_extended_src: Some(spoof),
                master_key: Some(MASTER),
                position: pos,
                ..AttackerConfig::default()
            },
        )
    }

    pub fn bulb_ext(&self) -> touchlink_lab::wire::ExtendedAddr {
        self.sim.node(self.bulb).extended_addr
    }
}

/// Textbook AES-128 block encryption, independent of the `aes` crate.
pub mod reference_aes {
    fn xtime(a: u8) -> u8 {
        (a << 1) ^ if a & 0x80 != 0 { 0x1b } else { 0 }
    }

    fn gmul(mut a: u8, mut b: u8) -> u8 {
        let mut p = 0;
        while b != 0 {
            if b & 1 != 0 {
                p ^= a;
            }
            a = xtime(a);
            b >>= 1;
        }
        p
    }

    fn sbox() -> [u8; 256] {
        let mut s = [0u8; 256];
        for x in 0..=255u8 {
            let inv = if x == 0 {
                0
            } else {
                (1..=255u8).find(|&y| gmul(x, y) == 1).unwrap()
            };
            s[x as usize] = inv
                ^ inv.rotate_left(1)
                ^ inv.rotate_left(2)
                ^ inv.rotate_left(3)
                ^ inv.rotate_left(4)
                ^ 0x63;
        }
        s
    }

    pub fn encrypt_block(key: &[u8; 16], block: &[u8; 16]) -> [u8; 16] {
        let sbox = sbox();
        let mut w = [[0u8; 4]; 44];
        for i in 0..4 {
            w[i].copy_from_slice(&key[4 * i..4 * i + 4]);
        }
        let mut rcon = 1u8;
        for i in 4..44 {
            let mut t = w[i - 1];
            if i % 4 == 0 {
                t = [
                    sbox[t[1] as usize],
                    sbox[t[2] as usize],
                    sbox[t[3] as usize],
                    sbox[t[0] as usize],
                ];
                t[0] ^= rcon;
                rcon = xtime(rcon);
            }
            for j in 0..4 {
                w[i][j] = w[i - 4][j] ^ t[j];
            }
        }
        let add = |s: &mut [u8; 16], round: usize| {
            for c in 0..4 {
                for r in 0..4 {
                    s[4 * c + r] ^= w[4 * round + c][r];
                }
            }
        };
        let mut s = *block;
        add(&mut s, 0);
        for round in 1..=10 {
            for b in s.iter_mut() {
                *b = sbox[*b as usize];
            }
            let old = s;
            for c in 0..4 {
                for r in 0..4 {
                    s[4 * c + r] = old[4 * ((c + r) % 4) + r];
                }
            }
            if round != 10 {
                for c in 0..4 {
                    let a = [s[4 * c], s[4 * c + 1], s[4 * c + 2], s[4 * c + 3]];
                    s[4 * c] = gmul(a[0], 2) ^ gmul(a[1], 3) ^ a[2] ^ a[3];
                    s[4 * c + 1] = a[0] ^ gmul(a[1], 2) ^ gmul(a[2], 3) ^ a[3];
                    s[4 * c + 2] = a[0] ^ a[1] ^ gmul(a[2], 2) ^ gmul(a[3], 3);
                    s[4 * c + 3] = gmul(a[0], 3) ^ a[1] ^ a[2] ^ gmul(a[3], 2);
                }
            }
            add(&mut s, round);
        }
        s
    }
}
