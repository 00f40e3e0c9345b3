//! Scenario files: a deployment (networks and nodes) plus a timed script of
//! commissioning steps, attacks and expectations.
//!
//! ```text
//! seed = 7
//! master_key = 00112233445566778899aabbccddeeff
//!
//! [networks]
//! home channel=15 pan=0x1a2b epan=0x00d1e2f3a4b5c6d7 key=… update_id=0
//!
//! [nodes]
//! bridge   hue-bridge network=home pos=0,0
//! bulb     hue-bulb   network=home pos=1,0
//! attacker attacker   pos=30,0 tx=26
//!
//! [script]
//! at 1s hijack attacker target=bulb expect=success
//! at 2s expect bulb key=…
//! ```
//!
//! The full grammar is documented in `docs/scenario-format.md`.

mod parse;
mod run;

use std::fmt;

use thiserror::Error;

use crate::airsim::{PathLossModel, Position, SimTime};
use crate::crypto::Key128;
use crate::devices::ProfileKind;
use crate::wire::ClusterCommand;

pub use parse::parse;
pub use run::{run_scenario, ActionOutcome, RunOutput, Runner, StepRecord};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: invalid {field}: {message}")]
    Validation {
        line: usize,
        field: String,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ScenarioError {
    /// Name of the offending field for validation errors.
    pub fn field(&self) -> Option<&str> {
        match self {
            ScenarioError::Validation { field, .. } => Some(field),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    /// Shared light-link master key. When absent the devices use a secret
    /// drawn from the seed and the attacker knows no master key.
    pub master_key: Option<Key128>,
    pub path_loss: PathLossModel,
    pub networks: Vec<NetworkDef>,
    pub nodes: Vec<NodeDef>,
    pub script: Vec<Step>,
}

impl Scenario {
    pub fn node(&self, name: &str) -> Option<&NodeDef> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn network(&self, name: &str) -> Option<&NetworkDef> {
        self.networks.iter().find(|n| n.name == name)
    }

    /// The first attacker node, if any.
    pub fn attacker(&self) -> Option<&NodeDef> {
        self.nodes.iter().find(|n| n.kind == NodeKind::Attacker)
    }
}

impl std::str::FromStr for Scenario {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkDef {
    pub name: String,
    pub channel: u8,
    pub pan_id: u16,
    pub extended_pan_id: u64,
    pub key: Key128,
    pub update_id: u8,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Device(ProfileKind),
    Attacker,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeKind::Device(kind) => kind.fmt(f),
            NodeKind::Attacker => f.write_str("attacker"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeDef {
    pub name: String,
    pub kind: NodeKind,
    pub position: Position,
    pub tx_power_dbm: f64,
    pub network: Option<String>,
    pub short_addr: Option<u16>,
    /// Initiators only: whether the MAC acknowledges addressed frames.
    pub auto_ack: bool,
    /// Attackers only.
    pub spoof: Option<String>,
    pub ack_latency_us: Option<u64>,
    pub network_channel: Option<u8>,
}

impl NodeDef {
    pub fn new(name: impl Into<String>, kind: NodeKind) -> Self {
        NodeDef {
            name: name.into(),
            kind,
            position: Position::default(),
            tx_power_dbm: 0.0,
            network: None,
            short_addr: None,
            auto_ack: true,
            spoof: None,
            ack_latency_us: None,
            network_channel: None,
        }
    }
}

/// Which scan respondent a commissioning step selects.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TargetSpec {
    Any,
    FactoryNew,
    Node(String),
}

impl fmt::Display for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetSpec::Any => f.write_str("any"),
            TargetSpec::FactoryNew => f.write_str("factory-new"),
            TargetSpec::Node(n) => f.write_str(n),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    PressButton {
        node: String,
    },
    TouchlinkJoin {
        node: String,
        target: TargetSpec,
    },
    UserCommand {
        node: String,
        dst: u16,
        command: ClusterCommand,
    },
    Recover {
        node: String,
        target: TargetSpec,
    },
    PhysicalReset {
        node: String,
    },
    Listen {
        node: String,
        channel: u8,
    },
    Scan {
        node: String,
    },
    Blink {
        node: String,
        target: String,
        duration: u16,
    },
    Reset {
        node: String,
        target: String,
    },
    DosChannel {
        node: String,
        target: String,
        channel: u8,
        update_id: Option<u8>,
    },
    DosJoin {
        node: String,
        target: String,
    },
    Hijack {
        node: String,
        target: String,
        key: Option<Key128>,
    },
    ExtractKey {
        node: String,
    },
    Inject {
        node: String,
        dst: u16,
        command: ClusterCommand,
        key: Option<Key128>,
        pan: Option<u16>,
        channel: Option<u8>,
    },
    Expect {
        node: String,
        fields: Vec<(String, String)>,
    },
}

impl Action {
    pub fn keyword(&self) -> &'static str {
        match self {
            Action::PressButton { .. } => "press_button",
            Action::TouchlinkJoin { .. } => "touchlink_join",
            Action::UserCommand { .. } => "user_command",
            Action::Recover { .. } => "recover",
            Action::PhysicalReset { .. } => "physical_reset",
            Action::Listen { .. } => "listen",
            Action::Scan { .. } => "scan",
            Action::Blink { .. } => "blink",
            Action::Reset { .. } => "reset",
            Action::DosChannel { .. } => "dos_channel",
            Action::DosJoin { .. } => "dos_join",
            Action::Hijack { .. } => "hijack",
            Action::ExtractKey { .. } => "extract_key",
            Action::Inject { .. } => "inject",
            Action::Expect { .. } => "expect",
        }
    }

    pub fn node(&self) -> &str {
        match self {
            Action::PressButton { node }
            | Action::TouchlinkJoin { node, .. }
            | Action::UserCommand { node, .. }
            | Action::Recover { node, .. }
            | Action::PhysicalReset { node }
            | Action::Listen { node, .. }
            | Action::Scan { node }
            | Action::Blink { node, .. }
            | Action::Reset { node, .. }
            | Action::DosChannel { node, .. }
            | Action::DosJoin { node, .. }
            | Action::Hijack { node, .. }
            | Action::ExtractKey { node }
            | Action::Inject { node, .. }
            | Action::Expect { node, .. } => node,
        }
    }

    /// Attack steps are skipped when only the setup part of a script runs.
    pub fn is_attack(&self) -> bool {
        matches!(
            self,
            Action::Scan { .. }
                | Action::Blink { .. }
                | Action::Reset { .. }
                | Action::DosChannel { .. }
                | Action::DosJoin { .. }
                | Action::Hijack { .. }
                | Action::ExtractKey { .. }
                | Action::Inject { .. }
        )
    }
}

/// One timed script line.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub at: SimTime,
    pub action: Action,
    /// Required outcome kind (`success`, `no-effect`, or an error kind such
    /// as `ack-timeout`); unchecked when absent.
    pub expect: Option<String>,
}

/// Outcome kinds accepted by `expect=`.
pub const OUTCOME_KINDS: &[&str] = &[
    "success",
    "no-effect",
    "ack-timeout",
    "rejected",
    "master-key-required",
    "target-not-found",
    "incomplete-capture",
    "mixed-transactions",
    "no-device-found",
    "join-refused",
    "not-joined",
    "unsupported",
    "no-network-key",
    "error",
];

/// Keys that `expect` lines may compare against a device snapshot.
pub const SNAPSHOT_KEYS: &[&str] = &[
    "node",
    "profile",
    "ext",
    "factory_new",
    "listen",
    "channel",
    "pan",
    "epan",
    "key",
    "update_id",
    "short",
    "lamp",
    "hue",
    "brightness",
    "identify_until",
    "pos",
];

/// Formats a time in the largest exact unit (`s`, `ms`, `us`).
pub fn format_time(us: SimTime) -> String {
    if us.is_multiple_of(1_000_000) {
        format!("{}s", us / 1_000_000)
    } else if us.is_multiple_of(1_000) {
        format!("{}ms", us / 1_000)
    } else {
        format!("{us}us")
    }
}
