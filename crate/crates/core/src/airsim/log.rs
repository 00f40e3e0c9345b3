use std::fmt;

use super::{NodeId, SimTime};
use crate::devices::DropReason;
use crate::wire::hexlog::HexLine;
use crate::wire::{ClusterCommand, ShortAddr};

/// One line of the simulation event log.
///
/// Frame deliveries use the plain hex-dump layout
/// `<time> <channel> <rssi> <hex>`; every other record carries a keyword in
/// the second field.
#[derive(Clone, Debug, PartialEq)]
pub enum LogRecord {
    Frame(HexLine),
    Tx {
        at: SimTime,
        node: NodeId,
        name: String,
        channel: u8,
        label: &'static str,
        len: usize,
    },
    Drop {
        at: SimTime,
        node: NodeId,
        name: String,
        frame: &'static str,
        reason: DropReason,
    },
    State {
        at: SimTime,
        node: NodeId,
        name: String,
        change: String,
    },
    Applied {
        at: SimTime,
        node: NodeId,
        name: String,
        src: ShortAddr,
        command: ClusterCommand,
    },
    Note {
        at: SimTime,
        text: String,
    },
}

impl LogRecord {
    pub fn at(&self) -> SimTime {
        match self {
            LogRecord::Frame(l) => l.time_us,
            LogRecord::Tx { at, .. }
            | LogRecord::Drop { at, .. }
            | LogRecord::State { at, .. }
            | LogRecord::Applied { at, .. }
            | LogRecord::Note { at, .. } => *at,
        }
    }

    pub fn node(&self) -> Option<NodeId> {
        match self {
            LogRecord::Tx { node, .. }
            | LogRecord::Drop { node, .. }
            | LogRecord::State { node, .. }
            | LogRecord::Applied { node, .. } => Some(*node),
            LogRecord::Frame(_) | LogRecord::Note { .. } => None,
        }
    }
}

impl fmt::Display for LogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogRecord::Frame(line) => line.fmt(f),
            LogRecord::Tx {
                at,
                name,
                channel,
                label,
                len,
                ..
            } => write!(f, "{at} tx {name} ch={channel} {label} len={len}"),
            LogRecord::Drop {
                at,
                name,
                frame,
                reason,
                ..
            } => write!(f, "{at} drop {name} {frame} {reason}"),
            LogRecord::State {
                at, name, change, ..
            } => write!(f, "{at} state {name} {change}"),
            LogRecord::Applied {
                at,
                name,
                src,
                command,
                ..
            } => write!(f, "{at} applied {name} src={src} {command}"),
            LogRecord::Note { at, text } => write!(f, "{at} note {text}"),
        }
    }
}
