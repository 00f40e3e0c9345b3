use std::fmt;
use std::str::FromStr;

use super::WireError;

/// Application command carried (encrypted) inside a secured network frame.
///
/// Only the on/off, level and color-set commands of the cluster library are modeled.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ClusterCommand {
    Off,
    On,
    Level(u8),
    Color { hue: u16 },
}

impl ClusterCommand {
    pub fn to_bytes(self) -> Vec<u8> {
        match self {
            ClusterCommand::Off => vec![0x00],
            ClusterCommand::On => vec![0x01],
            ClusterCommand::Level(level) => vec![0x04, level],
            ClusterCommand::Color { hue } => {
                let [lo, hi] = hue.to_le_bytes();
                vec![0x06, lo, hi]
            }
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        match bytes {
            [] => Err(WireError::Truncated { offset: 0 }),
            [0x00] => Ok(ClusterCommand::Off),
            [0x01] => Ok(ClusterCommand::On),
            [0x04, level] => Ok(ClusterCommand::Level(*level)),
            [0x06, lo, hi] => Ok(ClusterCommand::Color {
                hue: u16::from_le_bytes([*lo, *hi]),
            }),
            [0x00 | 0x01 | 0x04 | 0x06, ..] => Err(WireError::LengthMismatch { offset: 0 }),
            [tag, ..] => Err(WireError::UnknownCommandTag {
                offset: 0,
                tag: *tag,
            }),
        }
    }
}

impl fmt::Display for ClusterCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusterCommand::Off => f.write_str("off"),
            ClusterCommand::On => f.write_str("on"),
            ClusterCommand::Level(l) => write!(f, "level:{l}"),
            ClusterCommand::Color { hue } => write!(f, "color:{hue}"),
        }
    }
}

impl FromStr for ClusterCommand {
    type Err = String;

    /// Accepts `on`, `off`, `level:<0-255>` and `color:<hue>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "on" => return Ok(ClusterCommand::On),
            "off" => return Ok(ClusterCommand::Off),
            _ => {}
        }
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| format!("unknown command `{s}`"))?;
        match kind {
            "level" => arg
                .parse()
                .map(ClusterCommand::Level)
                .map_err(|e| format!("bad level `{arg}`: {e}")),
            "color" => arg
                .parse()
                .map(|hue| ClusterCommand::Color { hue })
                .map_err(|e| format!("bad hue `{arg}`: {e}")),
            _ => Err(format!("unknown command `{s}`")),
        }
    }
}
