use std::fmt;
use std::str::FromStr;

/// MAC acknowledgment deadline observed on bulbs that demand one.
pub const ACK_DEADLINE_US: u64 = 864;
/// Received-signal threshold for accepting inter-PAN touchlink commands.
pub const TOUCHLINK_RSSI_THRESHOLD_DBM: f64 = -40.0;
/// Hue bridge touchlink window after a button press.
pub const BUTTON_WINDOW_S: u64 = 30;
/// Identify duration applied for the "vendor default" sentinel.
pub const DEFAULT_IDENTIFY_S: u16 = 3;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProfileKind {
    HueBulb,
    HueBridge,
    LightifyBulb,
    LightifyGateway,
    LinkBulb,
    LinkHub,
}

impl ProfileKind {
    pub const ALL: [ProfileKind; 6] = [
        ProfileKind::HueBulb,
        ProfileKind::HueBridge,
        ProfileKind::LightifyBulb,
        ProfileKind::LightifyGateway,
        ProfileKind::LinkBulb,
        ProfileKind::LinkHub,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProfileKind::HueBulb => "hue-bulb",
            ProfileKind::HueBridge => "hue-bridge",
            ProfileKind::LightifyBulb => "lightify-bulb",
            ProfileKind::LightifyGateway => "lightify-gateway",
            ProfileKind::LinkBulb => "link-bulb",
            ProfileKind::LinkHub => "link-hub",
        }
    }

    /// Bulbs are touchlink end devices; the rest are initiators.
    pub fn is_bulb(self) -> bool {
        matches!(
            self,
            ProfileKind::HueBulb | ProfileKind::LightifyBulb | ProfileKind::LinkBulb
        )
    }

    pub fn profile(self) -> VendorProfile {
        VendorProfile::for_kind(self)
    }
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProfileKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProfileKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown profile `{s}`"))
    }
}

/// When a device answers scan requests (and, for gateways, reset requests).
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ScanResponsePolicy {
    Always,
    ButtonWindow,
    Never,
}

/// Lamp state after an identify procedure ends.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum BlinkAftermath {
    RestorePrevious,
    DefaultState,
}

/// Per-manufacturer behavioral constants.
#[derive(Clone, Debug, PartialEq)]
pub struct VendorProfile {
    pub kind: ProfileKind,
    pub requires_mac_ack: bool,
    pub ack_deadline_us: u64,
    pub scan_response_policy: ScanResponsePolicy,
    pub button_window_s: u64,
    pub max_identify_s: u16,
    pub default_identify_s: u16,
    pub blink_aftermath: BlinkAftermath,
    pub supports_physical_reset: bool,
    pub touchlink_rssi_threshold_dbm: f64,
    /// Receiver sensitivity relative to a Hue bulb; added to the RSSI of every
    /// received frame before threshold comparison.
    pub rx_sensitivity_offset_db: f64,
}

impl VendorProfile {
    pub fn for_kind(kind: ProfileKind) -> Self {
        let base = VendorProfile {
            kind,
            requires_mac_ack: false,
            ack_deadline_us: ACK_DEADLINE_US,
            scan_response_policy: ScanResponsePolicy::Always,
            button_window_s: 0,
            max_identify_s: 0xFFFE,
            default_identify_s: DEFAULT_IDENTIFY_S,
            blink_aftermath: BlinkAftermath::DefaultState,
            supports_physical_reset: false,
            touchlink_rssi_threshold_dbm: TOUCHLINK_RSSI_THRESHOLD_DBM,
            rx_sensitivity_offset_db: 0.0,
        };
        match kind {
            ProfileKind::HueBulb => VendorProfile {
                max_identify_s: 65534, // 18:12:14
                blink_aftermath: BlinkAftermath::RestorePrevious,
                ..base
            },
            ProfileKind::LightifyBulb => VendorProfile {
                requires_mac_ack: true,
                max_identify_s: 33173, // 9:12:53
                supports_physical_reset: true,
                rx_sensitivity_offset_db: -7.8,
                ..base
            },
            ProfileKind::LinkBulb => VendorProfile {
                requires_mac_ack: true,
                max_identify_s: 32791, // 9:06:31
                supports_physical_reset: true,
                rx_sensitivity_offset_db: -2.4,
                ..base
            },
            ProfileKind::HueBridge => VendorProfile {
                scan_response_policy: ScanResponsePolicy::ButtonWindow,
                button_window_s: BUTTON_WINDOW_S,
                ..base
            },
            ProfileKind::LightifyGateway => base,
            ProfileKind::LinkHub => VendorProfile {
                scan_response_policy: ScanResponsePolicy::Never,
                ..base
            },
        }
    }

    /// Identify time granted for a requested duration; `None` means stop.
    pub fn effective_identify_s(&self, requested: u16) -> Option<u16> {
        match requested {
            crate::wire::IDENTIFY_STOP => None,
            crate::wire::IDENTIFY_DEFAULT => Some(self.default_identify_s),
            d => Some(d.min(self.max_identify_s)),
        }
    }

    /// RSSI as perceived by this device's receiver.
    pub fn perceived_rssi(&self, rssi_dbm: f64) -> f64 {
        rssi_dbm + self.rx_sensitivity_offset_db
    }

    pub fn accepts_touchlink_rssi(&self, rssi_dbm: f64) -> bool {
        self.perceived_rssi(rssi_dbm) >= self.touchlink_rssi_threshold_dbm
    }
}
