use std::fmt;

use super::{Node, Role, SimTime};
use crate::devices::NetworkParams;

/// Line-oriented export of one device's persistent state.
///
/// Fields appear in a fixed order as `key=value` pairs separated by single
/// spaces; absent values are written as `-`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviceSnapshot {
    pub fields: Vec<(&'static str, String)>,
}

fn net_fields(net: Option<&NetworkParams>) -> [(&'static str, String); 6] {
    let dash = || "-".to_string();
    match net {
        Some(n) => [
            ("channel", n.channel.to_string()),
            ("pan", format!("0x{:04x}", n.pan_id)),
            ("epan", format!("0x{:016x}", n.extended_pan_id)),
            ("key", n.network_key.to_hex()),
            ("update_id", n.network_update_id.to_string()),
            ("short", n.short_addr.to_string()),
        ],
        None => [
            ("channel", dash()),
            ("pan", dash()),
            ("epan", dash()),
            ("key", dash()),
            ("update_id", dash()),
            ("short", dash()),
        ],
    }
}

impl DeviceSnapshot {
    /// Snapshot of a bulb or initiator node; attackers have none.
    pub fn of(node: &Node, now: SimTime) -> Option<Self> {
        let mut fields = vec![("node", node.name.clone())];
        match &node.role {
            Role::EndDevice(d) => {
                fields.push(("profile", d.profile.kind.to_string()));
                fields.push(("ext", node.extended_addr.to_string()));
                fields.push(("factory_new", d.factory_new.to_string()));
                fields.push(("listen", node.channel.to_string()));
                fields.extend(net_fields(d.net.as_ref()));
                fields.push(("lamp", if d.lamp.on { "on" } else { "off" }.to_string()));
                fields.push(("hue", d.lamp.hue.to_string()));
                fields.push(("brightness", d.lamp.brightness.to_string()));
                fields.push((
                    "identify_until",
                    d.identify_until
                        .filter(|&u| u > now)
                        .map_or("-".to_string(), |u| u.to_string()),
                ));
            }
            Role::Initiator(i) => {
                fields.push(("profile", i.profile.kind.to_string()));
                fields.push(("ext", node.extended_addr.to_string()));
                fields.push(("factory_new", i.is_factory_new().to_string()));
                fields.push(("listen", node.channel.to_string()));
                fields.extend(net_fields(i.net.as_ref()));
            }
            Role::Attacker(_) => return None,
        }
        fields.push(("pos", format!("{},{}", node.position.x, node.position.y)));
        Some(DeviceSnapshot { fields })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Fields whose values differ, as `key: old -> new`.
    pub fn diff(&self, after: &DeviceSnapshot) -> Vec<String> {
        self.fields
            .iter()
            .zip(&after.fields)
            .filter(|((_, a), (_, b))| a != b)
            .map(|((k, a), (_, b))| format!("{k}: {a} -> {b}"))
            .collect()
    }
}

impl fmt::Display for DeviceSnapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, v)) in self.fields.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}
