//! Frame hex-dump lines: `<sim-time-µs> <channel> <rssi-dbm> <hex-bytes>`.

use std::fmt;
use std::str::FromStr;

#[derive(Clone, Debug, PartialEq)]
pub struct HexLine {
    pub time_us: u64,
    pub channel: u8,
    pub rssi_dbm: f64,
    pub bytes: Vec<u8>,
}

impl fmt::Display for HexLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {:.1} {}",
            self.time_us,
            self.channel,
            self.rssi_dbm,
            hex::encode(&self.bytes)
        )
    }
}

impl FromStr for HexLine {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [time, channel, rssi, bytes] = fields[..] else {
            return Err(format!("expected 4 fields, found {}", fields.len()));
        };
        Ok(HexLine {
            time_us: time.parse().map_err(|e| format!("time: {e}"))?,
            channel: channel.parse().map_err(|e| format!("channel: {e}"))?,
            rssi_dbm: rssi.parse().map_err(|e| format!("rssi: {e}"))?,
            bytes: hex::decode(bytes).map_err(|e| format!("bytes: {e}"))?,
        })
    }
}
