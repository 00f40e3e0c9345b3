/// Log-distance path-loss model.
///
/// `rssi = tx_power − reference_loss − 10·n·log10(d)`, with `d` in meters and
/// distances below the 1 m reference clamped only at zero.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PathLossModel {
    pub reference_loss_db: f64,
    pub exponent: f64,
    pub noise_floor_dbm: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        PathLossModel {
            reference_loss_db: 34.0,
            exponent: 2.0,
            noise_floor_dbm: -85.0,
        }
    }
}

impl PathLossModel {
    pub fn rssi(&self, tx_power_dbm: f64, distance_m: f64) -> f64 {
        let base = tx_power_dbm - self.reference_loss_db;
        if distance_m <= 0.0 {
            return base;
        }
        base - 10.0 * self.exponent * distance_m.log10()
    }

    /// Largest distance at which `rssi(tx_power, d) >= threshold`.
    pub fn max_distance(&self, tx_power_dbm: f64, threshold_dbm: f64) -> f64 {
        10f64.powf((tx_power_dbm - self.reference_loss_db - threshold_dbm) / (10.0 * self.exponent))
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.exponent.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
            || !self.exponent.is_finite()
        {
            return Err(format!(
                "path-loss exponent must be > 0, got {}",
                self.exponent
            ));
        }
        if !self.reference_loss_db.is_finite() || !self.noise_floor_dbm.is_finite() {
            return Err("path-loss parameters must be finite".into());
        }
        Ok(())
    }
}

/// Planar position in meters.
#[derive(Copy, Clone, Debug, PartialEq, Default)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_distance() {
        let m = PathLossModel::default();
        assert_eq!(m.rssi(0.0, 1.0), -34.0);
        assert_eq!(m.rssi(5.0, 0.0), -29.0);
    }

    #[test]
    fn calibration_points() {
        let m = PathLossModel::default();
        assert!((m.rssi(0.0, 2.0) - -40.0206).abs() < 1e-3);
        assert!((m.rssi(0.0, 1.8) - -39.1055).abs() < 1e-3);
        assert!((m.rssi(26.0, 36.0) - -39.1261).abs() < 1e-3);
        assert!(m.rssi(26.0, 36.0) >= -40.0);
    }

    #[test]
    fn max_distance_inverts_rssi() {
        let m = PathLossModel::default();
        let d = m.max_distance(26.0, -40.0);
        assert!((m.rssi(26.0, d) - -40.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_positive_exponent() {
        let m = PathLossModel {
            exponent: 0.0,
            ..PathLossModel::default()
        };
        assert!(m.validate().is_err());
    }
}
