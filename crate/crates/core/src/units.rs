//! Unit conversions at the API boundary.
//!
//! Internally every frequency is an angular frequency in rad/us and every time
//! is in microseconds. Ordinary frequencies (MHz, kHz) only appear in configs,
//! CSV output and fit results.

use std::f64::consts::TAU;

/// MHz -> rad/us.
pub fn mhz_to_angular(f_mhz: f64) -> f64 {
    TAU * f_mhz
}

/// rad/us -> MHz.
pub fn angular_to_mhz(w: f64) -> f64 {
    w / TAU
}

/// kHz -> rad/us.
pub fn khz_to_angular(f_khz: f64) -> f64 {
    TAU * f_khz * 1e-3
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let w = mhz_to_angular(0.5);
        assert!((w - std::f64::consts::PI).abs() < 1e-15);
        assert!((angular_to_mhz(w) - 0.5).abs() < 1e-15);
        assert!((khz_to_angular(500.0) - w).abs() < 1e-15);
    }
}
