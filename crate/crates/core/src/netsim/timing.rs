use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Propagation bound in slots, `ceil(R / (c tau))`.
pub fn delta_p(r: f64, tau: f64) -> u64 {
    if r <= 0.0 {
        return 0;
    }
    (r / (SPEED_OF_LIGHT * tau)).ceil() as u64
}

/// Slot, frame and superframe timing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingModel {
    /// Slot length in seconds.
    pub tau: f64,
    /// Slots per frame (the sequence period).
    pub frame_len: usize,
    /// Frames per superframe.
    pub frames: usize,
    /// Clock-offset bound in slots.
    pub delta_c: u64,
    /// Propagation bound in slots.
    pub delta_p: u64,
}

impl TimingModel {
    pub fn new(tau: f64, frame_len: usize, frames: usize, delta_c: u64, delta_p: u64) -> Result<Self> {
        let t = Self { tau, frame_len, frames, delta_c, delta_p };
        t.validate()?;
        Ok(t)
    }

    /// Timing with the propagation bound derived from the hearing radius.
    pub fn for_radius(tau: f64, frame_len: usize, frames: usize, delta_c: u64, r: f64) -> Result<Self> {
        Self::new(tau, frame_len, frames, delta_c, delta_p(r, tau))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::InvalidScenario("slot length must be positive".into()));
        }
        if self.frame_len == 0 || self.frames == 0 {
            return Err(Error::InvalidScenario("frame length and frame count must be positive".into()));
        }
        if self.delta() > self.frame_len as u64 {
            return Err(Error::InvalidScenario(format!(
                "delta = {} exceeds frame length {}",
                self.delta(),
                self.frame_len
            )));
        }
        Ok(())
    }

    pub fn delta(&self) -> u64 {
        self.delta_c + self.delta_p
    }

    pub fn guard_time(&self) -> f64 {
        self.tau * self.delta() as f64
    }

    pub fn frame_time(&self) -> f64 {
        self.tau * self.frame_len as f64
    }

    /// `T = F L tau + T_G`.
    pub fn superframe_time(&self) -> f64 {
        self.frames as f64 * self.frame_time() + self.guard_time()
    }

    /// Superframe length in slot units.
    pub fn superframe_slots(&self) -> f64 {
        (self.frames * self.frame_len) as f64 + self.delta() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn propagation_bound() {
        assert_eq!(delta_p(0.0, 1e-3), 0);
        assert_eq!(delta_p(500.0, 1e-3), 1);
        assert_eq!(delta_p(500.0, 1e-6), 2);
    }

    #[test]
    fn superframe_length() {
        let t = TimingModel::for_radius(1e-3, 10, 5, 2, 500.0).unwrap();
        assert_eq!(t.delta(), 3);
        assert!((t.guard_time() - 3e-3).abs() < 1e-15);
        assert!((t.superframe_time() - (5.0 * 10.0 * 1e-3 + 3e-3)).abs() < 1e-12);
    }

    #[test]
    fn delta_must_fit_in_frame() {
        assert!(TimingModel::new(1e-3, 4, 3, 3, 1).is_ok());
        assert!(TimingModel::new(1e-3, 4, 3, 4, 1).is_err());
        assert!(TimingModel::new(0.0, 4, 3, 0, 0).is_err());
    }
}
