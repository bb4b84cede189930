//! Battery energy model: limits, asymmetric-efficiency dynamics, SoC.
//!
//! All dispatch quantities are grid-side step energies in MWh: a step energy
//! `s > 0` draws `s` from the grid and stores `s·eta_charge`; `s < 0` delivers
//! `|s|` to the grid and drains `|s|/eta_discharge` from storage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack applied to stored-energy bound checks, absorbing accumulated
/// floating-point error from long dispatch loops.
pub const ENERGY_BOUND_SLACK: f64 = 1e-9;

/// Physical battery description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatterySpec {
    /// Lower stored-energy bound (MWh), >= 0.
    pub energy_min: f64,
    /// Upper stored-energy bound (MWh), > energy_min.
    pub energy_max: f64,
    /// Rated capacity (MWh), >= energy_max; SoC = stored / rated.
    pub energy_rated: f64,
    /// Maximum charging power (MW), > 0.
    pub charge_power: f64,
    /// Maximum discharging power magnitude (MW), > 0.
    pub discharge_power: f64,
    /// Charging efficiency in (0, 1].
    pub eta_charge: f64,
    /// Discharging efficiency in (0, 1].
    pub eta_discharge: f64,
}

/// Stored energy plus its derived state of charge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    pub stored: f64,
    pub soc: f64,
}

impl BatterySpec {
    pub fn new(
        energy_min: f64,
        energy_max: f64,
        energy_rated: f64,
        charge_power: f64,
        discharge_power: f64,
        eta_charge: f64,
        eta_discharge: f64,
    ) -> Result<Self> {
        if !(energy_min >= 0.0 && energy_min < energy_max) {
            return Err(Error::InvalidParameter(format!(
                "need 0 <= energy_min < energy_max, got [{energy_min}, {energy_max}]"
            )));
        }
        if energy_rated < energy_max {
            return Err(Error::InvalidParameter(format!(
                "rated capacity {energy_rated} below energy_max {energy_max}"
            )));
        }
        if !(charge_power > 0.0) || !(discharge_power > 0.0) {
            return Err(Error::InvalidParameter(
                "power limits must be positive".into(),
            ));
        }
        for (name, eta) in [("eta_charge", eta_charge), ("eta_discharge", eta_discharge)] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be in (0, 1], got {eta}"
                )));
            }
        }
        Ok(Self {
            energy_min,
            energy_max,
            energy_rated,
            charge_power,
            discharge_power,
            eta_charge,
            eta_discharge,
        })
    }

    /// Builds an `xC-yC` battery: full charge in `1/c_charge` hours and full
    /// discharge in `1/c_discharge` hours, bounds spanning the whole capacity.
    pub fn from_c_rating(
        energy_mwh: f64,
        c_charge: f64,
        c_discharge: f64,
        eta_charge: f64,
        eta_discharge: f64,
    ) -> Result<Self> {
        if !(energy_mwh > 0.0) {
            return Err(Error::InvalidParameter(
                "rated energy must be positive".into(),
            ));
        }
        Self::new(
            0.0,
            energy_mwh,
            energy_mwh,
            energy_mwh * c_charge,
            energy_mwh * c_discharge,
            eta_charge,
            eta_discharge,
        )
    }

    /// Largest per-step charge energy allowed by the power limit (MWh).
    pub fn max_step_charge(&self, step_hours: f64) -> f64 {
        self.charge_power * step_hours
    }

    /// Largest per-step discharge energy magnitude allowed by the power
    /// limit (MWh).
    pub fn max_step_discharge(&self, step_hours: f64) -> f64 {
        self.discharge_power * step_hours
    }

    /// Feasible per-step energy range `(s_lo, s_hi)` from `stored`, closing
    /// both the power limits and the stored-energy bounds under the dynamics:
    /// `s_hi = min(charge_power·h, (energy_max − stored)/eta_charge)` and
    /// `s_lo = max(−discharge_power·h, (energy_min − stored)·eta_discharge)`.
    /// Always admits `s = 0`.
    pub fn feasible_range(&self, stored: f64, step_hours: f64) -> (f64, f64) {
        let hi = self
            .max_step_charge(step_hours)
            .min((self.energy_max - stored) / self.eta_charge)
            .max(0.0);
        let lo = (-self.max_step_discharge(step_hours))
            .max((self.energy_min - stored) * self.eta_discharge)
            .min(0.0);
        (lo, hi)
    }

    /// Applies one step of the storage dynamics:
    /// `stored' = stored + max(s,0)·eta_charge − max(−s,0)/eta_discharge`.
    ///
    /// The caller keeps `s` inside [`Self::feasible_range`]; a post-state
    /// outside the energy bounds (beyond a small slack) is an error naming
    /// the violated side.
    pub fn step(&self, stored: f64, step_energy: f64) -> Result<f64> {
        let next = self.apply_dynamics(stored, step_energy);
        let slack = ENERGY_BOUND_SLACK * self.energy_max.max(1.0);
        if next < self.energy_min - slack {
            return Err(Error::BoundViolation {
                side: "lower",
                value: next,
                bound: self.energy_min,
            });
        }
        if next > self.energy_max + slack {
            return Err(Error::BoundViolation {
                side: "upper",
                value: next,
                bound: self.energy_max,
            });
        }
        Ok(next.clamp(self.energy_min, self.energy_max))
    }

    /// The raw dynamics without bound checking.
    pub fn apply_dynamics(&self, stored: f64, step_energy: f64) -> f64 {
        stored + step_energy.max(0.0) * self.eta_charge
            - (-step_energy).max(0.0) / self.eta_discharge
    }

    /// State of charge for a stored energy.
    pub fn soc(&self, stored: f64) -> f64 {
        stored / self.energy_rated
    }

    pub fn state(&self, stored: f64) -> BatteryState {
        BatteryState {
            stored,
            soc: self.soc(stored),
        }
    }
}

/// Serialized battery description used in scenario and CLI JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatteryConfig {
    pub energy_mwh: f64,
    #[serde(default = "default_c_rate")]
    pub c_charge: f64,
    #[serde(default = "default_c_rate")]
    pub c_discharge: f64,
    #[serde(default = "default_eta")]
    pub eta_ch: f64,
    #[serde(default = "default_eta")]
    pub eta_dis: f64,
    /// Initial state of charge as a fraction of rated capacity.
    #[serde(default = "default_soc0")]
    pub soc0: f64,
}

fn default_c_rate() -> f64 {
    1.0
}
fn default_eta() -> f64 {
    0.95
}
fn default_soc0() -> f64 {
    0.5
}

impl BatteryConfig {
    /// Expands to a validated spec plus the initial stored energy.
    pub fn build(&self) -> Result<(BatterySpec, f64)> {
        let spec = BatterySpec::from_c_rating(
            self.energy_mwh,
            self.c_charge,
            self.c_discharge,
            self.eta_ch,
            self.eta_dis,
        )?;
        if !(0.0..=1.0).contains(&self.soc0) {
            return Err(Error::InvalidParameter(format!(
                "soc0 must be in [0, 1], got {}",
                self.soc0
            )));
        }
        let initial = self.soc0 * spec.energy_rated;
        Ok((spec, initial))
    }
}

/// Arithmetic mean of a SoC trajectory.
pub fn mean_soc(trajectory: &[f64]) -> Result<f64> {
    if trajectory.is_empty() {
        return Err(Error::EmptySeries);
    }
    Ok(trajectory.iter().sum::<f64>() / trajectory.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> BatterySpec {
        BatterySpec::new(0.0, 100.0, 100.0, 40.0, 40.0, 0.95, 0.95).unwrap()
    }

    #[test]
    fn idle_step_keeps_energy() {
        assert_eq!(spec().step(50.0, 0.0).unwrap(), 50.0);
    }

    #[test]
    fn charge_step_applies_efficiency() {
        let b = spec().step(50.0, 10.0).unwrap();
        assert!((b - 59.5).abs() < 1e-12);
    }

    #[test]
    fn discharge_step_applies_efficiency() {
        let b = spec().step(50.0, -10.0).unwrap();
        assert!((b - (50.0 - 10.0 / 0.95)).abs() < 1e-12);
        assert!((b - 39.473684210526315).abs() < 1e-9);
    }

    #[test]
    fn step_errors_name_the_violated_side() {
        match spec().step(99.0, 10.0) {
            Err(Error::BoundViolation { side: "upper", .. }) => {}
            other => panic!("expected upper violation, got {other:?}"),
        }
        match spec().step(1.0, -10.0) {
            Err(Error::BoundViolation { side: "lower", .. }) => {}
            other => panic!("expected lower violation, got {other:?}"),
        }
    }

    #[test]
    fn full_battery_cannot_charge() {
        let (_, hi) = spec().feasible_range(100.0, 1.0);
        assert_eq!(hi, 0.0);
    }

    #[test]
    fn empty_battery_cannot_discharge() {
        let (lo, _) = spec().feasible_range(0.0, 1.0);
        assert_eq!(lo, 0.0);
    }

    #[test]
    fn feasible_range_picks_binding_limit() {
        // headroom bound (100-50)/0.95 = 52.63 vs power bound 40
        let (_, hi) = spec().feasible_range(50.0, 1.0);
        assert_eq!(hi, 40.0);
    }

    #[test]
    fn feasible_range_always_admits_zero() {
        let s = spec();
        for stored in [0.0, 1.0, 50.0, 99.9, 100.0] {
            let (lo, hi) = s.feasible_range(stored, 0.25);
            assert!(lo <= 0.0 && hi >= 0.0);
        }
    }

    #[test]
    fn round_trip_bookkeeping() {
        let s = spec();
        for energy in [5.0_f64, 17.3, 39.9] {
            let up = s.step(30.0, energy).unwrap();
            let back = s
                .step(up, -energy * s.eta_charge * s.eta_discharge)
                .unwrap();
            assert!((back - 30.0).abs() < 1e-9);
        }
    }

    #[test]
    fn step_is_monotone_in_energy() {
        let s = spec();
        let mut prev = f64::NEG_INFINITY;
        for k in -40..=40 {
            let b = s.apply_dynamics(50.0, k as f64);
            assert!(b >= prev);
            prev = b;
        }
    }

    #[test]
    fn c_rating_constructor() {
        let s = BatterySpec::from_c_rating(129.0, 1.0, 1.0, 0.95, 0.95).unwrap();
        assert_eq!(s.charge_power, 129.0);
        assert_eq!(s.discharge_power, 129.0);
        assert_eq!(s.energy_max, 129.0);
        assert_eq!(s.energy_min, 0.0);
    }

    #[test]
    fn mean_soc_values() {
        assert_eq!(mean_soc(&[0.5, 0.5, 0.5]).unwrap(), 0.5);
        assert!((mean_soc(&[0.4, 0.8]).unwrap() - 0.6).abs() < 1e-15);
        assert!(mean_soc(&[]).is_err());
    }

    #[test]
    fn mean_soc_between_extremes_of_run() {
        let traj = [0.3, 0.9, 0.5, 0.45];
        let m = mean_soc(&traj).unwrap();
        let lo = traj.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = traj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(m >= lo && m <= hi);
    }

    #[test]
    fn config_defaults_and_initial_state() {
        let cfg: BatteryConfig = serde_json::from_str(r#"{"energy_mwh": 200.0}"#).unwrap();
        let (spec, b0) = cfg.build().unwrap();
        assert_eq!(spec.charge_power, 200.0);
        assert_eq!(spec.eta_charge, 0.95);
        assert_eq!(b0, 100.0);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(BatterySpec::new(5.0, 5.0, 5.0, 1.0, 1.0, 0.9, 0.9).is_err());
        assert!(BatterySpec::new(0.0, 5.0, 4.0, 1.0, 1.0, 0.9, 0.9).is_err());
        assert!(BatterySpec::new(0.0, 5.0, 5.0, 0.0, 1.0, 0.9, 0.9).is_err());
        assert!(BatterySpec::new(0.0, 5.0, 5.0, 1.0, 1.0, 1.1, 0.9).is_err());
    }
}
