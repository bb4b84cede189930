//! System-response model: how much imbalance the grid absorbs on its own.
//!
//! Rotational inertia plus governor response arrest the frequency excursion
//! that follows an imbalance, so residuals within a band proportional to the
//! scheduled generation, `|R(i)| <= eps·P_g(i)`, are tolerable without
//! storage action. `eps` can be given directly (the usual configuration, and
//! what parameter sweeps vary) or derived from physical frequency-response
//! parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::ImbalanceSeries;

/// Permissible-imbalance model. Serializes as either `{"epsilon": 0.005}` or
/// the physical quadruple `{"f0", "f_db", "delta_f_allow", "mhc_per_pg"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResponseModel {
    /// Band half-width as a fraction of scheduled generation.
    Direct { epsilon: f64 },
    /// Physical parameters: nominal frequency, governor dead-band, allowed
    /// frequency drop `f0 - f_min`, and the lumped inertia-ramp product
    /// `M_H·C` normalized by scheduled generation (MW per Hz per MW).
    Physical {
        #[serde(rename = "f0")]
        nominal_hz: f64,
        #[serde(rename = "f_db")]
        deadband_hz: f64,
        #[serde(rename = "delta_f_allow")]
        allowed_drop_hz: f64,
        #[serde(rename = "mhc_per_pg")]
        inertia_ramp_per_mw: f64,
    },
}

impl ResponseModel {
    /// Direct band fraction; errors on negative values.
    pub fn direct(epsilon: f64) -> Result<Self> {
        if epsilon < 0.0 || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be a nonnegative finite fraction, got {epsilon}"
            )));
        }
        Ok(Self::Direct { epsilon })
    }

    /// Physical parameterization; requires `allowed_drop > deadband` so the
    /// derived band is positive.
    pub fn physical(
        nominal_hz: f64,
        deadband_hz: f64,
        allowed_drop_hz: f64,
        inertia_ramp_per_mw: f64,
    ) -> Result<Self> {
        if !(inertia_ramp_per_mw > 0.0) {
            return Err(Error::InvalidParameter(
                "mhc_per_pg must be positive".into(),
            ));
        }
        if !(allowed_drop_hz > deadband_hz) {
            return Err(Error::InvalidParameter(format!(
                "allowed frequency drop {allowed_drop_hz} must exceed dead-band {deadband_hz}"
            )));
        }
        Ok(Self::Physical {
            nominal_hz,
            deadband_hz,
            allowed_drop_hz,
            inertia_ramp_per_mw,
        })
    }

    /// Validates a deserialized model.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Direct { epsilon } => {
                Self::direct(epsilon)?;
            }
            Self::Physical {
                nominal_hz,
                deadband_hz,
                allowed_drop_hz,
                inertia_ramp_per_mw,
            } => {
                Self::physical(nominal_hz, deadband_hz, allowed_drop_hz, inertia_ramp_per_mw)?;
            }
        }
        Ok(())
    }

    /// Band fraction `eps`. For physical parameters this inverts the nadir
    /// relation under `M_H·C` proportional to scheduled generation:
    /// `eps = 2·mhc_per_pg·(allowed_drop − deadband)`.
    pub fn epsilon(&self) -> f64 {
        match *self {
            Self::Direct { epsilon } => epsilon,
            Self::Physical {
                deadband_hz,
                allowed_drop_hz,
                inertia_ramp_per_mw,
                ..
            } => 2.0 * inertia_ramp_per_mw * (allowed_drop_hz - deadband_hz),
        }
    }

    /// Largest residual the grid absorbs at scheduled generation `p_g` (MW).
    pub fn max_safe_imbalance(&self, p_g: f64) -> Result<f64> {
        if p_g < 0.0 {
            return Err(Error::InvalidParameter(
                "generation must be nonnegative".into(),
            ));
        }
        Ok(self.epsilon() * p_g)
    }

    /// Symmetric per-sample band `(−eps·P_g(i), +eps·P_g(i))`.
    pub fn band(&self, series: &ImbalanceSeries) -> Vec<(f64, f64)> {
        let eps = self.epsilon();
        series
            .generation()
            .iter()
            .map(|&pg| (-eps * pg, eps * pg))
            .collect()
    }
}

/// Frequency nadir after an imbalance `r` (MW) given the lumped inertia-ramp
/// product `mhc` (MW/Hz): `f_min = f0 − f_db − r / (2·mhc)`.
pub fn nadir(mhc: f64, r: f64, nominal_hz: f64, deadband_hz: f64) -> Result<f64> {
    if !(mhc > 0.0) {
        return Err(Error::InvalidParameter(
            "inertia-ramp product must be positive".into(),
        ));
    }
    if r < 0.0 {
        return Err(Error::InvalidParameter(
            "imbalance magnitude must be nonnegative".into(),
        ));
    }
    Ok(nominal_hz - deadband_hz - r / (2.0 * mhc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::ImbalanceSeries;

    #[test]
    fn nadir_no_event() {
        let f = nadir(1000.0, 0.0, 50.0, 0.02).unwrap();
        assert_eq!(f, 50.0 - 0.02);
    }

    #[test]
    fn nadir_substitution() {
        let f = nadir(1000.0, 100.0, 50.0, 0.02).unwrap();
        assert!((f - 49.93).abs() < 1e-12);
    }

    #[test]
    fn nadir_depth_halves_when_inertia_doubles() {
        let d1 = 50.0 - 0.02 - nadir(1000.0, 100.0, 50.0, 0.02).unwrap();
        let d2 = 50.0 - 0.02 - nadir(2000.0, 100.0, 50.0, 0.02).unwrap();
        assert!((d1 - 2.0 * d2).abs() < 1e-12);
    }

    #[test]
    fn zero_response_grid() {
        let m = ResponseModel::direct(0.0).unwrap();
        assert_eq!(m.max_safe_imbalance(12_345.0).unwrap(), 0.0);
    }

    #[test]
    fn direct_band_substitution() {
        let m = ResponseModel::direct(0.005).unwrap();
        assert_eq!(m.max_safe_imbalance(10_000.0).unwrap(), 50.0);
    }

    #[test]
    fn band_is_symmetric_and_scales_with_generation() {
        let m = ResponseModel::direct(0.01).unwrap();
        let s = ImbalanceSeries::new(vec![0.0, 0.0], vec![8000.0, 4000.0], 1.0).unwrap();
        let band = m.band(&s);
        assert_eq!(band[0], (-80.0, 80.0));
        assert_eq!(band[1], (-40.0, 40.0));
        assert_eq!(band[0].0, -band[0].1);
    }

    #[test]
    fn physical_derivation_and_invariance() {
        let m = ResponseModel::physical(50.0, 0.02, 0.5, 0.01).unwrap();
        // eps = 2 * 0.01 * (0.5 - 0.02)
        assert!((m.epsilon() - 0.0096).abs() < 1e-15);
        // rescaling M_H and C while preserving the lumped normalized product
        // leaves eps unchanged; the model only carries the product.
        let m2 = ResponseModel::physical(50.0, 0.02, 0.5, 0.01).unwrap();
        assert_eq!(m.epsilon(), m2.epsilon());
    }

    #[test]
    fn physical_requires_band_above_deadband() {
        assert!(ResponseModel::physical(50.0, 0.5, 0.4, 0.01).is_err());
        assert!(ResponseModel::physical(50.0, 0.02, 0.5, 0.0).is_err());
    }

    #[test]
    fn json_shapes() {
        let d: ResponseModel = serde_json::from_str(r#"{"epsilon": 0.005}"#).unwrap();
        assert_eq!(d.epsilon(), 0.005);
        let p: ResponseModel = serde_json::from_str(
            r#"{"f0": 50.0, "f_db": 0.02, "delta_f_allow": 0.5, "mhc_per_pg": 0.01}"#,
        )
        .unwrap();
        p.validate().unwrap();
        assert!((p.epsilon() - 0.0096).abs() < 1e-15);
    }
}
