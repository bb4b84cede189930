//! Reliability indices over residual-imbalance trajectories.
//!
//! Two families are computed from a residual trajectory `R(i)` and the
//! scheduled generation `P_g(i)`:
//!
//! * sample-based SAIDI surrogates — `saidi_mod = Σ|R(i)| / mean(P_g)` in
//!   sample-equivalents, and its response-aware variant where imbalances
//!   inside the band `±ε·P_g(i)` are free;
//! * reliability percentages — `ri = 100·(1 − Σ|R| / ΣP_g)` and the
//!   response-aware analogue.
//!
//! Both reliability forms are evaluated with the `ΣP_g` denominator, which is
//! algebraically identical to dividing the SAIDI surrogate by the sample
//! count but avoids a second rounding path. SAIDI surrogates are reported in
//! sample-equivalents; [`saidi_to_minutes`] converts at the reporting layer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::ImbalanceSeries;

/// All reliability and deviation indices for one dispatch outcome.
///
/// `lambda_linear` is `100·Σ max(|R|−εP_g, 0)/mean(P_g)` (percent·samples) and
/// `lambda_quad` the squared analogue normalized by `mean(P_g)²`; these units
/// are what makes published comparison-table magnitudes line up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    /// `Σ|R(i)| / mean(P_g)`, sample-equivalents.
    pub saidi_mod: f64,
    /// `Σ max(|R(i)| − εP_g(i), 0) / mean(P_g)`, sample-equivalents.
    pub saidi_eps_mod: f64,
    /// `100·(1 − Σ|R| / ΣP_g)`, percent.
    pub ri_mod: f64,
    /// `100·(1 − Σ max(|R|−εP_g, 0) / ΣP_g)`, percent.
    pub ri_eps_mod: f64,
    /// Linear deviation index, percent·samples.
    pub lambda_linear: f64,
    /// Quadratic deviation index, percent²·samples.
    pub lambda_quad: f64,
    /// Mean state of charge over the dispatch, when a battery was present.
    pub mean_soc: Option<f64>,
    /// Mean scheduled generation (MW).
    pub generation_mean: f64,
}

/// Classical SAIDI: total customer-interruption duration over customers
/// served. `interruptions` pairs each incident's duration with the customer
/// count it affected; the result carries the duration unit of the inputs.
pub fn saidi_classic(interruptions: &[(f64, u64)], total_customers: u64) -> Result<f64> {
    if total_customers == 0 {
        return Err(Error::NoCustomers);
    }
    for &(duration, _) in interruptions {
        if duration < 0.0 {
            return Err(Error::InvalidParameter(
                "interruption durations must be nonnegative".into(),
            ));
        }
    }
    let total: f64 = interruptions
        .iter()
        .map(|&(duration, customers)| duration * customers as f64)
        .sum();
    Ok(total / total_customers as f64)
}

/// Reliability percentage from a SAIDI value and the horizon it was measured
/// over, both in the same time unit.
pub fn ri_from_saidi(saidi: f64, horizon: f64) -> Result<f64> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    if saidi < 0.0 {
        return Err(Error::InvalidParameter("saidi must be nonnegative".into()));
    }
    if saidi > horizon {
        return Err(Error::SaidiExceedsHorizon { saidi, horizon });
    }
    Ok(100.0 * (1.0 - saidi / horizon))
}

/// Residual imbalance after storage action: `R(i) = Δ_i + s_i`, with the
/// dispatch given in power units (MW).
pub fn residuals(series: &ImbalanceSeries, dispatch_power: &[f64]) -> Result<Vec<f64>> {
    if dispatch_power.len() != series.len() {
        return Err(Error::LengthMismatch {
            expected: series.len(),
            got: dispatch_power.len(),
        });
    }
    Ok(series
        .imbalance()
        .iter()
        .zip(dispatch_power)
        .map(|(d, s)| d + s)
        .collect())
}

/// Computes the full report for a residual trajectory at response level
/// `epsilon`. `soc` is the per-step state-of-charge trajectory when a battery
/// participated.
pub fn report(
    series: &ImbalanceSeries,
    residuals: &[f64],
    soc: Option<&[f64]>,
    epsilon: f64,
) -> Result<ReliabilityReport> {
    if residuals.len() != series.len() {
        return Err(Error::LengthMismatch {
            expected: series.len(),
            got: residuals.len(),
        });
    }
    if epsilon < 0.0 {
        return Err(Error::InvalidParameter("epsilon must be >= 0".into()));
    }

    let generation_sum: f64 = series.generation().iter().sum();
    let generation_mean = generation_sum / series.len() as f64;

    let mut abs_sum = 0.0;
    let mut hinge_sum = 0.0;
    let mut hinge_sq_sum = 0.0;
    for (r, pg) in residuals.iter().zip(series.generation()) {
        let a = r.abs();
        let hinge = (a - epsilon * pg).max(0.0);
        abs_sum += a;
        hinge_sum += hinge;
        hinge_sq_sum += hinge * hinge;
    }

    let mean_soc = match soc {
        Some(traj) if !traj.is_empty() => {
            Some(traj.iter().sum::<f64>() / traj.len() as f64)
        }
        _ => None,
    };

    Ok(ReliabilityReport {
        saidi_mod: abs_sum / generation_mean,
        saidi_eps_mod: hinge_sum / generation_mean,
        ri_mod: 100.0 * (1.0 - abs_sum / generation_sum),
        ri_eps_mod: 100.0 * (1.0 - hinge_sum / generation_sum),
        lambda_linear: 100.0 * hinge_sum / generation_mean,
        lambda_quad: 100.0 * hinge_sq_sum / (generation_mean * generation_mean),
        mean_soc,
        generation_mean,
    })
}

/// Converts a SAIDI surrogate from sample-equivalents to minutes.
pub fn saidi_to_minutes(saidi_samples: f64, step_hours: f64) -> f64 {
    saidi_samples * step_hours * 60.0
}

/// Renders reports as an aligned comparison table: one row per labelled
/// `(label, epsilon, report)` entry, columns matching the usual
/// optimization-comparison layout.
pub fn format_report_table(rows: &[(String, f64, ReliabilityReport)]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<28} {:>8} {:>12} {:>12} {:>9} {:>14} {:>10}\n",
        "Optimization", "eps", "lambda_lin", "lambda_quad", "mean SoC", "SAIDI_eps_mod", "RI_eps_mod"
    ));
    for (label, eps, r) in rows {
        let soc = r
            .mean_soc
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "-".to_string());
        out.push_str(&format!(
            "{:<28} {:>8.4} {:>12.4} {:>12.4} {:>9} {:>14.4} {:>10.4}\n",
            label, eps, r.lambda_linear, r.lambda_quad, soc, r.saidi_eps_mod, r.ri_eps_mod
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::ImbalanceSeries;

    fn series(imbalance: Vec<f64>, pg: f64) -> ImbalanceSeries {
        let n = imbalance.len();
        ImbalanceSeries::new(imbalance, vec![pg; n], 1.0).unwrap()
    }

    #[test]
    fn saidi_classic_single_incident() {
        let v = saidi_classic(&[(60.0, 100)], 1000).unwrap();
        assert_eq!(v, 6.0);
    }

    #[test]
    fn saidi_classic_empty_sum_is_zero() {
        assert_eq!(saidi_classic(&[], 500).unwrap(), 0.0);
    }

    #[test]
    fn saidi_classic_hand_sum() {
        // (480*10 + 120*90) / 100
        let v = saidi_classic(&[(480.0, 10), (120.0, 90)], 100).unwrap();
        assert_eq!(v, 156.0);
    }

    #[test]
    fn saidi_classic_rejects_zero_customers() {
        assert!(matches!(saidi_classic(&[], 0), Err(Error::NoCustomers)));
    }

    #[test]
    fn ri_no_interruption_is_full() {
        assert_eq!(ri_from_saidi(0.0, 1000.0).unwrap(), 100.0);
    }

    #[test]
    fn ri_published_2013_value() {
        let ri = ri_from_saidi(480.0, 744_600.0).unwrap();
        assert!((ri - 99.9355358582).abs() < 1e-9);
    }

    #[test]
    fn ri_one_month_at_minute_samples() {
        let ri = ri_from_saidi(515.5, 44_640.0).unwrap();
        assert!((ri - 98.845).abs() < 1e-3);
    }

    #[test]
    fn ri_rejects_saidi_above_horizon() {
        assert!(matches!(
            ri_from_saidi(2.0, 1.0),
            Err(Error::SaidiExceedsHorizon { .. })
        ));
    }

    #[test]
    fn residuals_cancel_and_identity() {
        let s = series(vec![10.0, -5.0], 100.0);
        let zero = residuals(&s, &[-10.0, 5.0]).unwrap();
        assert_eq!(zero, vec![0.0, 0.0]);
        let id = residuals(&s, &[0.0, 0.0]).unwrap();
        assert_eq!(id, s.imbalance());
        let mixed = residuals(&s, &[-4.0, 2.0]).unwrap();
        assert_eq!(mixed, vec![6.0, -3.0]);
    }

    #[test]
    fn residuals_length_mismatch() {
        let s = series(vec![1.0, 2.0], 100.0);
        assert!(matches!(
            residuals(&s, &[0.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn report_zero_residuals() {
        let s = series(vec![1.0, 2.0, 3.0], 50.0);
        let r = report(&s, &[0.0, 0.0, 0.0], None, 0.0).unwrap();
        assert_eq!(r.saidi_mod, 0.0);
        assert_eq!(r.ri_mod, 100.0);
        assert_eq!(r.lambda_quad, 0.0);
        assert_eq!(r.mean_soc, None);
    }

    #[test]
    fn report_identities_on_published_no_storage_row() {
        // Published no-storage comparison row at eps = 0:
        // lambda_linear = 3245.7 with SAIDI = 32.45 (identity within 0.1%)
        // and RI = 98.1228 with N in {1728, 1729} (within 0.01 pp).
        let lambda_linear = 3245.7_f64;
        let saidi = 32.45_f64;
        assert!((lambda_linear - 100.0 * saidi).abs() / lambda_linear < 1e-3);

        let ri = 98.1228_f64;
        let hit = [1728.0_f64, 1729.0].iter().any(|n| {
            let implied = 100.0 * (1.0 - saidi / n);
            (implied - ri).abs() < 0.01
        });
        assert!(hit);
    }

    #[test]
    fn report_links_saidi_and_ri_exactly() {
        let s = series(vec![5.0, -20.0, 3.0, 0.5], 120.0);
        let r = report(&s, s.imbalance(), None, 0.01).unwrap();
        let n = s.len() as f64;
        assert!((r.ri_mod - 100.0 * (1.0 - r.saidi_mod / n)).abs() / r.ri_mod.abs() < 1e-9);
        assert!((r.ri_eps_mod - 100.0 * (1.0 - r.saidi_eps_mod / n)).abs() < 1e-9);
        assert!((r.lambda_linear - 100.0 * r.saidi_eps_mod).abs() < 1e-9);
        assert!(r.saidi_eps_mod <= r.saidi_mod);
        assert!(r.ri_eps_mod >= r.ri_mod);
    }

    #[test]
    fn report_epsilon_zero_collapses_to_plain() {
        let s = series(vec![4.0, -7.0], 50.0);
        let r = report(&s, s.imbalance(), None, 0.0).unwrap();
        assert_eq!(r.saidi_mod, r.saidi_eps_mod);
        assert_eq!(r.ri_mod, r.ri_eps_mod);
    }

    #[test]
    fn report_monotone_in_epsilon() {
        let s = series(vec![10.0, -8.0, 2.0], 100.0);
        let mut prev = report(&s, s.imbalance(), None, 0.0).unwrap();
        for eps in [0.01, 0.05, 0.2] {
            let r = report(&s, s.imbalance(), None, eps).unwrap();
            assert!(r.saidi_eps_mod <= prev.saidi_eps_mod + 1e-12);
            assert!(r.lambda_linear <= prev.lambda_linear + 1e-12);
            assert!(r.lambda_quad <= prev.lambda_quad + 1e-12);
            assert!(r.ri_eps_mod >= prev.ri_eps_mod - 1e-12);
            prev = r;
        }
    }

    #[test]
    fn report_scale_covariance() {
        let s = series(vec![10.0, -8.0, 2.0], 100.0);
        let r1 = report(&s, s.imbalance(), None, 0.02).unwrap();
        let c = 7.5;
        let scaled = ImbalanceSeries::new(
            s.imbalance().iter().map(|v| v * c).collect(),
            s.generation().iter().map(|v| v * c).collect(),
            1.0,
        )
        .unwrap();
        let r2 = report(&scaled, scaled.imbalance(), None, 0.02).unwrap();
        assert!((r1.saidi_mod - r2.saidi_mod).abs() < 1e-9);
        assert!((r1.ri_mod - r2.ri_mod).abs() < 1e-9);
        assert!((r1.ri_eps_mod - r2.ri_eps_mod).abs() < 1e-9);
        assert!((r1.lambda_linear - r2.lambda_linear).abs() < 1e-9);
        assert!((r1.lambda_quad - r2.lambda_quad).abs() < 1e-9);
    }

    #[test]
    fn mean_soc_passthrough() {
        let s = series(vec![0.0, 0.0], 10.0);
        let r = report(&s, &[0.0, 0.0], Some(&[0.4, 0.8]), 0.0).unwrap();
        assert!((r.mean_soc.unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn saidi_minutes_conversion() {
        assert_eq!(saidi_to_minutes(12.0, 1.0 / 12.0), 60.0);
    }

    #[test]
    fn table_renders_one_row_per_entry() {
        let s = series(vec![1.0], 10.0);
        let r = report(&s, s.imbalance(), None, 0.0).unwrap();
        let text = format_report_table(&[("no storage".into(), 0.0, r)]);
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("no storage"));
    }
}
