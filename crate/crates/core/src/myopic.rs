//! Myopic threshold controllers.
//!
//! Three per-step rules that use only the current imbalance and state of
//! charge, no look-ahead:
//!
//! * [`linear_step`] — drive the residual to its feasible minimum;
//! * [`response_step`] — pull the residual only to the edge of the
//!   permissible band `±eps·P_g(i)`, never past it;
//! * [`soc_managed_step`] — the band-aware rule extended with a
//!   state-of-charge target band: corrective action when the imbalance is
//!   out of band and the SoC permits, replenishment toward the band midpoint
//!   when the imbalance is in band, and no action in the two conflicting
//!   cases (SoC low while a discharge is needed, SoC high while a charge is
//!   needed).
//!
//! All step energies are grid-side MWh; every returned action is re-clamped
//! by [`BatterySpec::feasible_range`] as a safety net.

use serde::{Deserialize, Serialize};

use crate::battery::BatterySpec;
use crate::error::{Error, Result};
use crate::problem::{DispatchResult, SolverStats};
use crate::response::ResponseModel;
use crate::timeseries::ImbalanceSeries;

/// Operator-preferred state-of-charge band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SocBand {
    pub low: f64,
    pub high: f64,
}

impl SocBand {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        if !(0.0 <= low && low < high && high <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "soc band must satisfy 0 <= low < high <= 1, got [{low}, {high}]"
            )));
        }
        Ok(Self { low, high })
    }

    /// Band midpoint.
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.low + self.high)
    }

    /// Half-width around the midpoint.
    pub fn half_width(&self) -> f64 {
        self.midpoint() - self.low
    }

    /// Validates a deserialized band.
    pub fn validate(&self) -> Result<()> {
        Self::new(self.low, self.high).map(|_| ())
    }
}

/// Which per-step rule drives the dispatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Linear cost, no response awareness ("alg1").
    #[serde(rename = "alg1")]
    Linear,
    /// Linear cost with response band ("alg2").
    #[serde(rename = "alg2")]
    ResponseAware,
    /// Linear cost with response band and SoC management ("alg3").
    #[serde(rename = "alg3")]
    ResponseAwareSocManaged,
}

impl Policy {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "alg1" => Ok(Self::Linear),
            "alg2" => Ok(Self::ResponseAware),
            "alg3" => Ok(Self::ResponseAwareSocManaged),
            other => Err(Error::InvalidParameter(format!(
                "unknown policy '{other}' (expected alg1, alg2 or alg3)"
            ))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Linear => "alg1",
            Self::ResponseAware => "alg2",
            Self::ResponseAwareSocManaged => "alg3",
        }
    }
}

/// Minimizes `|delta_energy + s|` subject to the feasible range: discharge
/// against surplus, charge against deficit, saturating at the bound.
pub fn linear_step(
    battery: &BatterySpec,
    stored: f64,
    delta_energy: f64,
    step_hours: f64,
) -> f64 {
    let (lo, hi) = battery.feasible_range(stored, step_hours);
    if delta_energy > 0.0 {
        (-delta_energy).max(lo)
    } else {
        (-delta_energy).min(hi)
    }
}

/// Three-zone rule: outside the band the residual is pulled to the nearer
/// band edge (feasibility permitting); inside the band no action is taken.
/// `band_energy` is the half-width `eps·P_g(i)·h` in MWh.
pub fn response_step(
    battery: &BatterySpec,
    stored: f64,
    delta_energy: f64,
    band_energy: f64,
    step_hours: f64,
) -> f64 {
    let (lo, hi) = battery.feasible_range(stored, step_hours);
    if delta_energy > band_energy {
        (-delta_energy + band_energy).max(lo)
    } else if delta_energy < -band_energy {
        (-delta_energy - band_energy).min(hi)
    } else {
        0.0
    }
}

/// Band-aware rule with SoC management (the nine-case table).
pub fn soc_managed_step(
    battery: &BatterySpec,
    band: &SocBand,
    stored: f64,
    delta_energy: f64,
    band_energy: f64,
    step_hours: f64,
) -> f64 {
    let soc = battery.soc(stored);
    let mid = band.midpoint();
    let rated = battery.energy_rated;
    let charge_cap = battery.max_step_charge(step_hours);
    let discharge_cap = -battery.max_step_discharge(step_hours);

    // 1 = below, 2 = inside, 3 = above.
    let soc_zone = if soc <= band.low {
        1
    } else if soc <= band.high {
        2
    } else {
        3
    };
    let delta_zone = if delta_energy <= -band_energy {
        1
    } else if delta_energy <= band_energy {
        2
    } else {
        3
    };

    let corrective_charge = || {
        charge_cap
            .min((band.high - soc) * rated / battery.eta_charge)
            .min(-delta_energy - band_energy)
            .max(0.0)
    };
    let replenish_charge = || {
        charge_cap
            .min((mid - soc) * rated / battery.eta_charge)
            .min(-delta_energy + band_energy)
            .max(0.0)
    };
    let replenish_discharge = || {
        discharge_cap
            .max((mid - soc) * rated * battery.eta_discharge)
            .max(-delta_energy - band_energy)
            .min(0.0)
    };
    let corrective_discharge = || {
        discharge_cap
            .max((band.low - soc) * rated * battery.eta_discharge)
            .max(-delta_energy - band_energy)
            .min(0.0)
    };

    let action = match (soc_zone, delta_zone) {
        (1, 1) => corrective_charge(),
        (1, 2) => replenish_charge(),
        (1, 3) => 0.0,
        (2, 1) => corrective_charge(),
        (2, 2) => {
            if soc <= mid {
                replenish_charge()
            } else {
                replenish_discharge()
            }
        }
        (2, 3) => corrective_discharge(),
        (3, 1) => 0.0,
        (3, 2) => replenish_discharge(),
        (3, 3) => corrective_discharge(),
        _ => unreachable!(),
    };

    let (lo, hi) = battery.feasible_range(stored, step_hours);
    action.clamp(lo, hi)
}

/// Runs a policy over a whole series from the initial stored energy.
///
/// The reported objective is the linear hinge cost of the policy's own
/// problem: plain `Σ|Δ·h + s|` for [`Policy::Linear`], the band hinge for the
/// response-aware policies. The attached reliability report always uses the
/// response model's epsilon.
pub fn run_policy(
    policy: Policy,
    battery: &BatterySpec,
    band: Option<&SocBand>,
    series: &ImbalanceSeries,
    response: &ResponseModel,
    initial_energy: f64,
) -> Result<DispatchResult> {
    if initial_energy < battery.energy_min || initial_energy > battery.energy_max {
        return Err(Error::InfeasibleInitialState {
            value: initial_energy,
            lo: battery.energy_min,
            hi: battery.energy_max,
        });
    }
    let soc_band = match (policy, band) {
        (Policy::ResponseAwareSocManaged, None) => {
            return Err(Error::InvalidParameter(
                "alg3 needs a state-of-charge band".into(),
            ))
        }
        (_, b) => b,
    };
    response.validate()?;

    let h = series.step_hours();
    let eps = response.epsilon();
    let started = std::time::Instant::now();

    let mut stored = initial_energy;
    let mut step_energies = Vec::with_capacity(series.len());
    let mut stored_traj = Vec::with_capacity(series.len());
    let mut soc_traj = Vec::with_capacity(series.len());
    let mut objective = 0.0;

    for i in 0..series.len() {
        let delta_energy = series.imbalance()[i] * h;
        let band_energy = eps * series.generation()[i] * h;
        let s = match policy {
            Policy::Linear => linear_step(battery, stored, delta_energy, h),
            Policy::ResponseAware => {
                response_step(battery, stored, delta_energy, band_energy, h)
            }
            Policy::ResponseAwareSocManaged => soc_managed_step(
                battery,
                soc_band.unwrap(),
                stored,
                delta_energy,
                band_energy,
                h,
            ),
        };
        stored = battery.step(stored, s)?;
        let objective_band = match policy {
            Policy::Linear => 0.0,
            _ => band_energy,
        };
        objective += ((delta_energy + s).abs() - objective_band).max(0.0);
        step_energies.push(s);
        stored_traj.push(stored);
        soc_traj.push(battery.soc(stored));
    }

    let power: Vec<f64> = step_energies.iter().map(|s| s / h).collect();
    let residuals = crate::metrics::residuals(series, &power)?;
    let report = crate::metrics::report(series, &residuals, Some(&soc_traj), eps)?;

    Ok(DispatchResult {
        step_energies,
        stored: stored_traj,
        soc: soc_traj,
        residuals,
        objective,
        report,
        solver_stats: SolverStats {
            iterations: series.len(),
            solve_time_ms: started.elapsed().as_secs_f64() * 1e3,
            ..Default::default()
        },
        complementarity_violations: 0,
    })
}
