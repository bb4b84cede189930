//! Shared problem description and dispatch-result types.
//!
//! A [`ProblemSpec`] pins down one horizon-dispatch instance: the imbalance
//! series, the battery, the cost kind (linear or quadratic), the response
//! band, and an optional state-of-charge penalty. Internally all optimizers
//! work in grid-side step energies (MWh): the per-step imbalance energy is
//! `Δ_i·h` and the band half-width `eps·P_g(i)·h`, so residual energy and
//! residual power differ by the factor `h` only.
//!
//! The per-step cost is `theta_i (+ beta_i)` for the linear kind and
//! `(theta_i + beta_i)^2` for the quadratic kind, where
//! `theta_i = max(|Δ_i·h + s_i| − eps·P_g(i)·h, 0)` and
//! `beta_i = lambda·max(|SoC_i − mid| − half_width, 0)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::battery::BatterySpec;
use crate::error::{Error, Result};
use crate::metrics::{self, ReliabilityReport};
use crate::myopic::SocBand;
use crate::response::ResponseModel;
use crate::timeseries::ImbalanceSeries;

/// Imbalance cost shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    Linear,
    Quadratic,
}

/// State-of-charge band penalty with weight `lambda >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocPenalty {
    pub weight: f64,
    pub band: SocBand,
}

/// One fully-specified dispatch-optimization instance.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub series: Arc<ImbalanceSeries>,
    pub battery: BatterySpec,
    pub cost: CostKind,
    /// When false the band is ignored and the plain absolute cost is used.
    pub response_aware: bool,
    pub response: ResponseModel,
    pub soc_penalty: Option<SocPenalty>,
    /// Initial stored energy (MWh).
    pub initial_energy: f64,
}

impl ProblemSpec {
    pub fn new(
        series: Arc<ImbalanceSeries>,
        battery: BatterySpec,
        cost: CostKind,
        response_aware: bool,
        response: ResponseModel,
        soc_penalty: Option<SocPenalty>,
        initial_energy: f64,
    ) -> Result<Self> {
        response.validate()?;
        if let Some(p) = &soc_penalty {
            if p.weight < 0.0 {
                return Err(Error::InvalidProblem(format!(
                    "soc penalty weight must be >= 0, got {}",
                    p.weight
                )));
            }
        }
        if initial_energy < battery.energy_min || initial_energy > battery.energy_max {
            return Err(Error::InfeasibleInitialState {
                value: initial_energy,
                lo: battery.energy_min,
                hi: battery.energy_max,
            });
        }
        Ok(Self {
            series,
            battery,
            cost,
            response_aware,
            response,
            soc_penalty,
            initial_energy,
        })
    }

    /// Horizon length.
    pub fn horizon(&self) -> usize {
        self.series.len()
    }

    /// Band fraction actually applied (zero when response-unaware).
    pub fn effective_epsilon(&self) -> f64 {
        if self.response_aware {
            self.response.epsilon()
        } else {
            0.0
        }
    }

    /// Per-step imbalance energy `Δ_i·h` (MWh).
    pub fn delta_energy(&self, i: usize) -> f64 {
        self.series.imbalance()[i] * self.series.step_hours()
    }

    /// Per-step band half-width in energy units `eps·P_g(i)·h` (MWh).
    pub fn band_energy(&self, i: usize) -> f64 {
        self.effective_epsilon() * self.series.generation()[i] * self.series.step_hours()
    }

    /// Imbalance hinge for one step given the dispatched energy.
    pub fn theta(&self, i: usize, step_energy: f64) -> f64 {
        ((self.delta_energy(i) + step_energy).abs() - self.band_energy(i)).max(0.0)
    }

    /// SoC hinge for one step given the post-step stored energy.
    pub fn beta(&self, stored: f64) -> f64 {
        match &self.soc_penalty {
            None => 0.0,
            Some(p) => {
                let soc = self.battery.soc(stored);
                p.weight * ((soc - p.band.midpoint()).abs() - p.band.half_width()).max(0.0)
            }
        }
    }

    /// Cost contribution of one step.
    pub fn step_cost(&self, i: usize, step_energy: f64, stored_after: f64) -> f64 {
        let v = self.theta(i, step_energy) + self.beta(stored_after);
        match self.cost {
            CostKind::Linear => v,
            CostKind::Quadratic => v * v,
        }
    }

    /// Propagates the storage dynamics for a dispatch and returns the stored
    /// energy trajectory; errors if any step leaves the energy bounds.
    pub fn propagate(&self, step_energies: &[f64]) -> Result<Vec<f64>> {
        if step_energies.len() != self.horizon() {
            return Err(Error::LengthMismatch {
                expected: self.horizon(),
                got: step_energies.len(),
            });
        }
        let mut stored = self.initial_energy;
        let mut out = Vec::with_capacity(step_energies.len());
        for &s in step_energies {
            stored = self.battery.step(stored, s)?;
            out.push(stored);
        }
        Ok(out)
    }

    /// True objective of a dispatch, evaluated by exact propagation of the
    /// dynamics and direct hinge computation (no epigraph variables). This is
    /// the single evaluation path all solvers and tests compare through.
    pub fn evaluate_objective(&self, step_energies: &[f64]) -> Result<f64> {
        let stored = self.propagate(step_energies)?;
        Ok(self.objective_given(step_energies, &stored))
    }

    /// Objective from explicit trajectories without re-propagating.
    pub fn objective_given(&self, step_energies: &[f64], stored: &[f64]) -> f64 {
        step_energies
            .iter()
            .zip(stored)
            .enumerate()
            .map(|(i, (&s, &b))| self.step_cost(i, s, b))
            .sum()
    }

    /// Checks a dispatch against the power limits, energy bounds and the
    /// dynamics, all within `tol` (absolute, scaled by the battery size).
    pub fn validate_dispatch(&self, step_energies: &[f64], stored: &[f64], tol: f64) -> Result<()> {
        if step_energies.len() != self.horizon() || stored.len() != self.horizon() {
            return Err(Error::LengthMismatch {
                expected: self.horizon(),
                got: step_energies.len().min(stored.len()),
            });
        }
        let h = self.series.step_hours();
        let scale = self.battery.energy_max.max(1.0);
        let s_hi = self.battery.max_step_charge(h);
        let s_lo = -self.battery.max_step_discharge(h);
        let mut prev = self.initial_energy;
        for i in 0..step_energies.len() {
            let s = step_energies[i];
            if s > s_hi + tol * scale || s < s_lo - tol * scale {
                return Err(Error::InvalidProblem(format!(
                    "step {i}: energy {s} outside power limits [{s_lo}, {s_hi}]"
                )));
            }
            let expected = self.battery.apply_dynamics(prev, s);
            if (stored[i] - expected).abs() > tol * scale {
                return Err(Error::InvalidProblem(format!(
                    "step {i}: stored energy {} does not follow the dynamics (expected {expected})",
                    stored[i]
                )));
            }
            if stored[i] < self.battery.energy_min - tol * scale
                || stored[i] > self.battery.energy_max + tol * scale
            {
                return Err(Error::InvalidProblem(format!(
                    "step {i}: stored energy {} outside [{}, {}]",
                    stored[i], self.battery.energy_min, self.battery.energy_max
                )));
            }
            prev = stored[i];
        }
        Ok(())
    }

    /// Builds the reliability report for a dispatch (residuals in MW).
    pub fn build_report(&self, step_energies: &[f64], soc: &[f64]) -> Result<ReliabilityReport> {
        let h = self.series.step_hours();
        let power: Vec<f64> = step_energies.iter().map(|s| s / h).collect();
        let res = metrics::residuals(&self.series, &power)?;
        metrics::report(&self.series, &res, Some(soc), self.effective_epsilon())
    }
}

/// Convergence and search statistics attached to a dispatch result.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolverStats {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Wall-clock time in milliseconds. Excluded from deterministic outputs.
    pub solve_time_ms: f64,
    /// Branch-and-bound: nodes explored.
    #[serde(default)]
    pub nodes_explored: Option<usize>,
    /// Branch-and-bound: bound of the root relaxation.
    #[serde(default)]
    pub root_bound: Option<f64>,
    /// Branch-and-bound: remaining optimality gap.
    #[serde(default)]
    pub gap: Option<f64>,
    /// Whether the result is certified optimal (gap closed within tolerance).
    #[serde(default)]
    pub certified: Option<bool>,
}

/// Trajectories and diagnostics of one dispatch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DispatchResult {
    /// Grid-side step energies (MWh, signed).
    pub step_energies: Vec<f64>,
    /// Stored energy after each step (MWh).
    pub stored: Vec<f64>,
    /// State of charge after each step.
    pub soc: Vec<f64>,
    /// Residual imbalance per sample (MW).
    pub residuals: Vec<f64>,
    /// True objective recomputed from the dispatch trajectory.
    pub objective: f64,
    /// Reliability report at the problem's effective epsilon.
    pub report: ReliabilityReport,
    pub solver_stats: SolverStats,
    /// Steps on which the charge/discharge split stayed simultaneously
    /// active beyond tolerance (possible only in the convex relaxation).
    pub complementarity_violations: usize,
}

impl DispatchResult {
    /// Assembles a result from a dispatch whose stored-energy trajectory
    /// follows the exact dynamics.
    pub fn from_dispatch(
        spec: &ProblemSpec,
        step_energies: Vec<f64>,
        stats: SolverStats,
    ) -> Result<Self> {
        let stored = spec.propagate(&step_energies)?;
        Self::from_trajectories(spec, step_energies, stored, stats, 0)
    }

    /// Assembles a result from explicit trajectories (used by the convex
    /// relaxation when the split stayed active and the exact dynamics do not
    /// reproduce the stored trajectory).
    pub fn from_trajectories(
        spec: &ProblemSpec,
        step_energies: Vec<f64>,
        stored: Vec<f64>,
        stats: SolverStats,
        complementarity_violations: usize,
    ) -> Result<Self> {
        let h = spec.series.step_hours();
        let soc: Vec<f64> = stored.iter().map(|&b| spec.battery.soc(b)).collect();
        let power: Vec<f64> = step_energies.iter().map(|s| s / h).collect();
        let residuals = metrics::residuals(&spec.series, &power)?;
        let report = metrics::report(
            &spec.series,
            &residuals,
            Some(&soc),
            spec.effective_epsilon(),
        )?;
        let objective = spec.objective_given(&step_energies, &stored);
        Ok(Self {
            step_energies,
            stored,
            soc,
            residuals,
            objective,
            report,
            solver_stats: stats,
            complementarity_violations,
        })
    }
}
