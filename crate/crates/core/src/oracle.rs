//! Brute-force ground truth for tiny horizons.
//!
//! Enumerates dispatch trajectories over a per-step grid spanning the
//! feasible energy range, simulating the exact dynamics step by step and
//! evaluating the true cost directly (no epigraph variables). The grid is
//! augmented with the analytic target points — zero action, full
//! cancellation, the two band-edge targets, the feasibility bounds and (for
//! SoC-penalized problems) the moves that land exactly on the SoC band edges
//! and midpoint. For piecewise-linear costs some optimum always lies on those
//! targets, which makes the search exact; for quadratic costs a zoom
//! refinement around the incumbent drives the grid error far below the
//! comparison tolerances.

use crate::error::{Error, Result};
use crate::problem::{DispatchResult, ProblemSpec, SolverStats};

/// Grid-search configuration.
#[derive(Debug, Clone)]
pub struct OracleConfig {
    /// Uniform grid points per step (odd, >= 3).
    pub levels: usize,
    /// Horizon cap; enumeration is exponential in the horizon.
    pub max_horizon: usize,
    /// Maximum zoom passes around the incumbent.
    pub refine_passes: usize,
    /// Stop refining when the relative improvement drops below this.
    pub refine_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            levels: 21,
            max_horizon: 4,
            refine_passes: 6,
            refine_tol: 1e-10,
        }
    }
}

struct Search<'a> {
    spec: &'a ProblemSpec,
    levels: usize,
    soc_targets: Vec<f64>,
    best_cost: f64,
    best_traj: Vec<f64>,
    visited: usize,
    // zoom window per step (center, width); empty on the full-range pass
    window: Vec<(f64, f64)>,
    current: Vec<f64>,
}

impl<'a> Search<'a> {
    fn candidates(&self, i: usize, stored: f64) -> Vec<f64> {
        let spec = self.spec;
        let h = spec.series.step_hours();
        let (lo, hi) = spec.battery.feasible_range(stored, h);
        let (mut from, mut to) = (lo, hi);
        if let Some(&(center, width)) = self.window.get(i) {
            from = (center - width).max(lo);
            to = (center + width).min(hi);
            if from > to {
                from = lo;
                to = hi;
            }
        }

        let delta_e = spec.delta_energy(i);
        let band_e = spec.band_energy(i);
        let mut cand = Vec::with_capacity(self.levels + 10);
        if self.levels > 1 && to > from {
            let step = (to - from) / (self.levels - 1) as f64;
            for k in 0..self.levels {
                cand.push(from + step * k as f64);
            }
        } else {
            cand.push(from);
        }
        // analytic targets, clipped to the true feasible range
        let mut push_target = |t: f64| {
            if t >= lo && t <= hi {
                cand.push(t);
            }
        };
        push_target(0.0);
        push_target(-delta_e);
        push_target(-delta_e + band_e);
        push_target(-delta_e - band_e);
        push_target(lo);
        push_target(hi);
        if let Some(&(center, _)) = self.window.get(i) {
            push_target(center);
        }
        for &soc in &self.soc_targets {
            let target_stored = soc * spec.battery.energy_rated;
            let t = if target_stored >= stored {
                (target_stored - stored) / spec.battery.eta_charge
            } else {
                (target_stored - stored) * spec.battery.eta_discharge
            };
            push_target(t);
        }

        cand.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let tol = 1e-12 * (1.0 + hi.abs().max(lo.abs()));
        cand.dedup_by(|a, b| (*a - *b).abs() <= tol);
        // enumerate low-effort actions first so the first-found optimum is
        // the least-action trajectory among ties
        cand.sort_by(|a, b| {
            (a.abs(), *a)
                .partial_cmp(&(b.abs(), *b))
                .unwrap()
        });
        cand
    }

    fn dfs(&mut self, i: usize, stored: f64, cost: f64) {
        if i == self.spec.horizon() {
            if cost < self.best_cost {
                self.best_cost = cost;
                self.best_traj = self.current.clone();
            }
            return;
        }
        for s in self.candidates(i, stored) {
            self.visited += 1;
            let next = self.spec.battery.apply_dynamics(stored, s);
            let next = next.clamp(self.spec.battery.energy_min, self.spec.battery.energy_max);
            let step_cost = self.spec.step_cost(i, s, next);
            let total = cost + step_cost;
            if total >= self.best_cost {
                continue;
            }
            self.current.push(s);
            self.dfs(i + 1, next, total);
            self.current.pop();
        }
    }
}

/// Exhaustive minimum over the target-augmented grid, with deterministic
/// first-found tie-breaking over the effort-ordered enumeration (ties go to
/// the least-action trajectory).
pub fn brute_force(spec: &ProblemSpec, cfg: &OracleConfig) -> Result<DispatchResult> {
    let n = spec.horizon();
    if n > cfg.max_horizon {
        return Err(Error::OracleHorizon {
            n,
            cap: cfg.max_horizon,
        });
    }
    if cfg.levels < 3 || cfg.levels % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "oracle levels must be odd and >= 3, got {}",
            cfg.levels
        )));
    }

    let soc_targets = match &spec.soc_penalty {
        None => Vec::new(),
        Some(p) => vec![
            p.band.midpoint() - p.band.half_width(),
            p.band.midpoint(),
            p.band.midpoint() + p.band.half_width(),
        ],
    };

    let started = std::time::Instant::now();
    let mut search = Search {
        spec,
        levels: cfg.levels,
        soc_targets,
        best_cost: f64::INFINITY,
        best_traj: Vec::new(),
        visited: 0,
        window: Vec::new(),
        current: Vec::with_capacity(n),
    };
    search.dfs(0, spec.initial_energy, 0.0);

    let h = spec.series.step_hours();
    let full_width = spec.battery.max_step_charge(h) + spec.battery.max_step_discharge(h);
    let mut width = full_width * 2.0 / (cfg.levels - 1) as f64;
    for _ in 0..cfg.refine_passes {
        let previous = search.best_cost;
        search.window = search.best_traj.iter().map(|&s| (s, width)).collect();
        let incumbent = search.best_traj.clone();
        // keep the incumbent reachable: reset and re-seed the search
        search.best_cost = f64::INFINITY;
        search.current.clear();
        search.dfs(0, spec.initial_energy, 0.0);
        if search.best_cost > previous {
            // numerically identical incumbent got pruned; restore
            search.best_cost = previous;
            search.best_traj = incumbent;
        }
        let improvement = previous - search.best_cost;
        if improvement <= cfg.refine_tol * (1.0 + search.best_cost.abs()) {
            break;
        }
        width *= 4.0 / (cfg.levels - 1) as f64;
    }

    let stats = SolverStats {
        iterations: search.visited,
        solve_time_ms: started.elapsed().as_secs_f64() * 1e3,
        ..Default::default()
    };
    DispatchResult::from_dispatch(spec, search.best_traj, stats)
}
