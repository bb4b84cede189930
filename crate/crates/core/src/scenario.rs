//! Scenario runner: storage-size × response sweeps with report emission.
//!
//! A scenario pins a data source (CSV file or synthetic model), a list of
//! battery settings (including "no storage"), a list of band fractions and a
//! list of dispatch methods. Every combination runs as an independent cell;
//! failures are recorded per cell and never abort the sweep. Emission is
//! deterministic: fixed orderings and formatting, no wall-clock fields.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::battery::BatteryConfig;
use crate::error::{Error, Result};
use crate::metrics::{self, ReliabilityReport};
use crate::myopic::{run_policy, Policy, SocBand};
use crate::opt_convex::{self, ConvexOptions};
use crate::opt_mccormick::{self, MipOptions};
use crate::problem::{CostKind, ProblemSpec, SocPenalty};
use crate::response::ResponseModel;
use crate::timeseries::{self, CsvSchema, ImbalanceSeries, SynthModel};

/// Where the imbalance series comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Csv { path: String, schema: CsvSchema },
    Synth { n: usize, seed: u64, model: SynthModel },
}

/// One battery setting; absent `energy_mwh` means "no storage".
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatteryEntry {
    #[serde(default)]
    pub label: Option<String>,
    #[serde(flatten, default)]
    pub battery: Option<BatteryConfig>,
}

impl BatteryEntry {
    pub fn label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        match &self.battery {
            None => "none".to_string(),
            Some(b) => format!("{:.0}mwh", b.energy_mwh),
        }
    }

    pub fn energy_mwh(&self) -> f64 {
        self.battery.as_ref().map(|b| b.energy_mwh).unwrap_or(0.0)
    }
}

/// Dispatch method for a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Alg1,
    Alg2,
    Alg3,
    Convex,
    Mip,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Alg1 => "alg1",
            Method::Alg2 => "alg2",
            Method::Alg3 => "alg3",
            Method::Convex => "convex",
            Method::Mip => "mip",
        }
    }
}

fn default_lambda() -> f64 {
    1.0
}

fn default_cost() -> CostKind {
    CostKind::Linear
}

/// Full sweep description (the scenario JSON schema).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub data: DataSource,
    pub batteries: Vec<BatteryEntry>,
    pub epsilons: Vec<f64>,
    pub methods: Vec<Method>,
    #[serde(default = "default_cost")]
    pub cost: CostKind,
    #[serde(default)]
    pub soc_band: Option<SocBand>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Cap applied to exact MIP cells.
    #[serde(default)]
    pub mip_horizon_cap: Option<usize>,
}

/// One completed cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellReport {
    pub battery: String,
    pub energy_mwh: f64,
    pub epsilon: f64,
    pub method: String,
    /// Dispatch objective in energy units; the plain band hinge for the
    /// no-storage rows.
    pub objective: f64,
    pub complementarity_violations: usize,
    pub iterations: usize,
    pub saidi_eps_minutes: f64,
    #[serde(flatten)]
    pub report: ReliabilityReport,
}

/// Cell outcome: a report or a recorded failure.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum CellOutcome {
    Ok { cell: CellReport },
    Failed { battery: String, epsilon: f64, method: String, error: String },
}

/// Marginal reliability improvement between consecutive battery sizes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginalRow {
    pub method: String,
    pub epsilon: f64,
    pub from_battery: String,
    pub to_battery: String,
    pub added_mwh: f64,
    pub delta_ri: f64,
    pub marginal_per_mwh: f64,
}

/// Completed sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<CellOutcome>,
    pub marginal: Vec<MarginalRow>,
}

impl SweepResult {
    pub fn ok_cells(&self) -> impl Iterator<Item = &CellReport> {
        self.cells.iter().filter_map(|c| match c {
            CellOutcome::Ok { cell } => Some(cell),
            CellOutcome::Failed { .. } => None,
        })
    }

    pub fn failed_count(&self) -> usize {
        self.cells.len() - self.ok_cells().count()
    }

    /// Comparison table over the successful cells.
    pub fn table(&self) -> String {
        let rows: Vec<(String, f64, ReliabilityReport)> = self
            .ok_cells()
            .map(|c| {
                (
                    format!("{} / {}", c.battery, c.method),
                    c.epsilon,
                    c.report.clone(),
                )
            })
            .collect();
        metrics::format_report_table(&rows)
    }
}

/// Loads or synthesizes the scenario's series.
pub fn load_series(source: &DataSource) -> Result<ImbalanceSeries> {
    match source {
        DataSource::Csv { path, schema } => timeseries::load_csv(path, schema),
        DataSource::Synth { n, seed, model } => timeseries::synth(*n, model, *seed),
    }
}

fn validate(sc: &Scenario) -> Result<()> {
    if sc.batteries.is_empty() {
        return Err(Error::InvalidScenario("empty battery list".into()));
    }
    if sc.epsilons.is_empty() {
        return Err(Error::InvalidScenario("empty epsilon list".into()));
    }
    if sc.methods.is_empty() {
        return Err(Error::InvalidScenario("empty method list".into()));
    }
    if sc.epsilons.iter().any(|&e| e < 0.0 || !e.is_finite()) {
        return Err(Error::InvalidScenario("epsilons must be >= 0".into()));
    }
    if sc.lambda < 0.0 {
        return Err(Error::InvalidScenario("lambda must be >= 0".into()));
    }
    if sc.methods.contains(&Method::Alg3) && sc.soc_band.is_none() {
        return Err(Error::InvalidScenario("alg3 requires soc_band".into()));
    }
    if let Some(band) = &sc.soc_band {
        band.validate()?;
    }
    Ok(())
}

fn run_cell(
    sc: &Scenario,
    series: &Arc<ImbalanceSeries>,
    entry: &BatteryEntry,
    epsilon: f64,
    method: Method,
) -> Result<CellReport> {
    let response = ResponseModel::direct(epsilon)?;
    let h = series.step_hours();

    let Some(config) = &entry.battery else {
        // no storage: evaluate the raw series
        let residuals = series.imbalance().to_vec();
        let report = metrics::report(series, &residuals, None, epsilon)?;
        let objective: f64 = residuals
            .iter()
            .zip(series.generation())
            .map(|(r, pg)| ((r * h).abs() - epsilon * pg * h).max(0.0))
            .sum();
        return Ok(CellReport {
            battery: entry.label(),
            energy_mwh: 0.0,
            epsilon,
            method: method.label().to_string(),
            objective,
            complementarity_violations: 0,
            iterations: 0,
            saidi_eps_minutes: metrics::saidi_to_minutes(report.saidi_eps_mod, h),
            report,
        });
    };

    let (battery, initial) = config.build()?;
    let soc_penalty = sc.soc_band.map(|band| SocPenalty {
        weight: sc.lambda,
        band,
    });

    let result = match method {
        Method::Alg1 | Method::Alg2 | Method::Alg3 => {
            let policy = match method {
                Method::Alg1 => Policy::Linear,
                Method::Alg2 => Policy::ResponseAware,
                _ => Policy::ResponseAwareSocManaged,
            };
            run_policy(
                policy,
                &battery,
                sc.soc_band.as_ref(),
                series,
                &response,
                initial,
            )?
        }
        Method::Convex => {
            let spec = ProblemSpec::new(
                series.clone(),
                battery,
                sc.cost,
                true,
                response,
                soc_penalty,
                initial,
            )?;
            opt_convex::optimize(&spec, &ConvexOptions::default())?
        }
        Method::Mip => {
            let spec = ProblemSpec::new(
                series.clone(),
                battery,
                sc.cost,
                true,
                response,
                soc_penalty,
                initial,
            )?;
            let opts = MipOptions {
                horizon_cap: sc.mip_horizon_cap.unwrap_or(opt_mccormick::DEFAULT_HORIZON_CAP),
                ..Default::default()
            };
            opt_mccormick::optimize(&spec, &opts)?
        }
    };

    Ok(CellReport {
        battery: entry.label(),
        energy_mwh: entry.energy_mwh(),
        epsilon,
        method: method.label().to_string(),
        objective: result.objective,
        complementarity_violations: result.complementarity_violations,
        iterations: result.solver_stats.iterations,
        saidi_eps_minutes: metrics::saidi_to_minutes(result.report.saidi_eps_mod, h),
        report: result.report,
    })
}

/// Runs every (battery, epsilon, method) cell of the scenario.
pub fn run_scenario(sc: &Scenario) -> Result<SweepResult> {
    validate(sc)?;
    let series = Arc::new(load_series(&sc.data)?);

    let mut jobs = Vec::new();
    for entry in &sc.batteries {
        for &epsilon in &sc.epsilons {
            for &method in &sc.methods {
                jobs.push((entry.clone(), epsilon, method));
            }
        }
    }

    let cells: Vec<CellOutcome> = jobs
        .par_iter()
        .map(|(entry, epsilon, method)| {
            match run_cell(sc, &series, entry, *epsilon, *method) {
                Ok(cell) => CellOutcome::Ok { cell },
                Err(e) => CellOutcome::Failed {
                    battery: entry.label(),
                    epsilon: *epsilon,
                    method: method.label().to_string(),
                    error: e.to_string(),
                },
            }
        })
        .collect();

    let marginal = marginal_rows(&cells);
    Ok(SweepResult { cells, marginal })
}

/// Finite-difference reliability gain per added MWh between consecutive
/// battery sizes, per (method, epsilon).
fn marginal_rows(cells: &[CellOutcome]) -> Vec<MarginalRow> {
    let ok: Vec<&CellReport> = cells
        .iter()
        .filter_map(|c| match c {
            CellOutcome::Ok { cell } => Some(cell),
            CellOutcome::Failed { .. } => None,
        })
        .collect();

    let mut keys: Vec<(String, f64)> = Vec::new();
    for c in &ok {
        let key = (c.method.clone(), c.epsilon);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }

    let mut rows = Vec::new();
    for (method, epsilon) in keys {
        let mut group: Vec<&&CellReport> = ok
            .iter()
            .filter(|c| c.method == method && c.epsilon == epsilon)
            .collect();
        group.sort_by(|a, b| a.energy_mwh.partial_cmp(&b.energy_mwh).unwrap());
        for pair in group.windows(2) {
            let (small, big) = (pair[0], pair[1]);
            let added = big.energy_mwh - small.energy_mwh;
            if added <= 0.0 {
                continue;
            }
            let delta_ri = big.report.ri_eps_mod - small.report.ri_eps_mod;
            rows.push(MarginalRow {
                method: method.clone(),
                epsilon,
                from_battery: small.battery.clone(),
                to_battery: big.battery.clone(),
                added_mwh: added,
                delta_ri,
                marginal_per_mwh: delta_ri / added,
            });
        }
    }
    rows
}

/// Writes cells/*.json, summary.table.txt, ri_vs_eps.csv and marginal.csv.
/// Byte-identical across runs for the same scenario.
pub fn emit_report(result: &SweepResult, out_dir: impl AsRef<Path>) -> Result<()> {
    let dir = out_dir.as_ref();
    let cells_dir = dir.join("cells");
    fs::create_dir_all(&cells_dir)?;

    for outcome in &result.cells {
        let (name, payload) = match outcome {
            CellOutcome::Ok { cell } => (
                format!("{}_eps{:.4}_{}.json", cell.battery, cell.epsilon, cell.method),
                serde_json::to_string_pretty(outcome)?,
            ),
            CellOutcome::Failed {
                battery,
                epsilon,
                method,
                ..
            } => (
                format!("{battery}_eps{epsilon:.4}_{method}.json"),
                serde_json::to_string_pretty(outcome)?,
            ),
        };
        fs::write(cells_dir.join(name), payload + "\n")?;
    }

    let mut table = String::new();
    table.push_str(&result.table());
    if result.failed_count() > 0 {
        table.push('\n');
        for outcome in &result.cells {
            if let CellOutcome::Failed {
                battery,
                epsilon,
                method,
                error,
            } = outcome
            {
                table.push_str(&format!(
                    "FAILED {battery} eps={epsilon:.4} {method}: {error}\n"
                ));
            }
        }
    }
    fs::write(dir.join("summary.table.txt"), table)?;

    let mut ri_csv = String::from("epsilon,battery,energy_mwh,method,ri_eps_mod,saidi_eps_mod\n");
    for cell in result.ok_cells() {
        ri_csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            cell.epsilon,
            cell.battery,
            cell.energy_mwh,
            cell.method,
            cell.report.ri_eps_mod,
            cell.report.saidi_eps_mod
        ));
    }
    fs::write(dir.join("ri_vs_eps.csv"), ri_csv)?;

    let mut marginal_csv =
        String::from("method,epsilon,from_battery,to_battery,added_mwh,delta_ri,marginal_per_mwh\n");
    for row in &result.marginal {
        marginal_csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.method,
            row.epsilon,
            row.from_battery,
            row.to_battery,
            row.added_mwh,
            row.delta_ri,
            row.marginal_per_mwh
        ));
    }
    fs::write(dir.join("marginal.csv"), marginal_csv)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::{GenerationModel, ImbalanceModel};

    fn synth_scenario(methods: Vec<Method>, batteries: Vec<BatteryEntry>) -> Scenario {
        Scenario {
            data: DataSource::Synth {
                n: 96,
                seed: 11,
                model: SynthModel {
                    step_hours: 0.25,
                    imbalance: ImbalanceModel {
                        mean: 0.0,
                        reversion_rate: 0.5,
                        volatility: 120.0,
                    },
                    generation: GenerationModel::Constant(8000.0),
                    spike: None,
                },
            },
            batteries,
            epsilons: vec![0.0, 0.01],
            methods,
            cost: CostKind::Linear,
            soc_band: None,
            lambda: 1.0,
            mip_horizon_cap: None,
        }
    }

    fn battery_entry(mwh: f64) -> BatteryEntry {
        BatteryEntry {
            label: None,
            battery: Some(BatteryConfig {
                energy_mwh: mwh,
                c_charge: 1.0,
                c_discharge: 1.0,
                eta_ch: 1.0,
                eta_dis: 1.0,
                soc0: 0.5,
            }),
        }
    }

    fn none_entry() -> BatteryEntry {
        BatteryEntry {
            label: Some("none".into()),
            battery: None,
        }
    }

    #[test]
    fn no_storage_rows_reproduce_raw_metrics() {
        let sc = synth_scenario(vec![Method::Alg2], vec![none_entry()]);
        let result = run_scenario(&sc).unwrap();
        assert_eq!(result.cells.len(), 2);
        let series = load_series(&sc.data).unwrap();
        let raw = metrics::report(&series, series.imbalance(), None, 0.01).unwrap();
        let cell = result
            .ok_cells()
            .find(|c| c.epsilon == 0.01)
            .expect("cell present");
        assert!((cell.report.ri_eps_mod - raw.ri_eps_mod).abs() < 1e-12);
    }

    #[test]
    fn cell_count_is_the_full_cross_product() {
        let sc = synth_scenario(
            vec![Method::Alg1, Method::Alg2],
            vec![none_entry(), battery_entry(100.0), battery_entry(200.0)],
        );
        let result = run_scenario(&sc).unwrap();
        assert_eq!(result.cells.len(), 3 * 2 * 2);
        assert_eq!(result.failed_count(), 0);
    }

    #[test]
    fn reliability_is_monotone_in_battery_size() {
        let sc = synth_scenario(
            vec![Method::Alg2],
            vec![
                none_entry(),
                battery_entry(100.0),
                battery_entry(200.0),
                battery_entry(500.0),
            ],
        );
        let result = run_scenario(&sc).unwrap();
        for &eps in &sc.epsilons {
            let mut cells: Vec<&CellReport> = result
                .ok_cells()
                .filter(|c| c.epsilon == eps)
                .collect();
            cells.sort_by(|a, b| a.energy_mwh.partial_cmp(&b.energy_mwh).unwrap());
            for pair in cells.windows(2) {
                assert!(
                    pair[1].report.ri_eps_mod >= pair[0].report.ri_eps_mod - 1e-9,
                    "eps={eps}: {} -> {}",
                    pair[0].report.ri_eps_mod,
                    pair[1].report.ri_eps_mod
                );
            }
        }
    }

    #[test]
    fn failed_cells_are_recorded_not_fatal() {
        // MIP on a 96-step series exceeds the horizon cap
        let sc = synth_scenario(vec![Method::Mip], vec![battery_entry(100.0)]);
        let result = run_scenario(&sc).unwrap();
        assert_eq!(result.cells.len(), 2);
        assert_eq!(result.failed_count(), 2);
    }

    #[test]
    fn emission_is_byte_identical() {
        let sc = synth_scenario(
            vec![Method::Alg2],
            vec![none_entry(), battery_entry(150.0)],
        );
        let result1 = run_scenario(&sc).unwrap();
        let result2 = run_scenario(&sc).unwrap();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        emit_report(&result1, d1.path()).unwrap();
        emit_report(&result2, d2.path()).unwrap();
        for name in ["summary.table.txt", "ri_vs_eps.csv", "marginal.csv"] {
            let a = fs::read(d1.path().join(name)).unwrap();
            let b = fs::read(d2.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs");
        }
        let mut entries1: Vec<_> = fs::read_dir(d1.path().join("cells"))
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        entries1.sort();
        for name in entries1 {
            let a = fs::read(d1.path().join("cells").join(&name)).unwrap();
            let b = fs::read(d2.path().join("cells").join(&name)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn scenario_json_round_trips() {
        let text = r#"{
            "data": {"synth": {"n": 10, "seed": 3, "model": {
                "step_hours": 1.0,
                "imbalance": {"mean": 0.0, "reversion_rate": 1.0, "volatility": 10.0},
                "generation": {"constant": 1000.0}
            }}},
            "batteries": [{"label": "none"}, {"energy_mwh": 100.0}],
            "epsilons": [0.0, 0.005],
            "methods": ["alg2", "convex"],
            "cost": "linear",
            "soc_band": {"low": 0.4, "high": 0.8},
            "lambda": 1.0
        }"#;
        let sc: Scenario = serde_json::from_str(text).unwrap();
        assert_eq!(sc.batteries.len(), 2);
        assert!(sc.batteries[0].battery.is_none());
        assert!(sc.batteries[1].battery.is_some());
        assert_eq!(sc.methods, vec![Method::Alg2, Method::Convex]);
    }
}
