//! Imbalance time-series ingestion, resampling and synthesis.
//!
//! Every downstream module consumes an [`ImbalanceSeries`]: a per-sample net
//! imbalance (MW, signed) paired with scheduled generation (MW, nonnegative)
//! at a fixed sample duration. Positive imbalance is surplus injection that a
//! discharge-side storage action offsets; sources using the opposite sign
//! convention can negate the column at ingestion via [`CsvSchema`].

use std::path::Path;

use chrono::NaiveDateTime;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for deciding that sample spacing is regular.
const SPACING_TOL: f64 = 0.01;

/// Validated, immutable imbalance series.
#[derive(Debug, Clone, PartialEq)]
pub struct ImbalanceSeries {
    imbalance: Vec<f64>,
    generation: Vec<f64>,
    step_hours: f64,
    start_time: Option<String>,
    filled_gaps: Vec<usize>,
}

impl ImbalanceSeries {
    /// Builds a series from raw columns, enforcing the type invariants:
    /// equal nonzero lengths, nonnegative generation and a positive step.
    pub fn new(imbalance: Vec<f64>, generation: Vec<f64>, step_hours: f64) -> Result<Self> {
        Self::with_metadata(imbalance, generation, step_hours, None, Vec::new())
    }

    fn with_metadata(
        imbalance: Vec<f64>,
        generation: Vec<f64>,
        step_hours: f64,
        start_time: Option<String>,
        filled_gaps: Vec<usize>,
    ) -> Result<Self> {
        if imbalance.is_empty() {
            return Err(Error::EmptySeries);
        }
        if imbalance.len() != generation.len() {
            return Err(Error::LengthMismatch {
                expected: imbalance.len(),
                got: generation.len(),
            });
        }
        if !(step_hours > 0.0) || !step_hours.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "step_hours must be positive and finite, got {step_hours}"
            )));
        }
        for (i, &v) in imbalance.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "imbalance sample {i} is not finite"
                )));
            }
        }
        for (i, &g) in generation.iter().enumerate() {
            if !g.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "generation sample {i} is not finite"
                )));
            }
            if g < 0.0 {
                return Err(Error::NegativeGeneration { index: i, value: g });
            }
        }
        Ok(Self {
            imbalance,
            generation,
            step_hours,
            start_time,
            filled_gaps,
        })
    }

    /// Net imbalance per sample (MW, signed).
    pub fn imbalance(&self) -> &[f64] {
        &self.imbalance
    }

    /// Scheduled generation per sample (MW).
    pub fn generation(&self) -> &[f64] {
        &self.generation
    }

    /// Sample duration in hours.
    pub fn step_hours(&self) -> f64 {
        self.step_hours
    }

    /// Informational start timestamp, when the source provided one.
    pub fn start_time(&self) -> Option<&str> {
        self.start_time.as_deref()
    }

    /// Indices that were synthesized by gap filling at ingestion.
    pub fn filled_gaps(&self) -> &[usize] {
        &self.filled_gaps
    }

    /// Sample count.
    pub fn len(&self) -> usize {
        self.imbalance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.imbalance.is_empty()
    }

    /// Mean scheduled generation (MW).
    pub fn generation_mean(&self) -> f64 {
        self.generation.iter().sum::<f64>() / self.generation.len() as f64
    }
}

/// Column mapping and ingestion options for [`load_csv`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    /// Name of the net-imbalance column.
    pub imbalance_col: String,
    /// Name of the scheduled-generation column, when present in the file.
    #[serde(default)]
    pub generation_col: Option<String>,
    /// Constant generation (MW) used when no generation column exists.
    #[serde(default)]
    pub constant_generation: Option<f64>,
    /// Name of the timestamp column used to infer the step.
    #[serde(default)]
    pub time_col: Option<String>,
    /// Explicit sample duration in hours; overrides inference.
    #[serde(default)]
    pub step_hours: Option<f64>,
    /// Fill single-run gaps by linear interpolation instead of erroring.
    #[serde(default)]
    pub fill_gaps: bool,
    /// Negate the imbalance column at ingestion (opposite sign convention).
    #[serde(default)]
    pub negate_imbalance: bool,
}

impl CsvSchema {
    pub fn new(imbalance_col: impl Into<String>) -> Self {
        Self {
            imbalance_col: imbalance_col.into(),
            generation_col: None,
            constant_generation: None,
            time_col: None,
            step_hours: None,
            fill_gaps: false,
            negate_imbalance: false,
        }
    }

    pub fn with_generation_col(mut self, col: impl Into<String>) -> Self {
        self.generation_col = Some(col.into());
        self
    }

    pub fn with_constant_generation(mut self, mw: f64) -> Self {
        self.constant_generation = Some(mw);
        self
    }

    pub fn with_time_col(mut self, col: impl Into<String>) -> Self {
        self.time_col = Some(col.into());
        self
    }

    pub fn with_step_hours(mut self, hours: f64) -> Self {
        self.step_hours = Some(hours);
        self
    }

    pub fn with_fill_gaps(mut self, fill: bool) -> Self {
        self.fill_gaps = fill;
        self
    }
}

/// Parsed timestamp. Epoch milliseconds stay integral in f64, so spacing
/// inference differences them exactly; plain numeric columns are hours.
#[derive(Debug, Clone, Copy)]
enum TimeStamp {
    Hours(f64),
    EpochMillis(f64),
}

impl TimeStamp {
    fn raw(self) -> f64 {
        match self {
            TimeStamp::Hours(v) | TimeStamp::EpochMillis(v) => v,
        }
    }

    fn to_hours_spacing(self, raw_spacing: f64) -> f64 {
        match self {
            TimeStamp::Hours(_) => raw_spacing,
            TimeStamp::EpochMillis(_) => raw_spacing / 3_600_000.0,
        }
    }
}

/// Parses a timestamp cell as plain hours, RFC 3339, or a common datetime
/// layout.
fn parse_time(value: &str) -> Option<TimeStamp> {
    let v = value.trim();
    if let Ok(h) = v.parse::<f64>() {
        return Some(TimeStamp::Hours(h));
    }
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(v) {
        return Some(TimeStamp::EpochMillis(dt.timestamp_millis() as f64));
    }
    for fmt in [
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M",
        "%Y/%m/%d %H:%M:%S",
    ] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(v, fmt) {
            return Some(TimeStamp::EpochMillis(dt.and_utc().timestamp_millis() as f64));
        }
    }
    None
}

/// Loads a validated series from a headered CSV file.
///
/// The step is taken from `schema.step_hours` when given, otherwise inferred
/// from consecutive timestamps. Inference fails if the spacing varies by more
/// than 1% — unless the gap is an integer multiple of the base step and
/// `fill_gaps` is set, in which case missing rows are linearly interpolated
/// and recorded in [`ImbalanceSeries::filled_gaps`].
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<ImbalanceSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;

    let headers = reader.headers()?.clone();
    let col_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };

    let imb_idx = col_index(&schema.imbalance_col)?;
    let gen_idx = match &schema.generation_col {
        Some(col) => Some(col_index(col)?),
        None => None,
    };
    if gen_idx.is_none() && schema.constant_generation.is_none() {
        return Err(Error::InvalidParameter(
            "schema needs a generation column or a constant generation".into(),
        ));
    }
    let time_idx = match &schema.time_col {
        Some(col) => Some(col_index(col)?),
        None => None,
    };
    if time_idx.is_none() && schema.step_hours.is_none() {
        return Err(Error::InvalidParameter(
            "schema needs a time column or an explicit step".into(),
        ));
    }

    let mut imbalance = Vec::new();
    let mut generation = Vec::new();
    let mut times = Vec::new();
    let mut start_time = None;

    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let cell = |idx: usize, column: &str| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("");
            raw.parse::<f64>().map_err(|_| Error::BadCell {
                column: column.to_string(),
                value: raw.to_string(),
                row,
            })
        };
        let mut d = cell(imb_idx, &schema.imbalance_col)?;
        if schema.negate_imbalance {
            d = -d;
        }
        let g = match gen_idx {
            Some(idx) => cell(idx, schema.generation_col.as_deref().unwrap_or(""))?,
            None => schema.constant_generation.unwrap(),
        };
        if g < 0.0 {
            return Err(Error::NegativeGeneration {
                index: row,
                value: g,
            });
        }
        if let Some(idx) = time_idx {
            let raw = record.get(idx).unwrap_or("");
            let t = parse_time(raw).ok_or_else(|| Error::BadCell {
                column: schema.time_col.clone().unwrap_or_default(),
                value: raw.to_string(),
                row,
            })?;
            if start_time.is_none() {
                start_time = Some(raw.to_string());
            }
            times.push(t);
        }
        imbalance.push(d);
        generation.push(g);
    }

    if imbalance.is_empty() {
        return Err(Error::EmptySeries);
    }

    let mut filled = Vec::new();
    let step_hours = match schema.step_hours {
        Some(h) => h,
        None => infer_step(&times, schema.fill_gaps, &mut imbalance, &mut generation, &mut filled)?,
    };

    ImbalanceSeries::with_metadata(imbalance, generation, step_hours, start_time, filled)
}

/// Infers the step from timestamps, optionally filling integer-multiple gaps.
fn infer_step(
    stamps: &[TimeStamp],
    fill_gaps: bool,
    imbalance: &mut Vec<f64>,
    generation: &mut Vec<f64>,
    filled: &mut Vec<usize>,
) -> Result<f64> {
    if stamps.len() < 2 {
        return Err(Error::InvalidParameter(
            "cannot infer step from fewer than two timestamps".into(),
        ));
    }
    let times: Vec<f64> = stamps.iter().map(|t| t.raw()).collect();
    for (i, pair) in times.windows(2).enumerate() {
        if pair[1] <= pair[0] {
            return Err(Error::NonMonotoneTimestamps { row: i + 1 });
        }
    }
    // gaps are integer multiples of the base step, so the smallest spacing
    // is the base
    let base = times
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);

    let mut out_imb = Vec::with_capacity(imbalance.len());
    let mut out_gen = Vec::with_capacity(generation.len());
    out_imb.push(imbalance[0]);
    out_gen.push(generation[0]);
    let unit = stamps[0];
    for i in 1..times.len() {
        let gap = times[i] - times[i - 1];
        let ratio = gap / base;
        let k = ratio.round();
        if (ratio - k).abs() > SPACING_TOL || k < 1.0 {
            return Err(Error::IrregularSpacing {
                row: i,
                expected_hours: unit.to_hours_spacing(base),
                got_hours: unit.to_hours_spacing(gap),
            });
        }
        let k = k as usize;
        if k > 1 {
            if !fill_gaps {
                return Err(Error::IrregularSpacing {
                    row: i,
                    expected_hours: unit.to_hours_spacing(base),
                    got_hours: unit.to_hours_spacing(gap),
                });
            }
            for j in 1..k {
                let w = j as f64 / k as f64;
                filled.push(out_imb.len());
                out_imb.push(imbalance[i - 1] * (1.0 - w) + imbalance[i] * w);
                out_gen.push(generation[i - 1] * (1.0 - w) + generation[i] * w);
            }
        }
        out_imb.push(imbalance[i]);
        out_gen.push(generation[i]);
    }
    *imbalance = out_imb;
    *generation = out_gen;
    Ok(unit.to_hours_spacing(base))
}

/// Writes a series as `t_hours,delta,pg` with round-trippable precision.
///
/// Floats are written in shortest round-trip form, so
/// `load_csv(write_csv(s))` reproduces the series bit-exactly.
pub fn write_csv(series: &ImbalanceSeries, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(["t_hours", "delta", "pg"])?;
    for i in 0..series.len() {
        let t = i as f64 * series.step_hours();
        writer.write_record([
            format!("{t}"),
            format!("{}", series.imbalance()[i]),
            format!("{}", series.generation()[i]),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Schema used by the [`write_csv`] round trip.
pub fn roundtrip_schema(step_hours: f64) -> CsvSchema {
    CsvSchema::new("delta")
        .with_generation_col("pg")
        .with_time_col("t_hours")
        .with_step_hours(step_hours)
}

/// Averages the series into bins of `new_step_hours`.
///
/// The new step must be an integer multiple of the current one; a trailing
/// partial bin is dropped.
pub fn resample(series: &ImbalanceSeries, new_step_hours: f64) -> Result<ImbalanceSeries> {
    let ratio = new_step_hours / series.step_hours();
    let k = ratio.round();
    if !(new_step_hours > 0.0) || (ratio - k).abs() > 1e-9 || k < 1.0 {
        return Err(Error::NonIntegerRatio {
            old_hours: series.step_hours(),
            new_hours: new_step_hours,
        });
    }
    let k = k as usize;
    if k == 1 {
        return Ok(series.clone());
    }
    let bins = series.len() / k;
    if bins == 0 {
        return Err(Error::EmptySeries);
    }
    let mean_of = |data: &[f64], bin: usize| -> f64 {
        data[bin * k..(bin + 1) * k].iter().sum::<f64>() / k as f64
    };
    let imbalance: Vec<f64> = (0..bins).map(|b| mean_of(series.imbalance(), b)).collect();
    let generation: Vec<f64> = (0..bins).map(|b| mean_of(series.generation(), b)).collect();
    ImbalanceSeries::with_metadata(
        imbalance,
        generation,
        new_step_hours,
        series.start_time.clone(),
        Vec::new(),
    )
}

/// Mean-reverting noise parameters for the synthetic imbalance channel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImbalanceModel {
    /// Long-run mean (MW).
    pub mean: f64,
    /// Mean-reversion rate (1/h).
    pub reversion_rate: f64,
    /// Instantaneous volatility (MW/sqrt(h)); zero yields the constant mean.
    pub volatility: f64,
}

/// Scheduled-generation profile for synthesis.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationModel {
    Constant(f64),
    Sinusoidal {
        mean: f64,
        amplitude: f64,
        period_hours: f64,
    },
}

/// One-off generation-loss style event injected into the imbalance channel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub index: usize,
    pub magnitude: f64,
    /// Number of consecutive samples affected (default 1).
    #[serde(default = "default_spike_width")]
    pub width: usize,
}

fn default_spike_width() -> usize {
    1
}

/// Full synthesis model. Deserializes from the scenario/CLI JSON object.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthModel {
    pub step_hours: f64,
    pub imbalance: ImbalanceModel,
    pub generation: GenerationModel,
    #[serde(default)]
    pub spike: Option<SpikeEvent>,
}

/// Generates a deterministic synthetic series: an Ornstein-Uhlenbeck-style
/// imbalance around a constant or sinusoidal generation profile, with an
/// optional spike event. Pure in `(n, model, seed)`.
pub fn synth(n: usize, model: &SynthModel, seed: u64) -> Result<ImbalanceSeries> {
    if n == 0 {
        return Err(Error::EmptySeries);
    }
    if model.imbalance.volatility < 0.0 {
        return Err(Error::InvalidParameter(
            "volatility must be nonnegative".into(),
        ));
    }
    if model.imbalance.reversion_rate < 0.0 {
        return Err(Error::InvalidParameter(
            "reversion rate must be nonnegative".into(),
        ));
    }
    match model.generation {
        GenerationModel::Constant(pg) if pg <= 0.0 => {
            return Err(Error::InvalidParameter(
                "constant generation must be positive".into(),
            ));
        }
        GenerationModel::Sinusoidal {
            mean, amplitude, ..
        } if mean - amplitude.abs() < 0.0 => {
            return Err(Error::InvalidParameter(
                "sinusoidal generation dips below zero".into(),
            ));
        }
        _ => {}
    }

    let h = model.step_hours;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut imbalance = Vec::with_capacity(n);
    let mut x = model.imbalance.mean;
    let decay = (-model.imbalance.reversion_rate * h).exp();
    // Stationary per-step noise scale for the discretized OU process.
    let noise = if model.imbalance.reversion_rate > 0.0 {
        model.imbalance.volatility
            * ((1.0 - decay * decay) / (2.0 * model.imbalance.reversion_rate)).sqrt()
    } else {
        model.imbalance.volatility * h.sqrt()
    };
    for _ in 0..n {
        imbalance.push(x);
        let xi: f64 = normal.sample(&mut rng);
        x = model.imbalance.mean + (x - model.imbalance.mean) * decay + noise * xi;
    }

    if let Some(spike) = &model.spike {
        if spike.index >= n {
            return Err(Error::InvalidParameter(format!(
                "spike index {} outside series of length {n}",
                spike.index
            )));
        }
        let end = (spike.index + spike.width.max(1)).min(n);
        for v in &mut imbalance[spike.index..end] {
            *v += spike.magnitude;
        }
    }

    let generation: Vec<f64> = (0..n)
        .map(|i| match model.generation {
            GenerationModel::Constant(pg) => pg,
            GenerationModel::Sinusoidal {
                mean,
                amplitude,
                period_hours,
            } => mean + amplitude * (2.0 * std::f64::consts::PI * i as f64 * h / period_hours).sin(),
        })
        .collect();

    ImbalanceSeries::new(imbalance, generation, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn basic_model() -> SynthModel {
        SynthModel {
            step_hours: 1.0,
            imbalance: ImbalanceModel {
                mean: 0.0,
                reversion_rate: 1.0,
                volatility: 50.0,
            },
            generation: GenerationModel::Constant(1000.0),
            spike: None,
        }
    }

    #[test]
    fn load_three_row_file() {
        let f = write_temp(
            "time,delta,pg\n\
             2019-01-01 00:00:00,10,1000\n\
             2019-01-01 00:05:00,-5,1000\n\
             2019-01-01 00:10:00,0,1000\n",
        );
        let schema = CsvSchema::new("delta")
            .with_generation_col("pg")
            .with_time_col("time");
        let s = load_csv(f.path(), &schema).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.imbalance(), &[10.0, -5.0, 0.0]);
        assert!((s.step_hours() - 1.0 / 12.0).abs() < 1e-12);
        assert_eq!(s.start_time(), Some("2019-01-01 00:00:00"));
    }

    #[test]
    fn constant_generation_column() {
        let f = write_temp("t,delta\n0.0,1\n0.25,2\n");
        let schema = CsvSchema::new("delta")
            .with_constant_generation(500.0)
            .with_time_col("t");
        let s = load_csv(f.path(), &schema).unwrap();
        assert_eq!(s.generation(), &[500.0, 500.0]);
        assert!((s.step_hours() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn gap_without_fill_is_an_error() {
        let f = write_temp(
            "time,delta,pg\n\
             2019-01-01 00:00:00,1,100\n\
             2019-01-01 00:05:00,2,100\n\
             2019-01-01 00:15:00,3,100\n\
             2019-01-01 00:20:00,4,100\n",
        );
        let schema = CsvSchema::new("delta")
            .with_generation_col("pg")
            .with_time_col("time");
        match load_csv(f.path(), &schema) {
            Err(Error::IrregularSpacing { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected irregular spacing, got {other:?}"),
        }
    }

    #[test]
    fn gap_fill_interpolates_and_records_provenance() {
        let f = write_temp(
            "time,delta,pg\n\
             2019-01-01 00:00:00,1,100\n\
             2019-01-01 00:05:00,2,100\n\
             2019-01-01 00:15:00,4,100\n",
        );
        let schema = CsvSchema::new("delta")
            .with_generation_col("pg")
            .with_time_col("time")
            .with_fill_gaps(true);
        let s = load_csv(f.path(), &schema).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.imbalance(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.filled_gaps(), &[2]);
    }

    #[test]
    fn non_monotone_timestamps_rejected() {
        let f = write_temp("t,delta,pg\n1.0,1,100\n0.5,2,100\n");
        let schema = CsvSchema::new("delta")
            .with_generation_col("pg")
            .with_time_col("t");
        assert!(matches!(
            load_csv(f.path(), &schema),
            Err(Error::NonMonotoneTimestamps { row: 1 })
        ));
    }

    #[test]
    fn negative_generation_rejected() {
        let f = write_temp("t,delta,pg\n0.0,1,-5\n1.0,2,100\n");
        let schema = CsvSchema::new("delta")
            .with_generation_col("pg")
            .with_time_col("t");
        assert!(matches!(
            load_csv(f.path(), &schema),
            Err(Error::NegativeGeneration { index: 0, .. })
        ));
    }

    #[test]
    fn missing_column_rejected() {
        let f = write_temp("t,delta\n0.0,1\n1.0,2\n");
        let schema = CsvSchema::new("delta")
            .with_generation_col("pg")
            .with_time_col("t");
        assert!(matches!(
            load_csv(f.path(), &schema),
            Err(Error::MissingColumn(c)) if c == "pg"
        ));
    }

    #[test]
    fn bpa_style_six_days_at_five_minutes() {
        // 6 days at 5-minute sampling.
        let n = 6 * 24 * 12;
        assert_eq!(n, 1728);
        let s = synth(n, &basic_model(), 1).unwrap();
        assert_eq!(s.len(), 1728);
    }

    #[test]
    fn resample_means_pairs() {
        let s = ImbalanceSeries::new(vec![2.0, 4.0, 6.0, 8.0], vec![1.0; 4], 1.0).unwrap();
        let r = resample(&s, 2.0).unwrap();
        assert_eq!(r.imbalance(), &[3.0, 7.0]);
        assert_eq!(r.step_hours(), 2.0);
    }

    #[test]
    fn resample_drops_trailing_partial_bin() {
        let s = ImbalanceSeries::new(vec![2.0, 4.0, 6.0, 8.0], vec![1.0; 4], 1.0).unwrap();
        let r = resample(&s, 3.0).unwrap();
        assert_eq!(r.imbalance(), &[4.0]);
    }

    #[test]
    fn resample_identity() {
        let s = ImbalanceSeries::new(vec![1.0, 2.0, 3.0], vec![5.0; 3], 0.5).unwrap();
        let r = resample(&s, 0.5).unwrap();
        assert_eq!(&r, &s);
    }

    #[test]
    fn resample_rejects_non_integer_ratio() {
        let s = ImbalanceSeries::new(vec![1.0, 2.0], vec![1.0; 2], 1.0).unwrap();
        assert!(matches!(
            resample(&s, 1.5),
            Err(Error::NonIntegerRatio { .. })
        ));
    }

    #[test]
    fn synth_zero_volatility_zero_mean_is_identically_zero() {
        let mut model = basic_model();
        model.imbalance.volatility = 0.0;
        let s = synth(100, &model, 42).unwrap();
        assert!(s.imbalance().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn synth_is_deterministic_in_seed() {
        let model = basic_model();
        let a = synth(500, &model, 7).unwrap();
        let b = synth(500, &model, 7).unwrap();
        assert_eq!(a, b);
        let c = synth(500, &model, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn spike_shifts_exactly_one_sample() {
        let mut with_spike = basic_model();
        with_spike.spike = Some(SpikeEvent {
            index: 253,
            magnitude: -2000.0,
            width: 1,
        });
        let n = 44_640;
        let base = synth(n, &basic_model(), 3).unwrap();
        let spiked = synth(n, &with_spike, 3).unwrap();
        for i in 0..n {
            let diff = spiked.imbalance()[i] - base.imbalance()[i];
            if i == 253 {
                assert_eq!(diff, -2000.0);
            } else {
                assert_eq!(diff, 0.0);
            }
        }
    }

    #[test]
    fn synth_rejects_negative_volatility_and_generation() {
        let mut m = basic_model();
        m.imbalance.volatility = -1.0;
        assert!(synth(10, &m, 0).is_err());
        let mut m = basic_model();
        m.generation = GenerationModel::Constant(0.0);
        assert!(synth(10, &m, 0).is_err());
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let s = synth(64, &basic_model(), 11).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_csv(&s, f.path()).unwrap();
        let schema = roundtrip_schema(s.step_hours());
        let back = load_csv(f.path(), &schema).unwrap();
        assert_eq!(back.imbalance(), s.imbalance());
        assert_eq!(back.generation(), s.generation());
        assert_eq!(back.step_hours(), s.step_hours());
    }

    #[test]
    fn resample_composes() {
        let s = synth(101, &basic_model(), 5).unwrap();
        let two_stage = resample(&resample(&s, 2.0).unwrap(), 6.0).unwrap();
        let one_stage = resample(&s, 6.0).unwrap();
        assert_eq!(two_stage.len(), one_stage.len());
        for (a, b) in two_stage.imbalance().iter().zip(one_stage.imbalance()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
