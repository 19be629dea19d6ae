//! Synthetic datasets shaped like the boiler and wind-turbine profiles,
//! CSV ingestion, standardization and stratified splitting.
//!
//! Samples form a time-ordered stream. Normal rows come from a correlated
//! Gaussian (a few latent factors plus noise). Anomalies arrive in fault
//! episodes; inside an episode the severity ramps up, and each fault mode
//! applies its own mean shift, variance inflation and drift trend to a
//! subset of features.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("split needs both classes present")]
    SingleClass,
    #[error("assign_rul called on a normal sample")]
    CalledOnNormal,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("unreadable file: {0}")]
    UnreadableFile(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub const RUL_MIN_HOURS: f64 = 5.0;
pub const RUL_MAX_HOURS: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub name: String,
    pub n_samples: usize,
    pub n_features: usize,
    pub anomaly_prevalence: f64,
    pub train_fraction: f64,
    pub fault_modes: usize,
    pub seed: u64,
    /// Mean shift applied by a fault at full severity, in normal-data std units.
    #[serde(default = "default_fault_scale")]
    pub fault_scale: f64,
}

fn default_fault_scale() -> f64 {
    1.0
}

impl DatasetProfile {
    /// 10 000 cycles, 18 features, 36.8 % anomalies, 80/20 split.
    pub fn boiler(seed: u64) -> Self {
        Self {
            name: "boiler".into(),
            n_samples: 10_000,
            n_features: 18,
            anomaly_prevalence: 0.368,
            train_fraction: 0.8,
            fault_modes: 4,
            seed,
            fault_scale: 1.0,
        }
    }

    /// 500 samples, 42 features, 45 % faults, 80/20 split.
    pub fn wind(seed: u64) -> Self {
        Self {
            name: "wind".into(),
            n_samples: 500,
            n_features: 42,
            anomaly_prevalence: 0.45,
            train_fraction: 0.8,
            fault_modes: 5,
            seed,
            fault_scale: 1.6,
        }
    }

    pub fn by_name(name: &str, seed: u64) -> Option<Self> {
        match name {
            "boiler" => Some(Self::boiler(seed)),
            "wind" => Some(Self::wind(seed)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::InvalidProfile(m.to_string()));
        if self.n_features == 0 {
            return bad("zero features");
        }
        if self.n_samples < 2 {
            return bad("need at least two samples");
        }
        if !(self.anomaly_prevalence > 0.0 && self.anomaly_prevalence < 1.0) {
            return bad("prevalence must lie in (0, 1)");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train fraction must lie in (0, 1)");
        }
        if self.fault_modes == 0 {
            return bad("need at least one fault mode");
        }
        if !(self.fault_scale.is_finite() && self.fault_scale >= 0.0) {
            return bad("fault scale must be finite and non-negative");
        }
        Ok(())
    }

    pub fn anomaly_count(&self) -> usize {
        (self.anomaly_prevalence * self.n_samples as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: bool,
    /// Present iff `label`; always within [5, 100].
    pub rul_hours: Option<f64>,
    pub fault_mode: u8,
}

impl LabeledSample {
    /// Severity in [0, 1] recovered from the RUL label (0 for normal rows).
    pub fn severity(&self) -> f64 {
        self.rul_hours.map(|r| ((RUL_MAX_HOURS - r) / (RUL_MAX_HOURS - RUL_MIN_HOURS)).clamp(0.0, 1.0)).unwrap_or(0.0)
    }
}

/// Linear RUL map: 100 h at severity 0 down to 5 h at severity 1.
pub fn assign_rul(label: bool, _fault_mode: u8, severity: f64) -> Result<f64, DataError> {
    if !label {
        return Err(DataError::CalledOnNormal);
    }
    let s = severity.clamp(0.0, 1.0);
    Ok(RUL_MAX_HOURS - (RUL_MAX_HOURS - RUL_MIN_HOURS) * s)
}

struct FaultMode {
    features: Vec<usize>,
    direction: Vec<f64>,
    inflation: f64,
    trend: f64,
}

/// Generates a time-ordered labeled stream. Deterministic in `profile.seed`.
pub fn generate(profile: &DatasetProfile) -> Result<Vec<LabeledSample>, DataError> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let d = profile.n_features;
    let n = profile.n_samples;
    let n_anom = profile.anomaly_count();

    // correlated normal operation: x = mu + L f + e
    let n_factors = (d / 6).clamp(1, 4);
    let mu: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let scale: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..2.0)).collect();
    let loadings: Vec<Vec<f64>> =
        (0..d).map(|_| (0..n_factors).map(|_| rng.random_range(-0.8..0.8)).collect()).collect();
    let noise_sd = 0.6;
    // per-feature std of the normal regime, used to express shifts in std units
    let normal_sd: Vec<f64> = loadings
        .iter()
        .zip(&scale)
        .map(|(l, s)| s * (l.iter().map(|v| v * v).sum::<f64>() + noise_sd * noise_sd).sqrt())
        .collect();

    let modes: Vec<FaultMode> = (0..profile.fault_modes)
        .map(|_| {
            let k = (d / 3).max(1);
            let mut idx: Vec<usize> = (0..d).collect();
            idx.shuffle(&mut rng);
            idx.truncate(k);
            idx.sort_unstable();
            let direction = idx
                .iter()
                .map(|_| {
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    sign * rng.random_range(0.6..1.4)
                })
                .collect();
            FaultMode {
                features: idx,
                direction,
                inflation: rng.random_range(1.2..1.8),
                trend: rng.random_range(-0.4..0.4),
            }
        })
        .collect();

    // carve anomaly episodes, then scatter them among normal rows
    let mut episodes: Vec<usize> = Vec::new();
    let mut remaining = n_anom;
    while remaining > 0 {
        let len = rng.random_range(8..=40usize).min(remaining);
        episodes.push(len);
        remaining -= len;
    }
    let n_normal = n - n_anom;
    let mut cut_points: Vec<usize> = (0..episodes.len()).map(|_| rng.random_range(0..=n_normal)).collect();
    cut_points.sort_unstable();

    let mut out = Vec::with_capacity(n);
    let mut normal_emitted = 0;
    let draw_normal = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let f: Vec<f64> = (0..n_factors).map(|_| StandardNormal.sample(rng)).collect();
        (0..d)
            .map(|j| {
                let e: f64 = StandardNormal.sample(rng);
                let lf: f64 = loadings[j].iter().zip(&f).map(|(l, v)| l * v).sum();
                mu[j] + scale[j] * (lf + noise_sd * e)
            })
            .collect()
    };
    let mut emit_normals = |upto: usize, out: &mut Vec<LabeledSample>, rng: &mut ChaCha8Rng| {
        while normal_emitted < upto {
            out.push(LabeledSample { features: draw_normal(rng), label: false, rul_hours: None, fault_mode: 0 });
            normal_emitted += 1;
        }
    };
    let draw_anomaly = |rng: &mut ChaCha8Rng, mode: &FaultMode, severity: f64, step: f64| {
        let f: Vec<f64> = (0..n_factors).map(|_| StandardNormal.sample(rng)).collect();
        let mut x: Vec<f64> = (0..d)
            .map(|j| {
                let e: f64 = StandardNormal.sample(rng);
                let lf: f64 = loadings[j].iter().zip(&f).map(|(l, v)| l * v).sum();
                scale[j] * (lf + noise_sd * e)
            })
            .collect();
        let infl = 1.0 + (mode.inflation - 1.0) * severity;
        for (k, &j) in mode.features.iter().enumerate() {
            x[j] *= infl;
            let shift = profile.fault_scale * severity * mode.direction[k] + mode.trend * step;
            x[j] += shift * normal_sd[j];
        }
        for (j, v) in x.iter_mut().enumerate() {
            *v += mu[j];
        }
        x
    };

    for (ep, &len) in episodes.iter().enumerate() {
        emit_normals(cut_points[ep], &mut out, &mut rng);
        let m = rng.random_range(0..profile.fault_modes);
        let s0: f64 = rng.random_range(0.0..0.5);
        let s1: f64 = rng.random_range(0.6..1.0);
        for i in 0..len {
            let frac = if len > 1 { i as f64 / (len - 1) as f64 } else { 1.0 };
            let severity = s0 + (s1 - s0) * frac;
            let features = draw_anomaly(&mut rng, &modes[m], severity, frac);
            out.push(LabeledSample {
                features,
                label: true,
                rul_hours: Some(assign_rul(true, m as u8, severity)?),
                fault_mode: m as u8 + 1,
            });
        }
    }
    emit_normals(n_normal, &mut out, &mut rng);
    debug_assert_eq!(out.len(), n);
    Ok(out)
}

/// Adds a sensor-drift style shift to samples from `start` onward: every
/// `stride`-th feature is offset by `magnitude` (in units of that feature's
/// own standard deviation over the slice).
pub fn inject_shift(samples: &mut [LabeledSample], start: usize, magnitude: f64, stride: usize) {
    if samples.is_empty() || start >= samples.len() {
        return;
    }
    let d = samples[0].features.len();
    let stride = stride.max(1);
    let sd: Vec<f64> = (0..d)
        .map(|j| {
            let n = samples.len() as f64;
            let m = samples.iter().map(|s| s.features[j]).sum::<f64>() / n;
            (samples.iter().map(|s| (s.features[j] - m).powi(2)).sum::<f64>() / n).sqrt()
        })
        .collect();
    for s in &mut samples[start..] {
        for j in (0..d).step_by(stride) {
            s.features[j] += magnitude * sd[j];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
    /// Indices into the input, ascending, so temporal order is preserved.
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Per-class random split; each side keeps the original sample order.
pub fn stratified_split(data: &[LabeledSample], train_fraction: f64, seed: u64) -> Result<Split, DataError> {
    let mut by_class: BTreeMap<bool, Vec<usize>> = BTreeMap::new();
    for (i, s) in data.iter().enumerate() {
        by_class.entry(s.label).or_default().push(i);
    }
    if by_class.len() < 2 {
        return Err(DataError::SingleClass);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SPLIT_SALT);
    let mut train_indices = Vec::new();
    let mut test_indices = Vec::new();
    for idx in by_class.values() {
        let mut shuffled = idx.clone();
        shuffled.shuffle(&mut rng);
        let k = (train_fraction * idx.len() as f64).round() as usize;
        train_indices.extend_from_slice(&shuffled[..k]);
        test_indices.extend_from_slice(&shuffled[k..]);
    }
    train_indices.sort_unstable();
    test_indices.sort_unstable();
    Ok(Split {
        train: train_indices.iter().map(|&i| data[i].clone()).collect(),
        test: test_indices.iter().map(|&i| data[i].clone()).collect(),
        train_indices,
        test_indices,
    })
}

const SPLIT_SALT: u64 = 0x5eed_5011;

/// Per-feature standardization fitted on one split and applied to others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population mean/std of `rows`. Constant features get divisor 1.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let std = (0..d)
            .map(|j| {
                let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn fit_samples(samples: &[LabeledSample]) -> Self {
        let rows: Vec<Vec<f64>> = samples.iter().map(|s| s.features.clone()).collect();
        Self::fit(&rows)
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(self.mean.iter().zip(&self.std)).map(|(x, (m, s))| (x - m) / s).collect()
    }

    pub fn transform(&self, samples: &[LabeledSample]) -> Vec<LabeledSample> {
        samples.iter().map(|s| LabeledSample { features: self.transform_row(&s.features), ..s.clone() }).collect()
    }
}

/// Column roles for [`ingest_csv`]. Columns not named here are features.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub label_column: String,
    /// Timestamp / summary columns removed before modelling.
    #[serde(default)]
    pub drop_columns: Vec<String>,
    #[serde(default)]
    pub rul_column: Option<String>,
    #[serde(default)]
    pub fault_mode_column: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowReject {
    /// 1-based data row number (header excluded).
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub samples: Vec<LabeledSample>,
    pub feature_names: Vec<String>,
    pub rejects: Vec<RowReject>,
    pub warnings: Vec<String>,
}

fn parse_label(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "anomaly" | "fault" => Some(true),
        "0" | "false" | "normal" => Some(false),
        other => other.parse::<f64>().ok().map(|v| v != 0.0),
    }
}

/// Reads a labeled CSV. Malformed rows are skipped and reported.
pub fn ingest_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<IngestReport, DataError> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| DataError::UnreadableFile(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let label_idx = find(&schema.label_column)
        .ok_or_else(|| DataError::SchemaMismatch(format!("label column `{}` not found", schema.label_column)))?;
    for c in &schema.drop_columns {
        if find(c).is_none() {
            return Err(DataError::SchemaMismatch(format!("drop column `{c}` not found")));
        }
    }
    let rul_idx = match &schema.rul_column {
        Some(c) => Some(find(c).ok_or_else(|| DataError::SchemaMismatch(format!("rul column `{c}` not found")))?),
        None => None,
    };
    let fault_idx = match &schema.fault_mode_column {
        Some(c) => {
            Some(find(c).ok_or_else(|| DataError::SchemaMismatch(format!("fault-mode column `{c}` not found")))?)
        }
        None => None,
    };
    let feature_idx: Vec<usize> = (0..headers.len())
        .filter(|&i| {
            i != label_idx && Some(i) != rul_idx && Some(i) != fault_idx && !schema.drop_columns.contains(&headers[i])
        })
        .collect();
    if feature_idx.is_empty() {
        return Err(DataError::SchemaMismatch("no feature columns left".into()));
    }

    let mut samples = Vec::new();
    let mut rejects = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let row = row_no + 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                rejects.push(RowReject { row, reason: e.to_string() });
                continue;
            }
        };
        if record.len() != headers.len() {
            rejects
                .push(RowReject { row, reason: format!("expected {} fields, found {}", headers.len(), record.len()) });
            continue;
        }
        let parsed: Result<Vec<f64>, String> = feature_idx
            .iter()
            .map(|&i| {
                record[i]
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| format!("column `{}`: non-numeric `{}`", headers[i], &record[i]))
            })
            .collect();
        let features = match parsed {
            Ok(f) => f,
            Err(reason) => {
                rejects.push(RowReject { row, reason });
                continue;
            }
        };
        let Some(label) = parse_label(&record[label_idx]) else {
            rejects.push(RowReject { row, reason: format!("unparseable label `{}`", &record[label_idx]) });
            continue;
        };
        let fault_mode = fault_idx.and_then(|i| record[i].trim().parse::<u8>().ok()).unwrap_or(u8::from(label));
        let rul_hours = if label {
            match rul_idx.map(|i| record[i].trim().parse::<f64>()) {
                Some(Ok(v)) if v.is_finite() => Some(v.clamp(RUL_MIN_HOURS, RUL_MAX_HOURS)),
                Some(_) => {
                    rejects.push(RowReject { row, reason: "unparseable rul".into() });
                    continue;
                }
                // no RUL column: fall back to the midpoint severity
                None => Some(assign_rul(true, fault_mode, 0.5)?),
            }
        } else {
            None
        };
        samples.push(LabeledSample { features, label, rul_hours, fault_mode });
    }

    let mut warnings = Vec::new();
    if samples.is_empty() {
        warnings.push("no data rows".to_string());
        log::warn!("{}: no usable data rows", path.display());
    }
    if !rejects.is_empty() {
        log::warn!("{}: rejected {} malformed rows", path.display(), rejects.len());
    }
    Ok(IngestReport {
        samples,
        feature_names: feature_idx.iter().map(|&i| headers[i].clone()).collect(),
        rejects,
        warnings,
    })
}

/// Sidecar manifest written next to a persisted dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub profile: DatasetProfile,
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    /// Fault injection is a synthetic stand-in for the real plant data.
    pub synthetic: bool,
    pub notes: String,
}

pub fn feature_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("f{i:02}")).collect()
}

/// Writes `samples` as CSV (features, label, rul_hours, fault_mode).
pub fn write_csv(samples: &[LabeledSample], names: &[String], path: impl AsRef<Path>) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = names.to_vec();
    header.extend(["label", "rul_hours", "fault_mode"].map(String::from));
    w.write_record(&header)?;
    for s in samples {
        let mut rec: Vec<String> = s.features.iter().map(|v| format!("{v}")).collect();
        rec.push(u8::from(s.label).to_string());
        rec.push(s.rul_hours.map(|r| format!("{r}")).unwrap_or_default());
        rec.push(s.fault_mode.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Schema matching the layout produced by [`write_csv`].
pub fn generated_schema() -> CsvSchema {
    CsvSchema {
        label_column: "label".into(),
        drop_columns: Vec::new(),
        rul_column: Some("rul_hours".into()),
        fault_mode_column: Some("fault_mode".into()),
    }
}

/// Persists a generated dataset as `<stem>.csv` plus `<stem>.manifest.json`.
pub fn persist_dataset(
    profile: &DatasetProfile,
    samples: &[LabeledSample],
    split: &Split,
    dir: impl AsRef<Path>,
    stem: &str,
) -> Result<DatasetManifest, DataError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let names = feature_names(profile.n_features);
    write_csv(samples, &names, dir.join(format!("{stem}.csv")))?;
    let manifest = DatasetManifest {
        profile: profile.clone(),
        seed: profile.seed,
        feature_names: names,
        train_indices: split.train_indices.clone(),
        test_indices: split.test_indices.clone(),
        synthetic: true,
        notes: "synthetic fault injection (mean shift, variance inflation, trend); \
                not derived from plant recordings"
            .into(),
    };
    let f = BufWriter::new(File::create(dir.join(format!("{stem}.manifest.json")))?);
    serde_json::to_writer_pretty(f, &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn small(prevalence: f64) -> DatasetProfile {
        DatasetProfile {
            name: "t".into(),
            n_samples: 400,
            n_features: 6,
            anomaly_prevalence: prevalence,
            train_fraction: 0.8,
            fault_modes: 2,
            seed: 7,
            fault_scale: 1.0,
        }
    }

    #[test]
    fn boiler_counts() {
        let data = generate(&DatasetProfile::boiler(42)).unwrap();
        assert_eq!(data.len(), 10_000);
        let anomalies = data.iter().filter(|s| s.label).count();
        assert!((anomalies as i64 - 3680).abs() <= 1, "{anomalies}");
        assert!(data.iter().all(|s| s.features.len() == 18));
    }

    #[test]
    fn invalid_profiles() {
        assert!(matches!(generate(&small(0.0)), Err(DataError::InvalidProfile(_))));
        assert!(matches!(generate(&small(1.0)), Err(DataError::InvalidProfile(_))));
        let mut p = small(0.3);
        p.n_features = 0;
        assert!(matches!(generate(&p), Err(DataError::InvalidProfile(_))));
    }

    #[test]
    fn generation_is_deterministic() {
        let p = small(0.3);
        assert_eq!(generate(&p).unwrap(), generate(&p).unwrap());
        let mut q = p.clone();
        q.seed += 1;
        assert_ne!(generate(&p).unwrap(), generate(&q).unwrap());
    }

    #[test]
    fn rul_present_iff_anomaly_and_in_range() {
        for s in generate(&small(0.4)).unwrap() {
            assert_eq!(s.rul_hours.is_some(), s.label);
            if let Some(r) = s.rul_hours {
                assert!((RUL_MIN_HOURS..=RUL_MAX_HOURS).contains(&r));
            }
        }
    }

    #[test]
    fn rul_map() {
        assert_eq!(assign_rul(true, 1, 1.0).unwrap(), 5.0);
        assert_eq!(assign_rul(true, 1, 0.0).unwrap(), 100.0);
        assert_eq!(assign_rul(true, 1, 0.5).unwrap(), 52.5);
        assert!(assign_rul(true, 1, 0.7).unwrap() < assign_rul(true, 1, 0.3).unwrap());
        assert!(matches!(assign_rul(false, 0, 0.5), Err(DataError::CalledOnNormal)));
    }

    #[test]
    fn split_sizes() {
        let data = generate(&DatasetProfile::boiler(42)).unwrap();
        let s = stratified_split(&data, 0.8, 42).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (8000, 2000));
        let wind = generate(&DatasetProfile::wind(42)).unwrap();
        let s = stratified_split(&wind, 0.8, 42).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (400, 100));
    }

    #[test]
    fn symmetric_split() {
        let data: Vec<LabeledSample> = (0..10)
            .map(|i| LabeledSample {
                features: vec![i as f64],
                label: i % 2 == 0,
                rul_hours: (i % 2 == 0).then_some(50.0),
                fault_mode: 0,
            })
            .collect();
        let s = stratified_split(&data, 0.8, 1).unwrap();
        assert_eq!(s.train.len(), 8);
        assert_eq!(s.train.iter().filter(|x| x.label).count(), 4);
        assert!(s.train_indices.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn split_single_class() {
        let data = vec![LabeledSample { features: vec![0.0], label: false, rul_hours: None, fault_mode: 0 }; 4];
        assert!(matches!(stratified_split(&data, 0.8, 1), Err(DataError::SingleClass)));
    }

    #[test]
    fn standardizer_train_stats() {
        let data = generate(&small(0.3)).unwrap();
        let split = stratified_split(&data, 0.8, 3).unwrap();
        let sc = Standardizer::fit_samples(&split.train);
        let t = sc.transform(&split.train);
        for j in 0..6 {
            let n = t.len() as f64;
            let m = t.iter().map(|s| s.features[j]).sum::<f64>() / n;
            let sd = (t.iter().map(|s| (s.features[j] - m).powi(2)).sum::<f64>() / n).sqrt();
            assert!(m.abs() < 1e-9);
            assert!((sd - 1.0).abs() < 1e-9);
        }
        // fit depends on the training split only
        let mut test_mod = split.test.clone();
        for s in &mut test_mod {
            s.features[0] += 100.0;
        }
        let _ = sc.transform(&test_mod);
        assert_eq!(Standardizer::fit_samples(&split.train), sc);
    }

    #[test]
    fn constant_feature_passes_through_centered() {
        let sc = Standardizer::fit(&[vec![3.0, 1.0], vec![3.0, 3.0]]);
        assert_eq!(sc.std[0], 1.0);
        assert_eq!(sc.transform_row(&[5.0, 2.0]), vec![2.0, 0.0]);
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn schema() -> CsvSchema {
        CsvSchema {
            label_column: "label".into(),
            drop_columns: vec!["timestamp".into()],
            rul_column: None,
            fault_mode_column: None,
        }
    }

    #[test]
    fn ingest_well_formed() {
        let f = write_tmp("timestamp,a,b,label\n1,0.1,0.2,0\n2,0.3,0.1,1\n3,0.2,0.2,0\n4,1.5,2.0,1\n5,0.0,0.1,0\n");
        let r = ingest_csv(f.path(), &schema()).unwrap();
        assert_eq!(r.samples.len(), 5);
        assert_eq!(r.feature_names, vec!["a", "b"]);
        assert!(r.rejects.is_empty());
        assert!(r.samples[1].rul_hours.is_some());
    }

    #[test]
    fn ingest_rejects_non_numeric() {
        let f = write_tmp("timestamp,a,b,label\n1,0.1,0.2,0\n2,oops,0.1,1\n3,0.2,0.2,0\n4,1.5,2.0,1\n5,0.0,0.1,0\n");
        let r = ingest_csv(f.path(), &schema()).unwrap();
        assert_eq!(r.samples.len(), 4);
        assert_eq!(r.rejects.len(), 1);
        assert_eq!(r.rejects[0].row, 2);
    }

    #[test]
    fn ingest_header_only() {
        let f = write_tmp("timestamp,a,b,label\n");
        let r = ingest_csv(f.path(), &schema()).unwrap();
        assert!(r.samples.is_empty());
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn ingest_schema_errors() {
        let f = write_tmp("a,b\n1,2\n");
        assert!(matches!(ingest_csv(f.path(), &schema()), Err(DataError::SchemaMismatch(_))));
        assert!(matches!(ingest_csv("/nonexistent/x.csv", &schema()), Err(DataError::UnreadableFile(_))));
    }

    #[test]
    fn persisted_dataset_reloads() {
        let p = small(0.3);
        let data = generate(&p).unwrap();
        let split = stratified_split(&data, 0.8, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let m = persist_dataset(&p, &data, &split, dir.path(), "small").unwrap();
        assert!(m.synthetic);
        let back = ingest_csv(dir.path().join("small.csv"), &generated_schema()).unwrap();
        assert_eq!(back.samples.len(), data.len());
        assert_eq!(back.samples[5].label, data[5].label);
        assert!((back.samples[5].features[2] - data[5].features[2]).abs() < 1e-12);
    }
}
