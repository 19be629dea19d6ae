//! Edge agents: sliding-window feature extraction and chunk publishing.

use std::collections::VecDeque;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::bus::{Bus, BusError, StreamId, Topic};

#[derive(Debug, thiserror::Error)]
pub enum EdgeError {
    #[error("window has {0} rows, need at least 2")]
    WindowTooShort(usize),
    #[error("ragged window: row {row} has {got} channels, expected {expected}")]
    Ragged { row: usize, got: usize, expected: usize },
    #[error("tick mismatch: {0} vs {1}")]
    TickMismatch(u64, u64),
    #[error(transparent)]
    Bus(#[from] BusError),
}

pub const DEFAULT_WINDOW: usize = 100;
pub const DEFAULT_BANDS: usize = 4;

/// W x d block of raw samples ending at `end_tick`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorWindow {
    pub values: Vec<Vec<f64>>,
    pub end_tick: u64,
}

impl SensorWindow {
    pub fn new(values: Vec<Vec<f64>>, end_tick: u64) -> Result<Self, EdgeError> {
        if values.len() < 2 {
            return Err(EdgeError::WindowTooShort(values.len()));
        }
        let d = values[0].len();
        if let Some((row, r)) = values.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(EdgeError::Ragged { row, got: r.len(), expected: d });
        }
        Ok(Self { values, end_tick })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    fn channel(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[j]).collect()
    }
}

/// Per-channel features of one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub end_tick: u64,
    pub rms: Vec<f64>,
    pub kurtosis: Vec<f64>,
    pub skewness: Vec<f64>,
    /// Least-squares slope per tick.
    pub trend: Vec<f64>,
    /// `bands` energies per channel, channel-major.
    pub spectral: Vec<Vec<f64>>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureVector {
    /// Flat layout: per channel `[rms, kurt, skew, trend, band_1..band_k,
    /// min, max, mean, std]`.
    pub fn to_features(&self) -> Features {
        let mut values = Vec::with_capacity(self.rms.len() * (8 + self.bands()));
        for c in 0..self.rms.len() {
            values.extend([self.rms[c], self.kurtosis[c], self.skewness[c], self.trend[c]]);
            values.extend_from_slice(&self.spectral[c]);
            values.extend([self.min[c], self.max[c], self.mean[c], self.std[c]]);
        }
        Features { end_tick: self.end_tick, values }
    }

    pub fn bands(&self) -> usize {
        self.spectral.first().map_or(0, Vec::len)
    }

    /// Ordered names matching [`FeatureVector::to_features`].
    pub fn schema(prefix: &str, channels: usize, bands: usize) -> Vec<String> {
        let mut names = Vec::new();
        for c in 0..channels {
            for stat in ["rms", "kurt", "skew", "trend"] {
                names.push(format!("{prefix}.c{c}.{stat}"));
            }
            for b in 0..bands {
                names.push(format!("{prefix}.c{c}.band{b}"));
            }
            for stat in ["min", "max", "mean", "std"] {
                names.push(format!("{prefix}.c{c}.{stat}"));
            }
        }
        names
    }
}

/// Flattened feature record published on `chunk/stream{j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub end_tick: u64,
    pub values: Vec<f64>,
}

impl Features {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Stateless window feature extractor with a cached FFT plan.
#[derive(Clone)]
pub struct Extractor {
    bands: usize,
    fft: Option<(usize, Arc<dyn Fft<f64>>)>,
}

impl std::fmt::Debug for Extractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Extractor").field("bands", &self.bands).finish()
    }
}

impl Default for Extractor {
    fn default() -> Self {
        Self::new(DEFAULT_BANDS)
    }
}

impl Extractor {
    pub fn new(bands: usize) -> Self {
        Self { bands: bands.max(1), fft: None }
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    fn plan(&mut self, n: usize) -> Arc<dyn Fft<f64>> {
        match &self.fft {
            Some((len, fft)) if *len == n => Arc::clone(fft),
            _ => {
                let fft = FftPlanner::new().plan_fft_forward(n);
                self.fft = Some((n, Arc::clone(&fft)));
                fft
            }
        }
    }

    pub fn extract(&mut self, window: &SensorWindow) -> Result<FeatureVector, EdgeError> {
        let w = window.len();
        if w < 2 {
            return Err(EdgeError::WindowTooShort(w));
        }
        let d = window.channels();
        let fft = self.plan(w);
        let mut fv = FeatureVector {
            end_tick: window.end_tick,
            rms: Vec::with_capacity(d),
            kurtosis: Vec::with_capacity(d),
            skewness: Vec::with_capacity(d),
            trend: Vec::with_capacity(d),
            spectral: Vec::with_capacity(d),
            min: Vec::with_capacity(d),
            max: Vec::with_capacity(d),
            mean: Vec::with_capacity(d),
            std: Vec::with_capacity(d),
        };
        for c in 0..d {
            let x = window.channel(c);
            let m = moments(&x);
            fv.rms.push(m.rms);
            fv.kurtosis.push(m.kurtosis);
            fv.skewness.push(m.skewness);
            fv.trend.push(ols_slope(&x));
            fv.spectral.push(band_energies(&*fft, &x, self.bands));
            fv.min.push(m.min);
            fv.max.push(m.max);
            fv.mean.push(m.mean);
            fv.std.push(m.std);
        }
        Ok(fv)
    }
}

struct Moments {
    mean: f64,
    std: f64,
    rms: f64,
    skewness: f64,
    kurtosis: f64,
    min: f64,
    max: f64,
}

fn moments(x: &[f64]) -> Moments {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    // zero-variance windows report 0 for the shape statistics
    let degenerate = m2 <= f64::EPSILON * mean.abs().max(1.0).powi(2);
    Moments {
        mean,
        std: m2.sqrt(),
        rms: (x.iter().map(|v| v * v).sum::<f64>() / n).sqrt(),
        skewness: if degenerate { 0.0 } else { m3 / m2.powf(1.5) },
        kurtosis: if degenerate { 0.0 } else { m4 / (m2 * m2) - 3.0 },
        min: x.iter().copied().fold(f64::INFINITY, f64::min),
        max: x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// OLS slope of `x` against tick index 0..n.
pub fn ols_slope(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let t_mean = (n - 1.0) / 2.0;
    let x_mean = x.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        let dt = i as f64 - t_mean;
        num += dt * (v - x_mean);
        den += dt * dt;
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// One-sided |X_k|^2 / W for k in 0..=W/2, pooled into `bands` contiguous
/// groups of bins. Band 0 holds the DC bin.
fn band_energies(fft: &dyn Fft<f64>, x: &[f64], bands: usize) -> Vec<f64> {
    let w = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.process(&mut buf);
    let n_bins = w / 2 + 1;
    let mut out = vec![0.0; bands];
    for (k, c) in buf.iter().take(n_bins).enumerate() {
        out[band_of(k, n_bins, bands)] += c.norm_sqr() / w as f64;
    }
    out
}

/// Band index of DFT bin `k` when `n_bins` bins are split into `bands`.
pub fn band_of(k: usize, n_bins: usize, bands: usize) -> usize {
    (k * bands / n_bins).min(bands - 1)
}

/// Concatenates stream-1 and stream-2 features for one tick. An empty
/// side is the identity.
pub fn aggregate(z1: &Features, z2: &Features) -> Result<Features, EdgeError> {
    if z2.is_empty() {
        return Ok(z1.clone());
    }
    if z1.is_empty() {
        return Ok(z2.clone());
    }
    if z1.end_tick != z2.end_tick {
        return Err(EdgeError::TickMismatch(z1.end_tick, z2.end_tick));
    }
    let mut values = Vec::with_capacity(z1.len() + z2.len());
    values.extend_from_slice(&z1.values);
    values.extend_from_slice(&z2.values);
    Ok(Features { end_tick: z1.end_tick, values })
}

/// How an edge agent turns raw input into features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeMode {
    /// Sliding windows over a time series.
    Windowed { window: usize, hop: usize },
    /// Per-cycle tabular rows: each row is forwarded unchanged (W = 1 bypass).
    Tabular,
}

/// Agent A1/A2: buffers samples from one sensor stream and publishes a
/// feature record per hop once the window is full.
#[derive(Debug)]
pub struct EdgeAgent {
    stream: StreamId,
    mode: EdgeMode,
    extractor: Extractor,
    buffer: VecDeque<Vec<f64>>,
    since_emit: usize,
    emitted: usize,
}

impl EdgeAgent {
    pub fn new(stream: StreamId, mode: EdgeMode, bands: usize) -> Self {
        let mode = match mode {
            EdgeMode::Windowed { window, hop } => {
                EdgeMode::Windowed { window: window.max(2), hop: if hop == 0 { window.max(2) } else { hop } }
            }
            m => m,
        };
        Self { stream, mode, extractor: Extractor::new(bands), buffer: VecDeque::new(), since_emit: 0, emitted: 0 }
    }

    pub fn stream(&self) -> StreamId {
        self.stream
    }

    pub fn emitted(&self) -> usize {
        self.emitted
    }

    /// Retunes the window (local feedback hook). Clears the buffer.
    pub fn reconfigure(&mut self, mode: EdgeMode) {
        *self = Self::new(self.stream, mode, self.extractor.bands());
    }

    /// Feeds one sample; returns a feature record when one is due.
    pub fn push(&mut self, sample: Vec<f64>, tick: u64) -> Result<Option<Features>, EdgeError> {
        match self.mode {
            EdgeMode::Tabular => {
                self.emitted += 1;
                Ok(Some(Features { end_tick: tick, values: sample }))
            }
            EdgeMode::Windowed { window, hop } => {
                self.buffer.push_back(sample);
                if self.buffer.len() > window {
                    self.buffer.pop_front();
                }
                self.since_emit += 1;
                let first = self.emitted == 0 && self.buffer.len() == window;
                let due = self.emitted > 0 && self.since_emit >= hop;
                if !(first || due) {
                    return Ok(None);
                }
                self.since_emit = 0;
                let win = SensorWindow::new(self.buffer.iter().cloned().collect(), tick)?;
                let fv = self.extractor.extract(&win)?;
                self.emitted += 1;
                Ok(Some(fv.to_features()))
            }
        }
    }

    /// Feeds `samples` (tick = index) and publishes each due record to
    /// `chunk/stream{j}`. Returns the number published.
    pub fn run<I>(&mut self, samples: I, bus: &Bus) -> Result<usize, EdgeError>
    where
        I: IntoIterator<Item = Vec<f64>>,
    {
        let mut published = 0;
        for (tick, s) in samples.into_iter().enumerate() {
            if let Some(f) = self.push(s, tick as u64)? {
                bus.publish_topic(Topic::Chunk(self.stream), &f)?;
                published += 1;
            }
        }
        Ok(published)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn column(x: &[f64]) -> SensorWindow {
        SensorWindow::new(x.iter().map(|&v| vec![v]).collect(), 0).unwrap()
    }

    #[test]
    fn constant_window() {
        let fv = Extractor::default().extract(&column(&[5.0; 100])).unwrap();
        assert_abs_diff_eq!(fv.rms[0], 5.0, epsilon = 1e-12);
        assert_eq!(fv.trend[0], 0.0);
        assert_eq!((fv.kurtosis[0], fv.skewness[0]), (0.0, 0.0));
        assert!(fv.spectral[0][1..].iter().all(|&e| e.abs() < 1e-18));
        assert!(fv.spectral[0][0] > 0.0);
    }

    #[test]
    fn ramp_slope_is_one() {
        let x: Vec<f64> = (0..100).map(|t| t as f64).collect();
        let fv = Extractor::default().extract(&column(&x)).unwrap();
        assert_abs_diff_eq!(fv.trend[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn too_short() {
        assert!(matches!(SensorWindow::new(vec![vec![1.0]], 0), Err(EdgeError::WindowTooShort(1))));
    }

    #[test]
    fn flat_layout_matches_schema() {
        let win = SensorWindow::new((0..16).map(|i| vec![i as f64, 1.0, (i % 3) as f64]).collect(), 15).unwrap();
        let f = Extractor::new(4).extract(&win).unwrap().to_features();
        assert_eq!(f.len(), FeatureVector::schema("a1", 3, 4).len());
        assert!(f.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn window_and_hop_counts() {
        let bus = Bus::default();
        let sub = bus.subscribe("chunk/stream1").unwrap();
        let data = |n: usize| (0..n).map(|i| vec![(i as f64).sin()]).collect::<Vec<_>>();

        let mut a = EdgeAgent::new(StreamId::One, EdgeMode::Windowed { window: 100, hop: 100 }, 4);
        assert_eq!(a.run(data(100), &bus).unwrap(), 1);
        let mut a = EdgeAgent::new(StreamId::One, EdgeMode::Windowed { window: 100, hop: 50 }, 4);
        assert_eq!(a.run(data(250), &bus).unwrap(), 4);
        let mut a = EdgeAgent::new(StreamId::One, EdgeMode::Windowed { window: 100, hop: 0 }, 4);
        assert_eq!(a.run(data(99), &bus).unwrap(), 0);

        let ticks: Vec<u64> = sub.drain().iter().map(|e| e.decode::<Features>().unwrap().end_tick).collect();
        assert_eq!(ticks, vec![99, 99, 149, 199, 249]);
    }

    #[test]
    fn aggregate_cases() {
        let z1 = Features { end_tick: 3, values: vec![1.0; 9] };
        let z2 = Features { end_tick: 3, values: vec![2.0; 9] };
        let z = aggregate(&z1, &z2).unwrap();
        assert_eq!(z.len(), 18);
        assert_eq!(z.values[8], 1.0);
        assert_eq!(z.values[9], 2.0);
        let empty = Features { end_tick: 99, values: vec![] };
        assert_eq!(aggregate(&z1, &empty).unwrap(), z1);
        let late = Features { end_tick: 4, values: vec![0.0] };
        assert!(matches!(aggregate(&z1, &late), Err(EdgeError::TickMismatch(3, 4))));
    }

    #[test]
    fn tabular_passthrough() {
        let mut a = EdgeAgent::new(StreamId::Two, EdgeMode::Tabular, 4);
        let f = a.push(vec![0.5, -1.0], 12).unwrap().unwrap();
        assert_eq!(f, Features { end_tick: 12, values: vec![0.5, -1.0] });
    }
}
