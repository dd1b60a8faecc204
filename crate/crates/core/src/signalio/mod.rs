//! Waveform ingestion: voltage reference, cycle alignment, windowing, event
//! segmentation, and the on-disk matrix formats.

mod format;

pub use format::{
    read_csv_matrix, read_signature_matrix, write_csv_matrix, write_signature_matrix,
    SIGMAT_HEADER_LEN, SIGMAT_MAGIC,
};

use std::f64::consts::PI;
use std::ops::Range;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

pub const DEFAULT_MAINS_HZ: f64 = 60.0;
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 30_000.0;
pub const DEFAULT_SAMPLES_PER_CYCLE: usize = 500;
pub const DEFAULT_WINDOW_LEN: usize = 30_000;
pub const DEFAULT_SEGMENT_THRESHOLD: f64 = 0.15;

/// A sampled signal in amperes or volts.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Validation("waveform has no samples".into()));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::Validation(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Validation(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// N one-second current signatures stored row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureMatrix {
    data: Array2<f64>,
    sample_rate_hz: f64,
    samples_per_cycle: usize,
}

impl SignatureMatrix {
    pub fn new(data: Array2<f64>, sample_rate_hz: f64, samples_per_cycle: usize) -> Result<Self> {
        let (rows, cols) = data.dim();
        if rows == 0 || cols == 0 {
            return Err(Error::Validation(format!(
                "signature matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if samples_per_cycle == 0 || cols % samples_per_cycle != 0 {
            return Err(Error::Validation(format!(
                "row length {cols} is not a multiple of samples_per_cycle {samples_per_cycle}"
            )));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::Validation(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("signature matrix has non-finite entries".into()));
        }
        Ok(Self {
            data,
            sample_rate_hz,
            samples_per_cycle,
        })
    }

    /// Builds a matrix without re-scanning entries. Callers guarantee finiteness.
    pub(crate) fn from_parts_unchecked(
        data: Array2<f64>,
        sample_rate_hz: f64,
        samples_per_cycle: usize,
    ) -> Self {
        debug_assert!(data.ncols() % samples_per_cycle == 0);
        Self {
            data,
            sample_rate_hz,
            samples_per_cycle,
        }
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn samples_per_cycle(&self) -> usize {
        self.samples_per_cycle
    }

    pub fn periods(&self) -> usize {
        self.cols() / self.samples_per_cycle
    }
}

/// Pure sinusoidal grid voltage starting at phase zero.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageReference {
    waveform: Waveform,
    mains_frequency_hz: f64,
    amplitude_v: f64,
    samples_per_cycle: usize,
}

impl VoltageReference {
    pub fn waveform(&self) -> &Waveform {
        &self.waveform
    }

    pub fn samples(&self) -> &[f64] {
        self.waveform.samples()
    }

    pub fn len(&self) -> usize {
        self.waveform.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waveform.is_empty()
    }

    pub fn mains_frequency_hz(&self) -> f64 {
        self.mains_frequency_hz
    }

    pub fn amplitude_v(&self) -> f64 {
        self.amplitude_v
    }

    pub fn samples_per_cycle(&self) -> usize {
        self.samples_per_cycle
    }
}

/// Samples per mains cycle, or a configuration error when the ratio is not
/// integral.
pub fn samples_per_cycle(mains_frequency_hz: f64, sample_rate_hz: f64) -> Result<usize> {
    if !(mains_frequency_hz > 0.0 && sample_rate_hz > 0.0)
        || !mains_frequency_hz.is_finite()
        || !sample_rate_hz.is_finite()
    {
        return Err(Error::Config(format!(
            "mains frequency ({mains_frequency_hz}) and sample rate ({sample_rate_hz}) must be positive"
        )));
    }
    let ratio = sample_rate_hz / mains_frequency_hz;
    let rounded = ratio.round();
    if rounded < 1.0 || (ratio - rounded).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::Config(format!(
            "sample rate {sample_rate_hz} Hz is not an integer multiple of mains frequency {mains_frequency_hz} Hz"
        )));
    }
    Ok(rounded as usize)
}

pub fn generate_voltage_reference(
    mains_frequency_hz: f64,
    sample_rate_hz: f64,
    n_samples: usize,
    amplitude_v: f64,
) -> Result<VoltageReference> {
    let spc = samples_per_cycle(mains_frequency_hz, sample_rate_hz)?;
    if n_samples == 0 {
        return Err(Error::Config("voltage reference needs at least one sample".into()));
    }
    if !(amplitude_v.is_finite() && amplitude_v > 0.0) {
        return Err(Error::Config(format!(
            "voltage amplitude must be positive, got {amplitude_v}"
        )));
    }
    // Phase is taken modulo the integer cycle length so every cycle is
    // sampled identically.
    let samples = (0..n_samples)
        .map(|t| amplitude_v * (2.0 * PI * (t % spc) as f64 / spc as f64).sin())
        .collect();
    Ok(VoltageReference {
        waveform: Waveform::new(samples, sample_rate_hz)?,
        mains_frequency_hz,
        amplitude_v,
        samples_per_cycle: spc,
    })
}

/// Fractional indices of rising zero crossings (negative to non-negative),
/// located by linear interpolation between the bracketing samples.
pub fn rising_zero_crossings(v: &[f64]) -> Vec<f64> {
    v.windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] < 0.0 && w[1] >= 0.0)
        .map(|(i, w)| i as f64 + (-w[0]) / (w[1] - w[0]))
        .collect()
}

fn interpolate(x: &[f64], t: f64) -> f64 {
    let i = t.floor() as usize;
    if i + 1 >= x.len() {
        return x[x.len() - 1];
    }
    let frac = t - i as f64;
    x[i] + frac * (x[i + 1] - x[i])
}

/// Voltage-locked cycle resampling.
///
/// Each interval between consecutive rising voltage zero crossings is
/// resampled to exactly `samples_per_cycle` points by linear interpolation of
/// the current, and the cycles are concatenated. Samples before the first and
/// after the last crossing are dropped.
pub fn align_cycles(
    current: &Waveform,
    voltage: &Waveform,
    samples_per_cycle: usize,
) -> Result<Waveform> {
    if current.len() != voltage.len() {
        return Err(Error::Dimension(format!(
            "current has {} samples, voltage has {}",
            current.len(),
            voltage.len()
        )));
    }
    if current.sample_rate_hz() != voltage.sample_rate_hz() {
        return Err(Error::Dimension(format!(
            "current sampled at {} Hz, voltage at {} Hz",
            current.sample_rate_hz(),
            voltage.sample_rate_hz()
        )));
    }
    if samples_per_cycle == 0 {
        return Err(Error::Config("samples_per_cycle must be positive".into()));
    }
    let crossings = rising_zero_crossings(voltage.samples());
    if crossings.len() < 2 {
        return Err(Error::Alignment(format!(
            "voltage has {} rising zero crossing(s); at least one full cycle is required",
            crossings.len()
        )));
    }
    let x = current.samples();
    let mut out = Vec::with_capacity((crossings.len() - 1) * samples_per_cycle);
    for pair in crossings.windows(2) {
        let step = (pair[1] - pair[0]) / samples_per_cycle as f64;
        out.extend((0..samples_per_cycle).map(|j| interpolate(x, pair[0] + j as f64 * step)));
    }
    Waveform::new(out, current.sample_rate_hz())
}

/// Cuts an aligned waveform into non-overlapping windows; the remainder is
/// discarded.
pub fn window_signatures(
    aligned: &Waveform,
    window_len: usize,
    samples_per_cycle: usize,
) -> Result<SignatureMatrix> {
    if window_len == 0 || samples_per_cycle == 0 || window_len % samples_per_cycle != 0 {
        return Err(Error::Config(format!(
            "window length {window_len} must be a positive multiple of samples_per_cycle {samples_per_cycle}"
        )));
    }
    let rows = aligned.len() / window_len;
    if rows == 0 {
        return Err(Error::Empty(format!(
            "waveform of {} samples is shorter than one window of {window_len}",
            aligned.len()
        )));
    }
    let data = Array2::from_shape_vec(
        (rows, window_len),
        aligned.samples()[..rows * window_len].to_vec(),
    )
    .expect("shape matches slice length");
    Ok(SignatureMatrix::from_parts_unchecked(
        data,
        aligned.sample_rate_hz(),
        samples_per_cycle,
    ))
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Splits a waveform into stationary segments by block RMS.
///
/// Blocks of `rms_window_cycles` cycles are scanned in order; a block joins
/// the current range while its RMS stays within `threshold_ratio` of the
/// range's running mean RMS. Returned ranges are sample indices and cover the
/// block-aligned prefix of the input.
pub fn segment_events(
    waveform: &Waveform,
    samples_per_cycle: usize,
    rms_window_cycles: usize,
    threshold_ratio: f64,
) -> Result<Vec<Range<usize>>> {
    if rms_window_cycles == 0 || samples_per_cycle == 0 {
        return Err(Error::Config(
            "rms_window_cycles and samples_per_cycle must be at least 1".into(),
        ));
    }
    if !(threshold_ratio > 0.0) {
        return Err(Error::Config(format!(
            "threshold_ratio must be positive, got {threshold_ratio}"
        )));
    }
    let block = rms_window_cycles * samples_per_cycle;
    let levels: Vec<f64> = waveform.samples().chunks_exact(block).map(rms).collect();
    let mut ranges = Vec::new();
    let Some(&first) = levels.first() else {
        return Ok(ranges);
    };
    let (mut start, mut sum, mut count) = (0usize, first, 1usize);
    for (b, &level) in levels.iter().enumerate().skip(1) {
        let mean = sum / count as f64;
        if (level - mean).abs() <= threshold_ratio * mean {
            sum += level;
            count += 1;
        } else {
            ranges.push(start * block..b * block);
            start = b;
            sum = level;
            count = 1;
        }
    }
    ranges.push(start * block..levels.len() * block);
    Ok(ranges)
}
