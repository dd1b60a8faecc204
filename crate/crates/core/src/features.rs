//! The six classical NILM features of an aggregate current row.
//!
//! Flattened layout, in order: form factor, temporal centroid, P admittance
//! values, J = levels + 1 wavelet band energies (details from finest to
//! coarsest, then the approximation), the VI path as n voltage coordinates
//! followed by n current coordinates, and the phase angle.

use std::f64::consts::FRAC_PI_2;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::signalio::{SignatureMatrix, VoltageReference};

pub const DEFAULT_WAVELET_LEVELS: usize = 8;
pub const DEFAULT_VI_POINTS: usize = 50;

fn undefined(feature: &'static str, reason: impl Into<String>) -> Error {
    Error::UndefinedFeature {
        feature,
        reason: reason.into(),
    }
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// RMS over mean absolute value.
pub fn form_factor(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(undefined("form_factor", "empty row"));
    }
    let mean_abs = x.iter().map(|v| v.abs()).sum::<f64>() / x.len() as f64;
    if mean_abs == 0.0 {
        return Err(undefined("form_factor", "all-zero row"));
    }
    Ok(rms(x) / mean_abs)
}

/// Per-period quantity weighted by the temporal centroid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PeriodWeight {
    /// Sum of squared samples.
    #[default]
    Energy,
    Rms,
}

fn check_periods(len: usize, spc: usize, feature: &'static str) -> Result<usize> {
    if spc == 0 || len == 0 || len % spc != 0 {
        return Err(Error::Config(format!(
            "{feature}: row length {len} is not a positive multiple of samples_per_cycle {spc}"
        )));
    }
    Ok(len / spc)
}

/// Σ E_p·p / Σ E_p with periods numbered from 1.
pub fn temporal_centroid(x: &[f64], samples_per_cycle: usize, weight: PeriodWeight) -> Result<f64> {
    check_periods(x.len(), samples_per_cycle, "temporal_centroid")?;
    let (mut num, mut den) = (0.0, 0.0);
    for (p, period) in x.chunks(samples_per_cycle).enumerate() {
        let e = match weight {
            PeriodWeight::Energy => period.iter().map(|v| v * v).sum::<f64>(),
            PeriodWeight::Rms => rms(period),
        };
        num += e * (p + 1) as f64;
        den += e;
    }
    if den == 0.0 {
        return Err(undefined("temporal_centroid", "zero total energy"));
    }
    Ok(num / den)
}

/// Per-period ratio of current RMS to voltage RMS.
pub fn admittance_over_time(x: &[f64], v: &VoltageReference, samples_per_cycle: usize) -> Result<Vec<f64>> {
    if v.len() != x.len() {
        return Err(Error::Dimension(format!(
            "current has {} samples, voltage {}",
            x.len(),
            v.len()
        )));
    }
    check_periods(x.len(), samples_per_cycle, "admittance_over_time")?;
    x.chunks(samples_per_cycle)
        .zip(v.samples().chunks(samples_per_cycle))
        .enumerate()
        .map(|(p, (xp, vp))| {
            let vr = rms(vp);
            if vr == 0.0 {
                return Err(undefined("admittance_over_time", format!("zero voltage in period {}", p + 1)));
            }
            Ok(rms(xp) / vr)
        })
        .collect()
}

/// Length of the dyadic prefix analysed for a row of length `len`.
pub fn wavelet_prefix_len(len: usize) -> usize {
    if len == 0 {
        0
    } else {
        1 << (usize::BITS - 1 - len.leading_zeros())
    }
}

/// Haar band energies of the largest power-of-two prefix of `x`: `levels`
/// detail bands from finest to coarsest, then the approximation band.
pub fn wavelet_energy(x: &[f64], levels: usize) -> Result<Vec<f64>> {
    if levels == 0 || levels >= usize::BITS as usize || x.len() < (1usize << levels) {
        return Err(Error::Config(format!(
            "wavelet depth {levels} needs at least 2^{levels} samples, row has {}",
            x.len()
        )));
    }
    let mut approx = x[..wavelet_prefix_len(x.len())].to_vec();
    let mut bands = Vec::with_capacity(levels + 1);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for _ in 0..levels {
        let half = approx.len() / 2;
        let mut next = Vec::with_capacity(half);
        let mut detail = 0.0;
        for pair in approx.chunks_exact(2) {
            next.push((pair[0] + pair[1]) * s);
            let d = (pair[0] - pair[1]) * s;
            detail += d * d;
        }
        bands.push(detail);
        approx = next;
    }
    bands.push(approx.iter().map(|v| v * v).sum());
    Ok(bands)
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Normalized (voltage, current) pairs at `n_points` evenly spaced samples
/// of the final full cycle. Row 0 holds voltage, row 1 current; both are
/// scaled by the maximum magnitude over the whole row.
pub fn vi_trajectory(
    x: &[f64],
    v: &VoltageReference,
    samples_per_cycle: usize,
    n_points: usize,
) -> Result<Array2<f64>> {
    if v.len() != x.len() {
        return Err(Error::Dimension(format!(
            "current has {} samples, voltage {}",
            x.len(),
            v.len()
        )));
    }
    let periods = check_periods(x.len(), samples_per_cycle, "vi_trajectory")?;
    if n_points == 0 || n_points > samples_per_cycle {
        return Err(Error::Config(format!(
            "vi_trajectory: n_points must lie in 1..={samples_per_cycle}, got {n_points}"
        )));
    }
    let xm = max_abs(x);
    if xm == 0.0 {
        return Err(undefined("vi_trajectory", "zero current"));
    }
    let vm = max_abs(v.samples());
    if vm == 0.0 {
        return Err(undefined("vi_trajectory", "zero voltage"));
    }
    let start = (periods - 1) * samples_per_cycle;
    let mut path = Array2::zeros((2, n_points));
    for i in 0..n_points {
        let t = start + i * samples_per_cycle / n_points;
        path[[0, i]] = v.samples()[t] / vm;
        path[[1, i]] = x[t] / xm;
    }
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseShift {
    /// Radians in [0, π/2].
    pub theta: f64,
    pub active_power_w: f64,
    pub apparent_power_va: f64,
}

/// θ = acos(clamp(W/S, 0, 1)) with W = mean(x·v) and S = rms(x)·rms(v).
/// Computed as atan2(|x − αv|·|v|, x·v), α = x·v / v·v.
pub fn phase_shift(x: &[f64], v: &VoltageReference) -> Result<PhaseShift> {
    if v.len() != x.len() {
        return Err(Error::Dimension(format!(
            "current has {} samples, voltage {}",
            x.len(),
            v.len()
        )));
    }
    let s = rms(x) * rms(v.samples());
    if s == 0.0 {
        return Err(undefined("phase_shift", "zero rms"));
    }
    let xv = ArrayView1::from(x).dot(&ArrayView1::from(v.samples()));
    let w = xv / x.len() as f64;
    // Same angle as acos(W/S), taken from the part of x orthogonal to v so
    // that nearly parallel inputs do not lose precision.
    let theta = if w <= 0.0 {
        FRAC_PI_2
    } else {
        let vv: f64 = v.samples().iter().map(|a| a * a).sum();
        let alpha = xv / vv;
        let resid: f64 = x
            .iter()
            .zip(v.samples())
            .map(|(a, b)| (a - alpha * b) * (a - alpha * b))
            .sum();
        (resid.sqrt() * vv.sqrt()).atan2(xv).min(FRAC_PI_2)
    };
    Ok(PhaseShift {
        theta,
        active_power_w: w,
        apparent_power_va: s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureLayout {
    pub samples_per_cycle: usize,
    /// Periods P per row.
    pub periods: usize,
    pub wavelet_levels: usize,
    pub vi_points: usize,
    pub period_weight: PeriodWeight,
}

impl FeatureLayout {
    pub fn for_signatures(x: &SignatureMatrix, wavelet_levels: usize, vi_points: usize) -> Self {
        Self {
            samples_per_cycle: x.samples_per_cycle(),
            periods: x.periods(),
            wavelet_levels,
            vi_points,
            period_weight: PeriodWeight::Energy,
        }
    }

    pub fn wavelet_bands(&self) -> usize {
        self.wavelet_levels + 1
    }

    pub fn len(&self) -> usize {
        2 + self.periods + self.wavelet_bands() + 2 * self.vi_points + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = vec!["form_factor".to_string(), "temporal_centroid".to_string()];
        names.extend((1..=self.periods).map(|p| format!("admittance_p{p}")));
        names.extend((1..=self.wavelet_levels).map(|j| format!("wavelet_d{j}")));
        names.push(format!("wavelet_a{}", self.wavelet_levels));
        names.extend((0..self.vi_points).map(|i| format!("vi_v{i}")));
        names.extend((0..self.vi_points).map(|i| format!("vi_i{i}")));
        names.push("phase_shift".into());
        names
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub form_factor: f64,
    pub temporal_centroid: f64,
    pub admittance_over_time: Vec<f64>,
    pub wavelet_energy: Vec<f64>,
    /// 2×n, voltage row then current row.
    pub vi_trajectory: Array2<f64>,
    pub phase_shift: f64,
}

impl FeatureVector {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = vec![self.form_factor, self.temporal_centroid];
        out.extend(&self.admittance_over_time);
        out.extend(&self.wavelet_energy);
        out.extend(self.vi_trajectory.iter());
        out.push(self.phase_shift);
        out
    }
}

pub fn feature_vector(x: &[f64], v: &VoltageReference, layout: &FeatureLayout) -> Result<FeatureVector> {
    let spc = layout.samples_per_cycle;
    if x.len() != layout.periods * spc {
        return Err(Error::Dimension(format!(
            "row has {} samples, layout expects {} periods of {spc}",
            x.len(),
            layout.periods
        )));
    }
    Ok(FeatureVector {
        form_factor: form_factor(x)?,
        temporal_centroid: temporal_centroid(x, spc, layout.period_weight)?,
        admittance_over_time: admittance_over_time(x, v, spc)?,
        wavelet_energy: wavelet_energy(x, layout.wavelet_levels)?,
        vi_trajectory: vi_trajectory(x, v, spc, layout.vi_points)?,
        phase_shift: phase_shift(x, v)?.theta,
    })
}

/// One flattened feature row per signature row.
pub fn feature_matrix(x: &SignatureMatrix, v: &VoltageReference, layout: &FeatureLayout) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((x.rows(), layout.len()));
    for (i, row) in x.data().rows().into_iter().enumerate() {
        let owned;
        let slice = match row.as_slice() {
            Some(s) => s,
            None => {
                owned = row.to_vec();
                &owned
            }
        };
        let f = feature_vector(slice, v, layout).map_err(|e| match e {
            Error::UndefinedFeature { feature, reason } => Error::UndefinedFeature {
                feature,
                reason: format!("row {i}: {reason}"),
            },
            other => other,
        })?;
        out.row_mut(i).assign(&ArrayView1::from(&f.flatten()));
    }
    Ok(out)
}
