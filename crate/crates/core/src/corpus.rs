//! Pseudo-real corpus of mains-locked harmonic-series currents.
//!
//! Each signature is Σ_h a·e^{−λ(h−1)}·sin(2πh·t/spc + φ_h) for h = 1..H with
//! H ~ U{1..max_harmonics}, a log-uniform, λ uniform and every φ_h uniform in
//! [−π/2, π/2].

use std::f64::consts::{FRAC_PI_2, PI};

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{ids, Streams};
use crate::signalio::{SignatureMatrix, DEFAULT_SAMPLES_PER_CYCLE, DEFAULT_SAMPLE_RATE_HZ};

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusConfig {
    pub signatures: usize,
    pub cycles: usize,
    pub samples_per_cycle: usize,
    pub sample_rate_hz: f64,
    pub max_harmonics: usize,
    /// Fundamental amplitude bounds in amperes.
    pub amplitude: (f64, f64),
    pub decay: (f64, f64),
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            signatures: 200,
            cycles: 60,
            samples_per_cycle: DEFAULT_SAMPLES_PER_CYCLE,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            max_harmonics: 15,
            amplitude: (0.1, 10.0),
            decay: (0.2, 1.2),
            seed: 0,
        }
    }
}

impl CorpusConfig {
    pub fn signature_len(&self) -> usize {
        self.cycles * self.samples_per_cycle
    }
}

pub fn pseudo_real_corpus(config: &CorpusConfig) -> Result<SignatureMatrix> {
    let c = config;
    if c.signatures == 0 || c.cycles == 0 || c.samples_per_cycle < 2 || c.max_harmonics == 0 {
        return Err(Error::Config(
            "corpus needs signatures, cycles, max_harmonics ≥ 1 and samples_per_cycle ≥ 2".into(),
        ));
    }
    let (a_lo, a_hi) = c.amplitude;
    let (d_lo, d_hi) = c.decay;
    if !(a_lo > 0.0 && a_lo <= a_hi && d_lo >= 0.0 && d_lo <= d_hi) {
        return Err(Error::Config(format!(
            "corpus amplitude {:?} and decay {:?} ranges are invalid",
            c.amplitude, c.decay
        )));
    }
    let spc = c.samples_per_cycle;
    let mut rng = Streams::new(c.seed).get(ids::CORPUS);
    let mut data = Array2::zeros((c.signatures, c.signature_len()));
    let mut cycle = vec![0.0; spc];
    for mut row in data.rows_mut() {
        let harmonics = rng.random_range(1..=c.max_harmonics);
        let amplitude = (a_lo.ln() + (a_hi.ln() - a_lo.ln()) * rng.random::<f64>()).exp();
        let decay = d_lo + (d_hi - d_lo) * rng.random::<f64>();
        cycle.fill(0.0);
        for h in 1..=harmonics {
            let phase = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
            let a = amplitude * (-decay * (h - 1) as f64).exp();
            for (t, s) in cycle.iter_mut().enumerate() {
                *s += a * (2.0 * PI * h as f64 * t as f64 / spc as f64 + phase).sin();
            }
        }
        for (t, s) in row.iter_mut().enumerate() {
            *s = cycle[t % spc];
        }
    }
    SignatureMatrix::new(data, c.sample_rate_hz, spc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_periodicity() {
        let cfg = CorpusConfig {
            signatures: 5,
            cycles: 3,
            ..CorpusConfig::default()
        };
        let m = pseudo_real_corpus(&cfg).unwrap();
        assert_eq!(m.data().dim(), (5, 1500));
        for row in m.data().rows() {
            for t in 0..500 {
                assert_eq!(row[t], row[t + 1000]);
            }
        }
    }

    #[test]
    fn fundamental_bounds_the_peak() {
        // Peak ≤ a·Σ e^{−λ(h−1)} ≤ 10 / (1 − e^{−0.2}).
        let m = pseudo_real_corpus(&CorpusConfig {
            signatures: 50,
            cycles: 1,
            ..CorpusConfig::default()
        })
        .unwrap();
        let bound = 10.0 / (1.0 - (-0.2f64).exp());
        assert!(m.data().iter().all(|v| v.abs() <= bound));
        assert!(m.data().rows().into_iter().all(|r| r.iter().any(|v| v.abs() > 0.0)));
    }

    #[test]
    fn seeded() {
        let cfg = CorpusConfig {
            signatures: 3,
            cycles: 1,
            seed: 8,
            ..CorpusConfig::default()
        };
        assert_eq!(pseudo_real_corpus(&cfg).unwrap(), pseudo_real_corpus(&cfg).unwrap());
    }
}
