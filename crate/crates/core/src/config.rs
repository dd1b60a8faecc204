//! Flat `key=value` run configuration.
//!
//! One key per line; blank lines and lines starting with `#` are ignored.
//! Unknown keys are rejected and every error names the offending key.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array1;

use crate::aggregator::{AggregationConfig, DatasetConfig, SplitMode};
use crate::bench::{BenchSettings, TreeParams};
use crate::corpus::CorpusConfig;
use crate::error::{Error, Result};
use crate::genmodel::{GenerationConfig, KMeansParams, LatentBounds};
use crate::latent::{ComponentSelection, ReconstructionModel};
use crate::signalio::samples_per_cycle;

/// Key, default value and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "0", "master seed for every random stream"),
    ("out_dir", ".", "directory for output files"),
    ("classes", "5", "appliance classes D"),
    ("modes_per_class", "2", "operating modes M per class"),
    ("brands_per_class", "3", "k-means brands B per mode"),
    ("samples", "1000", "submetered signatures N (rounded down to a multiple of D*M)"),
    ("separability", "1.0", "class separability; centroids are scaled by it"),
    ("sigma_min", "0.5", "lower bound of the per-blob spread"),
    ("sigma_max", "1.5", "upper bound of the per-blob spread"),
    ("latent_min", "", "scalar lower centroid bound; empty uses the model's range"),
    ("latent_max", "", "scalar upper centroid bound; empty uses the model's range"),
    ("kmeans_max_iter", "300", "k-means iteration cap"),
    ("kmeans_tol", "1e-6", "k-means centroid shift tolerance"),
    ("aggregates", "1000", "aggregate scenarios A"),
    ("k_min", "1", "minimum concurrently active appliances"),
    ("k_max", "4", "maximum concurrently active appliances"),
    ("split_mode", "uniform", "uniform or brand"),
    ("tau", "0.8", "training share of rows (uniform) or brands (brand)"),
    ("normalize_shares", "true", "divide power-share rows by their sums"),
    ("mains_hz", "60", "mains frequency in Hz"),
    ("sample_rate_hz", "30000", "sampling rate in Hz"),
    ("voltage_amplitude", "1.0", "peak of the reference voltage"),
    ("components", "50", "PCA components L"),
    ("variance_threshold", "0", "if > 0, choose L by cumulative explained variance instead"),
    ("corpus_signatures", "200", "rows of the built-in pseudo-real corpus"),
    ("corpus_cycles", "60", "mains cycles per corpus row"),
    ("knn_k", "5", "neighbours of the KNN baseline"),
    ("tree_max_depth", "12", "regression tree depth limit"),
    ("tree_min_leaf", "5", "regression tree minimum leaf size"),
    ("wavelet_levels", "8", "Haar decomposition depth"),
    ("vi_points", "50", "samples on the VI trajectory"),
    ("metric_knn_k", "5", "k of the k-NN ball in beta-recall"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: String,
    pub classes: usize,
    pub modes_per_class: usize,
    pub brands_per_class: usize,
    pub samples: usize,
    pub separability: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub latent_min: Option<f64>,
    pub latent_max: Option<f64>,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
    pub aggregates: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub split_mode: SplitMode,
    pub tau: f64,
    pub normalize_shares: bool,
    pub mains_hz: f64,
    pub sample_rate_hz: f64,
    pub voltage_amplitude: f64,
    pub components: usize,
    pub variance_threshold: f64,
    pub corpus_signatures: usize,
    pub corpus_cycles: usize,
    pub knn_k: usize,
    pub tree_max_depth: usize,
    pub tree_min_leaf: usize,
    pub wavelet_levels: usize,
    pub vi_points: usize,
    pub metric_knn_k: usize,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("key `{key}`: cannot parse `{value}`: {e}")))
}

fn parse_opt(key: &str, value: &str) -> Result<Option<f64>> {
    if value.is_empty() {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn opt_str(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut c = RunConfig {
            seed: 0,
            out_dir: String::new(),
            classes: 0,
            modes_per_class: 0,
            brands_per_class: 0,
            samples: 0,
            separability: 0.0,
            sigma_min: 0.0,
            sigma_max: 0.0,
            latent_min: None,
            latent_max: None,
            kmeans_max_iter: 0,
            kmeans_tol: 0.0,
            aggregates: 0,
            k_min: 0,
            k_max: 0,
            split_mode: SplitMode::Uniform,
            tau: 0.0,
            normalize_shares: true,
            mains_hz: 0.0,
            sample_rate_hz: 0.0,
            voltage_amplitude: 0.0,
            components: 0,
            variance_threshold: 0.0,
            corpus_signatures: 0,
            corpus_cycles: 0,
            knn_k: 0,
            tree_max_depth: 0,
            tree_min_leaf: 0,
            wavelet_levels: 0,
            vi_points: 0,
            metric_knn_k: 0,
        };
        for (key, default, _) in KEYS {
            c.set(key, default).expect("built-in defaults parse");
        }
        c
    }
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "seed" => self.seed = parse(key, v)?,
            "out_dir" => self.out_dir = v.to_string(),
            "classes" => self.classes = parse(key, v)?,
            "modes_per_class" => self.modes_per_class = parse(key, v)?,
            "brands_per_class" => self.brands_per_class = parse(key, v)?,
            "samples" => self.samples = parse(key, v)?,
            "separability" => self.separability = parse(key, v)?,
            "sigma_min" => self.sigma_min = parse(key, v)?,
            "sigma_max" => self.sigma_max = parse(key, v)?,
            "latent_min" => self.latent_min = parse_opt(key, v)?,
            "latent_max" => self.latent_max = parse_opt(key, v)?,
            "kmeans_max_iter" => self.kmeans_max_iter = parse(key, v)?,
            "kmeans_tol" => self.kmeans_tol = parse(key, v)?,
            "aggregates" => self.aggregates = parse(key, v)?,
            "k_min" => self.k_min = parse(key, v)?,
            "k_max" => self.k_max = parse(key, v)?,
            "split_mode" => {
                self.split_mode = v
                    .parse()
                    .map_err(|e: Error| Error::Config(format!("key `{key}`: {e}")))?
            }
            "tau" => self.tau = parse(key, v)?,
            "normalize_shares" => self.normalize_shares = parse(key, v)?,
            "mains_hz" => self.mains_hz = parse(key, v)?,
            "sample_rate_hz" => self.sample_rate_hz = parse(key, v)?,
            "voltage_amplitude" => self.voltage_amplitude = parse(key, v)?,
            "components" => self.components = parse(key, v)?,
            "variance_threshold" => self.variance_threshold = parse(key, v)?,
            "corpus_signatures" => self.corpus_signatures = parse(key, v)?,
            "corpus_cycles" => self.corpus_cycles = parse(key, v)?,
            "knn_k" => self.knn_k = parse(key, v)?,
            "tree_max_depth" => self.tree_max_depth = parse(key, v)?,
            "tree_min_leaf" => self.tree_min_leaf = parse(key, v)?,
            "wavelet_levels" => self.wavelet_levels = parse(key, v)?,
            "vi_points" => self.vi_points = parse(key, v)?,
            "metric_knn_k" => self.metric_knn_k = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "seed" => self.seed.to_string(),
            "out_dir" => self.out_dir.clone(),
            "classes" => self.classes.to_string(),
            "modes_per_class" => self.modes_per_class.to_string(),
            "brands_per_class" => self.brands_per_class.to_string(),
            "samples" => self.samples.to_string(),
            "separability" => self.separability.to_string(),
            "sigma_min" => self.sigma_min.to_string(),
            "sigma_max" => self.sigma_max.to_string(),
            "latent_min" => opt_str(self.latent_min),
            "latent_max" => opt_str(self.latent_max),
            "kmeans_max_iter" => self.kmeans_max_iter.to_string(),
            "kmeans_tol" => self.kmeans_tol.to_string(),
            "aggregates" => self.aggregates.to_string(),
            "k_min" => self.k_min.to_string(),
            "k_max" => self.k_max.to_string(),
            "split_mode" => self.split_mode.to_string(),
            "tau" => self.tau.to_string(),
            "normalize_shares" => self.normalize_shares.to_string(),
            "mains_hz" => self.mains_hz.to_string(),
            "sample_rate_hz" => self.sample_rate_hz.to_string(),
            "voltage_amplitude" => self.voltage_amplitude.to_string(),
            "components" => self.components.to_string(),
            "variance_threshold" => self.variance_threshold.to_string(),
            "corpus_signatures" => self.corpus_signatures.to_string(),
            "corpus_cycles" => self.corpus_cycles.to_string(),
            "knn_k" => self.knn_k.to_string(),
            "tree_max_depth" => self.tree_max_depth.to_string(),
            "tree_min_leaf" => self.tree_min_leaf.to_string(),
            "wavelet_levels" => self.wavelet_levels.to_string(),
            "vi_points" => self.vi_points.to_string(),
            "metric_knn_k" => self.metric_knn_k.to_string(),
            _ => return None,
        })
    }

    /// Applies `key=value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got `{line}`", n + 1)))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    /// Defaults, then the file (if any), then the overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut c = Self::default();
        if let Some(p) = path {
            c.apply_text(&std::fs::read_to_string(p)?)?;
        }
        for (k, v) in overrides {
            c.set(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Every key with its current value, in declaration order.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        KEYS.iter()
            .map(|(k, _, _)| (k.to_string(), self.get(k).expect("declared key")))
            .collect()
    }

    pub fn to_text(&self) -> String {
        self.to_pairs().iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, msg: String| Err(Error::Config(format!("key `{key}`: {msg}")));
        for (key, v) in [
            ("classes", self.classes),
            ("modes_per_class", self.modes_per_class),
            ("brands_per_class", self.brands_per_class),
            ("samples", self.samples),
            ("aggregates", self.aggregates),
            ("k_min", self.k_min),
            ("kmeans_max_iter", self.kmeans_max_iter),
            ("corpus_signatures", self.corpus_signatures),
            ("corpus_cycles", self.corpus_cycles),
            ("knn_k", self.knn_k),
            ("tree_min_leaf", self.tree_min_leaf),
            ("wavelet_levels", self.wavelet_levels),
            ("vi_points", self.vi_points),
            ("metric_knn_k", self.metric_knn_k),
        ] {
            if v == 0 {
                return fail(key, "must be at least 1".into());
            }
        }
        if self.samples < self.classes * self.modes_per_class {
            return fail(
                "samples",
                format!("must be at least classes*modes_per_class = {}", self.classes * self.modes_per_class),
            );
        }
        if self.k_max < self.k_min {
            return fail("k_max", format!("must be ≥ k_min = {}", self.k_min));
        }
        if self.k_max > self.classes * self.modes_per_class * (self.samples / (self.classes * self.modes_per_class)) {
            return fail("k_max", "exceeds the number of submetered signatures".into());
        }
        if !(self.separability >= 0.0 && self.separability.is_finite()) {
            return fail("separability", "must be a non-negative number".into());
        }
        if !(self.sigma_min > 0.0) {
            return fail("sigma_min", "must be positive".into());
        }
        if !(self.sigma_max >= self.sigma_min && self.sigma_max.is_finite()) {
            return fail("sigma_max", "must be finite and ≥ sigma_min".into());
        }
        match (self.latent_min, self.latent_max) {
            (None, None) => {}
            (Some(lo), Some(hi)) if lo <= hi => {}
            (Some(_), Some(_)) => return fail("latent_max", "must be ≥ latent_min".into()),
            _ => return fail("latent_min", "latent_min and latent_max must be set together".into()),
        }
        if !(self.kmeans_tol >= 0.0) {
            return fail("kmeans_tol", "must be non-negative".into());
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return fail("tau", "must lie strictly between 0 and 1".into());
        }
        if self.split_mode == SplitMode::Brand && self.brands_per_class < 2 {
            return fail("brands_per_class", "brand split needs at least 2".into());
        }
        for (key, v) in [
            ("mains_hz", self.mains_hz),
            ("sample_rate_hz", self.sample_rate_hz),
            ("voltage_amplitude", self.voltage_amplitude),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(key, "must be positive".into());
            }
        }
        crate::signalio::samples_per_cycle(self.mains_hz, self.sample_rate_hz)
            .map_err(|e| Error::Config(format!("key `sample_rate_hz`: {e}")))?;
        if self.components == 0 && self.variance_threshold == 0.0 {
            return fail("components", "must be at least 1 unless variance_threshold is set".into());
        }
        if !(0.0..=1.0).contains(&self.variance_threshold) {
            return fail("variance_threshold", "must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn component_selection(&self) -> ComponentSelection {
        if self.variance_threshold > 0.0 {
            ComponentSelection::VarianceThreshold(self.variance_threshold)
        } else {
            ComponentSelection::Count(self.components)
        }
    }

    pub fn generation(&self) -> GenerationConfig {
        GenerationConfig {
            n_samples: self.samples,
            n_classes: self.classes,
            modes_per_class: self.modes_per_class,
            brands_per_class: self.brands_per_class,
            separability: self.separability,
            sigma_min: self.sigma_min,
            sigma_max: self.sigma_max,
            latent_bounds: match (self.latent_min, self.latent_max) {
                (Some(min), Some(max)) => LatentBounds::Scalar { min, max },
                _ => LatentBounds::FromModel,
            },
            seed: self.seed,
            kmeans: KMeansParams {
                max_iter: self.kmeans_max_iter,
                tol: self.kmeans_tol,
            },
        }
    }

    pub fn aggregation(&self) -> AggregationConfig {
        AggregationConfig {
            scenarios: self.aggregates,
            k_min: self.k_min,
            k_max: self.k_max,
            split_mode: self.split_mode,
            tau: self.tau,
            normalize_shares: self.normalize_shares,
            mains_hz: self.mains_hz,
            voltage_amplitude: self.voltage_amplitude,
        }
    }

    pub fn dataset(&self) -> DatasetConfig {
        DatasetConfig {
            generation: self.generation(),
            aggregation: self.aggregation(),
        }
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.tree_max_depth,
            min_leaf: self.tree_min_leaf,
        }
    }

    /// The built-in pseudo-real corpus at this run's sampling settings.
    pub fn corpus(&self) -> Result<CorpusConfig> {
        Ok(CorpusConfig {
            signatures: self.corpus_signatures,
            cycles: self.corpus_cycles,
            samples_per_cycle: samples_per_cycle(self.mains_hz, self.sample_rate_hz)?,
            sample_rate_hz: self.sample_rate_hz,
            seed: self.seed,
            ..CorpusConfig::default()
        })
    }

    pub fn bench_settings<'a>(&self, model: &'a ReconstructionModel) -> BenchSettings<'a> {
        BenchSettings {
            knn_k: self.knn_k,
            tree: self.tree_params(),
            wavelet_levels: self.wavelet_levels,
            vi_points: self.vi_points,
            ..BenchSettings::new(self.dataset(), model)
        }
    }

    pub fn explicit_bounds(&self, l: usize) -> Option<(Array1<f64>, Array1<f64>)> {
        match (self.latent_min, self.latent_max) {
            (Some(lo), Some(hi)) => Some((Array1::from_elem(l, lo), Array1::from_elem(l, hi))),
            _ => None,
        }
    }
}
