//! Baseline regressors, R² scoring and the generalization experiments.

mod knn;
mod tree;

pub use knn::{knn_fit, knn_predict, KnnModel, DEFAULT_KNN_K};
pub use tree::{tree_fit, tree_predict, RegressionTree, TreeParams};

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};

use crate::aggregator::{make_datasets, DatasetConfig, ModelSource, SplitMode};
use crate::error::{Error, Result, StageExt};
use crate::features::{feature_matrix, FeatureLayout, DEFAULT_VI_POINTS, DEFAULT_WAVELET_LEVELS};
use crate::latent::ReconstructionModel;
use crate::signalio::generate_voltage_reference;

/// Mean over outputs of 1 − SS_res/SS_tot. An output whose truth is constant
/// scores 1 when predicted exactly and 0 otherwise; if every output is
/// constant the score is undefined.
pub fn r2_score(y_true: ArrayView2<'_, f64>, y_pred: ArrayView2<'_, f64>) -> Result<f64> {
    if y_true.dim() != y_pred.dim() {
        return Err(Error::Dimension(format!(
            "truth {:?} and prediction {:?} differ",
            y_true.dim(),
            y_pred.dim()
        )));
    }
    if y_true.nrows() == 0 || y_true.ncols() == 0 {
        return Err(Error::UndefinedScore("empty target matrix".into()));
    }
    let mut scores = Vec::with_capacity(y_true.ncols());
    let mut any_variance = false;
    for (t, p) in y_true.axis_iter(Axis(1)).zip(y_pred.axis_iter(Axis(1))) {
        let mean = t.mean().expect("non-empty");
        let ss_tot: f64 = t.iter().map(|v| (v - mean) * (v - mean)).sum();
        let ss_res: f64 = t.iter().zip(p.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        if ss_tot > 0.0 {
            any_variance = true;
            scores.push(1.0 - ss_res / ss_tot);
        } else {
            scores.push(if ss_res == 0.0 { 1.0 } else { 0.0 });
        }
    }
    if !any_variance {
        return Err(Error::UndefinedScore("every target column is constant".into()));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelKind {
    Knn,
    Tree,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Knn => "knn",
            ModelKind::Tree => "tree",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "knn" => Ok(ModelKind::Knn),
            "tree" => Ok(ModelKind::Tree),
            other => Err(Error::Config(format!("unknown model `{other}`, expected knn or tree"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Separability,
    Concurrency,
    Brand,
}

impl Experiment {
    pub fn parameter(&self) -> &'static str {
        match self {
            Experiment::Separability => "separability",
            Experiment::Concurrency => "concurrency",
            Experiment::Brand => "tau",
        }
    }

    pub fn default_values(&self) -> Vec<f64> {
        match self {
            Experiment::Separability => vec![0.0, 0.5, 1.0, 2.0],
            Experiment::Concurrency => vec![2.0, 4.0, 6.0, 8.0, 10.0],
            Experiment::Brand => vec![0.9, 0.7, 0.5, 0.3],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::Separability => "separability",
            Experiment::Concurrency => "concurrency",
            Experiment::Brand => "brand",
        })
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "separability" => Ok(Experiment::Separability),
            "concurrency" => Ok(Experiment::Concurrency),
            "brand" => Ok(Experiment::Brand),
            other => Err(Error::Config(format!(
                "unknown experiment `{other}`, expected separability, concurrency or brand"
            ))),
        }
    }
}

/// Everything an experiment holds fixed while one parameter is swept.
#[derive(Debug, Clone)]
pub struct BenchSettings<'a> {
    pub base: DatasetConfig,
    pub model: &'a ReconstructionModel,
    pub models: Vec<ModelKind>,
    pub knn_k: usize,
    pub tree: TreeParams,
    pub wavelet_levels: usize,
    pub vi_points: usize,
}

impl<'a> BenchSettings<'a> {
    pub fn new(base: DatasetConfig, model: &'a ReconstructionModel) -> Self {
        Self {
            base,
            model,
            models: vec![ModelKind::Knn, ModelKind::Tree],
            knn_k: DEFAULT_KNN_K,
            tree: TreeParams::default(),
            wavelet_levels: DEFAULT_WAVELET_LEVELS,
            vi_points: DEFAULT_VI_POINTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub model: ModelKind,
    pub seed: u64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub experiment: Experiment,
    pub values: Vec<f64>,
    pub rows: Vec<ResultRow>,
}

impl ExperimentResult {
    /// Median R² per sweep value, in sweep order.
    pub fn medians(&self, model: ModelKind) -> Vec<f64> {
        self.values
            .iter()
            .map(|&v| {
                let mut r: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|row| row.model == model && row.sweep_value == v)
                    .map(|row| row.r2)
                    .collect();
                median(&mut r)
            })
            .collect()
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Number of adjacent pairs that break a non-decreasing order.
pub fn inversions(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] < w[0]).count()
}

fn features_of(settings: &BenchSettings<'_>, x: &crate::signalio::SignatureMatrix) -> Result<Array2<f64>> {
    let v = generate_voltage_reference(
        settings.base.aggregation.mains_hz,
        x.sample_rate_hz(),
        x.cols(),
        settings.base.aggregation.voltage_amplitude,
    )?;
    let layout = FeatureLayout::for_signatures(x, settings.wavelet_levels, settings.vi_points);
    feature_matrix(x, &v, &layout)
}

/// Builds one dataset, extracts features and scores every model on the
/// test split.
pub fn evaluate_config(settings: &BenchSettings<'_>, config: &DatasetConfig) -> Result<Vec<(ModelKind, f64)>> {
    let pair = make_datasets(config, ModelSource::Pretrained(settings.model))?;
    let f_train = features_of(settings, &pair.train.x_a).stage("features")?;
    let f_test = features_of(settings, &pair.test.x_a).stage("features")?;
    let (y_train, y_test) = (pair.train.p_a.view(), pair.test.p_a.view());
    settings
        .models
        .iter()
        .map(|&m| {
            let pred = match m {
                ModelKind::Knn => {
                    let k = settings.knn_k.min(f_train.nrows());
                    let model = knn_fit(f_train.view(), y_train, k)?;
                    knn_predict(&model, f_test.view())?
                }
                ModelKind::Tree => {
                    let model = tree_fit(f_train.view(), y_train, settings.tree)?;
                    tree_predict(&model, f_test.view())?
                }
            };
            Ok((m, r2_score(y_test, pred.view())?))
        })
        .collect::<Result<Vec<_>>>()
        .stage("fit")
}

/// Runs `experiment` over `values` for every seed. The seed replaces the
/// base configuration's seed; everything else but the swept parameter is
/// held fixed.
pub fn run_experiment(
    settings: &BenchSettings<'_>,
    experiment: Experiment,
    values: &[f64],
    seeds: &[u64],
) -> Result<ExperimentResult> {
    if values.is_empty() || seeds.is_empty() {
        return Err(Error::Config("experiment needs at least one sweep value and one seed".into()));
    }
    if settings.models.is_empty() {
        return Err(Error::Config("experiment needs at least one model".into()));
    }
    let mut rows = Vec::new();
    for &value in values {
        let mut cfg = settings.base.clone();
        match experiment {
            Experiment::Separability => {
                if !(value >= 0.0) {
                    return Err(Error::Config(format!("separability must be non-negative, got {value}")));
                }
                cfg.generation.separability = value;
            }
            Experiment::Concurrency => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::Config(format!("concurrency must be a positive integer, got {value}")));
                }
                cfg.aggregation.k_min = value as usize;
                cfg.aggregation.k_max = value as usize;
            }
            Experiment::Brand => {
                if cfg.generation.brands_per_class < 2 {
                    return Err(Error::Config(format!(
                        "brand experiment needs at least 2 brands per class, got {}",
                        cfg.generation.brands_per_class
                    )));
                }
                cfg.aggregation.split_mode = SplitMode::Brand;
                cfg.aggregation.tau = value;
            }
        }
        for &seed in seeds {
            cfg.generation.seed = seed;
            for (model, r2) in evaluate_config(settings, &cfg)? {
                rows.push(ResultRow {
                    sweep_value: value,
                    model,
                    seed,
                    r2,
                });
            }
        }
    }
    Ok(ExperimentResult {
        experiment,
        values: values.to_vec(),
        rows,
    })
}

pub fn run_separability_experiment(
    settings: &BenchSettings<'_>,
    eps_values: &[f64],
    seeds: &[u64],
) -> Result<ExperimentResult> {
    run_experiment(settings, Experiment::Separability, eps_values, seeds)
}

pub fn run_concurrency_experiment(
    settings: &BenchSettings<'_>,
    k_values: &[usize],
    seeds: &[u64],
) -> Result<ExperimentResult> {
    let values: Vec<f64> = k_values.iter().map(|&k| k as f64).collect();
    run_experiment(settings, Experiment::Concurrency, &values, seeds)
}

pub fn run_brand_experiment(
    settings: &BenchSettings<'_>,
    tau_values: &[f64],
    seeds: &[u64],
) -> Result<ExperimentResult> {
    run_experiment(settings, Experiment::Brand, tau_values, seeds)
}
