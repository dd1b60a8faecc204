use std::borrow::Cow;

use ndarray::Array2;

use super::split::{split_indices, SplitMode, SplitPair};
use super::{
    aggregate_rows, appliance_power, brand_indicators, build_activation_matrix, mirror_rows,
    shares_from_power, support, LabeledDataset,
};
use crate::error::{Error, Result, StageExt};
use crate::genmodel::{make_submetered, GenerationConfig};
use crate::latent::{fit_pca, ComponentSelection, ReconstructionModel};
use crate::rng::{ids, Streams};
use crate::signalio::{generate_voltage_reference, SignatureMatrix, DEFAULT_MAINS_HZ};

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationConfig {
    /// Number of aggregate scenarios A.
    pub scenarios: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub split_mode: SplitMode,
    pub tau: f64,
    /// Divide power-share rows by their sums; off gives watts.
    pub normalize_shares: bool,
    pub mains_hz: f64,
    pub voltage_amplitude: f64,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        Self {
            scenarios: 1000,
            k_min: 1,
            k_max: 4,
            split_mode: SplitMode::Uniform,
            tau: 0.8,
            normalize_shares: true,
            mains_hz: DEFAULT_MAINS_HZ,
            voltage_amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetConfig {
    pub generation: GenerationConfig,
    pub aggregation: AggregationConfig,
}

impl DatasetConfig {
    fn echo(&self, model: &ReconstructionModel, source: &str) -> Vec<(String, String)> {
        let g = &self.generation;
        let a = &self.aggregation;
        vec![
            ("seed".into(), g.seed.to_string()),
            ("model_source".into(), source.into()),
            ("components".into(), model.components().to_string()),
            ("signature_len".into(), model.signature_len().to_string()),
            ("classes".into(), g.n_classes.to_string()),
            ("modes_per_class".into(), g.modes_per_class.to_string()),
            ("brands_per_class".into(), g.brands_per_class.to_string()),
            ("samples".into(), g.n_samples.to_string()),
            ("separability".into(), g.separability.to_string()),
            ("sigma_min".into(), g.sigma_min.to_string()),
            ("sigma_max".into(), g.sigma_max.to_string()),
            ("aggregates".into(), a.scenarios.to_string()),
            ("k_min".into(), a.k_min.to_string()),
            ("k_max".into(), a.k_max.to_string()),
            ("split_mode".into(), a.split_mode.to_string()),
            ("tau".into(), a.tau.to_string()),
            ("normalize_shares".into(), a.normalize_shares.to_string()),
            ("mains_hz".into(), a.mains_hz.to_string()),
            ("voltage_amplitude".into(), a.voltage_amplitude.to_string()),
        ]
    }
}

/// Where the latent space comes from.
#[derive(Debug, Clone, Copy)]
pub enum ModelSource<'a> {
    Pretrained(&'a ReconstructionModel),
    Fit {
        real: &'a SignatureMatrix,
        selection: ComponentSelection,
    },
}

/// Fit or load, generate submetered latents, decode, mirror, activate,
/// aggregate, label and split.
///
/// Split indices are decided before any aggregate row is built, so only the
/// train and test matrices are ever materialized.
pub fn make_datasets(config: &DatasetConfig, source: ModelSource<'_>) -> Result<SplitPair> {
    let agg = &config.aggregation;
    let gen = &config.generation;
    gen.validate().stage("config")?;

    let (model, source_name) = match source {
        ModelSource::Pretrained(m) => (Cow::Borrowed(m), "pretrained"),
        ModelSource::Fit { real, selection } => (Cow::Owned(fit_pca(real, selection).stage("fit")?), "fit"),
    };
    let mut provenance = config.echo(&model, source_name);

    let submetered = make_submetered(gen, &model).stage("generate")?;
    let latent = submetered.value;
    let mut notes = submetered.notes;

    let mut x_g = model.reconstruct_rows(latent.z().view()).stage("reconstruct")?;
    let t = x_g.ncols();
    let v = generate_voltage_reference(agg.mains_hz, model.sample_rate_hz(), t, agg.voltage_amplitude)
        .stage("voltage")?;
    if v.samples_per_cycle() != model.samples_per_cycle() {
        return Err(Error::Config(format!(
            "mains frequency {} Hz gives {} samples per cycle, model was fitted with {}",
            agg.mains_hz,
            v.samples_per_cycle(),
            model.samples_per_cycle()
        )))
        .stage("voltage");
    }
    notes.extend(mirror_rows(&mut x_g, v.samples()).stage("mirror")?);

    let streams = Streams::new(gen.seed);
    let n = x_g.nrows();
    let activation = build_activation_matrix(
        agg.scenarios,
        n,
        agg.k_min,
        agg.k_max,
        &mut streams.get(ids::ACTIVATION),
    )
    .stage("activate")?;

    let y_class = latent.classes().expect("submetered latents carry classes");
    let y_brand = latent.brands().expect("submetered latents carry brands");
    let power = appliance_power(x_g.view(), v.samples());
    let shares = shares_from_power(&activation, &power, y_class, gen.n_classes, agg.normalize_shares);
    notes.extend(shares.notes);
    let p_a = shares.value;
    let y_class_ind = support(&p_a);
    let b = gen.brands_per_class;
    let global_brand: Vec<usize> = y_class.iter().zip(y_brand).map(|(c, k)| c * b + k).collect();
    let y_brand_ind = brand_indicators(&activation, &global_brand, gen.n_classes * b);

    let idx = split_indices(
        &y_brand_ind,
        gen.n_classes,
        b,
        agg.split_mode,
        agg.tau,
        &mut streams.get(ids::SPLIT),
    )
    .stage("split")?;

    provenance.extend(notes.into_iter().map(|n| ("note".to_string(), n)));
    let build = |rows: &[usize]| -> LabeledDataset {
        let data: Array2<f64> = aggregate_rows(&activation, rows, x_g.view());
        LabeledDataset {
            x_a: SignatureMatrix::from_parts_unchecked(data, model.sample_rate_hz(), model.samples_per_cycle()),
            y_class_ind: y_class_ind.select(ndarray::Axis(0), rows),
            y_brand_ind: y_brand_ind.select(ndarray::Axis(0), rows),
            p_a: p_a.select(ndarray::Axis(0), rows),
            activation: activation.select(rows),
            n_classes: gen.n_classes,
            brands_per_class: b,
            provenance: provenance.clone(),
        }
    };
    Ok(SplitPair {
        train: build(&idx.train),
        test: build(&idx.test),
        mode: agg.split_mode,
        tau: agg.tau,
        train_brands: idx.train_brands,
        test_brands: idx.test_brands,
    })
}
