//! Latent-space generation: Gaussian blobs per operating mode, alignment with
//! the real principal axes, and k-means brand annotation.

mod kmeans;

pub use kmeans::{kmeans, KMeansParams};

use nalgebra::{Cholesky, DMatrix, DVector};
use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Noted, Result};
use crate::latent::{column_std, full_rotation, LatentMatrix, ReconstructionModel};
use crate::rng::{ids, Streams};

pub const DEFAULT_SIGMA_MIN: f64 = 0.5;
pub const DEFAULT_SIGMA_MAX: f64 = 1.5;
const CHOLESKY_JITTER: f64 = 1e-12;

/// Where blob centroids are drawn from before separation scaling.
#[derive(Debug, Clone, PartialEq)]
pub enum LatentBounds {
    /// The model's per-component extremes of the training projection.
    FromModel,
    /// The same interval for every component.
    Scalar { min: f64, max: f64 },
    Explicit { min: Array1<f64>, max: Array1<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    /// Requested submetered signatures N; the effective count is C·⌊N/C⌋.
    pub n_samples: usize,
    pub n_classes: usize,
    pub modes_per_class: usize,
    pub brands_per_class: usize,
    pub separability: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub latent_bounds: LatentBounds,
    pub seed: u64,
    pub kmeans: KMeansParams,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            n_classes: 5,
            modes_per_class: 2,
            brands_per_class: 3,
            separability: 1.0,
            sigma_min: DEFAULT_SIGMA_MIN,
            sigma_max: DEFAULT_SIGMA_MAX,
            latent_bounds: LatentBounds::FromModel,
            seed: 0,
            kmeans: KMeansParams::default(),
        }
    }
}

impl GenerationConfig {
    pub fn clusters(&self) -> usize {
        self.n_classes * self.modes_per_class
    }

    pub fn samples_per_cluster(&self) -> usize {
        self.n_samples / self.clusters().max(1)
    }

    pub fn effective_samples(&self) -> usize {
        self.clusters() * self.samples_per_cluster()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_classes", self.n_classes),
            ("modes_per_class", self.modes_per_class),
            ("brands_per_class", self.brands_per_class),
            ("n_samples", self.n_samples),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.samples_per_cluster() == 0 {
            return Err(Error::Config(format!(
                "n_samples = {} gives no samples for {} clusters",
                self.n_samples,
                self.clusters()
            )));
        }
        if !(self.separability.is_finite() && self.separability >= 0.0) {
            return Err(Error::Config(format!(
                "separability must be non-negative, got {}",
                self.separability
            )));
        }
        if !(self.sigma_min > 0.0 && self.sigma_min <= self.sigma_max && self.sigma_max.is_finite()) {
            return Err(Error::Config(format!(
                "sigma bounds must satisfy 0 < sigma_min ≤ sigma_max, got ({}, {})",
                self.sigma_min, self.sigma_max
            )));
        }
        match &self.latent_bounds {
            LatentBounds::Scalar { min, max } if !(min <= max) => Err(Error::Config(format!(
                "latent bounds must satisfy min ≤ max, got ({min}, {max})"
            ))),
            LatentBounds::Explicit { min, max }
                if min.len() != max.len() || min.iter().zip(max).any(|(a, b)| !(a <= b)) =>
            {
                Err(Error::Config("explicit latent bounds are inconsistent".into()))
            }
            _ => Ok(()),
        }
    }

    /// Per-component centroid bounds for a model of dimension L.
    pub fn resolve_bounds(&self, model: &ReconstructionModel) -> Result<(Array1<f64>, Array1<f64>)> {
        let l = model.components();
        match &self.latent_bounds {
            LatentBounds::FromModel => Ok((model.z_min().clone(), model.z_max().clone())),
            LatentBounds::Scalar { min, max } => Ok((Array1::from_elem(l, *min), Array1::from_elem(l, *max))),
            LatentBounds::Explicit { min, max } => {
                if min.len() != l {
                    return Err(Error::Dimension(format!(
                        "explicit latent bounds have {} components, model has {l}",
                        min.len()
                    )));
                }
                Ok((min.clone(), max.clone()))
            }
        }
    }
}

/// One generated Gaussian blob.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobSpec {
    pub centroid: Array1<f64>,
    pub covariance: Array2<f64>,
    pub spread: f64,
}

#[derive(Debug, Clone)]
pub struct Blobs {
    /// Rows grouped by cluster, with cluster labels set.
    pub latent: LatentMatrix,
    pub specs: Vec<BlobSpec>,
}

/// Random covariance σ²/M · S/tr(S) with S = PPᵀ and standard normal P.
pub fn sample_covariance<R: Rng + ?Sized>(
    l: usize,
    modes_per_class: usize,
    spread: f64,
    rng: &mut R,
) -> Result<Array2<f64>> {
    if l == 0 || modes_per_class == 0 || !(spread > 0.0) {
        return Err(Error::Config(format!(
            "covariance needs l ≥ 1, M ≥ 1 and positive spread (got {l}, {modes_per_class}, {spread})"
        )));
    }
    for _ in 0..2 {
        let p = Array2::from_shape_fn((l, l), |_| rng.sample::<f64, _>(StandardNormal));
        let s = p.dot(&p.t());
        let trace = s.diag().sum();
        if trace > 0.0 {
            let scale = spread * spread / (modes_per_class as f64 * trace);
            return Ok(s * scale);
        }
    }
    Err(Error::Numerical("random covariance has zero trace twice in a row".into()))
}

fn cholesky_factor(cov: &Array2<f64>) -> Result<DMatrix<f64>> {
    let l = cov.nrows();
    let m = DMatrix::from_fn(l, l, |i, j| cov[[i, j]]);
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok(c.l());
    }
    let jittered = m + DMatrix::identity(l, l) * CHOLESKY_JITTER;
    Cholesky::new(jittered)
        .map(|c| c.l())
        .ok_or_else(|| Error::Numerical("covariance is not positive definite after jitter".into()))
}

/// Gaussian blob model: C = D·M clusters with ⌊N/C⌋ samples each.
///
/// Centroids are drawn uniformly inside `[z_min, z_max]` and then mapped
/// through μ ← ε·(2μ − 1). Each cluster draws its spread, covariance and
/// samples from its own random stream.
pub fn gbm(config: &GenerationConfig, z_min: &Array1<f64>, z_max: &Array1<f64>) -> Result<Blobs> {
    config.validate()?;
    let l = z_min.len();
    if l == 0 || z_max.len() != l {
        return Err(Error::Dimension(format!(
            "latent bounds have lengths {} and {}",
            z_min.len(),
            z_max.len()
        )));
    }
    let c = config.clusters();
    let per = config.samples_per_cluster();
    let streams = Streams::new(config.seed);
    let eps = config.separability;

    let mut centroid_rng = streams.get(ids::CENTROIDS);
    let centroids = Array2::from_shape_fn((c, l), |(_, j)| {
        let u: f64 = centroid_rng.random();
        let mu = z_min[j] + (z_max[j] - z_min[j]) * u;
        eps * (2.0 * mu - 1.0)
    });

    let mut z = Array2::<f64>::zeros((c * per, l));
    let mut clusters = Vec::with_capacity(c * per);
    let mut specs = Vec::with_capacity(c);
    for k in 0..c {
        let mut rng = streams.get(ids::CLUSTER_BASE + k as u64);
        let spread = if config.sigma_max > config.sigma_min {
            rng.random_range(config.sigma_min..config.sigma_max)
        } else {
            config.sigma_min
        };
        let covariance = sample_covariance(l, config.modes_per_class, spread, &mut rng)?;
        let chol = cholesky_factor(&covariance)?;
        let mu = centroids.row(k);
        for i in 0..per {
            let xi = DVector::from_fn(l, |_, _| rng.sample::<f64, _>(StandardNormal));
            let draw = &chol * xi;
            let mut row = z.row_mut(k * per + i);
            for j in 0..l {
                row[j] = mu[j] + draw[j];
            }
            clusters.push(k);
        }
        specs.push(BlobSpec {
            centroid: mu.to_owned(),
            covariance,
            spread,
        });
    }
    Ok(Blobs {
        latent: LatentMatrix::new(z).with_clusters(clusters)?,
        specs,
    })
}

/// Rotates synthetic latents onto their own principal axes and rescales each
/// axis to the real per-component standard deviation.
///
/// The rotation is applied to the uncentered codes, so the blob layout keeps
/// its offset from the origin. Components with zero synthetic variance are
/// zeroed and reported in the notes.
pub fn align_latent(z_g: &LatentMatrix, sigma_r: &Array1<f64>) -> Result<Noted<LatentMatrix>> {
    let l = z_g.components();
    if z_g.rows() == 0 {
        return Err(Error::Validation("cannot align an empty latent matrix".into()));
    }
    if sigma_r.len() != l {
        return Err(Error::Dimension(format!(
            "sigma_r has {} entries, latent dimension is {l}",
            sigma_r.len()
        )));
    }
    let axes = full_rotation(z_g.z().view())?;
    let mut rotated = z_g.z().dot(&axes.components.t());
    let sigma_g = column_std(&rotated);
    let top = sigma_g.iter().copied().fold(0.0, f64::max);
    let mut notes = Vec::new();
    for (i, mut col) in rotated.axis_iter_mut(Axis(1)).enumerate() {
        if sigma_g[i] <= 1e-12 * top || sigma_g[i] == 0.0 {
            col.fill(0.0);
            notes.push(format!("align_latent: synthetic component {i} has zero variance; left at zero"));
        } else {
            col *= sigma_r[i] / sigma_g[i];
        }
    }
    let mut out = z_g.clone();
    *out.z_mut() = rotated;
    Ok(Noted { value: out, notes })
}

/// Gaussian blobs, latent alignment, per-cluster k-means brands, and class
/// labels ⌊y_g / M⌋.
pub fn make_submetered(
    config: &GenerationConfig,
    model: &ReconstructionModel,
) -> Result<Noted<LatentMatrix>> {
    config.validate()?;
    let (z_min, z_max) = config.resolve_bounds(model)?;
    let blobs = gbm(config, &z_min, &z_max)?;
    let Noted { value: aligned, mut notes } = align_latent(&blobs.latent, model.sigma_r())?;

    let clusters = aligned.clusters().expect("gbm sets cluster labels").to_vec();
    let streams = Streams::new(config.seed);
    let mut brands = vec![0usize; clusters.len()];
    for k in 0..config.clusters() {
        let members: Vec<usize> = (0..clusters.len()).filter(|&i| clusters[i] == k).collect();
        let b = config.brands_per_class.min(members.len());
        if b < config.brands_per_class {
            notes.push(format!(
                "make_submetered: cluster {k} has {} rows, brand count clamped from {} to {b}",
                members.len(),
                config.brands_per_class
            ));
        }
        let points = aligned.z().select(Axis(0), &members);
        let mut rng = streams.get(ids::BRAND_BASE + k as u64);
        let labels = kmeans(points.view(), b, &mut rng, config.kmeans)?;
        for (&row, label) in members.iter().zip(labels) {
            brands[row] = label;
        }
    }
    let classes = clusters.iter().map(|k| k / config.modes_per_class).collect();
    let value = aligned.with_classes(classes)?.with_brands(brands)?;
    Ok(Noted { value, notes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::{fit_pca, ComponentSelection};
    use crate::signalio::SignatureMatrix;
    use nalgebra::SymmetricEigen;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_model(l: usize) -> ReconstructionModel {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data = Array2::from_shape_fn((40, 24), |_| rng.random_range(-1.0..1.0));
        fit_pca(&SignatureMatrix::new(data, 30_000.0, 4).unwrap(), ComponentSelection::Count(l)).unwrap()
    }

    fn config(d: usize, m: usize, b: usize, n: usize) -> GenerationConfig {
        GenerationConfig {
            n_samples: n,
            n_classes: d,
            modes_per_class: m,
            brands_per_class: b,
            seed: 5,
            ..GenerationConfig::default()
        }
    }

    #[test]
    fn covariance_scalar_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = sample_covariance(1, 4, 2.0, &mut rng).unwrap();
        assert!((s[[0, 0]] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn covariance_trace_and_definiteness() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let s = sample_covariance(5, 3, 1.3, &mut rng).unwrap();
            let expected = 1.3 * 1.3 / 3.0;
            assert!((s.diag().sum() - expected).abs() / expected < 1e-12);
            for i in 0..5 {
                for j in 0..5 {
                    assert!((s[[i, j]] - s[[j, i]]).abs() < 1e-15);
                }
            }
        }
        let s = sample_covariance(3, 2, 2.0, &mut rng).unwrap();
        assert!(cholesky_factor(&s).is_ok());
        let eig = SymmetricEigen::new(DMatrix::from_fn(3, 3, |i, j| s[[i, j]]));
        assert!(eig.eigenvalues.iter().all(|v| *v >= -1e-12));
    }

    #[test]
    fn gbm_row_counts() {
        let zmin = Array1::from_elem(3, -1.0);
        let zmax = Array1::from_elem(3, 1.0);
        let blobs = gbm(&config(1, 1, 1, 4), &zmin, &zmax).unwrap();
        assert_eq!(blobs.latent.rows(), 4);
        assert_eq!(blobs.latent.clusters().unwrap(), &[0, 0, 0, 0]);

        let blobs = gbm(&config(2, 3, 1, 100), &zmin, &zmax).unwrap();
        assert_eq!(blobs.latent.rows(), 96);
        let labels = blobs.latent.clusters().unwrap();
        for k in 0..6 {
            assert_eq!(labels.iter().filter(|&&c| c == k).count(), 16);
        }
        for spec in &blobs.specs {
            let t = spec.covariance.diag().sum() * 3.0 / (spec.spread * spec.spread);
            assert!((t - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gbm_rejects_too_few_samples() {
        let zmin = Array1::from_elem(3, -1.0);
        let err = gbm(&config(3, 2, 1, 5), &zmin, &zmin.clone()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn zero_separability_centroids_at_origin() {
        // Monte-Carlo bound: each blob's sample mean lies within 4·σ_k/(√M·√n)
        // of the origin, checked over 30 seeds.
        let zmin = Array1::from_elem(4, -3.0);
        let zmax = Array1::from_elem(4, 5.0);
        for seed in 0..30 {
            let mut cfg = config(2, 2, 1, 200);
            cfg.separability = 0.0;
            cfg.seed = seed;
            let blobs = gbm(&cfg, &zmin, &zmax).unwrap();
            let labels = blobs.latent.clusters().unwrap();
            for (k, spec) in blobs.specs.iter().enumerate() {
                assert!(spec.centroid.iter().all(|v| *v == 0.0));
                let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == k).collect();
                let n = rows.len() as f64;
                let mean = blobs.latent.z().select(Axis(0), &rows).mean_axis(Axis(0)).unwrap();
                let bound = 4.0 * spec.spread / (2f64.sqrt() * n.sqrt());
                assert!(mean.iter().all(|m| m.abs() <= bound), "seed {seed}, blob {k}");
            }
        }
    }

    #[test]
    fn centroids_scale_with_separability() {
        let zmin = Array1::from_elem(3, -2.0);
        let zmax = Array1::from_elem(3, 4.0);
        let mut cfg = config(3, 1, 1, 30);
        cfg.separability = 0.7;
        let a = gbm(&cfg, &zmin, &zmax).unwrap();
        cfg.separability = 0.7 * 2.5;
        let b = gbm(&cfg, &zmin, &zmax).unwrap();
        for (sa, sb) in a.specs.iter().zip(&b.specs) {
            for (x, y) in sa.centroid.iter().zip(sb.centroid.iter()) {
                assert!((x * 2.5 - y).abs() <= 1e-12 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn align_fixed_point() {
        // Axis-aligned, uncorrelated columns with decreasing spread.
        let z = Array2::from_shape_fn((4, 2), |(i, j)| match (i, j) {
            (0, 0) => 3.0,
            (1, 0) => -3.0,
            (2, 1) => 1.0,
            (3, 1) => -1.0,
            _ => 0.0,
        });
        let sigma = column_std(&z);
        let out = align_latent(&LatentMatrix::new(z.clone()), &sigma).unwrap().value;
        for (a, b) in out.z().iter().zip(z.iter()) {
            assert!((a.abs() - b.abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn align_decorrelates_and_rescales() {
        // Two correlated 2-D blobs.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = Array2::from_shape_fn((200, 2), |(i, _)| 0.0 + if i < 100 { 0.0 } else { 5.0 })
            + Array2::from_shape_fn((200, 2), |(_, _)| rng.random_range(-1.0..1.0));
        let mut z = z;
        for mut row in z.rows_mut() {
            row[1] += 0.8 * row[0];
        }
        let sigma_r = Array1::from(vec![2.0, 0.5]);
        let out = align_latent(&LatentMatrix::new(z), &sigma_r).unwrap().value;
        let std = column_std(out.z());
        for i in 0..2 {
            assert!((std[i] - sigma_r[i]).abs() / sigma_r[i] < 1e-6);
        }
        let centered = out.z() - &out.z().mean_axis(Axis(0)).unwrap();
        let cov = centered.column(0).dot(&centered.column(1)) / 199.0;
        assert!(cov.abs() < 1e-8, "off-diagonal covariance {cov}");
    }

    #[test]
    fn align_zeroes_degenerate_component() {
        let z = Array2::from_shape_fn((5, 2), |(i, j)| if j == 0 { i as f64 } else { 0.0 });
        let out = align_latent(&LatentMatrix::new(z), &Array1::from(vec![1.0, 1.0])).unwrap();
        assert!(out.value.z().column(1).iter().all(|v| *v == 0.0));
        assert_eq!(out.notes.len(), 1);
    }

    #[test]
    fn submetered_label_arithmetic() {
        let model = toy_model(6);
        let out = make_submetered(&config(2, 2, 2, 80), &model).unwrap().value;
        assert_eq!(out.rows(), 80);
        let classes = out.classes().unwrap();
        let clusters = out.clusters().unwrap();
        let brands = out.brands().unwrap();
        assert_eq!(classes.iter().filter(|&&c| c == 0).count(), 40);
        assert_eq!(classes.iter().filter(|&&c| c == 1).count(), 40);
        for i in 0..80 {
            assert_eq!(classes[i], clusters[i] / 2);
            assert!(brands[i] < 2);
        }
        for k in 0..4 {
            let bs: Vec<usize> = (0..80).filter(|&i| clusters[i] == k).map(|i| brands[i]).collect();
            assert!(bs.contains(&0) && bs.contains(&1));
        }
    }

    #[test]
    fn submetered_is_deterministic() {
        let model = toy_model(5);
        let a = make_submetered(&config(3, 2, 2, 90), &model).unwrap().value;
        let b = make_submetered(&config(3, 2, 2, 90), &model).unwrap().value;
        assert_eq!(a, b);
        assert!(a.z().iter().zip(b.z().iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn small_clusters_clamp_brand_count() {
        let model = toy_model(4);
        let out = make_submetered(&config(2, 1, 5, 6), &model).unwrap();
        assert!(out.notes.iter().any(|n| n.contains("clamped")));
        assert!(out.value.brands().unwrap().iter().all(|b| *b < 3));
    }
}
