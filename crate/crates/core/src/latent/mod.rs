//! PCA latent space: fitting, projection, reconstruction and persistence.

mod persist;
mod svd;

pub use persist::{read_model, write_model, PCAMOD_MAGIC};
pub(crate) use svd::{full_rotation, principal_axes};

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::signalio::SignatureMatrix;

pub const DEFAULT_COMPONENTS: usize = 50;
pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 0.99;

/// How many principal components to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComponentSelection {
    Count(usize),
    /// Smallest L whose cumulative explained variance reaches the threshold.
    VarianceThreshold(f64),
}

/// A fitted PCA latent space.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionModel {
    pub(crate) mean_row: Array1<f64>,
    /// L×T, rows orthonormal.
    pub(crate) w_r: Array2<f64>,
    pub(crate) sigma_r: Array1<f64>,
    pub(crate) z_min: Array1<f64>,
    pub(crate) z_max: Array1<f64>,
    pub(crate) explained_variance_ratio: Array1<f64>,
    pub(crate) sample_rate_hz: f64,
    pub(crate) samples_per_cycle: usize,
}

impl ReconstructionModel {
    pub fn mean_row(&self) -> &Array1<f64> {
        &self.mean_row
    }

    pub fn w_r(&self) -> &Array2<f64> {
        &self.w_r
    }

    pub fn sigma_r(&self) -> &Array1<f64> {
        &self.sigma_r
    }

    pub fn z_min(&self) -> &Array1<f64> {
        &self.z_min
    }

    pub fn z_max(&self) -> &Array1<f64> {
        &self.z_max
    }

    pub fn explained_variance_ratio(&self) -> &Array1<f64> {
        &self.explained_variance_ratio
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn samples_per_cycle(&self) -> usize {
        self.samples_per_cycle
    }

    /// Latent dimension L.
    pub fn components(&self) -> usize {
        self.w_r.nrows()
    }

    /// Signature length T.
    pub fn signature_len(&self) -> usize {
        self.w_r.ncols()
    }

    /// (x − mean)·W_rᵀ for raw rows.
    pub fn project_rows(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.signature_len() {
            return Err(Error::Dimension(format!(
                "input rows have {} samples, model expects {}",
                x.ncols(),
                self.signature_len()
            )));
        }
        let centered = &x - &self.mean_row;
        Ok(centered.dot(&self.w_r.t()))
    }

    /// z·W_r + mean for raw latent rows.
    pub fn reconstruct_rows(&self, z: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if z.ncols() != self.components() {
            return Err(Error::Dimension(format!(
                "latent rows have {} components, model has {}",
                z.ncols(),
                self.components()
            )));
        }
        let mut x = z.dot(&self.w_r);
        x += &self.mean_row;
        Ok(x)
    }
}

/// Latent codes with optional cluster, class and brand labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentMatrix {
    z: Array2<f64>,
    clusters: Option<Vec<usize>>,
    classes: Option<Vec<usize>>,
    brands: Option<Vec<usize>>,
}

impl LatentMatrix {
    pub fn new(z: Array2<f64>) -> Self {
        Self {
            z,
            clusters: None,
            classes: None,
            brands: None,
        }
    }

    fn check_len(&self, what: &str, labels: &[usize]) -> Result<()> {
        if labels.len() != self.rows() {
            return Err(Error::Dimension(format!(
                "{what} labels have length {}, latent matrix has {} rows",
                labels.len(),
                self.rows()
            )));
        }
        Ok(())
    }

    pub fn with_clusters(mut self, clusters: Vec<usize>) -> Result<Self> {
        self.check_len("cluster", &clusters)?;
        self.clusters = Some(clusters);
        Ok(self)
    }

    pub fn with_classes(mut self, classes: Vec<usize>) -> Result<Self> {
        self.check_len("class", &classes)?;
        self.classes = Some(classes);
        Ok(self)
    }

    pub fn with_brands(mut self, brands: Vec<usize>) -> Result<Self> {
        self.check_len("brand", &brands)?;
        self.brands = Some(brands);
        Ok(self)
    }

    pub fn z(&self) -> &Array2<f64> {
        &self.z
    }

    pub(crate) fn z_mut(&mut self) -> &mut Array2<f64> {
        &mut self.z
    }

    pub fn rows(&self) -> usize {
        self.z.nrows()
    }

    pub fn components(&self) -> usize {
        self.z.ncols()
    }

    pub fn clusters(&self) -> Option<&[usize]> {
        self.clusters.as_deref()
    }

    pub fn classes(&self) -> Option<&[usize]> {
        self.classes.as_deref()
    }

    pub fn brands(&self) -> Option<&[usize]> {
        self.brands.as_deref()
    }
}

/// Fits the latent space on a signature matrix.
pub fn fit_pca(x: &SignatureMatrix, selection: ComponentSelection) -> Result<ReconstructionModel> {
    let (n, t) = x.data().dim();
    if n < 2 {
        return Err(Error::Validation(format!("PCA needs at least 2 rows, got {n}")));
    }
    if x.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("PCA input has non-finite entries".into()));
    }
    if let ComponentSelection::Count(l) = selection {
        if l == 0 || l > n.min(t) {
            return Err(Error::Dimension(format!(
                "requested {l} components, at most min(N, T) = {} are available",
                n.min(t)
            )));
        }
    }
    let axes = principal_axes(x.data().view(), selection)?;
    let z = (x.data() - &axes.mean).dot(&axes.components.t());
    let sigma_r = column_std(&z);
    let z_min = z.fold_axis(Axis(0), f64::INFINITY, |a, b| a.min(*b));
    let z_max = z.fold_axis(Axis(0), f64::NEG_INFINITY, |a, b| a.max(*b));
    Ok(ReconstructionModel {
        mean_row: axes.mean,
        w_r: axes.components,
        sigma_r,
        z_min,
        z_max,
        explained_variance_ratio: axes.explained_variance_ratio,
        sample_rate_hz: x.sample_rate_hz(),
        samples_per_cycle: x.samples_per_cycle(),
    })
}

/// Sample standard deviation (N − 1 denominator) of each column.
pub(crate) fn column_std(z: &Array2<f64>) -> Array1<f64> {
    let n = z.nrows();
    if n < 2 {
        return Array1::zeros(z.ncols());
    }
    let mean = z.mean_axis(Axis(0)).expect("non-empty");
    let mut var = Array1::<f64>::zeros(z.ncols());
    for row in z.rows() {
        for ((acc, v), m) in var.iter_mut().zip(row.iter()).zip(mean.iter()) {
            let d = v - m;
            *acc += d * d;
        }
    }
    var.mapv(|s| (s / (n - 1) as f64).sqrt())
}

pub fn project(model: &ReconstructionModel, x: &SignatureMatrix) -> Result<LatentMatrix> {
    Ok(LatentMatrix::new(model.project_rows(x.data().view())?))
}

pub fn reconstruct(model: &ReconstructionModel, z: &LatentMatrix) -> Result<SignatureMatrix> {
    let x = model.reconstruct_rows(z.z().view())?;
    Ok(SignatureMatrix::from_parts_unchecked(
        x,
        model.sample_rate_hz,
        model.samples_per_cycle,
    ))
}

/// Mean absolute error over all N·T entries.
pub fn reconstruction_mae(x: &SignatureMatrix, x_hat: &SignatureMatrix) -> Result<f64> {
    if x.data().dim() != x_hat.data().dim() {
        return Err(Error::Dimension(format!(
            "shapes differ: {:?} vs {:?}",
            x.data().dim(),
            x_hat.data().dim()
        )));
    }
    let total: f64 = x
        .data()
        .iter()
        .zip(x_hat.data().iter())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(total / x.data().len() as f64)
}
