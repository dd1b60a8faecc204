//! Synthetic high-frequency appliance current signatures for NILM research.
//!
//! The pipeline learns a PCA latent space from submetered current waveforms,
//! places Gaussian blobs in that space to model appliance classes, operating
//! modes and brands, decodes them back to 30 kHz waveforms and sums them into
//! labeled aggregate scenarios. Around it sit a three-part fidelity metric
//! (α-precision, β-recall, authenticity), the classical NILM feature set and
//! two baseline regressors with the generalization experiments built on them.
//!
//! Module map:
//!
//! - [`signalio`]: waveforms, the voltage reference, cycle alignment,
//!   windowing and the SIGMAT/CSV file formats.
//! - [`latent`]: PCA fit, projection, reconstruction, PCAMOD persistence.
//! - [`genmodel`]: blob sampling, latent alignment, k-means brand labels.
//! - [`aggregator`]: mirroring, activation, aggregation, power shares,
//!   splits and the end-to-end [`aggregator::make_datasets`] pipeline.
//! - [`metrics3d`]: α-precision / β-recall / authenticity.
//! - [`features`]: form factor, temporal centroid, admittance, wavelet
//!   energy, VI trajectory, phase shift.
//! - [`bench`]: KNN and regression-tree baselines, R², experiment drivers.
//! - [`config`]: the flat key=value run configuration.
//! - [`corpus`]: a pseudo-real harmonic-series corpus for self-contained use.

pub mod aggregator;
pub mod bench;
pub mod config;
pub mod corpus;
pub mod error;
pub mod features;
pub mod genmodel;
pub mod latent;
pub mod metrics3d;
pub mod rng;
pub mod signalio;

pub use aggregator::{ActivationMatrix, LabeledDataset, SplitMode, SplitPair};
pub use config::RunConfig;
pub use error::{Error, Noted, Result};
pub use genmodel::{BlobSpec, GenerationConfig, LatentBounds};
pub use latent::{LatentMatrix, ReconstructionModel};
pub use metrics3d::{EmbeddedCloud, MetricReport};
pub use signalio::{SignatureMatrix, VoltageReference, Waveform};
