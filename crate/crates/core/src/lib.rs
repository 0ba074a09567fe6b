//! Explainable infrared spectral classification.
//!
//! The crate covers the whole pipeline for fingerprint-region absorbance
//! spectra: dataset handling ([`spectra`]), SNV and second-derivative
//! preprocessing plus PCA ([`preprocess`]), same-class Mixup augmentation
//! ([`augment`]), a synthetic cohort generator with planted absorption bands
//! ([`synthgen`]), the rotary sparse-attention transformer with its own
//! reverse-mode tape ([`model`]), Grad-CAM saliency and band overlap ratios
//! ([`explain`]) and cross-validated metrics ([`eval`]).

pub mod augment;
pub mod error;
pub mod eval;
pub mod explain;
pub mod model;
pub mod preprocess;
pub mod rng;
pub mod spectra;
pub mod synthgen;

pub use error::{Error, Result};
pub use spectra::{Dataset, Spectrum, WavenumberGrid};
