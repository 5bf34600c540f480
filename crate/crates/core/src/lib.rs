//! Glaucoma detection from circumpapillary OCT B-scans.
//!
//! Hand-crafted descriptors (RNFL thickness histogram, GLCM statistics, LBPV
//! histograms, directional Hurst exponents, demographics) feed a statistical
//! feature selector and a small MLP. A hybrid mode concatenates externally
//! supplied (or stand-in) image embeddings before selection.

pub mod classifier;
pub mod data;
pub mod error;
pub mod fractal;
pub mod pipeline;
pub mod selection;
pub mod stats;
pub mod structural;
pub mod synth;
pub mod texture;

pub use error::{Error, ErrorCategory, Result};
