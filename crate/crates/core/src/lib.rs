//! Benchmark toolkit for local image descriptors.
//!
//! The pipeline synthesizes planar scenes with exact ground-truth
//! homographies, detects and perturbs regions under three detector-noise
//! regimes, rectifies them into 65×65 patches, and scores descriptors on
//! patch verification, image matching and patch retrieval using average
//! precision with ignore labels.
//!
//! Module map:
//! - [`geometry`]: homographies, region frames, detector noise, region overlap.
//! - [`image`]: grayscale images, bilinear sampling, blurring.
//! - [`synthesis`]: textures, viewpoint/illumination sequences, region detection.
//! - [`patch`]: orientation assignment, patch rectification, corpus construction.
//! - [`descriptors`]: MStd, Resz, SIFT, RootSIFT, BRIEF and their distances.
//! - [`postproc`]: ZCA whitening with clipped eigenvalues, power law, L2.
//! - [`metrics`]: precision, recall and (truncated) average precision.
//! - [`tasks`]: verification, matching and retrieval protocols.
//! - [`io`]: PGM strips, corpus directories, result CSVs.
//! - [`config`] and [`pipeline`]: run configuration and the batch commands.

pub mod config;
pub mod descriptors;
pub mod error;
pub mod geometry;
pub mod image;
pub mod io;
pub mod metrics;
pub mod patch;
pub mod pipeline;
pub mod postproc;
pub mod rng;
pub mod synthesis;
pub mod tasks;

pub use error::{Error, Result};
