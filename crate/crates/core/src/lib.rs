//! Spatial sound-scene synthesis and SELD evaluation toolkit.
//!
//! The crate is organised around the pipeline it implements:
//!
//! * [`model`]: shared domain types (directions, events, scene scripts, label frames).
//! * [`spatial`]: layer planning, spatial assignment, convolutional rendering,
//!   anechoic array responses and scene mixing at a target SNR.
//! * [`features`]: STFT, log-mel, FOA intensity vectors and GCC-PHAT.
//! * [`accdoa`]: activity-coupled Cartesian DOA target coding.
//! * [`metrics`]: location-aware detection metrics, class-dependent
//!   localization metrics and rank aggregation.
//! * [`dataio`]: WAV, metadata CSV, IR bank containers, tensor dumps, configs.
//! * [`oracle`]: degraded-oracle predictor that stands in for a trained model.
//! * [`cli`]: the batch entry points behind the `seldkit` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accdoa;
pub mod assignment;
pub mod audio;
pub mod cli;
pub mod dataio;
pub mod features;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod spatial;

pub use model::{ClassSet, Doa, LabelEntry, LabelFrameSet, SceneEvent, SceneScript};

/// Sample rate shared by every recording, sample and impulse response.
pub const SAMPLE_RATE: u32 = 24_000;

/// Speed of sound used for distance delays, in m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;
