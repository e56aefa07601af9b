//! Biomechanical gait analysis from continuous-wave radar micro-Doppler
//! signatures.
//!
//! A continuous-wave radar observing a person on a treadmill receives echoes
//! from every moving body part. Each part contributes a Doppler shift
//! proportional to its radial velocity, and the short-time Fourier transform
//! of the complex baseband signal (the micro-Doppler signature) exposes the
//! periodic velocity patterns of the gait. This crate turns such recordings
//! into eleven spatio-temporal and kinematic gait parameters and compares
//! them against marker-based motion capture and force-plate references.
//!
//! The processing chain:
//!
//! 1. [`signal`] — I/Q decimation, spectrogram computation, Doppler/velocity
//!    conversion.
//! 2. [`envelope`] — adaptive noise thresholding, morphological cleanup of
//!    the binarized signature and extraction of velocity envelopes for the
//!    overall signature as well as toe, ankle and knee components.
//! 3. [`reference`] — ground-reaction-force event detection (heel strike,
//!    toe off) and motion-capture marker processing (filtering, radial
//!    velocity projection).
//! 4. [`sync`] — cross-correlation lag estimation, clock-drift fitting and
//!    resampling so radar and reference share one time base.
//! 5. [`gait`] — gait-cycle segmentation, cycle averaging and parameter
//!    extraction in both domains.
//! 6. [`stats`] — Wilcoxon signed-rank tests with Benjamini-Hochberg
//!    correction and distribution-free median confidence intervals for the
//!    radar/reference agreement report.
//! 7. [`synth`] — a parametric gait simulator (kinematics, radar echoes,
//!    ground reaction forces) with exact ground truth, used as the test
//!    oracle and as a data generator for experiments.
//!
//! File formats shared by the batch CLI live in [`io`].

pub mod envelope;
pub mod error;
pub mod filter;
pub mod gait;
pub mod io;
pub mod morph;
pub mod reference;
pub mod signal;
pub mod stats;
pub mod sync;
pub mod synth;

pub use error::{Error, Result};
