//! Radiometric calibration of a mosaic camera behind a microscope, and
//! least-information-loss conversion of deep images to 8 bits.
//!
//! The pipeline:
//!
//! 1. [`spectra`]: integrate each gray-filter light spectrum against the
//!    mosaic QE curves to get a [`spectra::PhotonTable`].
//! 2. [`pie`]: pick the in-focus frame of each level's z-stack by PIE.
//! 3. [`calibration`]: pair each pixel's mean level intensities with the
//!    table into a piecewise-linear curve.
//! 4. [`correction`]: convert raw frames to photon counts and 14-bit codes.
//! 5. [`lil`]: map deep images onto 8 bits without wasting codes on empty levels.
//!
//! Work is data-parallel through [`par`]; with the `parallel` feature it runs
//! on the ambient rayon pool, otherwise sequentially. Results never depend on
//! the worker count.

pub mod bayer;
pub mod calibration;
pub mod correction;
pub mod error;
pub mod image;
pub mod lil;
pub mod par;
pub mod pie;
pub mod spectra;
pub mod synth;

pub use bayer::{BayerPattern, Channel};
pub use calibration::{build_calibration, load_calibration, save_calibration, CalibrationMap, LevelImage};
pub use correction::{correct_image, quantize14, PhotonImage};
pub use error::{Error, Result};
pub use image::{CropRect, Gray16, RawImage};
pub use lil::{lil_convert, GroupMode, IntImage, LilLut, Scope};
pub use pie::{FocusRule, RenyiParams, Weighting};
pub use spectra::{PhotonTable, QeSet, Spectrum};
