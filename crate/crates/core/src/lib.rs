//! Fisheye-aware block-matching motion estimation.
//!
//! Blocks of a fisheye frame are projected to perspective coordinates through
//! a radial lens model, shifted there by each motion vector candidate, and
//! re-projected into the fisheye image to fetch the prediction. A hybrid mode
//! picks, per block, whichever of fisheye or plain translational matching
//! gives the lower sum of squared differences.
//!
//! Module map:
//!
//! * [`projection`]: lens profiles, inverse lookup, fisheye/perspective transforms
//! * [`search`]: full-search block matching and the hybrid combiner
//! * [`compensate`]: prediction frames and decision masks
//! * [`metrics`]: round-region PSNR and sequence reports
//! * [`synth`]: ground-truth fisheye sequences of a translating plane
//! * [`calib`]: polynomial fitting and profile files

pub mod calib;
pub mod cli;
pub mod compensate;
mod error;
pub mod frame;
pub mod manifest;
pub mod metrics;
pub mod par;
pub mod pnm;
pub mod projection;
pub mod search;
pub mod synth;

pub use error::{Error, Result};
pub use frame::{Frame, InterpolatedRef};
pub use par::Parallelism;
pub use projection::{CalibrationProfile, LensModel, RadialModel};
pub use search::{Method, MotionField, MotionVector, SearchConfig};
