//! Calibration, quantification and classifier accuracy prediction for
//! binary classifiers under dataset shift, plus the adaptations that turn a
//! method for one task into a method for another.
//!
//! Every method consumes the posteriors of a fixed, already trained
//! classifier. Labeled validation posteriors play the role of the source
//! distribution; unlabeled test posteriors come from the shifted target.

pub mod bridges;
pub mod calibrate;
pub mod calmap;
pub mod cap;
pub mod data;
pub mod error;
pub mod eval;
pub mod histogram;
pub mod method;
pub mod models;
pub mod oracles;
pub mod quantify;
pub mod synth;

pub use error::{Error, Result};
