//! Photodetection models for a detector immersed in a real zero-point field.
//!
//! The crate covers two detector families and the machinery around them:
//!
//! * [`fixed_window`]: a count is decided by the energy collected in a fixed
//!   detection window, with Gaussian filtered intensity and a linear
//!   response above a threshold.
//! * [`first_passage`]: a count fires when the accumulated, mean-subtracted
//!   energy first reaches a threshold. Closed-form heuristic rates are audited
//!   by a Monte Carlo first-passage simulator.
//!
//! Supporting modules provide the Planck spectrum with its zero-point term
//! ([`spectrum`]), reproducible noise processes ([`noise`]), a two-detector
//! coincidence simulator and the fixed-window coincidence bound
//! ([`coincidence`]), rate-curve fitting ([`fit`]) and the `zpfdet`
//! command-line front end ([`cli`]).
//!
//! ```
//! use zpfdet::first_passage::FirstPassageDetector;
//!
//! let det = FirstPassageDetector::new(1.0, 1.0).unwrap();
//! let rate = det.rate_analytic(1.0).unwrap();
//! assert!((rate - 2.618034).abs() < 1e-6);
//! ```

pub mod cli;
pub mod coincidence;
pub mod curve;
pub mod error;
pub mod first_passage;
pub mod fit;
pub mod fixed_window;
pub mod noise;
pub mod quad;
pub mod spectrum;

pub use error::{Error, Result};
