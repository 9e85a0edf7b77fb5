//! Online conformal prediction by universal-portfolio coin betting.
//!
//! The core is generic over the scalar type through [`num::Real`]; the
//! aliases at the crate root fix it to `f64`.
//!
//! ```
//! use ocp_core::{run, Score, TargetLevel, UpOcp};
//!
//! let alpha = TargetLevel::new(0.1).unwrap();
//! let scores: Vec<Score> = [1.0, 0.4, 2.5, 0.8]
//!     .iter()
//!     .map(|&s| Score::new(s).unwrap())
//!     .collect();
//! let trace = run(&mut UpOcp::new(alpha), &scores);
//! assert_eq!(trace.len(), 4);
//! ```

pub mod bounds;
pub mod error;
pub mod generators;
pub mod metrics;
pub mod num;
pub mod pinball;
pub mod portfolio;
pub mod predictors;

pub use error::{OcpError, Result};
pub use num::Real;
pub use predictors::{run, OffsetSign, Predictor};

pub type TargetLevel = pinball::TargetLevel<f64>;
pub type Score = pinball::Score<f64>;
pub type Radius = pinball::Radius<f64>;
pub type Subgradient = pinball::Subgradient<f64>;
pub type RoundOutcome = pinball::RoundOutcome<f64>;
pub type Trace = pinball::Trace<f64>;
pub type GrowthEnvelope = bounds::GrowthEnvelope<f64>;

pub type UpOcp = predictors::UpOcp<f64>;
pub type Kt = predictors::Kt<f64>;
pub type SfOgd = predictors::SfOgd<f64>;
pub type Osd = predictors::Osd<f64>;
pub type DtAci = predictors::DtAci<f64>;
pub type Pid = predictors::Pid<f64>;
pub type Trivial = predictors::Trivial<f64>;
pub type AlphaCorrected<P> = predictors::AlphaCorrected<P, f64>;
