//! Joint multi-object filtering and sensor-state estimation with
//! single-cluster point processes.
//!
//! A parent particle filter over the sensor state carries, per particle, a
//! daughter multi-object filter (PHD, second-order PHD or CPHD in
//! Gaussian-mixture form). Particles are weighted by a multi-object
//! likelihood: either the closed form matching the daughter filter or an
//! association-based alternative.

pub mod assoc;
pub mod cardinality;
pub mod error;
pub mod filters;
pub mod gm;
pub mod harness;
pub mod numeric;
pub mod oracle;
pub mod scenario;
pub mod smc;

pub use error::{Error, Result};
