//! Prosumage households and power-sector dispatch in market equilibrium.

pub mod dispatch;
pub mod equilibrium;
pub mod error;
pub mod household;
pub mod inputs;
pub mod kkt;
pub mod lp;
pub mod metrics;
pub mod presets;
pub mod scenario;
pub mod synthetic;

pub use error::{Error, Result};
