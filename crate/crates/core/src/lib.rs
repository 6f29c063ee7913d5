//! Marginal modelling, vine copulas and one-step-ahead forecasting for
//! heterogeneous daily time series.

pub mod copulas;
pub mod dataio;
pub mod error;
pub mod forecast;
pub mod marginals;
pub mod numeric;
pub mod sentiment;
pub mod tsmodels;
pub mod vine;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Scalar types accepted by the generic forecast-evaluation routines.
pub trait Real: num_traits::Float + num_traits::FromPrimitive + std::fmt::Debug {}

impl<T> Real for T where T: num_traits::Float + num_traits::FromPrimitive + std::fmt::Debug {}
