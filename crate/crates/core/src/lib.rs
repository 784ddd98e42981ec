//! Numerical geometry of the space of light rays of a Lorentzian
//! space-time: null geodesics, Jacobi fields, the contact structure,
//! Legendrian isotopies of skies and celestial curves.

pub mod catalog;
pub mod checks;
pub mod contact;
pub mod curvature;
pub mod curve;
pub mod error;
pub mod geodesic;
pub mod isotopy;
pub mod jacobi;
pub mod metric;
pub mod ode;
pub mod rays;
pub mod sphere;
pub mod table;
pub mod variation;

pub use error::{Error, Result};
pub use metric::{Event, Metric, MetricRef, TangentVector};
pub use ode::Tolerances;
