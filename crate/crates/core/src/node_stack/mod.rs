//! Sensor application and gradient routing.

mod app;
mod routing;

pub use app::*;
pub use routing::{build_gradient, GradientTable};
