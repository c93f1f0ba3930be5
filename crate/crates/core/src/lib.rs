pub mod error;
pub mod mac;
pub mod metrics;
pub mod network;
pub mod node_stack;
pub mod output;
pub mod quadrature;
pub mod radio_phy;
pub mod scenario;
pub mod sim_engine;
pub mod sweep;
pub mod traffic_model;
pub mod verify;

pub use error::{Error, Result};
