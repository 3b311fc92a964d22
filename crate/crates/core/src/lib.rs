pub mod bus;
pub mod data;
pub mod downstream;
pub mod error;
pub mod frl;
pub mod lkt;
pub mod numerics;
pub mod orchestrator;

pub use error::{Error, Result};
