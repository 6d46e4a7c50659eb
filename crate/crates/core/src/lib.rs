pub mod error;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod projection;
pub mod tensor;
pub mod text;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{Activation, RngState, Tensor};
