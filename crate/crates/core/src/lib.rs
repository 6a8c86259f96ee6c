pub mod aggregate;
pub mod benchmark;
pub mod edge_index;
pub mod error;
pub mod explain;
pub mod hetero;
pub mod message_passing;
pub mod optim;
pub mod sampler;
pub mod scalar;
pub mod store;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use scalar::{DType, Scalar};
pub use tensor::Tensor;

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type GnnModel32 = message_passing::GnnModel<f32>;
pub type GnnModel64 = message_passing::GnnModel<f64>;
pub type HeteroGraph32 = hetero::HeteroGraph<f32>;
pub type HeteroGraph64 = hetero::HeteroGraph<f64>;
