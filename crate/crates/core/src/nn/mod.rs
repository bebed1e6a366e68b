//! Feedforward networks, the differential network and their gradients.

mod checkpoint;
mod dnn;
mod mlp;
mod params;

pub use checkpoint::Checkpoint;
pub use dnn::{dnn_simulate, DnnDocument, DnnModel, InputTransform};
pub use mlp::Mlp;
pub use params::{init_params, ParamBlock, ParamShape, ParamVector};
pub(crate) use params::mean_abs;
