//! Classical layers with hand-written backward passes.

pub mod activation;
pub mod adam;
pub mod cnn;
pub mod conv;
pub mod dense;
pub mod loss;

pub use activation::{maxpool2d, relu, relu_backward, MaxPool};
pub use adam::{adam_step, AdamState};
pub use cnn::{glorot_uniform, CnnSpec, CnnTrace, ConvBlockSpec};
pub use conv::{conv2d_backward, conv2d_forward, ConvGrads};
pub use dense::{dense_backward, dense_forward, DenseGrads};
pub use loss::{argmax, softmax_cross_entropy};
