//! Dense neural primitives: convolution, normalization, activations, pooling
//! and resampling.

pub mod activation;
pub mod conv;
pub mod layers;
pub mod norm;
pub mod params;
pub mod pool;
pub mod resize;

pub use activation::{
    activate, flush_subnormal, relu, sigmoid, silu, softmax, softplus, Activation,
};
pub use conv::{conv2d, ConvSpec};
pub use layers::{BatchNorm, Conv2d, LayerNorm};
pub use norm::{batch_norm, layer_norm, NORM_EPS};
pub use params::{Init, ParamInfo, ParamSource, Params};
pub use pool::{pool_axis, PoolAxis};
pub use resize::{pixel_shuffle, pixel_unshuffle, resize_bilinear};
