//! Network assembly, weight storage and census.

pub mod config;
pub mod model;
pub mod store;

pub use config::{ModelConfig, SkipFusion, DEFAULT_WIDTHS};
pub use model::{
    count_flops, count_params, init_weights, param_schema, Model, Trace, SPATIAL_MULTIPLE,
};
pub use store::{StoreSource, WeightStore, FORMAT_VERSION, MAGIC};
