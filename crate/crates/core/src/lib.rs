//! Inverse-probability decoding with IQR-based subset selection, the filters
//! it builds on, divergence bounds, text-diversity metrics and a small n-gram
//! model to run it all against.

pub mod bounds;
pub mod cli;
pub mod dist;
pub mod error;
pub mod filters;
pub mod iqr_ip;
pub mod lm;
pub mod metrics;
pub mod sampler;

pub use dist::{normalize, sample_token, Distribution, RngState, TokenId};
pub use error::{Error, Result};
pub use iqr_ip::{iqr_ip_step, iqr_ip_trace, iqr_partition, inverse_permute, Band, IqrPartition, SamplerConfig};
pub use sampler::{decode_step, Method};
