//! The SCOSS block and its three sub-blocks.
//!
//! * [`soss`]: spatial scan over four directions, gated by a parallel branch.
//! * [`ccoss`]: coordinate pooling followed by forward/backward scans along
//!   the channel axis, yielding an attention product.
//! * [`msffn`]: three-scale convolutional feed-forward network.
//! * [`scoss`]: `Z = CCOSS(SOSS(x)) + x`, `out = MSFFN(Z) + Z`.

pub mod ccoss;
pub mod msffn;
pub mod scoss;
pub mod soss;

use serde::{Deserialize, Serialize};

use crate::ssm::BbarRule;

pub use ccoss::{ccoss_forward, CcossWeights};
pub use msffn::{msffn_forward, MsffnWeights};
pub use scoss::{scoss_forward, ScossWeights};
pub use soss::{soss_forward, SossWeights};

/// How the three MSFFN branches are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MsffnFuse {
    /// `Z1 + Z3 + Z5`.
    #[default]
    Sum,
    /// Concatenate the branches and project `3C -> C` with a 1x1 conv.
    ConcatProj,
}

/// Hyper-parameters shared by every block of a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockConfig {
    /// SSM state size `N`.
    pub state: usize,
    /// SOSS inner expansion factor.
    pub expand: usize,
    pub rule: BbarRule,
    pub msffn_fuse: MsffnFuse,
    pub use_soss: bool,
    pub use_ccoss: bool,
    pub use_msffn: bool,
}

impl Default for BlockConfig {
    fn default() -> Self {
        BlockConfig {
            state: 16,
            expand: 2,
            rule: BbarRule::Zoh,
            msffn_fuse: MsffnFuse::Sum,
            use_soss: true,
            use_ccoss: true,
            use_msffn: true,
        }
    }
}

/// Rank of the step-size projection for `channels` inner channels.
pub fn dt_rank(channels: usize) -> usize {
    channels.div_ceil(16)
}
