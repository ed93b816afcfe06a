//! Model hyper-parameters and their canonical text form.

use serde::{Deserialize, Serialize};

use crate::blocks::{BlockConfig, MsffnFuse};
use crate::error::{Error, Result};
use crate::ssm::BbarRule;

/// How an upsampled decoder feature is merged with its encoder skip.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SkipFusion {
    /// Channel concatenation followed by a 1x1 conv back to the level width.
    #[default]
    Concat,
    Add,
}

/// Default level widths; calibrated against the parameter and MAC budgets.
pub const DEFAULT_WIDTHS: [usize; 4] = [10, 20, 40, 138];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Channel width at full resolution and at `H/2`, `H/4`, `H/8`.
    pub widths: [usize; 4],
    /// SSM state size.
    pub state: usize,
    /// SOSS inner expansion factor.
    pub expand: usize,
    pub msffn_fuse: MsffnFuse,
    pub skip_fusion: SkipFusion,
    pub bbar: BbarRule,
    pub use_soss: bool,
    pub use_ccoss: bool,
    pub use_msffn: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            widths: DEFAULT_WIDTHS,
            state: 16,
            expand: 2,
            msffn_fuse: MsffnFuse::Sum,
            skip_fusion: SkipFusion::Concat,
            bbar: BbarRule::Zoh,
            use_soss: true,
            use_ccoss: true,
            use_msffn: true,
        }
    }
}

impl ModelConfig {
    /// Widths `[c, 2c, 4c, 8c]`.
    pub fn doubling(base: usize) -> Self {
        ModelConfig {
            widths: [base, 2 * base, 4 * base, 8 * base],
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.contains(&0) {
            return Err(Error::Config(format!(
                "widths must be positive, got {:?}",
                self.widths
            )));
        }
        if self.state == 0 || self.state > 256 {
            return Err(Error::Config(format!(
                "state size must be in 1..=256, got {}",
                self.state
            )));
        }
        if self.expand == 0 {
            return Err(Error::Config("expand must be >= 1".into()));
        }
        Ok(())
    }

    pub fn block(&self) -> BlockConfig {
        BlockConfig {
            state: self.state,
            expand: self.expand,
            rule: self.bbar,
            msffn_fuse: self.msffn_fuse,
            use_soss: self.use_soss,
            use_ccoss: self.use_ccoss,
            use_msffn: self.use_msffn,
        }
    }

    /// Canonical TOML; fields in declaration order.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ModelConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}
