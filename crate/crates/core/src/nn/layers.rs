//! Parameterized layers built from a [`Params`] scope.

use super::conv::{conv2d, ConvSpec};
use super::norm::{batch_norm, layer_norm};
use super::params::{Init, Params};
use crate::error::Result;
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct Conv2d {
    pub spec: ConvSpec,
    pub weight: Tensor,
    pub bias: Option<Tensor>,
}

impl Conv2d {
    pub fn build(p: &mut Params, name: &str, spec: ConvSpec) -> Result<Self> {
        spec.validate()?;
        let mut s = p.scope(name);
        let weight = s.get(
            "weight",
            &spec.weight_shape(),
            Init::KaimingUniform {
                fan_in: spec.fan_in(),
            },
        )?;
        let bias = if spec.bias {
            Some(s.get("bias", &[spec.out_channels], Init::Zeros)?)
        } else {
            None
        };
        Ok(Conv2d { spec, weight, bias })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        conv2d(x, &self.spec, &self.weight, self.bias.as_ref())
    }
}

#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
}

impl LayerNorm {
    pub fn build(p: &mut Params, name: &str, channels: usize) -> Result<Self> {
        let mut s = p.scope(name);
        Ok(LayerNorm {
            gamma: s.get("gamma", &[channels], Init::Ones)?,
            beta: s.get("beta", &[channels], Init::Zeros)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        layer_norm(x, &self.gamma, &self.beta)
    }
}

#[derive(Clone, Debug)]
pub struct BatchNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
}

impl BatchNorm {
    pub fn build(p: &mut Params, name: &str, channels: usize) -> Result<Self> {
        let mut s = p.scope(name);
        Ok(BatchNorm {
            gamma: s.get("gamma", &[channels], Init::Ones)?,
            beta: s.get("beta", &[channels], Init::Zeros)?,
            running_mean: s.get("running_mean", &[channels], Init::RunningMean)?,
            running_var: s.get("running_var", &[channels], Init::RunningVar)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        batch_norm(
            x,
            &self.gamma,
            &self.beta,
            &self.running_mean,
            &self.running_var,
        )
    }
}
