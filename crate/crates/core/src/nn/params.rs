//! Named parameter declaration shared by initialization, loading and census.
//!
//! Every layer declares its tensors through a [`Params`] scope. The same
//! declaration code runs against different [`ParamSource`]s: a recorder that
//! only collects the schema, a seeded initializer, or a weight store.

use crate::error::Result;
use crate::rng::Rng;
use crate::tensor::Tensor;

/// How a parameter is initialized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Uniform in `±sqrt(6 / fan_in)`.
    KaimingUniform {
        fan_in: usize,
    },
    Zeros,
    Ones,
    /// `ln(n)` for `n = 1..=N` along the last axis, i.e. `A_n = -n`.
    SsmALog,
    /// Inverse softplus of a step drawn log-uniformly from `[min, max]`.
    DtBias {
        min: f32,
        max: f32,
    },
    /// Inference-only statistics; stored but not learnable.
    RunningMean,
    RunningVar,
}

impl Init {
    pub fn is_buffer(&self) -> bool {
        matches!(self, Init::RunningMean | Init::RunningVar)
    }
}

pub fn kaiming_bound(fan_in: usize) -> f32 {
    (6.0 / fan_in as f64).sqrt() as f32
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ParamInfo {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

pub trait ParamSource {
    fn fetch(&mut self, name: &str, shape: &[usize], init: Init) -> Result<Tensor>;
}

/// A prefix scope over a [`ParamSource`]; names are joined with `.`.
pub struct Params<'a> {
    src: &'a mut dyn ParamSource,
    prefix: String,
}

impl<'a> Params<'a> {
    pub fn new(src: &'a mut dyn ParamSource) -> Self {
        Params {
            src,
            prefix: String::new(),
        }
    }

    fn join(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        }
    }

    pub fn scope(&mut self, name: &str) -> Params<'_> {
        let prefix = self.join(name);
        Params {
            src: &mut *self.src,
            prefix,
        }
    }

    pub fn get(&mut self, name: &str, shape: &[usize], init: Init) -> Result<Tensor> {
        let full = self.join(name);
        self.src.fetch(&full, shape, init)
    }
}

/// Collects the schema; hands out zero tensors.
#[derive(Default)]
pub struct Recorder {
    pub params: Vec<ParamInfo>,
}

impl ParamSource for Recorder {
    fn fetch(&mut self, name: &str, shape: &[usize], init: Init) -> Result<Tensor> {
        self.params.push(ParamInfo {
            name: name.to_string(),
            shape: shape.to_vec(),
            init,
        });
        Ok(Tensor::zeros(shape))
    }
}

/// Draws fresh values for every declared tensor, in declaration order.
pub struct Initializer {
    rng: Rng,
    pub produced: Vec<(String, Tensor)>,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Initializer {
            rng: Rng::new(seed),
            produced: Vec::new(),
        }
    }
}

impl ParamSource for Initializer {
    fn fetch(&mut self, name: &str, shape: &[usize], init: Init) -> Result<Tensor> {
        let rng = &mut self.rng;
        let t = match init {
            Init::KaimingUniform { fan_in } => {
                let b = kaiming_bound(fan_in);
                Tensor::from_fn(shape, |_| rng.uniform(-b, b))
            }
            Init::Zeros | Init::RunningMean => Tensor::zeros(shape),
            Init::Ones | Init::RunningVar => Tensor::full(shape, 1.0),
            Init::SsmALog => {
                let n = *shape.last().unwrap_or(&1);
                Tensor::from_fn(shape, |i| ((i % n + 1) as f32).ln())
            }
            Init::DtBias { min, max } => {
                let (lo, hi) = ((min as f64).ln(), (max as f64).ln());
                Tensor::from_fn(shape, |_| {
                    let dt = (lo + (hi - lo) * rng.next_f64()).exp();
                    // softplus^-1(dt) = dt + ln(1 - e^-dt)
                    (dt + (-(-dt).exp_m1()).ln()) as f32
                })
            }
        };
        self.produced.push((name.to_string(), t.clone()));
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::activation::softplus;

    #[test]
    fn bound_for_fan_in_six() {
        assert_eq!(kaiming_bound(6), 1.0);
    }

    #[test]
    fn scoped_names() {
        let mut rec = Recorder::default();
        {
            let mut p = Params::new(&mut rec);
            let mut enc = p.scope("enc1");
            let mut soss = enc.scope("soss");
            soss.get("weight", &[2, 2], Init::Zeros).unwrap();
        }
        assert_eq!(rec.params[0].name, "enc1.soss.weight");
    }

    #[test]
    fn special_inits() {
        let mut init = Initializer::new(4);
        let a = init.fetch("a", &[2, 4], Init::SsmALog).unwrap();
        assert_eq!(a.data()[0], 0.0);
        assert!((a.data()[7] - 4f32.ln()).abs() < 1e-7);
        let dt = init
            .fetch(
                "dt",
                &[256],
                Init::DtBias {
                    min: 1e-3,
                    max: 1e-1,
                },
            )
            .unwrap();
        for &b in dt.data() {
            let step = softplus(b);
            assert!((0.99e-3..=1.01e-1).contains(&step), "{step}");
        }
        let w = init
            .fetch("w", &[1000], Init::KaimingUniform { fan_in: 24 })
            .unwrap();
        assert!(w.data().iter().all(|v| v.abs() <= 0.5));
    }
}
