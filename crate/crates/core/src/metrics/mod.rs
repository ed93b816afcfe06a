//! Full-reference (PSNR, SSIM) and no-reference (UIQM, UCIQE) image quality
//! metrics, plus directory-level evaluation.
//!
//! Images are tensors of shape `(3, H, W)` or `(1, 3, H, W)` with values in
//! `[0, 1]`. All arithmetic is `f64`.

pub mod constants;
mod fidelity;
mod report;
mod uciqe;
mod uiqm;

pub use fidelity::{luma, psnr, ssim};
pub use report::{evaluate_dir, format_cell, EvalOptions, Metric, MetricReport, MetricRow};
pub use uciqe::{srgb_to_lab, uciqe, uciqe_components, UciqeComponents};
pub use uiqm::{uicm, uiconm, uiqm, uiqm_components, uism, UiqmComponents};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Borrowed RGB planes of one image.
#[derive(Clone, Copy, Debug)]
pub struct RgbPlanes<'a> {
    pub height: usize,
    pub width: usize,
    pub r: &'a [f32],
    pub g: &'a [f32],
    pub b: &'a [f32],
}

impl<'a> RgbPlanes<'a> {
    pub fn new(image: &'a Tensor) -> Result<Self> {
        let (h, w) = match image.shape() {
            [3, h, w] | [1, 3, h, w] => (*h, *w),
            other => {
                return Err(Error::shape(format!(
                    "expected an RGB image (3, H, W) or (1, 3, H, W), got {other:?}"
                )))
            }
        };
        if h == 0 || w == 0 {
            return Err(Error::shape("image has no pixels"));
        }
        let plane = h * w;
        let d = image.data();
        Ok(RgbPlanes {
            height: h,
            width: w,
            r: &d[..plane],
            g: &d[plane..2 * plane],
            b: &d[2 * plane..],
        })
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn channels(&self) -> [&'a [f32]; 3] {
        [self.r, self.g, self.b]
    }
}
