//! Every constant used by the metrics, with its source.

/// Rec. 601 luma weights for R, G, B.
pub const LUMA_601: [f64; 3] = [0.299, 0.587, 0.114];

/// SSIM (Wang, Bovik, Sheikh and Simoncelli, IEEE TIP 2004).
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
/// Dynamic range of images in `[0, 1]`.
pub const SSIM_RANGE: f64 = 1.0;

/// UIQM weights (Panetta, Gao and Agaian, IEEE JOE 2016).
pub const UIQM_C1: f64 = 0.0282;
pub const UIQM_C2: f64 = 0.2953;
pub const UIQM_C3: f64 = 3.5753;
/// UICM colourfulness weights on the trimmed statistics.
pub const UICM_MEAN_WEIGHT: f64 = -0.0268;
pub const UICM_SPREAD_WEIGHT: f64 = 0.1586;
/// Fraction trimmed from each tail of the sorted opponent values.
pub const UICM_TRIM: f64 = 0.1;
/// Block edge for the EME sharpness and AMEE contrast measures.
pub const UIQM_BLOCK: usize = 8;
/// Channel weights combining per-channel EME into UISM.
pub const UISM_CHANNEL_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];
/// UIQM operates on 8-bit intensities.
pub const UIQM_SCALE: f64 = 255.0;

/// UCIQE weights (Yang and Sowmya, IEEE TIP 2015).
pub const UCIQE_C1: f64 = 0.4680;
pub const UCIQE_C2: f64 = 0.2745;
pub const UCIQE_C3: f64 = 0.2576;
/// Percentiles bounding the luminance contrast.
pub const UCIQE_LOW_PERCENTILE: f64 = 0.01;
pub const UCIQE_HIGH_PERCENTILE: f64 = 0.99;
/// L, a and b are divided by this before the statistics.
pub const UCIQE_LAB_SCALE: f64 = 100.0;

/// Linear sRGB to CIE XYZ, D65 (IEC 61966-2-1).
pub const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];
/// CIE Lab constants: `epsilon = (6/29)^3`, `kappa = (29/3)^3`.
pub const LAB_EPSILON: f64 = 216.0 / 24_389.0;
pub const LAB_KAPPA: f64 = 24_389.0 / 27.0;
