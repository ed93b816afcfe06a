//! 8-bit RGB image files (PNG and binary PPM) and size policies.
//!
//! Pixels load as `v / 255` into a `(1, 3, H, W)` tensor and store as
//! `round(v * 255)` clamped to `0..=255`.

use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::resize_bilinear;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    Ppm,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("png") => Ok(ImageFormat::Png),
            Some("ppm") => Ok(ImageFormat::Ppm),
            _ => Err(Error::Image(format!(
                "{}: unsupported extension (expected .png or .ppm)",
                path.display()
            ))),
        }
    }
}

/// Interleaved 8-bit RGB.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rgb8 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Rgb8 {
    pub fn to_tensor(&self) -> Tensor {
        let plane = self.width * self.height;
        Tensor::from_fn(&[1, 3, self.height, self.width], |i| {
            let (c, p) = (i / plane, i % plane);
            self.data[p * 3 + c] as f32 / 255.0
        })
    }

    /// Accepts `(3, H, W)` or `(1, 3, H, W)`.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let (h, w) = match t.shape() {
            [3, h, w] | [1, 3, h, w] => (*h, *w),
            other => {
                return Err(Error::shape(format!(
                    "expected one RGB image (1, 3, H, W), got {other:?}"
                )))
            }
        };
        let plane = h * w;
        let d = t.data();
        let mut data = vec![0u8; plane * 3];
        for p in 0..plane {
            for c in 0..3 {
                data[p * 3 + c] = to_u8(d[c * plane + p]);
            }
        }
        Ok(Rgb8 {
            width: w,
            height: h,
            data,
        })
    }
}

/// `round(v * 255)` clamped; NaN maps to 0.
pub fn to_u8(v: f32) -> u8 {
    let s = (v * 255.0).round();
    if s.is_nan() {
        0
    } else {
        s.clamp(0.0, 255.0) as u8
    }
}

pub fn decode_png(bytes: &[u8]) -> Result<Rgb8> {
    let bad = |e: png::DecodingError| Error::Image(format!("png: {e}"));
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder.read_info().map_err(bad)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Image("png: image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(bad)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => {
            return Err(Error::Image("png: palette was not expanded".into()))
        }
    };
    let mut data = Vec::with_capacity(w * h * 3);
    for row in buf.chunks(info.line_size).take(h) {
        for px in row[..w * channels].chunks(channels) {
            match channels {
                1 | 2 => data.extend_from_slice(&[px[0]; 3]),
                _ => data.extend_from_slice(&px[..3]),
            }
        }
    }
    Ok(Rgb8 {
        width: w,
        height: h,
        data,
    })
}

pub fn encode_png(img: &Rgb8) -> Result<Vec<u8>> {
    let bad = |e: png::EncodingError| Error::Image(format!("png: {e}"));
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(bad)?;
        writer.write_image_data(&img.data).map_err(bad)?;
        writer.finish().map_err(bad)?;
    }
    Ok(out)
}

/// Binary PPM with `maxval` 255.
pub fn decode_ppm(bytes: &[u8]) -> Result<Rgb8> {
    let bad = |m: &str| Error::Image(format!("ppm: {m}"));
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(bad("truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            pos += 1;
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P6" {
        return Err(bad("not a binary PPM (P6)"));
    }
    let mut number = || -> Result<usize> {
        token()?
            .parse()
            .map_err(|_| bad("header field is not a number"))
    };
    let (w, h, maxval) = (number()?, number()?, number()?);
    if maxval != 255 {
        return Err(bad(&format!("maxval {maxval} unsupported (expected 255)")));
    }
    // exactly one whitespace byte separates the header from the raster
    let start = pos + 1;
    let len = w * h * 3;
    let data = bytes
        .get(start..start + len)
        .ok_or_else(|| bad("truncated raster"))?
        .to_vec();
    Ok(Rgb8 {
        width: w,
        height: h,
        data,
    })
}

pub fn encode_ppm(img: &Rgb8) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn read_rgb8(path: &Path) -> Result<Rgb8> {
    let format = ImageFormat::from_path(path)?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = match format {
        ImageFormat::Png => decode_png(&bytes),
        ImageFormat::Ppm => decode_ppm(&bytes),
    }
    .map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
    if img.width == 0 || img.height == 0 {
        return Err(Error::Image(format!("{}: image is empty", path.display())));
    }
    Ok(img)
}

/// Reads an image as a `(1, 3, H, W)` tensor in `[0, 1]`.
pub fn read_image(path: &Path) -> Result<Tensor> {
    Ok(read_rgb8(path)?.to_tensor())
}

/// Writes `(1, 3, H, W)` values in `[0, 1]`; the format follows the extension.
pub fn write_image(path: &Path, image: &Tensor) -> Result<()> {
    let img = Rgb8::from_tensor(image)?;
    let bytes = match ImageFormat::from_path(path)? {
        ImageFormat::Png => encode_png(&img)?,
        ImageFormat::Ppm => encode_ppm(&img),
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Mirror index without repeating the edge sample (`..., 2, 1, 0, 1, 2, ...`).
fn reflect(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let k = i % period;
    if k < n {
        k
    } else {
        period - k
    }
}

/// Pads the bottom and right edges by reflection up to the next multiple of
/// `multiple`. Returns the padded batch.
pub fn pad_reflect(image: &Tensor, multiple: usize) -> Result<Tensor> {
    let (n, c, h, w) = image.dims4()?;
    let ph = h.div_ceil(multiple) * multiple;
    let pw = w.div_ceil(multiple) * multiple;
    if (ph, pw) == (h, w) {
        return Ok(image.clone());
    }
    let src = image.data();
    let mut out = Vec::with_capacity(n * c * ph * pw);
    for plane in src.chunks(h * w) {
        for r in 0..ph {
            let row = &plane[reflect(r, h) * w..][..w];
            out.extend((0..pw).map(|col| row[reflect(col, w)]));
        }
    }
    Tensor::new(&[n, c, ph, pw], out)
}

/// Top-left `h x w` window of every plane.
pub fn crop(image: &Tensor, h: usize, w: usize) -> Result<Tensor> {
    let (n, c, ih, iw) = image.dims4()?;
    if h > ih || w > iw {
        return Err(Error::shape(format!(
            "crop {h}x{w} exceeds image {ih}x{iw}"
        )));
    }
    let mut out = Vec::with_capacity(n * c * h * w);
    for plane in image.data().chunks(ih * iw) {
        for r in 0..h {
            out.extend_from_slice(&plane[r * iw..r * iw + w]);
        }
    }
    Tensor::new(&[n, c, h, w], out)
}

/// How `enhance` brings an arbitrary image to a size the network accepts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SizePolicy {
    /// Reflect-pad to a multiple of 8, then crop the result back.
    #[default]
    Pad8,
    /// Bilinear resize to 256x256, then resize the result back.
    Resize256,
    /// Use the image as is; sizes must already be multiples of 8.
    Exact,
}

pub const RESIZE_SIDE: usize = 256;

/// Applies `policy`, runs `f`, and restores the original size.
pub fn with_size_policy(
    image: &Tensor,
    policy: SizePolicy,
    multiple: usize,
    f: impl FnOnce(&Tensor) -> Result<Tensor>,
) -> Result<Tensor> {
    let (_, _, h, w) = image.dims4()?;
    match policy {
        SizePolicy::Pad8 => crop(&f(&pad_reflect(image, multiple)?)?, h, w),
        SizePolicy::Resize256 => {
            let out = f(&resize_bilinear(image, RESIZE_SIDE, RESIZE_SIDE)?)?;
            resize_bilinear(&out, h, w)
        }
        SizePolicy::Exact => f(image),
    }
}
