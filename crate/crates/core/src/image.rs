//! Grayscale float images with bilinear sampling.

use crate::error::{Error, Result};

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter("image dimensions must be positive".into()));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                found: data.len(),
            });
        }
        Ok(Image { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Image {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Image { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    #[inline]
    fn lerp_at(&self, x: f64, y: f64) -> f32 {
        let x0 = (x.floor() as usize).min(self.width.saturating_sub(2));
        let y0 = (y.floor() as usize).min(self.height.saturating_sub(2));
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = (x - x0 as f64) as f32;
        let fy = (y - y0 as f64) as f32;
        let top = self.get(x0, y0) + fx * (self.get(x1, y0) - self.get(x0, y0));
        let bot = self.get(x0, y1) + fx * (self.get(x1, y1) - self.get(x0, y1));
        top + fy * (bot - top)
    }

    /// Bilinear sample; `None` outside `[0, w-1] x [0, h-1]`.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> Option<f32> {
        let inside = x >= 0.0
            && y >= 0.0
            && x <= (self.width - 1) as f64
            && y <= (self.height - 1) as f64;
        inside.then(|| self.lerp_at(x, y))
    }

    /// Bilinear sample with clamp-to-edge border handling.
    #[inline]
    pub fn sample_clamped(&self, x: f64, y: f64) -> f32 {
        let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, (self.width - 1) as f64) };
        let y = if y.is_nan() { 0.0 } else { y.clamp(0.0, (self.height - 1) as f64) };
        self.lerp_at(x, y)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    pub fn std_dev(&self) -> f64 {
        let mu = self.mean();
        let var = self
            .data
            .iter()
            .map(|&v| (v as f64 - mu).powi(2))
            .sum::<f64>()
            / self.data.len() as f64;
        var.sqrt()
    }

    /// Rounds every intensity to the nearest multiple of 1/255.
    pub fn quantize(&mut self) {
        for v in &mut self.data {
            *v = dequantize(quantize(*v));
        }
    }

    /// Separable Gaussian blur with clamp-to-edge borders.
    pub fn gaussian_blur(&self, sigma: f64) -> Image {
        if sigma <= 0.0 {
            return self.clone();
        }
        let kernel = gaussian_kernel(sigma);
        let r = (kernel.len() / 2) as isize;
        let (w, h) = (self.width as isize, self.height as isize);
        let mut tmp = vec![0f32; self.data.len()];
        for y in 0..h {
            let row = &self.data[(y * w) as usize..((y + 1) * w) as usize];
            for x in 0..w {
                let mut acc = 0f32;
                for (k, &kv) in kernel.iter().enumerate() {
                    let xx = (x + k as isize - r).clamp(0, w - 1);
                    acc += kv * row[xx as usize];
                }
                tmp[(y * w + x) as usize] = acc;
            }
        }
        let mut out = vec![0f32; self.data.len()];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0f32;
                for (k, &kv) in kernel.iter().enumerate() {
                    let yy = (y + k as isize - r).clamp(0, h - 1);
                    acc += kv * tmp[(yy * w + x) as usize];
                }
                out[(y * w + x) as usize] = acc;
            }
        }
        Image {
            width: self.width,
            height: self.height,
            data: out,
        }
    }
}

/// Normalized Gaussian kernel truncated at 3 sigma.
pub fn gaussian_kernel(sigma: f64) -> Vec<f32> {
    let r = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k.into_iter().map(|v| v as f32).collect()
}

/// Nearest 8-bit level of an intensity in `[0, 1]`.
#[inline]
pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[inline]
pub fn dequantize(q: u8) -> f32 {
    q as f32 / 255.0
}
