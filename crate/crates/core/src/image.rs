//! In-memory linear-RGB images and scalar fields.

use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::Vector3;

/// Row-major H×W×3 image with linear RGB channels.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageRgb<T> {
    width: usize,
    height: usize,
    data: Vec<Vector3<T>>,
}

impl<T: Real> ImageRgb<T> {
    pub fn filled(width: usize, height: usize, value: Vector3<T>) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, Vector3::zeros())
    }

    pub fn from_data(width: usize, height: usize, data: Vec<Vector3<T>>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "image data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, data })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn same_dims(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Vector3<T> {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut Vector3<T> {
        &mut self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: Vector3<T>) {
        self.data[y * self.width + x] = v;
    }

    pub fn pixels(&self) -> &[Vector3<T>] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [Vector3<T>] {
        &mut self.data
    }
}

/// Row-major H×W field of plain values (transmittance, contributor counts, ...).
#[derive(Clone, Debug, PartialEq)]
pub struct Field<U> {
    width: usize,
    height: usize,
    data: Vec<U>,
}

impl<U: Clone> Field<U> {
    pub fn filled(width: usize, height: usize, value: U) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &U {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: U) {
        self.data[y * self.width + x] = v;
    }

    pub fn values(&self) -> &[U] {
        &self.data
    }
}

/// sRGB 8-bit to linear [0,1].
pub fn srgb_u8_to_linear<T: Real>(v: u8) -> T {
    let cs = v as f64 / 255.0;
    let lin = if cs <= 0.04045 { cs / 12.92 } else { ((cs + 0.055) / 1.055).powf(2.4) };
    T::c(lin)
}

/// Linear [0,1] to sRGB 8-bit (clamped).
pub fn linear_to_srgb_u8<T: Real>(v: T) -> u8 {
    let x = v.as_f64().clamp(0.0, 1.0);
    let cs = if x <= 0.003_130_8 { 12.92 * x } else { 1.055 * x.powf(1.0 / 2.4) - 0.055 };
    (cs * 255.0).round().clamp(0.0, 255.0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn srgb_roundtrip_is_identity_on_u8() {
        for v in 0..=255u8 {
            let lin: f64 = srgb_u8_to_linear(v);
            assert_eq!(linear_to_srgb_u8(lin), v);
        }
    }

    #[test]
    fn image_indexing_is_row_major() {
        let mut img = ImageRgb::<f64>::zeros(3, 2);
        img.set(2, 1, Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(img.pixels()[5].x, 1.0);
    }
}
