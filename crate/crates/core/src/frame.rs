//! Luminance rasters and continuous sampling of a reference frame.

use crate::{Error, Result};

/// Single-channel 8-bit luminance raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    luma: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, luma: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Usage(format!(
                "frame dimensions must be non-zero, got {width}x{height}"
            )));
        }
        if luma.len() != width * height {
            return Err(Error::Usage(format!(
                "frame {width}x{height} needs {} samples, got {}",
                width * height,
                luma.len()
            )));
        }
        Ok(Frame {
            width,
            height,
            luma,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "frame dimensions must be non-zero");
        Frame {
            width,
            height,
            luma: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        assert!(width > 0 && height > 0, "frame dimensions must be non-zero");
        let mut luma = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                luma.push(f(x, y));
            }
        }
        Frame {
            width,
            height,
            luma,
        }
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
    pub fn luma(&self) -> &[u8] {
        &self.luma
    }

    #[inline]
    pub fn luma_mut(&mut self) -> &mut [u8] {
        &mut self.luma
    }

    pub fn into_luma(self) -> Vec<u8> {
        self.luma
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.luma[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.luma[y * self.width + x] = value;
    }

    /// Sample at signed integer coordinates, replicating the border.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.luma[y * self.width + x]
    }

    pub fn same_dimensions(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// A reference frame with a continuous sampling interface.
///
/// Sampling is bilinear between the four neighbouring samples after clamping
/// the coordinate into the frame, which is the same as upsampling without
/// bound using a triangle kernel.
#[derive(Debug, Clone)]
pub struct InterpolatedRef {
    frame: Frame,
    max_x: f64,
    max_y: f64,
}

impl InterpolatedRef {
    pub fn new(frame: Frame) -> Self {
        let max_x = (frame.width - 1) as f64;
        let max_y = (frame.height - 1) as f64;
        InterpolatedRef {
            frame,
            max_x,
            max_y,
        }
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    /// Bilinear sample at `(x, y)`. Integer positions return the stored sample.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        // NaN clamps to the origin rather than propagating
        let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, self.max_x) };
        let y = if y.is_nan() { 0.0 } else { y.clamp(0.0, self.max_y) };
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let w = self.frame.width;
        let xi = x0 as usize;
        let yi = y0 as usize;
        let xj = (xi + 1).min(w - 1);
        let yj = (yi + 1).min(self.frame.height - 1);
        let luma = &self.frame.luma;
        let p00 = luma[yi * w + xi] as f64;
        let p01 = luma[yi * w + xj] as f64;
        let p10 = luma[yj * w + xi] as f64;
        let p11 = luma[yj * w + xj] as f64;
        let top = p00 + fx * (p01 - p00);
        let bottom = p10 + fx * (p11 - p10);
        top + fy * (bottom - top)
    }
}

/// Round half-up into the 8-bit range.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> InterpolatedRef {
        InterpolatedRef::new(Frame::from_fn(6, 5, |x, y| (x * 10 + y * 3) as u8))
    }

    #[test]
    fn integer_positions_are_exact() {
        let r = ramp();
        for y in 0..5 {
            for x in 0..6 {
                assert_eq!(r.sample(x as f64, y as f64), r.frame().get(x, y) as f64);
            }
        }
    }

    #[test]
    fn midpoint_between_ten_and_twenty() {
        let f = Frame::new(2, 1, vec![10, 20]).unwrap();
        let r = InterpolatedRef::new(f);
        assert_eq!(r.sample(0.5, 0.0), 15.0);
    }

    #[test]
    fn out_of_frame_clamps_to_border() {
        let r = ramp();
        assert_eq!(r.sample(-5.2, 3.0), r.frame().get(0, 3) as f64);
        assert_eq!(r.sample(100.0, -7.0), r.frame().get(5, 0) as f64);
        assert_eq!(r.sample(2.0, 99.5), r.frame().get(2, 4) as f64);
    }

    #[test]
    fn rejects_mismatched_buffer() {
        assert!(Frame::new(3, 3, vec![0; 8]).is_err());
        assert!(Frame::new(0, 3, vec![]).is_err());
    }

    #[test]
    fn quantize_rounds_half_up() {
        assert_eq!(quantize(2.5), 3);
        assert_eq!(quantize(2.4999), 2);
        assert_eq!(quantize(-3.0), 0);
        assert_eq!(quantize(300.0), 255);
    }
}
