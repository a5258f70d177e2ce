//! Frame and mask buffers.

use crate::error::{Error, Result};
use crate::mapping::Dims;

/// An 8-bit RGB frame, row-major, origin top-left.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Frame {
    /// Wraps interleaved RGB bytes. `data.len()` must equal `3 * width * height`.
    pub fn from_rgb_bytes(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config(format!("frame dims must be positive, got {width}x{height}")));
        }
        if data.len() != 3 * width * height {
            return Err(Error::Config(format!(
                "{width}x{height} frame needs {} bytes, got {}",
                3 * width * height,
                data.len()
            )));
        }
        Ok(Frame { width, height, data })
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn filled(width: usize, height: usize, px: [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "frame dims must be positive");
        Frame {
            width,
            height,
            data: px.repeat(width * height),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.width, self.height)
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, px: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&px);
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn row(&self, y: usize) -> &[u8] {
        let stride = 3 * self.width;
        &self.data[y * stride..(y + 1) * stride]
    }

    /// Copies out the `w`×`h` sub-frame whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Frame {
        assert!(x0 + w <= self.width && y0 + h <= self.height && w > 0 && h > 0);
        let mut data = Vec::with_capacity(3 * w * h);
        for y in y0..y0 + h {
            data.extend_from_slice(&self.row(y)[3 * x0..3 * (x0 + w)]);
        }
        Frame { width: w, height: h, data }
    }
}

/// One boolean per pixel; `true` marks a chroma match.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BitMask {
    pub fn new(width: usize, height: usize) -> Self {
        BitMask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    /// # Panics
    /// If `bits.len() != width * height`.
    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width * height, "mask size mismatch");
        BitMask { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub(crate) fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    pub fn count_set(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Encodes as binary PBM (P4): set bits are black (1), rows padded to a byte.
    pub fn to_pbm(&self) -> Vec<u8> {
        let header = format!("P4\n{} {}\n", self.width, self.height);
        let row_bytes = self.width.div_ceil(8);
        let mut out = Vec::with_capacity(header.len() + row_bytes * self.height);
        out.extend_from_slice(header.as_bytes());
        for row in self.bits.chunks(self.width) {
            for chunk in row.chunks(8) {
                let mut byte = 0u8;
                for (i, &bit) in chunk.iter().enumerate() {
                    if bit {
                        byte |= 0x80 >> i;
                    }
                }
                out.push(byte);
            }
        }
        out
    }
}
