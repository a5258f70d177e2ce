//! Binary PPM (P6) and the raw `GFRM` frame stream.
//!
//! A `GFRM` record is a 12-byte header followed by the pixels:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "GFRM"
//! 4       4     frame index, u32 little-endian
//! 8       2     width, u16 little-endian
//! 10      2     height, u16 little-endian
//! 12      w*h*3 RGB bytes, row-major, origin top-left
//! ```

use std::io::{ErrorKind, Read, Write};

use crate::error::{Error, Result};
use crate::image::Frame;
use crate::mapping::Dims;

pub const GFRM_MAGIC: &[u8; 4] = b"GFRM";
pub const GFRM_HEADER_LEN: usize = 12;

fn ppm_err(offset: usize, reason: impl Into<String>) -> Error {
    Error::Ppm {
        offset,
        reason: reason.into(),
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ppm_err(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ppm_err(start, format!("{what} out of range")))
    }
}

/// Parses a binary PPM with maxval 255. Bytes past the pixel payload are ignored.
pub fn load_frame_ppm(bytes: &[u8]) -> Result<Frame> {
    match bytes.get(..2) {
        Some(b"P6") => {}
        Some(b"P3") => return Err(ppm_err(0, "ASCII PPM (P3) is not supported")),
        _ => return Err(ppm_err(0, "missing P6 magic")),
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(ppm_err(maxval_at, format!("zero dimension {width}x{height}")));
    }
    if maxval != 255 {
        return Err(ppm_err(maxval_at, format!("maxval must be 255, got {maxval}")));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(ppm_err(cur.pos, "expected single whitespace after maxval")),
    }
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| ppm_err(0, "dimensions overflow"))?;
    let payload = &bytes[cur.pos..];
    if payload.len() < need {
        return Err(ppm_err(
            bytes.len(),
            format!("truncated payload: need {need} bytes, have {}", payload.len()),
        ));
    }
    Frame::from_rgb_bytes(width, height, payload[..need].to_vec())
}

/// Encodes as `P6\n<w> <h>\n255\n` followed by the raw pixels.
pub fn write_frame_ppm(frame: &Frame) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", frame.width(), frame.height());
    let mut out = Vec::with_capacity(header.len() + frame.as_bytes().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(frame.as_bytes());
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexedFrame {
    pub index: u32,
    pub frame: Frame,
}

pub fn encode_gfrm(index: u32, frame: &Frame) -> Result<Vec<u8>> {
    let (w, h) = (frame.width(), frame.height());
    let (w16, h16) = match (u16::try_from(w), u16::try_from(h)) {
        (Ok(w), Ok(h)) => (w, h),
        _ => return Err(Error::Config(format!("{w}x{h} does not fit a GFRM record"))),
    };
    let mut out = Vec::with_capacity(GFRM_HEADER_LEN + frame.as_bytes().len());
    out.extend_from_slice(GFRM_MAGIC);
    out.extend_from_slice(&index.to_le_bytes());
    out.extend_from_slice(&w16.to_le_bytes());
    out.extend_from_slice(&h16.to_le_bytes());
    out.extend_from_slice(frame.as_bytes());
    Ok(out)
}

/// Parses the 8 header bytes that follow the magic: index, width, height.
pub fn parse_gfrm_header(rest: &[u8; 8]) -> (u32, Dims) {
    let index = u32::from_le_bytes([rest[0], rest[1], rest[2], rest[3]]);
    let w = u16::from_le_bytes([rest[4], rest[5]]);
    let h = u16::from_le_bytes([rest[6], rest[7]]);
    (index, Dims::new(w as usize, h as usize))
}

/// Reads the remainder of a record whose 4 magic bytes were already consumed.
pub(crate) fn read_gfrm_body<R: Read>(src: &mut R, expected: Dims, offset: u64) -> Result<IndexedFrame> {
    let mut rest = [0u8; 8];
    read_exact_at(src, &mut rest, offset + 4)?;
    let (index, dims) = parse_gfrm_header(&rest);
    if dims != expected {
        return Err(Error::Stream {
            offset,
            reason: format!("record dims {dims} do not match session dims {expected}"),
        });
    }
    let mut pixels = vec![0u8; 3 * dims.area()];
    read_exact_at(src, &mut pixels, offset + GFRM_HEADER_LEN as u64)?;
    let frame = Frame::from_rgb_bytes(dims.width, dims.height, pixels).map_err(|e| Error::Stream {
        offset,
        reason: e.to_string(),
    })?;
    Ok(IndexedFrame { index, frame })
}

fn read_exact_at<R: Read>(src: &mut R, buf: &mut [u8], offset: u64) -> Result<()> {
    src.read_exact(buf).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => Error::Stream {
            offset,
            reason: "truncated record".into(),
        },
        _ => Error::Io(e),
    })
}

/// Iterator over the `GFRM` records of a byte source. Ends cleanly at EOF on
/// a record boundary; stops after the first error.
pub struct FrameStream<R> {
    src: R,
    dims: Dims,
    offset: u64,
    done: bool,
}

pub fn read_raw_stream<R: Read>(src: R, dims: Dims) -> FrameStream<R> {
    FrameStream {
        src,
        dims,
        offset: 0,
        done: false,
    }
}

impl<R: Read> FrameStream<R> {
    fn next_record(&mut self) -> Result<Option<IndexedFrame>> {
        let mut magic = [0u8; 4];
        let mut got = 0;
        while got < 4 {
            match self.src.read(&mut magic[got..]) {
                Ok(0) if got == 0 => return Ok(None),
                Ok(0) => {
                    return Err(Error::Stream {
                        offset: self.offset,
                        reason: "truncated record header".into(),
                    })
                }
                Ok(n) => got += n,
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => return Err(Error::Io(e)),
            }
        }
        if &magic != GFRM_MAGIC {
            return Err(Error::Stream {
                offset: self.offset,
                reason: format!("bad magic {magic:02x?}"),
            });
        }
        let rec = read_gfrm_body(&mut self.src, self.dims, self.offset)?;
        self.offset += (GFRM_HEADER_LEN + 3 * self.dims.area()) as u64;
        Ok(Some(rec))
    }
}

impl<R: Read> Iterator for FrameStream<R> {
    type Item = Result<IndexedFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = self.next_record().transpose();
        if !matches!(item, Some(Ok(_))) {
            self.done = true;
        }
        item
    }
}

/// Writes frames as consecutive `GFRM` records.
pub fn write_raw_stream<W: Write>(mut dst: W, frames: &[IndexedFrame]) -> Result<()> {
    for f in frames {
        dst.write_all(&encode_gfrm(f.index, &f.frame)?)?;
    }
    dst.flush()?;
    Ok(())
}
