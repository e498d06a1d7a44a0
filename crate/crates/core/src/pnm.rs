//! Binary PGM (P5) and PPM (P6) files, maxval 255.

use std::fs;
use std::path::Path;

use crate::frame::Frame;
use crate::{Error, Result};

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    data_start: usize,
}

fn parse_header(bytes: &[u8]) -> std::result::Result<Header, String> {
    if bytes.len() < 2 {
        return Err("file too short for a PNM header".into());
    }
    let magic = [bytes[0], bytes[1]];
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // whitespace and comments between header tokens
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err("malformed PNM header".into());
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or("header value out of range")?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("missing whitespace after maxval".into());
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(format!("only maxval 255 is supported, got {maxval}"));
    }
    if width == 0 || height == 0 {
        return Err("zero image dimension".into());
    }
    Ok(Header {
        magic,
        width,
        height,
        data_start: pos + 1,
    })
}

/// Decode a P5 image from memory.
pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<Frame, String> {
    let h = parse_header(bytes)?;
    if &h.magic != b"P5" {
        return Err("not a binary PGM (P5) file".into());
    }
    let n = h.width * h.height;
    let data = bytes
        .get(h.data_start..h.data_start + n)
        .ok_or_else(|| format!("expected {n} bytes of pixel data"))?;
    Frame::new(h.width, h.height, data.to_vec()).map_err(|e| e.to_string())
}

pub fn encode_pgm(frame: &Frame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(frame.luma());
    out
}

pub fn encode_ppm(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    assert_eq!(rgb.len(), width * height * 3, "RGB buffer does not match dimensions");
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    out
}

/// Decode a P6 image into `(width, height, rgb)`.
pub fn decode_ppm(bytes: &[u8]) -> std::result::Result<(usize, usize, Vec<u8>), String> {
    let h = parse_header(bytes)?;
    if &h.magic != b"P6" {
        return Err("not a binary PPM (P6) file".into());
    }
    let n = h.width * h.height * 3;
    let data = bytes
        .get(h.data_start..h.data_start + n)
        .ok_or_else(|| format!("expected {n} bytes of pixel data"))?;
    Ok((h.width, h.height, data.to_vec()))
}

pub fn read_pgm(path: &Path) -> Result<Frame> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes).map_err(|m| Error::format(path, m))
}

pub fn write_pgm(path: &Path, frame: &Frame) -> Result<()> {
    fs::write(path, encode_pgm(frame)).map_err(|e| Error::io(path, e))
}

pub fn write_ppm(path: &Path, width: usize, height: usize, rgb: &[u8]) -> Result<()> {
    fs::write(path, encode_ppm(width, height, rgb)).map_err(|e| Error::io(path, e))
}
