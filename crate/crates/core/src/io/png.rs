//! PNG codec for display images.
//!
//! Files are written as 8-bit RGB by default; the predictor protocol uses the
//! 16-bit variant so that dark values survive the trip through the pipe.

use std::io::{BufRead, Cursor, Seek, Write};

use crate::color::{DisplayImage, Transfer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    fn max_code(self) -> f32 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

/// Rounds a display value to the nearest code of the given depth.
pub fn quantize(v: f32, depth: BitDepth) -> f32 {
    let m = depth.max_code();
    (v.clamp(0.0, 1.0) * m).round() / m
}

/// The image as it will read back after a PNG round trip at `depth`.
pub fn quantized(img: &DisplayImage, depth: BitDepth) -> DisplayImage {
    let data = img.data().iter().map(|&v| quantize(v, depth)).collect();
    DisplayImage::new(img.width(), img.height(), data, img.transfer())
        .expect("quantized values stay in [0, 1]")
}

pub fn write<W: Write>(img: &DisplayImage, out: W, depth: BitDepth) -> Result<()> {
    let mut enc = png::Encoder::new(out, img.width() as u32, img.height() as u32);
    enc.set_color(png::ColorType::Rgb);
    let bytes: Vec<u8> = match depth {
        BitDepth::Eight => {
            enc.set_depth(png::BitDepth::Eight);
            img.data()
                .iter()
                .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
                .collect()
        }
        BitDepth::Sixteen => {
            enc.set_depth(png::BitDepth::Sixteen);
            img.data()
                .iter()
                .flat_map(|&v| ((v.clamp(0.0, 1.0) * 65535.0).round() as u16).to_be_bytes())
                .collect()
        }
    };
    let mut writer = enc.write_header().map_err(|e| Error::Png(e.to_string()))?;
    writer
        .write_image_data(&bytes)
        .map_err(|e| Error::Png(e.to_string()))?;
    writer.finish().map_err(|e| Error::Png(e.to_string()))?;
    Ok(())
}

pub fn encode(img: &DisplayImage, depth: BitDepth) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(img, &mut buf, depth)?;
    Ok(buf)
}

pub fn decode(bytes: &[u8], transfer: Transfer) -> Result<DisplayImage> {
    read(Cursor::new(bytes), transfer)
}

/// Decodes any 8/16-bit gray, gray-alpha, RGB or RGBA PNG; alpha is dropped.
/// PNG carries no transfer tag we trust, so the caller supplies it.
pub fn read<R: BufRead + Seek>(input: R, transfer: Transfer) -> Result<DisplayImage> {
    let mut dec = png::Decoder::new(input);
    dec.set_transformations(png::Transformations::EXPAND);
    let mut reader = dec.read_info().map_err(|e| Error::Png(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Png("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Png(e.to_string()))?;
    buf.truncate(info.buffer_size());

    let (w, h) = (info.width as usize, info.height as usize);
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => {
            return Err(Error::Png("palette image was not expanded".into()))
        }
    };
    let samples: Vec<f32> = match info.bit_depth {
        png::BitDepth::Eight => buf.iter().map(|&b| b as f32 / 255.0).collect(),
        png::BitDepth::Sixteen => buf
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f32 / 65535.0)
            .collect(),
        other => return Err(Error::Png(format!("unsupported bit depth {other:?}"))),
    };
    let stride = w * channels;
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        let row = &samples[y * stride..(y + 1) * stride];
        for px in row.chunks_exact(channels) {
            if channels < 3 {
                data.extend_from_slice(&[px[0]; 3]);
            } else {
                data.extend_from_slice(&px[..3]);
            }
        }
    }
    DisplayImage::new(w, h, data, transfer)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_bit_round_trip_matches_quantizer() {
        let img = DisplayImage::new(
            2,
            2,
            vec![0.0, 1.0, 0.5, 1e-4, 0.3, 0.7, 0.25, 0.125, 0.999, 0.01, 0.02, 0.03],
            Transfer::Gamma22,
        )
        .unwrap();
        for depth in [BitDepth::Eight, BitDepth::Sixteen] {
            let back = decode(&encode(&img, depth).unwrap(), Transfer::Gamma22).unwrap();
            assert_eq!(back, quantized(&img, depth));
        }
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(decode(b"not a png", Transfer::Gamma22).is_err());
    }
}
