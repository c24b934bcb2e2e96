//! Radiance `.hdr` (RGBE) codec.
//!
//! Reads flat and new-style run-length encoded scanlines with the standard
//! `-Y h +X w` orientation. Writes flat scanlines.

use std::io::{BufRead, Write};

use crate::color::LinearImage;
use crate::error::{Error, Result};

const FORMAT: &str = "rgbe";

/// Shared-exponent encoding of one pixel.
pub fn encode_pixel(rgb: [f32; 3]) -> [u8; 4] {
    let v = rgb[0].max(rgb[1]).max(rgb[2]);
    if !(v > 1e-32) {
        return [0, 0, 0, 0];
    }
    let (mantissa, exp) = frexp(v);
    let scale = mantissa * 256.0 / v;
    let q = |c: f32| (c.max(0.0) * scale).floor().min(255.0) as u8;
    [q(rgb[0]), q(rgb[1]), q(rgb[2]), (exp + 128).clamp(0, 255) as u8]
}

pub fn decode_pixel(rgbe: [u8; 4]) -> [f32; 3] {
    if rgbe[3] == 0 {
        return [0.0; 3];
    }
    let f = ((rgbe[3] as i32) - (128 + 8)) as f32;
    let f = f.exp2();
    [
        (rgbe[0] as f32 + 0.5) * f,
        (rgbe[1] as f32 + 0.5) * f,
        (rgbe[2] as f32 + 0.5) * f,
    ]
}

/// `v = m * 2^e` with `m` in `[0.5, 1)`.
fn frexp(v: f32) -> (f32, i32) {
    let e = v.log2().floor() as i32 + 1;
    let mut m = v / (e as f32).exp2();
    let mut e = e;
    // log2 rounding can land one step off near powers of two
    if m >= 1.0 {
        m *= 0.5;
        e += 1;
    } else if m < 0.5 {
        m *= 2.0;
        e -= 1;
    }
    (m, e)
}

pub fn write<W: Write>(img: &LinearImage, mut out: W) -> Result<()> {
    write!(
        out,
        "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y {} +X {}\n",
        img.height(),
        img.width()
    )?;
    let mut buf = Vec::with_capacity(img.pixel_count() * 4);
    for p in img.pixels() {
        buf.extend_from_slice(&encode_pixel(p));
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read<R: BufRead>(mut input: R) -> Result<LinearImage> {
    let mut line = String::new();
    input.read_line(&mut line)?;
    if !line.starts_with("#?") {
        return Err(Error::format(FORMAT, "missing #? magic"));
    }
    loop {
        line.clear();
        if input.read_line(&mut line)? == 0 {
            return Err(Error::format(FORMAT, "header ended before resolution line"));
        }
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        if let Some(fmt) = l.strip_prefix("FORMAT=") {
            if fmt != "32-bit_rle_rgbe" {
                return Err(Error::format(FORMAT, format!("unsupported pixel format {fmt}")));
            }
        }
    }
    line.clear();
    input.read_line(&mut line)?;
    let (width, height) = parse_resolution(line.trim_end())?;

    let mut data = vec![0.0f32; width * height * 3];
    let mut scan = vec![[0u8; 4]; width];
    for y in 0..height {
        read_scanline(&mut input, &mut scan)?;
        for (x, px) in scan.iter().enumerate() {
            let rgb = decode_pixel(*px);
            data[(y * width + x) * 3..(y * width + x) * 3 + 3].copy_from_slice(&rgb);
        }
    }
    LinearImage::new(width, height, data)
}

fn parse_resolution(line: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    match parts.as_slice() {
        ["-Y", h, "+X", w] => {
            let h = h.parse().map_err(|_| Error::format(FORMAT, "bad height"))?;
            let w = w.parse().map_err(|_| Error::format(FORMAT, "bad width"))?;
            Ok((w, h))
        }
        _ => Err(Error::format(
            FORMAT,
            format!("unsupported resolution line {line:?} (only -Y h +X w)"),
        )),
    }
}

fn read_exact<R: BufRead>(input: &mut R, buf: &mut [u8]) -> Result<()> {
    input.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format(FORMAT, "truncated pixel data")
        } else {
            e.into()
        }
    })
}

fn read_scanline<R: BufRead>(input: &mut R, scan: &mut [[u8; 4]]) -> Result<()> {
    let width = scan.len();
    let mut first = [0u8; 4];
    read_exact(input, &mut first)?;
    let is_rle = (8..0x8000).contains(&width)
        && first[0] == 2
        && first[1] == 2
        && first[2] & 0x80 == 0;
    if !is_rle {
        scan[0] = first;
        for px in scan.iter_mut().skip(1) {
            read_exact(input, px)?;
        }
        return Ok(());
    }
    let encoded_width = ((first[2] as usize) << 8) | first[3] as usize;
    if encoded_width != width {
        return Err(Error::format(FORMAT, "scanline width mismatch"));
    }
    for c in 0..4 {
        let mut x = 0;
        while x < width {
            let mut count = [0u8; 1];
            read_exact(input, &mut count)?;
            let count = count[0] as usize;
            if count > 128 {
                let run = count - 128;
                if x + run > width {
                    return Err(Error::format(FORMAT, "run overflows scanline"));
                }
                let mut v = [0u8; 1];
                read_exact(input, &mut v)?;
                for px in &mut scan[x..x + run] {
                    px[c] = v[0];
                }
                x += run;
            } else {
                if count == 0 || x + count > width {
                    return Err(Error::format(FORMAT, "bad literal count"));
                }
                let mut vals = vec![0u8; count];
                read_exact(input, &mut vals)?;
                for (px, v) in scan[x..x + count].iter_mut().zip(vals) {
                    px[c] = v;
                }
                x += count;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_quantization_bound() {
        for v in [1e-3f32, 0.3, 1.0, 7.5, 1234.0] {
            let d = decode_pixel(encode_pixel([v, v * 0.5, 0.0]));
            assert!((d[0] - v).abs() <= 0.01 * v, "{v} -> {d:?}");
            assert!((d[1] - 0.5 * v).abs() <= 0.01 * v);
        }
        assert_eq!(decode_pixel(encode_pixel([0.0; 3])), [0.0; 3]);
    }

    #[test]
    fn reads_rle_scanlines() {
        // 8-wide scanline: a run of 8 for every channel
        let mut bytes = b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y 1 +X 8\n".to_vec();
        bytes.extend_from_slice(&[2, 2, 0, 8]);
        for v in [128u8, 64, 0, 129] {
            bytes.extend_from_slice(&[128 + 8, v]);
        }
        let img = read(&bytes[..]).unwrap();
        assert_eq!(img.dims(), (8, 1));
        assert_eq!(img.pixel(3, 0), decode_pixel([128, 64, 0, 129]));
    }

    #[test]
    fn truncated_data_is_an_error() {
        let img = LinearImage::filled(4, 3, [0.5, 2.0, 9.0]);
        let mut buf = Vec::new();
        write(&img, &mut buf).unwrap();
        buf.truncate(buf.len() - 5);
        assert!(matches!(read(&buf[..]), Err(Error::Format { .. })));
    }
}
