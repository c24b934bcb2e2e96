//! Portable float map: `PF`, three channels, little-endian, rows stored bottom-up.

use std::io::{BufRead, Write};

use crate::color::LinearImage;
use crate::error::{Error, Result};

const FORMAT: &str = "pfm";

pub fn write<W: Write>(img: &LinearImage, mut out: W) -> Result<()> {
    write!(out, "PF\n{} {}\n-1.0\n", img.width(), img.height())?;
    let row = img.width() * 3;
    let mut buf = Vec::with_capacity(img.data().len() * 4);
    for y in (0..img.height()).rev() {
        for v in &img.data()[y * row..(y + 1) * row] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read<R: BufRead>(mut input: R) -> Result<LinearImage> {
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return Err(Error::format(FORMAT, "truncated header"));
        }
        tokens.extend(line.split_whitespace().map(str::to_owned));
    }
    if tokens[0] != "PF" {
        return Err(Error::format(FORMAT, format!("expected PF magic, got {:?}", tokens[0])));
    }
    let width: usize = tokens[1].parse().map_err(|_| Error::format(FORMAT, "bad width"))?;
    let height: usize = tokens[2].parse().map_err(|_| Error::format(FORMAT, "bad height"))?;
    let scale: f32 = tokens[3].parse().map_err(|_| Error::format(FORMAT, "bad scale"))?;
    let little = scale < 0.0;

    let row = width * 3;
    let mut raw = vec![0u8; width * height * 12];
    input.read_exact(&mut raw).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format(FORMAT, "truncated pixel data")
        } else {
            e.into()
        }
    })?;
    let mut data = vec![0.0f32; width * height * 3];
    for (i, chunk) in raw.chunks_exact(4).enumerate() {
        let bytes = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(bytes)
        } else {
            f32::from_be_bytes(bytes)
        };
        let file_row = i / row;
        let y = height - 1 - file_row;
        data[y * row + i % row] = v;
    }
    LinearImage::new(width, height, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact_and_bottom_up() {
        let img = LinearImage::from_fn(3, 2, |x, y| [x as f32, y as f32 * 10.0, 0.125]);
        let mut buf = Vec::new();
        write(&img, &mut buf).unwrap();
        let header = b"PF\n3 2\n-1.0\n";
        assert_eq!(&buf[..header.len()], header);
        // first stored row is the bottom image row (y = 1)
        let first = f32::from_le_bytes(buf[header.len() + 4..header.len() + 8].try_into().unwrap());
        assert_eq!(first, 10.0);
        assert_eq!(read(&buf[..]).unwrap(), img);
    }

    #[test]
    fn rejects_wrong_magic() {
        assert!(read(&b"Pf\n1 1\n-1.0\n\0\0\0\0"[..]).is_err());
    }
}
