//! Wire format spoken with external exposure predictors.
//!
//! Request: `u32` big-endian header length, JSON header
//! `{"direction":"darker"|"brighter","step_ev":2}`, then the PNG bytes of the
//! input image (to end of stream). Response: `u32` big-endian length, then
//! that many PNG bytes.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Direction, PredictorError};
use crate::color::{DisplayImage, Transfer};
use crate::io::png::{self, BitDepth};

/// Upper bound on either length prefix; guards against reading garbage as a size.
pub const MAX_MESSAGE_BYTES: usize = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestHeader {
    pub direction: Direction,
    #[serde(serialize_with = "compact_number")]
    pub step_ev: f64,
}

/// Integral steps go on the wire as JSON integers (`2`, not `2.0`).
fn compact_number<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        s.serialize_i64(*v as i64)
    } else {
        s.serialize_f64(*v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub header: RequestHeader,
    pub image: DisplayImage,
}

pub fn encode_header(header: &RequestHeader) -> Vec<u8> {
    serde_json::to_vec(header).expect("header serialization is infallible")
}

/// Request bytes; the image travels as 16-bit RGB PNG.
pub fn encode_request(header: &RequestHeader, image: &DisplayImage) -> Result<Vec<u8>, PredictorError> {
    let json = encode_header(header);
    let png = png::encode(image, BitDepth::Sixteen)
        .map_err(|e| PredictorError::Malformed(format!("encoding request image: {e}")))?;
    let mut out = Vec::with_capacity(4 + json.len() + png.len());
    out.extend_from_slice(&(json.len() as u32).to_be_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&png);
    Ok(out)
}

pub fn read_request<R: Read>(mut input: R, transfer: Transfer) -> Result<Request, PredictorError> {
    let len = read_len(&mut input)?;
    let mut json = vec![0u8; len];
    input
        .read_exact(&mut json)
        .map_err(|e| PredictorError::Malformed(format!("request header: {e}")))?;
    let header: RequestHeader = serde_json::from_slice(&json)
        .map_err(|e| PredictorError::Malformed(format!("request header json: {e}")))?;
    let mut body = Vec::new();
    input
        .read_to_end(&mut body)
        .map_err(|e| PredictorError::Malformed(format!("request image: {e}")))?;
    let image = png::decode(&body, transfer)
        .map_err(|e| PredictorError::Malformed(format!("request image: {e}")))?;
    Ok(Request { header, image })
}

pub fn write_response<W: Write>(mut out: W, image: &DisplayImage) -> Result<(), PredictorError> {
    let png = png::encode(image, BitDepth::Sixteen)
        .map_err(|e| PredictorError::Malformed(format!("encoding response image: {e}")))?;
    out.write_all(&(png.len() as u32).to_be_bytes())
        .and_then(|_| out.write_all(&png))
        .and_then(|_| out.flush())
        .map_err(PredictorError::Io)
}

pub fn read_response<R: Read>(mut input: R, transfer: Transfer) -> Result<DisplayImage, PredictorError> {
    let len = read_len(&mut input)?;
    let mut body = vec![0u8; len];
    input
        .read_exact(&mut body)
        .map_err(|e| PredictorError::Malformed(format!("response truncated: {e}")))?;
    png::decode(&body, transfer).map_err(|e| PredictorError::Malformed(format!("response image: {e}")))
}

fn read_len<R: Read>(input: &mut R) -> Result<usize, PredictorError> {
    let mut len = [0u8; 4];
    input
        .read_exact(&mut len)
        .map_err(|e| PredictorError::Malformed(format!("missing length prefix: {e}")))?;
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_MESSAGE_BYTES {
        return Err(PredictorError::Malformed(format!("length prefix {len} too large")));
    }
    Ok(len)
}

/// Answers one request from `input` on `output`; the building block for a
/// predictor process.
pub fn serve_one<R: Read, W: Write>(
    input: R,
    output: W,
    transfer: Transfer,
    predict: impl FnOnce(&Request) -> Result<DisplayImage, PredictorError>,
) -> Result<(), PredictorError> {
    let req = read_request(input, transfer)?;
    let img = predict(&req)?;
    write_response(output, &img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_bytes_are_exact() {
        let h = RequestHeader {
            direction: Direction::Darker,
            step_ev: 2.0,
        };
        assert_eq!(encode_header(&h), br#"{"direction":"darker","step_ev":2}"#);
        let h = RequestHeader {
            direction: Direction::Brighter,
            step_ev: 1.5,
        };
        assert_eq!(encode_header(&h), br#"{"direction":"brighter","step_ev":1.5}"#);
    }

    #[test]
    fn request_layout_and_round_trip() {
        let img = DisplayImage::filled(3, 2, [0.25, 0.5, 1.0], Transfer::Gamma22);
        let h = RequestHeader {
            direction: Direction::Brighter,
            step_ev: 2.0,
        };
        let bytes = encode_request(&h, &img).unwrap();
        let json = br#"{"direction":"brighter","step_ev":2}"#;
        assert_eq!(&bytes[..4], &(json.len() as u32).to_be_bytes());
        assert_eq!(&bytes[4..4 + json.len()], json);
        assert_eq!(&bytes[4 + json.len()..4 + json.len() + 8], b"\x89PNG\r\n\x1a\n");
        let req = read_request(&bytes[..], Transfer::Gamma22).unwrap();
        assert_eq!(req.header, h);
        assert_eq!(req.image, png::quantized(&img, BitDepth::Sixteen));
    }

    #[test]
    fn response_round_trip_and_truncation() {
        let img = DisplayImage::filled(4, 4, [0.1, 0.2, 0.3], Transfer::Gamma22);
        let mut buf = Vec::new();
        write_response(&mut buf, &img).unwrap();
        let back = read_response(&buf[..], Transfer::Gamma22).unwrap();
        assert_eq!(back, png::quantized(&img, BitDepth::Sixteen));
        assert!(matches!(
            read_response(&buf[..buf.len() - 3], Transfer::Gamma22),
            Err(PredictorError::Malformed(_))
        ));
        assert!(read_response(&[0xff, 0xff, 0xff, 0xff][..], Transfer::Gamma22).is_err());
    }
}
