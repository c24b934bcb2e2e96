//! Binary PLY interchange in the common Gaussian-splatting vertex layout.
//!
//! ```text
//! ply
//! format binary_little_endian 1.0
//! element vertex N
//! property float x, y, z, nx, ny, nz           (normals written as 0)
//! property float f_dc_0 .. f_dc_2              (SH degree 0, per channel)
//! property float f_rest_0 .. f_rest_{3(K-1)-1} (channel-major: all of R, then G, then B)
//! property float opacity                       (logit)
//! property float scale_0 .. scale_2            (log)
//! property float rot_0 .. rot_3                (w, x, y, z; not normalized)
//! end_header
//! ```
//!
//! SH values are linear HDR radiance and are stored unclamped. Every value is
//! a 32-bit float; the SH degree follows from the `f_rest` count.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::scene::GaussianScene;
use super::sh;

#[derive(Debug, thiserror::Error)]
pub enum PlyError {
    #[error("PLY i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a PLY file (missing 'ply' magic)")]
    NotPly,
    #[error("malformed PLY header: {0}")]
    Header(String),
    #[error("unsupported PLY format '{0}', expected binary_little_endian 1.0")]
    UnsupportedFormat(String),
    #[error("PLY element 'vertex' lacks property '{0}'")]
    MissingProperty(String),
    #[error("{0} f_rest properties do not match any SH degree <= 3")]
    ShCount(usize),
    #[error("truncated PLY: element '{element}' declares {count} entries but data ends in entry {index}")]
    Truncated { element: String, index: usize, count: usize },
}

fn type_size(t: &str) -> Option<usize> {
    Some(match t {
        "char" | "uchar" | "int8" | "uint8" => 1,
        "short" | "ushort" | "int16" | "uint16" => 2,
        "int" | "uint" | "int32" | "uint32" | "float" | "float32" => 4,
        "double" | "float64" => 8,
        _ => return None,
    })
}

struct Property {
    name: String,
    ty: String,
    offset: usize,
}

struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
    stride: usize,
}

fn property_names(degree: usize) -> Vec<String> {
    let rest = 3 * (sh::coeff_count(degree) - 1);
    let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend((0..rest).map(|i| format!("f_rest_{i}")));
    names.push("opacity".into());
    names.extend((0..3).map(|i| format!("scale_{i}")));
    names.extend((0..4).map(|i| format!("rot_{i}")));
    names
}

/// Serializes `scene`; parameters are rounded to f32.
pub fn write<W: Write>(scene: &GaussianScene, mut out: W) -> Result<(), PlyError> {
    let names = property_names(scene.degree);
    let mut header = format!("ply\nformat binary_little_endian 1.0\nelement vertex {}\n", scene.len());
    for n in &names {
        header.push_str(&format!("property float {n}\n"));
    }
    header.push_str("end_header\n");
    out.write_all(header.as_bytes())?;
    let k = scene.coeffs_per_gaussian();
    let mut buf = Vec::with_capacity(names.len() * 4 * scene.len());
    for i in 0..scene.len() {
        let shc = scene.sh_of(i);
        let mut vals: Vec<f64> = scene.positions[i].to_vec();
        vals.extend([0.0; 3]);
        vals.extend(shc[0]);
        for ch in 0..3 {
            vals.extend((1..k).map(|j| shc[j][ch]));
        }
        vals.push(scene.opacity_logits[i]);
        vals.extend(scene.log_scales[i]);
        vals.extend(scene.rotations[i]);
        for v in vals {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn to_bytes(scene: &GaussianScene) -> Vec<u8> {
    let mut v = Vec::new();
    write(scene, &mut v).expect("writing to memory");
    v
}

fn parse_header<R: BufRead>(input: &mut R) -> Result<Vec<Element>, PlyError> {
    let mut line = String::new();
    let mut next = |line: &mut String| -> Result<bool, PlyError> {
        line.clear();
        Ok(input.read_line(line)? > 0)
    };
    if !next(&mut line)? || line.trim_end() != "ply" {
        return Err(PlyError::NotPly);
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut format_ok = false;
    loop {
        if !next(&mut line)? {
            return Err(PlyError::Header("missing end_header".into()));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["format", f, v] => {
                if *f != "binary_little_endian" || *v != "1.0" {
                    return Err(PlyError::UnsupportedFormat(format!("{f} {v}")));
                }
                format_ok = true;
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| PlyError::Header(format!("bad element count '{count}'")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                    stride: 0,
                });
            }
            ["property", "list", ..] => {
                return Err(PlyError::Header("list properties are not supported".into()));
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| PlyError::Header("property before any element".into()))?;
                let size = type_size(ty).ok_or_else(|| PlyError::Header(format!("unknown type '{ty}'")))?;
                el.props.push(Property {
                    name: name.to_string(),
                    ty: ty.to_string(),
                    offset: el.stride,
                });
                el.stride += size;
            }
            _ => return Err(PlyError::Header(format!("unexpected line '{}'", line.trim_end()))),
        }
    }
    if !format_ok {
        return Err(PlyError::Header("missing format line".into()));
    }
    Ok(elements)
}

fn read_value(rec: &[u8], p: &Property) -> f64 {
    let b = &rec[p.offset..];
    match p.ty.as_str() {
        "float" | "float32" => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
        "double" | "float64" => f64::from_le_bytes(b[..8].try_into().unwrap()),
        "uchar" | "uint8" => b[0] as f64,
        "char" | "int8" => b[0] as i8 as f64,
        "short" | "int16" => i16::from_le_bytes(b[..2].try_into().unwrap()) as f64,
        "ushort" | "uint16" => u16::from_le_bytes(b[..2].try_into().unwrap()) as f64,
        "int" | "int32" => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
        _ => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
    }
}

pub fn read<R: Read>(input: R) -> Result<GaussianScene, PlyError> {
    let mut input = BufReader::new(input);
    let elements = parse_header(&mut input)?;
    let mut scene = None;
    for el in &elements {
        if el.name != "vertex" {
            // skip other elements' data
            let mut sink = vec![0u8; el.stride];
            for index in 0..el.count {
                read_record(&mut input, &mut sink, el, index)?;
            }
            continue;
        }
        let by_name: HashMap<&str, &Property> = el.props.iter().map(|p| (p.name.as_str(), p)).collect();
        let get = |n: &str| -> Result<&Property, PlyError> {
            by_name.get(n).copied().ok_or_else(|| PlyError::MissingProperty(n.to_string()))
        };
        let n_rest = (0..).take_while(|i| by_name.contains_key(format!("f_rest_{i}").as_str())).count();
        if n_rest % 3 != 0 {
            return Err(PlyError::ShCount(n_rest));
        }
        let k = n_rest / 3 + 1;
        let degree = sh::degree_for_count(k).ok_or(PlyError::ShCount(n_rest))?;
        let mut fields: Vec<&Property> = Vec::new();
        for n in ["x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"] {
            fields.push(get(n)?);
        }
        let rest: Vec<&Property> = (0..n_rest).map(|i| get(&format!("f_rest_{i}"))).collect::<Result<_, _>>()?;
        let mut s = GaussianScene::new(degree).expect("degree checked");
        let mut rec = vec![0u8; el.stride];
        for index in 0..el.count {
            read_record(&mut input, &mut rec, el, index)?;
            let v: Vec<f64> = fields.iter().map(|p| read_value(&rec, p)).collect();
            s.positions.push([v[0], v[1], v[2]]);
            s.opacity_logits.push(v[6]);
            s.log_scales.push([v[7], v[8], v[9]]);
            s.rotations.push([v[10], v[11], v[12], v[13]]);
            let mut coeffs = vec![[0.0; 3]; k];
            coeffs[0] = [v[3], v[4], v[5]];
            for (j, p) in rest.iter().enumerate() {
                let (ch, kk) = (j / (k - 1), j % (k - 1) + 1);
                coeffs[kk][ch] = read_value(&rec, p);
            }
            s.sh.extend(coeffs);
        }
        scene = Some(s);
    }
    scene.ok_or_else(|| PlyError::Header("no 'vertex' element".into()))
}

fn read_record<R: Read>(input: &mut R, rec: &mut [u8], el: &Element, index: usize) -> Result<(), PlyError> {
    input.read_exact(rec).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            PlyError::Truncated {
                element: el.name.clone(),
                index,
                count: el.count,
            }
        } else {
            PlyError::Io(e)
        }
    })
}

pub fn write_ply(scene: &GaussianScene, path: impl AsRef<Path>) -> crate::Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| crate::Error::io_at(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    write(scene, &mut w)?;
    w.flush().map_err(|e| crate::Error::io_at(path, e))?;
    Ok(())
}

pub fn read_ply(path: impl AsRef<Path>) -> crate::Result<GaussianScene> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| crate::Error::io_at(path, e))?;
    Ok(read(f)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Random scene whose values are exactly representable in f32.
    fn random_scene(seed: u64, n: usize, degree: usize) -> GaussianScene {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut f = || rng.random_range(-3.0f32..3.0) as f64;
        let mut s = GaussianScene::new(degree).unwrap();
        for _ in 0..n {
            s.positions.push([f(), f(), f()]);
            s.log_scales.push([f(), f(), f()]);
            s.rotations.push([f(), f(), f(), f()]);
            s.opacity_logits.push(f());
            for _ in 0..sh::coeff_count(degree) {
                s.sh.push([f(), f(), f()]);
            }
        }
        s
    }

    #[test]
    fn round_trip_is_bitwise() {
        for degree in 0..=3 {
            let s = random_scene(degree as u64, 17, degree);
            let bytes = to_bytes(&s);
            let back = read(&bytes[..]).unwrap();
            assert_eq!(back, s);
            assert_eq!(to_bytes(&back), bytes);
        }
    }

    #[test]
    fn hdr_dc_survives() {
        let mut s = random_scene(9, 1, 3);
        s.sh[0][0] = 37.2f32 as f64;
        let back = read(&to_bytes(&s)[..]).unwrap();
        assert_eq!(back.sh[0][0], 37.2f32 as f64);
    }

    #[test]
    fn rest_coefficients_are_channel_major() {
        let mut s = random_scene(1, 1, 1);
        s.sh = vec![[0.0; 3], [1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]];
        let bytes = to_bytes(&s);
        let body = &bytes[bytes.len() - 4 * (9 + 9 + 1 + 3 + 4)..];
        let f = |i: usize| f32::from_le_bytes(body[i * 4..i * 4 + 4].try_into().unwrap());
        let rest: Vec<f32> = (9..18).map(f).collect();
        assert_eq!(rest, vec![1.0, 4.0, 7.0, 2.0, 5.0, 8.0, 3.0, 6.0, 9.0]);
    }

    #[test]
    fn truncation_names_the_element() {
        let bytes = to_bytes(&random_scene(2, 4, 2));
        let err = read(&bytes[..bytes.len() - 10]).unwrap_err();
        assert!(matches!(&err, PlyError::Truncated { element, index: 3, count: 4 } if element == "vertex"), "{err}");
        assert!(err.to_string().contains("'vertex'"));
        let head_only = b"ply\nformat binary_little_endian 1.0\nelement vertex 2\n";
        assert!(matches!(read(&head_only[..]), Err(PlyError::Header(_))));
        assert!(matches!(read(&b"plx\n"[..]), Err(PlyError::NotPly)));
    }

    #[test]
    fn missing_property_and_ascii_are_rejected() {
        let text = "ply\nformat binary_little_endian 1.0\nelement vertex 0\nproperty float x\nend_header\n";
        assert!(matches!(read(text.as_bytes()), Err(PlyError::MissingProperty(p)) if p == "y"));
        let ascii = "ply\nformat ascii 1.0\nend_header\n";
        assert!(matches!(read(ascii.as_bytes()), Err(PlyError::UnsupportedFormat(_))));
    }
}
