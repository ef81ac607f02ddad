//! Binary Netpbm I/O: P6 (RGB) and P5 (gray), maxval 255 only.

use std::fs;
use std::path::Path;

use super::{quantize, EdgeMap, Image, LabelMap};
use crate::error::{Error, Result};

/// An 8-bit single-channel raster as stored in a P5 file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gray {
    pub height: usize,
    pub width: usize,
    pub bytes: Vec<u8>,
}

impl Gray {
    /// Values scaled to `[0, 1]`.
    pub fn to_unit(&self) -> Vec<f64> {
        self.bytes.iter().map(|&b| b as f64 / 255.0).collect()
    }

    pub fn into_label_map(self) -> Result<LabelMap> {
        LabelMap::new(self.height, self.width, self.bytes)
    }
}

struct Header {
    width: usize,
    height: usize,
    payload_start: usize,
}

fn parse_header(bytes: &[u8], magic: &'static str, path: &Path) -> Result<Header> {
    if bytes.len() < 2 || &bytes[..2] != magic.as_bytes() {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: magic,
            found: String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned(),
        });
    }
    let malformed = |reason: &str| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(malformed("header ended early")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(malformed("expected a decimal number"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| malformed("number out of range"))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(malformed("missing whitespace after maxval")),
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::UnsupportedMaxval {
            path: path.to_path_buf(),
            maxval,
        });
    }
    if width == 0 || height == 0 {
        return Err(malformed("zero image dimension"));
    }
    Ok(Header {
        width: width as usize,
        height: height as usize,
        payload_start: pos,
    })
}

fn payload<'a>(bytes: &'a [u8], header: &Header, channels: usize, path: &Path) -> Result<&'a [u8]> {
    let expected = header.width * header.height * channels;
    let available = bytes.len() - header.payload_start;
    if available < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found: available,
        });
    }
    Ok(&bytes[header.payload_start..header.payload_start + expected])
}

pub fn decode_ppm(bytes: &[u8], path: &Path) -> Result<Image> {
    let header = parse_header(bytes, "P6", path)?;
    let raw = payload(bytes, &header, 3, path)?;
    let plane = header.width * header.height;
    let mut data = vec![0.0; 3 * plane];
    for (i, px) in raw.chunks_exact(3).enumerate() {
        for c in 0..3 {
            data[c * plane + i] = px[c] as f64 / 255.0;
        }
    }
    Image::new(header.height, header.width, data)
}

pub fn encode_ppm(image: &Image) -> Vec<u8> {
    let (h, w) = image.dims();
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    let plane = h * w;
    let data = image.data();
    out.reserve(3 * plane);
    for i in 0..plane {
        for c in 0..3 {
            out.push(quantize(data[c * plane + i]));
        }
    }
    out
}

pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<Gray> {
    let header = parse_header(bytes, "P5", path)?;
    let raw = payload(bytes, &header, 1, path)?;
    Ok(Gray {
        height: header.height,
        width: header.width,
        bytes: raw.to_vec(),
    })
}

pub fn encode_pgm(gray: &Gray) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", gray.width, gray.height).into_bytes();
    out.extend_from_slice(&gray.bytes);
    out
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    decode_ppm(&read(path)?, path)
}

pub fn write_ppm(path: impl AsRef<Path>, image: &Image) -> Result<()> {
    write(path.as_ref(), &encode_ppm(image))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Gray> {
    let path = path.as_ref();
    decode_pgm(&read(path)?, path)
}

pub fn write_pgm(path: impl AsRef<Path>, gray: &Gray) -> Result<()> {
    write(path.as_ref(), &encode_pgm(gray))
}

/// Label maps store the raw class index in each byte.
pub fn read_label_map(path: impl AsRef<Path>) -> Result<LabelMap> {
    read_pgm(path)?.into_label_map()
}

pub fn write_label_map(path: impl AsRef<Path>, labels: &LabelMap) -> Result<()> {
    write_pgm(
        path,
        &Gray {
            height: labels.height(),
            width: labels.width(),
            bytes: labels.labels().to_vec(),
        },
    )
}

/// Edge maps store `round(255 · magnitude)`.
pub fn write_edge_map(path: impl AsRef<Path>, edges: &EdgeMap) -> Result<()> {
    write_pgm(
        path,
        &Gray {
            height: edges.height(),
            width: edges.width(),
            bytes: edges.values().iter().map(|&v| quantize(v)).collect(),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("<memory>")
    }

    #[test]
    fn pgm_format_arithmetic() {
        let mut bytes = b"P5 2 2 255\n".to_vec();
        bytes.extend_from_slice(&[0, 85, 170, 255]);
        let g = decode_pgm(&bytes, p()).unwrap();
        assert_eq!((g.height, g.width), (2, 2));
        let v = g.to_unit();
        for (got, want) in v.iter().zip([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]) {
            assert!((got - want).abs() <= 0.5 / 255.0);
        }
    }

    #[test]
    fn distinct_errors() {
        let err = decode_pgm(b"P7 2 2 255\n\0\0\0\0", p()).unwrap_err();
        assert!(matches!(err, Error::BadMagic { .. }));
        let err = decode_pgm(b"P5 2 2 255\n\0\0\0", p()).unwrap_err();
        assert!(matches!(
            err,
            Error::Truncated {
                expected: 4,
                found: 3,
                ..
            }
        ));
        let err = decode_pgm(b"P5 2 2 65535\n\0\0\0\0\0\0\0\0", p()).unwrap_err();
        assert!(matches!(err, Error::UnsupportedMaxval { maxval: 65535, .. }));
        let err = decode_ppm(b"P5 1 1 255\n\0", p()).unwrap_err();
        assert!(matches!(err, Error::BadMagic { .. }));
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P6\n# made by hand\n1 1\n# another\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 51]);
        let img = decode_ppm(&bytes, p()).unwrap();
        assert_eq!(img.pixel(0, 0), [1.0, 0.0, 0.2]);
    }

    #[test]
    fn ppm_roundtrip_quantizes() {
        let img = Image::new(1, 2, vec![0.1, 0.9, 0.5, 0.25, 1.0, 0.0]).unwrap();
        let back = decode_ppm(&encode_ppm(&img), p()).unwrap();
        assert_eq!(back, img.quantized());
    }
}
