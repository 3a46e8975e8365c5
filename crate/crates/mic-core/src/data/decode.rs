//! Image decoding: binary PGM (P5) and 8-bit PNG (grayscale or RGB).
//!
//! Decoded tensors are `[h, w, c]` with u8-valued floats in 0..=255; the
//! pipeline rescales to [0, 1] later so decode output stays comparable to
//! the raw container bytes.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Sniff the container from magic bytes and decode.
pub fn decode_image(bytes: &[u8]) -> Result<Tensor<f32>> {
    if bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        decode_png(bytes)
    } else {
        Err(Error::Decode(
            "unsupported container: expected binary PGM (P5) or PNG".into(),
        ))
    }
}

/// Adapt channel count: replicate grayscale to RGB, or collapse RGB to one
/// luma channel (0.299 R + 0.587 G + 0.114 B).
pub fn to_channels(x: &Tensor<f32>, channels: usize) -> Result<Tensor<f32>> {
    let (h, w, c) = match x.shape() {
        [h, w, c] => (*h, *w, *c),
        s => {
            return Err(Error::shape(
                "to_channels",
                format!("expected [h, w, c], got {s:?}"),
            ))
        }
    };
    match (c, channels) {
        (a, b) if a == b => Ok(x.clone()),
        (1, 3) => {
            let mut data = Vec::with_capacity(h * w * 3);
            for &v in x.iter() {
                data.extend_from_slice(&[v, v, v]);
            }
            Tensor::new(vec![h, w, 3], data)
        }
        (3, 1) => {
            let src = x.data();
            let mut data = Vec::with_capacity(h * w);
            for px in src.chunks_exact(3) {
                data.push(0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]);
            }
            Tensor::new(vec![h, w, 1], data)
        }
        (a, b) => Err(Error::Decode(format!(
            "cannot adapt {a}-channel image to {b} channels"
        ))),
    }
}

fn decode_pgm(bytes: &[u8]) -> Result<Tensor<f32>> {
    let mut pos = 2; // past "P5"
    let width = read_pgm_int(bytes, &mut pos)?;
    let height = read_pgm_int(bytes, &mut pos)?;
    let maxval = read_pgm_int(bytes, &mut pos)?;
    if maxval != 255 {
        return Err(Error::Decode(format!(
            "pgm maxval must be 255, got {maxval}"
        )));
    }
    // Exactly one whitespace byte separates the header from raster data.
    pos += 1;
    let expected = width * height;
    let raster = bytes
        .get(pos..pos + expected)
        .ok_or_else(|| Error::Decode(format!("pgm raster truncated: expected {expected} bytes")))?;
    let data = raster.iter().map(|&b| b as f32).collect();
    Tensor::new(vec![height, width, 1], data)
}

fn read_pgm_int(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    // Skip whitespace and `#` comment lines.
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            Some(_) => break,
            None => return Err(Error::Decode("pgm header truncated".into())),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| b.is_ascii_digit()) {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Decode("pgm header: expected an integer".into()));
    }
    let text = std::str::from_utf8(&bytes[start..*pos])
        .map_err(|_| Error::Decode("pgm header is not ascii".into()))?;
    text.parse::<usize>()
        .map_err(|e| Error::Decode(format!("pgm header integer: {e}")))
}

fn decode_png(bytes: &[u8]) -> Result<Tensor<f32>> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Decode(format!("png header: {e}")))?;
    let info = reader.info();
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Decode(format!(
            "png bit depth must be 8, got {:?}",
            info.bit_depth
        )));
    }
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => {
            return Err(Error::Decode(format!(
                "png color type must be grayscale or rgb, got {other:?}"
            )))
        }
    };
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Decode(format!("png raster: {e}")))?;
    let (w, h) = (frame.width as usize, frame.height as usize);
    let data = buf[..frame.buffer_size()]
        .iter()
        .map(|&b| b as f32)
        .collect();
    Tensor::new(vec![h, w, channels], data)
}

/// Binary PGM encoder, the inverse of [`decode_image`] for grayscale data.
pub fn encode_pgm(gray: &[u8], width: usize, height: usize) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(gray);
    out
}

/// 8-bit grayscale PNG encoder used by the synthetic generator.
pub(crate) fn encode_png_gray(gray: &[u8], width: usize, height: usize) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width as u32, height as u32);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::Decode(format!("png encode header: {e}")))?;
        writer
            .write_image_data(gray)
            .map_err(|e| Error::Decode(format!("png encode data: {e}")))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_two_by_two() {
        let bytes = encode_pgm(&[0, 255, 128, 64], 2, 2);
        let t = decode_image(&bytes).unwrap();
        assert_eq!(t.shape(), &[2, 2, 1]);
        assert_eq!(t.data(), &[0.0, 255.0, 128.0, 64.0]);
    }

    #[test]
    fn pgm_with_comment_lines() {
        let mut bytes = b"P5\n# made by hand\n2 1\n# another\n255\n".to_vec();
        bytes.extend_from_slice(&[10, 200]);
        let t = decode_image(&bytes).unwrap();
        assert_eq!(t.shape(), &[1, 2, 1]);
        assert_eq!(t.data(), &[10.0, 200.0]);
    }

    #[test]
    fn solid_red_png() {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, 2, 2);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[255, 0, 0].repeat(4)).unwrap();
        }
        let t = decode_image(&out).unwrap();
        assert_eq!(t.shape(), &[2, 2, 3]);
        for px in t.data().chunks(3) {
            assert_eq!(px, &[255.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn png_and_pgm_of_same_image_decode_equal() {
        // Cross-codec oracle on a generated gradient image.
        let (w, h) = (5, 4);
        let gray: Vec<u8> = (0..w * h).map(|i| (i * 13 % 256) as u8).collect();
        let png_bytes = encode_png_gray(&gray, w, h).unwrap();
        let pgm_bytes = encode_pgm(&gray, w, h);
        let a = decode_image(&png_bytes).unwrap();
        let b = decode_image(&pgm_bytes).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corrupt_and_unsupported_containers_diagnose() {
        let err = decode_image(b"GIF89a").unwrap_err().to_string();
        assert!(err.contains("unsupported"), "{err}");
        let err = decode_image(b"P5\n2 2\n255\n\x00").unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
        let err = decode_image(b"P5\n2 2\n65535\n").unwrap_err().to_string();
        assert!(err.contains("maxval"), "{err}");
    }

    #[test]
    fn channel_adaptation() {
        let gray = Tensor::new(vec![1, 2, 1], vec![10.0, 20.0]).unwrap();
        let rgb = to_channels(&gray, 3).unwrap();
        assert_eq!(rgb.data(), &[10.0, 10.0, 10.0, 20.0, 20.0, 20.0]);

        let color = Tensor::new(vec![1, 1, 3], vec![255.0, 0.0, 0.0]).unwrap();
        let luma = to_channels(&color, 1).unwrap();
        assert!((luma.data()[0] - 0.299 * 255.0).abs() < 1e-4);

        assert_eq!(to_channels(&gray, 1).unwrap(), gray);
    }
}
