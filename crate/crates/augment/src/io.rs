//! PNG reading and writing. Photos are 8-bit RGB, distance fields are
//! 16-bit gray with `value = round(field * 65535)`.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};

use crate::image::{BinaryImage, DistanceField, GrayImage, RgbImage};
use crate::{Error, Result};

const FIELD_LEVELS: f32 = 65535.0;

struct Decoded {
    width: usize,
    height: usize,
    channels: usize,
    /// Samples scaled to [0, 1].
    samples: Vec<f32>,
}

fn decode(path: &Path) -> Result<Decoded> {
    let name = path.display().to_string();
    let file = File::open(path).map_err(|source| Error::Io { path: name.clone(), source })?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(Transformations::EXPAND);
    let decode_err = |source| Error::PngDecode { path: name.clone(), source };
    let mut reader = decoder.read_info().map_err(decode_err)?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut buf).map_err(decode_err)?;
    buf.truncate(info.buffer_size());
    let channels = info.color_type.samples();
    let samples = match info.bit_depth {
        BitDepth::Sixteen => buf
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]) as f32 / 65535.0)
            .collect(),
        BitDepth::Eight => buf.iter().map(|&b| b as f32 / 255.0).collect(),
        other => {
            return Err(Error::Image(format!("{name}: unsupported bit depth {other:?}")));
        }
    };
    Ok(Decoded {
        width: info.width as usize,
        height: info.height as usize,
        channels,
        samples,
    })
}

/// Reads gray, gray+alpha, RGB or RGBA; alpha is ignored and gray is
/// replicated across channels.
pub fn read_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let d = decode(path.as_ref())?;
    let data = d
        .samples
        .chunks_exact(d.channels)
        .map(|px| match d.channels {
            1 | 2 => [px[0]; 3],
            _ => [px[0], px[1], px[2]],
        })
        .collect();
    RgbImage::new(d.width, d.height, data)
}

/// Reads any supported PNG as luma in [0, 1].
pub fn read_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let d = decode(path.as_ref())?;
    if d.channels <= 2 {
        let data = d.samples.chunks_exact(d.channels).map(|px| px[0]).collect();
        GrayImage::new(d.width, d.height, data)
    } else {
        Ok(read_rgb(path)?.to_gray())
    }
}

pub fn read_field(path: impl AsRef<Path>) -> Result<DistanceField> {
    let g = read_gray(path)?;
    Ok(DistanceField {
        width: g.width,
        height: g.height,
        data: g.data,
    })
}

fn encode(path: &Path, width: usize, height: usize, color: ColorType, depth: BitDepth, bytes: &[u8]) -> Result<()> {
    let name = path.display().to_string();
    let file = File::create(path).map_err(|source| Error::Io { path: name.clone(), source })?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(depth);
    let encode_err = |source| Error::PngEncode { path: name.clone(), source };
    let mut writer = enc.write_header().map_err(encode_err)?;
    writer.write_image_data(bytes).map_err(encode_err)?;
    writer.finish().map_err(encode_err)
}

fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_rgb(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    let bytes: Vec<u8> = img.data.iter().flat_map(|px| px.map(to_u8)).collect();
    encode(path.as_ref(), img.width, img.height, ColorType::Rgb, BitDepth::Eight, &bytes)
}

pub fn write_gray(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let bytes: Vec<u8> = img.data.iter().map(|&v| to_u8(v)).collect();
    encode(path.as_ref(), img.width, img.height, ColorType::Grayscale, BitDepth::Eight, &bytes)
}

/// Edge pixels white on black.
pub fn write_binary(path: impl AsRef<Path>, img: &BinaryImage) -> Result<()> {
    let bytes: Vec<u8> = img.data.iter().map(|&v| if v { 255 } else { 0 }).collect();
    encode(path.as_ref(), img.width, img.height, ColorType::Grayscale, BitDepth::Eight, &bytes)
}

pub fn quantize_field(v: f32) -> u16 {
    (v.clamp(0.0, 1.0) * FIELD_LEVELS).round() as u16
}

pub fn write_field(path: impl AsRef<Path>, field: &DistanceField) -> Result<()> {
    let bytes: Vec<u8> = field
        .data
        .iter()
        .flat_map(|&v| quantize_field(v).to_be_bytes())
        .collect();
    encode(path.as_ref(), field.width, field.height, ColorType::Grayscale, BitDepth::Sixteen, &bytes)
}
