//! PNG and feature-CSV boundaries.
//!
//! Images cross the file boundary as 8-bit gray or RGB PNG: byte `p` loads as
//! `p / 255` and value `v` saves as `floor(255 v + 0.5)`. Features use a CSV
//! with header `id,modality,f0,...,f{d-1}`, one row per sample.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{FeatureVec, Image, LabeledFeature, Modality};

/// Loads an 8-bit grayscale or RGB PNG into `[0, 1]` values.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let (color, depth) = {
        let info = reader.info();
        (info.color_type, info.bit_depth)
    };
    if depth != png::BitDepth::Eight {
        return Err(Error::Format(format!(
            "{}: unsupported bit depth {depth:?}; expected 8-bit",
            path.display()
        )));
    }
    let channels = match color {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => {
            return Err(Error::Format(format!(
                "{}: unsupported color type {other:?}; expected grayscale or RGB",
                path.display()
            )))
        }
    };
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Format(format!("{}: image too large", path.display())))?;
    let mut buf = vec![0u8; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let width = frame.width as usize;
    let height = frame.height as usize;
    let stride = frame.line_size;

    let mut data = vec![0.0; channels * height * width];
    for y in 0..height {
        let row = &buf[y * stride..y * stride + width * channels];
        for x in 0..width {
            for c in 0..channels {
                data[(c * height + y) * width + x] = f64::from(row[x * channels + c]) / 255.0;
            }
        }
    }
    Image::new(channels, height, width, data)
}

/// Quantizes a `[0, 1]` value to a byte with round-half-up.
pub fn quantize(value: f64) -> u8 {
    (255.0 * value + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Writes a 1- or 3-channel image as an 8-bit PNG.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let color = match img.channels() {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        c => {
            return Err(Error::arg(format!(
                "PNG output supports 1 or 3 channels, image has {c}"
            )))
        }
    };
    let (c, h, w) = (img.channels(), img.height(), img.width());
    let mut bytes = vec![0u8; c * h * w];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                bytes[(y * w + x) * c + ch] = quantize(img.get(ch, x, y));
            }
        }
    }

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    let encode_err = |e: png::EncodingError| match e {
        png::EncodingError::IoError(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other}", path.display())),
    };
    let mut writer = encoder.write_header().map_err(encode_err)?;
    writer.write_image_data(&bytes).map_err(encode_err)?;
    writer.finish().map_err(encode_err)?;
    Ok(())
}

/// Writes labeled features as `id,modality,f0..f{d-1}` with LF line endings.
pub fn write_features(features: &[LabeledFeature], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dim = features.first().map_or(0, |f| f.feature.dim());
    if let Some(bad) = features.iter().find(|f| f.feature.dim() != dim) {
        return Err(Error::shape(format!(
            "feature dimension {} differs from {dim}",
            bad.feature.dim()
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));

    let mut header = vec!["id".to_string(), "modality".to_string()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    writer.write_record(&header).map_err(csv_err)?;
    for f in features {
        let mut row = vec![f.identity.to_string(), f.modality.as_str().to_string()];
        row.extend(f.feature.iter().map(|v| format!("{v:?}")));
        writer.write_record(&row).map_err(csv_err)?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

/// Reads a feature CSV written by [`write_features`] or by hand.
pub fn read_features(path: impl AsRef<Path>) -> Result<Vec<LabeledFeature>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let loc = |line: u64| format!("{}:{line}", path.display());

    let headers = reader
        .headers()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        .clone();
    if headers.len() < 3 || &headers[0] != "id" || &headers[1] != "modality" {
        return Err(Error::Format(format!(
            "{}: header must be `id,modality,f0,...`",
            path.display()
        )));
    }
    for (i, name) in headers.iter().skip(2).enumerate() {
        if name != format!("f{i}") {
            return Err(Error::Format(format!(
                "{}: column {} should be `f{i}`, found `{name}`",
                path.display(),
                i + 2
            )));
        }
    }

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let identity: u32 = record[0]
            .parse()
            .map_err(|_| Error::Format(format!("{}: bad id `{}`", loc(line), &record[0])))?;
        let modality: Modality = record[1]
            .parse()
            .map_err(|e| Error::Format(format!("{}: {e}", loc(line))))?;
        let values = record
            .iter()
            .skip(2)
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Format(format!("{}: bad value `{s}`", loc(line))))
            })
            .collect::<Result<Vec<_>>>()?;
        let feature =
            FeatureVec::new(values).map_err(|e| Error::Format(format!("{}: {e}", loc(line))))?;
        out.push(LabeledFeature::new(feature, identity, modality));
    }
    Ok(out)
}
