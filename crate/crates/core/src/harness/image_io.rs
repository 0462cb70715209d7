//! PNG frames and tensor files as [`FrameSequence`]s.

use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma, Rgb};
use ndarray::{Array4, Ix3, Ix4};

use super::tensor_file::{self, write_atomic};
use crate::error::{shape_err, Error, Result};
use crate::tensor::FrameSequence;

/// `[0, 1]` value to an 8-bit level, rounding half to even.
pub fn quantize(v: f64) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * 255.0).round_ties_even() as u8
}

fn read_png(path: &Path) -> Result<Array4<f64>> {
    let img = image::open(path)?.to_rgb8();
    let (w, h) = img.dimensions();
    Ok(Array4::from_shape_fn((1, h as usize, w as usize, 3), |(_, y, x, c)| {
        img.get_pixel(x as u32, y as u32)[c] as f64 / 255.0
    }))
}

/// PNG files of a directory in name order.
pub fn png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    files.sort();
    Ok(files)
}

/// Reads a tensor file (`T×H×W×C` or `H×W×C`), a single PNG, or a directory
/// of equally sized PNG frames.
pub fn read_sequence(path: &Path) -> Result<FrameSequence> {
    if path.is_dir() {
        let files = png_files(path)?;
        if files.is_empty() {
            return Err(Error::Format(format!("no PNG frames in {}", path.display())));
        }
        let frames = files.iter().map(|f| read_png(f)).collect::<Result<Vec<_>>>()?;
        let views: Vec<_> = frames.iter().map(|f| f.view()).collect();
        let data = ndarray::concatenate(ndarray::Axis(0), &views)
            .map_err(|_| shape_err("PNG frames differ in size"))?;
        return FrameSequence::new(data);
    }
    let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        return FrameSequence::new(read_png(path)?);
    }
    let arr = tensor_file::read_array(path)?;
    let data = match arr.ndim() {
        4 => arr.into_dimensionality::<Ix4>().expect("rank checked"),
        3 => arr.into_dimensionality::<Ix3>().expect("rank checked").insert_axis(ndarray::Axis(0)),
        r => return Err(Error::Format(format!("expected a rank 3 or 4 tensor, got rank {r}"))),
    };
    FrameSequence::new(data)
}

/// Writes `frame_0000.png`, ... into `dir`. One channel gives grayscale,
/// three give RGB.
pub fn write_png_frames(seq: &FrameSequence, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    let (t, h, w, c) = seq.dims();
    let data = seq.data();
    let mut paths = Vec::with_capacity(t);
    for f in 0..t {
        let path = dir.join(format!("{prefix}_{f:04}.png"));
        let mut bytes = Vec::new();
        let mut cursor = std::io::Cursor::new(&mut bytes);
        match c {
            1 => ImageBuffer::<Luma<u8>, _>::from_fn(w as u32, h as u32, |x, y| {
                Luma([quantize(data[[f, y as usize, x as usize, 0]])])
            })
            .write_to(&mut cursor, image::ImageFormat::Png)?,
            3 => ImageBuffer::<Rgb<u8>, _>::from_fn(w as u32, h as u32, |x, y| {
                Rgb(std::array::from_fn(|ch| quantize(data[[f, y as usize, x as usize, ch]])))
            })
            .write_to(&mut cursor, image::ImageFormat::Png)?,
            _ => return Err(shape_err(format!("PNG output needs 1 or 3 channels, got {c}"))),
        }
        write_atomic(&path, &bytes)?;
        paths.push(path);
    }
    Ok(paths)
}
