//! PNG and binary PGM/PPM reading and writing.
//!
//! Loaded intensities keep their integer values; `peak` records the format's
//! maximum (255, 65535 or the PNM `maxval`). Saving quantizes by rounding and
//! clamping to `[0, peak]`. An integral peak in `1..=65535` is written as-is
//! (PNG only supports 255 and 65535); any other peak is rescaled to 255.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};
use crate::image::{Dataset, Image};
use crate::scalar::Scalar;

const EXTENSIONS: [&str; 4] = ["png", "pgm", "ppm", "pnm"];

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

pub fn load_image<T: Scalar>(path: &Path) -> Result<Image<T>> {
    let bytes = fs::read(path)?;
    decode_image(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Decodes PNG or binary PNM bytes, detected by magic number.
pub fn decode_image<T: Scalar>(bytes: &[u8]) -> Result<Image<T>> {
    if bytes.starts_with(b"\x89PNG") {
        decode_png(bytes)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(bytes)
    } else {
        Err(Error::Format("unrecognized image signature".into()))
    }
}

fn decode_png<T: Scalar>(bytes: &[u8]) -> Result<Image<T>> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::Format(e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let to_t = |v: &u16| T::of(f64::from(*v));
    let to_t8 = |v: &u8| T::of(f64::from(*v));
    match img {
        DynamicImage::ImageLuma8(b) => Image::new(h, w, 1, b.as_raw().iter().map(to_t8).collect(), T::of(255.0)),
        DynamicImage::ImageRgb8(b) => Image::new(h, w, 3, b.as_raw().iter().map(to_t8).collect(), T::of(255.0)),
        DynamicImage::ImageLuma16(b) => Image::new(h, w, 1, b.as_raw().iter().map(to_t).collect(), T::of(65535.0)),
        DynamicImage::ImageRgb16(b) => Image::new(h, w, 3, b.as_raw().iter().map(to_t).collect(), T::of(65535.0)),
        other => Err(Error::Format(format!("unsupported PNG color type {:?}", other.color()))),
    }
}

fn decode_pnm<T: Scalar>(bytes: &[u8]) -> Result<Image<T>> {
    let channels = if bytes[1] == b'5' { 1 } else { 3 };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("malformed PNM header".into()))?;
    }
    let [w, h, maxval] = fields;
    if !(1..=65535).contains(&maxval) {
        return Err(Error::Format(format!("PNM maxval {maxval} out of range")));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Format("malformed PNM header".into()));
    }
    pos += 1;
    let n = w * h * channels;
    let wide = maxval > 255;
    let need = if wide { 2 * n } else { n };
    let raster =
        bytes.get(pos..pos + need).ok_or_else(|| Error::Format(format!("truncated PNM: need {need} bytes")))?;
    let data: Vec<T> = if wide {
        raster.chunks_exact(2).map(|p| T::of(f64::from(u16::from_be_bytes([p[0], p[1]])))).collect()
    } else {
        raster.iter().map(|&v| T::of(f64::from(v))).collect()
    };
    Image::new(h, w, channels, data, T::of(maxval as f64))
}

/// Integer range the image is written with, and the factor applied to reach it.
fn storage_depth<T: Scalar>(image: &Image<T>, png: bool) -> (u32, f64) {
    let p = image.peak().as_f64();
    let integral = p.fract() == 0.0 && (1.0..=65535.0).contains(&p);
    if integral && (!png || p == 255.0 || p == 65535.0) {
        (p as u32, 1.0)
    } else {
        (255, 255.0 / p)
    }
}

fn quantize<T: Scalar>(image: &Image<T>, maxval: u32, scale: f64) -> Vec<u16> {
    image.data().iter().map(|v| (v.as_f64() * scale).round().clamp(0.0, f64::from(maxval)) as u16).collect()
}

/// Encodes an image in the format implied by `ext` (`png`, `pgm`, `ppm`, `pnm`).
pub fn encode_image<T: Scalar>(image: &Image<T>, ext: &str) -> Result<Vec<u8>> {
    let (h, w, c) = image.shape();
    if c != 1 && c != 3 {
        return Err(Error::Format(format!("cannot store {c}-channel image")));
    }
    match ext {
        "png" => {
            let (maxval, scale) = storage_depth(image, true);
            let q = quantize(image, maxval, scale);
            let (w32, h32) = (w as u32, h as u32);
            let dynimg = match (c, maxval) {
                (1, 255) => DynamicImage::ImageLuma8(
                    ImageBuffer::<Luma<u8>, _>::from_raw(w32, h32, q.iter().map(|&v| v as u8).collect()).unwrap(),
                ),
                (3, 255) => DynamicImage::ImageRgb8(
                    ImageBuffer::<Rgb<u8>, _>::from_raw(w32, h32, q.iter().map(|&v| v as u8).collect()).unwrap(),
                ),
                (1, _) => DynamicImage::ImageLuma16(ImageBuffer::<Luma<u16>, _>::from_raw(w32, h32, q).unwrap()),
                _ => DynamicImage::ImageRgb16(ImageBuffer::<Rgb<u16>, _>::from_raw(w32, h32, q).unwrap()),
            };
            let mut out = std::io::Cursor::new(Vec::new());
            dynimg.write_to(&mut out, image::ImageFormat::Png).map_err(|e| Error::Format(e.to_string()))?;
            Ok(out.into_inner())
        }
        "pgm" | "ppm" | "pnm" => {
            if (ext == "pgm" && c != 1) || (ext == "ppm" && c != 3) {
                return Err(Error::Format(format!("{c}-channel image cannot be written as {ext}")));
            }
            let (maxval, scale) = storage_depth(image, false);
            let q = quantize(image, maxval, scale);
            let magic = if c == 1 { "P5" } else { "P6" };
            let mut out = format!("{magic}\n{w} {h}\n{maxval}\n").into_bytes();
            if maxval > 255 {
                out.extend(q.iter().flat_map(|v| v.to_be_bytes()));
            } else {
                out.extend(q.iter().map(|&v| v as u8));
            }
            Ok(out)
        }
        other => Err(Error::Format(format!("unsupported output extension '{other}'"))),
    }
}

pub fn save_image<T: Scalar>(image: &Image<T>, path: &Path) -> Result<()> {
    let bytes = encode_image(image, &extension(path))?;
    write_atomic(path, &bytes)
}

/// Image files in `dir`, sorted lexicographically by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && EXTENSIONS.contains(&extension(p).as_str()))
        .collect();
    out.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(out)
}

pub fn load_dataset<T: Scalar>(dir: &Path, patch_size: Option<usize>) -> Result<Dataset<T>> {
    let items = list_images(dir)?.iter().map(|p| load_image(p)).collect::<Result<Vec<Image<T>>>>()?;
    let patch = patch_size.unwrap_or_else(|| items.iter().map(|i| i.height().min(i.width())).min().unwrap_or(0));
    Dataset::new(items, patch, dir.display().to_string())
}
