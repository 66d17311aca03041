//! Frame sequence ingestion and output.
//!
//! Frames are loaded as grayscale, resized, and vectorized column-major into
//! the columns of an `(height * width) x n_frames` matrix.

pub mod pgm;

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

pub use pgm::Gray8;

/// Ordered frame sequence with optional ground-truth masks.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub height: usize,
    pub width: usize,
    /// `(height * width) x n` matrix; column `j` is frame `j`.
    pub frames: DenseMatrix,
    /// Binary masks with entries in `{0, 255}`, same shape as `frames`.
    pub ground_truth: Option<DenseMatrix>,
    pub names: Vec<String>,
}

impl Dataset {
    pub fn n_frames(&self) -> usize {
        self.frames.ncols()
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn frame(&self, j: usize) -> DenseMatrix {
        devectorize(self.frames.column(j).as_slice(), self.height, self.width)
    }
}

/// On-disk description of a dataset, with globs relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub height: usize,
    pub width: usize,
    pub n_frames: usize,
    pub frame_glob: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_glob: Option<String>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::data(path, format!("bad manifest: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Column-major stacking of an `h x w` frame.
pub fn vectorize(frame: &DenseMatrix) -> Vec<f64> {
    frame.as_slice().to_vec()
}

pub fn devectorize(column: &[f64], height: usize, width: usize) -> DenseMatrix {
    assert_eq!(column.len(), height * width, "column length must equal height * width");
    DenseMatrix::from_column_slice(height, width, column)
}

/// Bilinear resampling with half-pixel centres and edge clamping.
pub fn resize_bilinear(src: &DenseMatrix, height: usize, width: usize) -> DenseMatrix {
    let (sh, sw) = src.shape();
    if (sh, sw) == (height, width) {
        return src.clone();
    }
    let coord = |dst: usize, src_len: usize, dst_len: usize| -> (usize, usize, f64) {
        let x = ((dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5)
            .clamp(0.0, (src_len - 1) as f64);
        let lo = x.floor() as usize;
        let hi = (lo + 1).min(src_len - 1);
        (lo, hi, x - lo as f64)
    };
    DenseMatrix::from_fn(height, width, |i, j| {
        let (y0, y1, fy) = coord(i, sh, height);
        let (x0, x1, fx) = coord(j, sw, width);
        let top = src[(y0, x0)] * (1.0 - fx) + src[(y0, x1)] * fx;
        let bottom = src[(y1, x0)] * (1.0 - fx) + src[(y1, x1)] * fx;
        top * (1.0 - fy) + bottom * fy
    })
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
        Some("pgm" | "pnm" | "png")
    )
}

/// Decodes one grayscale frame as an `h x w` matrix of values in `[0, 255]`.
/// Colour PNGs are converted to luma with BT.601 weights.
pub fn read_frame(path: &Path) -> Result<DenseMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let is_png = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
            .map_err(|e| Error::data(path, e.to_string()))?;
        let rgb = img.to_rgb32f();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        let luma: Vec<f64> = rgb
            .pixels()
            .map(|p| 255.0 * (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64))
            .collect();
        return Ok(DenseMatrix::from_row_slice(h, w, &luma));
    }
    let (w, h, values) = pgm::decode_with_size(&bytes, path)?;
    Ok(DenseMatrix::from_row_slice(h, w, &values))
}

fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

pub fn write_frame(path: &Path, frame: &DenseMatrix) -> Result<()> {
    let (h, w) = frame.shape();
    let mut pixels = Vec::with_capacity(h * w);
    for i in 0..h {
        for j in 0..w {
            pixels.push(quantize(frame[(i, j)]));
        }
    }
    let bytes = pgm::encode(&Gray8 {
        width: w,
        height: h,
        pixels,
    });
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && is_image(&path) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn stack(paths: &[PathBuf], target: Option<(usize, usize)>, mask: bool) -> Result<(usize, usize, DenseMatrix)> {
    let mut source_shape = None;
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(paths.len());
    let mut shape = (0, 0);
    for path in paths {
        let raw = read_frame(path)?;
        match source_shape {
            None => source_shape = Some(raw.shape()),
            Some(s) if s != raw.shape() => {
                return Err(Error::data(
                    path,
                    format!("frame is {}x{}, expected {}x{}", raw.nrows(), raw.ncols(), s.0, s.1),
                ))
            }
            _ => {}
        }
        let (h, w) = target.unwrap_or(raw.shape());
        let mut frame = resize_bilinear(&raw, h, w);
        if mask {
            frame.apply(|v| *v = if *v >= 127.5 { 255.0 } else { 0.0 });
        }
        shape = (h, w);
        columns.push(vectorize(&frame));
    }
    let m = shape.0 * shape.1;
    let mut out = DenseMatrix::zeros(m, columns.len());
    for (j, col) in columns.iter().enumerate() {
        out.column_mut(j).copy_from_slice(col);
    }
    Ok((shape.0, shape.1, out))
}

/// Loads every image in `frames_dir` in lexicographic order, optionally with
/// masks of the same file names from `gt_dir`, resized to `target`
/// (`(height, width)`; `None` keeps the source geometry).
pub fn load_dataset(frames_dir: &Path, gt_dir: Option<&Path>, target: Option<(usize, usize)>) -> Result<Dataset> {
    let frame_paths = list_images(frames_dir)?;
    let mask_paths = match gt_dir {
        None => None,
        Some(dir) => Some(
            frame_paths
                .iter()
                .map(|p| {
                    let m = dir.join(p.file_name().unwrap_or_default());
                    if m.is_file() {
                        Ok(m)
                    } else {
                        Err(Error::data(&m, "missing ground-truth mask"))
                    }
                })
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    build_dataset(frames_dir, &frame_paths, mask_paths.as_deref(), target)
}

fn build_dataset(
    origin: &Path,
    frame_paths: &[PathBuf],
    mask_paths: Option<&[PathBuf]>,
    target: Option<(usize, usize)>,
) -> Result<Dataset> {
    if frame_paths.is_empty() {
        return Err(Error::data(origin, "no decodable frames found"));
    }
    let (height, width, frames) = stack(frame_paths, target, false)?;
    let ground_truth = match mask_paths {
        None => None,
        Some(paths) => {
            if paths.len() != frame_paths.len() {
                return Err(Error::data(
                    origin,
                    format!("{} frames but {} masks", frame_paths.len(), paths.len()),
                ));
            }
            let (mh, mw, masks) = stack(paths, Some((height, width)), true)?;
            debug_assert_eq!((mh, mw), (height, width));
            Some(masks)
        }
    };
    Ok(Dataset {
        height,
        width,
        frames,
        ground_truth,
        names: frame_paths.iter().map(|p| file_name(p)).collect(),
    })
}

fn glob_sorted(base: &Path, pattern: &str) -> Result<Vec<PathBuf>> {
    let full = base.join(pattern);
    let full = full.to_string_lossy();
    let mut out: Vec<PathBuf> = glob::glob(&full)
        .map_err(|e| Error::data(base, format!("bad glob `{pattern}`: {e}")))?
        .filter_map(|p| p.ok())
        .filter(|p| p.is_file())
        .collect();
    out.sort();
    Ok(out)
}

/// Loads the dataset a manifest describes, resized to its geometry.
pub fn load_manifest(path: &Path) -> Result<Dataset> {
    let manifest = Manifest::read(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let frames = glob_sorted(base, &manifest.frame_glob)?;
    if frames.len() != manifest.n_frames {
        return Err(Error::data(
            path,
            format!("manifest lists {} frames, glob matched {}", manifest.n_frames, frames.len()),
        ));
    }
    let masks = match &manifest.gt_glob {
        Some(g) => Some(glob_sorted(base, g)?),
        None => None,
    };
    build_dataset(path, &frames, masks.as_deref(), Some((manifest.height, manifest.width)))
}

/// Writes one 8-bit frame per column as `frame_000001.pgm`, ... .
pub fn save_frames(matrix: &DenseMatrix, height: usize, width: usize, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let names: Vec<String> = (1..=matrix.ncols()).map(|j| format!("frame_{j:06}.pgm")).collect();
    save_frames_named(matrix, height, width, out_dir, &names)
}

pub fn save_frames_named(
    matrix: &DenseMatrix,
    height: usize,
    width: usize,
    out_dir: &Path,
    names: &[String],
) -> Result<Vec<PathBuf>> {
    if matrix.nrows() != height * width {
        return Err(Error::Shape(format!(
            "matrix has {} rows, frames need {}",
            matrix.nrows(),
            height * width
        )));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::with_capacity(matrix.ncols());
    for (j, name) in names.iter().enumerate().take(matrix.ncols()) {
        let path = out_dir.join(name);
        write_frame(&path, &devectorize(matrix.column(j).as_slice(), height, width))?;
        written.push(path);
    }
    Ok(written)
}

const MATRIX_MAGIC: &[u8; 4] = b"WLRM";

/// Raw little-endian `f64` dump: magic, rows and cols as `u64`, then the
/// entries in column-major order.
pub fn write_matrix(path: &Path, matrix: &DenseMatrix) -> Result<()> {
    let mut buf = Vec::with_capacity(20 + 8 * matrix.len());
    buf.extend_from_slice(MATRIX_MAGIC);
    buf.extend_from_slice(&(matrix.nrows() as u64).to_le_bytes());
    buf.extend_from_slice(&(matrix.ncols() as u64).to_le_bytes());
    for v in matrix.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let mut buf = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    if buf.len() < 20 || &buf[..4] != MATRIX_MAGIC {
        return Err(Error::data(path, "not a matrix file"));
    }
    let rows = u64::from_le_bytes(buf[4..12].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(buf[12..20].try_into().unwrap()) as usize;
    let body = &buf[20..];
    if body.len() != 8 * rows * cols {
        return Err(Error::data(path, "matrix file size does not match its header"));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(DenseMatrix::from_vec(rows, cols, values))
}
