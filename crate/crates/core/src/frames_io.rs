//! Frame ensemble persistence.
//!
//! Binary layout, little-endian: magic `HPLF`, version `u32`, frame length
//! `u32`, frame count `u32`, `dt` as `f64`, then every frame as consecutive
//! `f64` samples. The generating configuration is stored beside it in a
//! `.meta` file using the config text format.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::sim::FrameSet;
use crate::spectral::TimeGrid;

pub const MAGIC: [u8; 4] = *b"HPLF";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8;

fn format_error(path: &Path, reason: impl Into<String>) -> Error {
    Error::FrameFormat {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub fn write_frames(path: impl AsRef<Path>, frames: &FrameSet) -> Result<()> {
    let path = path.as_ref();
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| format_error(path, format!("{what} {v} does not fit in u32")))
    };
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&to_u32(frames.frame_len(), "frame length")?.to_le_bytes())?;
    out.write_all(&to_u32(frames.len(), "frame count")?.to_le_bytes())?;
    out.write_all(&frames.grid.dt.to_le_bytes())?;
    for v in frames.as_slice() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_frames(path: impl AsRef<Path>) -> Result<FrameSet> {
    let path = path.as_ref();
    let mut input = BufReader::new(File::open(path)?);
    let mut header = [0u8; HEADER_LEN];
    input
        .read_exact(&mut header)
        .map_err(|_| format_error(path, "truncated header"))?;
    if header[..4] != MAGIC {
        return Err(format_error(path, "bad magic, not an HPLF frame file"));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != FORMAT_VERSION {
        return Err(format_error(path, format!("unsupported version {version}")));
    }
    let frame_len = word(8) as usize;
    let n_frames = word(12) as usize;
    let dt = f64::from_le_bytes(header[16..24].try_into().unwrap());
    let grid = TimeGrid::new(dt, frame_len).map_err(|e| format_error(path, e.to_string()))?;

    let expected = frame_len
        .checked_mul(n_frames)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| format_error(path, "header sizes overflow"))?;
    let mut bytes = Vec::with_capacity(expected);
    input.read_to_end(&mut bytes)?;
    if bytes.len() != expected {
        return Err(format_error(
            path,
            format!("payload has {} bytes, header promises {expected}", bytes.len()),
        ));
    }
    let samples: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteData(i));
    }
    FrameSet::new(grid, samples)
}

/// `frames.bin` → `frames.bin.meta`.
pub fn meta_path(path: impl AsRef<Path>) -> PathBuf {
    let mut os = path.as_ref().as_os_str().to_owned();
    os.push(".meta");
    PathBuf::from(os)
}

pub fn write_meta(path: impl AsRef<Path>, config: &ExperimentConfig) -> Result<()> {
    std::fs::write(meta_path(path), config.to_text())?;
    Ok(())
}

/// Configuration stored beside a frame file, if present.
pub fn read_meta(path: impl AsRef<Path>) -> Result<Option<ExperimentConfig>> {
    let meta = meta_path(path);
    if !meta.exists() {
        return Ok(None);
    }
    ExperimentConfig::from_file(meta).map(Some)
}

/// CSV export, one frame per row, no header. `dt` is not stored.
pub fn write_frames_csv(path: impl AsRef<Path>, frames: &FrameSet) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(path.as_ref())?;
    for frame in frames.iter() {
        writer.write_record(frame.iter().map(|v| format!("{v:e}")))?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads frames written by [`write_frames_csv`] (or any header-less CSV of
/// equal-length rows) onto a grid with spacing `dt`.
pub fn read_frames_csv(path: impl AsRef<Path>, dt: f64) -> Result<FrameSet> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut samples = Vec::new();
    let mut frame_len = None;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| format_error(path, e.to_string()))?;
        if *frame_len.get_or_insert(record.len()) != record.len() {
            return Err(format_error(path, format!("row {} has {} columns", row + 1, record.len())));
        }
        for field in &record {
            let v: f64 = field
                .parse()
                .map_err(|_| format_error(path, format!("row {}: cannot parse {field:?}", row + 1)))?;
            if !v.is_finite() {
                return Err(Error::NonFiniteData(samples.len()));
            }
            samples.push(v);
        }
    }
    let frame_len = frame_len.ok_or_else(|| format_error(path, "no frames"))?;
    let grid = TimeGrid::new(dt, frame_len).map_err(|e| format_error(path, e.to_string()))?;
    FrameSet::new(grid, samples)
}
