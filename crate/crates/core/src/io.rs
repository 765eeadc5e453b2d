//! Raster and volume file formats plus atomic file writes.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Write to a sibling temporary file, flush, then rename over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp: PathBuf = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

pub fn encode_pgm8(width: usize, height: usize, data: &[u8]) -> Vec<u8> {
    assert_eq!(data.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(data);
    out
}

pub fn encode_pgm16(width: usize, height: usize, data: &[u16]) -> Vec<u8> {
    assert_eq!(data.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for v in data {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub data: Vec<u16>,
}

fn token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos]).map_err(|_| Error::InvalidConfig("bad PGM header".into()))
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Pgm> {
    let mut pos = 0;
    if token(bytes, &mut pos)? != "P5" {
        return Err(Error::InvalidConfig("not a binary PGM".into()));
    }
    let num = |pos: &mut usize| -> Result<usize> {
        token(bytes, pos)?.parse().map_err(|_| Error::InvalidConfig("bad PGM header".into()))
    };
    let width = num(&mut pos)?;
    let height = num(&mut pos)?;
    let maxval = num(&mut pos)?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::InvalidConfig(format!("PGM maxval {maxval}")));
    }
    pos += 1;
    let n = width * height;
    let body = &bytes[pos.min(bytes.len())..];
    let data: Vec<u16> = if maxval < 256 {
        if body.len() < n {
            return Err(Error::InvalidConfig("truncated PGM".into()));
        }
        body[..n].iter().map(|&b| b as u16).collect()
    } else {
        if body.len() < 2 * n {
            return Err(Error::InvalidConfig("truncated PGM".into()));
        }
        body[..2 * n].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    };
    Ok(Pgm { width, height, maxval: maxval as u16, data })
}

/// Square-rooted, max-normalized 16-bit image of nonnegative values.
pub fn sqrt_scaled_u16(values: &[f64]) -> Vec<u16> {
    let max = values.iter().cloned().fold(0.0f64, f64::max).sqrt();
    values
        .iter()
        .map(|&v| if max > 0.0 { (v.max(0.0).sqrt() / max * 65535.0).round() as u16 } else { 0 })
        .collect()
}

/// Linear map of `[min, max]` onto the 16-bit range.
pub fn linear_scaled_u16(values: &[f64]) -> Vec<u16> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|&v| if hi > lo { ((v - lo) / (hi - lo) * 65535.0).round() as u16 } else { 0 })
        .collect()
}

/// Sidecar describing a flat little-endian f32 array, first axis slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawSidecar {
    pub dims: Vec<usize>,
    /// Physical extent per axis as `[lo, hi]`.
    pub extent: Vec<[f64; 2]>,
    pub dtype: String,
    pub byte_order: String,
}

impl RawSidecar {
    pub fn new(dims: Vec<usize>, extent: Vec<[f64; 2]>) -> Self {
        RawSidecar { dims, extent, dtype: "f32".into(), byte_order: "little".into() }
    }
}

pub fn encode_f32(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect()
}

pub fn decode_f32(bytes: &[u8]) -> Vec<f32> {
    bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect()
}

pub fn write_f32_with_sidecar(path: &Path, values: &[f64], sidecar: &RawSidecar) -> Result<()> {
    let expected: usize = sidecar.dims.iter().product();
    if expected != values.len() {
        return Err(Error::InvalidConfig(format!("{} values for dims {:?}", values.len(), sidecar.dims)));
    }
    atomic_write(path, &encode_f32(values))?;
    let side = path.with_extension("json");
    atomic_write(&side, serde_json::to_string_pretty(sidecar)?.as_bytes())?;
    Ok(())
}

pub fn read_f32_with_sidecar(path: &Path) -> Result<(Vec<f32>, RawSidecar)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let side: RawSidecar = serde_json::from_slice(&fs::read(path.with_extension("json"))?)?;
    let vals = decode_f32(&bytes);
    if vals.len() != side.dims.iter().product::<usize>() {
        return Err(Error::InvalidConfig("raw file size does not match its sidecar".into()));
    }
    Ok((vals, side))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip() {
        let data: Vec<u16> = (0..12).map(|i| i * 5000).collect();
        let p = decode_pgm(&encode_pgm16(4, 3, &data)).unwrap();
        assert_eq!((p.width, p.height, p.maxval), (4, 3, 65535));
        assert_eq!(p.data, data);
        let b: Vec<u8> = (0..6).collect();
        let p = decode_pgm(&encode_pgm8(3, 2, &b)).unwrap();
        assert_eq!(p.data, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn sqrt_scaling() {
        let v = sqrt_scaled_u16(&[0.0, 0.25, 1.0]);
        assert_eq!(v, vec![0, 32768, 65535]);
    }

    #[test]
    fn raw_round_trip() {
        let dir = std::env::temp_dir().join(format!("incoh-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join("v.f32");
        let side = RawSidecar::new(vec![2, 3], vec![[-1.0, 1.0], [-1.0, 1.0]]);
        write_f32_with_sidecar(&p, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.5], &side).unwrap();
        let (v, s) = read_f32_with_sidecar(&p).unwrap();
        assert_eq!(v, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.5]);
        assert_eq!(s, side);
        assert!(write_f32_with_sidecar(&p, &[1.0], &side).is_err());
        fs::remove_dir_all(&dir).unwrap();
    }
}
