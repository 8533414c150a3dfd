//! Binary feature-file container: a small text header followed by row-major
//! (frame-major) little-endian f64 values.

use crate::featuremap::FeatureSequence;
use crate::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &str = "relkit-features 1";

/// Serialize a feature sequence:
///
/// ```text
/// relkit-features 1
/// dim = <D_c>
/// frames = <T>
/// dtype = f64le
/// frame_width_ms = <f64>
/// frame_stride_ms = <f64>
/// <blank line>
/// <T * D_c little-endian f64, frame-major>
/// ```
pub fn write_features(path: &Path, seq: &FeatureSequence<f64>) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC.as_bytes());
    out.push(b'\n');
    out.extend_from_slice(format!("dim = {}\n", seq.dim()).as_bytes());
    out.extend_from_slice(format!("frames = {}\n", seq.len()).as_bytes());
    out.extend_from_slice(b"dtype = f64le\n");
    out.extend_from_slice(format!("frame_width_ms = {}\n", seq.frame_width_ms).as_bytes());
    out.extend_from_slice(format!("frame_stride_ms = {}\n", seq.frame_stride_ms).as_bytes());
    out.push(b'\n');
    for t in 0..seq.len() {
        for v in seq.frame(t) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_features(path: &Path) -> Result<FeatureSequence<f64>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_features(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_features(bytes: &[u8]) -> Result<FeatureSequence<f64>> {
    // header ends at the first blank line
    let mut header_end = None;
    for i in 0..bytes.len().saturating_sub(1) {
        if bytes[i] == b'\n' && bytes[i + 1] == b'\n' {
            header_end = Some(i + 2);
            break;
        }
    }
    let header_end = header_end.ok_or_else(|| Error::Format("missing header terminator".into()))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::Format("header is not utf-8".into()))?;
    let mut lines = header.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::Format(format!("bad magic, expected '{MAGIC}'")));
    }
    let mut dim = None;
    let mut frames = None;
    let mut dtype = None;
    let mut width = 25.0;
    let mut stride = 20.0;
    for line in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("malformed header line '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "dim" => dim = Some(parse_usize(key, value)?),
            "frames" => frames = Some(parse_usize(key, value)?),
            "dtype" => dtype = Some(value.to_string()),
            "frame_width_ms" => width = parse_f64(key, value)?,
            "frame_stride_ms" => stride = parse_f64(key, value)?,
            other => return Err(Error::Format(format!("unknown header key '{other}'"))),
        }
    }
    let dim = dim.ok_or_else(|| Error::Format("missing dim".into()))?;
    let frames = frames.ok_or_else(|| Error::Format("missing frames".into()))?;
    if dtype.as_deref() != Some("f64le") {
        return Err(Error::Format(format!("unsupported dtype {dtype:?}")));
    }
    let body = &bytes[header_end..];
    let expected = dim * frames * 8;
    if body.len() != expected {
        return Err(Error::Format(format!(
            "body has {} bytes, expected {expected}",
            body.len()
        )));
    }
    let mut rows = Vec::with_capacity(frames);
    for t in 0..frames {
        let row: Vec<f64> = (0..dim)
            .map(|d| {
                let at = (t * dim + d) * 8;
                f64::from_le_bytes(body[at..at + 8].try_into().unwrap())
            })
            .collect();
        rows.push(row);
    }
    Ok(FeatureSequence::new(dim, rows)?.with_frame_geometry(width, stride))
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::Format(format!("bad {key} value '{value}'")))
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse()
        .map_err(|_| Error::Format(format!("bad {key} value '{value}'")))
}
