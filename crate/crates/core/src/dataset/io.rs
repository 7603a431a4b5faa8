use std::fs;
use std::io::Write;
use std::path::Path;

use super::{SdfSample, ShapeSamples, ShapeSource};
use crate::error::{Result, SdfError};
use crate::geometry::Point3;

pub const MAGIC: &[u8; 8] = b"SDFSAMP1";
const RECORD: usize = 16;

/// Writes the binary sample file: magic, `u32` count, then `count` records of
/// four little-endian `f32` (x, y, z, s).
pub fn save_samples(samples: &ShapeSamples, path: &Path) -> Result<()> {
    let count = u32::try_from(samples.len()).map_err(|_| SdfError::invalid("too many samples for one file"))?;
    let mut buf = Vec::with_capacity(12 + RECORD * samples.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&count.to_le_bytes());
    for s in &samples.samples {
        for v in [s.x.x, s.x.y, s.x.z, s.s] {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_samples(path: &Path, shape_id: &str) -> Result<ShapeSamples> {
    let bytes = fs::read(path).map_err(|e| SdfError::File {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    let samples = parse_samples(&bytes)?;
    Ok(ShapeSamples {
        shape_id: shape_id.to_owned(),
        samples,
        source: ShapeSource::Unknown,
    })
}

pub fn parse_samples(bytes: &[u8]) -> Result<Vec<SdfSample>> {
    if bytes.len() < 8 || &bytes[..8] != MAGIC {
        return Err(SdfError::parse(0, "bad magic bytes"));
    }
    if bytes.len() < 12 {
        return Err(SdfError::parse(8, "missing sample count"));
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() != count * RECORD {
        let complete = body.len() / RECORD;
        let offset = 12 + (complete.min(count) * RECORD) as u64;
        let message = if body.len() < count * RECORD {
            format!("truncated: expected {count} records, found {complete}")
        } else {
            "trailing bytes after the last record".into()
        };
        return Err(SdfError::parse(offset, message));
    }
    let mut out = Vec::with_capacity(count);
    for (i, rec) in body.chunks_exact(RECORD).enumerate() {
        let f = |k: usize| f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().unwrap()) as f64;
        let sample = SdfSample {
            x: Point3::new(f(0), f(1), f(2)),
            s: f(3),
        };
        if !(sample.x.iter().all(|c| c.is_finite()) && sample.s.is_finite()) {
            return Err(SdfError::parse((12 + i * RECORD) as u64, "non-finite value"));
        }
        out.push(sample);
    }
    Ok(out)
}

/// One `x y z s` line per sample, for inspection.
pub fn write_samples_text(samples: &ShapeSamples, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# shape {} ({} samples): x y z s", samples.shape_id, samples.len())?;
    for s in &samples.samples {
        writeln!(w, "{:?} {:?} {:?} {:?}", s.x.x, s.x.y, s.x.z, s.s)?;
    }
    w.flush()?;
    Ok(())
}
