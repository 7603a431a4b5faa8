//! OBJ (ASCII) and PLY (binary little-endian) mesh files.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Point3, TriangleMesh};
use crate::error::{Result, SdfError};

/// Reads `v` and `f` records; polygons are fan-triangulated. Accepts
/// `i`, `i/t`, `i//n`, `i/t/n` face tokens and negative (relative) indices.
pub fn read_obj(path: &Path) -> Result<TriangleMesh> {
    let file = fs::File::open(path).map_err(|e| SdfError::File {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    parse_obj(BufReader::new(file))
}

pub fn parse_obj(reader: impl BufRead) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut offset = 0u64;
    for line in reader.lines() {
        let line = line?;
        let line_offset = offset;
        offset += line.len() as u64 + 1;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| SdfError::parse(line_offset, format!("bad vertex: {e}")))?;
                if coords.len() != 3 {
                    return Err(SdfError::parse(line_offset, "vertex needs 3 coordinates"));
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in tokens {
                    let first = tok.split('/').next().unwrap_or("");
                    let i: i64 = first
                        .parse()
                        .map_err(|_| SdfError::parse(line_offset, format!("bad face index `{tok}`")))?;
                    let resolved = if i > 0 {
                        i - 1
                    } else if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        return Err(SdfError::parse(line_offset, "face index 0 is invalid"));
                    };
                    if resolved < 0 || resolved as usize >= vertices.len() {
                        return Err(SdfError::parse(line_offset, format!("face index {i} out of range")));
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(SdfError::parse(line_offset, "face needs at least 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, triangles)
}

/// Writes an ASCII OBJ; each `comments` entry becomes a `#` header line.
pub fn write_obj(mesh: &TriangleMesh, path: &Path, comments: &[String]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    for v in mesh.vertices() {
        writeln!(w, "v {:?} {:?} {:?}", v.x, v.y, v.z)?;
    }
    for t in mesh.triangles() {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a binary little-endian PLY with f32 vertices and u32 indices.
pub fn write_ply(mesh: &TriangleMesh, path: &Path, comments: &[String]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "ply")?;
    writeln!(w, "format binary_little_endian 1.0")?;
    for c in comments {
        writeln!(w, "comment {c}")?;
    }
    writeln!(w, "element vertex {}", mesh.vertices().len())?;
    writeln!(w, "property float x")?;
    writeln!(w, "property float y")?;
    writeln!(w, "property float z")?;
    writeln!(w, "element face {}", mesh.triangles().len())?;
    writeln!(w, "property list uchar uint vertex_indices")?;
    writeln!(w, "end_header")?;
    for v in mesh.vertices() {
        for c in [v.x, v.y, v.z] {
            w.write_all(&(c as f32).to_le_bytes())?;
        }
    }
    for t in mesh.triangles() {
        w.write_all(&[3u8])?;
        for &i in t {
            w.write_all(&i.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the PLY layout produced by [`write_ply`].
pub fn read_ply(path: &Path) -> Result<TriangleMesh> {
    let bytes = fs::read(path)?;
    let marker = b"end_header\n";
    let header_end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| SdfError::parse(0, "missing end_header"))?
        + marker.len();
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|_| SdfError::parse(0, "header is not UTF-8"))?;
    if !header.starts_with("ply\nformat binary_little_endian 1.0\n") {
        return Err(SdfError::parse(0, "not a binary little-endian PLY"));
    }
    let count = |name: &str| -> Result<usize> {
        header
            .lines()
            .find_map(|l| l.strip_prefix(&format!("element {name} ")))
            .and_then(|n| n.trim().parse().ok())
            .ok_or_else(|| SdfError::parse(0, format!("missing element {name}")))
    };
    let (nv, nf) = (count("vertex")?, count("face")?);
    let mut body = &bytes[header_end..];
    let mut pos = header_end as u64;
    let mut take = |n: usize, body: &mut &[u8]| -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        body.read_exact(&mut buf)
            .map_err(|_| SdfError::parse(pos, "unexpected end of file"))?;
        pos += n as u64;
        Ok(buf)
    };
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let b = take(12, &mut body)?;
        let f = |k: usize| f32::from_le_bytes(b[4 * k..4 * k + 4].try_into().unwrap()) as f64;
        vertices.push(Point3::new(f(0), f(1), f(2)));
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let n = take(1, &mut body)?[0];
        if n != 3 {
            return Err(SdfError::parse(pos - 1, "only triangle faces are supported"));
        }
        let b = take(12, &mut body)?;
        let u = |k: usize| u32::from_le_bytes(b[4 * k..4 * k + 4].try_into().unwrap());
        triangles.push([u(0), u(1), u(2)]);
    }
    TriangleMesh::new(vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn obj_quads_are_fan_triangulated() {
        let text = "# cube face\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 4/4\n";
        let mesh = parse_obj(text.as_bytes()).unwrap();
        assert_eq!(mesh.triangles(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn obj_negative_indices() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n";
        let mesh = parse_obj(text.as_bytes()).unwrap();
        assert_eq!(mesh.triangles(), &[[0, 1, 2]]);
    }

    #[test]
    fn obj_bad_index_reports_offset() {
        let text = "v 0 0 0\nf 1 2 3\n";
        match parse_obj(text.as_bytes()) {
            Err(SdfError::Parse { offset, .. }) => assert_eq!(offset, 8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn obj_and_ply_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = TriangleMesh::icosphere(Point3::zeros(), 0.5, 1);
        let obj = dir.path().join("m.obj");
        write_obj(&mesh, &obj, &["seed=1".into()]).unwrap();
        let back = read_obj(&obj).unwrap();
        assert_eq!(back, mesh);

        let ply = dir.path().join("m.ply");
        write_ply(&mesh, &ply, &["seed=1".into()]).unwrap();
        let back = read_ply(&ply).unwrap();
        assert_eq!(back.triangles(), mesh.triangles());
        for (a, b) in back.vertices().iter().zip(mesh.vertices()) {
            assert!((a - b).norm() < 1e-7);
        }
    }
}
