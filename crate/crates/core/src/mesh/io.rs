//! ASCII OFF and OBJ readers, OFF writer.
//!
//! Only positions and polygon indices are read; normals, texture
//! coordinates, colours and groups are ignored. Polygons with more than
//! three corners are fan-triangulated from their first corner.

use std::io::Write;
use std::path::Path;

use super::{LoadOptions, MeshError, TriangleMesh};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
}

impl MeshFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path
            .extension()?
            .to_str()?
            .to_ascii_lowercase()
            .as_str()
        {
            "off" => Some(Self::Off),
            "obj" => Some(Self::Obj),
            _ => None,
        }
    }
}

/// Reads and validates a mesh file. When `format` is `None` it is taken
/// from the file extension.
pub fn load_mesh(
    path: impl AsRef<Path>,
    format: Option<MeshFormat>,
    options: LoadOptions,
) -> Result<TriangleMesh, MeshError> {
    let path = path.as_ref();
    let format = format
        .or_else(|| MeshFormat::from_path(path))
        .ok_or_else(|| MeshError::Parse {
            line: 0,
            message: format!("cannot infer mesh format of {}", path.display()),
        })?;
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text, format, options)
}

pub fn parse_mesh(
    text: &str,
    format: MeshFormat,
    options: LoadOptions,
) -> Result<TriangleMesh, MeshError> {
    let (vertices, polygons) = match format {
        MeshFormat::Off => parse_off(text)?,
        MeshFormat::Obj => parse_obj(text)?,
    };
    let mut faces = Vec::with_capacity(polygons.len());
    for poly in polygons {
        for k in 1..poly.len() - 1 {
            faces.push([poly[0], poly[k], poly[k + 1]]);
        }
    }
    TriangleMesh::with_options(vertices, faces, options)
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(token: &str, line: usize) -> Result<f64, MeshError> {
    let v: f64 = token
        .parse()
        .map_err(|_| parse_err(line, format!("invalid number `{token}`")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(parse_err(line, format!("non-finite coordinate `{token}`")))
    }
}

type Soup = (Vec<Vec3>, Vec<Vec<usize>>);

fn parse_off(text: &str) -> Result<Soup, MeshError> {
    // (line number, tokens) of every non-empty, non-comment line
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (mut lineno, mut first) = lines.next().ok_or_else(|| parse_err(0, "empty file"))?;
    if first.starts_with("OFF") {
        let rest = first[3..].trim();
        if rest.is_empty() {
            (lineno, first) = lines
                .next()
                .ok_or_else(|| parse_err(lineno, "missing element counts"))?;
        } else {
            first = rest;
        }
    }
    let counts: Vec<usize> = first
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(lineno, "invalid count")))
        .collect::<Result<_, _>>()?;
    if counts.len() < 2 {
        return Err(parse_err(lineno, "expected vertex and face counts"));
    }
    let (nv, nf) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_err(lineno, "unexpected end of vertex list"))?;
        lineno = ln;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() < 3 {
            return Err(parse_err(ln, "vertex needs three coordinates"));
        }
        vertices.push(Vec3::new(
            parse_f64(t[0], ln)?,
            parse_f64(t[1], ln)?,
            parse_f64(t[2], ln)?,
        ));
    }

    let mut polygons = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_err(lineno, "unexpected end of face list"))?;
        lineno = ln;
        let mut t = l.split_whitespace();
        let k: usize = t
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(ln, "invalid polygon size"))?;
        if k < 3 {
            return Err(parse_err(ln, "polygon with fewer than three corners"));
        }
        let poly: Vec<usize> = t
            .take(k)
            .map(|s| s.parse().map_err(|_| parse_err(ln, format!("invalid index `{s}`"))))
            .collect::<Result<_, _>>()?;
        if poly.len() != k {
            return Err(parse_err(ln, "polygon is missing indices"));
        }
        polygons.push(poly);
    }
    Ok((vertices, polygons))
}

fn parse_obj(text: &str) -> Result<Soup, MeshError> {
    let mut vertices = Vec::new();
    let mut polygons = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let l = raw.split('#').next().unwrap_or("").trim();
        let mut t = l.split_whitespace();
        match t.next() {
            Some("v") => {
                let c: Vec<&str> = t.collect();
                if c.len() < 3 {
                    return Err(parse_err(ln, "vertex needs three coordinates"));
                }
                vertices.push(Vec3::new(
                    parse_f64(c[0], ln)?,
                    parse_f64(c[1], ln)?,
                    parse_f64(c[2], ln)?,
                ));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for corner in t {
                    let idx = corner.split('/').next().unwrap_or("");
                    let k: i64 = idx
                        .parse()
                        .map_err(|_| parse_err(ln, format!("invalid index `{corner}`")))?;
                    let resolved = match k {
                        k if k > 0 => k - 1,
                        k if k < 0 => vertices.len() as i64 + k,
                        _ => return Err(parse_err(ln, "OBJ indices are 1-based")),
                    };
                    if resolved < 0 {
                        return Err(parse_err(ln, format!("relative index {k} out of range")));
                    }
                    poly.push(resolved as usize);
                }
                if poly.len() < 3 {
                    return Err(parse_err(ln, "polygon with fewer than three corners"));
                }
                polygons.push(poly);
            }
            _ => {}
        }
    }
    Ok((vertices, polygons))
}

/// Writes a mesh as ASCII OFF with shortest round-trip float formatting.
pub fn write_off(mesh: &TriangleMesh, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "OFF")?;
    writeln!(out, "{} {} {}", mesh.vertex_count(), mesh.face_count(), mesh.edge_count())?;
    for v in mesh.vertices() {
        writeln!(out, "{:?} {:?} {:?}", v.x, v.y, v.z)?;
    }
    for f in mesh.faces() {
        writeln!(out, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_icosphere;

    const OCTAHEDRON_OFF: &str = "OFF
# regular octahedron
6 8 12
1 0 0
-1 0 0
0 1 0
0 -1 0
0 0 1
0 0 -1
3 0 2 4
3 2 1 4
3 1 3 4
3 3 0 4
3 2 0 5
3 1 2 5
3 3 1 5
3 0 3 5
";

    #[test]
    fn reads_octahedron() {
        let mesh = parse_mesh(OCTAHEDRON_OFF, MeshFormat::Off, LoadOptions::default()).unwrap();
        assert_eq!(mesh.vertex_count(), 6);
        assert_eq!(mesh.face_count(), 8);
        assert_eq!(mesh.euler_characteristic(), 2);
        assert!((mesh.enclosed_volume() - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn dangling_triangle() {
        let text = OCTAHEDRON_OFF.replace("6 8 12", "7 9 0").replace(
            "0 0 -1\n",
            "0 0 -1\n2 2 2\n",
        ) + "3 0 2 6\n";
        let err = parse_mesh(&text, MeshFormat::Off, LoadOptions::default()).unwrap_err();
        assert!(matches!(err, MeshError::NonManifold(..)), "{err}");
    }

    #[test]
    fn quads_are_fan_triangulated() {
        let cube = "OFF\n8 6 0\n\
            0 0 0\n1 0 0\n1 1 0\n0 1 0\n0 0 1\n1 0 1\n1 1 1\n0 1 1\n\
            4 0 3 2 1\n4 4 5 6 7\n4 0 1 5 4\n4 1 2 6 5\n4 2 3 7 6\n4 3 0 4 7\n";
        let mesh = parse_mesh(cube, MeshFormat::Off, LoadOptions::default()).unwrap();
        assert_eq!(mesh.face_count(), 12);
        assert!((mesh.enclosed_volume() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn obj_with_normals_and_negative_indices() {
        let obj = "# tetra\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nvn 0 0 1\n\
            f 1//1 3//1 2//1\nf -4 -3 -1\nf 2/1/1 3/1/1 4/1/1\nf 1 4 3\n";
        let mesh = parse_mesh(obj, MeshFormat::Obj, LoadOptions::default()).unwrap();
        assert_eq!(mesh.face_count(), 4);
        assert!((mesh.enclosed_volume() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn malformed_input() {
        for text in ["", "OFF\n3\n", "OFF\n3 1 0\n0 0 0\n1 0\n", "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n2 0 1\n"] {
            assert!(matches!(
                parse_mesh(text, MeshFormat::Off, LoadOptions::default()),
                Err(MeshError::Parse { .. })
            ));
        }
        assert!(matches!(
            parse_mesh("v 0 0 0\nf 0 1 2\n", MeshFormat::Obj, LoadOptions::default()),
            Err(MeshError::Parse { .. })
        ));
    }

    #[test]
    fn off_round_trip_is_exact() {
        let mesh = make_icosphere(1.3, 2);
        let mut buf = Vec::new();
        write_off(&mesh, &mut buf).unwrap();
        let back = parse_mesh(
            std::str::from_utf8(&buf).unwrap(),
            MeshFormat::Off,
            LoadOptions::default(),
        )
        .unwrap();
        assert_eq!(back.vertices(), mesh.vertices());
        assert_eq!(back.faces(), mesh.faces());
    }
}
