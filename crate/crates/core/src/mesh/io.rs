//! Plain-text mesh format.
//!
//! ```text
//! # comment
//! VERTICES <n>
//! <x> <y> <component>
//! TRIANGLES <n>
//! <a> <b> <c>
//! BOUNDARY <n>
//! <a> <b> <component>
//! CIRCLES <n>            (optional)
//! <component> <cx> <cy> <radius>
//! ```
//!
//! Reals are written with 17 significant digits. Boundary edges are
//! directed with the domain on their left.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Circle, Mesh2D, Point};
use crate::error::{Error, Result};

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serializes a mesh to the text format.
pub fn write_mesh(mesh: &Mesh2D) -> String {
    let mut out = String::new();
    out.push_str("# insulation mesh\n");
    let _ = writeln!(out, "VERTICES {}", mesh.n_vertices());
    for (p, c) in mesh.vertices().iter().zip(mesh.component_of_vertex()) {
        let _ = writeln!(out, "{} {} {}", real(p[0]), real(p[1]), c);
    }
    let _ = writeln!(out, "TRIANGLES {}", mesh.n_triangles());
    for t in mesh.triangles() {
        let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(out, "BOUNDARY {}", mesh.boundary_edges().len());
    for e in mesh.boundary_edges() {
        let _ = writeln!(out, "{} {} {}", e.vertices[0], e.vertices[1], e.component);
    }
    let circles: Vec<(usize, Circle)> = mesh
        .circles()
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|c| (i, c)))
        .collect();
    if !circles.is_empty() {
        let _ = writeln!(out, "CIRCLES {}", circles.len());
        for (i, c) in circles {
            let _ = writeln!(
                out,
                "{} {} {} {}",
                i,
                real(c.center[0]),
                real(c.center[1]),
                real(c.radius)
            );
        }
    }
    out
}

pub fn save_mesh(mesh: &Mesh2D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_mesh(mesh)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh2D> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_mesh(&text)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    Vertices,
    Triangles,
    Boundary,
    Circles,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("cannot parse {what} from '{tok}'")))
}

/// Parses the text format and validates the resulting mesh.
pub fn parse_mesh(text: &str) -> Result<Mesh2D> {
    let mut vertices: Vec<Point> = Vec::new();
    let mut vertex_components: Vec<usize> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    let mut triangle_lines: Vec<usize> = Vec::new();
    let mut boundary: Vec<([usize; 2], usize, usize)> = Vec::new();
    let mut circles: Vec<(usize, Circle)> = Vec::new();
    let mut section: Option<(Section, usize, usize)> = None; // (kind, declared, header line)
    let mut seen = Vec::new();

    let close = |section: Option<(Section, usize, usize)>, counts: [usize; 4]| -> Result<()> {
        if let Some((kind, declared, line)) = section {
            let got = counts[kind as usize];
            if got != declared {
                return Err(parse_err(
                    line,
                    format!("section declares {declared} records but has {got}"),
                ));
            }
        }
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let head = toks.next().unwrap_or("");
        let kind = match head {
            "VERTICES" => Some(Section::Vertices),
            "TRIANGLES" => Some(Section::Triangles),
            "BOUNDARY" => Some(Section::Boundary),
            "CIRCLES" => Some(Section::Circles),
            _ => None,
        };
        if let Some(kind) = kind {
            close(
                section,
                [vertices.len(), triangles.len(), boundary.len(), circles.len()],
            )?;
            if seen.contains(&kind) {
                return Err(parse_err(lineno, format!("duplicate section {head}")));
            }
            seen.push(kind);
            let declared: usize = field(toks.next(), lineno, "record count")?;
            if toks.next().is_some() {
                return Err(parse_err(lineno, "trailing tokens after section header"));
            }
            section = Some((kind, declared, lineno));
            continue;
        }
        let Some((kind, _, _)) = section else {
            return Err(parse_err(lineno, format!("record '{content}' outside any section")));
        };
        let mut toks = content.split_whitespace();
        match kind {
            Section::Vertices => {
                let x: f64 = field(toks.next(), lineno, "x coordinate")?;
                let y: f64 = field(toks.next(), lineno, "y coordinate")?;
                let c: usize = field(toks.next(), lineno, "component id")?;
                if !x.is_finite() || !y.is_finite() {
                    return Err(parse_err(lineno, "non-finite coordinate"));
                }
                vertices.push([x, y]);
                vertex_components.push(c);
            }
            Section::Triangles => {
                let mut t = [0usize; 3];
                for (k, slot) in t.iter_mut().enumerate() {
                    *slot = field(toks.next(), lineno, &format!("vertex {k}"))?;
                }
                for &v in &t {
                    if v >= vertices.len() {
                        return Err(parse_err(
                            lineno,
                            format!(
                                "dangling vertex index {v} ({} vertices defined)",
                                vertices.len()
                            ),
                        ));
                    }
                }
                triangles.push(t);
                triangle_lines.push(lineno);
            }
            Section::Boundary => {
                let a: usize = field(toks.next(), lineno, "edge start")?;
                let b: usize = field(toks.next(), lineno, "edge end")?;
                let c: usize = field(toks.next(), lineno, "component id")?;
                if a >= vertices.len() || b >= vertices.len() {
                    return Err(parse_err(
                        lineno,
                        format!("dangling vertex index in boundary edge ({a}, {b})"),
                    ));
                }
                boundary.push(([a, b], c, lineno));
            }
            Section::Circles => {
                let c: usize = field(toks.next(), lineno, "component id")?;
                let cx: f64 = field(toks.next(), lineno, "circle centre x")?;
                let cy: f64 = field(toks.next(), lineno, "circle centre y")?;
                let r: f64 = field(toks.next(), lineno, "circle radius")?;
                if !(r > 0.0) {
                    return Err(parse_err(lineno, "circle radius must be positive"));
                }
                circles.push((
                    c,
                    Circle {
                        center: [cx, cy],
                        radius: r,
                    },
                ));
            }
        }
        if toks.next().is_some() {
            return Err(parse_err(lineno, "trailing tokens in record"));
        }
    }
    close(
        section,
        [vertices.len(), triangles.len(), boundary.len(), circles.len()],
    )?;
    for required in [Section::Vertices, Section::Triangles, Section::Boundary] {
        if !seen.contains(&required) {
            return Err(parse_err(
                text.lines().count().max(1),
                format!("missing section {required:?}").to_uppercase(),
            ));
        }
    }

    let n_circle_slots = circles.iter().map(|(c, _)| c + 1).max().unwrap_or(0);
    let mut circle_slots = vec![None; n_circle_slots];
    for (c, circle) in circles {
        circle_slots[c] = Some(circle);
    }

    let mesh = Mesh2D::new(vertices, triangles, circle_slots)?;

    if mesh.component_of_vertex() != vertex_components.as_slice() {
        return Err(Error::InvalidMesh(
            "vertex component ids do not match triangle connectivity".into(),
        ));
    }
    let mut expected: Vec<([usize; 2], usize)> = mesh
        .boundary_edges()
        .iter()
        .map(|e| (e.vertices, e.component))
        .collect();
    let mut given: Vec<([usize; 2], usize)> = boundary.iter().map(|&(e, c, _)| (e, c)).collect();
    expected.sort_unstable();
    given.sort_unstable();
    if expected != given {
        return Err(Error::InvalidMesh(
            "BOUNDARY section does not match the edges owned by exactly one triangle".into(),
        ));
    }
    Ok(mesh)
}
