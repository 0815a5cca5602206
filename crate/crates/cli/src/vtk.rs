//! Legacy ASCII VTK 3.0 unstructured grids of P1 triangulations.

use std::fmt::Write as _;
use std::path::Path;

use insulation::Mesh2D;

use crate::error::{config, io, Result};
use crate::output::sig17;

/// VTK cell type of a linear triangle.
const VTK_TRIANGLE: u8 = 5;

/// Renders `mesh` with one point-data scalar per `(name, values)` pair.
/// Without fields the file holds geometry only.
pub fn vtk_string(mesh: &Mesh2D, fields: &[(&str, &[f64])]) -> Result<String> {
    let n = mesh.n_vertices();
    for (name, values) in fields {
        if values.len() != n {
            return Err(config(format!(
                "field {name} has {} values for {n} vertices",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(config(format!("field {name} is not finite at vertex {i}")));
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(config(format!("bad field name {name:?}")));
        }
    }
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\ninsulate\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {n} double");
    for p in mesh.vertices() {
        let _ = writeln!(s, "{} {} 0", sig17(p[0]), sig17(p[1]));
    }
    let t = mesh.n_triangles();
    let _ = writeln!(s, "CELLS {t} {}", 4 * t);
    for tri in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", tri[0], tri[1], tri[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {t}");
    for _ in 0..t {
        let _ = writeln!(s, "{VTK_TRIANGLE}");
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {n}");
        for (name, values) in fields {
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for v in *values {
                let _ = writeln!(s, "{}", sig17(*v));
            }
        }
    }
    Ok(s)
}

pub fn export_vtk(mesh: &Mesh2D, fields: &[(&str, &[f64])], path: impl AsRef<Path>) -> Result<()> {
    let text = vtk_string(mesh, fields)?;
    std::fs::write(path.as_ref(), text).map_err(io(path.as_ref()))
}
