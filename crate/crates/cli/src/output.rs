//! CSV tables and number formatting shared by every mode.

use std::fmt::Write as _;

use insulation::Mesh2D;

/// 17 significant digits: enough to round-trip any `f64`.
pub fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per boundary vertex in loop order, plus a closing row per loop
/// that repeats its first vertex, so that arclength runs from 0 up to the
/// component perimeter. `h` is indexed by trace slot.
pub fn boundary_csv(mesh: &Mesh2D, u: &[f64], h: &[f64]) -> String {
    let trace = mesh.trace();
    let pts = mesh.vertices();
    let mut s = String::from("component,arclength,x,y,u,h\n");
    let mut arclength = vec![0.0; mesh.n_components()];
    for lp in trace.loops() {
        let c = lp.component;
        let row = |v: usize, s_len: f64, out: &mut String| {
            let slot = trace.slot(v).expect("loop vertex on the boundary");
            let _ = writeln!(
                out,
                "{c},{},{},{},{},{}",
                sig17(s_len),
                sig17(pts[v][0]),
                sig17(pts[v][1]),
                sig17(u[v]),
                sig17(h[slot])
            );
        };
        let n = lp.vertices.len();
        for i in 0..=n {
            let v = lp.vertices[i % n];
            if i > 0 {
                let p = pts[lp.vertices[i - 1]];
                arclength[c] += (pts[v][0] - p[0]).hypot(pts[v][1] - p[1]);
            }
            row(v, arclength[c], &mut s);
        }
    }
    s
}

/// Thickness as a vertex field: `h` on the boundary, zero inside.
pub fn thickness_on_vertices(mesh: &Mesh2D, h: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_vertices()];
    for (&v, &hv) in mesh.trace().vertices().iter().zip(h) {
        out[v] = hv;
    }
    out
}
