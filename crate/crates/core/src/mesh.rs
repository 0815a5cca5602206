//! Conforming triangular meshes of the benchmark domains.
//!
//! A [`Mesh2D`] is immutable once built. Construction derives the boundary
//! edges (edges owned by exactly one triangle), the connected components and
//! the lumped boundary trace, and rejects anything that violates the mesh
//! invariants.

mod io;

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

pub use io::{load_mesh, parse_mesh, save_mesh, write_mesh};

pub type Point = [f64; 2];

/// Exact circle carried by a disc component, used to snap boundary
/// midpoints during refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

impl Circle {
    fn project(&self, p: Point) -> Point {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let r = dx.hypot(dy);
        [
            self.center[0] + self.radius * dx / r,
            self.center[1] + self.radius * dy / r,
        ]
    }
}

/// Directed boundary edge; the domain lies to its left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub component: usize,
    pub normal: Point,
}

/// One closed boundary loop, vertices in counterclockwise order.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryLoop {
    pub component: usize,
    pub vertices: Vec<usize>,
}

/// Boundary vertices in loop order with lumped arclength weights.
///
/// The weight of a boundary vertex is half the length of its two boundary
/// edges, so boundary integrals become weighted vertex sums.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    loops: Vec<BoundaryLoop>,
    vertices: Vec<usize>,
    components: Vec<usize>,
    weights: Vec<f64>,
    slot_of_vertex: Vec<Option<usize>>,
}

impl BoundaryTrace {
    /// Boundary vertex indices, loops concatenated.
    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Component id of every trace slot.
    pub fn components(&self) -> &[usize] {
        &self.components
    }

    pub fn loops(&self) -> &[BoundaryLoop] {
        &self.loops
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Position of mesh vertex `v` in the trace, if it is on the boundary.
    pub fn slot(&self, v: usize) -> Option<usize> {
        self.slot_of_vertex.get(v).copied().flatten()
    }

    pub fn perimeter(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn component_perimeter(&self, component: usize) -> f64 {
        self.weights
            .iter()
            .zip(&self.components)
            .filter(|(_, &c)| c == component)
            .map(|(w, _)| w)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh2D {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    component_of_vertex: Vec<usize>,
    n_components: usize,
    circles: Vec<Option<Circle>>,
    trace: BoundaryTrace,
}

impl Mesh2D {
    /// Builds and validates a mesh. `circles` is indexed by component id and
    /// may be empty when no component is a disc.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        circles: Vec<Option<Circle>>,
    ) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("mesh has no triangles".into()));
        }
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&v) = tri.iter().find(|&&v| v >= nv) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} references vertex {v} but only {nv} vertices exist"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} repeats a vertex")));
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(area > 0.0) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} has non-positive signed area {area:e}"
                )));
            }
        }
        if vertices.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }

        let mut used = vec![false; nv];
        for tri in &triangles {
            for &v in tri {
                used[v] = true;
            }
        }
        if let Some(v) = used.iter().position(|&u| !u) {
            return Err(Error::InvalidMesh(format!(
                "vertex {v} does not belong to any triangle"
            )));
        }

        let (component_of_vertex, n_components) = label_components(nv, &triangles);
        if circles.len() > n_components {
            return Err(Error::InvalidMesh(format!(
                "{} circles given for {n_components} components",
                circles.len()
            )));
        }
        let mut circles = circles;
        circles.resize(n_components, None);

        // Directed edge -> owning triangle count. An interior edge appears
        // once in each direction; a boundary edge only once overall.
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &triangles {
            for e in 0..3 {
                let a = tri[e];
                let b = tri[(e + 1) % 3];
                *directed.entry((a, b)).or_insert(0) += 1;
            }
        }
        let mut next: HashMap<usize, usize> = HashMap::new();
        for (&(a, b), &count) in &directed {
            if count > 1 {
                return Err(Error::InvalidMesh(format!(
                    "edge ({a}, {b}) is used twice with the same orientation"
                )));
            }
            match directed.get(&(b, a)) {
                Some(_) => {}
                None => {
                    if next.insert(a, b).is_some() {
                        return Err(Error::InvalidMesh(format!(
                            "boundary is not manifold at vertex {a}"
                        )));
                    }
                }
            }
        }

        let mut boundary_vertices: Vec<usize> = next.keys().copied().collect();
        boundary_vertices.sort_unstable();
        let mut incoming = vec![0usize; nv];
        for &b in next.values() {
            incoming[b] += 1;
        }
        for &v in &boundary_vertices {
            if incoming[v] != 1 {
                return Err(Error::InvalidMesh(format!(
                    "boundary is not manifold at vertex {v}"
                )));
            }
        }

        // Walk loops starting from the smallest unvisited boundary vertex.
        let mut visited = vec![false; nv];
        let mut loops = Vec::new();
        for &start in &boundary_vertices {
            if visited[start] {
                continue;
            }
            let mut lp = vec![start];
            visited[start] = true;
            let mut cur = next[&start];
            while cur != start {
                if visited[cur] {
                    return Err(Error::InvalidMesh(format!(
                        "boundary loop through vertex {start} does not close"
                    )));
                }
                visited[cur] = true;
                lp.push(cur);
                cur = *next.get(&cur).ok_or_else(|| {
                    Error::InvalidMesh(format!("boundary loop breaks at vertex {cur}"))
                })?;
            }
            if lp.len() < 3 {
                return Err(Error::InvalidMesh(format!(
                    "boundary loop through vertex {start} has fewer than 3 vertices"
                )));
            }
            loops.push(BoundaryLoop {
                component: component_of_vertex[start],
                vertices: lp,
            });
        }
        loops.sort_by_key(|l| (l.component, l.vertices[0]));

        let mut boundary_edges = Vec::with_capacity(boundary_vertices.len());
        let mut trace_vertices = Vec::with_capacity(boundary_vertices.len());
        let mut trace_components = Vec::with_capacity(boundary_vertices.len());
        let mut weights = Vec::with_capacity(boundary_vertices.len());
        let mut slot_of_vertex = vec![None; nv];
        for lp in &loops {
            let n = lp.vertices.len();
            let base = trace_vertices.len();
            for (i, &v) in lp.vertices.iter().enumerate() {
                slot_of_vertex[v] = Some(base + i);
                trace_vertices.push(v);
                trace_components.push(lp.component);
                weights.push(0.0);
            }
            for i in 0..n {
                let a = lp.vertices[i];
                let b = lp.vertices[(i + 1) % n];
                let pa = vertices[a];
                let pb = vertices[b];
                let dx = pb[0] - pa[0];
                let dy = pb[1] - pa[1];
                let len = dx.hypot(dy);
                weights[base + i] += 0.5 * len;
                weights[base + (i + 1) % n] += 0.5 * len;
                boundary_edges.push(BoundaryEdge {
                    vertices: [a, b],
                    component: lp.component,
                    normal: [dy / len, -dx / len],
                });
            }
        }

        let trace = BoundaryTrace {
            loops,
            vertices: trace_vertices,
            components: trace_components,
            weights,
            slot_of_vertex,
        };

        Ok(Self {
            vertices,
            triangles,
            boundary_edges,
            component_of_vertex,
            n_components,
            circles,
            trace,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn component_of_vertex(&self) -> &[usize] {
        &self.component_of_vertex
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    /// Circle metadata per component (`None` for polygonal components).
    pub fn circles(&self) -> &[Option<Circle>] {
        &self.circles
    }

    pub fn trace(&self) -> &BoundaryTrace {
        &self.trace
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn perimeter(&self) -> f64 {
        self.trace.perimeter()
    }

    /// Number of distinct (undirected) edges.
    pub fn n_edges(&self) -> usize {
        let interior_twice = 3 * self.triangles.len() - self.boundary_edges.len();
        interior_twice / 2 + self.boundary_edges.len()
    }

    /// Axis-aligned bounding box `(min, max)` of one component.
    pub fn component_bbox(&self, component: usize) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for (p, &c) in self.vertices.iter().zip(&self.component_of_vertex) {
            if c == component {
                for d in 0..2 {
                    lo[d] = lo[d].min(p[d]);
                    hi[d] = hi[d].max(p[d]);
                }
            }
        }
        (lo, hi)
    }

    /// Area-weighted centroid of a component.
    pub fn component_centroid(&self, component: usize) -> Point {
        let mut acc = [0.0; 2];
        let mut total = 0.0;
        for (t, tri) in self.triangles.iter().enumerate() {
            if self.component_of_vertex[tri[0]] != component {
                continue;
            }
            let a = self.triangle_area(t);
            for &v in tri {
                acc[0] += a * self.vertices[v][0] / 3.0;
                acc[1] += a * self.vertices[v][1] / 3.0;
            }
            total += a;
        }
        [acc[0] / total, acc[1] / total]
    }
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn label_components(nv: usize, triangles: &[[usize; 3]]) -> (Vec<usize>, usize) {
    let mut parent: Vec<usize> = (0..nv).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for tri in triangles {
        for e in 0..3 {
            let a = find(&mut parent, tri[e]);
            let b = find(&mut parent, tri[(e + 1) % 3]);
            if a != b {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                parent[hi] = lo;
            }
        }
    }
    // Roots are the smallest vertex of each component, so labelling in
    // vertex order numbers components by their first vertex.
    let mut label = vec![usize::MAX; nv];
    let mut count = 0;
    let out = (0..nv)
        .map(|v| {
            let r = find(&mut parent, v);
            if label[r] == usize::MAX {
                label[r] = count;
                count += 1;
            }
            label[r]
        })
        .collect();
    (out, count)
}

/// Unit square `[0,1]²` split into `n × n` cells, each cut along its
/// lower-left to upper-right diagonal.
pub fn generate_square(n: usize) -> Result<Mesh2D> {
    if n == 0 {
        return Err(invalid("square subdivision count must be at least 1"));
    }
    let h = 1.0 / n as f64;
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            // Exact endpoints so the perimeter is exactly 4.
            let x = if i == n { 1.0 } else { i as f64 * h };
            let y = if j == n { 1.0 } else { j as f64 * h };
            vertices.push([x, y]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = idx(i, j);
            let v10 = idx(i + 1, j);
            let v01 = idx(i, j + 1);
            let v11 = idx(i + 1, j + 1);
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    Mesh2D::new(vertices, triangles, Vec::new())
}

/// Number of rings used by [`generate_disc`] at a given level.
pub fn disc_rings(level: usize) -> usize {
    1 << level
}

/// Disc of radius `radius` built from `2^level` concentric rings; ring `j`
/// carries `6j` equally spaced vertices and the outermost ring lies exactly
/// on the circle.
pub fn generate_disc(radius: f64, level: usize) -> Result<Mesh2D> {
    check_disc_args(radius, level)?;
    let (vertices, triangles) = disc_points([0.0, 0.0], radius, level, 0);
    Mesh2D::new(
        vertices,
        triangles,
        vec![Some(Circle {
            center: [0.0, 0.0],
            radius,
        })],
    )
}

/// Two disjoint discs: the first centred at the origin, the second on the
/// positive x axis with `gap` between the circles.
pub fn generate_two_discs(r1: f64, r2: f64, gap: f64, level: usize) -> Result<Mesh2D> {
    check_disc_args(r1, level)?;
    check_disc_args(r2, level)?;
    if !(gap > 0.0) || !gap.is_finite() {
        return Err(invalid(format!(
            "discs overlap or touch: gap must be positive, got {gap}"
        )));
    }
    let c2 = [r1 + gap + r2, 0.0];
    let (mut vertices, mut triangles) = disc_points([0.0, 0.0], r1, level, 0);
    let (v2, t2) = disc_points(c2, r2, level, vertices.len());
    vertices.extend(v2);
    triangles.extend(t2);
    Mesh2D::new(
        vertices,
        triangles,
        vec![
            Some(Circle {
                center: [0.0, 0.0],
                radius: r1,
            }),
            Some(Circle {
                center: c2,
                radius: r2,
            }),
        ],
    )
}

fn check_disc_args(radius: f64, level: usize) -> Result<()> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(invalid(format!("radius must be positive, got {radius}")));
    }
    if level == 0 {
        return Err(invalid("disc refinement level must be at least 1"));
    }
    if level > 12 {
        return Err(invalid(format!("disc refinement level {level} is too large")));
    }
    Ok(())
}

fn disc_points(
    center: Point,
    radius: f64,
    level: usize,
    offset: usize,
) -> (Vec<Point>, Vec<[usize; 3]>) {
    let rings = disc_rings(level);
    let mut vertices = vec![center];
    // ring_start[j] = index of the first vertex of ring j (ring 0 = centre)
    let mut ring_start = vec![0usize];
    for j in 1..=rings {
        ring_start.push(vertices.len());
        let count = 6 * j;
        let r = if j == rings {
            radius
        } else {
            radius * j as f64 / rings as f64
        };
        for i in 0..count {
            let theta = 2.0 * PI * i as f64 / count as f64;
            vertices.push([center[0] + r * theta.cos(), center[1] + r * theta.sin()]);
        }
    }

    let mut triangles = Vec::with_capacity(6 * rings * rings);
    for q in 0..6 {
        triangles.push([0, ring_start[1] + q, ring_start[1] + (q + 1) % 6]);
    }
    for j in 2..=rings {
        let a = 6 * (j - 1);
        let b = 6 * j;
        let inner = |p: usize| ring_start[j - 1] + p % a;
        let outer = |q: usize| ring_start[j] + q % b;
        let (mut p, mut q) = (0usize, 0usize);
        while p < a || q < b {
            // Advance along whichever ring has the smaller next angle;
            // (p+1)/a versus (q+1)/b compared exactly in integers.
            let advance_outer = p == a || (q < b && (q + 1) * a <= (p + 1) * b);
            if advance_outer {
                triangles.push([inner(p), outer(q), outer(q + 1)]);
                q += 1;
            } else {
                triangles.push([inner(p), outer(q), inner(p + 1)]);
                p += 1;
            }
        }
    }
    for tri in &mut triangles {
        for v in tri.iter_mut() {
            *v += offset;
        }
    }
    (vertices, triangles)
}

/// Uniform red refinement: every triangle splits into four. Midpoints of
/// boundary edges on disc components are projected back onto the circle.
pub fn refine(mesh: &Mesh2D) -> Mesh2D {
    let mut vertices = mesh.vertices.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut boundary_component: HashMap<(usize, usize), usize> = HashMap::new();
    for e in &mesh.boundary_edges {
        let [a, b] = e.vertices;
        boundary_component.insert((a.min(b), a.max(b)), e.component);
    }
    let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoint.entry(key).or_insert_with(|| {
            let pa = vertices[a];
            let pb = vertices[b];
            let mut p = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
            if let Some(&c) = boundary_component.get(&key) {
                if let Some(circle) = mesh.circles[c] {
                    p = circle.project(p);
                }
            }
            vertices.push(p);
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    for &[a, b, c] in &mesh.triangles {
        let ab = mid(a, b, &mut vertices);
        let bc = mid(b, c, &mut vertices);
        let ca = mid(c, a, &mut vertices);
        triangles.push([a, ab, ca]);
        triangles.push([ab, b, bc]);
        triangles.push([ca, bc, c]);
        triangles.push([ab, bc, ca]);
    }
    Mesh2D::new(vertices, triangles, mesh.circles.clone())
        .expect("red refinement of a valid mesh is valid")
}
