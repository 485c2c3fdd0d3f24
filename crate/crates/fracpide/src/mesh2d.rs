//! Conforming triangulations of axis-aligned rectangles.
//!
//! Provides structured right-triangle meshes ([`rect_mesh`]), nested uniform
//! refinement ([`refine_uniform`]), and point location with barycentric
//! coordinates ([`locate_point`]). Meshes are immutable after construction
//! and safe to share across assembly threads.
//!
//! Conventions:
//! * triangles are stored with positive (counter-clockwise) orientation;
//! * every edge is globally oriented from its smaller to its larger vertex
//!   index — flux degree-of-freedom signs derive from this;
//! * local edge `k` of a triangle `(v0, v1, v2)` connects local vertices
//!   `k` and `(k+1) mod 3`.
//!
//! Structured meshes built here are shape-regular: all triangles are
//! congruent right triangles, so the minimum angle is
//! `atan(min(dx, dy) / max(dx, dy))` for cell sides `dx`, `dy`.

use std::collections::HashMap;

use crate::{Error, Result};

/// Tolerance for accepting barycentric coordinates in [`locate_point`].
pub const LOCATE_TOL: f64 = 1e-12;

/// A conforming triangle mesh of a planar domain.
#[derive(Debug, Clone)]
pub struct TriMesh {
    /// Vertex coordinates.
    pub vertices: Vec<[f64; 2]>,
    /// Vertex-index triples, positively oriented.
    pub triangles: Vec<[usize; 3]>,
    /// Edges as vertex pairs `(a, b)` with `a < b`; the global orientation
    /// is from `a` to `b`.
    pub edges: Vec<[usize; 2]>,
    /// `tri_edges[t][k] = (edge index, sign)`: sign is `+1` when triangle
    /// `t` traverses local edge `k` in the global direction, `-1` otherwise.
    pub tri_edges: Vec<[(usize, f64); 3]>,
    /// `true` for edges on the domain boundary.
    pub boundary_edge: Vec<bool>,
    /// Maximum triangle diameter (longest edge over all triangles).
    pub h: f64,
}

fn tri_points(vertices: &[[f64; 2]], tri: &[usize; 3]) -> [[f64; 2]; 3] {
    [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]]
}

/// Twice the signed area of the triangle `(a, b, c)`.
fn signed_area2(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

impl TriMesh {
    /// Builds a mesh from raw vertices and positively oriented triangles,
    /// deriving edges, incidence signs, and boundary flags, and validating
    /// the conformity invariants.
    pub fn from_cells(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<TriMesh> {
        if triangles.is_empty() {
            return Err(Error::Geometry("mesh has no triangles".into()));
        }
        let nv = vertices.len();
        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut edge_uses: Vec<Vec<f64>> = Vec::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        let mut h = 0.0_f64;
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::Geometry(format!(
                    "triangle {t} references a missing vertex"
                )));
            }
            let p = tri_points(&vertices, tri);
            let area2 = signed_area2(p[0], p[1], p[2]);
            if area2 <= 0.0 {
                return Err(Error::Geometry(format!(
                    "triangle {t} is degenerate or negatively oriented (2*area = {area2})"
                )));
            }
            let mut incid = [(0usize, 0.0f64); 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let idx = *edge_index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_uses.push(Vec::new());
                    edges.len() - 1
                });
                let sign = if a < b { 1.0 } else { -1.0 };
                edge_uses[idx].push(sign);
                incid[k] = (idx, sign);
                let len = ((p[k][0] - p[(k + 1) % 3][0]).powi(2)
                    + (p[k][1] - p[(k + 1) % 3][1]).powi(2))
                .sqrt();
                h = h.max(len);
            }
            tri_edges.push(incid);
        }
        let mut boundary_edge = vec![false; edges.len()];
        for (idx, uses) in edge_uses.iter().enumerate() {
            match uses.len() {
                1 => boundary_edge[idx] = true,
                2 => {
                    if (uses[0] + uses[1]).abs() > 0.0 {
                        return Err(Error::Geometry(format!(
                            "interior edge {idx} is traversed twice in the same direction"
                        )));
                    }
                }
                n => {
                    return Err(Error::Geometry(format!(
                        "edge {idx} is shared by {n} triangles"
                    )))
                }
            }
        }
        Ok(TriMesh {
            vertices,
            triangles,
            edges,
            tri_edges,
            boundary_edge,
            h,
        })
    }

    /// Number of vertices.
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Number of triangles.
    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Number of edges.
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Corner coordinates of triangle `t`.
    pub fn triangle_points(&self, t: usize) -> [[f64; 2]; 3] {
        tri_points(&self.vertices, &self.triangles[t])
    }

    /// Area of triangle `t`.
    pub fn triangle_area(&self, t: usize) -> f64 {
        let p = self.triangle_points(t);
        0.5 * signed_area2(p[0], p[1], p[2])
    }

    /// Sum of all triangle areas.
    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    /// Geometry of local edge `k` of triangle `t`: the global edge index,
    /// the edge length, and the unit normal associated with the *global*
    /// edge orientation (the tangent from the smaller to the larger vertex
    /// index, rotated by -90°). Multiplying by the incidence sign stored in
    /// `tri_edges` turns it into the outward normal of the triangle.
    pub fn edge_geometry(&self, t: usize, k: usize) -> (usize, f64, [f64; 2]) {
        let (idx, _sign) = self.tri_edges[t][k];
        let [a, b] = self.edges[idx];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        let tangent = [pb[0] - pa[0], pb[1] - pa[1]];
        let len = (tangent[0] * tangent[0] + tangent[1] * tangent[1]).sqrt();
        (idx, len, [tangent[1] / len, -tangent[0] / len])
    }

    /// Plain-text dump: vertex count, triangle count, then one vertex per
    /// line and one triangle (vertex indices) per line.
    pub fn dump_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n_vertices(), self.n_triangles());
        for v in &self.vertices {
            out.push_str(&format!("{:.17e} {:.17e}\n", v[0], v[1]));
        }
        for t in &self.triangles {
            out.push_str(&format!("{} {} {}\n", t[0], t[1], t[2]));
        }
        out
    }
}

/// Structured right-triangle mesh of the rectangle
/// `(xmin, xmax) × (ymin, ymax)` with `nx × ny` cells, each split along its
/// south-west/north-east diagonal into two triangles.
pub fn rect_mesh(
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
    nx: usize,
    ny: usize,
) -> Result<TriMesh> {
    if !(xmax > xmin && ymax > ymin) {
        return Err(Error::InvalidParameter(format!(
            "empty rectangle [{xmin}, {xmax}] x [{ymin}, {ymax}]"
        )));
    }
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidParameter(
            "subdivision counts must be positive".into(),
        ));
    }
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = ymin + (ymax - ymin) * j as f64 / ny as f64;
        for i in 0..=nx {
            let x = xmin + (xmax - xmin) * i as f64 / nx as f64;
            vertices.push([x, y]);
        }
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10) = (vid(i, j), vid(i + 1, j));
            let (v01, v11) = (vid(i, j + 1), vid(i + 1, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    TriMesh::from_cells(vertices, triangles)
}

/// Uniform (red) refinement: each triangle splits into four similar
/// triangles through its edge midpoints. The coarse vertex set is a prefix
/// of the fine one, so coarse nodes are exactly representable on the fine
/// mesh.
pub fn refine_uniform(mesh: &TriMesh) -> Result<TriMesh> {
    let mut vertices = mesh.vertices.clone();
    // Midpoint vertex for each coarse edge.
    let mut edge_mid = Vec::with_capacity(mesh.n_edges());
    for [a, b] in &mesh.edges {
        let (pa, pb) = (mesh.vertices[*a], mesh.vertices[*b]);
        vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        edge_mid.push(vertices.len() - 1);
    }
    let mut triangles = Vec::with_capacity(4 * mesh.n_triangles());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let m: Vec<usize> = (0..3).map(|k| edge_mid[mesh.tri_edges[t][k].0]).collect();
        // m[k] is the midpoint of the edge from local vertex k to k+1.
        triangles.push([tri[0], m[0], m[2]]);
        triangles.push([m[0], tri[1], m[1]]);
        triangles.push([m[2], m[1], tri[2]]);
        triangles.push([m[0], m[1], m[2]]);
    }
    TriMesh::from_cells(vertices, triangles)
}

/// Barycentric coordinates of `p` with respect to triangle corners `pts`.
pub fn barycentric(pts: &[[f64; 2]; 3], p: [f64; 2]) -> [f64; 3] {
    let area2 = signed_area2(pts[0], pts[1], pts[2]);
    [
        signed_area2(p, pts[1], pts[2]) / area2,
        signed_area2(pts[0], p, pts[2]) / area2,
        signed_area2(pts[0], pts[1], p) / area2,
    ]
}

/// Accelerated point location: triangles are binned by bounding box on a
/// uniform grid over the mesh's bounding box, so repeated queries avoid the
/// full sweep of [`locate_point`].
#[derive(Debug, Clone)]
pub struct PointLocator {
    xmin: f64,
    ymin: f64,
    dx: f64,
    dy: f64,
    nx: usize,
    ny: usize,
    bins: Vec<Vec<usize>>,
}

impl PointLocator {
    /// Builds the bin structure for a mesh.
    pub fn new(mesh: &TriMesh) -> PointLocator {
        let (mut xmin, mut xmax) = (f64::MAX, f64::MIN);
        let (mut ymin, mut ymax) = (f64::MAX, f64::MIN);
        for v in &mesh.vertices {
            xmin = xmin.min(v[0]);
            xmax = xmax.max(v[0]);
            ymin = ymin.min(v[1]);
            ymax = ymax.max(v[1]);
        }
        // Aim for bins comparable to a triangle diameter.
        let nx = (((xmax - xmin) / mesh.h).ceil() as usize).max(1);
        let ny = (((ymax - ymin) / mesh.h).ceil() as usize).max(1);
        let dx = (xmax - xmin) / nx as f64;
        let dy = (ymax - ymin) / ny as f64;
        let mut bins = vec![Vec::new(); nx * ny];
        let clamp = |v: f64, n: usize| (v.max(0.0) as usize).min(n - 1);
        for t in 0..mesh.n_triangles() {
            let pts = mesh.triangle_points(t);
            let (bx0, bx1) = pts.iter().fold((f64::MAX, f64::MIN), |(lo, hi), q| {
                (lo.min(q[0]), hi.max(q[0]))
            });
            let (by0, by1) = pts.iter().fold((f64::MAX, f64::MIN), |(lo, hi), q| {
                (lo.min(q[1]), hi.max(q[1]))
            });
            let i0 = clamp(((bx0 - xmin) / dx).floor(), nx);
            let i1 = clamp(((bx1 - xmin) / dx).floor(), nx);
            let j0 = clamp(((by0 - ymin) / dy).floor(), ny);
            let j1 = clamp(((by1 - ymin) / dy).floor(), ny);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    bins[j * nx + i].push(t);
                }
            }
        }
        PointLocator {
            xmin,
            ymin,
            dx,
            dy,
            nx,
            ny,
            bins,
        }
    }

    /// Same contract as [`locate_point`], but amortized O(1) per query.
    pub fn locate(&self, mesh: &TriMesh, p: [f64; 2]) -> Result<(usize, [f64; 3])> {
        let clamp = |v: f64, n: usize| (v.max(0.0) as usize).min(n - 1);
        let i = clamp(((p[0] - self.xmin) / self.dx).floor(), self.nx);
        let j = clamp(((p[1] - self.ymin) / self.dy).floor(), self.ny);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        // The query point can sit on a bin boundary; scan the 3x3 block.
        for dj in -1i64..=1 {
            for di in -1i64..=1 {
                let (bi, bj) = (i as i64 + di, j as i64 + dj);
                if bi < 0 || bj < 0 || bi >= self.nx as i64 || bj >= self.ny as i64 {
                    continue;
                }
                for &t in &self.bins[bj as usize * self.nx + bi as usize] {
                    let lam = barycentric(&mesh.triangle_points(t), p);
                    let min_lam = lam[0].min(lam[1]).min(lam[2]);
                    if min_lam >= 0.0 {
                        return Ok((t, lam));
                    }
                    if best.map_or(true, |(_, _, m)| min_lam > m) {
                        best = Some((t, lam, min_lam));
                    }
                }
            }
        }
        match best {
            Some((t, lam, min_lam)) if min_lam >= -LOCATE_TOL => Ok((t, lam)),
            _ => Err(Error::Geometry(format!(
                "point ({}, {}) lies outside the mesh",
                p[0], p[1]
            ))),
        }
    }
}

/// Locates `p` in the mesh, returning the containing triangle index and the
/// barycentric coordinates of `p` inside it. Points within [`LOCATE_TOL`] of
/// the closed domain are accepted; anything farther out is a geometry error.
pub fn locate_point(mesh: &TriMesh, p: [f64; 2]) -> Result<(usize, [f64; 3])> {
    let mut best: Option<(usize, [f64; 3], f64)> = None;
    for t in 0..mesh.n_triangles() {
        let pts = mesh.triangle_points(t);
        // Cheap bounding-box rejection with a tolerance scaled to the mesh.
        let tol = LOCATE_TOL * (1.0 + mesh.h);
        let (xmin, xmax) = pts.iter().fold((f64::MAX, f64::MIN), |(lo, hi), q| {
            (lo.min(q[0]), hi.max(q[0]))
        });
        let (ymin, ymax) = pts.iter().fold((f64::MAX, f64::MIN), |(lo, hi), q| {
            (lo.min(q[1]), hi.max(q[1]))
        });
        if p[0] < xmin - tol || p[0] > xmax + tol || p[1] < ymin - tol || p[1] > ymax + tol {
            continue;
        }
        let lam = barycentric(&pts, p);
        let min_lam = lam[0].min(lam[1]).min(lam[2]);
        if min_lam >= 0.0 {
            return Ok((t, lam));
        }
        if best.map_or(true, |(_, _, m)| min_lam > m) {
            best = Some((t, lam, min_lam));
        }
    }
    match best {
        Some((t, lam, min_lam)) if min_lam >= -LOCATE_TOL => Ok((t, lam)),
        _ => Err(Error::Geometry(format!(
            "point ({}, {}) lies outside the mesh",
            p[0], p[1]
        ))),
    }
}
