//! Raviart–Thomas / discontinuous-pressure mixed finite elements on
//! triangle meshes: spaces, quadrature, the L² and Fortin projections, and
//! assembly of every bilinear form of the discrete scheme, including the
//! nonlocal integral term.
//!
//! Flux basis functions are constructed numerically per physical element:
//! a monomial basis in centered/scaled local coordinates is dualized
//! against the classical degrees of freedom (edge moments against
//! polynomials of degree ≤ order on each globally oriented edge, plus
//! moments against constant vector fields inside the element for order 1).
//! Shared edge functionals make the spaces H(div)-conforming by
//! construction, and the divergence of every basis function lies exactly in
//! the matching discontinuous pressure space.
//!
//! Quadrature: 3-point degree-2 rule for order 0, 6-point degree-4 rule for
//! order 1 (assembly); a 7-point degree-5 rule for error integrals; and a
//! tensorized 10×10 Gauss rule (Duffy transform) for projection
//! functionals of non-polynomial fields.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::linalg::{invert_2x2, invert_dense, solve_dense, Triplets};
use crate::mesh2d::{PointLocator, TriMesh};
use crate::problems::{IntegralKernel, ProblemSpec};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Quadrature rule on a triangle: barycentric points and weights summing to
/// one, applied as `∫_T f ≈ |T| Σ w_i f(p_i)`.
#[derive(Debug, Clone)]
pub struct TriQuadrature {
    /// Polynomial degree integrated exactly.
    pub degree: usize,
    /// Barycentric coordinates of the nodes.
    pub points: Vec<[f64; 3]>,
    /// Weights (sum to 1).
    pub weights: Vec<f64>,
}

/// Smallest catalogued rule exact for polynomials of the given degree.
pub fn quadrature(degree: usize) -> TriQuadrature {
    if degree <= 2 {
        let m = 0.5;
        TriQuadrature {
            degree: 2,
            points: vec![[m, m, 0.0], [0.0, m, m], [m, 0.0, m]],
            weights: vec![1.0 / 3.0; 3],
        }
    } else if degree <= 4 {
        let (a, wa) = (0.445948490915965, 0.223381589678011);
        let (b, wb) = (0.091576213509771, 0.109951743655322);
        TriQuadrature {
            degree: 4,
            points: vec![
                [a, a, 1.0 - 2.0 * a],
                [a, 1.0 - 2.0 * a, a],
                [1.0 - 2.0 * a, a, a],
                [b, b, 1.0 - 2.0 * b],
                [b, 1.0 - 2.0 * b, b],
                [1.0 - 2.0 * b, b, b],
            ],
            weights: vec![wa, wa, wa, wb, wb, wb],
        }
    } else if degree <= 5 {
        let (a, wa) = (0.470142064105115, 0.132394152788506);
        let (b, wb) = (0.101286507323456, 0.125939180544827);
        let third = 1.0 / 3.0;
        TriQuadrature {
            degree: 5,
            points: vec![
                [third, third, third],
                [a, a, 1.0 - 2.0 * a],
                [a, 1.0 - 2.0 * a, a],
                [1.0 - 2.0 * a, a, a],
                [b, b, 1.0 - 2.0 * b],
                [b, 1.0 - 2.0 * b, b],
                [1.0 - 2.0 * b, b, b],
            ],
            weights: vec![0.225, wa, wa, wa, wb, wb, wb],
        }
    } else {
        duffy_rule()
    }
}

const GAUSS10_X: [f64; 10] = [
    -0.9739065285171717,
    -0.8650633666889845,
    -0.6794095682990244,
    -0.4333953941292472,
    -0.1488743389816312,
    0.1488743389816312,
    0.4333953941292472,
    0.6794095682990244,
    0.8650633666889845,
    0.9739065285171717,
];
const GAUSS10_W: [f64; 10] = [
    0.0666713443086881,
    0.1494513491505806,
    0.2190863625159820,
    0.2692667193099963,
    0.2955242247147529,
    0.2955242247147529,
    0.2692667193099963,
    0.2190863625159820,
    0.1494513491505806,
    0.0666713443086881,
];

/// High-order tensor rule via the Duffy transform of a 10×10 Gauss grid;
/// effectively exact for smooth integrands at mesh scale.
fn duffy_rule() -> TriQuadrature {
    let mut points = Vec::with_capacity(100);
    let mut weights = Vec::with_capacity(100);
    for (iu, &gu) in GAUSS10_X.iter().enumerate() {
        let u = 0.5 * (gu + 1.0);
        let wu = 0.5 * GAUSS10_W[iu];
        for (iv, &gv) in GAUSS10_X.iter().enumerate() {
            let v = 0.5 * (gv + 1.0);
            let wv = 0.5 * GAUSS10_W[iv];
            let x = u * (1.0 - v);
            let y = u * v;
            points.push([1.0 - x - y, x, y]);
            weights.push(2.0 * wu * wv * u);
        }
    }
    TriQuadrature {
        degree: 17,
        points,
        weights,
    }
}

/// Gauss points/weights on [0, 1].
fn gauss_unit(n: usize) -> Vec<(f64, f64)> {
    match n {
        2 => {
            let a = 0.5 - 0.5 / 3.0_f64.sqrt();
            vec![(a, 0.5), (1.0 - a, 0.5)]
        }
        _ => GAUSS10_X
            .iter()
            .zip(&GAUSS10_W)
            .map(|(&x, &w)| (0.5 * (x + 1.0), 0.5 * w))
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Spaces
// ---------------------------------------------------------------------------

/// Per-element flux basis: coefficients of each local basis function in the
/// centered/scaled monomial basis, and the local-to-global DOF map.
#[derive(Debug, Clone)]
struct ElementBasis {
    /// `coeff[j][i]`: monomial-`j` coefficient of local basis function `i`.
    coeff: Vec<Vec<f64>>,
    /// Global flux DOF index of each local basis function.
    dofs: Vec<usize>,
    center: [f64; 2],
    scale: f64,
}

/// A mixed Raviart–Thomas / discontinuous-pressure space on a mesh.
#[derive(Debug, Clone)]
pub struct MixedSpace {
    /// The underlying mesh (owned).
    pub mesh: TriMesh,
    /// Element order: 0 (RT0/P0dc) or 1 (RT1/P1dc).
    pub order: usize,
    /// Dimension of the flux space.
    pub flux_dim: usize,
    /// Dimension of the pressure space.
    pub pressure_dim: usize,
    /// Assembly quadrature (degree 2·order + 2).
    pub quad: TriQuadrature,
    /// Higher-order quadrature used for error integrals.
    pub quad_err: TriQuadrature,
    elems: Vec<ElementBasis>,
}

fn n_monomials(order: usize) -> usize {
    if order == 0 {
        3
    } else {
        8
    }
}

fn pressure_per_elem(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

/// Monomial vector fields in local coordinates `ξ = (x - center)/scale`.
fn mono_values(order: usize, xi: [f64; 2]) -> Vec<[f64; 2]> {
    let mut v = vec![[1.0, 0.0], [0.0, 1.0]];
    if order == 0 {
        v.push([xi[0], xi[1]]);
    } else {
        v.push([xi[0], 0.0]);
        v.push([0.0, xi[0]]);
        v.push([xi[1], 0.0]);
        v.push([0.0, xi[1]]);
        v.push([xi[0] * xi[0], xi[0] * xi[1]]);
        v.push([xi[0] * xi[1], xi[1] * xi[1]]);
    }
    v
}

/// Physical divergences of the monomial fields.
fn mono_divs(order: usize, xi: [f64; 2], scale: f64) -> Vec<f64> {
    if order == 0 {
        vec![0.0, 0.0, 2.0 / scale]
    } else {
        vec![
            0.0,
            0.0,
            1.0 / scale,
            0.0,
            0.0,
            1.0 / scale,
            3.0 * xi[0] / scale,
            3.0 * xi[1] / scale,
        ]
    }
}

/// Pressure basis values at a barycentric point: `{1}` for order 0,
/// the barycentric (vertex-nodal) functions for order 1.
pub fn pressure_basis(order: usize, bary: [f64; 3]) -> Vec<f64> {
    if order == 0 {
        vec![1.0]
    } else {
        vec![bary[0], bary[1], bary[2]]
    }
}

impl MixedSpace {
    /// Flux DOFs per element.
    pub fn flux_per_elem(&self) -> usize {
        if self.order == 0 {
            3
        } else {
            8
        }
    }

    /// Pressure DOFs per element.
    pub fn pressure_per_elem(&self) -> usize {
        pressure_per_elem(self.order)
    }

    /// Global pressure DOF index of local basis `k` on element `t`.
    pub fn pressure_dof(&self, t: usize, k: usize) -> usize {
        t * self.pressure_per_elem() + k
    }

    /// Global flux DOF indices of element `t`.
    pub fn flux_dofs(&self, t: usize) -> &[usize] {
        &self.elems[t].dofs
    }

    /// Values of the local flux basis functions of element `t` at physical
    /// point `x`.
    pub fn flux_basis_values(&self, t: usize, x: [f64; 2]) -> Vec<[f64; 2]> {
        let eb = &self.elems[t];
        let xi = [
            (x[0] - eb.center[0]) / eb.scale,
            (x[1] - eb.center[1]) / eb.scale,
        ];
        let mv = mono_values(self.order, xi);
        let n = eb.dofs.len();
        let mut out = vec![[0.0; 2]; n];
        for i in 0..n {
            for (j, m) in mv.iter().enumerate() {
                let c = eb.coeff[j][i];
                out[i][0] += c * m[0];
                out[i][1] += c * m[1];
            }
        }
        out
    }

    /// Divergences of the local flux basis functions of element `t` at `x`.
    pub fn flux_basis_divs(&self, t: usize, x: [f64; 2]) -> Vec<f64> {
        let eb = &self.elems[t];
        let xi = [
            (x[0] - eb.center[0]) / eb.scale,
            (x[1] - eb.center[1]) / eb.scale,
        ];
        let dv = mono_divs(self.order, xi, eb.scale);
        let n = eb.dofs.len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            for (j, d) in dv.iter().enumerate() {
                out[i] += eb.coeff[j][i] * d;
            }
        }
        out
    }

    /// Physical coordinates of a barycentric point of element `t`.
    pub fn physical_point(&self, t: usize, bary: [f64; 3]) -> [f64; 2] {
        let pts = self.mesh.triangle_points(t);
        [
            bary[0] * pts[0][0] + bary[1] * pts[1][0] + bary[2] * pts[2][0],
            bary[0] * pts[0][1] + bary[1] * pts[1][1] + bary[2] * pts[2][1],
        ]
    }
}

/// Builds the mixed space of the given order (0 or 1) on a mesh.
pub fn build_space(mesh: &TriMesh, order: usize) -> Result<MixedSpace> {
    if order > 1 {
        return Err(Error::InvalidParameter(format!(
            "unsupported element order {order} (expected 0 or 1)"
        )));
    }
    let n_edges = mesh.n_edges();
    let n_tris = mesh.n_triangles();
    let flux_dim = if order == 0 {
        n_edges
    } else {
        2 * n_edges + 2 * n_tris
    };
    let pressure_dim = pressure_per_elem(order) * n_tris;
    let nm = n_monomials(order);
    let interior_quad = quadrature(2);
    let edge_gauss = gauss_unit(2);

    let mut elems = Vec::with_capacity(n_tris);
    for t in 0..n_tris {
        let pts = mesh.triangle_points(t);
        let center = [
            (pts[0][0] + pts[1][0] + pts[2][0]) / 3.0,
            (pts[0][1] + pts[1][1] + pts[2][1]) / 3.0,
        ];
        let scale = (0..3)
            .map(|k| {
                let (a, b) = (pts[k], pts[(k + 1) % 3]);
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
            })
            .fold(0.0_f64, f64::max);
        let area = mesh.triangle_area(t);

        let mut dofs = Vec::with_capacity(nm);
        let mut v = vec![vec![0.0; nm]; nm];
        let mut row = 0;
        for k in 0..3 {
            let (edge_idx, len, normal) = mesh.edge_geometry(t, k);
            let [a, b] = mesh.edges[edge_idx];
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            let n_moments = order + 1;
            for m in 0..n_moments {
                for &(s, w) in &edge_gauss {
                    let p = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                    let xi = [(p[0] - center[0]) / scale, (p[1] - center[1]) / scale];
                    let q = if m == 0 { 1.0 } else { 2.0 * s - 1.0 };
                    for (j, mv) in mono_values(order, xi).iter().enumerate() {
                        v[row][j] += w * len * q * (mv[0] * normal[0] + mv[1] * normal[1]);
                    }
                }
                dofs.push(if order == 0 {
                    edge_idx
                } else {
                    2 * edge_idx + m
                });
                row += 1;
            }
        }
        if order == 1 {
            for d in 0..2 {
                for (bary, w) in interior_quad.points.iter().zip(&interior_quad.weights) {
                    let p = [
                        bary[0] * pts[0][0] + bary[1] * pts[1][0] + bary[2] * pts[2][0],
                        bary[0] * pts[0][1] + bary[1] * pts[1][1] + bary[2] * pts[2][1],
                    ];
                    let xi = [(p[0] - center[0]) / scale, (p[1] - center[1]) / scale];
                    for (j, mv) in mono_values(order, xi).iter().enumerate() {
                        v[row][j] += w * area * mv[d];
                    }
                }
                dofs.push(2 * n_edges + 2 * t + d);
                row += 1;
            }
        }
        let coeff = invert_dense(&v).map_err(|e| {
            Error::Numerical(format!("flux DOF dualization failed on element {t}: {e}"))
        })?;
        elems.push(ElementBasis {
            coeff,
            dofs,
            center,
            scale,
        });
    }
    Ok(MixedSpace {
        mesh: mesh.clone(),
        order,
        flux_dim,
        pressure_dim,
        quad: quadrature(2 * order + 2),
        quad_err: quadrature(5),
        elems,
    })
}

// ---------------------------------------------------------------------------
// Projections
// ---------------------------------------------------------------------------

/// Element-local L² projection of a scalar function onto the pressure
/// space. Integrals use the high-order rule, so the Galerkin orthogonality
/// residual is dominated only by the smoothness of `v`.
pub fn l2_project(
    space: &MixedSpace,
    v: &(dyn Fn([f64; 2]) -> f64 + Sync),
) -> Result<Vec<f64>> {
    let npe = space.pressure_per_elem();
    let quad = quadrature(7);
    let chunks: Vec<Vec<f64>> = (0..space.mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let area = space.mesh.triangle_area(t);
            let mut mass = vec![vec![0.0; npe]; npe];
            let mut rhs = vec![0.0; npe];
            for (bary, w) in quad.points.iter().zip(&quad.weights) {
                let basis = pressure_basis(space.order, *bary);
                let x = space.physical_point(t, *bary);
                let val = v(x);
                for i in 0..npe {
                    rhs[i] += w * area * val * basis[i];
                    for j in 0..npe {
                        mass[i][j] += w * area * basis[i] * basis[j];
                    }
                }
            }
            solve_dense(&mut mass, &mut rhs).map(|()| rhs)
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Fortin interpolation of a vector field onto the flux space: the classical
/// RT degrees of freedom (edge moments, and interior moments for order 1)
/// evaluated with high-order quadrature. Satisfies the commuting identity
/// `∇·Π_h w = P_h(∇·w)` up to quadrature error.
pub fn fortin_project(
    space: &MixedSpace,
    w: &(dyn Fn([f64; 2]) -> [f64; 2] + Sync),
) -> Result<Vec<f64>> {
    let mesh = &space.mesh;
    let mut dofs = vec![0.0; space.flux_dim];
    let edge_gauss = gauss_unit(10);
    for (e, &[a, b]) in mesh.edges.iter().enumerate() {
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let tangent = [pb[0] - pa[0], pb[1] - pa[1]];
        let len = (tangent[0] * tangent[0] + tangent[1] * tangent[1]).sqrt();
        let normal = [tangent[1] / len, -tangent[0] / len];
        let n_moments = space.order + 1;
        for m in 0..n_moments {
            let mut val = 0.0;
            for &(s, gw) in &edge_gauss {
                let p = [pa[0] + s * tangent[0], pa[1] + s * tangent[1]];
                let wv = w(p);
                let q = if m == 0 { 1.0 } else { 2.0 * s - 1.0 };
                val += gw * len * q * (wv[0] * normal[0] + wv[1] * normal[1]);
            }
            dofs[if space.order == 0 { e } else { 2 * e + m }] = val;
        }
    }
    if space.order == 1 {
        let quad = duffy_rule();
        for t in 0..mesh.n_triangles() {
            let area = mesh.triangle_area(t);
            let mut vals = [0.0; 2];
            for (bary, qw) in quad.points.iter().zip(&quad.weights) {
                let x = space.physical_point(t, *bary);
                let wv = w(x);
                vals[0] += qw * area * wv[0];
                vals[1] += qw * area * wv[1];
            }
            dofs[2 * mesh.n_edges() + 2 * t] = vals[0];
            dofs[2 * mesh.n_edges() + 2 * t + 1] = vals[1];
        }
    }
    Ok(dofs)
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

/// All matrices and load vectors of the discrete scheme at one time level.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    /// Flux mass matrix weighted by `B = A⁻¹` at the assembly time.
    pub m_b: Triplets,
    /// Divergence coupling: `D[p][f] = (∇·φ_f, v_p)`.
    pub d: Triplets,
    /// Convection coupling: `C_b[p][f] = (b·(Bφ_f), v_p)`.
    pub c_b: Triplets,
    /// Pressure matrix `(K^{n,n} + c) (v, v)`.
    pub m_c: Triplets,
    /// Flux-equation load: the boundary functional `⟨u_D, w·n⟩`.
    pub rhs_flux: Vec<f64>,
    /// Pressure-equation load (zeros here; history, integral, and source
    /// contributions are composed by the time stepper).
    pub rhs_pressure: Vec<f64>,
}

struct ElemMats {
    m_b: Vec<Vec<f64>>,
    d: Vec<Vec<f64>>,
    c_b: Vec<Vec<f64>>,
    m_c: Vec<Vec<f64>>,
}

/// Assembles every bilinear form of the scheme at time `t`, with `knn` the
/// leading discrete-derivative weight `K^{n,n}` entering the pressure mass
/// term.
pub fn assemble(
    space: &MixedSpace,
    problem: &ProblemSpec,
    t: f64,
    knn: f64,
) -> Result<AssembledSystem> {
    let mesh = &space.mesh;
    let nfe = space.flux_per_elem();
    let npe = space.pressure_per_elem();

    let elem_mats: Vec<ElemMats> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|tri| -> Result<ElemMats> {
            let area = mesh.triangle_area(tri);
            let mut m_b = vec![vec![0.0; nfe]; nfe];
            let mut d = vec![vec![0.0; nfe]; npe];
            let mut c_b = vec![vec![0.0; nfe]; npe];
            let mut m_c = vec![vec![0.0; npe]; npe];
            for (bary, w) in space.quad.points.iter().zip(&space.quad.weights) {
                let x = space.physical_point(tri, *bary);
                let a = (problem.a)(x, t);
                let b_mat = invert_2x2(&a).map_err(|_| {
                    Error::Numerical(format!(
                        "diffusion matrix not invertible at x = ({}, {}), t = {t}",
                        x[0], x[1]
                    ))
                })?;
                let bvec = (problem.b)(x, t);
                let cval = (problem.c)(x, t);
                let basis = space.flux_basis_values(tri, x);
                let divs = space.flux_basis_divs(tri, x);
                let pbasis = pressure_basis(space.order, *bary);
                let scale = w * area;
                // B φ_j for all local flux functions.
                let bphi: Vec<[f64; 2]> = basis
                    .iter()
                    .map(|p| {
                        [
                            b_mat[0][0] * p[0] + b_mat[0][1] * p[1],
                            b_mat[1][0] * p[0] + b_mat[1][1] * p[1],
                        ]
                    })
                    .collect();
                for j in 0..nfe {
                    for i in 0..nfe {
                        m_b[i][j] +=
                            scale * (bphi[j][0] * basis[i][0] + bphi[j][1] * basis[i][1]);
                    }
                    let b_dot = bvec[0] * bphi[j][0] + bvec[1] * bphi[j][1];
                    for p in 0..npe {
                        d[p][j] += scale * divs[j] * pbasis[p];
                        c_b[p][j] += scale * b_dot * pbasis[p];
                    }
                }
                for p in 0..npe {
                    for q in 0..npe {
                        m_c[p][q] += scale * (knn + cval) * pbasis[p] * pbasis[q];
                    }
                }
            }
            Ok(ElemMats { m_b, d, c_b, m_c })
        })
        .collect::<Result<_>>()?;

    let mut m_b = Triplets::new(space.flux_dim, space.flux_dim);
    let mut d = Triplets::new(space.pressure_dim, space.flux_dim);
    let mut c_b = Triplets::new(space.pressure_dim, space.flux_dim);
    let mut m_c = Triplets::new(space.pressure_dim, space.pressure_dim);
    for (tri, em) in elem_mats.iter().enumerate() {
        let fd = space.flux_dofs(tri);
        for i in 0..nfe {
            for j in 0..nfe {
                m_b.push(fd[i], fd[j], em.m_b[i][j]);
            }
            for p in 0..npe {
                let gp = space.pressure_dof(tri, p);
                d.push(gp, fd[i], em.d[p][i]);
                c_b.push(gp, fd[i], em.c_b[p][i]);
            }
        }
        for p in 0..npe {
            for q in 0..npe {
                m_c.push(
                    space.pressure_dof(tri, p),
                    space.pressure_dof(tri, q),
                    em.m_c[p][q],
                );
            }
        }
    }

    // Nonhomogeneous Dirichlet data enters the flux equation through the
    // natural boundary functional ⟨u_D, w·n⟩ with the outward normal.
    let mut rhs_flux = vec![0.0; space.flux_dim];
    let edge_gauss = gauss_unit(10);
    for tri in 0..mesh.n_triangles() {
        for k in 0..3 {
            let (edge_idx, sign) = mesh.tri_edges[tri][k];
            if !mesh.boundary_edge[edge_idx] {
                continue;
            }
            let (_, len, normal) = mesh.edge_geometry(tri, k);
            let out_normal = [sign * normal[0], sign * normal[1]];
            let [a, b] = mesh.edges[edge_idx];
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            let fd = space.flux_dofs(tri);
            for &(s, gw) in &edge_gauss {
                let p = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                let ud = (problem.dirichlet)(p, t);
                if ud == 0.0 {
                    continue;
                }
                let basis = space.flux_basis_values(tri, p);
                for (i, phi) in basis.iter().enumerate() {
                    rhs_flux[fd[i]] +=
                        gw * len * ud * (phi[0] * out_normal[0] + phi[1] * out_normal[1]);
                }
            }
        }
    }

    Ok(AssembledSystem {
        m_b,
        d,
        c_b,
        m_c,
        rhs_flux,
        rhs_pressure: vec![0.0; space.pressure_dim],
    })
}

/// Unweighted pressure mass matrix `M_V` (block diagonal).
pub fn pressure_mass(space: &MixedSpace) -> Triplets {
    let npe = space.pressure_per_elem();
    let mut m = Triplets::new(space.pressure_dim, space.pressure_dim);
    for tri in 0..space.mesh.n_triangles() {
        let area = space.mesh.triangle_area(tri);
        for (bary, w) in space.quad.points.iter().zip(&space.quad.weights) {
            let basis = pressure_basis(space.order, *bary);
            for p in 0..npe {
                for q in 0..npe {
                    m.push(
                        space.pressure_dof(tri, p),
                        space.pressure_dof(tri, q),
                        w * area * basis[p] * basis[q],
                    );
                }
            }
        }
    }
    m
}

/// Unweighted RT flux mass matrix (identity diffusion).
pub fn flux_mass(space: &MixedSpace) -> Triplets {
    let nfe = space.flux_per_elem();
    let mut m = Triplets::new(space.flux_dim, space.flux_dim);
    for tri in 0..space.mesh.n_triangles() {
        let area = space.mesh.triangle_area(tri);
        let fd = space.flux_dofs(tri);
        for (bary, w) in space.quad.points.iter().zip(&space.quad.weights) {
            let x = space.physical_point(tri, *bary);
            let basis = space.flux_basis_values(tri, x);
            for i in 0..nfe {
                for j in 0..nfe {
                    m.push(
                        fd[i],
                        fd[j],
                        w * area * (basis[i][0] * basis[j][0] + basis[i][1] * basis[j][1]),
                    );
                }
            }
        }
    }
    m
}

/// Load vector `(f, v_p)` for a scalar source at the assembly quadrature.
pub fn pressure_load(
    space: &MixedSpace,
    f: &(dyn Fn([f64; 2]) -> f64 + Sync),
) -> Vec<f64> {
    let npe = space.pressure_per_elem();
    let chunks: Vec<Vec<f64>> = (0..space.mesh.n_triangles())
        .into_par_iter()
        .map(|tri| {
            let area = space.mesh.triangle_area(tri);
            let mut rhs = vec![0.0; npe];
            for (bary, w) in space.quad.points.iter().zip(&space.quad.weights) {
                let x = space.physical_point(tri, *bary);
                let val = f(x);
                let basis = pressure_basis(space.order, *bary);
                for p in 0..npe {
                    rhs[p] += w * area * val * basis[p];
                }
            }
            rhs
        })
        .collect();
    chunks.into_iter().flatten().collect()
}

// ---------------------------------------------------------------------------
// Field evaluation and norms
// ---------------------------------------------------------------------------

/// Value of a discrete pressure field at a barycentric point of element `t`.
pub fn pressure_value(space: &MixedSpace, coeffs: &[f64], t: usize, bary: [f64; 3]) -> f64 {
    let basis = pressure_basis(space.order, bary);
    basis
        .iter()
        .enumerate()
        .map(|(k, b)| coeffs[space.pressure_dof(t, k)] * b)
        .sum()
}

/// Value of a discrete flux field at physical point `x` of element `t`.
pub fn flux_value(space: &MixedSpace, coeffs: &[f64], t: usize, x: [f64; 2]) -> [f64; 2] {
    let basis = space.flux_basis_values(t, x);
    let fd = space.flux_dofs(t);
    let mut v = [0.0; 2];
    for (i, phi) in basis.iter().enumerate() {
        v[0] += coeffs[fd[i]] * phi[0];
        v[1] += coeffs[fd[i]] * phi[1];
    }
    v
}

/// L² distance between a discrete pressure field and a scalar function
/// (degree-5 quadrature).
pub fn l2_error_pressure(
    space: &MixedSpace,
    coeffs: &[f64],
    exact: &(dyn Fn([f64; 2]) -> f64 + Sync),
) -> f64 {
    let total: f64 = (0..space.mesh.n_triangles())
        .into_par_iter()
        .map(|tri| {
            let area = space.mesh.triangle_area(tri);
            let mut s = 0.0;
            for (bary, w) in space.quad_err.points.iter().zip(&space.quad_err.weights) {
                let x = space.physical_point(tri, *bary);
                let diff = pressure_value(space, coeffs, tri, *bary) - exact(x);
                s += w * area * diff * diff;
            }
            s
        })
        .sum();
    total.sqrt()
}

/// L² distance between a discrete flux field and a vector function.
pub fn l2_error_flux(
    space: &MixedSpace,
    coeffs: &[f64],
    exact: &(dyn Fn([f64; 2]) -> [f64; 2] + Sync),
) -> f64 {
    let total: f64 = (0..space.mesh.n_triangles())
        .into_par_iter()
        .map(|tri| {
            let area = space.mesh.triangle_area(tri);
            let mut s = 0.0;
            for (bary, w) in space.quad_err.points.iter().zip(&space.quad_err.weights) {
                let x = space.physical_point(tri, *bary);
                let v = flux_value(space, coeffs, tri, x);
                let e = exact(x);
                s += w * area * ((v[0] - e[0]).powi(2) + (v[1] - e[1]).powi(2));
            }
            s
        })
        .sum();
    total.sqrt()
}

/// L² norm of a discrete pressure field.
pub fn l2_norm_pressure(space: &MixedSpace, coeffs: &[f64]) -> f64 {
    l2_error_pressure(space, coeffs, &|_| 0.0)
}

/// L² norm of a discrete flux field.
pub fn l2_norm_flux(space: &MixedSpace, coeffs: &[f64]) -> f64 {
    l2_error_flux(space, coeffs, &|_| [0.0, 0.0])
}

// ---------------------------------------------------------------------------
// Integral term
// ---------------------------------------------------------------------------

/// Dense Galerkin matrix of the integral term:
/// `G[i][j] = λ ∫∫ φ_j(y) g(x, y) φ_i(x) dy dx` over the pressure basis.
pub fn assemble_integral_matrix(
    space: &MixedSpace,
    g: &(dyn Fn([f64; 2], [f64; 2]) -> f64 + Sync),
    lambda: f64,
) -> Vec<Vec<f64>> {
    let npe = space.pressure_per_elem();
    // Flattened quadrature data: (x, weight, pressure basis values, dofs).
    struct QpData {
        x: [f64; 2],
        w: f64,
        basis: Vec<f64>,
        first_dof: usize,
    }
    let mut qps = Vec::new();
    for tri in 0..space.mesh.n_triangles() {
        let area = space.mesh.triangle_area(tri);
        for (bary, w) in space.quad.points.iter().zip(&space.quad.weights) {
            qps.push(QpData {
                x: space.physical_point(tri, *bary),
                w: w * area,
                basis: pressure_basis(space.order, *bary),
                first_dof: space.pressure_dof(tri, 0),
            });
        }
    }
    let dim = space.pressure_dim;
    let rows: Vec<Vec<f64>> = qps
        .par_iter()
        .map(|outer| {
            // One row-block: contributions of all inner points against the
            // `npe` basis functions alive at the outer point.
            let mut block = vec![0.0; dim * npe];
            for inner in &qps {
                let gv = g(outer.x, inner.x);
                if gv == 0.0 {
                    continue;
                }
                let scale = lambda * outer.w * inner.w * gv;
                for (kj, bj) in inner.basis.iter().enumerate() {
                    let col = inner.first_dof + kj;
                    for (ki, bi) in outer.basis.iter().enumerate() {
                        block[ki * dim + col] += scale * bi * bj;
                    }
                }
            }
            block
        })
        .collect();
    let mut g_mat = vec![vec![0.0; dim]; dim];
    for (outer, block) in qps.iter().zip(rows) {
        for ki in 0..npe {
            let row = outer.first_dof + ki;
            for col in 0..dim {
                g_mat[row][col] += block[ki * dim + col];
            }
        }
    }
    g_mat
}

/// Strategy interface for evaluating the integral-term load vector
/// `i ↦ λ (ℐ u_h, φ_i)` from a pressure DOF vector.
pub trait IntegralOperator: Send + Sync {
    /// Applies the operator to pressure DOFs, returning the load vector.
    fn apply(&self, u: &[f64]) -> Vec<f64>;
    /// Human-readable strategy name.
    fn name(&self) -> &'static str;
}

/// Dense-matrix strategy: exact Galerkin quadrature, quadratic storage.
pub struct DenseIntegral {
    matrix: Vec<Vec<f64>>,
}

impl DenseIntegral {
    /// Builds the dense operator for a kernel.
    pub fn new(space: &MixedSpace, kernel: &IntegralKernel, lambda: f64) -> DenseIntegral {
        let eval = kernel.eval.clone();
        DenseIntegral {
            matrix: assemble_integral_matrix(space, &move |x, y| eval(x, y), lambda),
        }
    }
}

impl IntegralOperator for DenseIntegral {
    fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.matrix
            .par_iter()
            .map(|row| row.iter().zip(u).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn name(&self) -> &'static str {
        "dense"
    }
}

/// Grid-convolution strategy for translation-invariant kernels: the field is
/// sampled at the cell centers of a uniform `m × m` grid over the domain,
/// convolved with kernel samples via FFT (midpoint rule for the integral),
/// and the result enters the load vector through bilinear interpolation at
/// the assembly quadrature points.
pub struct FftIntegral {
    m: usize,
    hx: f64,
    hy: f64,
    lambda: f64,
    /// FFT of the zero-padded kernel sample array (2m × 2m).
    kernel_hat: Vec<Complex<f64>>,
    /// For each grid cell center: (pressure basis values, first pressure DOF)
    /// of the containing element.
    samples: Vec<(Vec<f64>, usize)>,
    /// For each assembly quadrature point: interpolation stencil and the
    /// target DOF weights.
    targets: Vec<QpTarget>,
}

struct QpTarget {
    /// Base cell index (i, j) of the bilinear stencil.
    i: usize,
    j: usize,
    /// Fractional offsets (may fall outside [0, 1] near the boundary, which
    /// linearly extrapolates).
    fx: f64,
    fy: f64,
    /// (pressure DOF, quadrature weight × basis value) pairs.
    weights: Vec<(usize, f64)>,
}

impl FftIntegral {
    /// Builds the grid-convolution operator. Fails when the kernel has no
    /// displacement form.
    pub fn new(
        space: &MixedSpace,
        kernel: &IntegralKernel,
        lambda: f64,
        m: usize,
    ) -> Result<FftIntegral> {
        let disp = kernel.displacement.clone().ok_or_else(|| {
            Error::InvalidParameter(
                "grid-convolution integral strategy requires a translation-invariant kernel"
                    .into(),
            )
        })?;
        if m < 4 {
            return Err(Error::InvalidParameter(
                "convolution grid must have at least 4 cells per axis".into(),
            ));
        }
        let mesh = &space.mesh;
        let (mut x0, mut x1) = (f64::MAX, f64::MIN);
        let (mut y0, mut y1) = (f64::MAX, f64::MIN);
        for v in &mesh.vertices {
            x0 = x0.min(v[0]);
            x1 = x1.max(v[0]);
            y0 = y0.min(v[1]);
            y1 = y1.max(v[1]);
        }
        let hx = (x1 - x0) / m as f64;
        let hy = (y1 - y0) / m as f64;

        // Kernel samples K[dj][di] for displacements (di - m, dj - m) cells,
        // laid out for circular convolution of the zero-padded field.
        let n = 2 * m;
        let mut kernel_arr = vec![Complex::new(0.0, 0.0); n * n];
        for dj in 0..n {
            for di in 0..n {
                // Displacement in cells, wrapped to [-m, m).
                let dx = if di < m { di as i64 } else { di as i64 - n as i64 };
                let dy = if dj < m { dj as i64 } else { dj as i64 - n as i64 };
                kernel_arr[dj * n + di] =
                    Complex::new(disp([dx as f64 * hx, dy as f64 * hy]), 0.0);
            }
        }
        let kernel_hat = fft2(&kernel_arr, n, false);

        let locator = PointLocator::new(mesh);
        let mut samples = Vec::with_capacity(m * m);
        for j in 0..m {
            for i in 0..m {
                let p = [
                    x0 + (i as f64 + 0.5) * hx,
                    y0 + (j as f64 + 0.5) * hy,
                ];
                let (tri, bary) = locator.locate(mesh, p)?;
                samples.push((
                    pressure_basis(space.order, bary),
                    space.pressure_dof(tri, 0),
                ));
            }
        }

        let mut targets = Vec::new();
        let npe = space.pressure_per_elem();
        for tri in 0..mesh.n_triangles() {
            let area = mesh.triangle_area(tri);
            for (bary, w) in space.quad.points.iter().zip(&space.quad.weights) {
                let x = space.physical_point(tri, *bary);
                let gx = (x[0] - x0) / hx - 0.5;
                let gy = (x[1] - y0) / hy - 0.5;
                let i = (gx.floor().max(0.0) as usize).min(m - 2);
                let j = (gy.floor().max(0.0) as usize).min(m - 2);
                let basis = pressure_basis(space.order, *bary);
                let weights = (0..npe)
                    .map(|k| (space.pressure_dof(tri, k), w * area * basis[k]))
                    .collect();
                targets.push(QpTarget {
                    i,
                    j,
                    fx: gx - i as f64,
                    fy: gy - j as f64,
                    weights,
                });
            }
        }
        Ok(FftIntegral {
            m,
            hx,
            hy,
            lambda,
            kernel_hat,
            samples,
            targets,
        })
    }
}

impl IntegralOperator for FftIntegral {
    fn apply(&self, u: &[f64]) -> Vec<f64> {
        let m = self.m;
        let n = 2 * m;
        // Sample the discrete field at cell centers, zero-padded.
        let mut field = vec![Complex::new(0.0, 0.0); n * n];
        for j in 0..m {
            for i in 0..m {
                let (basis, first) = &self.samples[j * m + i];
                let val: f64 = basis
                    .iter()
                    .enumerate()
                    .map(|(k, b)| u[first + k] * b)
                    .sum();
                field[j * n + i] = Complex::new(val, 0.0);
            }
        }
        let mut field_hat = fft2(&field, n, false);
        for (f, k) in field_hat.iter_mut().zip(&self.kernel_hat) {
            *f *= k;
        }
        let conv = fft2(&field_hat, n, true);
        // Midpoint-rule scaling of the convolution integral.
        let cell = self.hx * self.hy / (n * n) as f64;

        let grid_val = |i: usize, j: usize| conv[j * n + i].re * cell;
        let n_dofs = self
            .targets
            .iter()
            .flat_map(|t| t.weights.iter().map(|w| w.0))
            .max()
            .map_or(0, |d| d + 1);
        let mut rhs = vec![0.0; n_dofs];
        for tgt in &self.targets {
            let (i, j, fx, fy) = (tgt.i, tgt.j, tgt.fx, tgt.fy);
            let v00 = grid_val(i, j);
            let v10 = grid_val(i + 1, j);
            let v01 = grid_val(i, j + 1);
            let v11 = grid_val(i + 1, j + 1);
            let val = (1.0 - fx) * (1.0 - fy) * v00
                + fx * (1.0 - fy) * v10
                + (1.0 - fx) * fy * v01
                + fx * fy * v11;
            for &(dof, w) in &tgt.weights {
                rhs[dof] += self.lambda * w * val;
            }
        }
        rhs
    }

    fn name(&self) -> &'static str {
        "fft"
    }
}

/// 2D FFT (row-column) of an `n × n` complex array; `inverse` selects the
/// backward transform (unscaled, consistent with `rustfft`).
fn fft2(data: &[Complex<f64>], n: usize, inverse: bool) -> Vec<Complex<f64>> {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let mut work = data.to_vec();
    // Rows.
    for row in work.chunks_exact_mut(n) {
        fft.process(row);
    }
    // Columns via transpose, transform, transpose back.
    let mut tr = vec![Complex::new(0.0, 0.0); n * n];
    for j in 0..n {
        for i in 0..n {
            tr[i * n + j] = work[j * n + i];
        }
    }
    for row in tr.chunks_exact_mut(n) {
        fft.process(row);
    }
    for j in 0..n {
        for i in 0..n {
            work[j * n + i] = tr[i * n + j];
        }
    }
    work
}

/// Strategy selector for the integral term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegralMethod {
    /// Dense Galerkin matrix (quadratic storage; small spaces).
    Dense,
    /// FFT grid convolution with the given grid resolution per axis.
    Fft(usize),
    /// Dense below a size threshold, FFT otherwise.
    Auto,
}

/// Pressure-space size above which [`IntegralMethod::Auto`] switches from
/// the dense matrix to grid convolution.
pub const DENSE_INTEGRAL_LIMIT: usize = 4000;

/// Default convolution grid resolution for [`IntegralMethod::Auto`].
pub const FFT_GRID_DEFAULT: usize = 256;

/// Builds the integral-term strategy for a problem kernel.
pub fn build_integral_operator(
    space: &MixedSpace,
    kernel: &IntegralKernel,
    lambda: f64,
    method: IntegralMethod,
) -> Result<Box<dyn IntegralOperator>> {
    match method {
        IntegralMethod::Dense => Ok(Box::new(DenseIntegral::new(space, kernel, lambda))),
        IntegralMethod::Fft(m) => Ok(Box::new(FftIntegral::new(space, kernel, lambda, m)?)),
        IntegralMethod::Auto => {
            if space.pressure_dim <= DENSE_INTEGRAL_LIMIT || kernel.displacement.is_none() {
                Ok(Box::new(DenseIntegral::new(space, kernel, lambda)))
            } else {
                Ok(Box::new(FftIntegral::new(
                    space,
                    kernel,
                    lambda,
                    FFT_GRID_DEFAULT,
                )?))
            }
        }
    }
}
