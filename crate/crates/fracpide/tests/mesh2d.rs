//! Tests for structured triangulations, uniform refinement, and point
//! location.

use fracpide::mesh2d::{barycentric, locate_point, rect_mesh, refine_uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn unit_square_single_cell() {
    let mesh = rect_mesh(0.0, 1.0, 0.0, 1.0, 1, 1).unwrap();
    assert_eq!(mesh.n_triangles(), 2);
    assert_eq!(mesh.n_vertices(), 4);
    assert_eq!(mesh.n_edges(), 5);
    assert!((mesh.h - 2.0_f64.sqrt()).abs() <= 1e-15);
    assert!((mesh.total_area() - 1.0).abs() <= 1e-14);
}

#[test]
fn structured_mesh_counts_and_h() {
    let mesh = rect_mesh(-1.0, 1.0, -1.0, 1.0, 8, 8).unwrap();
    assert_eq!(mesh.n_triangles(), 2 * 8 * 8);
    assert_eq!(mesh.n_vertices(), 81);
    // h equals the cell diagonal.
    let expected = (2.0 / 8.0) * 2.0_f64.sqrt();
    assert!((mesh.h - expected).abs() <= 1e-14, "h = {}", mesh.h);
}

#[test]
fn partition_of_domain_area() {
    for &(nx, ny) in &[(1, 1), (3, 5), (8, 8), (13, 7)] {
        let mesh = rect_mesh(-1.0, 1.0, -1.0, 1.0, nx, ny).unwrap();
        assert!(
            (mesh.total_area() - 4.0).abs() <= 1e-12,
            "area mismatch for {nx}x{ny}"
        );
    }
}

#[test]
fn euler_formula_and_boundary_counts() {
    for &(nx, ny) in &[(1, 1), (4, 4), (5, 3)] {
        let mesh = rect_mesh(0.0, 2.0, 0.0, 1.0, nx, ny).unwrap();
        let v = mesh.n_vertices() as i64;
        let e = mesh.n_edges() as i64;
        let f = mesh.n_triangles() as i64;
        assert_eq!(v - e + f, 1, "Euler formula for {nx}x{ny}");
        let boundary = mesh.boundary_edge.iter().filter(|&&b| b).count();
        assert_eq!(boundary, 2 * (nx + ny), "boundary edges for {nx}x{ny}");
    }
}

#[test]
fn interior_edge_orientation_consistency() {
    let mesh = rect_mesh(0.0, 1.0, 0.0, 1.0, 4, 4).unwrap();
    let mut signed_sum = vec![0.0; mesh.n_edges()];
    for incid in &mesh.tri_edges {
        for &(idx, sign) in incid {
            signed_sum[idx] += sign;
        }
    }
    for (idx, &s) in signed_sum.iter().enumerate() {
        if mesh.boundary_edge[idx] {
            assert!(s.abs() == 1.0);
        } else {
            assert_eq!(s, 0.0, "interior edge {idx} signs do not cancel");
        }
    }
}

#[test]
fn rect_mesh_rejects_bad_input() {
    assert!(rect_mesh(0.0, 1.0, 0.0, 1.0, 0, 2).is_err());
    assert!(rect_mesh(0.0, 1.0, 0.0, 1.0, 2, 0).is_err());
    assert!(rect_mesh(1.0, 0.0, 0.0, 1.0, 2, 2).is_err());
    assert!(rect_mesh(0.0, 1.0, 1.0, 1.0, 2, 2).is_err());
}

#[test]
fn refinement_counts_and_h() {
    let mesh = rect_mesh(0.0, 1.0, 0.0, 1.0, 1, 1).unwrap();
    let fine = refine_uniform(&mesh).unwrap();
    assert_eq!(fine.n_triangles(), 8);
    assert!((fine.h - mesh.h / 2.0).abs() <= 1e-15);
    let finer = refine_uniform(&fine).unwrap();
    assert_eq!(finer.n_triangles(), 32);
    assert!((finer.h - mesh.h / 4.0).abs() <= 1e-15);
    assert!((finer.total_area() - 1.0).abs() <= 1e-12);
}

#[test]
fn refinement_is_nested() {
    let mesh = rect_mesh(-1.0, 1.0, -1.0, 1.0, 3, 2).unwrap();
    let fine = refine_uniform(&mesh).unwrap();
    // Coarse vertices are a prefix of the fine vertex list.
    for (i, v) in mesh.vertices.iter().enumerate() {
        assert_eq!(*v, fine.vertices[i]);
    }
}

#[test]
fn locate_centroid_and_vertices() {
    let mesh = rect_mesh(0.0, 1.0, 0.0, 1.0, 3, 3).unwrap();
    for t in 0..mesh.n_triangles() {
        let pts = mesh.triangle_points(t);
        let centroid = [
            (pts[0][0] + pts[1][0] + pts[2][0]) / 3.0,
            (pts[0][1] + pts[1][1] + pts[2][1]) / 3.0,
        ];
        let (found, lam) = locate_point(&mesh, centroid).unwrap();
        assert_eq!(found, t);
        for l in lam {
            assert!((l - 1.0 / 3.0).abs() <= 1e-12);
        }
    }
    // A vertex locates in some incident triangle with one coordinate 1.
    for &v in &mesh.vertices {
        let (t, lam) = locate_point(&mesh, v).unwrap();
        let pts = mesh.triangle_points(t);
        let near = (0..3).any(|k| {
            (pts[k][0] - v[0]).abs() <= 1e-14
                && (pts[k][1] - v[1]).abs() <= 1e-14
                && (lam[k] - 1.0).abs() <= 1e-12
        });
        assert!(near, "vertex {v:?} not matched in triangle {t}");
    }
}

#[test]
fn locate_reproduces_linear_functions() {
    // Barycentric interpolation of a linear function is exact at any point.
    let f = |p: [f64; 2]| 3.0 * p[0] - 2.0 * p[1] + 0.75;
    let mesh = rect_mesh(-1.0, 1.0, -1.0, 1.0, 5, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_2001);
    for _ in 0..200 {
        let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let (t, lam) = locate_point(&mesh, p).unwrap();
        let pts = mesh.triangle_points(t);
        let interp: f64 = (0..3).map(|k| lam[k] * f(pts[k])).sum();
        assert!(
            (interp - f(p)).abs() <= 1e-12,
            "linear reproduction failed at {p:?}"
        );
        assert!((lam[0] + lam[1] + lam[2] - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn locate_rejects_outside_points() {
    let mesh = rect_mesh(0.0, 1.0, 0.0, 1.0, 2, 2).unwrap();
    assert!(locate_point(&mesh, [1.5, 0.5]).is_err());
    assert!(locate_point(&mesh, [0.5, -1e-6]).is_err());
    // Barely outside within tolerance is accepted.
    assert!(locate_point(&mesh, [0.5, -1e-13]).is_ok());
}

#[test]
fn barycentric_basics() {
    let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    assert_eq!(barycentric(&pts, [0.0, 0.0]), [1.0, 0.0, 0.0]);
    let lam = barycentric(&pts, [0.25, 0.25]);
    assert!((lam[0] - 0.5).abs() <= 1e-15);
    assert!((lam[1] - 0.25).abs() <= 1e-15);
    assert!((lam[2] - 0.25).abs() <= 1e-15);
}

#[test]
fn dump_text_roundtrip_shape() {
    let mesh = rect_mesh(0.0, 1.0, 0.0, 1.0, 2, 1).unwrap();
    let dump = mesh.dump_text();
    let mut lines = dump.lines();
    let header: Vec<usize> = lines
        .next()
        .unwrap()
        .split_whitespace()
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(header, vec![mesh.n_vertices(), mesh.n_triangles()]);
    assert_eq!(dump.lines().count(), 1 + mesh.n_vertices() + mesh.n_triangles());
}
