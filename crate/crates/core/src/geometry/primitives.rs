//! Procedural test shapes and smooth synthetic deformations.

use std::collections::HashMap;

use super::Mesh;
use crate::Vec3;

/// Regular tetrahedron with unit edge length (total area √3).
pub fn tetrahedron() -> Mesh {
    let v = [
        [1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
    ]
    .iter()
    .map(|p| Vec3::new(p[0], p[1], p[2]) * 0.125f64.sqrt())
    .collect();
    Mesh::new(v, vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]).unwrap()
}

/// Unit square in the z = 0 plane, two triangles, normal +z.
pub fn unit_square() -> Mesh {
    let v = vec![
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(1.0, 1.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
    ];
    Mesh::new(v, vec![[0, 1, 2], [0, 2, 3]]).unwrap()
}

/// `nx × ny` vertex grid over `[0, width] × [0, height]` at z = 0.
pub fn grid(nx: usize, ny: usize, width: f64, height: f64) -> Mesh {
    assert!(nx >= 2 && ny >= 2);
    let mut v = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            v.push(Vec3::new(
                width * i as f64 / (nx - 1) as f64,
                height * j as f64 / (ny - 1) as f64,
                0.0,
            ));
        }
    }
    let mut f = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let a = j * nx + i;
            let (b, c, d) = (a + 1, a + nx + 1, a + nx);
            // Alternate the diagonal to avoid a directional bias.
            if (i + j) % 2 == 0 {
                f.push([a, b, c]);
                f.push([a, c, d]);
            } else {
                f.push([a, b, d]);
                f.push([b, c, d]);
            }
        }
    }
    Mesh::new(v, f).unwrap()
}

/// Unit sphere from a subdivided icosahedron: 10·4^level + 2 vertices.
pub fn icosphere(level: usize) -> Mesh {
    let (mut v, mut f) = icosahedron();
    for _ in 0..level {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut nf = Vec::with_capacity(f.len() * 4);
        let mut midpoint = |a: usize, b: usize, v: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                v.push(((v[a] + v[b]) * 0.5).normalize());
                v.len() - 1
            })
        };
        for t in &f {
            let ab = midpoint(t[0], t[1], &mut v);
            let bc = midpoint(t[1], t[2], &mut v);
            let ca = midpoint(t[2], t[0], &mut v);
            nf.push([t[0], ab, ca]);
            nf.push([t[1], bc, ab]);
            nf.push([t[2], ca, bc]);
            nf.push([ab, bc, ca]);
        }
        f = nf;
    }
    Mesh::new(v, f).unwrap()
}

/// The 12 unit vertices and 20 outward-oriented faces of a regular
/// icosahedron.
pub fn icosahedron() -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let v: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vec3::new(p[0], p[1], p[2]).normalize())
    .collect();
    let f = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (v, f)
}

/// Asymmetric closed surface: an icosphere stretched to an ellipsoid with a
/// smooth radial modulation of relative strength `bumpiness`. Has a simple
/// Laplace spectrum for moderate bumpiness, which spectral tests rely on.
pub fn blob(level: usize, bumpiness: f64) -> Mesh {
    let s = icosphere(level);
    let v = s
        .vertices()
        .iter()
        .map(|p| {
            let r = 1.0
                + bumpiness
                    * (0.6 * (2.0 * p.x + 0.5).sin() * (1.3 * p.y).cos()
                        + 0.4 * (3.0 * p.z + 1.0 * p.x).sin()
                        + 0.3 * p.y * p.y * p.x);
            Vec3::new(1.5 * p.x, 1.0 * p.y, 0.7 * p.z) * r
        })
        .collect();
    s.with_vertices(v).unwrap()
}

/// Elongated bumpy closed surface (about 2.5 : 1 : 0.6) built on
/// `icosphere(level)`. Its distinct ends and lobes give nearest-neighbour
/// alignment a wide basin, unlike the rounder [`blob`].
pub fn elongated(level: usize) -> Mesh {
    let s = icosphere(level);
    let v = s
        .vertices()
        .iter()
        .map(|p| {
            let r = 1.0
                + 0.15
                    * ((3.0 * p.x + 0.5).sin() * (2.1 * p.y).cos()
                        + 0.5 * (3.0 * p.z + p.x).sin());
            Vec3::new(2.5 * p.x, p.y, 0.6 * p.z) * r
        })
        .collect();
    s.with_vertices(v).unwrap()
}

/// Smooth non-rigid bend: rotates each point about the y axis by an angle
/// proportional to its x coordinate, plus a gentle sinusoidal ripple.
/// `amount` scales both effects; displacement stays well within the bounding
/// box for `amount ≤ 0.06`.
pub fn bend(points: &[Vec3], amount: f64) -> Vec<Vec3> {
    points
        .iter()
        .map(|p| {
            let ang = amount * p.x;
            let (s, c) = ang.sin_cos();
            let x = c * p.x + s * p.z;
            let z = -s * p.x + c * p.z;
            let ripple = 0.5 * amount * (1.7 * p.y + 0.3).sin();
            Vec3::new(x, p.y + 0.25 * amount * (p.x * 1.1).sin(), z + ripple)
        })
        .collect()
}

/// Copy of `mesh` with vertices reordered by a seeded random permutation.
/// Returns the copy and `perm`, where new vertex `i` is old vertex `perm[i]`.
pub fn permuted(mesh: &Mesh, seed: u64) -> (Mesh, Vec<usize>) {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let n = mesh.vertex_count();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    let mut inv = vec![0; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let v = perm.iter().map(|&old| mesh.vertices()[old]).collect();
    let f = mesh.faces().iter().map(|t| t.map(|i| inv[i])).collect();
    (Mesh::new(v, f).expect("permutation preserves validity"), perm)
}
