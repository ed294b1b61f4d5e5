//! Partial point clouds rendered by orthographic ray casting from a set of
//! view directions (by default the 12 vertices of a regular icosahedron).

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kdtree::KdTree;
use super::primitives::icosahedron;
use super::{Mesh, PointCloud};
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone)]
pub struct ViewSampling {
    /// Unit directions the camera looks *from*; rays travel along `-d`.
    pub directions: Vec<Vec3>,
    /// Pixel grid is `resolution × resolution` over the bounding disc.
    pub resolution: usize,
    /// Upper bound on points kept per view.
    pub points_per_view: usize,
    /// Replace each ray hit by the position of its provenance vertex.
    pub snap_to_vertices: bool,
    /// Random sub-pixel offsets for ray origins.
    pub jitter: bool,
    pub seed: u64,
}

impl Default for ViewSampling {
    fn default() -> Self {
        Self {
            directions: icosahedron_directions(),
            resolution: 256,
            points_per_view: usize::MAX,
            snap_to_vertices: false,
            jitter: false,
            seed: 0,
        }
    }
}

/// The 12 icosahedron vertex directions.
pub fn icosahedron_directions() -> Vec<Vec3> {
    icosahedron().0
}

/// Samples `n_views` icosahedron views (or fewer if `n_views < 12`) with the
/// default 256² grid.
pub fn sample_partial_views(
    mesh: &Mesh,
    n_views: usize,
    points_per_view: usize,
) -> Result<Vec<PointCloud>> {
    let mut dirs = icosahedron_directions();
    dirs.truncate(n_views.min(dirs.len()));
    sample_views(
        mesh,
        &ViewSampling {
            directions: dirs,
            points_per_view,
            ..Default::default()
        },
    )
}

/// Ray-casts every configured view. Each output keeps at most one hit per
/// mesh vertex (the hit closest to that vertex), so provenance is unique;
/// outputs are ordered by provenance index.
pub fn sample_views(mesh: &Mesh, cfg: &ViewSampling) -> Result<Vec<PointCloud>> {
    let vtree = KdTree::from_points(mesh.vertices());
    let (center, radius) = bounding_disc(mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.directions.len());
    for (view, d) in cfg.directions.iter().enumerate() {
        let hits = cast_view(mesh, d, center, radius, cfg.resolution, cfg.jitter, &mut rng);
        // Closest hit per vertex.
        let mut best: Vec<Option<(f64, Vec3)>> = vec![None; mesh.vertex_count()];
        for p in hits {
            let (vi, d2) = vtree.nearest_point(&p).expect("mesh has vertices");
            if best[vi].is_none_or(|(b, _)| d2 < b) {
                best[vi] = Some((d2, p));
            }
        }
        let mut kept: Vec<(usize, Vec3)> = best
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.map(|(_, p)| (i, p)))
            .collect();
        if kept.is_empty() {
            return Err(Error::NoVisibleSurface { view });
        }
        if kept.len() > cfg.points_per_view {
            let mut idx = sample(&mut rng, kept.len(), cfg.points_per_view).into_vec();
            idx.sort_unstable();
            kept = idx.into_iter().map(|i| kept[i]).collect();
        }
        let prov: Vec<usize> = kept.iter().map(|(i, _)| *i).collect();
        let pts: Vec<Vec3> = if cfg.snap_to_vertices {
            prov.iter().map(|&i| mesh.vertices()[i]).collect()
        } else {
            kept.iter().map(|(_, p)| *p).collect()
        };
        out.push(PointCloud::with_provenance(pts, prov, mesh.vertex_count())?);
    }
    Ok(out)
}

fn bounding_disc(mesh: &Mesh) -> (Vec3, f64) {
    let pts = mesh.vertices();
    let mut lo = pts[0];
    let mut hi = pts[0];
    for p in pts {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let c = (lo + hi) * 0.5;
    let r = pts.iter().map(|p| (p - c).norm()).fold(0.0, f64::max);
    (c, r.max(1e-12) * 1.001)
}

/// Orthonormal image-plane axes for a view direction.
fn view_frame(d: &Vec3) -> (Vec3, Vec3, Vec3) {
    let d = d.normalize();
    let helper = if d.z.abs() < 0.9 { Vec3::z() } else { Vec3::x() };
    let a = d.cross(&helper).normalize();
    let b = d.cross(&a);
    (d, a, b)
}

/// First-hit points for every pixel of one view. No back-face culling.
fn cast_view(
    mesh: &Mesh,
    dir: &Vec3,
    center: Vec3,
    radius: f64,
    res: usize,
    jitter: bool,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec3> {
    let (d, a, b) = view_frame(dir);
    let pix = 2.0 * radius / res as f64;
    let to_px = |x: f64| (x + radius) / pix;

    // Bucket triangles by the pixels their projected bounding boxes touch.
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); res * res];
    let verts = mesh.vertices();
    for (fi, f) in mesh.faces().iter().enumerate() {
        let (mut u0, mut u1, mut v0, mut v1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &i in f {
            let q = verts[i] - center;
            let (u, v) = (to_px(q.dot(&a)), to_px(q.dot(&b)));
            u0 = u0.min(u);
            u1 = u1.max(u);
            v0 = v0.min(v);
            v1 = v1.max(v);
        }
        // Pad by one pixel for jittered origins.
        let clamp = |x: f64| (x.floor().max(0.0) as usize).min(res - 1);
        for py in clamp(v0 - 1.0)..=clamp(v1 + 1.0) {
            for px in clamp(u0 - 1.0)..=clamp(u1 + 1.0) {
                buckets[py * res + px].push(fi as u32);
            }
        }
    }

    let mut hits = Vec::new();
    for py in 0..res {
        for px in 0..res {
            let (ju, jv) = if jitter {
                (rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            } else {
                (0.0, 0.0)
            };
            let bucket = &buckets[py * res + px];
            if bucket.is_empty() {
                continue;
            }
            let u = -radius + (px as f64 + 0.5 + ju) * pix;
            let v = -radius + (py as f64 + 0.5 + jv) * pix;
            let origin = center + d * (2.0 * radius) + a * u + b * v;
            let ray = -d;
            let mut best = f64::INFINITY;
            for &fi in bucket {
                let [i, j, k] = mesh.faces()[fi as usize];
                if let Some(t) = ray_triangle(&origin, &ray, &verts[i], &verts[j], &verts[k]) {
                    if t < best {
                        best = t;
                    }
                }
            }
            if best.is_finite() {
                hits.push(origin + ray * best);
            }
        }
    }
    hits
}

/// Möller–Trumbore ray/triangle intersection; returns the ray parameter.
pub fn ray_triangle(o: &Vec3, d: &Vec3, p0: &Vec3, p1: &Vec3, p2: &Vec3) -> Option<f64> {
    const EPS: f64 = 1e-14;
    let e1 = p1 - p0;
    let e2 = p2 - p0;
    let h = d.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() < EPS {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - p0;
    let u = inv * s.dot(&h);
    if !(-1e-12..=1.0 + 1e-12).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = inv * d.dot(&q);
    if v < -1e-12 || u + v > 1.0 + 1e-12 {
        return None;
    }
    let t = inv * e2.dot(&q);
    (t > EPS).then_some(t)
}
