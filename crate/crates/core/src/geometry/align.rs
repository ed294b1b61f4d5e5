//! Rigid pre-alignment: move the centre of mass to the origin, then undo a
//! known orientation by applying `Rᵀ`.

use super::{Mesh, PointCloud, PointSet};
use crate::{Error, Mat3, Result, Vec3};

const ORTHO_TOL: f64 = 1e-9;

/// Shapes that can be re-centred and rotated without changing their type.
pub trait Orientable: PointSet + Sized {
    /// Centroid used for centring: area-weighted for meshes, arithmetic for
    /// clouds.
    fn center_of_mass(&self) -> Vec3;
    fn with_points(&self, points: Vec<Vec3>) -> Result<Self>;
}

impl Orientable for Mesh {
    fn center_of_mass(&self) -> Vec3 {
        self.mass_centroid()
    }
    fn with_points(&self, points: Vec<Vec3>) -> Result<Self> {
        self.with_vertices(points)
    }
}

impl Orientable for PointCloud {
    fn center_of_mass(&self) -> Vec3 {
        self.centroid()
    }
    fn with_points(&self, points: Vec<Vec3>) -> Result<Self> {
        Ok(self.map_points(points))
    }
}

/// Checks `RᵀR = I` and `det R = +1` to within 1e-9.
pub fn check_rotation(r: &Mat3) -> Result<()> {
    if !r.iter().all(|v| v.is_finite()) {
        return Err(Error::NotARotation("non-finite entry".into()));
    }
    let dev = (r.transpose() * r - Mat3::identity()).amax();
    if dev > ORTHO_TOL {
        return Err(Error::NotARotation(format!(
            "|RᵀR - I|max = {dev:e}"
        )));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > ORTHO_TOL {
        return Err(Error::NotARotation(format!("det = {det}")));
    }
    Ok(())
}

/// Returns the shape with every point mapped to `Rᵀ (p - c)`, `c` the centre
/// of mass.
pub fn center_and_orient<S: Orientable>(shape: &S, rotation: &Mat3) -> Result<S> {
    check_rotation(rotation)?;
    let c = shape.center_of_mass();
    let rt = rotation.transpose();
    let pts = shape.points().iter().map(|p| rt * (p - c)).collect();
    shape.with_points(pts)
}
