use nalgebra::DMatrix;

use super::{fmap_from_pointmap, FunctionalMap, PointMap};
use crate::features::FeatureMatrix;
use crate::spectral::Embedding;
use crate::{Error, Result};

/// Structural penalties on a pair of opposite functional maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuralEnergies {
    /// `‖C₁₂ C₂₁ − I‖²_F`
    pub bijectivity: f64,
    /// `‖C₁₂ C₁₂ᵀ − I‖_F + ‖C₂₁ C₂₁ᵀ − I‖_F`
    pub orthogonality: f64,
    /// `‖C₁₂ − Φ₂⁺ Π₂₁ Φ₁‖_F + ‖C₂₁ − Φ₁⁺ Π₁₂ Φ₂‖_F`
    pub alignment: f64,
}

fn identity_gap(m: &DMatrix<f64>) -> f64 {
    (m - DMatrix::identity(m.nrows(), m.ncols())).norm()
}

/// `c12` carries functions on shape 1 to shape 2 (`k₂ × k₁`), `c21` the
/// reverse. `pi21` maps the points of shape 2 into shape 1, `pi12` the
/// points of shape 1 into shape 2.
pub fn structural_energies(
    c12: &FunctionalMap,
    c21: &FunctionalMap,
    pi12: &PointMap,
    pi21: &PointMap,
    basis1: &impl Embedding,
    basis2: &impl Embedding,
) -> Result<StructuralEnergies> {
    let (a, b) = (c12.matrix(), c21.matrix());
    if a.shape() != (basis2.k(), basis1.k()) || b.shape() != (basis1.k(), basis2.k()) {
        return Err(Error::DimensionMismatch(format!(
            "C12 {:?} and C21 {:?} for bases of size {} and {}",
            a.shape(),
            b.shape(),
            basis1.k(),
            basis2.k()
        )));
    }
    let bij = identity_gap(&(a * b));
    let ortho = identity_gap(&(a * a.transpose())) + identity_gap(&(b * b.transpose()));
    let p12 = fmap_from_pointmap(pi21, basis1, basis2)?;
    let p21 = fmap_from_pointmap(pi12, basis2, basis1)?;
    let align = (a - p12.matrix()).norm() + (b - p21.matrix()).norm();
    Ok(StructuralEnergies {
        bijectivity: bij * bij,
        orthogonality: ortho,
        alignment: align,
    })
}

/// Contrastive alignment loss between paired feature rows:
/// `−Σ_i log softmax_j(⟨F_i, G_j⟩ / γ)_i`.
pub fn nce_alignment_loss(f: &FeatureMatrix, g: &FeatureMatrix, gamma: f64) -> Result<f64> {
    if f.values().shape() != g.values().shape() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            f.values().shape(),
            g.values().shape()
        )));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidConfig(format!("temperature {gamma} must be positive")));
    }
    let sim = f.values() * g.values().transpose() / gamma;
    let mut loss = 0.0;
    for i in 0..sim.nrows() {
        let row = sim.row(i);
        let max = row.max();
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - sim[(i, i)];
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;
    use crate::spectral::eigenbasis;

    fn fm(m: DMatrix<f64>) -> FunctionalMap {
        FunctionalMap::from_matrix(m).unwrap()
    }

    #[test]
    fn identity_maps_have_zero_energies() {
        let m = primitives::blob(2, 0.3);
        let b = eigenbasis(&m, 8).unwrap();
        let id = PointMap::identity(m.vertex_count());
        let i8 = fm(DMatrix::identity(8, 8));
        let e = structural_energies(&i8, &i8, &id, &id, &b, &b).unwrap();
        assert!(e.bijectivity < 1e-9 && e.orthogonality < 1e-9 && e.alignment < 1e-9, "{e:?}");
    }

    #[test]
    fn doubled_map_bijectivity() {
        let m = primitives::blob(1, 0.3);
        let b = eigenbasis(&m, 3).unwrap();
        let id = PointMap::identity(m.vertex_count());
        let e = structural_energies(
            &fm(DMatrix::identity(3, 3) * 2.0),
            &fm(DMatrix::identity(3, 3)),
            &id,
            &id,
            &b,
            &b,
        )
        .unwrap();
        assert!((e.bijectivity - 3.0).abs() < 1e-12);
    }

    #[test]
    fn nce_values() {
        let one = FeatureMatrix::from_values(DMatrix::from_element(1, 4, 0.3)).unwrap();
        assert_eq!(nce_alignment_loss(&one, &one, 0.7).unwrap(), 0.0);
        let eye = FeatureMatrix::from_values(DMatrix::identity(2, 2)).unwrap();
        let expected = -2.0 * (1f64.exp() / (1f64.exp() + 1.0)).ln();
        assert!((nce_alignment_loss(&eye, &eye, 1.0).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.626523).abs() < 1e-6);
    }

    #[test]
    fn nce_penalizes_permutation() {
        let f = FeatureMatrix::from_values(DMatrix::identity(4, 4) * 3.0).unwrap();
        let perm = f.select_rows(&[1, 0, 2, 3]);
        assert!(nce_alignment_loss(&f, &perm, 0.5).unwrap() > nce_alignment_loss(&f, &f, 0.5).unwrap());
    }
}
