//! Point maps, functional maps between spectral bases, the regularized
//! partial solve and structural diagnostics.

mod energies;
mod fmap;
mod pointmap;
mod prop1;

pub use energies::{nce_alignment_loss, structural_energies, StructuralEnergies};
pub use fmap::{
    fmap_from_pointmap, fmap_supervision_loss, solve_regularized_fmap, FunctionalMap,
    DEFAULT_COMMUTATIVITY_WEIGHT,
};
pub use pointmap::{pointmap_from_features, MapMode, PointMap};
pub use prop1::{check_prop1, check_prop1_with_bases, Prop1Options, Prop1Report, Prop1Trial};
