//! Registration energies, the bijectivity filter and the two-stage
//! optimization loop.

mod energy;
mod optimize;
mod pipeline;

pub use energy::{
    bijectivity_filter, chamfer_energy, corr_energy, EnergyContext, EnergyTerms, EnergyWeights,
    Pair,
};
pub use optimize::OptimizerConfig;
pub use pipeline::{
    register, register_with, spectral_target_features, FeatureInputs, FeatureKind, LogRecord,
    Prepared, RegistrationConfig, RegistrationResult, RegistrationState, Stage,
};
