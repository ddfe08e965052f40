//! Particle measures, push-forward densities, maximal functions.

pub mod density;
pub mod ensemble;
pub mod grid;
pub mod maximal;
pub mod sobolev;

pub use density::{
    compressibility_estimate, pushforward_density, transport, CompressibilityReport, Histogram,
    PushforwardDensity, Transported,
};
pub use ensemble::{sample_reference_measure, stream_rng, ParticleEnsemble, Source};
pub use grid::{Grid, ScalarGridField};
pub use maximal::{
    interior_cell, maximal_function, sharp_maximal_decay, sharp_maximal_function, DecayReport,
    MaximalEngine, RadiusNet,
};
pub use sobolev::{
    sample_pairs, sobolev_pointwise_audit, SobolevAudit, SobolevGrids, SobolevOrder,
};
