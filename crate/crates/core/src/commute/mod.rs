//! Commutator defects of flow pairs, the A/B/R residual ladders, the
//! concentration residual with its omega bound, and the `Phi^delta`
//! stability audit.

pub mod concentration;
pub mod defect;
pub mod report;
pub mod residual;
pub mod stability;

pub use concentration::{
    concentration_residual, field_norm, jacobian_norm, marginal_density_sup, omega_variation,
    BoundGrids, ConcentrationReport, Exponents, NormProfile, TrajectoryEnsemble, VariationReport,
};
pub use defect::{
    commutator_defect, defect_statistics, pair_singular_set, CommutatorDefectSample, DefectRow,
    DefectStatsSpec, DEFAULT_DEFECT_THRESHOLD,
};
pub use report::{reports_to_csv, ResidualKind, ResidualReport};
pub use residual::{
    composite_map, dyadic_ladder, residual_a, residual_b, residual_r, residual_r_integrated,
    scaling_exponent, scaling_exponent_of, weighted_norm, SlopeFit,
};
pub use stability::{
    perturbed_field, phi_delta, phi_delta_increment_bound, stability_bound_audit, Coupling,
    StabilityAudit, StabilitySpec,
};
