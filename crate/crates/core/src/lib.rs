//! Numerical toolkit for entropy-based information geometry.
//!
//! The crate is organised bottom-up:
//!
//! * [`morphogenetic`] extends tensor calculus to rectangular Jacobians through
//!   the pseudo-inverse `J⁺ = (JᵀJ)⁻¹Jᵀ`: metric tensor, projector, covariant and
//!   contravariant components and Christoffel-type connection terms.
//! * [`entropy_fisher`] builds Boltzmann entropy vectors `S_j = k log W_j(θ)`,
//!   their Jacobian and the Fisher matrix `F = JᵀJ`, together with a quadrature
//!   score oracle and Monte-Carlo Cramér–Rao checks.
//! * [`field`] holds uniform-grid scalar fields and their finite-difference stencils.
//! * [`quantum_potential`] computes the Weyl-like vector, the quantum potential
//!   from microstate fields, the Fisher action and the quantum Hamilton–Jacobi residual.
//! * [`trajectories`] integrates Bohmian guidance trajectories, including a
//!   two-slit scenario built from closed-form Gaussian packets.
//! * [`geometrodynamics`] covers the relativistic quantum potential, quantum mass,
//!   conformal metrics and the Klein–Gordon Hamilton–Jacobi residual.

pub mod entropy_fisher;
pub mod error;
pub mod field;
pub mod geometrodynamics;
pub mod morphogenetic;
pub mod packets;
pub mod quantum_potential;
pub mod trajectories;

pub use entropy_fisher::{
    cramer_rao_gap, entropy_jacobian, entropy_vector, fisher_matrix, mc_estimator_covariance,
    score_fisher_oracle, EntropyVector, EstimatorCovariance, FisherMatrix,
    MicrostateFamily, ParametricDistribution,
};
pub use error::{Error, Result};
pub use field::{Axis, FieldSeries, Grid, ScalarField};
pub use geometrodynamics::{
    conformal_metric, kg_hj_residual, quantum_mass, relativistic_quantum_potential, KgForm,
    QuantumMass, SpacetimeMetric,
};
pub use morphogenetic::{
    christoffel_terms, components, covariant_derivative, metric_tensor, projection_operator,
    pseudo_inverse, quadratic_length, Components, MetricTensor, ProjectionOperator, RectJacobian,
    SmoothMap,
};
pub use quantum_potential::{
    action_stationarity, log_weight_residual, fisher_action, hj_energy_residual,
    quantum_potential_w, weyl_vector, ActionTerms, PhysicalConstants, QMode, QPotentialResult,
};
pub use trajectories::{
    bohmian_trajectories, double_slit_scenario, DoubleSlitParams, DoubleSlitResult,
    GuidanceField, Histogram, InitialEnsemble, TrajectoryEnsemble,
};
