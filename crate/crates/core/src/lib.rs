//! Regularized Brascamp-Lieb exponents, witness constructions, lattice
//! quadrature, and multilinear Kakeya experiments.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod datum;
pub mod error;
pub mod exponent;
pub mod fit;
pub mod grid;
pub mod integrator;
pub mod kakeya;
pub mod lattice;
pub mod problem;
pub mod rng;
pub mod subspace;

pub use basis::{factor_map, select_basis, verify_locbd_exponent, BasisReport, BasisSelection, LocbdCheck};
pub use datum::{perturb, BlDatum, PerturbationSpec, ValidationFailure, ValidationReport};
pub use error::{Error, Result};
pub use exponent::{
    bl_polytope_contains, candidate_subspaces, gamma_of, gamma_sup, locbd_exponent, nu_estimate, stability_scan,
    CandidateOptions, ExponentReport, PolytopeVerdict, StabilityReport,
};
pub use fit::{fit_loglog, LogLogFit};
pub use grid::GridSpec;
pub use integrator::{bl_integral, bl_ratio, empirical_blr, fit_growth, GrowthFit, GrowthMode, RatioReport};
pub use kakeya::{
    delta_sweep, inflate_family, kakeya_bound, multiscale_ledger, multiscale_schedule, overlap_integral,
    random_tube_family, tube_membership, FamilySampling, MultiscaleLedger, SweepReport, Tube, TubeFamily,
};
pub use lattice::{norm_a, witness, LatticeFn, LatticeSet, WitnessSet};
pub use problem::{KakeyaBlock, ProblemDoc};
pub use subspace::{grassmann_distance, image_dim, orthocomplement, random_subspace, rank, Matrix, Subspace, Vector};

/// Library version embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
