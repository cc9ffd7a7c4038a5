//! Galerkin discretization of the symmetric spaces: basis construction,
//! the linearized form and its energy-norm spectrum, the projected Picard
//! iteration for (φ, ψ) and a Gauss–Newton probe on the full residual.

mod basis;
mod fixed_point;
mod newton;
mod operator;

pub use basis::{
    basis_widths, build_basis, envelope_exponents, gram_matrices, scaled_condition, symmetric_dilation, BasisElement,
    GalerkinBasis, Space, Term, MAX_GRAM_CONDITION,
};
pub use fixed_point::{
    projected_fixed_point, projected_fixed_point_with, right_hand_side, SolveState, CONTRACTION_LIMIT,
    CONTRACTION_PATIENCE,
};
pub use newton::{
    ansatz_residual_norm, gauss_newton, gauss_newton_full, residual_sq, FamilyResidual, GaussNewtonResult,
    ResidualProblem, ScalarBubbleProblem, ARMIJO, MAX_HALVINGS,
};
pub use operator::{
    assemble_linearized, exact_kernel_singular_value, min_singular_value, potential_matrices, projector,
    spectrum_report, LinearizedOperator, OperatorBlock, SpectrumReport,
};
