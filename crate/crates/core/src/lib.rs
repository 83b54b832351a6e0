//! Centre-manifold reduction of parameterised ODE systems in standard split
//! form, with flexible truncation orders O(x^q, eps^p) as a first-class,
//! checkable notion.
//!
//! Pipeline: parse a system (`sysmodel`), compute a polynomial manifold
//! approximation with exact rational coefficients (`cmsolve`), certify the
//! residual order symbolically and compare trajectories numerically
//! (`verify`). The polynomial carrier (`poly`) and the order calculus
//! (`order`) underpin all of it.

pub mod cmsolve;
pub mod order;
pub mod poly;
pub mod sysmodel;
pub mod testutil;
pub mod verify;

pub use cmsolve::{
    apply_h, default_max_iter, iterate_fixed_point, kept_monomials, reduce_model, solve_graded,
    ManifoldApprox, Method, ModelOrder, ReducedModel, SolveError,
};
pub use order::{
    in_coupled_error_set, verify_order, OrderError, OrderMode, OrderSpec, OrderSpecRecord, OrderVerdict,
};
pub use poly::{Layout, Monomial, PolyError, Polynomial, Rational, TermRecord, Var};
pub use sysmodel::{
    parse_system, validate_spectrum, CentreSystem, SpectrumError, SpectrumReport, SystemError,
    VariableLayout, DEFAULT_DIMENSION_CAP, DEFAULT_SPECTRUM_TOL,
};
pub use verify::{
    check_residual_order, check_theorem4_consistency, certify_difference, compare_trajectories,
    integrate, run_one, NumericConfig, OrderCertificate, StableStart, Trajectory, TrajectoryReport,
    VerifyError,
};
