//! Semidefinite relaxations of the ILD-enhancement problem: lifted problem
//! construction, a small interior-point solver, rank-one extraction and a
//! brute-force oracle for small instances.

mod ipm;
mod oracle;
mod problem;
mod solve;

pub use ipm::{solve_real, IpmOptions, IpmResult, IpmStatus};
pub use oracle::{qcqp_oracle, OracleOptions, OracleResult};
pub use problem::{
    build_mi, build_problem, complex_to_real_embedding, complexify, embed, embed_program, ConstraintCount,
    LiftedConstraint, LiftedProblem, RealSdp, Variant,
};
pub use solve::{
    feasibility, polish, quadratic_residual, rank1_gap, rank1_residual, solve, LiftedSolution, SolveStatus,
    SolverOptions,
};
