//! ADMM engine: block minimizers, the unit-sphere x-update and the two
//! iteration loops.

pub mod engine;
pub mod sphere;
pub mod subproblem;

pub use engine::{gamma_from_db, run_wosc, run_wsc, AdmmConfig, AdmmState, IterationRecord};
pub use sphere::{
    realify, realify_mat, realify_vec, secular_bisect, secular_bracket, solve_sphere_lsq,
    sphere_cost, Realified, SecularSystem,
};
pub use subproblem::{update_g_wosc, update_gh_wsc, wosc_block_cost, wsc_block_cost, BlockUpdate};
