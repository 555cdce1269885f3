//! Randomized lower-bound constructions for multilinear multipliers: sign
//! draws, instance builders, Monte-Carlo norm estimates and power-law fits
//! over the size parameter `N`.

pub mod families;
pub mod rademacher;
pub mod scaling;

pub use families::{
    build_f_n, build_mixed, build_sigma_n, build_sigma_n_on, build_single_bump, c_window,
    sign_ranges, single_bump_closed_form, BumpSymbol, CounterexampleInstance, Family, Layout, Mode,
};
pub use rademacher::{derive_seed, splitmix64, task_seed, RademacherDraw, SignFamily};
pub use scaling::{
    exhaustive_expectation, fit_power_law, mc_norm, output_expectation, scaling_sweep,
    tensor_mc_norm, Estimate, FamilySpec, McReport, NecessityVerdict, PowerFit, ScalingReport,
    ScalingRow, SymbolNorms,
};
