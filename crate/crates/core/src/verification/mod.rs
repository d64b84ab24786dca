//! Reference oracles, convergence fits and verification studies.

mod dense;
mod rate;
mod report;
mod studies;

pub use dense::{dense_evolve, expm, unitarity_defect, DenseOperator, DENSE_MAX_K};
pub use rate::{eventually_decreasing, fit_rate, upper_bound_constant, RateReport, RESIDUAL_REFIT, ROUNDING_FLOOR};
pub use report::{mode_list, saturation_report, FieldRow, ModeRow, SaturationReport, CLOSURE_MAX_STEPS};
pub use studies::{
    one_plus_sin_sq_atoms, period_study, satlimit_study, saturation_step, strang_study, trotter_study,
    two_mode_state, wtn_study, Curve, PeriodStudy, SatLimitStudy, StrangStudy, Study, TrotterStudy, WtnStudy,
};
