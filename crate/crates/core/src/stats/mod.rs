//! Hypothesis tests, the renewal-sequence utility, and verifiers for the
//! subcritical, critical and supercritical limit theorems.

mod hypothesis;
mod limits;
mod renewal;

pub use hypothesis::{
    chi_square_geometric, kolmogorov_q, ks_one_sample, ks_two_sample, mc_mean_se, proportion_se, ChiSquareResult,
    KsResult, MeanSe, MIN_EXPECTED, MIN_SAMPLE,
};
pub use limits::{
    converged, limit_critical, limit_subcritical, limit_supercritical, Constants, ExactRow, LimitReport, LimitTest,
    MonteCarlo, Verdict, ALPHA, CONVERGENCE_TOL, MIN_CONDITIONED, SE_BAND,
};
pub use renewal::{renewal_sequence, RenewalSequences};
