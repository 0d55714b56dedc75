//! Independent oracles and executable property checks.

pub mod fidelity;
pub mod oracles;
pub mod rank;
pub mod suite;

pub use fidelity::{fidelity_trace, scheme_scores, synthetic_fidelity_model, FidelityRow, FidelityTrace, Scheme};
pub use oracles::{
    naive_softmax, oracle_categorical_joint, oracle_standard_value, total_variation, GumbelOutcomeOracle,
};
pub use rank::{compare_rankings, rank_discrepancy, RankReport};
pub use suite::{run_property_suite, value_distance, PropertyId, PropertyReport, Status, SuiteConfig};
