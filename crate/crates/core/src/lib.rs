//! Distributional values for stochastic cooperative games.
//!
//! A player's value is the law of its random marginal contribution
//! `v(S ∪ i) ⊖ v(S)` with `S` drawn from a coalition structure `p^i`.
//! Bernoulli, Gaussian and categorical payoff families are supported, both
//! by exact enumeration and by Monte Carlo.

pub mod bridge;
pub mod builders;
pub mod coalition;
pub mod error;
pub mod game;
pub mod marginal;
pub mod numeric;
pub mod stats;
pub mod structure;
pub mod value;
pub mod verify;

pub use builders::{build_game, GameSpec, SpecFile, StructureSpec};
pub use coalition::{enum_limit, enumerate_subsets, set_enum_limit, Coalition};
pub use error::{Error, Result};
pub use game::{Family, PayoffOracle, PayoffParams, StochasticGame};
pub use marginal::{bernoulli_mc, categorical_mc, gaussian_mc, BernoulliMC, CategoricalMC, GaussianMC};
pub use stats::{
    abs_importance, bernoulli_variance, entropy, expectation, flip_away, importance, mode_change,
    top_transitions, variance, Transition, ValueStats,
};
pub use structure::{CoalitionStructure, EfficiencyReport, StructureKind};
pub use value::{
    exact_value, exact_values, mc_value, mc_value_sampled, BernoulliValue, CategoricalValue, DistValue,
    GaussianComponent, GaussianValue, McEstimate, OutcomeOracle,
};
