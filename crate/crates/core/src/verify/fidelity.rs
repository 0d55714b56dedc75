//! Cumulative feature removal in the order induced by an attribution.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use crate::builders::LinearSoftmax;
use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::game::{Family, StochasticGame};
use crate::stats::expectation;
use crate::value::{sample_rng, CategoricalValue, DistValue};

/// Orderings of the players for removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Scheme {
    /// Descending transition probability `Q_i(c1, c2)` (a flip from c2 to c1).
    A,
    /// Descending standard value of class c1.
    B,
    /// Descending negated standard value of class c2.
    C,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::A, Scheme::B, Scheme::C];

    pub fn id(&self) -> &'static str {
        match self {
            Scheme::A => "csv_transition",
            Scheme::B => "standard_value",
            Scheme::C => "negated_other",
        }
    }

    pub fn letter(&self) -> &'static str {
        match self {
            Scheme::A => "A",
            Scheme::B => "B",
            Scheme::C => "C",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.letter())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" | "csv_transition" => Ok(Scheme::A),
            "B" | "b" | "standard_value" => Ok(Scheme::B),
            "C" | "c" | "negated_other" => Ok(Scheme::C),
            _ => Err(Error::InvalidArgument(format!("unknown scheme {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityRow {
    pub step: usize,
    pub scheme: Scheme,
    /// Player removed at this step; `None` on step 0.
    pub removed_player: Option<usize>,
    pub p_c1: f64,
    pub p_c2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityTrace {
    pub scheme: Scheme,
    pub order: Vec<usize>,
    pub rows: Vec<FidelityRow>,
}

fn check_classes(d: usize, c1: usize, c2: usize) -> Result<()> {
    if c1 == c2 || c1 >= d || c2 >= d {
        return Err(Error::InvalidClasses(format!("c1 = {c1}, c2 = {c2} with d = {d}")));
    }
    Ok(())
}

/// Per-player scores of a scheme.
pub fn scheme_scores(values: &[CategoricalValue], c1: usize, c2: usize, scheme: Scheme) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|q| {
            check_classes(q.d(), c1, c2)?;
            Ok(match scheme {
                Scheme::A => q.get(c1, c2),
                Scheme::B => expectation(&DistValue::Categorical(q.clone()))[c1],
                Scheme::C => -expectation(&DistValue::Categorical(q.clone()))[c2],
            })
        })
        .collect()
}

/// Removes players from the grand coalition in descending score order and
/// records the class probabilities of `c1` and `c2` after each removal.
pub fn fidelity_trace(
    game: &StochasticGame,
    values: &[CategoricalValue],
    c1: usize,
    c2: usize,
    scheme: Scheme,
    steps: usize,
) -> Result<FidelityTrace> {
    let n = game.n_players();
    let Family::Categorical { d } = game.family() else {
        return Err(Error::UnsupportedFamily(game.family().to_string()));
    };
    check_classes(d, c1, c2)?;
    if values.len() != n {
        return Err(Error::PlayerCountMismatch {
            expected: n,
            got: values.len(),
        });
    }
    if steps > n {
        return Err(Error::InvalidArgument(format!("steps = {steps} exceeds {n} players")));
    }
    let scores = scheme_scores(values, c1, c2, scheme)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let mut current = Coalition::grand(n)?;
    let probs = game.expected_payoff(&current)?;
    let mut rows = vec![FidelityRow {
        step: 0,
        scheme,
        removed_player: None,
        p_c1: probs[c1],
        p_c2: probs[c2],
    }];
    for (k, &player) in order.iter().take(steps).enumerate() {
        current = current.remove(player);
        let probs = game.expected_payoff(&current)?;
        rows.push(FidelityRow {
            step: k + 1,
            scheme,
            removed_player: Some(player),
            p_c1: probs[c1],
            p_c2: probs[c2],
        });
    }
    Ok(FidelityTrace { scheme, order, rows })
}

/// Ten features, three classes, all features present with baseline 0.
/// Feature 0 pushes the prediction from class 1 to class 0; the others carry
/// small weights. Returns the model with `(c1, c2) = (0, 1)`.
pub fn synthetic_fidelity_model() -> (LinearSoftmax, usize, usize) {
    let mut rng = sample_rng(20_231, 0);
    let mut weights = vec![vec![2.5, -1.5, 0.0]];
    for _ in 1..10 {
        weights.push((0..3).map(|_| rng.random_range(-0.2..0.2)).collect());
    }
    let model = LinearSoftmax::new(weights, vec![0.0, 0.5, 0.0], vec![1.0; 10], None, None)
        .expect("valid synthetic model");
    (model, 0, 1)
}
