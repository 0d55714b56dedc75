//! Summary statistics of distributional values.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::value::{BernoulliValue, CategoricalValue, DistValue};

/// Probability that the player changes the outcome at all, `1 − q_i(0)`.
pub fn importance(value: &DistValue) -> f64 {
    match value {
        DistValue::Bernoulli(b) => 1.0 - b.q_zero,
        DistValue::Gaussian(g) => {
            let dirac: f64 = g
                .components
                .iter()
                .filter(|c| c.mean == 0.0 && c.sd == 0.0)
                .map(|c| c.weight)
                .sum();
            1.0 - dirac
        }
        DistValue::Categorical(c) => 1.0 - c.p_zero(),
    }
}

/// Mean of the value: a scalar for Bernoulli and Gaussian values, the
/// per-class vector `row sum − column sum` for categorical ones.
pub fn expectation(value: &DistValue) -> Vec<f64> {
    match value {
        DistValue::Bernoulli(b) => vec![b.q_plus - b.q_minus],
        DistValue::Gaussian(g) => vec![g.components.iter().map(|c| c.weight * c.mean).sum()],
        DistValue::Categorical(c) => c
            .with_probs()
            .iter()
            .zip(c.without_probs())
            .map(|(r, s)| r - s)
            .collect(),
    }
}

pub fn bernoulli_variance(value: &BernoulliValue) -> f64 {
    let m = value.q_plus - value.q_minus;
    ((value.q_plus + value.q_minus) - m * m).max(0.0)
}

/// Variance of a scalar value (Bernoulli or Gaussian mixture).
pub fn variance(value: &DistValue) -> Result<f64> {
    match value {
        DistValue::Bernoulli(b) => Ok(bernoulli_variance(b)),
        DistValue::Gaussian(g) => {
            let mean: f64 = g.components.iter().map(|c| c.weight * c.mean).sum();
            let second: f64 = g
                .components
                .iter()
                .map(|c| c.weight * (c.sd * c.sd + c.mean * c.mean))
                .sum();
            Ok((second - mean * mean).max(0.0))
        }
        DistValue::Categorical(_) => Err(Error::UnsupportedFamily("categorical".into())),
    }
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.ln()
    } else {
        0.0
    }
}

/// Shannon entropy in nats over the difference set. For categorical values
/// the atoms are the off-diagonal transitions plus the single "no change"
/// atom.
pub fn entropy(value: &DistValue) -> Result<f64> {
    match value {
        DistValue::Bernoulli(b) => Ok(plogp(b.q_plus) + plogp(b.q_minus) + plogp(b.q_zero)),
        DistValue::Gaussian(_) => Err(Error::UnsupportedFamily("gaussian".into())),
        DistValue::Categorical(c) => {
            let d = c.d();
            let mut h = plogp(c.p_zero());
            for r in 0..d {
                for s in 0..d {
                    if r != s {
                        h += plogp(c.get(r, s));
                    }
                }
            }
            Ok(h.max(0.0))
        }
    }
}

/// One entry `Q_i(to, from)` of a transition matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub prob: f64,
}

impl Transition {
    /// `"A → B: p"` with class labels substituted when given.
    pub fn format(&self, labels: Option<&[String]>) -> String {
        let name = |c: usize| match labels.and_then(|l| l.get(c)) {
            Some(l) => l.clone(),
            None => c.to_string(),
        };
        format!("{} → {}: {:.4}", name(self.from), name(self.to), self.prob)
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.format(None))
    }
}

fn off_diagonal(value: &CategoricalValue) -> Vec<Transition> {
    let d = value.d();
    let mut out = Vec::with_capacity(d * (d - 1));
    for from in 0..d {
        for to in 0..d {
            if from != to {
                out.push(Transition {
                    from,
                    to,
                    prob: value.get(to, from),
                });
            }
        }
    }
    out
}

/// Descending probability, then ascending `(from, to)`.
fn by_prob_then_lex(a: &Transition, b: &Transition) -> Ordering {
    b.prob
        .total_cmp(&a.prob)
        .then(a.from.cmp(&b.from))
        .then(a.to.cmp(&b.to))
}

/// Most probable actual change, ties broken by smallest `(from, to)`.
/// A diagonal-only matrix yields probability 0 on the pair `(0, 1)`.
pub fn mode_change(value: &CategoricalValue) -> Transition {
    off_diagonal(value)
        .into_iter()
        .min_by(by_prob_then_lex)
        .expect("d >= 2")
}

/// The class the player most probably moves the prediction away from:
/// `argmax_s (column sum s − Q_i(s, s))`, ties to the smallest class.
pub fn flip_away(value: &CategoricalValue) -> (usize, f64) {
    let d = value.d();
    let mut best = (0, f64::NEG_INFINITY);
    for s in 0..d {
        let p: f64 = (0..d).filter(|&r| r != s).map(|r| value.get(r, s)).sum();
        if p > best.1 {
            best = (s, p);
        }
    }
    best
}

/// The `k` largest nonzero off-diagonal transitions, descending.
pub fn top_transitions(value: &CategoricalValue, k: usize) -> Vec<Transition> {
    let mut all: Vec<Transition> = off_diagonal(value).into_iter().filter(|t| t.prob > 0.0).collect();
    all.sort_by(by_prob_then_lex);
    all.truncate(k);
    all
}

/// `Σ_c |E[ξ_i]_c|`, the sum of absolute per-class standard values.
pub fn abs_importance(value: &DistValue) -> f64 {
    expectation(value).iter().map(|x| x.abs()).sum()
}

/// All scalar statistics of one value; entries not defined for the family
/// are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueStats {
    pub importance: f64,
    pub expectation: Vec<f64>,
    pub variance: Option<f64>,
    pub entropy: Option<f64>,
    pub mode_change: Option<Transition>,
    pub flip_away: Option<(usize, f64)>,
}

impl ValueStats {
    pub fn of(value: &DistValue) -> Self {
        let cat = value.as_categorical();
        Self {
            importance: importance(value),
            expectation: expectation(value),
            variance: variance(value).ok(),
            entropy: entropy(value).ok(),
            mode_change: cat.map(mode_change),
            flip_away: cat.map(flip_away),
        }
    }
}
