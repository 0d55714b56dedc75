//! Payoff parameters, payoff oracles and the memoized stochastic game.
//!
//! A game never materializes noise. Every payoff is described by the
//! parameters of its reparameterized law, and the coupling between `v(S)` and
//! `v(S ∪ i)` (shared noise) is realized analytically by the marginal kernels
//! or, on sampled paths, by reusing the same seed for both coalitions.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::numeric::softmax;

/// Law of a single payoff `v(S)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PayoffParams {
    Bernoulli { pi: f64 },
    Gaussian { mu: f64, sigma: f64 },
    Categorical { logits: Vec<f64> },
}

impl PayoffParams {
    pub fn family(&self) -> Family {
        match self {
            PayoffParams::Bernoulli { .. } => Family::Bernoulli,
            PayoffParams::Gaussian { .. } => Family::Gaussian,
            PayoffParams::Categorical { logits } => Family::Categorical { d: logits.len() },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PayoffParams::Bernoulli { pi } => {
                if !(0.0..=1.0).contains(pi) {
                    return Err(Error::InvalidPayoff(format!("bernoulli pi = {pi}")));
                }
            }
            PayoffParams::Gaussian { mu, sigma } => {
                if !mu.is_finite() || !sigma.is_finite() || *sigma < 0.0 {
                    return Err(Error::InvalidPayoff(format!(
                        "gaussian mu = {mu}, sigma = {sigma}"
                    )));
                }
            }
            PayoffParams::Categorical { logits } => {
                if logits.len() < 2 {
                    return Err(Error::InvalidPayoff(format!(
                        "categorical needs d >= 2, got {}",
                        logits.len()
                    )));
                }
                if logits.iter().any(|t| !t.is_finite()) {
                    return Err(Error::InvalidPayoff("non-finite logit".into()));
                }
            }
        }
        Ok(())
    }

    /// `E[v(S)]`: π for Bernoulli, μ for Gaussian, class probabilities for
    /// categorical payoffs.
    pub fn expectation(&self) -> Vec<f64> {
        match self {
            PayoffParams::Bernoulli { pi } => vec![*pi],
            PayoffParams::Gaussian { mu, .. } => vec![*mu],
            PayoffParams::Categorical { logits } => softmax(logits),
        }
    }
}

/// Payoff family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Bernoulli,
    Gaussian,
    Categorical { d: usize },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Bernoulli => "bernoulli",
            Family::Gaussian => "gaussian",
            Family::Categorical { .. } => "categorical",
        }
    }

    /// Length of `E[v(S)]`.
    pub fn dim(&self) -> usize {
        match self {
            Family::Categorical { d } => *d,
            _ => 1,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Categorical { d } => write!(f, "categorical(d={d})"),
            other => f.write_str(other.name()),
        }
    }
}

/// A deterministic map from coalitions to payoff laws.
///
/// Implementations must return identical parameters for identical
/// coalitions and be safe to call from several threads at once.
pub trait PayoffOracle: Send + Sync {
    fn n_players(&self) -> usize;
    fn family(&self) -> Family;
    fn payoff(&self, coalition: &Coalition) -> Result<PayoffParams>;
}

impl<F> PayoffOracle for (usize, Family, F)
where
    F: Fn(&Coalition) -> Result<PayoffParams> + Send + Sync,
{
    fn n_players(&self) -> usize {
        self.0
    }
    fn family(&self) -> Family {
        self.1
    }
    fn payoff(&self, coalition: &Coalition) -> Result<PayoffParams> {
        (self.2)(coalition)
    }
}

struct MemoOracle {
    oracle: Arc<dyn PayoffOracle>,
    n: usize,
    family: Family,
    memo: RwLock<HashMap<u64, PayoffParams>>,
}

enum GameKind {
    Oracle(MemoOracle),
    Mixture {
        weight: f64,
        first: StochasticGame,
        second: StochasticGame,
    },
}

/// An `n`-player stochastic game.
///
/// Either a memoized payoff oracle, or the mixture that plays `first` with
/// probability `weight` and `second` otherwise.
#[derive(Clone)]
pub struct StochasticGame {
    kind: Arc<GameKind>,
}

impl fmt::Debug for StochasticGame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.kind {
            GameKind::Oracle(o) => f
                .debug_struct("StochasticGame")
                .field("n_players", &o.n)
                .field("family", &o.family)
                .finish(),
            GameKind::Mixture {
                weight,
                first,
                second,
            } => f
                .debug_struct("MixtureGame")
                .field("weight", weight)
                .field("first", first)
                .field("second", second)
                .finish(),
        }
    }
}

impl StochasticGame {
    pub fn from_oracle<O: PayoffOracle + 'static>(oracle: O) -> Result<Self> {
        Self::from_shared(Arc::new(oracle))
    }

    pub fn from_shared(oracle: Arc<dyn PayoffOracle>) -> Result<Self> {
        let n = oracle.n_players();
        let family = oracle.family();
        if n == 0 || n > crate::coalition::MAX_PLAYERS {
            return Err(Error::InvalidArgument(format!("player count {n}")));
        }
        if let Family::Categorical { d } = family {
            if d < 2 {
                return Err(Error::InvalidArgument(format!("categorical d = {d}")));
            }
        }
        Ok(Self {
            kind: Arc::new(GameKind::Oracle(MemoOracle {
                oracle,
                n,
                family,
                memo: RwLock::new(HashMap::new()),
            })),
        })
    }

    /// Convenience constructor from a closure.
    pub fn from_fn<F>(n_players: usize, family: Family, f: F) -> Result<Self>
    where
        F: Fn(&Coalition) -> Result<PayoffParams> + Send + Sync + 'static,
    {
        Self::from_oracle((n_players, family, f))
    }

    /// The game equal to `first` with probability `weight`, else `second`.
    pub fn mixture(weight: f64, first: StochasticGame, second: StochasticGame) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::OutOfRange(weight));
        }
        if first.n_players() != second.n_players() {
            return Err(Error::PlayerCountMismatch {
                expected: first.n_players(),
                got: second.n_players(),
            });
        }
        if first.family() != second.family() {
            return Err(Error::FamilyMismatch {
                expected: first.family().to_string(),
                got: second.family().to_string(),
            });
        }
        Ok(Self {
            kind: Arc::new(GameKind::Mixture {
                weight,
                first,
                second,
            }),
        })
    }

    pub fn n_players(&self) -> usize {
        match &*self.kind {
            GameKind::Oracle(o) => o.n,
            GameKind::Mixture { first, .. } => first.n_players(),
        }
    }

    pub fn family(&self) -> Family {
        match &*self.kind {
            GameKind::Oracle(o) => o.family,
            GameKind::Mixture { first, .. } => first.family(),
        }
    }

    /// `(weight, first, second)` when this is a mixture game.
    pub fn as_mixture(&self) -> Option<(f64, &StochasticGame, &StochasticGame)> {
        match &*self.kind {
            GameKind::Mixture {
                weight,
                first,
                second,
            } => Some((*weight, first, second)),
            GameKind::Oracle(_) => None,
        }
    }

    /// The oracle's parameters for `coalition`, memoized and checked against
    /// the game's family. Mixture games have no single parameter vector.
    pub fn query_payoff(&self, coalition: &Coalition) -> Result<PayoffParams> {
        let o = match &*self.kind {
            GameKind::Oracle(o) => o,
            GameKind::Mixture { .. } => {
                return Err(Error::UnsupportedFamily(
                    "mixture game (no single payoff law)".into(),
                ))
            }
        };
        if coalition.n_players() != o.n {
            return Err(Error::PlayerCountMismatch {
                expected: o.n,
                got: coalition.n_players(),
            });
        }
        if let Some(p) = o.memo.read().expect("memo poisoned").get(&coalition.mask()) {
            return Ok(p.clone());
        }
        let params = o.oracle.payoff(coalition)?;
        params.validate()?;
        if params.family() != o.family {
            return Err(Error::FamilyMismatch {
                expected: o.family.to_string(),
                got: params.family().to_string(),
            });
        }
        let mut memo = o.memo.write().expect("memo poisoned");
        Ok(memo.entry(coalition.mask()).or_insert(params).clone())
    }

    /// `E[v(S)]`, mixing the components for mixture games.
    pub fn expected_payoff(&self, coalition: &Coalition) -> Result<Vec<f64>> {
        match &*self.kind {
            GameKind::Oracle(_) => Ok(self.query_payoff(coalition)?.expectation()),
            GameKind::Mixture {
                weight,
                first,
                second,
            } => {
                let a = first.expected_payoff(coalition)?;
                let b = second.expected_payoff(coalition)?;
                Ok(a.iter()
                    .zip(&b)
                    .map(|(x, y)| weight * x + (1.0 - weight) * y)
                    .collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn memoization_calls_oracle_once_per_coalition() {
        let calls = Arc::new(AtomicUsize::new(0));
        let c2 = calls.clone();
        let g = StochasticGame::from_fn(3, Family::Bernoulli, move |c| {
            c2.fetch_add(1, Ordering::SeqCst);
            Ok(PayoffParams::Bernoulli {
                pi: c.len() as f64 / 3.0,
            })
        })
        .unwrap();
        let s = Coalition::from_members(3, [0, 2]).unwrap();
        let a = g.query_payoff(&s).unwrap();
        let b = g.query_payoff(&s).unwrap();
        assert_eq!(a, b);
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn family_mismatch_is_rejected() {
        let g = StochasticGame::from_fn(2, Family::Categorical { d: 3 }, |_| {
            Ok(PayoffParams::Categorical {
                logits: vec![0.0, 1.0],
            })
        })
        .unwrap();
        let err = g.query_payoff(&Coalition::empty(2).unwrap()).unwrap_err();
        assert!(matches!(err, Error::FamilyMismatch { .. }));
    }

    #[test]
    fn invalid_params_are_rejected() {
        let g = StochasticGame::from_fn(1, Family::Gaussian, |_| {
            Ok(PayoffParams::Gaussian {
                mu: 0.0,
                sigma: -1.0,
            })
        })
        .unwrap();
        assert!(g.query_payoff(&Coalition::empty(1).unwrap()).is_err());
    }

    #[test]
    fn oracle_errors_propagate() {
        let g = StochasticGame::from_fn(2, Family::Bernoulli, |_| {
            Err(Error::OracleFailure("bridge closed".into()))
        })
        .unwrap();
        assert_eq!(
            g.query_payoff(&Coalition::empty(2).unwrap()),
            Err(Error::OracleFailure("bridge closed".into()))
        );
    }

    #[test]
    fn params_serde_shapes() {
        let p: PayoffParams = serde_json::from_str(r#"{"logits":[1.0,2.0]}"#).unwrap();
        assert_eq!(p.family(), Family::Categorical { d: 2 });
        let p: PayoffParams = serde_json::from_str(r#"{"mu":1.0,"sigma":0.0}"#).unwrap();
        assert_eq!(p.family(), Family::Gaussian);
        let p: PayoffParams = serde_json::from_str(r#"{"pi":0.25}"#).unwrap();
        assert_eq!(p.expectation(), vec![0.25]);
    }

    #[test]
    fn mixture_expectation_mixes() {
        let a = StochasticGame::from_fn(1, Family::Bernoulli, |_| Ok(PayoffParams::Bernoulli { pi: 1.0 }))
            .unwrap();
        let b = StochasticGame::from_fn(1, Family::Bernoulli, |_| Ok(PayoffParams::Bernoulli { pi: 0.0 }))
            .unwrap();
        let m = StochasticGame::mixture(0.25, a, b).unwrap();
        let e = m.expected_payoff(&Coalition::empty(1).unwrap()).unwrap();
        assert_eq!(e, vec![0.25]);
        assert!(m.query_payoff(&Coalition::empty(1).unwrap()).is_err());
    }
}
