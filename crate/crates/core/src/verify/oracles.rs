//! Brute-force reference implementations. They deliberately share no code
//! with the optimized paths beyond the coalition and structure types.

use rand::Rng;
use rayon::prelude::*;

use crate::coalition::{check_enumerable, Coalition};
use crate::error::{Error, Result};
use crate::game::{Family, PayoffParams, StochasticGame};
use crate::structure::CoalitionStructure;
use crate::value::{sample_rng, OutcomeOracle};

/// `Σ_S p^i(S) (u(S ∪ i) − u(S))` by looping over every bitmask.
pub fn oracle_standard_value<U>(u: U, p: &CoalitionStructure, i: usize) -> Result<f64>
where
    U: Fn(&Coalition) -> f64,
{
    let n = p.n_players();
    check_enumerable(n)?;
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, n_players: n });
    }
    let mut total = 0.0;
    for mask in 0..(1u64 << n) {
        if mask & (1 << i) != 0 {
            continue;
        }
        let s = Coalition::from_mask(n, mask)?;
        let w = p.pmf(i, &s);
        if w == 0.0 {
            continue;
        }
        let with = Coalition::from_mask(n, mask | (1 << i))?;
        total += w * (u(&with) - u(&s));
    }
    Ok(total)
}

/// Plain softmax, written out independently of the library kernels.
pub fn naive_softmax(theta: &[f64]) -> Vec<f64> {
    let mut top = theta[0];
    for &t in theta {
        if t > top {
            top = t;
        }
    }
    let e: Vec<f64> = theta.iter().map(|t| (t - top).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|x| x / z).collect()
}

fn gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return -(-u.ln()).ln();
        }
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..xs.len() {
        if xs[k] > xs[best] {
            best = k;
        }
    }
    best
}

const GUMBEL_CHUNK: usize = 1 << 14;

/// Empirical joint of `(argmax(α + ε), argmax(β + ε))` under shared Gumbel
/// noise `ε`, row-major with rows indexed by the α outcome.
pub fn oracle_categorical_joint(alpha: &[f64], beta: &[f64], samples: usize, seed: u64) -> Result<Vec<f64>> {
    let d = alpha.len();
    if d != beta.len() || d < 2 {
        return Err(Error::DimensionMismatch(format!("alpha has {d} entries, beta {}", beta.len())));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    let chunks = samples.div_ceil(GUMBEL_CHUNK);
    let counts: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = sample_rng(seed, chunk as u64);
            let len = GUMBEL_CHUNK.min(samples - chunk * GUMBEL_CHUNK);
            let mut counts = vec![0u64; d * d];
            let mut a = vec![0.0; d];
            let mut b = vec![0.0; d];
            for _ in 0..len {
                for k in 0..d {
                    let e = gumbel(&mut rng);
                    a[k] = alpha[k] + e;
                    b[k] = beta[k] + e;
                }
                counts[argmax(&a) * d + argmax(&b)] += 1;
            }
            counts
        })
        .collect();
    let mut total = vec![0u64; d * d];
    for c in counts {
        for (t, x) in total.iter_mut().zip(c) {
            *t += x;
        }
    }
    Ok(total.into_iter().map(|c| c as f64 / samples as f64).collect())
}

/// `½ Σ |a − b|`.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Class outcomes of a categorical game realized by Gumbel-argmax, with the
/// noise vector determined by the seed alone (shared across coalitions).
pub struct GumbelOutcomeOracle {
    game: StochasticGame,
    d: usize,
}

impl GumbelOutcomeOracle {
    pub fn new(game: StochasticGame) -> Result<Self> {
        match game.family() {
            Family::Categorical { d } if game.as_mixture().is_none() => Ok(Self { game, d }),
            other => Err(Error::UnsupportedFamily(other.to_string())),
        }
    }
}

impl OutcomeOracle for GumbelOutcomeOracle {
    fn n_players(&self) -> usize {
        self.game.n_players()
    }

    fn n_classes(&self) -> usize {
        self.d
    }

    fn outcome(&self, coalition: &Coalition, seed: u64) -> Result<usize> {
        let PayoffParams::Categorical { logits } = self.game.query_payoff(coalition)? else {
            return Err(Error::UnsupportedFamily(self.game.family().to_string()));
        };
        let mut rng = sample_rng(seed, 0);
        let noisy: Vec<f64> = logits.iter().map(|t| t + gumbel(&mut rng)).collect();
        Ok(argmax(&noisy))
    }
}
