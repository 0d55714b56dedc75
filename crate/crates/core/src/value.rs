//! Distributional values: per-player mixtures, over `S ~ p^i`, of the
//! per-coalition marginal laws.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::coalition::{check_enumerable, Coalition};
use crate::error::{Error, Result};
use crate::game::{Family, PayoffParams, StochasticGame};
use crate::marginal::{bernoulli_mc, categorical_mc, gaussian_mc};
use crate::structure::CoalitionStructure;

/// Gaussian components closer than this in both mean and sd are merged.
pub const MERGE_TOL: f64 = 1e-12;

/// Coalitions per parallel work item in [`exact_value`].
const EXACT_CHUNK: usize = 512;

/// Samples per parallel work item in [`mc_value`].
const MC_CHUNK: usize = 1024;

/// Per-chunk memo of marginal laws, cleared when full.
const MC_CACHE_LIMIT: usize = 1 << 14;

/// Bernoulli value: a PMF over `{+1, −1, 0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliValue {
    pub q_plus: f64,
    pub q_minus: f64,
    pub q_zero: f64,
}

/// One component `weight · N(mean, sd²)` of a Gaussian value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: f64,
    pub sd: f64,
}

/// Gaussian value: a mixture of Gaussians plus the law of the sign of the
/// change in standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianValue {
    pub components: Vec<GaussianComponent>,
    /// Probabilities of `σ_{S∪i} − σ_S` being negative, zero, positive.
    pub sign_pmf: [f64; 3],
}

/// Categorical value: the transition matrix `Q_i(r, s)`, the probability
/// that player `i` flips the outcome from class `s` to class `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalValue {
    d: usize,
    transition: Vec<f64>,
}

impl CategoricalValue {
    /// Wraps a row-major `d × d` matrix (row = class with the player, column
    /// = class without).
    pub fn from_matrix(d: usize, transition: Vec<f64>) -> Result<Self> {
        if transition.len() != d * d || d < 2 {
            return Err(Error::DimensionMismatch(format!(
                "transition of length {} for d = {d}",
                transition.len()
            )));
        }
        Ok(Self { d, transition })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `Q_i(to, from)`.
    pub fn get(&self, to: usize, from: usize) -> f64 {
        self.transition[to * self.d + from]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.transition
    }

    /// Probability of no change, `Σ_r Q_i(r, r)`.
    pub fn p_zero(&self) -> f64 {
        (0..self.d).map(|r| self.get(r, r)).sum()
    }

    /// Mixture class probabilities of `v(S ∪ i)`.
    pub fn with_probs(&self) -> Vec<f64> {
        (0..self.d).map(|r| (0..self.d).map(|s| self.get(r, s)).sum()).collect()
    }

    /// Mixture class probabilities of `v(S)`.
    pub fn without_probs(&self) -> Vec<f64> {
        (0..self.d).map(|s| (0..self.d).map(|r| self.get(r, s)).sum()).collect()
    }
}

/// Family-matched distributional value.
#[derive(Debug, Clone, PartialEq)]
pub enum DistValue {
    Bernoulli(BernoulliValue),
    Gaussian(GaussianValue),
    Categorical(CategoricalValue),
}

impl DistValue {
    /// The zero measure of the family, used as an accumulator.
    pub fn zero(family: Family) -> Self {
        match family {
            Family::Bernoulli => DistValue::Bernoulli(BernoulliValue {
                q_plus: 0.0,
                q_minus: 0.0,
                q_zero: 0.0,
            }),
            Family::Gaussian => DistValue::Gaussian(GaussianValue {
                components: Vec::new(),
                sign_pmf: [0.0; 3],
            }),
            Family::Categorical { d } => DistValue::Categorical(CategoricalValue {
                d,
                transition: vec![0.0; d * d],
            }),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            DistValue::Bernoulli(_) => Family::Bernoulli,
            DistValue::Gaussian(_) => Family::Gaussian,
            DistValue::Categorical(c) => Family::Categorical { d: c.d },
        }
    }

    /// `self += weight · other`.
    pub fn add_scaled(&mut self, other: &DistValue, weight: f64) -> Result<()> {
        match (self, other) {
            (DistValue::Bernoulli(a), DistValue::Bernoulli(b)) => {
                a.q_plus += weight * b.q_plus;
                a.q_minus += weight * b.q_minus;
                a.q_zero += weight * b.q_zero;
            }
            (DistValue::Gaussian(a), DistValue::Gaussian(b)) => {
                a.components.extend(b.components.iter().map(|c| GaussianComponent {
                    weight: weight * c.weight,
                    ..*c
                }));
                for k in 0..3 {
                    a.sign_pmf[k] += weight * b.sign_pmf[k];
                }
            }
            (DistValue::Categorical(a), DistValue::Categorical(b)) if a.d == b.d => {
                for (x, y) in a.transition.iter_mut().zip(&b.transition) {
                    *x += weight * y;
                }
            }
            (a, b) => {
                return Err(Error::FamilyMismatch {
                    expected: a.family().to_string(),
                    got: b.family().to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        match self {
            DistValue::Bernoulli(a) => {
                a.q_plus *= factor;
                a.q_minus *= factor;
                a.q_zero *= factor;
            }
            DistValue::Gaussian(a) => {
                for c in &mut a.components {
                    c.weight *= factor;
                }
                for p in &mut a.sign_pmf {
                    *p *= factor;
                }
            }
            DistValue::Categorical(a) => {
                for x in &mut a.transition {
                    *x *= factor;
                }
            }
        }
    }

    /// Merges Gaussian components that agree within [`MERGE_TOL`] and drops
    /// zero-weight ones. The result does not depend on component order.
    pub fn merge_components(&mut self) {
        let DistValue::Gaussian(g) = self else {
            return;
        };
        g.components.retain(|c| c.weight > 0.0);
        g.components.sort_by(|x, y| {
            x.mean
                .total_cmp(&y.mean)
                .then(x.sd.total_cmp(&y.sd))
                .then(x.weight.total_cmp(&y.weight))
        });
        let mut merged: Vec<GaussianComponent> = Vec::with_capacity(g.components.len());
        for c in g.components.drain(..) {
            match merged.last_mut() {
                Some(m) if (m.mean - c.mean).abs() <= MERGE_TOL && (m.sd - c.sd).abs() <= MERGE_TOL => {
                    m.weight += c.weight;
                }
                _ => merged.push(c),
            }
        }
        g.components = merged;
    }

    /// Flat statistics tracked by the Monte Carlo standard errors:
    /// `[q+, q−, q0]` for Bernoulli, `[mean, P(sign<0), P(sign=0), P(sign>0)]`
    /// for Gaussian, the row-major transition matrix for categorical values.
    pub fn entries(&self) -> Vec<f64> {
        match self {
            DistValue::Bernoulli(b) => vec![b.q_plus, b.q_minus, b.q_zero],
            DistValue::Gaussian(g) => {
                let mean = g.components.iter().map(|c| c.weight * c.mean).sum();
                vec![mean, g.sign_pmf[0], g.sign_pmf[1], g.sign_pmf[2]]
            }
            DistValue::Categorical(c) => c.transition.clone(),
        }
    }

    pub fn as_bernoulli(&self) -> Option<&BernoulliValue> {
        match self {
            DistValue::Bernoulli(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_gaussian(&self) -> Option<&GaussianValue> {
        match self {
            DistValue::Gaussian(g) => Some(g),
            _ => None,
        }
    }

    pub fn as_categorical(&self) -> Option<&CategoricalValue> {
        match self {
            DistValue::Categorical(c) => Some(c),
            _ => None,
        }
    }
}

fn params_marginal(with: &PayoffParams, without: &PayoffParams) -> Result<DistValue> {
    match (with, without) {
        (PayoffParams::Bernoulli { pi: a }, PayoffParams::Bernoulli { pi: b }) => {
            let q = bernoulli_mc(*a, *b)?;
            Ok(DistValue::Bernoulli(BernoulliValue {
                q_plus: q.q_plus,
                q_minus: q.q_minus,
                q_zero: q.q_zero,
            }))
        }
        (PayoffParams::Gaussian { mu: m1, sigma: s1 }, PayoffParams::Gaussian { mu: m0, sigma: s0 }) => {
            let g = gaussian_mc(*m1, *s1, *m0, *s0)?;
            let mut sign_pmf = [0.0; 3];
            sign_pmf[(g.sign + 1) as usize] = 1.0;
            Ok(DistValue::Gaussian(GaussianValue {
                components: vec![GaussianComponent {
                    weight: 1.0,
                    mean: g.mean,
                    sd: g.sd,
                }],
                sign_pmf,
            }))
        }
        (PayoffParams::Categorical { logits: a }, PayoffParams::Categorical { logits: b }) => {
            let q = categorical_mc(a, b)?;
            let d = q.d();
            Ok(DistValue::Categorical(CategoricalValue {
                d,
                transition: q.into_vec(),
            }))
        }
        (a, b) => Err(Error::FamilyMismatch {
            expected: a.family().to_string(),
            got: b.family().to_string(),
        }),
    }
}

/// Law of `v(S ∪ i) ⊖ v(S)` for one coalition. For mixture games this is the
/// weighted mixture of the components' laws.
pub fn marginal_contribution(game: &StochasticGame, i: usize, s: &Coalition) -> Result<DistValue> {
    let with = s.insert(i)?;
    if let Some((w, first, second)) = game.as_mixture() {
        let mut out = marginal_contribution(first, i, s)?;
        out.scale(w);
        out.add_scaled(&marginal_contribution(second, i, s)?, 1.0 - w)?;
        return Ok(out);
    }
    params_marginal(&game.query_payoff(&with)?, &game.query_payoff(s)?)
}

fn check_player(game: &StochasticGame, p: &CoalitionStructure, i: usize) -> Result<()> {
    if p.n_players() != game.n_players() {
        return Err(Error::PlayerCountMismatch {
            expected: game.n_players(),
            got: p.n_players(),
        });
    }
    if i >= game.n_players() {
        return Err(Error::IndexOutOfRange {
            index: i,
            n_players: game.n_players(),
        });
    }
    Ok(())
}

/// Deterministic pairwise sum; the tree shape depends only on `parts.len()`.
fn pairwise_reduce(mut parts: Vec<DistValue>) -> Result<DistValue> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.add_scaled(&b, 1.0)?;
            }
            next.push(a);
        }
        parts = next;
    }
    Ok(parts.pop().expect("at least one part"))
}

/// Mixes per-coalition laws over an explicit weighted support. Weights are
/// renormalized by their total.
pub fn value_from_support(game: &StochasticGame, i: usize, support: &[(Coalition, f64)]) -> Result<DistValue> {
    let family = game.family();
    if support.is_empty() {
        return Err(Error::InvalidArgument(format!("player {i} has an empty coalition support")));
    }
    let fold_chunk = |chunk: &[(Coalition, f64)]| -> Result<(DistValue, f64)> {
        let mut acc = DistValue::zero(family);
        let mut total = 0.0;
        for (s, w) in chunk {
            acc.add_scaled(&marginal_contribution(game, i, s)?, *w)?;
            total += w;
        }
        Ok((acc, total))
    };
    let parts: Vec<(DistValue, f64)> = if support.len() <= EXACT_CHUNK {
        vec![fold_chunk(support)?]
    } else {
        support
            .par_chunks(EXACT_CHUNK)
            .map(fold_chunk)
            .collect::<Result<Vec<_>>>()?
    };
    let total: f64 = parts.iter().map(|p| p.1).sum();
    let mut value = pairwise_reduce(parts.into_iter().map(|p| p.0).collect())?;
    value.scale(1.0 / total);
    value.merge_components();
    Ok(value)
}

/// Exact distributional value of player `i` by enumerating the support of
/// `p^i`.
pub fn exact_value(game: &StochasticGame, p: &CoalitionStructure, i: usize) -> Result<DistValue> {
    check_player(game, p, i)?;
    check_enumerable(game.n_players())?;
    let support = p.support(i)?;
    value_from_support(game, i, &support)
}

/// Exact values for every player.
pub fn exact_values(game: &StochasticGame, p: &CoalitionStructure) -> Result<Vec<DistValue>> {
    (0..game.n_players()).map(|i| exact_value(game, p, i)).collect()
}

/// Monte Carlo estimate with per-entry standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub players: Vec<usize>,
    pub values: Vec<DistValue>,
    /// Standard errors of [`DistValue::entries`], per player.
    pub std_errors: Vec<Vec<f64>>,
    pub samples: usize,
}

struct McPartial {
    values: Vec<DistValue>,
    sum: Vec<Vec<f64>>,
    sumsq: Vec<Vec<f64>>,
}

impl McPartial {
    fn merge(mut self, other: McPartial) -> Result<McPartial> {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            a.add_scaled(b, 1.0)?;
            a.merge_components();
        }
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.sumsq.iter_mut().zip(&other.sumsq) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        Ok(self)
    }
}

/// RNG for sample `index` of a run seeded with `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Rao-Blackwellized Monte Carlo value: samples coalitions (one shared
/// permutation per draw for permutation-based structures) and averages the
/// analytic per-coalition laws. Output is identical for any thread count.
pub fn mc_value(
    game: &StochasticGame,
    p: &CoalitionStructure,
    players: &[usize],
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    if players.is_empty() {
        return Err(Error::InvalidArgument("no players selected".into()));
    }
    for &i in players {
        check_player(game, p, i)?;
    }
    let family = game.family();
    let n = game.n_players();

    let run_chunk = |chunk: usize| -> Result<McPartial> {
        let start = chunk * MC_CHUNK;
        let end = (start + MC_CHUNK).min(samples);
        let mut part = McPartial {
            values: players.iter().map(|_| DistValue::zero(family)).collect(),
            sum: Vec::new(),
            sumsq: Vec::new(),
        };
        let mut cache: HashMap<(usize, u64), (DistValue, Vec<f64>)> = HashMap::new();
        for idx in start..end {
            let mut rng = sample_rng(seed, idx as u64);
            let perm = p.sample_permutation(&mut rng);
            for (slot, &i) in players.iter().enumerate() {
                let s = match &perm {
                    Some(order) => {
                        let before = order.iter().take_while(|&&j| j != i).copied();
                        Coalition::from_members(n, before)?
                    }
                    None => p.sample_coalition(i, &mut rng)?,
                };
                let key = (i, s.mask());
                if !cache.contains_key(&key) {
                    if cache.len() >= MC_CACHE_LIMIT {
                        cache.clear();
                    }
                    let c = marginal_contribution(game, i, &s)?;
                    let e = c.entries();
                    cache.insert(key, (c, e));
                }
                let (contrib, e) = &cache[&key];
                if part.sum.len() <= slot {
                    part.sum.push(vec![0.0; e.len()]);
                    part.sumsq.push(vec![0.0; e.len()]);
                }
                for (k, x) in e.iter().enumerate() {
                    part.sum[slot][k] += x;
                    part.sumsq[slot][k] += x * x;
                }
                part.values[slot].add_scaled(contrib, 1.0)?;
            }
        }
        for v in &mut part.values {
            v.merge_components();
        }
        Ok(part)
    };

    let n_chunks = samples.div_ceil(MC_CHUNK);
    let mut parts: Vec<McPartial> = if n_chunks == 1 {
        vec![run_chunk(0)?]
    } else {
        (0..n_chunks)
            .into_par_iter()
            .map(run_chunk)
            .collect::<Result<Vec<_>>>()?
    };
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            next.push(match it.next() {
                Some(b) => a.merge(b)?,
                None => a,
            });
        }
        parts = next;
    }
    let total = parts.pop().expect("one part");

    let nf = samples as f64;
    let mut values = total.values;
    for v in &mut values {
        v.scale(1.0 / nf);
        v.merge_components();
    }
    let std_errors = total
        .sum
        .iter()
        .zip(&total.sumsq)
        .map(|(s, sq)| {
            s.iter()
                .zip(sq)
                .map(|(s, sq)| {
                    if samples < 2 {
                        return 0.0;
                    }
                    let mean = s / nf;
                    let var = ((sq / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
                    (var / nf).sqrt()
                })
                .collect()
        })
        .collect();
    Ok(McEstimate {
        players: players.to_vec(),
        values,
        std_errors,
        samples,
    })
}

/// Outcome oracle for the nested-sampling estimator: the class produced by
/// the model on a coalition for a given random seed.
pub trait OutcomeOracle: Sync {
    fn n_players(&self) -> usize;
    fn n_classes(&self) -> usize;
    fn outcome(&self, coalition: &Coalition, seed: u64) -> Result<usize>;
}

/// Nested-sampling estimate of a categorical value: `k` coalitions from
/// `p^i`, `r` seeds, and for each (seed, coalition) both outcomes evaluated
/// under the same seed.
pub fn mc_value_sampled<O: OutcomeOracle + ?Sized>(
    oracle: &O,
    p: &CoalitionStructure,
    i: usize,
    coalition_samples: usize,
    seed_count: usize,
    seed: u64,
) -> Result<CategoricalValue> {
    if seed_count == 0 {
        return Err(Error::InvalidArgument("at least one seed is required".into()));
    }
    if coalition_samples == 0 {
        return Err(Error::InvalidArgument("at least one coalition sample is required".into()));
    }
    if p.n_players() != oracle.n_players() {
        return Err(Error::PlayerCountMismatch {
            expected: oracle.n_players(),
            got: p.n_players(),
        });
    }
    let d = oracle.n_classes();
    let mut rng = sample_rng(seed, u64::MAX);
    let coalitions: Vec<(Coalition, Coalition)> = (0..coalition_samples)
        .map(|_| {
            let s = p.sample_coalition(i, &mut rng)?;
            Ok((s.insert(i)?, s))
        })
        .collect::<Result<_>>()?;
    let seeds: Vec<u64> = (0..seed_count).map(|_| rng.random()).collect();

    let count_seed = |&noise: &u64| -> Result<Vec<u64>> {
        let mut counts = vec![0u64; d * d];
        for (with, without) in &coalitions {
            let r = oracle.outcome(with, noise)?;
            let s = oracle.outcome(without, noise)?;
            if r >= d || s >= d {
                return Err(Error::OracleFailure(format!("class index out of range for d = {d}")));
            }
            counts[r * d + s] += 1;
        }
        Ok(counts)
    };
    let per_seed: Vec<Vec<u64>> = seeds.par_iter().map(count_seed).collect::<Result<_>>()?;
    let mut counts = vec![0u64; d * d];
    for c in per_seed {
        counts.iter_mut().zip(c).for_each(|(x, y)| *x += y);
    }
    let total = (coalition_samples * seed_count) as f64;
    CategoricalValue::from_matrix(d, counts.into_iter().map(|c| c as f64 / total).collect())
}
