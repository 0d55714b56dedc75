//! Randomized property suite over small games.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::builders::StructureSpec;
use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::game::{Family, PayoffParams, StochasticGame};
use crate::marginal::categorical_mc;
use crate::stats::expectation;
use crate::structure::CoalitionStructure;
use crate::value::{exact_value, sample_rng, DistValue};
use crate::verify::oracles::{naive_softmax, oracle_categorical_joint, oracle_standard_value, total_variation};

/// Expectation bridge to the standard value.
pub const TOL_PROP1_I: f64 = 1e-10;
/// Null player: structural zeros are exact, float masses within this.
pub const TOL_PROP1_II: f64 = 1e-12;
/// Mixture linearity.
pub const TOL_PROP1_III: f64 = 1e-12;
/// Efficiency at the expectation level.
pub const TOL_PROP1_IV: f64 = 1e-10;
/// Symmetric players.
pub const TOL_PROP1_V: f64 = 1e-12;
/// Row and column sums of the categorical joint.
pub const TOL_MARGINAL: f64 = 1e-9;
/// Total variation against the Gumbel simulator.
pub const TOL_ORACLE_TV: f64 = 0.005;
/// Structure predicates.
pub const TOL_STRUCTURE: f64 = crate::structure::STRUCTURE_TOL;

pub const DEFAULT_TRIALS: usize = 100;
pub const MARGINAL_TRIALS: usize = 1000;
pub const ORACLE_TV_TRIALS: usize = 20;
pub const ORACLE_TV_SAMPLES: usize = 1_000_000;
const MAX_N: usize = 6;
const MAX_D: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyId {
    Prop1I,
    Prop1Ii,
    Prop1Iii,
    Prop1Iv,
    Prop1V,
    MarginalConsistency,
    OracleTv,
    EfficiencyStructure,
    SymmetryStructure,
}

impl PropertyId {
    pub const ALL: [PropertyId; 9] = [
        PropertyId::Prop1I,
        PropertyId::Prop1Ii,
        PropertyId::Prop1Iii,
        PropertyId::Prop1Iv,
        PropertyId::Prop1V,
        PropertyId::MarginalConsistency,
        PropertyId::OracleTv,
        PropertyId::EfficiencyStructure,
        PropertyId::SymmetryStructure,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PropertyId::Prop1I => "prop1_i",
            PropertyId::Prop1Ii => "prop1_ii",
            PropertyId::Prop1Iii => "prop1_iii",
            PropertyId::Prop1Iv => "prop1_iv",
            PropertyId::Prop1V => "prop1_v",
            PropertyId::MarginalConsistency => "marginal_consistency",
            PropertyId::OracleTv => "oracle_tv",
            PropertyId::EfficiencyStructure => "efficiency_structure",
            PropertyId::SymmetryStructure => "symmetry_structure",
        }
    }

    pub fn tolerance(&self) -> f64 {
        match self {
            PropertyId::Prop1I => TOL_PROP1_I,
            PropertyId::Prop1Ii => TOL_PROP1_II,
            PropertyId::Prop1Iii => TOL_PROP1_III,
            PropertyId::Prop1Iv => TOL_PROP1_IV,
            PropertyId::Prop1V => TOL_PROP1_V,
            PropertyId::MarginalConsistency => TOL_MARGINAL,
            PropertyId::OracleTv => TOL_ORACLE_TV,
            PropertyId::EfficiencyStructure | PropertyId::SymmetryStructure => TOL_STRUCTURE,
        }
    }

    fn salt(&self) -> u64 {
        0x9e37_79b9_7f4a_7c15u64.wrapping_mul(*self as u64 + 1)
    }
}

impl fmt::Display for PropertyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PropertyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PropertyId::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown property {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub property: PropertyId,
    pub status: Status,
    pub max_dev: f64,
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
}

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub properties: Vec<PropertyId>,
    pub seed: u64,
    pub trials: usize,
    /// Replaces the default structures in the value-property checks.
    pub structure: Option<StructureSpec>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            properties: PropertyId::ALL.to_vec(),
            seed: 0,
            trials: DEFAULT_TRIALS,
            structure: None,
        }
    }
}

/// Outcome of one trial: `None` when the check does not apply.
type Trial = Result<Option<(f64, Value)>>;

pub fn run_property_suite(cfg: &SuiteConfig) -> Vec<PropertyReport> {
    let mut props = cfg.properties.clone();
    props.sort();
    props.dedup();
    props.into_iter().map(|p| run_property(p, cfg)).collect()
}

fn run_property(prop: PropertyId, cfg: &SuiteConfig) -> PropertyReport {
    let trials = match prop {
        PropertyId::MarginalConsistency => MARGINAL_TRIALS,
        PropertyId::OracleTv => ORACLE_TV_TRIALS,
        _ => cfg.trials,
    };
    let seed = cfg.seed ^ prop.salt();
    let outcomes: Vec<Trial> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = sample_rng(seed, t as u64);
            let ctx = Ctx {
                t,
                structure: cfg.structure.as_ref(),
            };
            match prop {
                PropertyId::Prop1I => prop1_i(&ctx, &mut rng),
                PropertyId::Prop1Ii => prop1_ii(&ctx, &mut rng),
                PropertyId::Prop1Iii => prop1_iii(&ctx, &mut rng),
                PropertyId::Prop1Iv => prop1_iv(&ctx, &mut rng),
                PropertyId::Prop1V => prop1_v(&ctx, &mut rng),
                PropertyId::MarginalConsistency => marginal_consistency(&mut rng),
                PropertyId::OracleTv => oracle_tv(t, seed, &mut rng),
                PropertyId::EfficiencyStructure => efficiency_structure(t, &mut rng),
                PropertyId::SymmetryStructure => symmetry_structure(t, &mut rng),
            }
        })
        .collect();

    let mut max_dev = 0.0f64;
    let mut witness = None;
    let mut applicable = false;
    for (t, outcome) in outcomes.into_iter().enumerate() {
        let (dev, mut w) = match outcome {
            Ok(None) => continue,
            Ok(Some(x)) => x,
            Err(e) => (f64::INFINITY, json!({"error": e.to_string()})),
        };
        let dev = if dev.is_nan() { f64::INFINITY } else { dev };
        applicable = true;
        if witness.is_none() || dev > max_dev {
            max_dev = max_dev.max(dev);
            w["trial"] = json!(t);
            witness = Some(w);
        }
    }
    let tol = prop.tolerance();
    let status = if !applicable {
        Status::NotApplicable
    } else if max_dev <= tol {
        Status::Pass
    } else {
        Status::Fail
    };
    PropertyReport {
        property: prop,
        status,
        max_dev,
        tol,
        witness: if status == Status::Fail { witness } else { None },
    }
}

struct Ctx<'a> {
    t: usize,
    structure: Option<&'a StructureSpec>,
}

#[derive(Clone, Copy)]
enum DefaultStructure {
    RandomOrder,
    SizeWeighted,
}

impl Ctx<'_> {
    /// Player count for this trial; override structures with a fixed size
    /// pin it.
    fn n<R: Rng>(&self, rng: &mut R, min: usize) -> usize {
        let fixed = match self.structure {
            Some(StructureSpec::Weights { weights }) => Some(weights.len()),
            Some(StructureSpec::Perm { perms }) => perms.first().map(|p| p.order.len()),
            Some(StructureSpec::Custom { tables }) => Some(tables.len()),
            _ => None,
        };
        fixed.unwrap_or_else(|| rng.random_range(min..=MAX_N))
    }

    fn structure<R: Rng>(&self, n: usize, rng: &mut R, alt: DefaultStructure) -> Result<CoalitionStructure> {
        if let Some(spec) = self.structure {
            return spec.build(n);
        }
        if self.t.is_multiple_of(2) {
            return CoalitionStructure::shapley(n);
        }
        match alt {
            DefaultStructure::RandomOrder => random_order(n, rng),
            DefaultStructure::SizeWeighted => {
                let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
                CoalitionStructure::size_weighted(n, &w)
            }
        }
    }
}

fn random_order<R: Rng>(n: usize, rng: &mut R) -> Result<CoalitionStructure> {
    let k = rng.random_range(1..=6);
    let mut pmf: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for _ in 0..k {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        *pmf.entry(order).or_default() += rng.random_range(0.05..1.0);
    }
    let total: f64 = pmf.values().sum();
    let pmf: Vec<(Vec<usize>, f64)> = pmf.into_iter().map(|(o, w)| (o, w / total)).collect();
    CoalitionStructure::random_order(n, &pmf)
}

fn random_family<R: Rng>(t: usize, rng: &mut R) -> Family {
    match t % 3 {
        0 => Family::Categorical {
            d: rng.random_range(2..=MAX_D),
        },
        1 => Family::Bernoulli,
        _ => Family::Gaussian,
    }
}

fn random_params<R: Rng>(family: Family, rng: &mut R) -> PayoffParams {
    match family {
        Family::Bernoulli => {
            let pi = match rng.random_range(0..10) {
                0 => 0.0,
                1 => 1.0,
                _ => rng.random(),
            };
            PayoffParams::Bernoulli { pi }
        }
        Family::Gaussian => PayoffParams::Gaussian {
            mu: rng.random_range(-2.0..2.0),
            sigma: if rng.random_range(0..5) == 0 {
                0.0
            } else {
                rng.random_range(0.0..2.0)
            },
        },
        Family::Categorical { d } => PayoffParams::Categorical {
            logits: (0..d).map(|_| rng.random_range(-3.0..3.0)).collect(),
        },
    }
}

/// Tabulated game with `table[mask]` as the payoff of each coalition.
pub(crate) fn tabulated(n: usize, family: Family, table: Vec<PayoffParams>) -> Result<StochasticGame> {
    StochasticGame::from_fn(n, family, move |c| Ok(table[c.mask() as usize].clone()))
}

fn random_game<R: Rng>(n: usize, family: Family, rng: &mut R) -> Result<StochasticGame> {
    let table = (0..1usize << n).map(|_| random_params(family, rng)).collect();
    tabulated(n, family, table)
}

fn describe(n: usize, family: Family) -> Value {
    json!({"n": n, "family": family.to_string()})
}

/// Entrywise distance between two values of the same family. Gaussian
/// components are matched by (mean, sd); unmatched mass counts in full.
pub fn value_distance(a: &DistValue, b: &DistValue) -> f64 {
    match (a, b) {
        (DistValue::Gaussian(x), DistValue::Gaussian(y)) => {
            let mut dev = 0.0f64;
            for k in 0..3 {
                dev = dev.max((x.sign_pmf[k] - y.sign_pmf[k]).abs());
            }
            let close = |p: &crate::value::GaussianComponent, q: &crate::value::GaussianComponent| {
                (p.mean - q.mean).abs() <= 1e-12 && (p.sd - q.sd).abs() <= 1e-12
            };
            for p in &x.components {
                let w: f64 = y.components.iter().filter(|q| close(p, q)).map(|q| q.weight).sum();
                dev = dev.max((p.weight - w).abs());
            }
            for q in &y.components {
                if !x.components.iter().any(|p| close(p, q)) {
                    dev = dev.max(q.weight);
                }
            }
            dev
        }
        (a, b) if a.family() == b.family() => a
            .entries()
            .iter()
            .zip(b.entries())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max),
        _ => f64::INFINITY,
    }
}

fn prop1_i<R: Rng>(ctx: &Ctx, rng: &mut R) -> Trial {
    let (n, d, table): (usize, usize, Vec<Vec<f64>>) = if ctx.t == 0 && ctx.structure.is_none() {
        // XOR as a two-class game
        let l = |x: f64| vec![x, -x];
        (2, 2, vec![l(-15.0), l(15.0), l(15.0), l(-15.0)])
    } else {
        let n = ctx.n(rng, 1);
        let d = rng.random_range(2..=MAX_D);
        let t = (0..1usize << n)
            .map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        (n, d, t)
    };
    let family = Family::Categorical { d };
    let probs: Vec<Vec<f64>> = table.iter().map(|t| naive_softmax(t)).collect();
    let game = tabulated(n, family, table.into_iter().map(|logits| PayoffParams::Categorical { logits }).collect())?;
    let p = ctx.structure(n, rng, DefaultStructure::RandomOrder)?;
    let mut worst = (0.0f64, Value::Null);
    for i in 0..n {
        let e = expectation(&exact_value(&game, &p, i)?);
        for c in 0..d {
            let phi = oracle_standard_value(|s: &Coalition| probs[s.mask() as usize][c], &p, i)?;
            let dev = (e[c] - phi).abs();
            if dev >= worst.0 {
                let mut w = describe(n, family);
                w["player"] = json!(i);
                w["class"] = json!(c);
                worst = (dev, w);
            }
        }
    }
    Ok(Some(worst))
}

fn is_point_mass_at_zero(v: &DistValue) -> f64 {
    match v {
        DistValue::Bernoulli(b) => {
            if b.q_plus != 0.0 || b.q_minus != 0.0 {
                return f64::INFINITY;
            }
            (b.q_zero - 1.0).abs()
        }
        DistValue::Gaussian(g) => {
            if g.components.len() != 1 || g.components[0].mean != 0.0 || g.components[0].sd != 0.0 {
                return f64::INFINITY;
            }
            (g.components[0].weight - 1.0).abs().max((g.sign_pmf[1] - 1.0).abs())
        }
        DistValue::Categorical(c) => {
            let d = c.d();
            for r in 0..d {
                for s in 0..d {
                    if r != s && c.get(r, s) != 0.0 {
                        return f64::INFINITY;
                    }
                }
            }
            (c.p_zero() - 1.0).abs()
        }
    }
}

fn prop1_ii<R: Rng>(ctx: &Ctx, rng: &mut R) -> Trial {
    let n = ctx.n(rng, 1);
    let family = random_family(ctx.t, rng);
    let null = rng.random_range(0..n);
    let base: Vec<PayoffParams> = (0..1usize << n).map(|_| random_params(family, rng)).collect();
    let table = (0..1usize << n).map(|m| base[m & !(1 << null)].clone()).collect();
    let game = tabulated(n, family, table)?;
    let p = ctx.structure(n, rng, DefaultStructure::RandomOrder)?;
    let dev = is_point_mass_at_zero(&exact_value(&game, &p, null)?);
    let mut w = describe(n, family);
    w["player"] = json!(null);
    Ok(Some((dev, w)))
}

fn prop1_iii<R: Rng>(ctx: &Ctx, rng: &mut R) -> Trial {
    let n = ctx.n(rng, 1);
    let family = random_family(ctx.t, rng);
    let first = random_game(n, family, rng)?;
    let second = random_game(n, family, rng)?;
    let pi: f64 = rng.random();
    let mixed = StochasticGame::mixture(pi, first.clone(), second.clone())?;
    let p = ctx.structure(n, rng, DefaultStructure::RandomOrder)?;
    let mut worst = (0.0f64, Value::Null);
    for i in 0..n {
        let mut expect = exact_value(&first, &p, i)?;
        expect.scale(pi);
        expect.add_scaled(&exact_value(&second, &p, i)?, 1.0 - pi)?;
        expect.merge_components();
        let dev = value_distance(&exact_value(&mixed, &p, i)?, &expect);
        if dev >= worst.0 {
            let mut w = describe(n, family);
            w["player"] = json!(i);
            w["pi"] = json!(pi);
            worst = (dev, w);
        }
    }
    Ok(Some(worst))
}

fn prop1_iv<R: Rng>(ctx: &Ctx, rng: &mut R) -> Trial {
    let n = ctx.n(rng, 2);
    let family = random_family(ctx.t, rng);
    let p = ctx.structure(n, rng, DefaultStructure::RandomOrder)?;
    if !p.is_efficient()?.efficient {
        return Ok(None);
    }
    let game = random_game(n, family, rng)?;
    let grand = game.expected_payoff(&Coalition::grand(n)?)?;
    let empty = game.expected_payoff(&Coalition::empty(n)?)?;
    let mut total = vec![0.0; grand.len()];
    for i in 0..n {
        for (t, e) in total.iter_mut().zip(expectation(&exact_value(&game, &p, i)?)) {
            *t += e;
        }
    }
    let dev = total
        .iter()
        .zip(grand.iter().zip(&empty))
        .map(|(t, (g, e))| (t - (g - e)).abs())
        .fold(0.0, f64::max);
    let mut w = describe(n, family);
    w["structure"] = json!(p.kind().name());
    Ok(Some((dev, w)))
}

fn prop1_v<R: Rng>(ctx: &Ctx, rng: &mut R) -> Trial {
    let (n, family, game) = if ctx.t == 0 && ctx.structure.is_none() {
        (2, Family::Bernoulli, crate::builders::xor_game())
    } else {
        let n = ctx.n(rng, 2);
        if n < 2 {
            return Ok(None);
        }
        let family = random_family(ctx.t, rng);
        // players 0 and 1 are interchangeable: the payoff depends on
        // |S ∩ {0, 1}| and on the rest of S
        let mut by_key: BTreeMap<(u32, u64), PayoffParams> = BTreeMap::new();
        let mut table = Vec::with_capacity(1 << n);
        for m in 0..1u64 << n {
            let key = ((m & 3).count_ones(), m >> 2);
            let params = by_key.entry(key).or_insert_with(|| random_params(family, rng)).clone();
            table.push(params);
        }
        (n, family, tabulated(n, family, table)?)
    };
    let p = ctx.structure(n, rng, DefaultStructure::SizeWeighted)?;
    if !p.is_symmetric()? {
        return Ok(None);
    }
    let a = exact_value(&game, &p, 0)?;
    let b = exact_value(&game, &p, 1)?;
    let mut dev = value_distance(&a, &b);
    if let (Some(x), Some(y)) = (a.as_gaussian(), b.as_gaussian()) {
        if x.components.len() != y.components.len() {
            dev = f64::INFINITY;
        }
    }
    Ok(Some((dev, describe(n, family))))
}

fn marginal_consistency<R: Rng>(rng: &mut R) -> Trial {
    let d = rng.random_range(2..=12);
    let scale = [0.5, 3.0, 20.0][rng.random_range(0..3)];
    let alpha: Vec<f64> = (0..d).map(|_| rng.random_range(-scale..scale)).collect();
    let beta: Vec<f64> = (0..d).map(|_| rng.random_range(-scale..scale)).collect();
    let w = json!({"alpha": alpha, "beta": beta});
    let q = match categorical_mc(&alpha, &beta) {
        Ok(q) => q,
        Err(e) => return Ok(Some((f64::INFINITY, json!({"alpha": alpha, "beta": beta, "error": e.to_string()})))),
    };
    let (pa, pb) = (naive_softmax(&alpha), naive_softmax(&beta));
    let mut dev = 0.0f64;
    for k in 0..d {
        let row: f64 = (0..d).map(|s| q.get(k, s)).sum();
        let col: f64 = (0..d).map(|r| q.get(r, k)).sum();
        dev = dev.max((row - pa[k]).abs()).max((col - pb[k]).abs());
    }
    if q.as_slice().iter().any(|&x| x < 0.0) {
        dev = f64::INFINITY;
    }
    Ok(Some((dev, w)))
}

fn oracle_tv<R: Rng>(t: usize, seed: u64, rng: &mut R) -> Trial {
    let d = [2, 3, 5][t % 3];
    let alpha: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let beta: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let q = categorical_mc(&alpha, &beta)?;
    let emp = oracle_categorical_joint(&alpha, &beta, ORACLE_TV_SAMPLES, seed.wrapping_add(t as u64))?;
    Ok(Some((total_variation(q.as_slice(), &emp), json!({"alpha": alpha, "beta": beta}))))
}

fn efficiency_structure<R: Rng>(t: usize, rng: &mut R) -> Trial {
    let n = rng.random_range(2..=MAX_N);
    let (p, should_be_efficient) = match t % 3 {
        0 => (CoalitionStructure::shapley(n)?, true),
        1 => (random_order(n, rng)?, true),
        _ => (CoalitionStructure::leave_one_out(n)?, false),
    };
    let report = p.is_efficient()?;
    let w = json!({"n": n, "structure": p.kind().name()});
    if report.efficient != should_be_efficient {
        return Ok(Some((f64::INFINITY, w)));
    }
    let dev = if should_be_efficient {
        report.max_deviation
    } else {
        (report.grand_sum - n as f64).abs()
    };
    Ok(Some((dev, w)))
}

fn symmetry_structure<R: Rng>(t: usize, rng: &mut R) -> Trial {
    let n = rng.random_range(2..=MAX_N);
    let (p, should_be_symmetric) = match t % 4 {
        0 => (CoalitionStructure::shapley(n)?, true),
        1 => {
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
            (CoalitionStructure::size_weighted(n, &w)?, true)
        }
        2 => (CoalitionStructure::leave_one_out(n)?, true),
        _ => {
            // player 0 only sees the empty set, everybody else the full rest
            let mut tables = BTreeMap::new();
            for i in 0..n {
                let key = if i == 0 {
                    String::new()
                } else {
                    Coalition::grand(n)?.remove(i).key()
                };
                tables.insert(i, BTreeMap::from([(key, 1.0)]));
            }
            (CoalitionStructure::custom(n, &tables)?, false)
        }
    };
    let w = json!({"n": n, "structure": p.kind().name()});
    if p.is_symmetric()? != should_be_symmetric {
        return Ok(Some((f64::INFINITY, w)));
    }
    let dev = if should_be_symmetric { p.symmetry_deviation()? } else { 0.0 };
    Ok(Some((dev, w)))
}
