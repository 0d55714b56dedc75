//! Games and structures from declarative JSON specifications.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::bridge::BridgeOracle;
use crate::coalition::{check_enumerable, Coalition};
use crate::error::{Error, Result};
use crate::game::{Family, PayoffParams, StochasticGame};
use crate::structure::CoalitionStructure;

/// Payoff family tag as written in specs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyTag {
    Bernoulli,
    Gaussian,
    Categorical,
}

impl FamilyTag {
    pub fn with_dim(self, d: Option<usize>) -> Result<Family> {
        match (self, d) {
            (FamilyTag::Bernoulli, _) => Ok(Family::Bernoulli),
            (FamilyTag::Gaussian, _) => Ok(Family::Gaussian),
            (FamilyTag::Categorical, Some(d)) if d >= 2 => Ok(Family::Categorical { d }),
            (FamilyTag::Categorical, d) => Err(Error::SpecValidation(format!(
                "categorical family needs d >= 2, got {d:?}"
            ))),
        }
    }

    pub fn of(family: Family) -> Self {
        match family {
            Family::Bernoulli => FamilyTag::Bernoulli,
            Family::Gaussian => FamilyTag::Gaussian,
            Family::Categorical { .. } => FamilyTag::Categorical,
        }
    }
}

/// A game description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GameSpec {
    /// The two-player stochastic XOR game.
    Xor {},
    /// One payoff law per coalition key; exactly `2^n` entries.
    Table {
        n: usize,
        family: FamilyTag,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d: Option<usize>,
        payoffs: BTreeMap<String, PayoffParams>,
    },
    /// `v(S) = Categorical(z_Sᵀ W + b)` where `z_S` keeps the features of the
    /// players in `S` and takes `baseline` elsewhere.
    LinearSoftmax {
        weights: Vec<Vec<f64>>,
        bias: Vec<f64>,
        x: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        baseline: Option<Vec<f64>>,
        /// Feature indices owned by each player; defaults to one player per
        /// feature.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        groups: Option<Vec<Vec<usize>>>,
    },
    Mixture {
        pi: f64,
        first: Box<GameSpec>,
        second: Box<GameSpec>,
    },
    /// An external process speaking the stdio bridge protocol.
    Bridge {
        command: Vec<String>,
        n: usize,
        family: FamilyTag,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        timeout_ms: Option<u64>,
    },
}

/// One weighted ordering of a random-order structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedOrder {
    pub order: Vec<usize>,
    pub prob: f64,
}

/// A coalition-structure description. The player count comes from the game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StructureSpec {
    Shapley {},
    #[serde(alias = "leave_one_out")]
    Loo {},
    /// Per-size weights `p̄(k)`, `k = 0..n-1`, normalized on construction.
    Weights { weights: Vec<f64> },
    /// A PMF over orderings of the players.
    Perm { perms: Vec<WeightedOrder> },
    /// Per-player tables keyed by coalition key.
    Custom {
        tables: BTreeMap<usize, BTreeMap<String, f64>>,
    },
}

impl StructureSpec {
    pub fn build(&self, n: usize) -> Result<CoalitionStructure> {
        let built = match self {
            StructureSpec::Shapley {} => CoalitionStructure::shapley(n),
            StructureSpec::Loo {} => CoalitionStructure::leave_one_out(n),
            StructureSpec::Weights { weights } => CoalitionStructure::size_weighted(n, weights),
            StructureSpec::Perm { perms } => {
                let pmf: Vec<(Vec<usize>, f64)> = perms.iter().map(|p| (p.order.clone(), p.prob)).collect();
                CoalitionStructure::random_order(n, &pmf)
            }
            StructureSpec::Custom { tables } => CoalitionStructure::custom(n, tables),
        };
        built.map_err(as_spec_error)
    }

    pub fn name(&self) -> &'static str {
        match self {
            StructureSpec::Shapley {} => "shapley",
            StructureSpec::Loo {} => "leave_one_out",
            StructureSpec::Weights { .. } => "size_weighted",
            StructureSpec::Perm { .. } => "random_order",
            StructureSpec::Custom { .. } => "custom",
        }
    }
}

/// Top-level spec file: `{"game": {...}, "structure": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub game: GameSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureSpec>,
}

impl SpecFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::SpecValidation(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::SpecValidation(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

fn as_spec_error(e: Error) -> Error {
    match e {
        Error::SpecValidation(_) => e,
        other => Error::SpecValidation(other.to_string()),
    }
}

/// Player count and family of a spec, without starting any process.
pub fn spec_shape(spec: &GameSpec) -> Result<(usize, Family)> {
    match spec {
        GameSpec::Xor {} => Ok((2, Family::Bernoulli)),
        GameSpec::Table { n, family, d, payoffs } => {
            let d = d.or_else(|| match payoffs.values().next() {
                Some(PayoffParams::Categorical { logits }) => Some(logits.len()),
                _ => None,
            });
            Ok((*n, family.with_dim(d)?))
        }
        GameSpec::LinearSoftmax { bias, x, groups, .. } => {
            let n = groups.as_ref().map_or(x.len(), |g| g.len());
            Ok((n, FamilyTag::Categorical.with_dim(Some(bias.len()))?))
        }
        GameSpec::Mixture { first, .. } => spec_shape(first),
        GameSpec::Bridge { n, family, d, .. } => Ok((*n, family.with_dim(*d)?)),
    }
}

/// The stochastic XOR game on two players.
pub fn xor_game() -> StochasticGame {
    StochasticGame::from_fn(2, Family::Bernoulli, |c| {
        Ok(PayoffParams::Bernoulli {
            pi: if c.len() == 1 { 1.0 } else { 0.0 },
        })
    })
    .expect("valid xor game")
}

/// Validated linear-softmax model with group-wise masking.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSoftmax {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    x: Vec<f64>,
    baseline: Vec<f64>,
    groups: Vec<Vec<usize>>,
}

impl LinearSoftmax {
    pub fn new(
        weights: Vec<Vec<f64>>,
        bias: Vec<f64>,
        x: Vec<f64>,
        baseline: Option<Vec<f64>>,
        groups: Option<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        let m = x.len();
        let d = bias.len();
        let bad = |msg: String| Err(Error::SpecValidation(msg));
        if m == 0 {
            return bad("linear_softmax needs at least one feature".into());
        }
        if d < 2 {
            return bad(format!("linear_softmax needs at least 2 classes, got {d}"));
        }
        if weights.len() != m {
            return bad(format!("weights have {} rows but x has {m} entries", weights.len()));
        }
        if let Some(row) = weights.iter().position(|r| r.len() != d) {
            return bad(format!("weights row {row} has {} columns, expected {d}", weights[row].len()));
        }
        let baseline = baseline.unwrap_or_else(|| vec![0.0; m]);
        if baseline.len() != m {
            return bad(format!("baseline has {} entries, expected {m}", baseline.len()));
        }
        let all_finite = weights.iter().flatten().chain(&bias).chain(&x).chain(&baseline).all(|v| v.is_finite());
        if !all_finite {
            return bad("non-finite number in linear_softmax spec".into());
        }
        let groups = groups.unwrap_or_else(|| (0..m).map(|f| vec![f]).collect());
        if groups.is_empty() || groups.len() > crate::coalition::MAX_PLAYERS {
            return bad(format!("{} groups", groups.len()));
        }
        let mut owner = vec![false; m];
        for g in &groups {
            for &f in g {
                if f >= m || owner[f] {
                    return bad(format!("groups must partition the features 0..{m}"));
                }
                owner[f] = true;
            }
        }
        if owner.iter().any(|o| !o) {
            return bad(format!("groups must partition the features 0..{m}"));
        }
        Ok(Self {
            weights,
            bias,
            x,
            baseline,
            groups,
        })
    }

    pub fn n_players(&self) -> usize {
        self.groups.len()
    }

    pub fn n_classes(&self) -> usize {
        self.bias.len()
    }

    /// Feature vector with players outside `coalition` replaced by baseline.
    pub fn masked_input(&self, coalition: &Coalition) -> Vec<f64> {
        let mut z = self.baseline.clone();
        for i in coalition.iter() {
            for &f in &self.groups[i] {
                z[f] = self.x[f];
            }
        }
        z
    }

    pub fn logits_for_input(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        for (zf, row) in z.iter().zip(&self.weights) {
            for (o, w) in out.iter_mut().zip(row) {
                *o += zf * w;
            }
        }
        out
    }

    pub fn logits(&self, coalition: &Coalition) -> Vec<f64> {
        self.logits_for_input(&self.masked_input(coalition))
    }

    pub fn to_spec(&self) -> GameSpec {
        GameSpec::LinearSoftmax {
            weights: self.weights.clone(),
            bias: self.bias.clone(),
            x: self.x.clone(),
            baseline: Some(self.baseline.clone()),
            groups: Some(self.groups.clone()),
        }
    }

    pub fn into_game(self) -> Result<StochasticGame> {
        let n = self.n_players();
        let d = self.n_classes();
        StochasticGame::from_fn(n, Family::Categorical { d }, move |c| {
            Ok(PayoffParams::Categorical { logits: self.logits(c) })
        })
    }
}

fn table_game(n: usize, family: FamilyTag, d: Option<usize>, payoffs: &BTreeMap<String, PayoffParams>) -> Result<StochasticGame> {
    check_enumerable(n).map_err(as_spec_error)?;
    let (_, family) = spec_shape(&GameSpec::Table {
        n,
        family,
        d,
        payoffs: payoffs.clone(),
    })?;
    let size = 1usize << n;
    let mut table: Vec<Option<PayoffParams>> = vec![None; size];
    for (key, params) in payoffs {
        let c = Coalition::from_key(n, key).map_err(as_spec_error)?;
        if c.key() != *key {
            return Err(Error::SpecValidation(format!("non-canonical coalition key {key:?}")));
        }
        params.validate().map_err(as_spec_error)?;
        if params.family() != family {
            return Err(Error::SpecValidation(format!(
                "payoff for {key:?} is {}, table family is {family}",
                params.family()
            )));
        }
        table[c.mask() as usize] = Some(params.clone());
    }
    if let Some(missing) = table.iter().position(Option::is_none) {
        let key = Coalition::from_mask(n, missing as u64)?.key();
        return Err(Error::SpecValidation(format!("payoff table is missing key {key:?}")));
    }
    let table: Vec<PayoffParams> = table.into_iter().map(Option::unwrap).collect();
    StochasticGame::from_fn(n, family, move |c| Ok(table[c.mask() as usize].clone()))
}

/// Builds the game described by `spec`. Bridge commands are resolved
/// relative to the current directory.
pub fn build_game(spec: &GameSpec) -> Result<StochasticGame> {
    match spec {
        GameSpec::Xor {} => Ok(xor_game()),
        GameSpec::Table { n, family, d, payoffs } => table_game(*n, *family, *d, payoffs),
        GameSpec::LinearSoftmax {
            weights,
            bias,
            x,
            baseline,
            groups,
        } => LinearSoftmax::new(weights.clone(), bias.clone(), x.clone(), baseline.clone(), groups.clone())?.into_game(),
        GameSpec::Mixture { pi, first, second } => {
            if !(0.0..=1.0).contains(pi) {
                return Err(Error::SpecValidation(format!("mixture weight {pi} outside [0, 1]")));
            }
            let (a, b) = (build_game(first)?, build_game(second)?);
            StochasticGame::mixture(*pi, a, b).map_err(as_spec_error)
        }
        GameSpec::Bridge {
            command,
            n,
            family,
            d,
            timeout_ms,
        } => {
            let family = family.with_dim(*d)?;
            let timeout = timeout_ms.map_or(crate::bridge::DEFAULT_TIMEOUT, Duration::from_millis);
            build_bridge_game(command, *n, family, timeout)
        }
    }
}

/// Starts `command` and wraps it as a game.
pub fn build_bridge_game(command: &[String], n: usize, family: Family, timeout: Duration) -> Result<StochasticGame> {
    StochasticGame::from_oracle(BridgeOracle::spawn(command, n, family, timeout)?)
}

/// Tabulates every coalition's payoff into a table spec.
pub fn export_table(game: &StochasticGame) -> Result<GameSpec> {
    let n = game.n_players();
    check_enumerable(n)?;
    let family = game.family();
    let mut payoffs = BTreeMap::new();
    for mask in 0..(1u64 << n) {
        let c = Coalition::from_mask(n, mask)?;
        payoffs.insert(c.key(), game.query_payoff(&c)?);
    }
    Ok(GameSpec::Table {
        n,
        family: FamilyTag::of(family),
        d: match family {
            Family::Categorical { d } => Some(d),
            _ => None,
        },
        payoffs,
    })
}
