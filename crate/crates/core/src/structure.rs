//! Coalition structures: the per-player distributions `p^i` over subsets of
//! the other players that parameterize every value operator.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::coalition::{check_enumerable, full_mask, Coalition};
use crate::error::{Error, Result};
use crate::numeric::{binomial, ln_binomial};

/// Normalization tolerance for tabular structures.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Tolerance of the efficiency and symmetry predicates.
pub const STRUCTURE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StructureKind {
    Shapley,
    LeaveOneOut,
    SizeWeighted,
    RandomOrder,
    Custom,
}

impl StructureKind {
    pub fn name(&self) -> &'static str {
        match self {
            StructureKind::Shapley => "shapley",
            StructureKind::LeaveOneOut => "leave_one_out",
            StructureKind::SizeWeighted => "size_weighted",
            StructureKind::RandomOrder => "random_order",
            StructureKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Shapley,
    LeaveOneOut,
    /// `pbar[k]` is the probability of one particular coalition of size `k`.
    SizeWeighted {
        pbar: Vec<f64>,
        /// Cumulative size distribution `C(n-1,k)·pbar[k]`, for sampling.
        size_cdf: Vec<f64>,
    },
    RandomOrder {
        perms: Vec<(Vec<usize>, f64)>,
        perm_cdf: Vec<f64>,
        tables: Vec<Table>,
    },
    Custom {
        tables: Vec<Table>,
    },
}

/// One player's explicit PMF, keyed by coalition mask.
#[derive(Debug, Clone, Default)]
struct Table {
    probs: HashMap<u64, f64>,
    /// Sorted support with cumulative mass, for sampling.
    support: Vec<(u64, f64)>,
}

impl Table {
    fn from_map(probs: HashMap<u64, f64>) -> Self {
        let mut entries: Vec<(u64, f64)> = probs.iter().map(|(&m, &p)| (m, p)).collect();
        entries.sort_unstable_by_key(|e| e.0);
        let mut acc = 0.0;
        let support = entries
            .into_iter()
            .filter(|e| e.1 > 0.0)
            .map(|(m, p)| {
                acc += p;
                (m, acc)
            })
            .collect();
        Self { probs, support }
    }

    fn get(&self, mask: u64) -> f64 {
        self.probs.get(&mask).copied().unwrap_or(0.0)
    }

    fn total(&self) -> f64 {
        let mut v: Vec<f64> = self.probs.values().copied().collect();
        v.sort_by(f64::total_cmp);
        v.into_iter().sum()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let total = self.support.last().map_or(0.0, |e| e.1);
        let u = rng.random::<f64>() * total;
        let idx = self.support.partition_point(|e| e.1 <= u);
        self.support[idx.min(self.support.len() - 1)].0
    }
}

/// The family `p = {p^i}` of coalition distributions.
#[derive(Debug, Clone)]
pub struct CoalitionStructure {
    n: usize,
    kind: StructureKind,
    repr: Repr,
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 || n > crate::coalition::MAX_PLAYERS {
        return Err(Error::InvalidArgument(format!("player count {n}")));
    }
    Ok(())
}

impl CoalitionStructure {
    /// `p^i(S) = 1 / (n · C(n-1, |S|))`.
    pub fn shapley(n: usize) -> Result<Self> {
        check_n(n)?;
        Ok(Self {
            n,
            kind: StructureKind::Shapley,
            repr: Repr::Shapley,
        })
    }

    /// `p^i = δ_{[n] \ i}`.
    pub fn leave_one_out(n: usize) -> Result<Self> {
        check_n(n)?;
        Ok(Self {
            n,
            kind: StructureKind::LeaveOneOut,
            repr: Repr::LeaveOneOut,
        })
    }

    /// Semivalue-style structure: `p^i(S) ∝ weights[|S|]`, normalized so each
    /// player's PMF sums to one.
    pub fn size_weighted(n: usize, weights: &[f64]) -> Result<Self> {
        check_n(n)?;
        if weights.len() != n {
            return Err(Error::InvalidWeights(format!(
                "expected {n} weights (sizes 0..{}), got {}",
                n - 1,
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidWeights(format!("weight {w} is negative")));
        }
        let size_mass: Vec<f64> = weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * binomial(n - 1, k))
            .collect();
        let total: f64 = size_mass.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidWeights("all weights are zero".into()));
        }
        let pbar = weights.iter().map(|w| w / total).collect();
        let mut acc = 0.0;
        let size_cdf = size_mass
            .iter()
            .map(|m| {
                acc += m / total;
                acc
            })
            .collect();
        Ok(Self {
            n,
            kind: StructureKind::SizeWeighted,
            repr: Repr::SizeWeighted { pbar, size_cdf },
        })
    }

    /// Random-order structure from a PMF over permutations. Player `i`'s
    /// coalition is the set of players strictly before it in the order.
    pub fn random_order(n: usize, perm_pmf: &[(Vec<usize>, f64)]) -> Result<Self> {
        check_n(n)?;
        let mut tables: Vec<HashMap<u64, f64>> = vec![HashMap::new(); n];
        let mut total = 0.0;
        for (perm, w) in perm_pmf {
            if perm.len() != n {
                return Err(Error::BadPermutation(format!(
                    "{perm:?} has length {}, expected {n}",
                    perm.len()
                )));
            }
            let mut seen = 0u64;
            for &p in perm {
                if p >= n || seen & (1 << p) != 0 {
                    return Err(Error::BadPermutation(format!("{perm:?} is not a permutation")));
                }
                seen |= 1 << p;
            }
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::OutOfRange(*w));
            }
            total += w;
            let mut before = 0u64;
            for &p in perm {
                *tables[p].entry(before).or_insert(0.0) += w;
                before |= 1 << p;
            }
        }
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized {
                player: 0,
                sum: total,
            });
        }
        let mut acc = 0.0;
        let perm_cdf = perm_pmf
            .iter()
            .map(|(_, w)| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self {
            n,
            kind: StructureKind::RandomOrder,
            repr: Repr::RandomOrder {
                perms: perm_pmf.to_vec(),
                perm_cdf,
                tables: tables.into_iter().map(Table::from_map).collect(),
            },
        })
    }

    /// Uniform distribution over all `n!` orders.
    pub fn uniform_random_order(n: usize) -> Result<Self> {
        if n > 10 {
            return Err(Error::InvalidArgument(format!(
                "refusing to tabulate {n}! permutations"
            )));
        }
        let perms = all_permutations(n);
        let w = 1.0 / perms.len() as f64;
        let pmf: Vec<_> = perms.into_iter().map(|p| (p, w)).collect();
        Self::random_order(n, &pmf)
    }

    /// Explicit per-player tables keyed by coalition key. Players absent from
    /// `tables` have no mass and fail normalization.
    pub fn custom(n: usize, tables: &BTreeMap<usize, BTreeMap<String, f64>>) -> Result<Self> {
        check_n(n)?;
        if let Some(&p) = tables.keys().find(|&&p| p >= n) {
            return Err(Error::IndexOutOfRange {
                index: p,
                n_players: n,
            });
        }
        let mut out = Vec::with_capacity(n);
        for player in 0..n {
            let mut probs = HashMap::new();
            if let Some(t) = tables.get(&player) {
                for (key, &p) in t {
                    let c = Coalition::from_key(n, key)?;
                    if c.contains(player) {
                        return Err(Error::SelfMembership {
                            player,
                            key: key.clone(),
                        });
                    }
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::OutOfRange(p));
                    }
                    *probs.entry(c.mask()).or_insert(0.0) += p;
                }
            }
            let table = Table::from_map(probs);
            let sum = table.total();
            if (sum - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::NotNormalized { player, sum });
            }
            out.push(table);
        }
        Ok(Self {
            n,
            kind: StructureKind::Custom,
            repr: Repr::Custom { tables: out },
        })
    }

    pub fn n_players(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> StructureKind {
        self.kind
    }

    /// `p^i(S)`; zero whenever `i ∈ S`.
    pub fn pmf(&self, i: usize, s: &Coalition) -> f64 {
        if i >= self.n || s.contains(i) || s.n_players() != self.n {
            return 0.0;
        }
        match &self.repr {
            Repr::Shapley => shapley_pmf(self.n, s.len()),
            Repr::LeaveOneOut => {
                if s.mask() == full_mask(self.n) & !(1 << i) {
                    1.0
                } else {
                    0.0
                }
            }
            Repr::SizeWeighted { pbar, .. } => pbar[s.len()],
            Repr::RandomOrder { tables, .. } | Repr::Custom { tables } => tables[i].get(s.mask()),
        }
    }

    /// Size weights `p̄(k)` for the closed-form symmetric kinds.
    pub fn size_weights(&self) -> Option<Vec<f64>> {
        match &self.repr {
            Repr::Shapley => Some((0..self.n).map(|k| shapley_pmf(self.n, k)).collect()),
            Repr::SizeWeighted { pbar, .. } => Some(pbar.clone()),
            _ => None,
        }
    }

    /// Whether draws come from a shared permutation, so that one draw yields
    /// a coalition for every player.
    pub fn is_permutation_based(&self) -> bool {
        matches!(self.repr, Repr::Shapley | Repr::RandomOrder { .. })
    }

    /// Draws an order of the players for permutation-based kinds.
    pub fn sample_permutation<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Vec<usize>> {
        match &self.repr {
            Repr::Shapley => {
                let mut p: Vec<usize> = (0..self.n).collect();
                p.shuffle(rng);
                Some(p)
            }
            Repr::RandomOrder {
                perms, perm_cdf, ..
            } => {
                let u = rng.random::<f64>() * perm_cdf.last().copied().unwrap_or(1.0);
                let idx = perm_cdf.partition_point(|&c| c <= u).min(perms.len() - 1);
                Some(perms[idx].0.clone())
            }
            _ => None,
        }
    }

    /// Draws `S ~ p^i`. Shapley draws a uniform order and returns the
    /// predecessors of `i`.
    pub fn sample_coalition<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> Result<Coalition> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange {
                index: i,
                n_players: self.n,
            });
        }
        let mask = match &self.repr {
            Repr::Shapley | Repr::RandomOrder { .. } => {
                let perm = self.sample_permutation(rng).expect("permutation-based kind");
                predecessors(&perm, i)
            }
            Repr::LeaveOneOut => full_mask(self.n) & !(1 << i),
            Repr::SizeWeighted { size_cdf, .. } => {
                let u = rng.random::<f64>() * size_cdf.last().copied().unwrap_or(1.0);
                let k = size_cdf.partition_point(|&c| c <= u).min(self.n - 1);
                let mut others: Vec<usize> = (0..self.n).filter(|&j| j != i).collect();
                let (chosen, _) = others.partial_shuffle(rng, k);
                chosen.iter().fold(0u64, |m, &j| m | (1 << j))
            }
            Repr::Custom { tables } => tables[i].sample(rng),
        };
        Coalition::from_mask(self.n, mask)
    }

    /// Explicit PMF of player `i` as (coalition, probability) pairs with
    /// nonzero mass, ascending by mask.
    pub fn support(&self, i: usize) -> Result<Vec<(Coalition, f64)>> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange {
                index: i,
                n_players: self.n,
            });
        }
        match &self.repr {
            Repr::LeaveOneOut => Ok(vec![(
                Coalition::from_mask(self.n, full_mask(self.n) & !(1 << i))?,
                1.0,
            )]),
            Repr::RandomOrder { tables, .. } | Repr::Custom { tables } => {
                let mut v: Vec<(u64, f64)> = tables[i]
                    .probs
                    .iter()
                    .filter(|e| *e.1 > 0.0)
                    .map(|(&m, &p)| (m, p))
                    .collect();
                v.sort_unstable_by_key(|e| e.0);
                v.into_iter()
                    .map(|(m, p)| Ok((Coalition::from_mask(self.n, m)?, p)))
                    .collect()
            }
            Repr::Shapley | Repr::SizeWeighted { .. } => {
                let subsets = crate::coalition::enumerate_subsets(self.n, i)?;
                Ok(subsets
                    .map(|s| (s, self.pmf(i, &s)))
                    .filter(|e| e.1 > 0.0)
                    .collect())
            }
        }
    }

    /// Checks both efficiency conditions over the full lattice.
    pub fn is_efficient(&self) -> Result<EfficiencyReport> {
        check_enumerable(self.n)?;
        let n = self.n;
        let full = full_mask(n);
        let grand_sum: f64 = (0..n)
            .map(|i| self.pmf(i, &Coalition::from_mask(n, full & !(1 << i)).unwrap()))
            .sum();
        let mut violations = Vec::new();
        let mut max_deviation = (grand_sum - 1.0).abs();
        for mask in 1..full {
            let s = Coalition::from_mask(n, mask)?;
            let mut inflow = 0.0;
            let mut outflow = 0.0;
            for j in 0..n {
                if s.contains(j) {
                    inflow += self.pmf(j, &s.remove(j));
                } else {
                    outflow += self.pmf(j, &s);
                }
            }
            let dev = (inflow - outflow).abs();
            max_deviation = max_deviation.max(dev);
            if dev > STRUCTURE_TOL {
                violations.push(EfficiencyViolation {
                    coalition: s,
                    inflow,
                    outflow,
                });
            }
        }
        Ok(EfficiencyReport {
            efficient: (grand_sum - 1.0).abs() <= STRUCTURE_TOL && violations.is_empty(),
            grand_sum,
            max_deviation,
            violations,
        })
    }

    /// Whether `p^i(S)` depends only on `|S|`.
    pub fn is_symmetric(&self) -> Result<bool> {
        Ok(self.symmetry_deviation()? <= STRUCTURE_TOL)
    }

    /// Largest gap between `p^i(S)` and the first value seen for `|S|`.
    pub fn symmetry_deviation(&self) -> Result<f64> {
        check_enumerable(self.n)?;
        let mut reference: Vec<Option<f64>> = vec![None; self.n];
        let mut dev: f64 = 0.0;
        for i in 0..self.n {
            for s in crate::coalition::enumerate_subsets(self.n, i)? {
                let p = self.pmf(i, &s);
                match reference[s.len()] {
                    None => reference[s.len()] = Some(p),
                    Some(r) => dev = dev.max((p - r).abs()),
                }
            }
        }
        Ok(dev)
    }
}

/// Result of [`CoalitionStructure::is_efficient`].
#[derive(Debug, Clone)]
pub struct EfficiencyReport {
    pub efficient: bool,
    /// `Σ_i p^i([n] \ i)`.
    pub grand_sum: f64,
    pub max_deviation: f64,
    pub violations: Vec<EfficiencyViolation>,
}

/// A coalition where `Σ_{i∈S} p^i(S\i) ≠ Σ_{j∉S} p^j(S)`.
#[derive(Debug, Clone)]
pub struct EfficiencyViolation {
    pub coalition: Coalition,
    pub inflow: f64,
    pub outflow: f64,
}

fn shapley_pmf(n: usize, size: usize) -> f64 {
    if n <= 30 {
        1.0 / (n as f64 * binomial(n - 1, size))
    } else {
        (-(n as f64).ln() - ln_binomial(n - 1, size)).exp()
    }
}

fn predecessors(perm: &[usize], i: usize) -> u64 {
    let mut m = 0u64;
    for &p in perm {
        if p == i {
            break;
        }
        m |= 1 << p;
    }
    m
}

/// All permutations of `0..n` in lexicographic order.
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(k) = (0..n.saturating_sub(1)).rev().find(|&k| cur[k] < cur[k + 1]) else {
            break;
        };
        let l = (k + 1..n).rev().find(|&l| cur[k] < cur[l]).unwrap();
        cur.swap(k, l);
        cur[k + 1..].reverse();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(n: usize, m: &[usize]) -> Coalition {
        Coalition::from_members(n, m.iter().copied()).unwrap()
    }

    fn mass(p: &CoalitionStructure, i: usize) -> f64 {
        crate::coalition::enumerate_subsets(p.n_players(), i)
            .unwrap()
            .map(|s| p.pmf(i, &s))
            .sum()
    }

    #[test]
    fn shapley_examples() {
        let p = CoalitionStructure::shapley(3).unwrap();
        assert!((p.pmf(0, &c(3, &[])) - 1.0 / 3.0).abs() < 1e-15);
        assert!((p.pmf(0, &c(3, &[1])) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(p.pmf(0, &c(3, &[0, 1])), 0.0);
        assert!((mass(&p, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn leave_one_out_examples() {
        let p = CoalitionStructure::leave_one_out(3).unwrap();
        assert_eq!(p.pmf(0, &c(3, &[1, 2])), 1.0);
        assert_eq!(p.pmf(0, &c(3, &[])), 0.0);
        let p1 = CoalitionStructure::leave_one_out(1).unwrap();
        assert_eq!(p1.pmf(0, &c(1, &[])), 1.0);
    }

    #[test]
    fn size_weighted_examples() {
        let shap = CoalitionStructure::shapley(3).unwrap();
        // any multiple of the Shapley size weights
        let w: Vec<f64> = (0..3).map(|k| 7.0 / binomial(2, k)).collect();
        let sw = CoalitionStructure::size_weighted(3, &w).unwrap();
        for i in 0..3 {
            for s in crate::coalition::enumerate_subsets(3, i).unwrap() {
                assert!((sw.pmf(i, &s) - shap.pmf(i, &s)).abs() < 1e-15);
            }
        }
        let p = CoalitionStructure::size_weighted(2, &[1.0, 0.0]).unwrap();
        assert_eq!(p.pmf(0, &c(2, &[])), 1.0);
        assert!(matches!(
            CoalitionStructure::size_weighted(2, &[-1.0, 2.0]),
            Err(Error::InvalidWeights(_))
        ));
        assert!(matches!(
            CoalitionStructure::size_weighted(2, &[0.0, 0.0]),
            Err(Error::InvalidWeights(_))
        ));
    }

    #[test]
    fn random_order_examples() {
        let two = CoalitionStructure::random_order(2, &[(vec![0, 1], 0.5), (vec![1, 0], 0.5)]).unwrap();
        assert_eq!(two.pmf(0, &c(2, &[])), 0.5);
        assert_eq!(two.pmf(0, &c(2, &[1])), 0.5);

        let single = CoalitionStructure::random_order(3, &[(vec![0, 1, 2], 1.0)]).unwrap();
        assert_eq!(single.pmf(2, &c(3, &[0, 1])), 1.0);
        assert_eq!(single.pmf(0, &c(3, &[])), 1.0);

        assert!(matches!(
            CoalitionStructure::random_order(3, &[(vec![0, 1, 1], 1.0)]),
            Err(Error::BadPermutation(_))
        ));
        assert!(matches!(
            CoalitionStructure::random_order(2, &[(vec![0, 1], 0.6)]),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn uniform_random_order_is_shapley() {
        for n in 1..=8 {
            let ro = CoalitionStructure::uniform_random_order(n).unwrap();
            let sh = CoalitionStructure::shapley(n).unwrap();
            for i in 0..n {
                for s in crate::coalition::enumerate_subsets(n, i).unwrap() {
                    assert!((ro.pmf(i, &s) - sh.pmf(i, &s)).abs() < 1e-12, "n={n} i={i} {s}");
                }
            }
        }
    }

    #[test]
    fn custom_examples() {
        let mut t = BTreeMap::new();
        t.insert(0, BTreeMap::from([("1".to_string(), 0.5), ("2".to_string(), 0.5)]));
        t.insert(1, BTreeMap::from([("".to_string(), 1.0)]));
        t.insert(2, BTreeMap::from([("0,1".to_string(), 1.0)]));
        let p = CoalitionStructure::custom(3, &t).unwrap();
        assert_eq!(p.pmf(0, &c(3, &[1])), 0.5);
        assert!(!p.is_symmetric().unwrap());

        let mut missing = t.clone();
        missing.remove(&2);
        assert!(matches!(
            CoalitionStructure::custom(3, &missing),
            Err(Error::NotNormalized { player: 2, .. })
        ));

        let mut selfish = t.clone();
        selfish.insert(0, BTreeMap::from([("0,1".to_string(), 1.0)]));
        assert!(matches!(
            CoalitionStructure::custom(3, &selfish),
            Err(Error::SelfMembership { player: 0, .. })
        ));
    }

    #[test]
    fn efficiency_examples() {
        assert!(CoalitionStructure::shapley(4).unwrap().is_efficient().unwrap().efficient);
        let loo = CoalitionStructure::leave_one_out(3).unwrap().is_efficient().unwrap();
        assert!(!loo.efficient);
        assert_eq!(loo.grand_sum, 3.0);
        assert!(CoalitionStructure::uniform_random_order(3)
            .unwrap()
            .is_efficient()
            .unwrap()
            .efficient);
        assert!(matches!(
            CoalitionStructure::shapley(40).unwrap().is_efficient(),
            Err(Error::TooManyPlayers { .. })
        ));
    }

    #[test]
    fn symmetry_examples() {
        assert!(CoalitionStructure::shapley(5).unwrap().is_symmetric().unwrap());
        assert!(CoalitionStructure::leave_one_out(3).unwrap().is_symmetric().unwrap());
        assert!(CoalitionStructure::uniform_random_order(4).unwrap().is_symmetric().unwrap());
    }

    #[test]
    fn permutations_enumerated() {
        assert_eq!(all_permutations(3).len(), 6);
        assert_eq!(all_permutations(1), vec![vec![0]]);
        assert_eq!(all_permutations(3)[1], vec![0, 2, 1]);
    }

    #[test]
    fn sampling_supports() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let loo = CoalitionStructure::leave_one_out(4).unwrap();
        for _ in 0..50 {
            assert_eq!(loo.sample_coalition(1, &mut rng).unwrap(), c(4, &[0, 2, 3]));
        }
        let mut t = BTreeMap::new();
        t.insert(0, BTreeMap::from([("1".to_string(), 0.5), ("2".to_string(), 0.5)]));
        t.insert(1, BTreeMap::from([("0".to_string(), 0.5), ("2".to_string(), 0.5)]));
        t.insert(2, BTreeMap::from([("0".to_string(), 0.5), ("1".to_string(), 0.5)]));
        let singles = CoalitionStructure::custom(3, &t).unwrap();
        for _ in 0..200 {
            for i in 0..3 {
                let s = singles.sample_coalition(i, &mut rng).unwrap();
                assert_eq!(s.len(), 1);
                assert!(!s.contains(i));
            }
        }
    }

    #[test]
    fn shapley_two_player_frequency() {
        let p = CoalitionStructure::shapley(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 100_000;
        let empty = (0..draws)
            .filter(|_| p.sample_coalition(0, &mut rng).unwrap().is_empty())
            .count();
        let f = empty as f64 / draws as f64;
        assert!((f - 0.5).abs() < 0.01, "{f}");
    }

    /// Empirical frequencies within 4 standard errors of the PMF.
    fn check_frequencies(p: &CoalitionStructure, seed: u64) {
        let n = p.n_players();
        let draws = 100_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..n {
            let mut counts: HashMap<u64, usize> = HashMap::new();
            for _ in 0..draws {
                *counts.entry(p.sample_coalition(i, &mut rng).unwrap().mask()).or_default() += 1;
            }
            for s in crate::coalition::enumerate_subsets(n, i).unwrap() {
                let q = p.pmf(i, &s);
                let f = counts.get(&s.mask()).copied().unwrap_or(0) as f64 / draws as f64;
                let se = (q * (1.0 - q) / draws as f64).sqrt();
                assert!((f - q).abs() <= 4.0 * se + 1e-12, "{:?} i={i} {s}: {f} vs {q}", p.kind());
            }
        }
    }

    #[test]
    fn sampling_converges_to_pmf() {
        check_frequencies(&CoalitionStructure::shapley(4).unwrap(), 11);
        check_frequencies(&CoalitionStructure::size_weighted(4, &[1.0, 0.5, 2.0, 0.25]).unwrap(), 12);
        check_frequencies(
            &CoalitionStructure::random_order(3, &[(vec![2, 0, 1], 0.7), (vec![1, 2, 0], 0.3)]).unwrap(),
            13,
        );
    }

    #[test]
    fn large_n_shapley_pmf_uses_log_space() {
        let p = CoalitionStructure::shapley(50).unwrap();
        let s = Coalition::from_mask(50, 0b1110).unwrap();
        let expect = 1.0 / (50.0 * binomial(49, 3));
        assert!((p.pmf(0, &s) / expect - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(!p.sample_coalition(7, &mut rng).unwrap().contains(7));
    }

    fn perm_strategy(n: usize) -> impl Strategy<Value = Vec<(Vec<usize>, f64)>> {
        let perms = all_permutations(n);
        let k = perms.len();
        proptest::collection::vec((0..k, 0.01f64..1.0), 1..6).prop_map(move |picks| {
            let total: f64 = picks.iter().map(|p| p.1).sum();
            picks
                .into_iter()
                .map(|(idx, w)| (perms[idx].clone(), w / total))
                .collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn random_order_is_always_efficient((n, pmf) in (1usize..=6).prop_flat_map(|n| (Just(n), perm_strategy(n)))) {
            let total: f64 = pmf.iter().map(|e| e.1).sum();
            prop_assume!((total - 1.0).abs() <= NORMALIZATION_TOL);
            let p = CoalitionStructure::random_order(n, &pmf).unwrap();
            let report = p.is_efficient().unwrap();
            prop_assert!(report.efficient, "{:?}", report);
            for i in 0..n {
                prop_assert!((mass(&p, i) - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn size_weighted_is_symmetric_and_normalized(weights in proptest::collection::vec(0.0f64..5.0, 1..8)) {
            prop_assume!(weights.iter().any(|w| *w > 0.0));
            let n = weights.len();
            let p = CoalitionStructure::size_weighted(n, &weights).unwrap();
            prop_assert!(p.is_symmetric().unwrap());
            for i in 0..n {
                prop_assert!((mass(&p, i) - 1.0).abs() < 1e-12);
            }
        }
    }
}
