//! Rankings by overall importance against rankings by summed absolute
//! standard values.

use serde::Serialize;

use crate::error::Result;
use crate::game::StochasticGame;
use crate::stats::{abs_importance, importance};
use crate::structure::CoalitionStructure;
use crate::value::exact_values;

/// Scores closer than this are treated as tied.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    /// `ι_i = 1 − q_i(0)` per player.
    pub iota: Vec<f64>,
    /// `Σ_c |φ_i(u_c)|` per player.
    pub iota_abs: Vec<f64>,
    /// Players by descending `ι`, ties by index.
    pub order_iota: Vec<usize>,
    /// Players by descending `ι^Abs`, ties by index.
    pub order_abs: Vec<usize>,
    /// Some pair of players is ordered differently by the two scores.
    pub rankings_differ: bool,
    /// The sets of top-scoring players differ.
    pub top_differs: bool,
    /// Players with zero `ι^Abs` that still change the outcome.
    pub aggregation_bias: Vec<usize>,
}

fn cmp_tol(a: f64, b: f64) -> i8 {
    if (a - b).abs() <= TIE_TOL {
        0
    } else if a > b {
        1
    } else {
        -1
    }
}

fn order(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

fn top_set(scores: &[f64]) -> Vec<usize> {
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..scores.len()).filter(|&i| cmp_tol(scores[i], best) == 0).collect()
}

/// Compares the two rankings from already computed scores.
pub fn compare_rankings(iota: Vec<f64>, iota_abs: Vec<f64>) -> RankReport {
    let n = iota.len();
    let mut rankings_differ = false;
    for a in 0..n {
        for b in a + 1..n {
            if cmp_tol(iota[a], iota[b]) != cmp_tol(iota_abs[a], iota_abs[b]) {
                rankings_differ = true;
            }
        }
    }
    let aggregation_bias = (0..n).filter(|&i| iota_abs[i] <= TIE_TOL && iota[i] > TIE_TOL).collect();
    RankReport {
        order_iota: order(&iota),
        order_abs: order(&iota_abs),
        rankings_differ,
        top_differs: top_set(&iota) != top_set(&iota_abs),
        aggregation_bias,
        iota,
        iota_abs,
    }
}

/// Exact values of every player, then both rankings.
pub fn rank_discrepancy(game: &StochasticGame, p: &CoalitionStructure) -> Result<RankReport> {
    let values = exact_values(game, p)?;
    Ok(compare_rankings(
        values.iter().map(importance).collect(),
        values.iter().map(abs_importance).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{Family, PayoffParams};

    #[test]
    fn xor_embedding_flags_aggregation_bias() {
        let g = StochasticGame::from_fn(2, Family::Categorical { d: 2 }, |c| {
            let x = if c.len() == 1 { 40.0 } else { -40.0 };
            Ok(PayoffParams::Categorical { logits: vec![x, -x] })
        })
        .unwrap();
        let r = rank_discrepancy(&g, &CoalitionStructure::shapley(2).unwrap()).unwrap();
        assert!(r.iota_abs.iter().all(|x| x.abs() < 1e-12));
        assert!(r.iota.iter().all(|x| (x - 1.0).abs() < 1e-12));
        assert_eq!(r.aggregation_bias, vec![0, 1]);
        assert!(!r.rankings_differ);
    }

    #[test]
    fn single_player_rankings_agree() {
        let g = StochasticGame::from_fn(1, Family::Categorical { d: 3 }, |c| {
            Ok(PayoffParams::Categorical {
                logits: vec![c.len() as f64, 0.0, -1.0],
            })
        })
        .unwrap();
        let r = rank_discrepancy(&g, &CoalitionStructure::shapley(1).unwrap()).unwrap();
        assert!(!r.rankings_differ && !r.top_differs);
        assert_eq!(r.order_iota, r.order_abs);
    }

    #[test]
    fn discordant_pair() {
        let r = compare_rankings(vec![0.9, 0.5], vec![0.1, 0.4]);
        assert!(r.rankings_differ && r.top_differs);
        assert_eq!(r.order_iota, vec![0, 1]);
        assert_eq!(r.order_abs, vec![1, 0]);
    }
}
