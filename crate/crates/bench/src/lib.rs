//! Fixtures shared by the benchmarks.

use distval::builders::LinearSoftmax;
use distval::StochasticGame;

/// Logit vectors of length `d` with a deterministic spread.
pub fn logits(d: usize, phase: f64) -> Vec<f64> {
    (0..d).map(|k| ((k as f64 + phase) * 0.7).sin() * 2.0).collect()
}

/// Linear-softmax game on `n` players and `d` classes.
pub fn softmax_game(n: usize, d: usize) -> StochasticGame {
    let weights = (0..n).map(|f| logits(d, f as f64 + 0.5)).collect();
    LinearSoftmax::new(weights, logits(d, 0.0), vec![1.0; n], None, None)
        .and_then(LinearSoftmax::into_game)
        .expect("valid bench game")
}
