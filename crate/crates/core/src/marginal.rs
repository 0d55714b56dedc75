//! Closed-form laws of a single stochastic marginal contribution
//! `v(S ∪ i) ⊖ v(S)` under shared noise.
//!
//! * Bernoulli payoffs share a uniform `ε` (`v = 1{ε ≤ π}`), so the difference
//!   lives on `{-1, 0, 1}` and at most one of the two signs has mass.
//! * Gaussian payoffs share a standard normal `ε` (`v = μ + σε`), giving a
//!   single Gaussian plus the sign of the change in `σ`.
//! * Categorical payoffs share a Gumbel vector (`v = argmax(θ + ε)`). The joint
//!   law of the two argmaxes is upper triangular once classes are sorted by
//!   `ν = α − β` descending, and every entry comes from prefix log-sums of `α`,
//!   suffix log-sums of `β` and one logistic difference per boundary `k`.

use crate::error::{Error, Result};
use crate::numeric::{log_add_exp, log_sigmoid_diff, CompensatedSum, LogAccumulator};

/// Slack below zero that is clamped away rather than reported.
pub const CLAMP_TOL: f64 = 1e-15;

/// Maximum `|Σ − 1|` of a categorical joint before it is rejected.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Law of `v(S ∪ i) ⊖ v(S)` for Bernoulli payoffs, over `{+1, −1, 0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliMC {
    pub q_plus: f64,
    pub q_minus: f64,
    pub q_zero: f64,
}

impl BernoulliMC {
    pub fn expectation(&self) -> f64 {
        self.q_plus - self.q_minus
    }
}

/// `pi_with = π_{S∪i}`, `pi_without = π_S`.
pub fn bernoulli_mc(pi_with: f64, pi_without: f64) -> Result<BernoulliMC> {
    for p in [pi_with, pi_without] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange(p));
        }
    }
    let lo = pi_with.min(pi_without);
    let hi = pi_with.max(pi_without);
    Ok(BernoulliMC {
        q_plus: pi_with - lo,
        q_minus: pi_without - lo,
        q_zero: 1.0 - (hi - lo),
    })
}

/// Law of `v(S ∪ i) ⊖ v(S)` for Gaussian payoffs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMC {
    pub mean: f64,
    pub sd: f64,
    /// Sign of `σ_{S∪i} − σ_S`: −1, 0 or +1.
    pub sign: i8,
}

pub fn gaussian_mc(mu_with: f64, sigma_with: f64, mu_without: f64, sigma_without: f64) -> Result<GaussianMC> {
    for s in [sigma_with, sigma_without] {
        if s < 0.0 || s.is_nan() {
            return Err(Error::NegativeSigma(s));
        }
    }
    if !(mu_with.is_finite() && mu_without.is_finite() && sigma_with.is_finite() && sigma_without.is_finite()) {
        return Err(Error::NonFinite);
    }
    let dsigma = sigma_with - sigma_without;
    let sign = if dsigma > 0.0 {
        1
    } else if dsigma < 0.0 {
        -1
    } else {
        0
    };
    Ok(GaussianMC {
        mean: mu_with - mu_without,
        sd: dsigma.abs(),
        sign,
    })
}

/// Joint law of `(v(S ∪ i), v(S))` for categorical payoffs.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalMC {
    d: usize,
    /// Row-major; entry `(r, s)` is `P(v(S∪i) = r, v(S) = s)`.
    joint: Vec<f64>,
}

impl CategoricalMC {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn get(&self, with_class: usize, without_class: usize) -> f64 {
        self.joint[with_class * self.d + without_class]
    }

    /// Row-major `d × d` matrix.
    pub fn as_slice(&self) -> &[f64] {
        &self.joint
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.joint
    }

    /// `P(v(S∪i) = v(S))`.
    pub fn no_change(&self) -> f64 {
        (0..self.d).map(|r| self.get(r, r)).sum()
    }
}

fn validate(alpha: &[f64], beta: &[f64]) -> Result<()> {
    if alpha.len() != beta.len() {
        return Err(Error::DimensionMismatch(format!(
            "alpha has {} classes, beta has {}",
            alpha.len(),
            beta.len()
        )));
    }
    if alpha.len() < 2 {
        return Err(Error::DimensionMismatch(format!(
            "need at least 2 classes, got {}",
            alpha.len()
        )));
    }
    if alpha.iter().chain(beta).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Class order by `ν = α − β` descending, ties by original index.
pub(crate) fn sort_order(alpha: &[f64], beta: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..alpha.len()).collect();
    order.sort_by(|&x, &y| {
        let nx = alpha[x] - beta[x];
        let ny = alpha[y] - beta[y];
        ny.total_cmp(&nx).then(x.cmp(&y))
    });
    order
}

/// Sorted-space quantities shared by the full joint and the diagonal.
struct Sorted {
    a: Vec<f64>,
    b: Vec<f64>,
    /// `abar[k] = log Σ_{j≤k} e^{a_j}`.
    abar: Vec<f64>,
    /// `bbar[k] = log Σ_{j>k} e^{b_j}`, `-inf` for the last class.
    bbar: Vec<f64>,
}

impl Sorted {
    fn new(alpha: &[f64], beta: &[f64], order: &[usize]) -> Self {
        let d = order.len();
        let a: Vec<f64> = order.iter().map(|&j| alpha[j]).collect();
        let b: Vec<f64> = order.iter().map(|&j| beta[j]).collect();
        let mut abar = vec![0.0; d];
        let mut acc = f64::NEG_INFINITY;
        for k in 0..d {
            acc = log_add_exp(acc, a[k]);
            abar[k] = acc;
        }
        let mut bbar = vec![f64::NEG_INFINITY; d];
        let mut acc = f64::NEG_INFINITY;
        for k in (0..d - 1).rev() {
            acc = log_add_exp(acc, b[k + 1]);
            bbar[k] = acc;
        }
        Self { a, b, abar, bbar }
    }

    fn nu(&self, k: usize) -> f64 {
        self.a[k] - self.b[k]
    }

    /// `P(both argmaxes equal sorted class r)`
    /// `= (e^{abar_r − a_r} + e^{bbar_r − b_r})^{-1}`.
    fn diagonal(&self, r: usize) -> f64 {
        (-log_add_exp(self.abar[r] - self.a[r], self.bbar[r] - self.b[r])).exp()
    }

    /// `log c_k` for the boundary between sorted classes `k` and `k + 1`.
    fn log_c(&self, k: usize) -> f64 {
        let gap = self.bbar[k] - self.abar[k];
        -self.bbar[k] - self.abar[k] + log_sigmoid_diff(gap + self.nu(k), gap + self.nu(k + 1))
    }
}

/// Full `d × d` joint law of the two shared-noise argmaxes.
///
/// `alpha` are the natural parameters of `v(S ∪ i)`, `beta` those of `v(S)`.
/// Runs in `O(d²)` (one pass per row over a running log-sum of `c_k`).
pub fn categorical_mc(alpha: &[f64], beta: &[f64]) -> Result<CategoricalMC> {
    validate(alpha, beta)?;
    let order = sort_order(alpha, beta);
    joint_in_order(alpha, beta, &order)
}

/// Computes the joint for a caller-chosen class order. The order must sort
/// `ν` descending; any such order gives the same result.
pub(crate) fn joint_in_order(alpha: &[f64], beta: &[f64], order: &[usize]) -> Result<CategoricalMC> {
    let d = alpha.len();
    let st = Sorted::new(alpha, beta, order);
    let log_c: Vec<f64> = (0..d - 1).map(|k| st.log_c(k)).collect();

    let mut sorted = vec![0.0; d * d];
    for r in 0..d {
        sorted[r * d + r] = st.diagonal(r);
        // P_rs = e^{a_r + b_s} Σ_{k=r}^{s-1} c_k for s > r; zero below the diagonal
        let mut running = LogAccumulator::new();
        for s in r + 1..d {
            running.push(log_c[s - 1]);
            let p = running.exp_with_offset(st.a[r] + st.b[s]);
            sorted[r * d + s] = if cfg!(feature = "mutate-ck-sign") { -p } else { p };
        }
    }

    let mut joint = vec![0.0; d * d];
    for r in 0..d {
        for s in 0..d {
            joint[order[r] * d + order[s]] = sorted[r * d + s];
        }
    }
    finish_joint(d, joint)
}

fn finish_joint(d: usize, mut joint: Vec<f64>) -> Result<CategoricalMC> {
    for x in joint.iter_mut() {
        if *x < 0.0 {
            if *x < -CLAMP_TOL {
                return Err(Error::NormalizationFailure(*x));
            }
            *x = 0.0;
        }
    }
    let total = joint.iter().copied().collect::<CompensatedSum>().value();
    if !total.is_finite() || (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NormalizationFailure(total));
    }
    for x in joint.iter_mut() {
        *x /= total;
    }
    Ok(CategoricalMC { d, joint })
}

/// `P(v(S∪i) = v(S))` without materializing the off-diagonal entries.
/// `O(d log d)`.
pub fn categorical_no_change(alpha: &[f64], beta: &[f64]) -> Result<f64> {
    validate(alpha, beta)?;
    let order = sort_order(alpha, beta);
    let st = Sorted::new(alpha, beta, &order);
    let p = (0..alpha.len())
        .map(|r| st.diagonal(r))
        .collect::<CompensatedSum>()
        .value();
    Ok(p.min(1.0))
}
