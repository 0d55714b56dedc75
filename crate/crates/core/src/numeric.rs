//! Log-space kernels shared by the categorical path and the value aggregators.

/// Max-shifted `log Σ exp(x)`. Returns `-inf` for an empty slice.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// `log(e^a + e^b)`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `log σ(x)` for the logistic function σ.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(σ(p) − σ(q))` for `p ≥ q`, via σ(p) − σ(q) = σ(p)·σ(−q)·(1 − e^{q−p}).
///
/// The product form has no subtraction of nearly equal quantities, so it is
/// accurate when both logistics saturate. Returns `-inf` when `p == q`.
pub fn log_sigmoid_diff(p: f64, q: f64) -> f64 {
    debug_assert!(p >= q || (p - q).abs() < 1e-300);
    let gap = q - p;
    if gap >= 0.0 {
        return f64::NEG_INFINITY;
    }
    log_sigmoid(p) + log_sigmoid(-q) + (-gap.exp_m1()).ln()
}

/// Max-shifted softmax.
pub fn softmax(theta: &[f64]) -> Vec<f64> {
    let m = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = theta.iter().map(|&t| (t - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Neumaier's compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn scale(&mut self, f: f64) {
        self.sum *= f;
        self.comp *= f;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Running log-sum-exp over nonnegative terms given by their logs. Keeps the
/// largest log seen as the scale and a compensated sum of rescaled terms.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogAccumulator {
    max: f64,
    scaled: CompensatedSum,
}

impl LogAccumulator {
    pub fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: CompensatedSum::new(),
        }
    }

    pub fn push(&mut self, log_term: f64) {
        if log_term == f64::NEG_INFINITY {
            return;
        }
        if log_term > self.max {
            if self.max != f64::NEG_INFINITY {
                self.scaled.scale((self.max - log_term).exp());
            }
            self.max = log_term;
            self.scaled.add(1.0);
        } else {
            self.scaled.add((log_term - self.max).exp());
        }
    }

    /// `exp(offset) · Σ exp(terms)`, evaluated without overflow when the
    /// true result is representable.
    pub fn exp_with_offset(&self, offset: f64) -> f64 {
        if self.max == f64::NEG_INFINITY {
            return 0.0;
        }
        (offset + self.max).exp() * self.scaled.value()
    }
}

/// `C(n, k)` as f64. Exact integer arithmetic up to n = 30, log-space above.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    if n <= 30 {
        let mut c: u64 = 1;
        for j in 0..k as u64 {
            c = c * (n as u64 - j) / (j + 1);
        }
        c as f64
    } else {
        ln_binomial(n, k).exp()
    }
}

pub fn ln_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|j| ((n - j) as f64).ln() - ((j + 1) as f64).ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_handles_large_and_empty() {
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
        let v = logsumexp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((logsumexp(&[0.0, 0.0, 0.0]) - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_diff_matches_direct_in_the_easy_regime() {
        for &(p, q) in &[(1.0, -1.0), (0.3, 0.1), (5.0, -2.0), (-3.0, -4.0)] {
            let direct = sigmoid(p) - sigmoid(q);
            assert!((log_sigmoid_diff(p, q).exp() - direct).abs() < 1e-15);
        }
        assert_eq!(log_sigmoid_diff(2.0, 2.0), f64::NEG_INFINITY);
    }

    #[test]
    fn sigmoid_diff_survives_saturation() {
        // σ(40) − σ(39) ≈ e^{-39} − e^{-40}; direct subtraction returns 0.
        let v = log_sigmoid_diff(40.0, 39.0).exp();
        let expect = (-39f64).exp() - (-40f64).exp();
        assert!((v - expect).abs() / expect < 1e-12);
    }

    #[test]
    fn log_accumulator_agrees_with_plain_sum() {
        let logs = [-3.0, 2.0, 0.5, f64::NEG_INFINITY, 1.0];
        let mut acc = LogAccumulator::new();
        for &l in &logs {
            acc.push(l);
        }
        let plain: f64 = logs.iter().map(|l: &f64| l.exp()).sum();
        assert!((acc.exp_with_offset(0.0) - plain).abs() < 1e-12);
        assert_eq!(LogAccumulator::new().exp_with_offset(5.0), 0.0);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(30, 15), 155_117_520.0);
        assert!((binomial(40, 20) / 137_846_528_820.0 - 1.0).abs() < 1e-12);
        assert_eq!(binomial(3, 4), 0.0);
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let mut s = CompensatedSum::new();
        s.add(1.0);
        for _ in 0..10 {
            s.add(1e-16);
        }
        assert!((s.value() - (1.0 + 1e-15)).abs() < 1e-30 + f64::EPSILON * 1e-1);
    }
}
