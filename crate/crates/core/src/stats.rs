//! Small statistics toolkit: streaming mean/variance, quantiles, the
//! Kolmogorov-Smirnov distance and unbiased power estimators.

/// Streaming mean and variance (Welford), mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two observations.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// One-sample Kolmogorov-Smirnov distance `sup |F_n - F|`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    ks_statistic_sorted(&sorted, cdf)
}

pub fn ks_statistic_sorted(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Linear-interpolated quantile of a sorted sample (type 7); infinite
/// entries propagate.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi || sorted[lo] == sorted[hi] {
        return sorted[lo];
    }
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Unbiased estimates of `m^k`, `k = 1..=k_max`, from i.i.d. draws with mean `m`.
///
/// Uses the U-statistic `e_k(w) / C(N, k)` (elementary symmetric polynomial
/// of the draws) computed by Newton's identities. For 0/1 draws this is the
/// falling-factorial ratio `h(h-1)...(h-k+1) / (N(N-1)...(N-k+1))`.
pub fn unbiased_powers(draws: &[f64], k_max: usize) -> Vec<f64> {
    let n = draws.len();
    let mut power_sums = vec![0.0; k_max + 1];
    for &w in draws {
        let mut p = 1.0;
        for s in power_sums.iter_mut().skip(1) {
            p *= w;
            *s += p;
        }
    }
    // e_0 = 1, k e_k = Σ_{i=1}^k (-1)^{i-1} e_{k-i} p_i
    let mut e = vec![0.0; k_max + 1];
    e[0] = 1.0;
    for k in 1..=k_max {
        let mut acc = 0.0;
        for i in 1..=k {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * e[k - i] * power_sums[i];
        }
        e[k] = acc / k as f64;
    }
    (1..=k_max)
        .map(|k| {
            if k > n {
                return f64::NAN;
            }
            // C(n, k) as a running product
            let binom = (0..k).fold(1.0, |c, i| c * (n - i) as f64 / (i + 1) as f64);
            e[k] / binom
        })
        .collect()
}
