//! Estimators, closed forms and bounds for `α(d) = E[2/W²]` and the moments
//! `E[Z^k] = E[k!/W_k^k]` of the limit law `Z` of `n μ(S_1)`.

use std::time::Instant;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::geometry::Point;
use crate::parallel::map_streams;
use crate::rng::RandomStream;
use crate::sampling::sample_unit_ball;
use crate::stats::Welford;
use crate::wstat::{normalized_union_draws, wk_balls, WSampler};

/// Largest `k` for which `k!` is computed (in floating point).
pub const MAX_FACTORIAL: usize = 20;

/// Monte Carlo estimate with provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
    pub elapsed_ms: f64,
}

impl Estimate {
    pub fn exact(value: f64, samples: u64, seed: u64) -> Self {
        Self { value, stderr: 0.0, samples, seed, elapsed_ms: 0.0 }
    }

    pub(crate) fn from_welford(acc: &Welford, seed: u64, started: Instant) -> Self {
        Self {
            value: acc.mean(),
            stderr: acc.stderr(),
            samples: acc.count(),
            seed,
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        }
    }

    /// `|self - target| <= tolerance_sigmas * stderr`.
    pub fn agrees_with(&self, target: f64, tolerance_sigmas: f64) -> bool {
        (self.value - target).abs() <= tolerance_sigmas * self.stderr
    }
}

/// Closed interval `[lower, upper]`; `upper = +∞` marks an unbounded side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentBounds {
    pub lower: f64,
    pub upper: f64,
}

impl MomentBounds {
    pub fn is_unbounded(&self) -> bool {
        self.upper.is_infinite()
    }

    pub fn contains_with_slack(&self, value: f64, slack: f64) -> bool {
        value >= self.lower - slack && value <= self.upper + slack
    }
}

pub fn factorial(k: usize) -> Result<f64> {
    if k > MAX_FACTORIAL {
        return Err(Error::Overflow(format!("{k}! exceeds the supported range (k <= {MAX_FACTORIAL})")));
    }
    Ok((1..=k).fold(1.0, |acc, i| acc * i as f64))
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return invalid("dimension must be positive");
    }
    Ok(())
}

/// Sample mean of `2/W²` over `samples` exact draws of `W`.
pub fn estimate_alpha(d: usize, samples: u64, rng: &mut RandomStream) -> Result<Estimate> {
    check_dim(d)?;
    if samples < 2 {
        return invalid("estimate_alpha needs at least two samples");
    }
    let started = Instant::now();
    let acc = alpha_accumulate(d, samples, rng)?;
    Ok(Estimate::from_welford(&acc, rng.seed(), started))
}

fn alpha_accumulate<R: Rng + ?Sized>(d: usize, samples: u64, rng: &mut R) -> Result<Welford> {
    let mut sampler = WSampler::new(d)?;
    let mut acc = Welford::default();
    for _ in 0..samples {
        let w = sampler.sample(rng);
        acc.push(2.0 / (w * w));
    }
    Ok(acc)
}

/// [`estimate_alpha`] split over `workers` streams `(seed, 0..workers)`,
/// merged in stream order.
pub fn estimate_alpha_parallel(d: usize, samples: u64, seed: u64, workers: usize) -> Result<Estimate> {
    check_dim(d)?;
    if samples < 2 {
        return invalid("estimate_alpha needs at least two samples");
    }
    let started = Instant::now();
    let parts = map_streams(seed, workers, samples, |mut rng, share| alpha_accumulate(d, share, &mut rng));
    let mut acc = Welford::default();
    for part in parts {
        acc.merge(&part?);
    }
    Ok(Estimate::from_welford(&acc, seed, started))
}

/// `α(1) = ½(2 + E[2/(1+U)²]) = 1 + E[1/(1+U)²] = 1 + ∫₀¹ du/(1+u)² = 3/2`.
pub fn alpha_closed_form_d1() -> f64 {
    1.5
}

/// `[1, min(2, 1 + 6 (3/4)^{d/2})]`.
pub fn alpha_bounds(d: usize) -> Result<MomentBounds> {
    check_dim(d)?;
    let envelope = 1.0 + 6.0 * 0.75f64.powf(d as f64 / 2.0);
    Ok(MomentBounds { lower: 1.0, upper: envelope.min(2.0) })
}

/// Per-outer-draw value of `k!/W_k^k`, jackknife-corrected for `k >= 3`.
struct ZMomentKernel {
    d: usize,
    k: usize,
    inner: usize,
    k_factorial: f64,
    centers: Vec<Point<f64>>,
    draws: Vec<f64>,
    w_sampler: WSampler,
}

impl ZMomentKernel {
    fn new(d: usize, k: usize, inner: usize) -> Result<Self> {
        Ok(Self {
            d,
            k,
            inner,
            k_factorial: factorial(k)?,
            centers: Vec::with_capacity(k.saturating_sub(1)),
            draws: Vec::with_capacity(inner),
            w_sampler: WSampler::new(d)?,
        })
    }

    fn transform(&self, w: f64) -> f64 {
        self.k_factorial / w.powi(self.k as i32)
    }

    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<f64> {
        match self.k {
            1 => Ok(1.0),
            2 => {
                let w = self.w_sampler.sample(rng);
                Ok(self.transform(w))
            }
            _ => {
                self.centers.clear();
                for _ in 0..self.k - 1 {
                    self.centers.push(sample_unit_ball(self.d, rng)?);
                }
                let balls = wk_balls(&self.centers)?;
                normalized_union_draws(&balls, self.inner, rng, &mut self.draws)?;
                Ok(self.jackknife())
            }
        }
    }

    // Delete-1 jackknife of g(mean) with g(w) = k!/w^k:
    // m g(mean) - (m-1)/m Σ_i g(mean_{-i}).
    fn jackknife(&self) -> f64 {
        let m = self.draws.len() as f64;
        let sum: f64 = self.draws.iter().sum();
        let full = self.transform(sum / m);
        let loo: f64 = self
            .draws
            .iter()
            .map(|&v| self.transform((sum - v) / (m - 1.0)))
            .sum::<f64>()
            / m;
        m * full - (m - 1.0) * loo
    }
}

fn check_z_args(d: usize, k: usize, outer: u64, inner: usize) -> Result<()> {
    check_dim(d)?;
    if k == 0 {
        return invalid("moment order k must be positive");
    }
    if outer < 2 {
        return invalid("estimate_z_moment needs at least two outer samples");
    }
    if k >= 3 && inner < 2 {
        return invalid("estimate_z_moment needs inner >= 2 for k >= 3");
    }
    Ok(())
}

fn z_accumulate<R: Rng + ?Sized>(d: usize, k: usize, outer: u64, inner: usize, rng: &mut R) -> Result<Welford> {
    let mut kernel = ZMomentKernel::new(d, k, inner)?;
    let mut acc = Welford::default();
    for _ in 0..outer {
        acc.push(kernel.draw(rng)?);
    }
    Ok(acc)
}

/// Estimate of `E[Z^k] = E[k!/W_k^k]`.
///
/// `k = 1` is exactly 1, `k = 2` uses exact `W`, and `k >= 3` estimates each
/// `W_k` from `inner` mixture draws and removes the plug-in bias of
/// `w ↦ k!/w^k` with a delete-1 jackknife.
pub fn estimate_z_moment(d: usize, k: usize, outer: u64, inner: usize, rng: &mut RandomStream) -> Result<Estimate> {
    check_z_args(d, k, outer, inner)?;
    if k == 1 {
        return Ok(Estimate::exact(1.0, outer, rng.seed()));
    }
    let started = Instant::now();
    let acc = z_accumulate(d, k, outer, inner, rng)?;
    Ok(Estimate::from_welford(&acc, rng.seed(), started))
}

pub fn estimate_z_moment_parallel(
    d: usize,
    k: usize,
    outer: u64,
    inner: usize,
    seed: u64,
    workers: usize,
) -> Result<Estimate> {
    check_z_args(d, k, outer, inner)?;
    if k == 1 {
        return Ok(Estimate::exact(1.0, outer, seed));
    }
    let started = Instant::now();
    let parts = map_streams(seed, workers, outer, |mut rng, share| z_accumulate(d, k, share, inner, &mut rng));
    let mut acc = Welford::default();
    for part in parts {
        acc.merge(&part?);
    }
    Ok(Estimate::from_welford(&acc, seed, started))
}

/// `[k!/2^{dk}, k!]`.
pub fn z_moment_bounds(d: usize, k: usize) -> Result<MomentBounds> {
    check_dim(d)?;
    if k == 0 {
        return invalid("moment order k must be positive");
    }
    let kf = factorial(k)?;
    Ok(MomentBounds { lower: kf * 0.5f64.powf((d * k) as f64), upper: kf })
}

/// `E[Z^k] = (k+1)!/2^k` for `d = 1`, where `Z ~ (E_1 + E_2)/2`.
pub fn z_moment_closed_form_d1(k: usize) -> Result<f64> {
    if k == 0 {
        return invalid("moment order k must be positive");
    }
    Ok(factorial(k)? * (k + 1) as f64 / 2f64.powi(k as i32))
}

/// CDF of `(E_1 + E_2)/2`: `1 - e^{-2z}(1 + 2z)`, zero for `z < 0`.
pub fn z_cdf_d1(z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z.is_infinite() {
        return 1.0;
    }
    -(-2.0 * z).exp_m1() - 2.0 * z * (-2.0 * z).exp()
}

/// Bounds on `E[e^{sZ}]`: below by `1/(1 - s/2^d)` (for `s < 2^d`), above by
/// `1/(1 - s)` (for `s < 1`). Sides outside their range are `+∞`.
pub fn z_mgf_bounds(s: f64, d: usize) -> Result<MomentBounds> {
    check_dim(d)?;
    if !(s > 0.0) {
        return invalid(format!("MGF bounds need s > 0, got {s}"));
    }
    let scale = 2f64.powi(d as i32);
    let lower = if s < scale { 1.0 / (1.0 - s / scale) } else { f64::INFINITY };
    let upper = if s < 1.0 { 1.0 / (1.0 - s) } else { f64::INFINITY };
    Ok(MomentBounds { lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorial_range() {
        assert_eq!(factorial(0).unwrap(), 1.0);
        assert_eq!(factorial(5).unwrap(), 120.0);
        assert_eq!(factorial(20).unwrap(), 2_432_902_008_176_640_000.0);
        assert!(matches!(factorial(21), Err(Error::Overflow(_))));
        assert!(z_moment_bounds(1, 21).is_err());
        assert!(z_moment_closed_form_d1(21).is_err());
    }

    #[test]
    fn alpha_bounds_values() {
        assert_eq!(alpha_bounds(1).unwrap(), MomentBounds { lower: 1.0, upper: 2.0 });
        // 6 (3/4)^5 ≈ 1.4238, so the envelope at d = 10 is still above the cap
        assert!((6.0 * 0.75f64.powi(5) - 1.4238).abs() < 1e-4);
        assert_eq!(alpha_bounds(10).unwrap().upper, 2.0);
        assert_eq!(alpha_bounds(12).unwrap().upper, 2.0);
        let b = alpha_bounds(13).unwrap();
        assert!((b.upper - (1.0 + 6.0 * 0.75f64.powf(6.5))).abs() < 1e-14);
        assert!(b.upper < 2.0);
        assert!(alpha_bounds(400).unwrap().upper - 1.0 < 1e-20);
        assert!(alpha_bounds(0).is_err());
    }

    #[test]
    fn alpha_closed_form_matches_integral() {
        // 1 + ∫₀¹ du/(1+u)² by composite Simpson
        let n = 2000;
        let h = 1.0 / n as f64;
        let f = |u: f64| 1.0 / ((1.0 + u) * (1.0 + u));
        let mut s = f(0.0) + f(1.0);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        assert!((1.0 + s * h / 3.0 - alpha_closed_form_d1()).abs() < 1e-12);
    }

    #[test]
    fn z_bounds_values() {
        assert_eq!(z_moment_bounds(1, 2).unwrap(), MomentBounds { lower: 0.5, upper: 2.0 });
        for d in 1..6 {
            let b = z_moment_bounds(d, 1).unwrap();
            assert_eq!(b.upper, 1.0);
            assert!((b.lower - 0.5f64.powi(d as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn d1_closed_forms() {
        assert_eq!(z_moment_closed_form_d1(1).unwrap(), 1.0);
        assert_eq!(z_moment_closed_form_d1(2).unwrap(), 1.5);
        assert_eq!(z_moment_closed_form_d1(3).unwrap(), 3.0);
        assert_eq!(z_moment_closed_form_d1(4).unwrap(), 7.5);
        assert_eq!(z_moment_closed_form_d1(2).unwrap(), alpha_closed_form_d1());
    }

    #[test]
    fn d1_cdf_shape_and_mean() {
        assert_eq!(z_cdf_d1(0.0), 0.0);
        assert_eq!(z_cdf_d1(-1.0), 0.0);
        assert!((z_cdf_d1(50.0) - 1.0).abs() < 1e-15);
        // E[Z] = ∫ (1 - F) over [0, 40]
        let n = 40_000;
        let h = 40.0 / n as f64;
        let g = |z: f64| 1.0 - z_cdf_d1(z);
        let mut s = g(0.0) + g(40.0);
        for i in 1..n {
            s += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        assert!((s * h / 3.0 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mgf_bounds_values() {
        let b = z_mgf_bounds(0.5, 1).unwrap();
        assert!((b.lower - 4.0 / 3.0).abs() < 1e-15 && (b.upper - 2.0).abs() < 1e-15);
        let b = z_mgf_bounds(1.5, 2).unwrap();
        assert!((b.lower - 1.6).abs() < 1e-15);
        assert!(b.is_unbounded());
        let b = z_mgf_bounds(1e-9, 3).unwrap();
        assert!((b.lower - 1.0).abs() < 1e-8 && (b.upper - 1.0).abs() < 1e-8);
        assert!(z_mgf_bounds(0.0, 1).is_err());
        assert!(z_mgf_bounds(-1.0, 1).is_err());
        assert_eq!(z_mgf_bounds(3.0, 1).unwrap().lower, f64::INFINITY);
    }

    #[test]
    fn alpha_d1_small_run() {
        let mut rng = RandomStream::new(0, 0);
        let est = estimate_alpha(1, 200_000, &mut rng).unwrap();
        assert!(est.agrees_with(1.5, 4.0), "{est:?}");
        assert_eq!(est.samples, 200_000);
        assert!(estimate_alpha(1, 1, &mut rng).is_err());
    }

    #[test]
    fn z_moment_k1_exact() {
        let mut rng = RandomStream::new(0, 0);
        let est = estimate_z_moment(3, 1, 10, 10, &mut rng).unwrap();
        assert_eq!((est.value, est.stderr), (1.0, 0.0));
        assert!(estimate_z_moment(3, 3, 10, 1, &mut rng).is_err());
        assert!(estimate_z_moment(3, 2, 1, 1, &mut rng).is_err());
    }

    #[test]
    fn jackknife_removes_plug_in_bias() {
        // W-like draws uniform on [1, 2]; target g(1.5) with g(w) = 2/w²
        use rand::Rng;
        let mut rng = RandomStream::new(31, 0);
        let mut kernel = ZMomentKernel::new(1, 2, 16).unwrap();
        let target = kernel.transform(1.5);
        let (mut plug, mut jack) = (Welford::default(), Welford::default());
        for _ in 0..20_000 {
            kernel.draws = (0..16).map(|_| 1.0 + rng.random::<f64>()).collect();
            let mean = kernel.draws.iter().sum::<f64>() / 16.0;
            plug.push(kernel.transform(mean) - target);
            jack.push(kernel.jackknife() - target);
        }
        assert!(plug.mean() > 4.0 * plug.stderr(), "plug-in bias should be visible: {plug:?}");
        assert!(jack.mean().abs() < plug.mean() / 3.0, "plug {:?} jack {:?}", plug.mean(), jack.mean());
    }

    #[test]
    fn parallel_alpha_is_reproducible() {
        let a = estimate_alpha_parallel(2, 20_000, 9, 3).unwrap();
        let b = estimate_alpha_parallel(2, 20_000, 9, 3).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.samples, 20_000);
    }
}
