//! Samplers for `W = λ(B_{1̄,1} ∪ B_{Y,‖Y‖}) / λ(B_{0,1})` and its
//! `k`-ball generalization `W_k`, with `Y, Y_1, ..., Y_{k-1}` uniform in the
//! unit ball and `1̄ = (1, 0, ..., 0)`.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::geometry::{norm2, Ball, BallGeometry, Point, UnionSampler};
use crate::sampling::fill_unit_ball;
use crate::stats::Welford;

/// Default number of inner mixture draws for `W_k`, `k >= 3`.
pub const DEFAULT_INNER_SAMPLES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WkSample {
    pub k: usize,
    pub d: usize,
    pub value: f64,
    /// Zero when the value is exact (`k <= 2`).
    pub stderr: f64,
}

/// Exact `W` for a given center `y` (with `‖y‖ <= 1`).
pub fn w_given_center(geom: &BallGeometry<f64>, y: &[f64]) -> f64 {
    let r2 = norm2(y);
    // ‖y - 1̄‖² = ‖y‖² - 2 y_1 + 1
    let dist = (r2 - 2.0 * y[0] + 1.0).max(0.0).sqrt();
    let union = geom.union_of_two(1.0, r2.sqrt(), dist);
    (union / geom.unit_volume()).clamp(1.0, 2.0)
}

/// Reusable exact `W` sampler for a fixed dimension.
#[derive(Debug, Clone)]
pub struct WSampler {
    geom: BallGeometry<f64>,
    y: Vec<f64>,
}

impl WSampler {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return invalid("dimension must be positive");
        }
        Ok(Self { geom: BallGeometry::new(dim), y: vec![0.0; dim] })
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        fill_unit_ball(&mut self.y, rng);
        w_given_center(&self.geom, &self.y)
    }
}

pub fn sample_w<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<f64> {
    Ok(WSampler::new(d)?.sample(rng))
}

/// The `k` balls `B_{1̄,1}, B_{Y_1,‖Y_1‖}, ..., B_{Y_{k-1},‖Y_{k-1}‖}`.
pub fn wk_balls(centers: &[Point<f64>]) -> Result<Vec<Ball<f64>>> {
    let Some(first) = centers.first() else {
        return invalid("need at least one center");
    };
    let d = first.dim();
    let mut balls = Vec::with_capacity(centers.len() + 1);
    balls.push(Ball::new(Point::first_axis(d), 1.0)?);
    for c in centers {
        let r = c.norm();
        balls.push(Ball::new(c.clone(), r)?);
    }
    Ok(balls)
}

/// Mixture-estimator draws of `λ(∪ balls) / λ(B_{0,1})`, written to `out`.
pub fn normalized_union_draws<R: Rng + ?Sized>(
    balls: &[Ball<f64>],
    inner: usize,
    rng: &mut R,
    out: &mut Vec<f64>,
) -> Result<()> {
    let unit = BallGeometry::<f64>::new(balls.first().map_or(1, Ball::dim)).unit_volume();
    let mut sampler = UnionSampler::new(balls)?;
    out.clear();
    out.extend((0..inner).map(|_| sampler.draw(rng) / unit));
    Ok(())
}

pub fn sample_wk<R: Rng + ?Sized>(d: usize, k: usize, inner: usize, rng: &mut R) -> Result<WkSample> {
    if d == 0 || k == 0 {
        return invalid("d and k must be positive");
    }
    match k {
        1 => Ok(WkSample { k, d, value: 1.0, stderr: 0.0 }),
        2 => Ok(WkSample { k, d, value: sample_w(d, rng)?, stderr: 0.0 }),
        _ => {
            if inner == 0 {
                return invalid("inner_samples must be >= 1 for k >= 3");
            }
            let mut centers = Vec::with_capacity(k - 1);
            for _ in 0..k - 1 {
                centers.push(crate::sampling::sample_unit_ball(d, rng)?);
            }
            wk_given_centers(&centers, inner, rng)
        }
    }
}

/// `W_k` for fixed centers: exact for one center, Monte Carlo otherwise.
pub fn wk_given_centers<R: Rng + ?Sized>(
    centers: &[Point<f64>],
    inner: usize,
    rng: &mut R,
) -> Result<WkSample> {
    let k = centers.len() + 1;
    let d = centers.first().map_or(1, Point::dim);
    if centers.len() == 1 {
        let value = w_given_center(&BallGeometry::new(d), centers[0].coords());
        return Ok(WkSample { k, d, value, stderr: 0.0 });
    }
    let balls = wk_balls(centers)?;
    let mut draws = Vec::with_capacity(inner);
    normalized_union_draws(&balls, inner, rng, &mut draws)?;
    let mut acc = Welford::default();
    draws.iter().for_each(|&v| acc.push(v));
    Ok(WkSample { k, d, value: acc.mean(), stderr: acc.stderr() })
}
