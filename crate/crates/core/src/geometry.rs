//! Exact volumes of `d`-balls, spherical caps and two-ball lenses, plus a
//! Monte Carlo estimator for the volume of a union of balls.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::sampling::fill_unit_ball;
use crate::scalar::Scalar;
use crate::special::{inc_beta_core, ln_beta, ln_gamma};
use crate::stats::Welford;

/// A point of `R^d` with finite coordinates, `d >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point<T> {
    coords: Vec<T>,
}

impl<T: Scalar> Point<T> {
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if coords.is_empty() {
            return invalid("a point needs at least one coordinate");
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return invalid("point coordinates must be finite");
        }
        Ok(Self { coords })
    }

    pub fn origin(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Self { coords: vec![T::zero(); dim] }
    }

    /// The point `(1, 0, ..., 0)`.
    pub fn first_axis(dim: usize) -> Self {
        let mut p = Self::origin(dim);
        p.coords[0] = T::one();
        p
    }

    pub(crate) fn from_vec_unchecked(coords: Vec<T>) -> Self {
        debug_assert!(!coords.is_empty());
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<T> {
        self.coords
    }

    pub fn norm(&self) -> T {
        norm2(&self.coords).sqrt()
    }

    pub fn distance(&self, other: &Self) -> T {
        dist2(&self.coords, &other.coords).sqrt()
    }
}

#[inline]
pub(crate) fn dist2<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

#[inline]
pub(crate) fn norm2<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |acc, &x| acc + x * x)
}

/// Closed ball `B_{center, radius}`. Radius zero is legal and has zero volume.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball<T> {
    center: Point<T>,
    radius: T,
}

impl<T: Scalar> Ball<T> {
    pub fn new(center: Point<T>, radius: T) -> Result<Self> {
        if !(radius >= T::zero()) || !radius.is_finite() {
            return invalid(format!("ball radius must be finite and >= 0, got {radius}"));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> &Point<T> {
        &self.center
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn volume(&self) -> T {
        BallGeometry::new(self.dim()).volume(self.radius)
    }

    pub fn contains(&self, p: &[T]) -> bool {
        dist2(self.center.coords(), p) <= self.radius * self.radius
    }
}

/// Monte Carlo (or exact) volume with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeEstimate<T> {
    pub value: T,
    pub stderr: T,
    pub samples: usize,
}

/// Dimension-dependent constants shared by every volume formula in `R^d`.
#[derive(Debug, Clone, Copy)]
pub struct BallGeometry<T> {
    dim: usize,
    unit_volume: T,
    cap_a: T,
    cap_ln_beta: T,
}

impl<T: Scalar> BallGeometry<T> {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        let d = T::from_usize_lossy(dim);
        let half = T::lit(0.5);
        let ln_unit = half * d * T::PI().ln() - ln_gamma(half * d + T::one());
        let cap_a = half * (d + T::one());
        Self {
            dim,
            unit_volume: ln_unit.exp(),
            cap_a,
            cap_ln_beta: ln_beta(cap_a, half),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn unit_volume(&self) -> T {
        self.unit_volume
    }

    pub fn volume(&self, radius: T) -> T {
        self.unit_volume * radius.powi(self.dim as i32)
    }

    /// Volume of `{ y in B_{0,radius} : y_1 >= offset }`.
    pub fn cap_volume(&self, radius: T, offset: T) -> T {
        if radius <= T::zero() || offset >= radius {
            return T::zero();
        }
        if offset <= -radius {
            return self.volume(radius);
        }
        let s = offset.abs() / radius;
        let x = (T::one() - s) * (T::one() + s);
        let y = s * s;
        let small = if s == T::zero() {
            T::lit(0.5) * self.volume(radius)
        } else {
            let ratio = inc_beta_core(self.cap_a, T::lit(0.5), x, y, self.cap_ln_beta);
            T::lit(0.5) * self.volume(radius) * ratio
        };
        if offset >= T::zero() {
            small
        } else {
            self.volume(radius) - small
        }
    }

    /// Volume of the intersection of two balls with radii `r1`, `r2` whose
    /// centers are `distance` apart.
    pub fn lens_volume(&self, r1: T, r2: T, distance: T) -> T {
        if r1 <= T::zero() || r2 <= T::zero() || distance >= r1 + r2 {
            return T::zero();
        }
        if distance <= (r1 - r2).abs() {
            return self.volume(r1.min(r2));
        }
        // signed offset of the radical hyperplane from each center
        let t1 = (distance * distance + r1 * r1 - r2 * r2) / (T::lit(2.0) * distance);
        let t2 = distance - t1;
        let v = self.cap_volume(r1, t1) + self.cap_volume(r2, t2);
        v.max(T::zero()).min(self.volume(r1.min(r2)))
    }

    pub fn union_of_two(&self, r1: T, r2: T, distance: T) -> T {
        let v1 = self.volume(r1);
        let v2 = self.volume(r2);
        (v1 + v2 - self.lens_volume(r1, r2, distance)).max(v1.max(v2))
    }
}

fn check_same_dim<T: Scalar>(a: &Ball<T>, b: &Ball<T>) -> Result<()> {
    if a.dim() != b.dim() {
        return invalid(format!("dimension mismatch: {} vs {}", a.dim(), b.dim()));
    }
    Ok(())
}

/// `λ(B_{0,1}) = π^{d/2} / Γ(d/2 + 1)`.
pub fn unit_ball_volume<T: Scalar>(dim: usize) -> Result<T> {
    if dim == 0 {
        return invalid("dimension must be positive");
    }
    Ok(BallGeometry::new(dim).unit_volume())
}

pub fn ball_intersection_volume<T: Scalar>(a: &Ball<T>, b: &Ball<T>) -> Result<T> {
    check_same_dim(a, b)?;
    let distance = a.center.distance(&b.center);
    Ok(BallGeometry::new(a.dim()).lens_volume(a.radius, b.radius, distance))
}

pub fn two_ball_union_volume<T: Scalar>(a: &Ball<T>, b: &Ball<T>) -> Result<T> {
    check_same_dim(a, b)?;
    let distance = a.center.distance(&b.center);
    Ok(BallGeometry::new(a.dim()).union_of_two(a.radius, b.radius, distance))
}

/// Lebesgue measure of a union of closed intervals by sort-and-sweep.
pub fn interval_union_length<T: Scalar>(intervals: &[(T, T)]) -> Result<T> {
    if let Some(&(lo, hi)) = intervals.iter().find(|(lo, hi)| !(lo <= hi)) {
        return invalid(format!("interval with lo > hi: ({lo}, {hi})"));
    }
    let mut sorted = intervals.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite endpoints"));
    let mut total = T::zero();
    let mut current: Option<(T, T)> = None;
    for (lo, hi) in sorted {
        current = match current {
            Some((clo, chi)) if lo <= chi => Some((clo, chi.max(hi))),
            Some((clo, chi)) => {
                total = total + (chi - clo);
                Some((lo, hi))
            }
            None => Some((lo, hi)),
        };
    }
    if let Some((clo, chi)) = current {
        total = total + (chi - clo);
    }
    Ok(total)
}

/// Volume-weighted mixture sampler for `λ(∪ B_i)`.
///
/// One draw picks ball `i` with probability `vol(B_i) / Σ vol(B_j)`, samples a
/// uniform point `X` in it and returns `Σ vol(B_j) / m(X)`, where `m(X)` is the
/// number of balls containing `X`. Each draw is unbiased for the union volume
/// and lies in `[Σ vol / k, Σ vol]`.
#[derive(Debug, Clone)]
pub struct UnionSampler<'a, T> {
    balls: &'a [Ball<T>],
    cumulative: Vec<T>,
    total: T,
    scratch: Vec<T>,
}

impl<'a, T: Scalar> UnionSampler<'a, T> {
    pub fn new(balls: &'a [Ball<T>]) -> Result<Self> {
        let Some(first) = balls.first() else {
            return invalid("union of an empty ball list");
        };
        let dim = first.dim();
        if let Some(b) = balls.iter().find(|b| b.dim() != dim) {
            return invalid(format!("dimension mismatch: {} vs {}", dim, b.dim()));
        }
        let geom = BallGeometry::<T>::new(dim);
        let mut total = T::zero();
        let cumulative = balls
            .iter()
            .map(|b| {
                total = total + geom.volume(b.radius);
                total
            })
            .collect();
        Ok(Self {
            balls,
            cumulative,
            total,
            scratch: vec![T::zero(); dim],
        })
    }

    /// `Σ vol(B_j)`.
    pub fn total_volume(&self) -> T {
        self.total
    }

    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> T {
        if self.total <= T::zero() {
            return T::zero();
        }
        let u = T::lit(rng.random::<f64>()) * self.total;
        let chosen = self
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.balls.len() - 1);
        let ball = &self.balls[chosen];
        fill_unit_ball(&mut self.scratch, rng);
        for (s, &c) in self.scratch.iter_mut().zip(ball.center.coords()) {
            *s = c + ball.radius * *s;
        }
        let others = self
            .balls
            .iter()
            .enumerate()
            .filter(|&(j, b)| j != chosen && b.contains(&self.scratch))
            .count();
        self.total / T::from_usize_lossy(others + 1)
    }
}

/// Unbiased Monte Carlo estimate of the volume of `∪ balls`.
///
/// If some pair of balls overlaps but no draw landed in an overlap, the
/// sample variance is zero; the stderr is then floored at the value a
/// single such draw would give, `total / (2 samples)`.
pub fn union_volume_mc<T: Scalar, R: Rng + ?Sized>(
    balls: &[Ball<T>],
    samples: usize,
    rng: &mut R,
) -> Result<VolumeEstimate<T>> {
    if samples == 0 {
        return invalid("union_volume_mc needs at least one sample");
    }
    let mut sampler = UnionSampler::new(balls)?;
    if sampler.total_volume() <= T::zero() {
        return Ok(VolumeEstimate { value: T::zero(), stderr: T::zero(), samples });
    }
    let mut acc = Welford::default();
    for _ in 0..samples {
        acc.push(sampler.draw(rng).to_f64().unwrap_or(f64::NAN));
    }
    let mut stderr = acc.stderr();
    if stderr == 0.0 && samples > 1 && any_overlap(balls) {
        stderr = sampler.total_volume().to_f64().unwrap_or(f64::NAN) / (2.0 * samples as f64);
    }
    Ok(VolumeEstimate { value: T::lit(acc.mean()), stderr: T::lit(stderr), samples })
}

fn any_overlap<T: Scalar>(balls: &[Ball<T>]) -> bool {
    balls.iter().enumerate().any(|(i, a)| {
        a.radius() > T::zero()
            && balls[i + 1..].iter().any(|b| {
                let reach = a.radius() + b.radius();
                b.radius() > T::zero() && dist2(a.center().coords(), b.center().coords()) < reach * reach
            })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn ball(c: &[f64], r: f64) -> Ball<f64> {
        Ball::new(Point::new(c.to_vec()).unwrap(), r).unwrap()
    }

    #[test]
    fn unit_volumes() {
        assert_abs_diff_eq!(unit_ball_volume::<f64>(1).unwrap(), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(unit_ball_volume::<f64>(2).unwrap(), PI, epsilon = 1e-14);
        assert_abs_diff_eq!(unit_ball_volume::<f64>(3).unwrap(), 4.0 * PI / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(unit_ball_volume::<f64>(4).unwrap(), PI * PI / 2.0, epsilon = 1e-13);
        assert!(unit_ball_volume::<f64>(0).is_err());
        assert!((unit_ball_volume::<f32>(2).unwrap() - std::f32::consts::PI).abs() < 1e-5);
    }

    #[test]
    fn identical_and_disjoint() {
        for d in 1..8 {
            let o = vec![0.0; d];
            let a = ball(&o, 1.0);
            let v = unit_ball_volume::<f64>(d).unwrap();
            assert_abs_diff_eq!(ball_intersection_volume(&a, &a).unwrap(), v, epsilon = 1e-12);
            let mut far = o.clone();
            far[0] = 2.0;
            assert_eq!(ball_intersection_volume(&a, &ball(&far, 1.0)).unwrap(), 0.0);
        }
    }

    #[test]
    fn lens_spot_values() {
        let a = ball(&[0.0, 0.0], 1.0);
        let b = ball(&[1.0, 0.0], 1.0);
        let got = ball_intersection_volume(&a, &b).unwrap();
        assert_abs_diff_eq!(got, 2.0 * PI / 3.0 - 3f64.sqrt() / 2.0, epsilon = 1e-12);
        let a = ball(&[0.0, 0.0, 0.0], 1.0);
        let b = ball(&[1.0, 0.0, 0.0], 1.0);
        let got = ball_intersection_volume(&a, &b).unwrap();
        assert_abs_diff_eq!(got, 5.0 * PI / 12.0, epsilon = 1e-12);
    }

    #[test]
    fn nested_and_zero_radius() {
        let a = ball(&[0.0, 0.0, 0.0], 2.0);
        let b = ball(&[0.5, 0.0, 0.0], 1.0);
        let v = unit_ball_volume::<f64>(3).unwrap();
        assert_abs_diff_eq!(ball_intersection_volume(&a, &b).unwrap(), v, epsilon = 1e-12);
        assert_abs_diff_eq!(two_ball_union_volume(&a, &b).unwrap(), 8.0 * v, epsilon = 1e-12);
        let z = ball(&[0.0, 0.0, 0.0], 0.0);
        assert_eq!(ball_intersection_volume(&a, &z).unwrap(), 0.0);
        assert_abs_diff_eq!(two_ball_union_volume(&a, &z).unwrap(), 8.0 * v, epsilon = 1e-12);
    }

    #[test]
    fn interval_union_in_one_dim() {
        let a = ball(&[1.0], 1.0);
        let b = ball(&[-0.5], 0.5);
        assert_abs_diff_eq!(two_ball_union_volume(&a, &b).unwrap(), 3.0, epsilon = 1e-14);
        assert_eq!(interval_union_length(&[(0.0, 1.0)]).unwrap(), 1.0);
        assert_eq!(interval_union_length(&[(0.0, 1.0), (0.5, 2.0)]).unwrap(), 2.0);
        assert_eq!(interval_union_length(&[(0.0, 1.0), (2.0, 3.0)]).unwrap(), 2.0);
        assert_eq!(interval_union_length::<f64>(&[]).unwrap(), 0.0);
        assert!(interval_union_length(&[(1.0, 0.0)]).is_err());
    }

    #[test]
    fn dimension_mismatch_errors() {
        let a = ball(&[0.0], 1.0);
        let b = ball(&[0.0, 0.0], 1.0);
        assert!(ball_intersection_volume(&a, &b).is_err());
        assert!(two_ball_union_volume(&a, &b).is_err());
        let mut rng = RandomStream::new(0, 0);
        assert!(union_volume_mc(&[a, b], 10, &mut rng).is_err());
        assert!(union_volume_mc::<f64, _>(&[], 10, &mut rng).is_err());
    }

    #[test]
    fn invalid_points_and_balls() {
        assert!(Point::<f64>::new(vec![]).is_err());
        assert!(Point::new(vec![f64::NAN]).is_err());
        assert!(Ball::new(Point::origin(2), -1.0f64).is_err());
    }

    #[test]
    fn single_ball_mc_is_exact() {
        let mut rng = RandomStream::new(3, 0);
        let b = ball(&[0.3, -0.2, 0.1], 0.7);
        let est = union_volume_mc(std::slice::from_ref(&b), 500, &mut rng).unwrap();
        assert_abs_diff_eq!(est.value, b.volume(), epsilon = 1e-14);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn zero_volume_union() {
        let mut rng = RandomStream::new(3, 0);
        let balls = [ball(&[0.0, 0.0], 0.0), ball(&[1.0, 0.0], 0.0)];
        let est = union_volume_mc(&balls, 100, &mut rng).unwrap();
        assert_eq!((est.value, est.stderr), (0.0, 0.0));
    }

    #[test]
    fn three_intervals_against_sweep() {
        let mut rng = RandomStream::new(11, 0);
        let balls = [ball(&[1.0], 1.0), ball(&[-0.5], 0.5), ball(&[-0.8], 0.8)];
        let est = union_volume_mc(&balls, 20_000, &mut rng).unwrap();
        let exact = interval_union_length(&[(0.0, 2.0), (-1.0, 0.0), (-1.6, 0.0)]).unwrap();
        assert_abs_diff_eq!(exact, 3.6, epsilon = 1e-14);
        assert!((est.value - exact).abs() <= 4.0 * est.stderr, "{est:?}");
    }

    #[test]
    fn f32_lens() {
        let geom = BallGeometry::<f32>::new(2);
        let got = geom.lens_volume(1.0, 1.0, 1.0);
        let want = (2.0 * PI / 3.0 - 3f64.sqrt() / 2.0) as f32;
        assert!((got - want).abs() < 1e-5);
    }

    #[test]
    fn unsampled_overlap_keeps_a_positive_stderr() {
        // lens far too thin for 50 draws to find
        let balls = [ball(&[0.0, 0.0], 1.0), ball(&[1.999_999, 0.0], 1.0)];
        let est = union_volume_mc(&balls, 50, &mut RandomStream::new(0, 0)).unwrap();
        assert!((est.stderr - 2.0 * PI / 100.0).abs() < 1e-12);
        let apart = [ball(&[0.0, 0.0], 1.0), ball(&[2.5, 0.0], 1.0)];
        let est = union_volume_mc(&apart, 50, &mut RandomStream::new(0, 0)).unwrap();
        assert_eq!(est.stderr, 0.0);
    }
}
