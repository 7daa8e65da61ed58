//! Uniform sampling in balls and the shipped density models.
//!
//! Density specifications follow the grammar `uniform-ball:r=<real>`,
//! `gaussian` and `uniform-cube:side=<real>`. Balls and cubes are centered at
//! the origin; `gaussian` is the standard normal law on `R^d`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::geometry::{norm2, BallGeometry, Point};
use crate::rng::RandomStream;
use crate::scalar::Scalar;
use crate::special::{ln_gamma, reg_lower_gamma};

/// Fills `buf` with a uniform draw from the unit ball of dimension `buf.len()`.
///
/// Direction from an isotropic Gaussian vector, norm `U^{1/d}`.
pub fn fill_unit_ball<T: Scalar, R: Rng + ?Sized>(buf: &mut [T], rng: &mut R) {
    let d = buf.len();
    loop {
        let mut ss = 0.0f64;
        for slot in buf.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            ss += g * g;
            *slot = T::lit(g);
        }
        if ss > 0.0 {
            let u: f64 = rng.random();
            let scale = u.powf(1.0 / d as f64) / ss.sqrt();
            let scale = T::lit(scale);
            buf.iter_mut().for_each(|x| *x = *x * scale);
            return;
        }
    }
}

pub fn sample_unit_ball<T: Scalar, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Point<T>> {
    if dim == 0 {
        return invalid("dimension must be positive");
    }
    let mut coords = vec![T::zero(); dim];
    fill_unit_ball(&mut coords, rng);
    Ok(Point::from_vec_unchecked(coords))
}

/// Density family, parsed from and rendered to its text grammar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityKind {
    UniformBall { radius: f64 },
    Gaussian,
    UniformCube { side: f64 },
}

impl fmt::Display for DensityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityKind::UniformBall { radius } => write!(f, "uniform-ball:r={radius}"),
            DensityKind::Gaussian => write!(f, "gaussian"),
            DensityKind::UniformCube { side } => write!(f, "uniform-cube:side={side}"),
        }
    }
}

fn positive_param(spec: &str, rest: Option<&str>, key: &str) -> Result<f64> {
    let Some(rest) = rest else {
        return invalid(format!("density `{spec}` needs `:{key}=<real>`"));
    };
    let Some(value) = rest.strip_prefix(key).and_then(|r| r.strip_prefix('=')) else {
        return invalid(format!("density `{spec}`: expected `{key}=<real>`"));
    };
    match value.trim().parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => invalid(format!("density `{spec}`: `{key}` must be a positive real")),
    }
}

impl FromStr for DensityKind {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (name, rest) = match spec.split_once(':') {
            Some((n, r)) => (n, Some(r.trim())),
            None => (spec, None),
        };
        match name {
            "uniform-ball" => Ok(DensityKind::UniformBall { radius: positive_param(spec, rest, "r")? }),
            "uniform-cube" => Ok(DensityKind::UniformCube { side: positive_param(spec, rest, "side")? }),
            "gaussian" if rest.is_none() => Ok(DensityKind::Gaussian),
            "gaussian" => invalid("density `gaussian` takes no parameters"),
            _ => invalid(format!("unknown density `{spec}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallMeasureMode {
    Exact,
    Numeric,
}

/// `μ(B_{x,r})` with an error estimate (zero for exact oracles).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallMeasure {
    pub value: f64,
    pub error: f64,
}

/// A sampleable density on `R^d` with a ball-measure oracle.
#[derive(Debug, Clone)]
pub struct DensityModel {
    kind: DensityKind,
    dim: usize,
    geom: BallGeometry<f64>,
}

const QMC_SHIFTS: usize = 10;
const QMC_NODES_PER_SHIFT: usize = 10_000;
const QMC_SEED: u64 = 0x0000_ba11_c0de;
const CHI2_TOL: f64 = 1e-14;

impl DensityModel {
    pub fn new(kind: DensityKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return invalid("dimension must be positive");
        }
        match kind {
            DensityKind::UniformBall { radius: p } | DensityKind::UniformCube { side: p }
                if !(p > 0.0 && p.is_finite()) =>
            {
                return invalid(format!("density parameter must be a positive real, got {p}"));
            }
            _ => {}
        }
        Ok(Self { kind, dim, geom: BallGeometry::new(dim) })
    }

    pub fn parse(spec: &str, dim: usize) -> Result<Self> {
        Self::new(spec.parse()?, dim)
    }

    pub fn kind(&self) -> DensityKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ball_measure_mode(&self) -> BallMeasureMode {
        match self.kind {
            DensityKind::UniformCube { .. } => BallMeasureMode::Numeric,
            _ => BallMeasureMode::Exact,
        }
    }

    pub fn pdf(&self, y: &[f64]) -> f64 {
        match self.kind {
            DensityKind::UniformBall { radius } => {
                if norm2(y) <= radius * radius {
                    1.0 / self.geom.volume(radius)
                } else {
                    0.0
                }
            }
            DensityKind::Gaussian => {
                let d = self.dim as f64;
                (-0.5 * norm2(y) - 0.5 * d * std::f64::consts::TAU.ln()).exp()
            }
            DensityKind::UniformCube { side } => {
                if y.iter().all(|c| c.abs() <= side / 2.0) {
                    side.powi(-(self.dim as i32))
                } else {
                    0.0
                }
            }
        }
    }

    /// Whether `y` lies in the (closed) support.
    pub fn in_support(&self, y: &[f64]) -> bool {
        match self.kind {
            DensityKind::UniformBall { radius } => norm2(y) <= radius * radius,
            DensityKind::Gaussian => true,
            DensityKind::UniformCube { side } => y.iter().all(|c| c.abs() <= side / 2.0),
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, out: &mut [f64], rng: &mut R) {
        debug_assert_eq!(out.len(), self.dim);
        match self.kind {
            DensityKind::UniformBall { radius } => {
                fill_unit_ball(out, rng);
                out.iter_mut().for_each(|c| *c *= radius);
            }
            DensityKind::Gaussian => out.iter_mut().for_each(|c| *c = rng.sample(StandardNormal)),
            DensityKind::UniformCube { side } => {
                out.iter_mut().for_each(|c| *c = side * (rng.random::<f64>() - 0.5))
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point<f64> {
        let mut coords = vec![0.0; self.dim];
        self.sample_into(&mut coords, rng);
        Point::from_vec_unchecked(coords)
    }

    /// `μ(B_{center, radius})`.
    pub fn ball_measure(&self, center: &[f64], radius: f64) -> Result<BallMeasure> {
        if center.len() != self.dim {
            return invalid(format!("center has dimension {}, model has {}", center.len(), self.dim));
        }
        if !(radius >= 0.0) {
            return invalid(format!("ball radius must be >= 0, got {radius}"));
        }
        if radius == 0.0 {
            return Ok(BallMeasure { value: 0.0, error: 0.0 });
        }
        let exact = |value: f64| Ok(BallMeasure { value: value.clamp(0.0, 1.0), error: 0.0 });
        match self.kind {
            DensityKind::UniformBall { radius: support } => {
                if radius.is_infinite() {
                    return exact(1.0);
                }
                let distance = norm2(center).sqrt();
                let lens = self.geom.lens_volume(radius, support, distance);
                exact(lens / self.geom.volume(support))
            }
            DensityKind::Gaussian => exact(noncentral_chi2_cdf(radius * radius, self.dim, norm2(center))?),
            DensityKind::UniformCube { side } => Ok(self.cube_ball_measure(center, radius, side)),
        }
    }

    // Randomly shifted rank-1 lattice (Kronecker) nodes mapped into the ball;
    // the error is the standard error across independent shifts.
    fn cube_ball_measure(&self, center: &[f64], radius: f64, side: f64) -> BallMeasure {
        let half = side / 2.0;
        let gap2: f64 = center.iter().map(|c| (c.abs() - half).max(0.0).powi(2)).sum();
        if gap2 >= radius * radius {
            return BallMeasure { value: 0.0, error: 0.0 };
        }
        let far2: f64 = center.iter().map(|c| (c.abs() + half).powi(2)).sum();
        if far2 <= radius * radius {
            return BallMeasure { value: 1.0, error: 0.0 };
        }
        let ball_fraction = (self.geom.volume(radius) / side.powi(self.dim as i32)).min(f64::MAX);
        if center.iter().all(|c| c.abs() + radius <= half) {
            return BallMeasure { value: ball_fraction.min(1.0), error: 0.0 };
        }
        let d = self.dim;
        let gauss_dims = 2 * d.div_ceil(2);
        let lattice = kronecker_generators(gauss_dims + 1);
        let mut shifts_rng = RandomStream::new(QMC_SEED, 0);
        let mut std_normals = vec![0.0; gauss_dims];
        let mut y = vec![0.0; d];
        let mut per_shift = crate::stats::Welford::default();
        for _ in 0..QMC_SHIFTS {
            let shift: Vec<f64> = (0..lattice.len()).map(|_| shifts_rng.random()).collect();
            let mut inside = 0usize;
            for j in 0..QMC_NODES_PER_SHIFT {
                let u = |i: usize| (shift[i] + j as f64 * lattice[i]).fract();
                for pair in 0..gauss_dims / 2 {
                    let u1 = 1.0 - u(2 * pair);
                    let u2 = u(2 * pair + 1);
                    let rho = (-2.0 * u1.ln()).sqrt();
                    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
                    std_normals[2 * pair] = rho * c;
                    std_normals[2 * pair + 1] = rho * s;
                }
                let g = &std_normals[..d];
                let gn = norm2(g).sqrt();
                if gn == 0.0 {
                    continue;
                }
                let scale = radius * u(gauss_dims).powf(1.0 / d as f64) / gn;
                for ((yi, &ci), &gi) in y.iter_mut().zip(center).zip(g) {
                    *yi = ci + scale * gi;
                }
                if y.iter().all(|c| c.abs() <= half) {
                    inside += 1;
                }
            }
            per_shift.push(inside as f64 / QMC_NODES_PER_SHIFT as f64);
        }
        BallMeasure {
            value: (ball_fraction * per_shift.mean()).clamp(0.0, 1.0),
            error: ball_fraction * per_shift.stderr(),
        }
    }
}

// Generators of the R_s sequence: frac(φ_s^{-(i+1)}) with φ_s the positive
// root of x^{s+1} = x + 1.
pub(crate) fn kronecker_generators(s: usize) -> Vec<f64> {
    let mut phi = 2.0f64;
    for _ in 0..64 {
        let f = phi.powi(s as i32 + 1) - phi - 1.0;
        let df = (s as f64 + 1.0) * phi.powi(s as i32) - 1.0;
        phi -= f / df;
    }
    (1..=s).map(|i| phi.powi(-(i as i32)).fract()).collect()
}

pub fn density_sample<R: Rng + ?Sized>(model: &DensityModel, rng: &mut R) -> Point<f64> {
    model.sample(rng)
}

pub fn density_ball_measure(model: &DensityModel, center: &Point<f64>, radius: f64) -> Result<BallMeasure> {
    model.ball_measure(center.coords(), radius)
}

/// Distribution function of the noncentral chi-square law with `dof`
/// degrees of freedom and noncentrality `lambda`, evaluated at `x`.
///
/// Poisson mixture of central chi-square CDFs, summed outward from the
/// Poisson mode until the neglected weight is below `1e-14`.
pub fn noncentral_chi2_cdf(x: f64, dof: usize, lambda: f64) -> Result<f64> {
    if dof == 0 {
        return invalid("chi-square needs at least one degree of freedom");
    }
    if !(lambda >= 0.0) {
        return invalid(format!("noncentrality must be >= 0, got {lambda}"));
    }
    if !(x > 0.0) {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let half_dof = dof as f64 / 2.0;
    let half_x = x / 2.0;
    if lambda == 0.0 {
        return reg_lower_gamma(half_dof, half_x);
    }
    let m = lambda / 2.0;
    let weight = |j: usize| (-m + j as f64 * m.ln() - ln_gamma(j as f64 + 1.0)).exp();
    let mode = m.floor() as usize;
    let mut total = 0.0;
    let mut mass = 0.0;
    let mut j = mode;
    loop {
        let w = weight(j);
        total += w * reg_lower_gamma(half_dof + j as f64, half_x)?;
        mass += w;
        if j == 0 || w < CHI2_TOL {
            break;
        }
        j -= 1;
    }
    let mut j = mode + 1;
    loop {
        let w = weight(j);
        let p = reg_lower_gamma(half_dof + j as f64, half_x)?;
        total += w * p;
        mass += w;
        // terms are bounded by the remaining Poisson mass
        if (w < CHI2_TOL && j as f64 > m) || p * (1.0 - mass).max(0.0) < CHI2_TOL {
            break;
        }
        j += 1;
    }
    Ok(total.clamp(0.0, 1.0))
}
