//! Empirical Voronoi-cell experiments.
//!
//! The cell `S_1` of a conditioned center `x` among `x, X_2, ..., X_n` is the
//! set of points whose nearest neighbor is `x` (ties to `x`). Its measure is
//! estimated by probes: `μ(S_1) = P{X_{n+1} ∈ S_1}` for a fresh `X_{n+1} ~ μ`.
//!
//! Two probe strategies are available:
//!
//! - [`ProbeStrategy::FromDensity`] draws probes from `μ` and counts hits.
//!   Only about `probes / n` of them land in the cell.
//! - [`ProbeStrategy::Localized`] draws probes uniformly in a ball
//!   `B_{x,ρ} ⊇ S_1` and weights each hit by `f(y) λ(B_{x,ρ})`. The radius
//!   comes from the cone cover: a point `y` in the cone of direction `u_j`
//!   whose nearest cone neighbor is at distance `R_j` can only belong to
//!   `S_1` if `‖y - x‖ <= R_j / (2 cos 2θ)`, `θ` the cone half-angle. When
//!   some cone is empty the estimator falls back to `FromDensity`.
//!
//! Both are unbiased for `μ(S_1)` given the point set.

use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::geometry::{dist2, norm2, BallGeometry, Point};
use crate::moments::{Estimate, MAX_FACTORIAL};
use crate::nn::{KdTree, NearestNeighbor};
use crate::parallel::map_indexed;
use crate::rng::RandomStream;
use crate::sampling::{fill_unit_ball, kronecker_generators, DensityModel};
use crate::stats::{ks_statistic_sorted, quantile_sorted, unbiased_powers, Welford};

/// Half-angle of each cone; the full aperture is `π/4`.
pub const CONE_HALF_ANGLE: f64 = PI / 8.0;
const CONE_VALIDATION_SAMPLES: usize = 100_000;
const CONE_VALIDATION_SEED: u64 = 0xc0_4e5;
// relative slack on the closed angular test, absorbs rounding on cone boundaries
const ANGLE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProbeStrategy {
    FromDensity,
    #[default]
    Localized,
}

/// Unit directions whose cones of half-angle `π/8` cover `R^d`.
///
/// `d = 1` gives `{+1, -1}` and `d = 2` the eight multiples of `π/4`. For
/// `d >= 3` a greedy net of angular radius `0.9 π/8` is drawn from a
/// low-discrepancy sphere point set, then checked against
/// 10^5 random unit vectors; any uncovered vector is added as a direction.
pub fn cone_directions(d: usize) -> Result<Vec<Point<f64>>> {
    if d == 0 {
        return invalid("dimension must be positive");
    }
    let dirs: Vec<Vec<f64>> = match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..8)
            .map(|i| {
                let (s, c) = (i as f64 * PI / 4.0).sin_cos();
                vec![c, s]
            })
            .collect(),
        _ => {
            let mut dirs = greedy_sphere_net(d, 0.9 * CONE_HALF_ANGLE);
            patch_cover(d, &mut dirs);
            dirs
        }
    };
    Ok(dirs.into_iter().map(Point::from_vec_unchecked).collect())
}

fn covered(dirs: &[Vec<f64>], v: &[f64], cos_radius: f64) -> bool {
    dirs.iter().any(|u| dot(u, v) >= cos_radius - ANGLE_SLACK)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn greedy_sphere_net(d: usize, radius: f64) -> Vec<Vec<f64>> {
    let candidates = (4096usize << d.min(6)).min(1 << 18);
    let gauss_dims = 2 * d.div_ceil(2);
    let lattice = kronecker_generators(gauss_dims);
    let cos_r = radius.cos();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    let mut g = vec![0.0; gauss_dims];
    for j in 1..=candidates {
        for pair in 0..gauss_dims / 2 {
            let u1 = 1.0 - (0.5 + j as f64 * lattice[2 * pair]).fract();
            let u2 = (0.5 + j as f64 * lattice[2 * pair + 1]).fract();
            let rho = (-2.0 * u1.ln()).sqrt();
            let (s, c) = (2.0 * PI * u2).sin_cos();
            g[2 * pair] = rho * c;
            g[2 * pair + 1] = rho * s;
        }
        let norm = norm2(&g[..d]).sqrt();
        if norm == 0.0 {
            continue;
        }
        let v: Vec<f64> = g[..d].iter().map(|x| x / norm).collect();
        if !covered(&dirs, &v, cos_r) {
            dirs.push(v);
        }
    }
    dirs
}

fn patch_cover(d: usize, dirs: &mut Vec<Vec<f64>>) {
    let mut rng = RandomStream::new(CONE_VALIDATION_SEED, d as u64);
    let cos_t = CONE_HALF_ANGLE.cos();
    let mut v = vec![0.0; d];
    for _ in 0..CONE_VALIDATION_SAMPLES {
        random_unit(&mut v, &mut rng);
        if !covered(dirs, &v, cos_t) {
            dirs.push(v.clone());
        }
    }
}

fn random_unit<R: Rng + ?Sized>(v: &mut [f64], rng: &mut R) {
    loop {
        v.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
        let n = norm2(v).sqrt();
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
            return;
        }
    }
}

/// Fraction of `samples` random unit vectors not covered by `directions`.
pub fn uncovered_fraction(directions: &[Point<f64>], samples: usize, seed: u64) -> f64 {
    let d = directions[0].dim();
    let dirs: Vec<Vec<f64>> = directions.iter().map(|p| p.coords().to_vec()).collect();
    let mut rng = RandomStream::new(seed, 0);
    let mut v = vec![0.0; d];
    let cos_t = CONE_HALF_ANGLE.cos();
    let misses = (0..samples)
        .filter(|_| {
            random_unit(&mut v, &mut rng);
            !covered(&dirs, &v, cos_t)
        })
        .count();
    misses as f64 / samples as f64
}

fn cone_radii_flat(x: &[f64], others: &[f64], dirs: &[Point<f64>]) -> Vec<f64> {
    let d = x.len();
    let cos_t = CONE_HALF_ANGLE.cos();
    let mut radii = vec![f64::INFINITY; dirs.len()];
    let mut v = vec![0.0; d];
    for p in others.chunks_exact(d) {
        for ((vi, &pi), &xi) in v.iter_mut().zip(p).zip(x) {
            *vi = pi - xi;
        }
        let r = norm2(&v).sqrt();
        // a copy of x never wins a tie against it, so it cannot bound the cell
        if r == 0.0 {
            continue;
        }
        for (radius, u) in radii.iter_mut().zip(dirs) {
            if r < *radius && dot(u.coords(), &v) >= cos_t * r * (1.0 - ANGLE_SLACK) {
                *radius = r;
            }
        }
    }
    radii
}

/// Per-cone nearest-neighbor distances `R_j` (infinite for empty cones).
pub fn cone_nn_radii(x: &Point<f64>, others: &[Point<f64>], directions: &[Point<f64>]) -> Result<Vec<f64>> {
    let flat = flatten_others(x, others)?;
    if let Some(u) = directions.iter().find(|u| u.dim() != x.dim()) {
        return invalid(format!("direction of dimension {} for a {}-dimensional center", u.dim(), x.dim()));
    }
    Ok(cone_radii_flat(x.coords(), &flat, directions))
}

fn flatten_others(x: &Point<f64>, others: &[Point<f64>]) -> Result<Vec<f64>> {
    let d = x.dim();
    let mut flat = Vec::with_capacity(others.len() * d);
    for p in others {
        if p.dim() != d {
            return invalid(format!("dimension mismatch: {} vs {}", d, p.dim()));
        }
        flat.extend_from_slice(p.coords());
    }
    Ok(flat)
}

/// Farthest-pair distance of row-major points, by branch and bound on the
/// distance to the centroid.
pub fn farthest_pair_distance(points: &[f64], dim: usize) -> f64 {
    let n = points.len() / dim;
    if n < 2 {
        return 0.0;
    }
    let mut centroid = vec![0.0; dim];
    for p in points.chunks_exact(dim) {
        centroid.iter_mut().zip(p).for_each(|(c, &x)| *c += x);
    }
    centroid.iter_mut().for_each(|c| *c /= n as f64);
    let mut order: Vec<(f64, usize)> = points
        .chunks_exact(dim)
        .enumerate()
        .map(|(i, p)| (dist2(p, &centroid).sqrt(), i))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut best2 = 0.0f64;
    for (a, &(ra, ia)) in order.iter().enumerate() {
        if 2.0 * ra <= best2.sqrt() {
            break;
        }
        for &(rb, ib) in &order[a + 1..] {
            if ra + rb <= best2.sqrt() {
                break;
            }
            best2 = best2.max(dist2(row(ia), row(ib)));
        }
    }
    best2.sqrt()
}

/// Bracket `lower <= diam(S_1) <= upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiameterBracket {
    pub lower: f64,
    pub upper: f64,
}

/// A point set with its center at position 0, ready for probing.
#[derive(Debug, Clone)]
pub struct CellProbe<'m> {
    model: &'m DensityModel,
    center: Vec<f64>,
    index: KdTree,
    radii: Vec<f64>,
    enclosing_radius: f64,
}

impl<'m> CellProbe<'m> {
    /// `others` is row-major; `directions` from [`cone_directions`].
    pub fn from_flat(model: &'m DensityModel, center: &[f64], others: &[f64], directions: &[Point<f64>]) -> Self {
        let d = center.len();
        let mut all = Vec::with_capacity(center.len() + others.len());
        all.extend_from_slice(center);
        all.extend_from_slice(others);
        let index = KdTree::from_flat(d, &all);
        let radii = cone_radii_flat(center, others, directions);
        let max_radius = radii.iter().copied().fold(0.0, f64::max);
        let reach = if d == 1 { 0.5 } else { 1.0 / (2.0 * (2.0 * CONE_HALF_ANGLE).cos()) };
        Self {
            model,
            center: center.to_vec(),
            index,
            radii,
            enclosing_radius: reach * max_radius,
        }
    }

    pub fn new(
        model: &'m DensityModel,
        x: &Point<f64>,
        others: &[Point<f64>],
        directions: &[Point<f64>],
    ) -> Result<Self> {
        if x.dim() != model.dim() {
            return invalid(format!("center has dimension {}, model has {}", x.dim(), model.dim()));
        }
        let flat = flatten_others(x, others)?;
        Ok(Self::from_flat(model, x.coords(), &flat, directions))
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn in_cell(&self, y: &[f64]) -> bool {
        self.index.nearest(y).0 == 0
    }

    pub fn cone_radii(&self) -> &[f64] {
        &self.radii
    }

    /// Radius of a ball around the center known to contain the cell
    /// (infinite if some cone is empty).
    pub fn enclosing_radius(&self) -> f64 {
        self.enclosing_radius
    }

    /// `√d · max_j R_j`.
    pub fn diameter_upper_bound(&self) -> f64 {
        (self.dim() as f64).sqrt() * self.radii.iter().copied().fold(0.0, f64::max)
    }

    /// Per-probe unbiased contributions to `μ(S_1)`.
    pub fn measure_draws<R: Rng + ?Sized>(
        &self,
        strategy: ProbeStrategy,
        probes: usize,
        rng: &mut R,
        out: &mut Vec<f64>,
    ) {
        out.clear();
        let mut y = vec![0.0; self.dim()];
        if strategy == ProbeStrategy::FromDensity || !self.enclosing_radius.is_finite() {
            for _ in 0..probes {
                self.model.sample_into(&mut y, rng);
                out.push(if self.in_cell(&y) { 1.0 } else { 0.0 });
            }
            return;
        }
        let rho = self.enclosing_radius;
        let ball_volume = BallGeometry::<f64>::new(self.dim()).volume(rho);
        for _ in 0..probes {
            self.local_probe(rho, &mut y, rng);
            let w = if self.in_cell(&y) { self.model.pdf(&y) * ball_volume } else { 0.0 };
            out.push(w);
        }
    }

    fn local_probe<R: Rng + ?Sized>(&self, rho: f64, y: &mut [f64], rng: &mut R) {
        fill_unit_ball(y, rng);
        for (yi, &ci) in y.iter_mut().zip(&self.center) {
            *yi = ci + rho * *yi;
        }
    }

    pub fn measure<R: Rng + ?Sized>(&self, strategy: ProbeStrategy, probes: usize, rng: &mut R) -> (f64, f64) {
        let mut draws = Vec::with_capacity(probes);
        self.measure_draws(strategy, probes, rng, &mut draws);
        let mut acc = Welford::default();
        draws.iter().for_each(|&w| acc.push(w));
        (acc.mean(), acc.stderr())
    }

    /// Probe-based lower bound and cone-based upper bound on `diam(S_1)`.
    pub fn diameter<R: Rng + ?Sized>(&self, strategy: ProbeStrategy, probes: usize, rng: &mut R) -> DiameterBracket {
        let d = self.dim();
        let mut y = vec![0.0; d];
        let mut hits = Vec::new();
        let localized = strategy == ProbeStrategy::Localized && self.enclosing_radius.is_finite();
        for _ in 0..probes {
            if localized {
                self.local_probe(self.enclosing_radius, &mut y, rng);
                if !self.model.in_support(&y) {
                    continue;
                }
            } else {
                self.model.sample_into(&mut y, rng);
            }
            if self.in_cell(&y) {
                hits.extend_from_slice(&y);
            }
        }
        let upper = self.diameter_upper_bound();
        DiameterBracket { lower: farthest_pair_distance(&hits, d).min(upper), upper }
    }
}

fn check_center(model: &DensityModel, x: &Point<f64>) -> Result<()> {
    if x.dim() != model.dim() {
        return invalid(format!("center has dimension {}, model has {}", x.dim(), model.dim()));
    }
    if !model.in_support(x.coords()) {
        return invalid("conditioning point lies outside the support of the density");
    }
    Ok(())
}

/// Fraction of `probes` draws from `μ` whose nearest neighbor among
/// `{x} ∪ others` is `x`.
pub fn estimate_cell_measure(
    x: &Point<f64>,
    others: &[Point<f64>],
    model: &DensityModel,
    probes: usize,
    rng: &mut RandomStream,
) -> Result<Estimate> {
    if probes == 0 {
        return invalid("probes must be >= 1");
    }
    let started = Instant::now();
    let cell = CellProbe::new(model, x, others, &[])?;
    let (value, stderr) = cell.measure(ProbeStrategy::FromDensity, probes, rng);
    Ok(Estimate {
        value,
        stderr,
        samples: probes as u64,
        seed: rng.seed(),
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// Localized importance-probe estimate of `μ(S_1)`; see the module docs.
pub fn estimate_cell_measure_localized(
    x: &Point<f64>,
    others: &[Point<f64>],
    model: &DensityModel,
    probes: usize,
    rng: &mut RandomStream,
) -> Result<Estimate> {
    if probes == 0 {
        return invalid("probes must be >= 1");
    }
    let started = Instant::now();
    let dirs = cone_directions(x.dim())?;
    let cell = CellProbe::new(model, x, others, &dirs)?;
    let (value, stderr) = cell.measure(ProbeStrategy::Localized, probes, rng);
    Ok(Estimate {
        value,
        stderr,
        samples: probes as u64,
        seed: rng.seed(),
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// `lower`: farthest pair among the probes from `μ` that land in `S_1`;
/// `upper`: `√d · max_j R_j`.
pub fn estimate_cell_diameter(
    x: &Point<f64>,
    others: &[Point<f64>],
    model: &DensityModel,
    probes: usize,
    rng: &mut RandomStream,
) -> Result<DiameterBracket> {
    if probes < 2 {
        return invalid("probes must be >= 2");
    }
    let dirs = cone_directions(x.dim())?;
    let cell = CellProbe::new(model, x, others, &dirs)?;
    Ok(cell.diameter(ProbeStrategy::FromDensity, probes, rng))
}

#[derive(Debug, Clone)]
pub struct CellExperimentConfig {
    pub model: DensityModel,
    pub x: Point<f64>,
    pub n: usize,
    pub replicates: usize,
    pub probes: usize,
    pub k_max: usize,
    pub seed: u64,
    pub workers: usize,
    pub strategy: ProbeStrategy,
}

impl CellExperimentConfig {
    pub fn new(model: DensityModel, x: Point<f64>, n: usize) -> Self {
        Self {
            model,
            x,
            n,
            replicates: 2000,
            probes: 5000,
            k_max: 4,
            seed: 0,
            workers: 1,
            strategy: ProbeStrategy::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        check_center(&self.model, &self.x)?;
        if self.n == 0 || self.replicates == 0 || self.probes == 0 || self.workers == 0 {
            return invalid("n, replicates, probes and workers must be >= 1");
        }
        if self.k_max == 0 || self.k_max > MAX_FACTORIAL {
            return invalid(format!("k_max must be in 1..={MAX_FACTORIAL}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub k: usize,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone)]
pub struct CellExperimentResult {
    pub config: CellExperimentConfig,
    pub replicates: usize,
    /// `n μ̂(S_1)` per replicate, in replicate order.
    pub scaled_measures: Vec<f64>,
    /// Estimates of `E[(n μ(S_1))^k]`, `k = 1..=k_max`, unbiased per replicate.
    pub moments: Vec<MomentEstimate>,
    /// Sorted copy of `scaled_measures`.
    pub ecdf: Vec<f64>,
    pub elapsed_ms: f64,
}

impl CellExperimentResult {
    pub fn moment(&self, k: usize) -> Option<&MomentEstimate> {
        self.moments.iter().find(|m| m.k == k)
    }

    pub fn ks_distance(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        ks_statistic_sorted(&self.ecdf, cdf)
    }

    /// Empirical `E[e^{s n μ̂}]` and its standard error.
    pub fn mgf(&self, s: f64) -> (f64, f64) {
        let mut acc = Welford::default();
        self.scaled_measures.iter().for_each(|&z| acc.push((s * z).exp()));
        (acc.mean(), acc.stderr())
    }
}

fn sample_others(model: &DensityModel, count: usize, rng: &mut RandomStream) -> Vec<f64> {
    let d = model.dim();
    let mut flat = vec![0.0; count * d];
    for row in flat.chunks_exact_mut(d) {
        model.sample_into(row, rng);
    }
    flat
}

/// Replicates `X_2..X_n ~ μ` around the fixed center and records `n μ̂(S_1)`.
pub fn run_cell_experiment(config: &CellExperimentConfig) -> Result<CellExperimentResult> {
    config.validate()?;
    let started = Instant::now();
    let d = config.model.dim();
    let dirs = match config.strategy {
        ProbeStrategy::Localized => cone_directions(d)?,
        ProbeStrategy::FromDensity => Vec::new(),
    };
    let n = config.n as f64;
    let per_replicate = map_indexed(config.replicates, config.workers, |r| {
        let mut rng = RandomStream::new(config.seed, r as u64);
        let others = sample_others(&config.model, config.n - 1, &mut rng);
        let cell = CellProbe::from_flat(&config.model, config.x.coords(), &others, &dirs);
        let mut draws = Vec::with_capacity(config.probes);
        cell.measure_draws(config.strategy, config.probes, &mut rng, &mut draws);
        let powers = unbiased_powers(&draws, config.k_max);
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        (n * mean, powers)
    });
    let mut accs = vec![Welford::default(); config.k_max];
    let mut scaled = Vec::with_capacity(config.replicates);
    for (z, powers) in per_replicate {
        scaled.push(z);
        for (k, (acc, p)) in accs.iter_mut().zip(powers).enumerate() {
            // a single probe cannot estimate higher powers; fall back to the plug-in
            let p = if p.is_finite() { p } else { (z / n).powi(k as i32 + 1) };
            acc.push(n.powi(k as i32 + 1) * p);
        }
    }
    let moments = accs
        .iter()
        .enumerate()
        .map(|(i, acc)| MomentEstimate { k: i + 1, value: acc.mean(), stderr: acc.stderr() })
        .collect();
    let mut ecdf = scaled.clone();
    ecdf.sort_by(f64::total_cmp);
    Ok(CellExperimentResult {
        config: config.clone(),
        replicates: config.replicates,
        scaled_measures: scaled,
        moments,
        ecdf,
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

pub const DIAMETER_QUANTILES: [f64; 3] = [0.5, 0.9, 0.99];

#[derive(Debug, Clone)]
pub struct DiameterExperimentConfig {
    pub model: DensityModel,
    pub x: Point<f64>,
    pub n_grid: Vec<usize>,
    pub t_grid: Vec<f64>,
    pub replicates: usize,
    pub probes: usize,
    pub seed: u64,
    pub workers: usize,
    pub strategy: ProbeStrategy,
}

impl DiameterExperimentConfig {
    fn validate(&self) -> Result<()> {
        check_center(&self.model, &self.x)?;
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) || self.n_grid[0] == 0 {
            return invalid("n_grid must be a nonempty strictly increasing list of positive counts");
        }
        if self.replicates == 0 || self.probes < 2 || self.workers == 0 {
            return invalid("replicates and workers must be >= 1 and probes >= 2");
        }
        if self.t_grid.iter().any(|t| !t.is_finite()) {
            return invalid("t_grid entries must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Exceedance {
    pub t: f64,
    /// `P{n^{1/d} lower >= t}`, a lower bound on the true exceedance.
    pub lower: f64,
    /// `P{n^{1/d} upper >= t}`, an upper bound on the true exceedance.
    pub upper: f64,
}

#[derive(Debug, Clone)]
pub struct DiameterAtN {
    pub n: usize,
    /// `n^{1/d}` times the lower / upper estimates, per replicate.
    pub scaled_lower: Vec<f64>,
    pub scaled_upper: Vec<f64>,
    /// Quantiles at [`DIAMETER_QUANTILES`] of the sorted scaled estimates.
    pub lower_quantiles: [f64; 3],
    pub upper_quantiles: [f64; 3],
    pub exceedance: Vec<Exceedance>,
}

#[derive(Debug, Clone)]
pub struct DiameterResult {
    pub config: DiameterExperimentConfig,
    pub per_n: Vec<DiameterAtN>,
    pub elapsed_ms: f64,
}

fn quantiles(sorted: &[f64]) -> [f64; 3] {
    DIAMETER_QUANTILES.map(|q| quantile_sorted(sorted, q))
}

fn exceed(sorted: &[f64], t: f64) -> f64 {
    let below = sorted.partition_point(|&v| v < t);
    (sorted.len() - below) as f64 / sorted.len() as f64
}

/// For each `n` in the grid, `replicates` brackets of `n^{1/d} diam(S_1)`.
pub fn run_diameter_experiment(config: &DiameterExperimentConfig) -> Result<DiameterResult> {
    config.validate()?;
    let started = Instant::now();
    let d = config.model.dim();
    let dirs = cone_directions(d)?;
    let mut per_n = Vec::with_capacity(config.n_grid.len());
    for (g, &n) in config.n_grid.iter().enumerate() {
        let scale = (n as f64).powf(1.0 / d as f64);
        let brackets = map_indexed(config.replicates, config.workers, |r| {
            let mut rng = RandomStream::new(config.seed, ((g as u64) << 32) | r as u64);
            let others = sample_others(&config.model, n - 1, &mut rng);
            let cell = CellProbe::from_flat(&config.model, config.x.coords(), &others, &dirs);
            cell.diameter(config.strategy, config.probes, &mut rng)
        });
        let mut lower: Vec<f64> = brackets.iter().map(|b| scale * b.lower).collect();
        let mut upper: Vec<f64> = brackets.iter().map(|b| scale * b.upper).collect();
        let mut lower_sorted = lower.clone();
        let mut upper_sorted = upper.clone();
        lower_sorted.sort_by(f64::total_cmp);
        upper_sorted.sort_by(f64::total_cmp);
        let exceedance = config
            .t_grid
            .iter()
            .map(|&t| Exceedance { t, lower: exceed(&lower_sorted, t), upper: exceed(&upper_sorted, t) })
            .collect();
        per_n.push(DiameterAtN {
            n,
            lower_quantiles: quantiles(&lower_sorted),
            upper_quantiles: quantiles(&upper_sorted),
            scaled_lower: std::mem::take(&mut lower),
            scaled_upper: std::mem::take(&mut upper),
            exceedance,
        });
    }
    Ok(DiameterResult { config: config.clone(), per_n, elapsed_ms: started.elapsed().as_secs_f64() * 1e3 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[f64]) -> Point<f64> {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn cone_directions_low_dims() {
        let d1 = cone_directions(1).unwrap();
        assert_eq!(d1, vec![p(&[1.0]), p(&[-1.0])]);
        let d2 = cone_directions(2).unwrap();
        assert_eq!(d2.len(), 8);
        // angular sweep: every angle within π/8 of some direction
        let worst = (0..=100_000)
            .map(|i| {
                let a = i as f64 / 100_000.0 * 2.0 * PI;
                d2.iter()
                    .map(|u| {
                        let c = u.coords()[0] * a.cos() + u.coords()[1] * a.sin();
                        c.clamp(-1.0, 1.0).acos()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        assert!(worst <= CONE_HALF_ANGLE + 1e-9, "worst gap {worst}");
        assert!(cone_directions(0).is_err());
    }

    #[test]
    fn cone_directions_three_dims_cover() {
        let dirs = cone_directions(3).unwrap();
        assert!(dirs.iter().all(|u| (u.norm() - 1.0).abs() < 1e-12));
        assert_eq!(uncovered_fraction(&dirs, 100_000, 77), 0.0);
    }

    #[test]
    fn cone_radii_examples() {
        let dirs = cone_directions(1).unwrap();
        let radii = cone_nn_radii(&p(&[0.0]), &[p(&[0.3]), p(&[-0.7])], &dirs).unwrap();
        assert_eq!(radii, vec![0.3, 0.7]);
        let radii = cone_nn_radii(&p(&[0.0]), &[], &dirs).unwrap();
        assert!(radii.iter().all(|r| r.is_infinite()));
        // a point at angle exactly π/8 from the x-axis sits on the boundary of
        // the cones around 0 and π/4
        let dirs = cone_directions(2).unwrap();
        let (s, c) = CONE_HALF_ANGLE.sin_cos();
        let radii = cone_nn_radii(&p(&[0.0, 0.0]), &[p(&[c, s])], &dirs).unwrap();
        assert!((radii[0] - 1.0).abs() < 1e-15 && (radii[1] - 1.0).abs() < 1e-15);
        assert!(radii[2..].iter().all(|r| r.is_infinite()));
    }

    #[test]
    fn cell_measure_trivial_and_d1() {
        let model = DensityModel::parse("uniform-ball:r=1", 1).unwrap();
        let mut rng = RandomStream::new(1, 0);
        let est = estimate_cell_measure(&p(&[0.0]), &[], &model, 1000, &mut rng).unwrap();
        assert_eq!(est.value, 1.0);
        let probes = 40_000;
        let est = estimate_cell_measure(&p(&[0.0]), &[p(&[0.5]), p(&[-0.5])], &model, probes, &mut rng).unwrap();
        let sigma = (0.25f64 * 0.75 / probes as f64).sqrt();
        assert!((est.value - 0.25).abs() <= 4.0 * sigma, "{est:?}");
        let est =
            estimate_cell_measure_localized(&p(&[0.0]), &[p(&[0.5]), p(&[-0.5])], &model, probes, &mut rng).unwrap();
        // the enclosing interval is exactly the cell here
        assert!((est.value - 0.25).abs() < 1e-12, "{est:?}");
        let est = estimate_cell_measure(&p(&[5.0]), &[], &model, 0, &mut rng);
        assert!(est.is_err());
    }

    #[test]
    fn probe_fractions_partition() {
        let model = DensityModel::parse("gaussian", 2).unwrap();
        let mut rng = RandomStream::new(3, 0);
        let points: Vec<Point<f64>> = (0..25).map(|_| model.sample(&mut rng)).collect();
        let probes: Vec<Point<f64>> = (0..3000).map(|_| model.sample(&mut rng)).collect();
        let index = crate::nn::build_nn_index(&points).unwrap();
        let mut counts = vec![0usize; points.len()];
        for q in &probes {
            counts[index.nearest(q.coords()).0] += 1;
        }
        let hits: usize = counts.iter().sum();
        assert_eq!(hits as f64 / probes.len() as f64, 1.0);
        assert!(counts[0] > 0);
    }

    #[test]
    fn diameter_d1_example() {
        let model = DensityModel::parse("uniform-ball:r=1", 1).unwrap();
        let mut rng = RandomStream::new(4, 0);
        let b = estimate_cell_diameter(&p(&[0.0]), &[p(&[0.5]), p(&[-0.5])], &model, 20_000, &mut rng).unwrap();
        assert!((b.upper - 0.5).abs() < 1e-15);
        assert!(b.lower <= b.upper && b.lower > 0.49, "{b:?}");
        let b = estimate_cell_diameter(&p(&[0.0]), &[], &model, 100, &mut rng).unwrap();
        assert!(b.upper.is_infinite() && b.lower <= 2.0);
        assert!(estimate_cell_diameter(&p(&[0.0]), &[], &model, 1, &mut rng).is_err());
    }

    #[test]
    fn farthest_pair_matches_brute_force() {
        let mut rng = RandomStream::new(6, 0);
        for d in 1..4 {
            let pts: Vec<f64> = (0..300 * d).map(|_| rng.random::<f64>()).collect();
            let mut brute = 0.0f64;
            for i in 0..300 {
                for j in i + 1..300 {
                    brute = brute.max(dist2(&pts[i * d..(i + 1) * d], &pts[j * d..(j + 1) * d]));
                }
            }
            assert!((farthest_pair_distance(&pts, d) - brute.sqrt()).abs() < 1e-14);
        }
        assert_eq!(farthest_pair_distance(&[1.0, 2.0], 2), 0.0);
    }

    #[test]
    fn experiment_rejects_center_outside_support() {
        let model = DensityModel::parse("uniform-ball:r=1", 2).unwrap();
        let cfg = CellExperimentConfig::new(model, p(&[2.0, 0.0]), 10);
        assert!(run_cell_experiment(&cfg).is_err());
    }
}
