//! Dispatch from a validated config to the library estimators.

use std::time::Instant;

use rand::Rng;
use vorocell::cellsim::{run_cell_experiment, run_diameter_experiment, CellExperimentConfig, DiameterExperimentConfig};
use vorocell::geometry::{interval_union_length, two_ball_union_volume, union_volume_mc};
use vorocell::moments::{alpha_bounds, estimate_alpha_parallel, estimate_z_moment_parallel, z_moment_bounds};
use vorocell::parallel::map_indexed;
use vorocell::sampling::DensityModel;
use vorocell::stats::quantile_sorted;
use vorocell::{Ball, Point, RandomStream};

use crate::config::{Command, ExperimentConfig};
use crate::output::ResultRow;

const UNION_SIGMAS: f64 = 4.0;

pub fn run(cfg: &ExperimentConfig) -> vorocell::Result<Vec<ResultRow>> {
    match cfg.command {
        Command::Alpha => run_alpha(cfg),
        Command::ZMoments => run_zmoments(cfg),
        Command::Cell => run_cell(cfg),
        Command::Diam => run_diam(cfg),
        Command::UnionVolCheck => run_union_check(cfg),
    }
}

fn row(cfg: &ExperimentConfig, k: Option<usize>, n: Option<usize>) -> ResultRow {
    ResultRow {
        command: cfg.command,
        d: cfg.dim,
        k,
        n,
        estimate: f64::NAN,
        stderr: f64::NAN,
        lower_bound: f64::NAN,
        upper_bound: f64::NAN,
        seed: cfg.seed,
        samples: cfg.samples,
        elapsed_ms: 0.0,
    }
}

fn run_alpha(cfg: &ExperimentConfig) -> vorocell::Result<Vec<ResultRow>> {
    let est = estimate_alpha_parallel(cfg.dim, cfg.samples, cfg.seed, cfg.workers)?;
    let bounds = alpha_bounds(cfg.dim)?;
    Ok(vec![ResultRow {
        estimate: est.value,
        stderr: est.stderr,
        lower_bound: bounds.lower,
        upper_bound: bounds.upper,
        elapsed_ms: est.elapsed_ms,
        ..row(cfg, None, None)
    }])
}

fn run_zmoments(cfg: &ExperimentConfig) -> vorocell::Result<Vec<ResultRow>> {
    (1..=cfg.k_max)
        .map(|k| {
            let est = estimate_z_moment_parallel(cfg.dim, k, cfg.samples, cfg.inner_samples, cfg.seed, cfg.workers)?;
            let bounds = z_moment_bounds(cfg.dim, k)?;
            Ok(ResultRow {
                estimate: est.value,
                stderr: est.stderr,
                lower_bound: bounds.lower,
                upper_bound: bounds.upper,
                elapsed_ms: est.elapsed_ms,
                ..row(cfg, Some(k), None)
            })
        })
        .collect()
}

fn model_and_center(cfg: &ExperimentConfig) -> vorocell::Result<(DensityModel, Point)> {
    let model = DensityModel::new(cfg.density, cfg.dim)?;
    let x = Point::new(cfg.x.coords(cfg.dim))?;
    Ok((model, x))
}

fn run_cell(cfg: &ExperimentConfig) -> vorocell::Result<Vec<ResultRow>> {
    let (model, x) = model_and_center(cfg)?;
    let mut exp = CellExperimentConfig::new(model, x, cfg.n);
    exp.replicates = cfg.replicates;
    exp.probes = cfg.probes;
    exp.k_max = cfg.k_max;
    exp.seed = cfg.seed;
    exp.workers = cfg.workers;
    let res = run_cell_experiment(&exp)?;
    res.moments
        .iter()
        .map(|m| {
            let bounds = z_moment_bounds(cfg.dim, m.k)?;
            Ok(ResultRow {
                estimate: m.value,
                stderr: m.stderr,
                lower_bound: bounds.lower,
                upper_bound: bounds.upper,
                samples: cfg.replicates as u64,
                elapsed_ms: res.elapsed_ms,
                ..row(cfg, Some(m.k), Some(cfg.n))
            })
        })
        .collect()
}

/// Distribution-free standard error of a sample median from the order
/// statistics bracketing a 95% interval.
fn median_stderr(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let half_width = 1.96 * n.sqrt() / 2.0;
    let lo = ((n / 2.0 - half_width).floor().max(0.0) as usize).min(sorted.len() - 1);
    let hi = ((n / 2.0 + half_width).ceil() as usize).min(sorted.len() - 1);
    (sorted[hi] - sorted[lo]) / (2.0 * 1.96)
}

fn run_diam(cfg: &ExperimentConfig) -> vorocell::Result<Vec<ResultRow>> {
    let (model, x) = model_and_center(cfg)?;
    let exp = DiameterExperimentConfig {
        model,
        x,
        n_grid: cfg.n_grid.clone(),
        t_grid: cfg.t_grid.clone(),
        replicates: cfg.replicates,
        probes: cfg.probes,
        seed: cfg.seed,
        workers: cfg.workers,
        strategy: Default::default(),
    };
    let res = run_diameter_experiment(&exp)?;
    let per_n_ms = res.elapsed_ms / res.per_n.len() as f64;
    Ok(res
        .per_n
        .iter()
        .map(|at| {
            let mut lower = at.scaled_lower.clone();
            lower.sort_by(f64::total_cmp);
            let mut upper = at.scaled_upper.clone();
            upper.sort_by(f64::total_cmp);
            let median = quantile_sorted(&lower, 0.5);
            ResultRow {
                estimate: median,
                stderr: median_stderr(&lower),
                lower_bound: median,
                upper_bound: quantile_sorted(&upper, 0.5),
                samples: cfg.replicates as u64,
                elapsed_ms: per_n_ms,
                ..row(cfg, None, Some(at.n))
            }
        })
        .collect())
}

fn random_instance(d: usize, rng: &mut RandomStream) -> vorocell::Result<(Vec<Ball>, f64)> {
    if d == 1 {
        let count = rng.random_range(1..=5);
        let balls = (0..count)
            .map(|_| Ball::new(Point::new(vec![rng.random::<f64>() * 4.0 - 2.0])?, 1.0 - rng.random::<f64>()))
            .collect::<vorocell::Result<Vec<_>>>()?;
        let intervals: Vec<(f64, f64)> = balls
            .iter()
            .map(|b| (b.center().coords()[0] - b.radius(), b.center().coords()[0] + b.radius()))
            .collect();
        let exact = interval_union_length(&intervals)?;
        return Ok((balls, exact));
    }
    let mut ball = || -> vorocell::Result<Ball> {
        let c: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        Ball::new(Point::new(c)?, 0.25 + 1.25 * rng.random::<f64>())
    };
    let (a, b) = (ball()?, ball()?);
    let exact = two_ball_union_volume(&a, &b)?;
    Ok((vec![a, b], exact))
}

/// One row per random instance; the bound columns hold `oracle ± 4σ`.
fn run_union_check(cfg: &ExperimentConfig) -> vorocell::Result<Vec<ResultRow>> {
    let rows = map_indexed(cfg.replicates, cfg.workers, |i| {
        let started = Instant::now();
        let mut rng = RandomStream::new(cfg.seed, i as u64);
        let (balls, exact) = random_instance(cfg.dim, &mut rng)?;
        let est = union_volume_mc(&balls, cfg.samples as usize, &mut rng)?;
        let slack = UNION_SIGMAS * est.stderr + 1e-12 * exact;
        Ok(ResultRow {
            estimate: est.value,
            stderr: est.stderr,
            lower_bound: exact - slack,
            upper_bound: exact + slack,
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
            ..row(cfg, Some(balls.len()), Some(i + 1))
        })
    });
    rows.into_iter().collect()
}

/// `(agreeing, total)` for union-check rows.
pub fn union_agreement(rows: &[ResultRow]) -> (usize, usize) {
    let ok = rows.iter().filter(|r| r.lower_bound <= r.estimate && r.estimate <= r.upper_bound).count();
    (ok, rows.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn zmoment_rows_carry_bounds() {
        let cfg = parse_config("command=zmoments dim=1 k_max=4 samples=200 inner_samples=16").unwrap();
        let rows = run(&cfg).unwrap();
        assert_eq!(rows.len(), 4);
        for (i, r) in rows.iter().enumerate() {
            let k = i + 1;
            let kf: f64 = (1..=k).map(|j| j as f64).product();
            assert_eq!(r.k, Some(k));
            assert_eq!(r.lower_bound, kf / 2f64.powi(k as i32));
            assert_eq!(r.upper_bound, kf);
        }
        assert_eq!(rows[0].estimate, 1.0);
    }

    #[test]
    fn union_rows_agree_with_the_sweep() {
        let cfg = parse_config("command=unionvol-check dim=1 replicates=50 samples=2000").unwrap();
        let rows = run(&cfg).unwrap();
        let (ok, total) = union_agreement(&rows);
        assert_eq!(total, 50);
        assert!(ok >= 49, "{ok}/{total}");
    }

    #[test]
    fn runtime_errors_surface() {
        let cfg = parse_config("command=cell dim=1 x=3 n=10 replicates=2 probes=10").unwrap();
        assert!(run(&cfg).is_err());
    }

    #[test]
    fn median_stderr_is_small_for_tight_samples() {
        let v: Vec<f64> = (0..400).map(|i| 1.0 + i as f64 * 1e-4).collect();
        let se = median_stderr(&v);
        assert!(se > 0.0 && se < 0.01);
    }
}
