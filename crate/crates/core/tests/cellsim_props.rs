use proptest::prelude::*;
use rand::Rng;
use vorocell::cellsim::{
    cone_directions, estimate_cell_diameter, estimate_cell_measure, estimate_cell_measure_localized,
    run_cell_experiment, run_diameter_experiment, CellExperimentConfig, CellProbe, DiameterExperimentConfig,
    ProbeStrategy,
};
use vorocell::moments::z_mgf_bounds;
use vorocell::nn::{BruteForce, KdTree, NearestNeighbor};
use vorocell::sampling::DensityModel;
use vorocell::{Point, RandomStream};

fn pt(c: &[f64]) -> Point {
    Point::new(c.to_vec()).unwrap()
}

fn model(spec: &str, d: usize) -> DensityModel {
    DensityModel::parse(spec, d).unwrap()
}

fn draw_points(m: &DensityModel, count: usize, rng: &mut RandomStream) -> Vec<Point> {
    (0..count).map(|_| m.sample(rng)).collect()
}

/// Exact Voronoi interval of `x` among `others` on the line, clipped to `[lo, hi]`.
fn interval_cell(x: f64, others: &[f64], lo: f64, hi: f64) -> (f64, f64) {
    let left = others.iter().copied().filter(|&o| o < x).fold(f64::NEG_INFINITY, f64::max);
    let right = others.iter().copied().filter(|&o| o > x).fold(f64::INFINITY, f64::min);
    (((x + left) / 2.0).max(lo), ((x + right) / 2.0).min(hi))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kd_tree_matches_brute_force(
        d in 1usize..6,
        n in 1usize..300,
        lattice in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let mut rng = RandomStream::new(seed, 0);
        let coord = |rng: &mut RandomStream| -> f64 {
            if lattice { rng.random_range(-3i32..=3) as f64 } else { rng.random::<f64>() * 2.0 - 1.0 }
        };
        let pts: Vec<Point> = (0..n).map(|_| pt(&(0..d).map(|_| coord(&mut rng)).collect::<Vec<_>>())).collect();
        let brute = BruteForce::new(&pts).unwrap();
        let tree = KdTree::new(&pts).unwrap();
        for _ in 0..50 {
            let q: Vec<f64> = (0..d).map(|_| coord(&mut rng) * 0.5 + 0.25 * f64::from(lattice as u8)).collect();
            prop_assert_eq!(tree.nearest(&q), brute.nearest(&q));
        }
    }
}

#[test]
fn line_cell_estimates_match_exact_interval() {
    let m = model("uniform-ball:r=1", 1);
    let mut rng = RandomStream::new(21, 0);
    for n in [2usize, 10, 100] {
        let x = rng.random::<f64>() * 1.6 - 0.8;
        let others: Vec<f64> = (1..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let (a, b) = interval_cell(x, &others, -1.0, 1.0);
        let exact = (b - a) / 2.0;
        let others_pts: Vec<Point> = others.iter().map(|&o| pt(&[o])).collect();
        let plain = estimate_cell_measure(&pt(&[x]), &others_pts, &m, 20_000, &mut rng).unwrap();
        let local = estimate_cell_measure_localized(&pt(&[x]), &others_pts, &m, 20_000, &mut rng).unwrap();
        assert!((plain.value - exact).abs() <= 4.0 * plain.stderr + 1e-12, "n={n}: {plain:?} vs {exact}");
        assert!((local.value - exact).abs() <= 4.0 * local.stderr + 1e-12, "n={n}: {local:?} vs {exact}");
        let diam = estimate_cell_diameter(&pt(&[x]), &others_pts, &m, 20_000, &mut rng).unwrap();
        assert!(diam.lower <= b - a + 1e-12 && b - a <= diam.upper + 1e-12, "{diam:?} vs {}", b - a);
    }
}

#[test]
fn cells_lie_inside_the_cone_enclosing_ball() {
    let mut rng = RandomStream::new(22, 0);
    for d in [1usize, 2, 3, 4] {
        let m = model("gaussian", d);
        let dirs = cone_directions(d).unwrap();
        for _ in 0..8 {
            let x = m.sample(&mut rng);
            let others = draw_points(&m, 200, &mut rng);
            let cell = CellProbe::new(&m, &x, &others, &dirs).unwrap();
            let rho = cell.enclosing_radius();
            if !rho.is_finite() {
                // an empty cone gives no bound
                continue;
            }
            let mut y = vec![0.0; d];
            for _ in 0..5000 {
                // probes in a ball well beyond the enclosing radius
                for yi in y.iter_mut() {
                    *yi = rng.random::<f64>() * 2.0 - 1.0;
                }
                for (yi, ci) in y.iter_mut().zip(x.coords()) {
                    *yi = ci + 2.0 * rho * *yi;
                }
                if cell.in_cell(&y) {
                    let r = y.iter().zip(x.coords()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    assert!(r <= rho * (1.0 + 1e-12), "d={d}: {r} > {rho}");
                }
            }
        }
    }
}

#[test]
fn unconditioned_center_has_unit_mean() {
    // with X_1 ~ μ the cells partition the support, so E[n μ(S_1)] = 1
    let m = model("gaussian", 2);
    let n = 200;
    let mut acc = vorocell::stats::Welford::default();
    for r in 0..1500u64 {
        let mut rng = RandomStream::new(23, r);
        let pts = draw_points(&m, n, &mut rng);
        let est = estimate_cell_measure_localized(&pts[0], &pts[1..], &m, 400, &mut rng).unwrap();
        acc.push(n as f64 * est.value);
    }
    assert!((acc.mean() - 1.0).abs() <= 4.0 * acc.stderr(), "{} ± {}", acc.mean(), acc.stderr());
}

fn cell_run(spec: &str, d: usize, n: usize, replicates: usize, probes: usize, seed: u64) -> vorocell::cellsim::CellExperimentResult {
    let mut cfg = CellExperimentConfig::new(model(spec, d), Point::origin(d), n);
    cfg.replicates = replicates;
    cfg.probes = probes;
    cfg.seed = seed;
    cfg.k_max = 2;
    run_cell_experiment(&cfg).unwrap()
}

#[test]
fn scaled_cell_law_stabilizes_in_n() {
    let small = cell_run("gaussian", 2, 500, 800, 1000, 31);
    let large = cell_run("gaussian", 2, 5000, 800, 1000, 32);
    for k in 1..=2 {
        let a = small.moment(k).unwrap();
        let b = large.moment(k).unwrap();
        let combined = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!((a.value - b.value).abs() <= 4.0 * combined, "k={k}: {a:?} vs {b:?}");
    }
}

#[test]
fn empirical_mgf_respects_envelope() {
    for d in [1usize, 2] {
        let run = cell_run("uniform-ball:r=1", d, 1000, 1000, 1000, 40 + d as u64);
        for s in [0.25, 0.5] {
            let (mgf, se) = run.mgf(s);
            let bounds = z_mgf_bounds(s, d).unwrap();
            assert!(bounds.contains_with_slack(mgf, 4.0 * se), "d={d} s={s}: {mgf} ± {se} vs {bounds:?}");
        }
    }
}

#[test]
fn cell_experiment_is_worker_invariant() {
    let mut cfg = CellExperimentConfig::new(model("gaussian", 3), pt(&[0.1, 0.0, -0.2]), 300);
    cfg.replicates = 24;
    cfg.probes = 200;
    cfg.seed = 5;
    let one = run_cell_experiment(&cfg).unwrap();
    cfg.workers = 4;
    let four = run_cell_experiment(&cfg).unwrap();
    assert_eq!(one.scaled_measures, four.scaled_measures);
    assert_eq!(one.moments, four.moments);
}

#[test]
fn both_probe_strategies_agree_on_the_cell_mean() {
    let mut cfg = CellExperimentConfig::new(model("gaussian", 2), Point::origin(2), 50);
    cfg.replicates = 600;
    cfg.probes = 500;
    cfg.k_max = 1;
    let local = run_cell_experiment(&cfg).unwrap();
    cfg.strategy = ProbeStrategy::FromDensity;
    cfg.seed = 1;
    let plain = run_cell_experiment(&cfg).unwrap();
    let (a, b) = (local.moment(1).unwrap(), plain.moment(1).unwrap());
    assert!((a.value - b.value).abs() <= 4.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt(), "{a:?} vs {b:?}");
}

#[test]
fn cell_experiment_rejects_bad_input() {
    let mut cfg = CellExperimentConfig::new(model("uniform-ball:r=1", 2), pt(&[2.0, 0.0]), 10);
    assert!(run_cell_experiment(&cfg).is_err());
    cfg.x = Point::origin(2);
    cfg.k_max = 21;
    assert!(run_cell_experiment(&cfg).is_err());
    cfg.k_max = 2;
    cfg.n = 0;
    assert!(run_cell_experiment(&cfg).is_err());
}

#[test]
fn diameter_bracket_on_the_line() {
    // in d = 1 the cell is the interval between the neighbor midpoints
    let m = model("uniform-ball:r=1", 1);
    let cfg = DiameterExperimentConfig {
        model: m.clone(),
        x: Point::origin(1),
        n_grid: vec![100, 1000],
        t_grid: vec![0.5, 1.0, 2.0, 4.0],
        replicates: 300,
        probes: 500,
        seed: 3,
        workers: 2,
        strategy: ProbeStrategy::Localized,
    };
    let res = run_diameter_experiment(&cfg).unwrap();
    for (g, at) in res.per_n.iter().enumerate() {
        for r in 0..cfg.replicates {
            let mut rng = RandomStream::new(cfg.seed, ((g as u64) << 32) | r as u64);
            let others: Vec<f64> = (1..at.n).map(|_| m.sample(&mut rng).coords()[0]).collect();
            let (a, b) = interval_cell(0.0, &others, -1.0, 1.0);
            let exact = at.n as f64 * (b - a);
            assert!(at.scaled_lower[r] <= exact * (1.0 + 1e-12), "{} > {exact}", at.scaled_lower[r]);
            assert!(exact <= at.scaled_upper[r] * (1.0 + 1e-12), "{exact} > {}", at.scaled_upper[r]);
        }
        for w in at.exceedance.windows(2) {
            assert!(w[0].lower >= w[1].lower && w[0].upper >= w[1].upper);
        }
        assert!(at.exceedance.iter().all(|e| e.lower <= e.upper));
        assert!(at.lower_quantiles.windows(2).all(|w| w[0] <= w[1]));
    }
}
