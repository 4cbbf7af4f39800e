use std::f64::consts::PI;

use densemu_core::density::{hellinger_dist, l2_dist, Density, Grid};
use densemu_core::kernel_regression::{
    gaussian_kernel, hellinger_objective, kernel_values, l2_objective, loo_objective, optimize_bandwidth, predict,
    predict_hellinger, predict_l2, stationarity_check, weights, Bandwidth, Metric, TrainingSet,
};
use densemu_core::toy_models::{build_training, make_design, Model, Scheme};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bump(grid: Grid, mu: f64, sigma: f64, skew: f64) -> Density {
    let values = grid
        .nodes()
        .map(|t| {
            let z = (t - mu) / sigma;
            (-0.5 * z * z).exp() * (1.0 + skew * z.tanh())
        })
        .collect();
    Density::normalized(grid, values).unwrap()
}

/// Random training set with distinct inputs in `[0, 1]^d`.
fn random_set(rng: &mut ChaCha8Rng, n: usize, d: usize) -> TrainingSet {
    let grid = Grid::spanning(-5.0, 5.0, 150).unwrap();
    let inputs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    let densities = inputs
        .iter()
        .map(|x| bump(grid, 2.0 * x[0] - 1.0, 0.5 + x[d - 1], rng.random_range(-0.5..0.5)))
        .collect();
    TrainingSet::new(inputs, densities).unwrap()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn mean_density(t: &TrainingSet) -> Density {
    let n = t.len() as f64;
    let values = (0..t.grid().len()).map(|j| t.densities().iter().map(|f| f.values()[j]).sum::<f64>() / n).collect();
    Density::normalized(*t.grid(), values).unwrap()
}

#[test]
fn l2_stationarity_on_random_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(2..12);
        let t = random_set(&mut rng, n, d);
        let x0: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
        let h = Bandwidth::new((0..d).map(|_| rng.random_range(0.01..2.0)).collect()).unwrap();
        assert!(stationarity_check(&t, &x0, &h, Metric::L2).unwrap() <= 1e-10);
    }
}

#[test]
fn hellinger_estimator_beats_simplex_mixtures() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let n = rng.random_range(2..8);
        let t = random_set(&mut rng, n, 2);
        let x0 = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        let h = Bandwidth::new(vec![rng.random_range(0.02..1.0), rng.random_range(0.02..1.0)]).unwrap();
        let best = predict_hellinger(&t, &x0, &h).unwrap();
        let j_best = hellinger_objective(&t, &x0, &h, &best).unwrap();
        let mut probes = vec![mean_density(&t)];
        probes.extend(t.densities().iter().cloned());
        for _ in 0..100 {
            let mut w: Vec<f64> = (0..t.len()).map(|_| -rng.random_range(1e-12f64..1.0).ln()).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            let values = (0..t.grid().len())
                .map(|j| t.densities().iter().zip(&w).map(|(f, a)| a * f.values()[j]).sum())
                .collect();
            probes.push(Density::normalized(*t.grid(), values).unwrap());
        }
        for p in &probes {
            assert!(j_best <= hellinger_objective(&t, &x0, &h, p).unwrap() * (1.0 + 1e-12));
        }
        assert!(stationarity_check(&t, &x0, &h, Metric::Hellinger).unwrap() <= 1e-8);
    }
}

#[test]
fn l2_estimator_minimizes_weighted_l2() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = random_set(&mut rng, 6, 1);
    let h = Bandwidth::new(vec![0.1]).unwrap();
    let best = predict_l2(&t, &[0.4], &h).unwrap();
    let j = l2_objective(&t, &[0.4], &h, &best).unwrap();
    for f in t.densities() {
        assert!(j <= l2_objective(&t, &[0.4], &h, f).unwrap());
    }
}

#[test]
fn weights_ignore_kernel_normalizer() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(1..10);
        let t = random_set(&mut rng, n, d);
        let x0: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
        let h = Bandwidth::new((0..d).map(|_| rng.random_range(0.05..2.0)).collect()).unwrap();
        let w = weights(&t, &x0, &h).unwrap();
        let with: Vec<f64> = t.inputs().iter().map(|x| gaussian_kernel(x, &x0, &h).unwrap()).collect();
        let without: Vec<f64> = t
            .inputs()
            .iter()
            .map(|x| (-x.iter().zip(&x0).zip(h.diag()).map(|((a, b), hj)| (a - b).powi(2) / hj).sum::<f64>()).exp())
            .collect();
        let (s1, s2): (f64, f64) = (with.iter().sum(), without.iter().sum());
        for i in 0..t.len() {
            assert!((w.alpha()[i] - with[i] / s1).abs() <= 1e-12);
            assert!((w.alpha()[i] - without[i] / s2).abs() <= 1e-12);
        }
        assert!((w.alpha().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let det: f64 = h.diag().iter().product();
        assert!((with[0] * (2.0 * PI * det).sqrt() - without[0]).abs() <= 1e-12);
        assert_eq!(kernel_values(&t, &x0, &h).unwrap(), with);
    }
}

#[test]
fn degenerate_bandwidth_limits() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let d = rng.random_range(1..=2);
        let n = rng.random_range(3..10);
        let t = random_set(&mut rng, n, d);
        let mut min_sq = f64::INFINITY;
        for i in 0..n {
            for j in 0..i {
                min_sq = min_sq.min(sq_dist(&t.inputs()[i], &t.inputs()[j]));
            }
        }
        let range_sq: f64 = t.input_ranges().iter().map(|r| r * r).sum();
        // the bandwidth multiplies squared distances
        let small = Bandwidth::isotropic(1e-3 * min_sq, d).unwrap();
        let large = Bandwidth::isotropic(1e9 * range_sq, d).unwrap();
        let mean = mean_density(&t);
        for metric in [Metric::L2, Metric::Hellinger] {
            for k in 0..n {
                let p = predict(&t, &t.inputs()[k], &small, metric).unwrap();
                assert!(l2_dist(&p, &t.densities()[k]).unwrap() <= 1e-6);
            }
            let x0: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
            let p = predict(&t, &x0, &large, metric).unwrap();
            let target = match metric {
                Metric::L2 => mean.clone(),
                Metric::Hellinger => {
                    let root: Vec<f64> = (0..t.grid().len())
                        .map(|j| t.densities().iter().map(|f| f.values()[j].sqrt()).sum::<f64>())
                        .map(|s| s * s)
                        .collect();
                    Density::normalized(*t.grid(), root).unwrap()
                }
            };
            assert!(l2_dist(&p, &target).unwrap() <= 1e-6);
        }
    }
}

#[test]
fn bandwidth_search_beats_random_search_on_toy1() {
    let design = make_design(Scheme::Lhs, 50, &Model::Toy1.input_box(), 17).unwrap();
    let t = build_training(Model::Toy1, &design, 2000, None, 17).unwrap();
    let fit = optimize_bandwidth(&t, true, Metric::L2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let range = t.input_ranges()[0];
    let (lo, hi) = ((0.01 * range).ln(), (10.0 * range).ln());
    let best_random = (0..50)
        .map(|_| {
            let h = rng.random_range(lo..hi).exp();
            loo_objective(&t, &Bandwidth::isotropic(h, 1).unwrap(), Metric::L2).unwrap()
        })
        .fold(f64::INFINITY, f64::min);
    assert!(fit.objective <= best_random, "{} > {}", fit.objective, best_random);
    for s in &fit.seed_objectives {
        assert!(fit.objective <= *s);
    }
}

#[test]
fn hellinger_loo_uses_hellinger_predictions() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let t = random_set(&mut rng, 5, 1);
    let h = Bandwidth::new(vec![0.2]).unwrap();
    let direct: f64 = (0..5)
        .map(|i| {
            let p = predict_hellinger(&t.without(i).unwrap(), &t.inputs()[i], &h).unwrap();
            hellinger_dist(&p, &t.densities()[i]).unwrap().powi(2)
        })
        .sum();
    assert!((loo_objective(&t, &h, Metric::Hellinger).unwrap() - direct).abs() < 1e-12);
}

proptest! {
    #[test]
    fn predictions_are_densities(seed in 0u64..5000, h in 1e-4f64..1e4, x in -2.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_set(&mut rng, 4, 1);
        let bw = Bandwidth::new(vec![h]).unwrap();
        for metric in [Metric::L2, Metric::Hellinger] {
            let p = predict(&t, &[x], &bw, metric).unwrap();
            prop_assert!(p.values().iter().all(|v| *v >= 0.0));
            prop_assert!((p.values().iter().sum::<f64>() * t.grid().dt() - 1.0).abs() <= 1e-8);
        }
        let w = weights(&t, &[x], &bw).unwrap();
        prop_assert!(w.alpha().iter().all(|a| *a >= 0.0));
        prop_assert!((w.alpha().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}
