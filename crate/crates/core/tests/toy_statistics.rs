use densemu_core::density::NORM_TOL;
use densemu_core::toy_models::{build_training, draw_replicates, make_design, Model, Scheme};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Bernoulli, Distribution, Normal, Uniform};

fn moments(v: &[f64]) -> (f64, f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = v.iter().map(|y| (y - mean).powi(4)).sum::<f64>() / n;
    (mean, var, m4)
}

fn oracle_toy1(x: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = StdRng::seed_from_u64(seed);
    let xi1 = Normal::new(1.0, 1.0).unwrap();
    let xi2 = Normal::new(2.0, 1.0).unwrap();
    let u = Uniform::new(0.0, 1.0).unwrap();
    (0..n)
        .map(|_| {
            let s = (x * (xi1.sample(&mut rng) + xi2.sample(&mut rng))).sin() + u.sample(&mut rng);
            if s >= -1.0 {
                s
            } else {
                0.0
            }
        })
        .collect()
}

fn oracle_toy2(x: &[f64], n: usize, seed: u64) -> Vec<f64> {
    let mut rng = StdRng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let u1 = Uniform::new(0.0, 1.0).unwrap();
    let u2 = Uniform::new(1.0, 2.0).unwrap();
    let b = Bernoulli::new(0.5).unwrap();
    let linear: f64 = x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).sum();
    (0..n)
        .map(|_| {
            let bern = if b.sample(&mut rng) { 1.0 } else { 0.0 };
            (x[0] + 2.0 * x[1] + u1.sample(&mut rng)) * (3.0 * x[2] - 4.0 * x[3] + normal.sample(&mut rng)).sin()
                + u2.sample(&mut rng)
                + 10.0 * x[4] * bern
                + linear
        })
        .collect()
}

#[test]
fn toy1_zero_input_mean() {
    let v = draw_replicates(Model::Toy1, &[0.0], 0, 100_000, 5).unwrap();
    assert!((moments(&v).0 - 0.5).abs() <= 0.01);
}

#[test]
fn toy1_unit_input_matches_independent_generator() {
    let n = 1_000_000;
    let ours = draw_replicates(Model::Toy1, &[1.0], 0, n, 6).unwrap();
    let theirs = oracle_toy1(1.0, n, 6);
    let (m1, v1, _) = moments(&ours);
    let (m2, v2, _) = moments(&theirs);
    let se = (v1 / n as f64 + v2 / n as f64).sqrt();
    assert!((m1 - m2).abs() <= 3.0 * se, "{m1} vs {m2}, se {se}");
    // E sin(x S) with S ~ N(3, 2) is sin(3x) exp(-x^2)
    let analytic = 0.5 + 3f64.sin() * (-1f64).exp();
    assert!((m1 - analytic).abs() <= 3.0 * (v1 / n as f64).sqrt());
    assert!(ours.iter().all(|y| (-1.0..=2.0).contains(y)));
}

#[test]
fn toy2_zero_input_mean() {
    let v = draw_replicates(Model::Toy2, &[0.0; 5], 0, 100_000, 7).unwrap();
    assert!((moments(&v).0 - 1.5).abs() <= 0.01);
}

#[test]
fn toy2_unit_input_variance_matches_independent_generator() {
    let n = 1_000_000;
    let x = [1.0; 5];
    let ours = draw_replicates(Model::Toy2, &x, 0, n, 8).unwrap();
    let theirs = oracle_toy2(&x, n, 8);
    let (_, v1, k1) = moments(&ours);
    let (_, v2, k2) = moments(&theirs);
    let se = ((k1 - v1 * v1) / n as f64 + (k2 - v2 * v2) / n as f64).sqrt();
    assert!((v1 - v2).abs() <= 3.0 * se, "{v1} vs {v2}, se {se}");
}

#[test]
fn toy2_outputs_within_bounds() {
    let mut rng = StdRng::seed_from_u64(9);
    for p in 0..10 {
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..=1.0)).collect();
        let linear: f64 = x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).sum();
        let amp = x[0] + 2.0 * x[1] + 1.0;
        let (lo, hi) = (-amp + 1.0 + linear, amp + 2.0 + 10.0 * x[4] + linear);
        for y in draw_replicates(Model::Toy2, &x, p, 100_000, 10).unwrap() {
            assert!(y >= lo && y <= hi, "{y} outside [{lo}, {hi}]");
        }
    }
}

#[test]
fn training_sets_are_valid_and_reproducible() {
    for model in [Model::Toy1, Model::Toy2, Model::GaussFamily] {
        let design = make_design(Scheme::Lhs, 8, &model.input_box(), 11).unwrap();
        let a = build_training(model, &design, 500, None, 12).unwrap();
        let b = build_training(model, &design, 500, None, 12).unwrap();
        assert_eq!(a, b);
        for f in a.densities() {
            assert!(f.values().iter().all(|v| *v >= 0.0));
            assert!((f.values().iter().sum::<f64>() * f.grid().dt() - 1.0).abs() <= NORM_TOL);
        }
    }
}

#[test]
fn nested_prefix_replicates_are_shared() {
    let b = Model::Toy1.input_box();
    let small = make_design(Scheme::NestedUniform, 5, &b, 3).unwrap();
    let large = make_design(Scheme::NestedUniform, 9, &b, 3).unwrap();
    let ts = build_training(Model::Toy1, &small, 300, None, 4).unwrap();
    let tl = build_training(Model::Toy1, &large, 300, None, 4).unwrap();
    assert_eq!(ts.inputs(), &tl.inputs()[..5]);
    for (i, x) in small.points.iter().enumerate() {
        assert_eq!(draw_replicates(Model::Toy1, x, i, 300, 4).unwrap(), draw_replicates(Model::Toy1, &large.points[i], i, 300, 4).unwrap());
    }
}
