//! Analytical stochastic simulators, designs of experiments and training-set
//! assembly.
//!
//! Replicate `j` at design point `i` under seed `s` is a pure function of
//! `(s, i, j)`: each point reads its own ChaCha stream, and each draw starts
//! at a fixed offset in it. Normal variates come from inverting uniforms.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

#[allow(unused_imports)] // inherent methods exist only when std is linked
use num_traits::Float;
use rand::distr::{Distribution, Open01};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::density::{kde, silverman_bandwidth, Density, Grid, DEFAULT_GRID_POINTS};
use crate::kernel_regression::TrainingSet;
use crate::normal::inverse_cdf;
use crate::{Error, Result};

/// Replicates per design point when none are given.
pub const DEFAULT_REPLICATES: usize = 10_000;
/// Output grid of the Gaussian family.
pub const GAUSS_GRID: (f64, f64) = (-10.0, 10.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    /// `(sin(x (xi1 + xi2)) + U) 1{... >= -1}` on `[0, 1]`.
    Toy1,
    /// `(x1 + 2 x2 + U1) sin(3 x3 - 4 x4 + N) + U2 + 10 x5 B + sum_i i x_i` on `[0, 1]^5`.
    Toy2,
    /// `N(mu, sigma^2)` at `x = (mu, sigma)` on `[-1, 1] x [0.5, 1.5]`.
    GaussFamily,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Toy1 => "TOY1",
            Model::Toy2 => "TOY2",
            Model::GaussFamily => "GAUSS_FAMILY",
        }
    }

    pub fn input_dim(self) -> usize {
        match self {
            Model::Toy1 => 1,
            Model::Toy2 => 5,
            Model::GaussFamily => 2,
        }
    }

    pub fn input_box(self) -> Vec<(f64, f64)> {
        match self {
            Model::Toy1 => vec![(0.0, 1.0)],
            Model::Toy2 => vec![(0.0, 1.0); 5],
            Model::GaussFamily => vec![(-1.0, 1.0), (0.5, 1.5)],
        }
    }

    /// Uniforms consumed by one draw; zero for the analytic family.
    pub fn uniforms_per_draw(self) -> usize {
        match self {
            Model::Toy1 => 3,
            Model::Toy2 => 4,
            Model::GaussFamily => 0,
        }
    }

    /// Whether outputs are known densities rather than sampled replicates.
    pub fn is_analytic(self) -> bool {
        self == Model::GaussFamily
    }

    /// One draw from `uniforms_per_draw()` uniforms in `(0, 1)`.
    pub fn draw_from_uniforms(self, x: &[f64], u: &[f64]) -> Result<f64> {
        check_inside(self, x)?;
        if u.len() != self.uniforms_per_draw() {
            return Err(Error::DimensionMismatch { expected: self.uniforms_per_draw(), got: u.len() });
        }
        match self {
            Model::Toy1 => Ok(toy1_value(x[0], 1.0 + inverse_cdf(u[0]), 2.0 + inverse_cdf(u[1]), u[2])),
            Model::Toy2 => Ok(toy2_value(x, inverse_cdf(u[0]), u[1], 1.0 + u[2], if u[3] < 0.5 { 1.0 } else { 0.0 })),
            Model::GaussFamily => Err(Error::InvalidArgument("the Gaussian family is not sampled".into())),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Model::Toy1, Model::Toy2, Model::GaussFamily]
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("unknown model {s:?}")))
    }
}

fn check_inside(model: Model, x: &[f64]) -> Result<()> {
    let bounds = model.input_box();
    if x.len() != bounds.len() {
        return Err(Error::DimensionMismatch { expected: bounds.len(), got: x.len() });
    }
    if x.iter().zip(&bounds).any(|(v, (lo, hi))| !(*v >= *lo && *v <= *hi)) {
        return Err(Error::OutOfDomain);
    }
    Ok(())
}

fn toy1_value(x: f64, xi1: f64, xi2: f64, u: f64) -> f64 {
    let s = (x * (xi1 + xi2)).sin() + u;
    if s >= -1.0 {
        s
    } else {
        0.0
    }
}

fn toy2_value(x: &[f64], n: f64, u1: f64, u2: f64, b: f64) -> f64 {
    let linear: f64 = x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).sum();
    (x[0] + 2.0 * x[1] + u1) * (3.0 * x[2] - 4.0 * x[3] + n).sin() + u2 + 10.0 * x[4] * b + linear
}

fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Open01.sample(rng)
}

/// One draw of the first toy simulator at `x` in `[0, 1]`.
pub fn toy1_draw<R: Rng + ?Sized>(x: f64, rng: &mut R) -> Result<f64> {
    let u = [uniform(rng), uniform(rng), uniform(rng)];
    Model::Toy1.draw_from_uniforms(&[x], &u)
}

/// One draw of the second toy simulator at `x` in `[0, 1]^5`.
pub fn toy2_draw<R: Rng + ?Sized>(x: &[f64], rng: &mut R) -> Result<f64> {
    let u = [uniform(rng), uniform(rng), uniform(rng), uniform(rng)];
    Model::Toy2.draw_from_uniforms(x, &u)
}

/// Normal density with `x = (mu, sigma)`, discretized on `grid` and renormalized.
pub fn gauss_family(x: &[f64], grid: &Grid) -> Result<Density> {
    if x.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: x.len() });
    }
    let (mu, sigma) = (x[0], x[1]);
    if !(sigma > 0.0) || !mu.is_finite() || !sigma.is_finite() {
        return Err(Error::InvalidArgument(alloc::format!("need sigma > 0, got {sigma}")));
    }
    let values = grid.nodes().map(|t| (-0.5 * ((t - mu) / sigma).powi(2)).exp()).collect();
    Density::normalized(*grid, values)
}

/// Replicate stream of design point `point`, positioned at draw `first`.
pub fn replicate_stream(model: Model, seed: u64, point: usize, first: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(point as u64);
    // each f64 uniform consumes two 32-bit words
    rng.set_word_pos((first * model.uniforms_per_draw() * 2) as u128);
    rng
}

/// Draws `count` outputs at `x`, the `point`-th design point.
pub fn draw_replicates(model: Model, x: &[f64], point: usize, count: usize, seed: u64) -> Result<Vec<f64>> {
    check_inside(model, x)?;
    if model.is_analytic() {
        return Err(Error::InvalidArgument("the Gaussian family is not sampled".into()));
    }
    let mut rng = replicate_stream(model, seed, point, 0);
    let mut u = vec![0.0; model.uniforms_per_draw()];
    (0..count)
        .map(|_| {
            u.iter_mut().for_each(|v| *v = uniform(&mut rng));
            model.draw_from_uniforms(x, &u)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Uniform,
    Lhs,
    NestedUniform,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Uniform => "UNIFORM",
            Scheme::Lhs => "LHS",
            Scheme::NestedUniform => "NESTED_UNIFORM",
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Scheme::Uniform, Scheme::Lhs, Scheme::NestedUniform]
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("unknown design scheme {s:?}")))
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub points: Vec<Vec<f64>>,
    pub scheme: Scheme,
    pub seed: u64,
}

impl Design {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `n` points in `bounds`.
///
/// Uniform designs of different sizes use independent streams; nested
/// designs read one stream, so smaller designs are prefixes of larger ones.
/// LHS places one point in each of `n` equal strata per coordinate, at a
/// uniform position inside the stratum.
pub fn make_design(scheme: Scheme, n: usize, bounds: &[(f64, f64)], seed: u64) -> Result<Design> {
    if n == 0 {
        return Err(Error::InvalidArgument("a design needs at least one point".into()));
    }
    if bounds.is_empty() || bounds.iter().any(|(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!("invalid input box {bounds:?}")));
    }
    let d = bounds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = |k: usize, u: f64| bounds[k].0 + u * (bounds[k].1 - bounds[k].0);
    let points = match scheme {
        Scheme::Uniform | Scheme::NestedUniform => {
            if scheme == Scheme::Uniform {
                rng.set_stream(n as u64);
            }
            (0..n).map(|_| (0..d).map(|k| scale(k, rng.random::<f64>())).collect()).collect()
        }
        Scheme::Lhs => {
            let mut points = vec![vec![0.0; d]; n];
            let mut strata: Vec<usize> = (0..n).collect();
            for k in 0..d {
                strata.shuffle(&mut rng);
                for (p, s) in points.iter_mut().zip(&strata) {
                    p[k] = scale(k, (*s as f64 + rng.random::<f64>()) / n as f64);
                }
            }
            points
        }
    };
    Ok(Design { points, scheme, seed })
}

/// Replicate matrix for a design: row `i` holds `replicates` draws at point `i`.
pub fn draw_replicate_matrix(model: Model, design: &Design, replicates: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    design.points.iter().enumerate().map(|(i, x)| draw_replicates(model, x, i, replicates, seed)).collect()
}

/// Shared grid of `m` nodes covering every KDE: the pooled sample range
/// widened by three of the largest bandwidths on each side.
pub fn pooled_grid(replicates: &[Vec<f64>], bandwidths: &[f64], m: usize) -> Result<Grid> {
    let h = bandwidths.iter().copied().fold(0.0, f64::max);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for row in replicates {
        for y in row {
            lo = lo.min(*y);
            hi = hi.max(*y);
        }
    }
    Grid::for_samples(&[lo, hi], h, m)
}

/// One KDE per replicate row with Silverman bandwidths, on `grid` or on the
/// pooled grid when none is given.
pub fn training_from_replicates(inputs: Vec<Vec<f64>>, replicates: &[Vec<f64>], grid: Option<Grid>) -> Result<TrainingSet> {
    if inputs.len() != replicates.len() {
        return Err(Error::DimensionMismatch { expected: inputs.len(), got: replicates.len() });
    }
    let bandwidths = replicates.iter().map(|r| silverman_bandwidth(r)).collect::<Result<Vec<_>>>()?;
    let grid = match grid {
        Some(g) => g,
        None => pooled_grid(replicates, &bandwidths, DEFAULT_GRID_POINTS)?,
    };
    let densities = replicates.iter().zip(&bandwidths).map(|(r, h)| kde(r, *h, &grid)).collect::<Result<Vec<_>>>()?;
    TrainingSet::new(inputs, densities)
}

/// Training set for `design`: analytic densities for the Gaussian family,
/// otherwise KDEs of `replicates` draws per point.
pub fn build_training(model: Model, design: &Design, replicates: usize, grid: Option<Grid>, seed: u64) -> Result<TrainingSet> {
    let bounds = model.input_box();
    let train = if model.is_analytic() {
        let grid = match grid {
            Some(g) => g,
            None => Grid::spanning(GAUSS_GRID.0, GAUSS_GRID.1, DEFAULT_GRID_POINTS)?,
        };
        for x in &design.points {
            check_inside(model, x)?;
        }
        let densities = design.points.iter().map(|x| gauss_family(x, &grid)).collect::<Result<Vec<_>>>()?;
        TrainingSet::new(design.points.clone(), densities)?
    } else {
        if replicates < 2 {
            return Err(Error::InvalidArgument(alloc::format!("need at least 2 replicates, got {replicates}")));
        }
        let rows = draw_replicate_matrix(model, design, replicates, seed)?;
        training_from_replicates(design.points.clone(), &rows, grid)?
    };
    train.with_bounds(bounds)
}

/// Model name list for messages.
pub fn model_names() -> alloc::string::String {
    [Model::Toy1, Model::Toy2, Model::GaussFamily].iter().map(|m| m.name().to_string()).collect::<Vec<_>>().join(", ")
}
