//! Densities discretized on a regular grid.
//!
//! All integrals use the left rectangle rule `sum_j v_j * dt`, the same
//! quadrature that appears in the simplex constraints of the decomposition
//! programs, so a [`Density`] integrates to exactly one under every
//! operation of this crate.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

#[allow(unused_imports)] // inherent methods exist only when std is linked
use num_traits::Float;

use crate::{Error, Result};

/// Tolerance on the rectangle-rule integral of a [`Density`].
pub const NORM_TOL: f64 = 1e-8;

/// Number of grid nodes used when the caller does not fix the grid.
pub const DEFAULT_GRID_POINTS: usize = 512;

/// Gaussian kernels are truncated this many bandwidths away from their
/// centre. `exp(-40.5)` is below `3e-18`, far under any tolerance used here.
const KDE_CUTOFF: f64 = 9.0;

/// Relative tolerance when deciding that two grids are the same.
const GRID_TOL: f64 = 1e-9;

/// Regular one-dimensional grid `t_j = t1 + j * dt`, `j = 0..m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    t1: f64,
    dt: f64,
    m: usize,
}

impl Grid {
    pub fn new(t1: f64, dt: f64, m: usize) -> Result<Self> {
        if !t1.is_finite() || !dt.is_finite() || dt <= 0.0 {
            return Err(Error::InvalidGrid(format!("t1 = {t1}, dt = {dt}")));
        }
        if m < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 nodes, got {m}")));
        }
        Ok(Self { t1, dt, m })
    }

    /// Grid of `m` nodes whose first node is `lo` and last node is `hi`.
    pub fn spanning(lo: f64, hi: f64, m: usize) -> Result<Self> {
        if m < 2 || !(hi > lo) {
            return Err(Error::InvalidGrid(format!("cannot span [{lo}, {hi}] with {m} nodes")));
        }
        Self::new(lo, (hi - lo) / (m - 1) as f64, m)
    }

    /// Default grid for a sample: `[min - 3h, max + 3h]` with `m` nodes.
    pub fn for_samples(samples: &[f64], bandwidth: f64, m: usize) -> Result<Self> {
        let (lo, hi) = min_max(samples).ok_or(Error::EmptySample)?;
        Self::spanning(lo - 3.0 * bandwidth, hi + 3.0 * bandwidth, m)
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, j: usize) -> f64 {
        self.t1 + j as f64 * self.dt
    }

    pub fn last(&self) -> f64 {
        self.node(self.m - 1)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.m).map(move |j| self.node(j))
    }

    /// True when both grids have the same node count and their first node and
    /// step agree to a relative `1e-9`.
    pub fn matches(&self, other: &Grid) -> bool {
        let scale = self.t1.abs().max(self.last().abs()).max(self.dt);
        self.m == other.m
            && (self.t1 - other.t1).abs() <= GRID_TOL * scale
            && (self.dt - other.dt).abs() <= GRID_TOL * self.dt
    }
}

/// Nonnegative function on a [`Grid`] whose rectangle-rule integral is one.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    grid: Grid,
    values: Vec<f64>,
}

impl Density {
    /// Checks the density invariant without rescaling.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        check_values(&grid, &values)?;
        let mass = rect_sum(&values, grid.dt);
        if (mass - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidDensity(format!("integral is {mass}, expected 1")));
        }
        Ok(Self { grid, values })
    }

    /// Rescales nonnegative values to unit integral.
    pub fn normalized(grid: Grid, mut values: Vec<f64>) -> Result<Self> {
        check_values(&grid, &values)?;
        let mass = rect_sum(&values, grid.dt);
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidDensity(format!("cannot normalize, integral is {mass}")));
        }
        for v in &mut values {
            *v /= mass;
        }
        Ok(Self { grid, values })
    }

    pub fn uniform(grid: Grid) -> Self {
        let v = 1.0 / (grid.m as f64 * grid.dt);
        Self { grid, values: alloc::vec![v; grid.m] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn same_grid(&self, other: &Density) -> Result<()> {
        if self.grid.matches(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

fn check_values(grid: &Grid, values: &[f64]) -> Result<()> {
    if values.len() != grid.m {
        return Err(Error::InvalidDensity(format!(
            "{} values for a grid of {} nodes",
            values.len(),
            grid.m
        )));
    }
    if let Some((j, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidDensity(format!("value {v} at node {j}")));
    }
    Ok(())
}

fn rect_sum(values: &[f64], dt: f64) -> f64 {
    values.iter().sum::<f64>() * dt
}

fn min_max(samples: &[f64]) -> Option<(f64, f64)> {
    let mut it = samples.iter().copied();
    let first = it.next()?;
    Some(it.fold((first, first), |(lo, hi), y| (lo.min(y), hi.max(y))))
}

/// Unnormalized Gaussian KDE `(1/n) sum_i phi((t - y_i)/h) / h` at every grid node.
pub fn kde_values(samples: &[f64], bandwidth: f64, grid: &Grid) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::InvalidBandwidth(bandwidth));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let norm = 1.0 / (sorted.len() as f64 * bandwidth * (2.0 * PI).sqrt());
    let reach = KDE_CUTOFF * bandwidth;
    let values = grid
        .nodes()
        .map(|t| {
            let lo = sorted.partition_point(|&y| y < t - reach);
            let hi = sorted.partition_point(|&y| y <= t + reach);
            let s: f64 = sorted[lo..hi]
                .iter()
                .map(|&y| {
                    let z = (t - y) / bandwidth;
                    (-0.5 * z * z).exp()
                })
                .sum();
            s * norm
        })
        .collect();
    Ok(values)
}

/// Gaussian kernel density estimate on `grid`, renormalized so that the mass
/// truncated by the grid boundaries is restored.
pub fn kde(samples: &[f64], bandwidth: f64, grid: &Grid) -> Result<Density> {
    let values = kde_values(samples, bandwidth, grid)?;
    Density::normalized(*grid, values)
        .map_err(|_| Error::InvalidDensity("no kernel mass falls on the grid".into()))
}

/// Silverman's rule of thumb `1.06 * sd * n^(-1/5)`.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::DegenerateSample);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::DegenerateSample);
    }
    Ok(1.06 * sd * (n as f64).powf(-0.2))
}

pub fn integrate(f: &Density) -> f64 {
    rect_sum(&f.values, f.grid.dt)
}

/// `int |f - g|`.
pub fn l1_dist(f: &Density, g: &Density) -> Result<f64> {
    f.same_grid(g)?;
    let s: f64 = f.values.iter().zip(&g.values).map(|(a, b)| (a - b).abs()).sum();
    Ok(s * f.grid.dt)
}

/// `(int (f - g)^2)^(1/2)`.
pub fn l2_dist(f: &Density, g: &Density) -> Result<f64> {
    f.same_grid(g)?;
    Ok(l2_sq(&f.values, &g.values, f.grid.dt).sqrt())
}

/// `(int (sqrt f - sqrt g)^2)^(1/2)`.
pub fn hellinger_dist(f: &Density, g: &Density) -> Result<f64> {
    f.same_grid(g)?;
    Ok(hellinger_sq(&f.values, &g.values, f.grid.dt).sqrt())
}

pub(crate) fn l2_sq(a: &[f64], b: &[f64], dt: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() * dt
}

pub(crate) fn hellinger_sq(a: &[f64], b: &[f64], dt: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x.sqrt() - y.sqrt();
            d * d
        })
        .sum::<f64>()
        * dt
}

/// Scalar summaries of a density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantitySet {
    pub mean: f64,
    pub variance: f64,
    pub q01: f64,
    pub q25: f64,
    pub q75: f64,
    pub q99: f64,
}

/// Mean, variance and the 1/25/75/99 % quantiles of `f`.
///
/// Each node carries the mass `f_j * dt`, spread uniformly over the cell
/// `[t_j - dt/2, t_j + dt/2]`; quantiles invert that piecewise-linear CDF.
pub fn quantities(f: &Density) -> QuantitySet {
    let dt = f.grid.dt;
    let mass = integrate(f);
    let mean = f.grid.nodes().zip(&f.values).map(|(t, v)| t * v).sum::<f64>() * dt / mass;
    let variance = f
        .grid
        .nodes()
        .zip(&f.values)
        .map(|(t, v)| (t - mean) * (t - mean) * v)
        .sum::<f64>()
        * dt
        / mass;
    QuantitySet {
        mean,
        variance,
        q01: quantile(f, 0.01),
        q25: quantile(f, 0.25),
        q75: quantile(f, 0.75),
        q99: quantile(f, 0.99),
    }
}

/// Left-continuous inverse of the cell-wise linear CDF of `f`.
pub fn quantile(f: &Density, p: f64) -> f64 {
    let dt = f.grid.dt;
    let target = p * integrate(f);
    let mut below = 0.0;
    let mut last_massive = 0;
    for (j, &v) in f.values.iter().enumerate() {
        let cell = v * dt;
        if cell > 0.0 {
            last_massive = j;
            if below + cell >= target {
                let frac = ((target - below) / cell).clamp(0.0, 1.0);
                return f.grid.node(j) - 0.5 * dt + frac * dt;
            }
        }
        below += cell;
    }
    f.grid.node(last_massive) + 0.5 * dt
}

/// The nine quantities of interest, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Quantity {
    L1,
    L2,
    Hellinger,
    Mean,
    Variance,
    Q01,
    Q25,
    Q75,
    Q99,
}

impl Quantity {
    pub const ALL: [Quantity; 9] = [
        Quantity::L1,
        Quantity::L2,
        Quantity::Hellinger,
        Quantity::Mean,
        Quantity::Variance,
        Quantity::Q01,
        Quantity::Q25,
        Quantity::Q75,
        Quantity::Q99,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::L1 => "l1",
            Quantity::L2 => "l2",
            Quantity::Hellinger => "hellinger",
            Quantity::Mean => "mean",
            Quantity::Variance => "variance",
            Quantity::Q01 => "q01",
            Quantity::Q25 => "q25",
            Quantity::Q75 => "q75",
            Quantity::Q99 => "q99",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Denominators below this make a scalar relative error meaningless.
pub const SCALAR_FLOOR: f64 = 1e-12;

/// Relative errors in percent, indexed by [`Quantity`].
///
/// A scalar quantity whose true value is (numerically) zero yields a NaN
/// entry, reported as flagged rather than as an infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeErrors(pub [f64; 9]);

impl RelativeErrors {
    pub fn get(&self, q: Quantity) -> f64 {
        self.0[q.index()]
    }

    pub fn is_flagged(&self, q: Quantity) -> bool {
        self.get(q).is_nan()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Quantity, f64)> + '_ {
        Quantity::ALL.iter().map(move |&q| (q, self.get(q)))
    }
}

/// Percent relative errors of `estimate` against `truth`:
/// `100 int|f - g| / int|f|`, `100 int(f - g)^2 / int f^2`,
/// `100 int(sqrt f - sqrt g)^2 / int f`, then `100 |u - v| / |u|` for the
/// scalar quantities.
pub fn relative_errors(truth: &Density, estimate: &Density) -> Result<RelativeErrors> {
    truth.same_grid(estimate)?;
    let dt = truth.grid.dt;
    let f = &truth.values;
    let g = &estimate.values;
    let l1 = f.iter().zip(g).map(|(a, b)| (a - b).abs()).sum::<f64>() / f.iter().map(|a| a.abs()).sum::<f64>();
    let l2 = l2_sq(f, g, dt) / (f.iter().map(|a| a * a).sum::<f64>() * dt);
    let he = hellinger_sq(f, g, dt) / rect_sum(f, dt);

    let u = quantities(truth);
    let v = quantities(estimate);
    let scalar = |a: f64, b: f64| {
        let num = (a - b).abs();
        if num == 0.0 {
            0.0
        } else if a.abs() < SCALAR_FLOOR {
            f64::NAN
        } else {
            100.0 * num / a.abs()
        }
    };
    Ok(RelativeErrors([
        100.0 * l1,
        100.0 * l2,
        100.0 * he,
        scalar(u.mean, v.mean),
        scalar(u.variance, v.variance),
        scalar(u.q01, v.q01),
        scalar(u.q25, v.q25),
        scalar(u.q75, v.q75),
        scalar(u.q99, v.q99),
    ]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;

    fn normal_pdf(t: f64, mu: f64, sigma: f64) -> f64 {
        let z = (t - mu) / sigma;
        (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
    }

    fn discretized_normal(grid: Grid, mu: f64, sigma: f64) -> Density {
        Density::normalized(grid, grid.nodes().map(|t| normal_pdf(t, mu, sigma)).collect()).unwrap()
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(Grid::new(0.0, 0.0, 10).is_err());
        assert!(Grid::new(0.0, -1.0, 10).is_err());
        assert!(Grid::new(0.0, 0.1, 1).is_err());
        assert!(Grid::spanning(1.0, 1.0, 10).is_err());
        let g = Grid::spanning(-1.0, 1.0, 5).unwrap();
        assert_relative_eq!(g.dt(), 0.5);
        assert_relative_eq!(g.last(), 1.0);
    }

    #[test]
    fn density_invariants_enforced() {
        let g = Grid::spanning(0.0, 1.0, 11).unwrap();
        assert!(Density::new(g, vec![1.0; 11]).is_err()); // integral 1.1
        assert!(Density::normalized(g, vec![-1.0; 11]).is_err());
        assert!(Density::normalized(g, vec![0.0; 11]).is_err());
        assert!(Density::normalized(g, vec![1.0; 3]).is_err());
        let d = Density::normalized(g, vec![1.0; 11]).unwrap();
        assert!((integrate(&d) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kde_single_sample_peak() {
        let g = Grid::spanning(-2.0, 2.0, 41).unwrap();
        let h = 0.3;
        let v = kde_values(&[0.0], h, &g).unwrap();
        assert_relative_eq!(v[20], 1.0 / (h * (2.0 * PI).sqrt()), max_relative = 1e-14);
    }

    #[test]
    fn kde_repeated_sample_equals_single() {
        let g = Grid::spanning(-3.0, 3.0, 64).unwrap();
        let a = kde(&[0.4, 0.4, 0.4], 0.25, &g).unwrap();
        let b = kde(&[0.4], 0.25, &g).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_relative_eq!(x, y, max_relative = 1e-13);
        }
    }

    #[test]
    fn kde_matches_brute_force_sum() {
        let samples = [-1.0, 0.0, 1.0];
        let h = 0.5;
        let g = Grid::spanning(-4.0, 4.0, 81).unwrap();
        let v = kde_values(&samples, h, &g).unwrap();
        // direct three-term sum at t = 0 (node 40)
        let oracle: f64 = samples.iter().map(|y| normal_pdf(0.0, *y, h)).sum::<f64>() / 3.0;
        assert_relative_eq!(v[40], oracle, max_relative = 1e-13);
    }

    #[test]
    fn kde_errors() {
        let g = Grid::spanning(0.0, 1.0, 10).unwrap();
        assert_eq!(kde(&[], 0.1, &g), Err(Error::EmptySample));
        assert_eq!(kde(&[0.5], 0.0, &g), Err(Error::InvalidBandwidth(0.0)));
        assert!(kde(&[0.5], -1.0, &g).is_err());
        assert!(kde(&[100.0], 0.1, &g).is_err());
    }

    #[test]
    fn silverman_edge_cases() {
        assert_eq!(silverman_bandwidth(&[1.0]), Err(Error::DegenerateSample));
        assert_eq!(silverman_bandwidth(&[2.0, 2.0, 2.0]), Err(Error::DegenerateSample));
        let h = silverman_bandwidth(&[0.0, 1.0]).unwrap();
        assert_relative_eq!(h, 1.06 * 0.5f64.sqrt() * 2f64.powf(-0.2), max_relative = 1e-14);
    }

    #[test]
    fn silverman_on_standard_normal_sample() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let h = silverman_bandwidth(&xs).unwrap();
        let expected = 1.06 * (n as f64).powf(-0.2);
        assert!((h / expected - 1.0).abs() < 0.05, "h = {h}, expected ~ {expected}");
    }

    #[test]
    fn integrate_examples() {
        let g = Grid::spanning(0.0, 1.0, 37).unwrap();
        assert_relative_eq!(integrate(&Density::uniform(g)), 1.0, max_relative = 1e-14);
        let mut spike = vec![0.0; 37];
        spike[11] = 1.0 / g.dt();
        assert_relative_eq!(integrate(&Density::new(g, spike).unwrap()), 1.0, max_relative = 1e-14);
        // raw, un-renormalized discretization of N(0,1) on [-6, 6]
        let g = Grid::spanning(-6.0, 6.0, 512).unwrap();
        let raw: f64 = g.nodes().map(|t| normal_pdf(t, 0.0, 1.0)).sum::<f64>() * g.dt();
        assert!((raw - 1.0).abs() < 1e-6);
    }

    #[test]
    fn distances_identity_and_disjoint() {
        let g = Grid::spanning(0.0, 1.0, 20).unwrap();
        let f = discretized_normal(g, 0.5, 0.2);
        assert_eq!(l1_dist(&f, &f).unwrap(), 0.0);
        assert_eq!(l2_dist(&f, &f).unwrap(), 0.0);
        assert_eq!(hellinger_dist(&f, &f).unwrap(), 0.0);

        let mut a = vec![0.0; 20];
        let mut b = vec![0.0; 20];
        a[..10].iter_mut().for_each(|v| *v = 1.0);
        b[10..].iter_mut().for_each(|v| *v = 1.0);
        let a = Density::normalized(g, a).unwrap();
        let b = Density::normalized(g, b).unwrap();
        assert_relative_eq!(hellinger_dist(&a, &b).unwrap().powi(2), 2.0, max_relative = 1e-12);
        assert_relative_eq!(l1_dist(&a, &b).unwrap(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn distances_mismatched_grids() {
        let f = Density::uniform(Grid::spanning(0.0, 1.0, 20).unwrap());
        let g = Density::uniform(Grid::spanning(0.0, 2.0, 20).unwrap());
        assert_eq!(l2_dist(&f, &g), Err(Error::GridMismatch));
        assert_eq!(relative_errors(&f, &g), Err(Error::GridMismatch));
    }

    /// Midpoint quadrature on a 10x finer grid, independent of the grid code.
    fn fine_quadrature(h: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let step = (hi - lo) / n as f64;
        (0..n).map(|k| h(lo + (k as f64 + 0.5) * step)).sum::<f64>() * step
    }

    #[test]
    fn distances_between_normals_match_fine_quadrature() {
        let g = Grid::spanning(-8.0, 9.0, 512).unwrap();
        let f = discretized_normal(g, 0.0, 1.0);
        let h = discretized_normal(g, 1.0, 1.0);
        let p = |t: f64| normal_pdf(t, 0.0, 1.0);
        let q = |t: f64| normal_pdf(t, 1.0, 1.0);
        let l1 = fine_quadrature(|t| (p(t) - q(t)).abs(), -8.0, 9.0, 5120);
        let l2 = fine_quadrature(|t| (p(t) - q(t)).powi(2), -8.0, 9.0, 5120).sqrt();
        let he = fine_quadrature(|t| (p(t).sqrt() - q(t).sqrt()).powi(2), -8.0, 9.0, 5120).sqrt();
        assert!((l1_dist(&f, &h).unwrap() - l1).abs() < 1e-4);
        assert!((l2_dist(&f, &h).unwrap() - l2).abs() < 1e-4);
        assert!((hellinger_dist(&f, &h).unwrap() - he).abs() < 1e-4);
    }

    #[test]
    fn quantities_of_uniform() {
        let g = Grid::spanning(0.0, 1.0, 101).unwrap();
        let q = quantities(&Density::uniform(g));
        assert_relative_eq!(q.mean, 0.5, max_relative = 1e-12);
        assert!((q.q25 - 0.25).abs() <= g.dt());
        assert!((q.q75 - 0.75).abs() <= g.dt());
    }

    #[test]
    fn quantities_of_symmetric_density() {
        let g = Grid::spanning(-3.0, 5.0, 201).unwrap();
        let f = discretized_normal(g, 1.0, 0.7);
        let q = quantities(&f);
        assert!((q.mean - 1.0).abs() < 1e-10);
        assert!((quantile(&f, 0.5) - 1.0).abs() <= g.dt());
    }

    #[test]
    fn quantities_of_standard_normal() {
        let g = Grid::spanning(-6.0, 6.0, 512).unwrap();
        let q = quantities(&discretized_normal(g, 0.0, 1.0));
        assert!((q.variance - 1.0).abs() < 1e-2);
        assert!((q.q01 + 2.326_347_874).abs() < 2.0 * g.dt());
        assert!((q.q99 - 2.326_347_874).abs() < 2.0 * g.dt());
        assert!((q.q25 + 0.674_489_750).abs() < 2.0 * g.dt());
    }

    #[test]
    fn point_mass_has_tiny_variance() {
        let g = Grid::spanning(0.0, 1.0, 50).unwrap();
        let mut v = vec![0.0; 50];
        v[17] = 1.0 / g.dt();
        let f = Density::new(g, v).unwrap();
        let q = quantities(&f);
        assert!(q.variance < g.dt() * g.dt());
        assert_relative_eq!(q.mean, g.node(17), max_relative = 1e-12);
        assert!(q.q01 <= q.q25 && q.q25 <= q.q75 && q.q75 <= q.q99);
    }

    #[test]
    fn relative_errors_self_is_zero() {
        let g = Grid::spanning(-6.0, 6.0, 128).unwrap();
        let f = discretized_normal(g, 0.0, 1.0);
        let e = relative_errors(&f, &f).unwrap();
        assert!(e.0.iter().all(|&x| x == 0.0), "{e:?}");
    }

    #[test]
    fn relative_errors_mean_shift() {
        // uniform on [0,1] vs uniform on [0.5,1.5]: means 0.5 vs 1.0
        let g = Grid::spanning(-0.5, 2.0, 501).unwrap();
        let ind = |a: f64, b: f64| g.nodes().map(|t| if t >= a - 1e-12 && t <= b + 1e-12 { 1.0 } else { 0.0 }).collect();
        let f = Density::normalized(g, ind(0.0, 1.0)).unwrap();
        let h = Density::normalized(g, ind(0.5, 1.5)).unwrap();
        let e = relative_errors(&f, &h).unwrap();
        assert_relative_eq!(e.get(Quantity::Mean), 100.0, max_relative = 1e-9);
    }

    #[test]
    fn relative_errors_match_direct_quadrature() {
        let g = Grid::spanning(-6.0, 7.0, 300).unwrap();
        let f = discretized_normal(g, 0.0, 1.0);
        let h = discretized_normal(g, 0.5, 1.3);
        let e = relative_errors(&f, &h).unwrap();
        let (a, b, dt) = (f.values(), h.values(), g.dt());
        let mut l1n = 0.0;
        let mut l1d = 0.0;
        let mut l2n = 0.0;
        let mut l2d = 0.0;
        let mut hen = 0.0;
        let mut hed = 0.0;
        for j in 0..a.len() {
            l1n += (a[j] - b[j]).abs() * dt;
            l1d += a[j] * dt;
            l2n += (a[j] - b[j]).powi(2) * dt;
            l2d += a[j].powi(2) * dt;
            hen += (a[j].sqrt() - b[j].sqrt()).powi(2) * dt;
            hed += a[j] * dt;
        }
        assert!((e.get(Quantity::L1) - 100.0 * l1n / l1d).abs() < 1e-6);
        assert!((e.get(Quantity::L2) - 100.0 * l2n / l2d).abs() < 1e-6);
        assert!((e.get(Quantity::Hellinger) - 100.0 * hen / hed).abs() < 1e-6);
        let vf = quantities(&f).variance;
        let vh = quantities(&h).variance;
        assert!((e.get(Quantity::Variance) - 100.0 * (vf - vh).abs() / vf).abs() < 1e-6);
    }

    #[test]
    fn near_zero_scalar_is_flagged() {
        let g = Grid::spanning(-6.0, 6.0, 129).unwrap();
        let f = discretized_normal(g, 0.0, 1.0);
        let h = discretized_normal(g, 0.3, 1.0);
        let e = relative_errors(&f, &h).unwrap();
        assert!(e.is_flagged(Quantity::Mean));
        assert!(!e.is_flagged(Quantity::Variance));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn density(m: usize) -> impl Strategy<Value = Density> {
            proptest::collection::vec(0.0f64..1.0, m).prop_filter_map("zero mass", move |v| {
                Density::normalized(Grid::spanning(0.0, 1.0, m).unwrap(), v).ok()
            })
        }

        proptest! {
            #[test]
            fn triangle_inequality(f in density(24), g in density(24), h in density(24)) {
                for dist in [l1_dist, l2_dist, hellinger_dist] {
                    let fg = dist(&f, &g).unwrap();
                    let gh = dist(&g, &h).unwrap();
                    let fh = dist(&f, &h).unwrap();
                    prop_assert!(fh <= fg + gh + 1e-10);
                }
            }

            #[test]
            fn hellinger_squared_below_l1(f in density(24), g in density(24)) {
                prop_assert!(hellinger_dist(&f, &g).unwrap().powi(2) <= l1_dist(&f, &g).unwrap() + 1e-12);
            }

            #[test]
            fn quantiles_monotone(f in density(32), p in 0.001f64..0.999, dp in 0.0f64..0.5) {
                let p2 = (p + dp).min(0.999);
                prop_assert!(quantile(&f, p) <= quantile(&f, p2));
                let q = quantities(&f);
                prop_assert!(q.variance >= 0.0);
                prop_assert!(q.q01 <= q.q25 && q.q25 <= q.q75 && q.q75 <= q.q99);
            }

            #[test]
            fn kde_output_is_density(samples in proptest::collection::vec(-1.0f64..1.0, 1..40), h in 0.01f64..1.0) {
                let g = Grid::for_samples(&samples, h, 64).unwrap();
                let f = kde(&samples, h, &g).unwrap();
                prop_assert!((integrate(&f) - 1.0).abs() <= NORM_TOL);
                prop_assert!(f.values().iter().all(|v| *v >= 0.0));
            }
        }
    }
}
