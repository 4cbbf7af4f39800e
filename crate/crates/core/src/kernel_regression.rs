//! Nadaraya-Watson regression of densities on input vectors.
//!
//! A prediction at `x0` is a convex combination of the training densities,
//! weighted by a Gaussian kernel on the inputs. The L2 estimator averages the
//! densities, the Hellinger estimator averages their square roots and squares
//! the result back. Both are minimizers of a kernel-weighted sum of squared
//! distances to the training densities, in their respective metric.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent methods exist only when std is linked
use num_traits::Float;

use crate::density::{hellinger_sq, l2_sq, Density, Grid};
use crate::optim::{central_difference, minimize_box, LbfgsbOptions};
use crate::{Error, Result};

/// Bounds on every bandwidth entry during optimization.
pub const BANDWIDTH_BOUNDS: (f64, f64) = (1e-6, 1e6);
/// Starting bandwidths, as multiples of each coordinate's input range.
pub const SEED_SCALES: [f64; 5] = [0.01, 0.056_234_132_519_034_91, 0.316_227_766_016_837_94, 1.778_279_410_038_922_8, 10.0];
/// Central-difference step in log-bandwidth coordinates.
pub const FD_STEP: f64 = 1e-5;

/// Training pairs `(x_i, f_i)` sharing one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    inputs: Vec<Vec<f64>>,
    densities: Vec<Density>,
    bounds: Option<Vec<(f64, f64)>>,
}

impl TrainingSet {
    pub fn new(inputs: Vec<Vec<f64>>, densities: Vec<Density>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::TooFewPairs { needed: 1, got: 0 });
        }
        if inputs.len() != densities.len() {
            return Err(Error::DimensionMismatch { expected: inputs.len(), got: densities.len() });
        }
        let d = inputs[0].len();
        if d == 0 {
            return Err(Error::InvalidArgument("inputs must have at least one coordinate".into()));
        }
        for x in &inputs {
            if x.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: x.len() });
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("non-finite input {x:?}")));
            }
        }
        let grid = *densities[0].grid();
        if densities.iter().any(|f| !f.grid().matches(&grid)) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { inputs, densities, bounds: None })
    }

    /// Attaches the input box `X`.
    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: bounds.len() });
        }
        self.bounds = Some(bounds);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn grid(&self) -> &Grid {
        self.densities[0].grid()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn densities(&self) -> &[Density] {
        &self.densities
    }

    pub fn bounds(&self) -> Option<&[(f64, f64)]> {
        self.bounds.as_deref()
    }

    /// The set with pair `i` removed.
    pub fn without(&self, i: usize) -> Result<TrainingSet> {
        let keep: Vec<usize> = (0..self.len()).filter(|&k| k != i).collect();
        self.subset(&keep)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<TrainingSet> {
        let inputs = indices.iter().map(|&k| self.inputs[k].clone()).collect();
        let densities = indices.iter().map(|&k| self.densities[k].clone()).collect();
        let mut out = TrainingSet::new(inputs, densities)?;
        out.bounds = self.bounds.clone();
        Ok(out)
    }

    /// Per-coordinate input range, with 1 substituted for a constant coordinate.
    pub fn input_ranges(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|j| {
                let (lo, hi) = self
                    .inputs
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x[j]), hi.max(x[j])));
                if hi > lo {
                    hi - lo
                } else {
                    1.0
                }
            })
            .collect()
    }
}

/// Diagonal bandwidth matrix `H = diag(h_1, ..., h_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bandwidth {
    diag: Vec<f64>,
    isotropic: bool,
}

impl Bandwidth {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidArgument("empty bandwidth".into()));
        }
        if let Some(h) = diag.iter().find(|h| !(**h > 0.0) || !h.is_finite()) {
            return Err(Error::InvalidBandwidth(*h));
        }
        let isotropic = diag.iter().all(|h| *h == diag[0]);
        Ok(Self { diag, isotropic })
    }

    pub fn isotropic(h: f64, dim: usize) -> Result<Self> {
        let mut b = Self::new(vec![h; dim])?;
        b.isotropic = true;
        Ok(b)
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn is_isotropic(&self) -> bool {
        self.isotropic
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    fn det(&self) -> f64 {
        self.diag.iter().product()
    }
}

/// Which geometry an estimator or criterion works in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    L2,
    Hellinger,
}

/// Convex weights `alpha_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn alpha(&self) -> &[f64] {
        &self.0
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// `-(x - y)' H^-1 (x - y)`.
fn exponent(x: &[f64], y: &[f64], h: &Bandwidth) -> f64 {
    -x.iter().zip(y).zip(&h.diag).map(|((a, b), hj)| (a - b) * (a - b) / hj).sum::<f64>()
}

/// `K_H(x, y) = (2 pi det H)^(-1/2) exp(-(x - y)' H^-1 (x - y))`.
///
/// Implemented as written, without the usual factor 1/2 in the exponent or
/// `d/2` power in the normalizer. Only ratios of kernel values enter the
/// estimators, so the normalizer never matters.
pub fn gaussian_kernel(x: &[f64], y: &[f64], h: &Bandwidth) -> Result<f64> {
    check_dim(h.dim(), x.len())?;
    check_dim(h.dim(), y.len())?;
    Ok(exponent(x, y, h).exp() / (2.0 * PI * h.det()).sqrt())
}

/// Kernel values `K_H(x_i, x0)` for every training input.
pub fn kernel_values(train: &TrainingSet, x0: &[f64], h: &Bandwidth) -> Result<Vec<f64>> {
    train.inputs.iter().map(|x| gaussian_kernel(x, x0, h)).collect()
}

/// Normalizes `exp(e_i)` in the log domain; `skip` gets weight 0.
fn softmax(exponents: &[f64], skip: Option<usize>) -> Vec<f64> {
    let top = exponents
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .fold(f64::NEG_INFINITY, |m, (_, e)| m.max(*e));
    let mut w: Vec<f64> = exponents
        .iter()
        .enumerate()
        .map(|(i, e)| if Some(i) == skip { 0.0 } else { (e - top).exp() })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// `alpha_i = K_H(x_i, x0) / sum_j K_H(x_j, x0)`.
///
/// Computed from log-kernel values shifted by their maximum, so kernels that
/// would underflow far from every input still produce weights: they
/// concentrate on the nearest input in the `H^-1` metric, as the ratio does in
/// the limit.
pub fn weights(train: &TrainingSet, x0: &[f64], h: &Bandwidth) -> Result<Weights> {
    check_dim(train.dim(), x0.len())?;
    check_dim(train.dim(), h.dim())?;
    let e: Vec<f64> = train.inputs.iter().map(|x| exponent(x, x0, h)).collect();
    Ok(Weights(softmax(&e, None)))
}

fn combine(grid: &Grid, densities: &[Density], alpha: &[f64], map: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    for (f, &a) in densities.iter().zip(alpha) {
        if a == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(f.values()) {
            *o += a * map(*v);
        }
    }
    out
}

/// `f0 = sum_i alpha_i f_i`.
pub fn predict_l2(train: &TrainingSet, x0: &[f64], h: &Bandwidth) -> Result<Density> {
    let w = weights(train, x0, h)?;
    let values = combine(train.grid(), &train.densities, &w.0, |v| v);
    Density::normalized(*train.grid(), values)
}

/// `f0 = (sum_i K_i sqrt f_i)^2 / int (sum_i K_i sqrt f_i)^2`.
pub fn predict_hellinger(train: &TrainingSet, x0: &[f64], h: &Bandwidth) -> Result<Density> {
    let w = weights(train, x0, h)?;
    let values = combine(train.grid(), &train.densities, &w.0, |v| v.sqrt()).into_iter().map(|s| s * s).collect();
    Density::normalized(*train.grid(), values)
}

pub fn predict(train: &TrainingSet, x0: &[f64], h: &Bandwidth, metric: Metric) -> Result<Density> {
    match metric {
        Metric::L2 => predict_l2(train, x0, h),
        Metric::Hellinger => predict_hellinger(train, x0, h),
    }
}

/// Leave-one-out criterion `sum_i dist(f_-i, f_i)^2`, with `f_-i` the
/// prediction at `x_i` from the other pairs under the estimator matching
/// `metric`.
pub fn loo_objective(train: &TrainingSet, h: &Bandwidth, metric: Metric) -> Result<f64> {
    LooCriterion::new(train, metric)?.evaluate(h)
}

/// Leave-one-out criterion with the bandwidth-independent parts precomputed.
///
/// Squared distances are expanded through the Gram matrix of the densities
/// (L2) or of their square roots (Hellinger), so one evaluation costs
/// `O(N^2 d + N^3)` instead of touching the grid.
#[derive(Debug, Clone)]
pub struct LooCriterion {
    n: usize,
    dim: usize,
    metric: Metric,
    /// Squared coordinate differences, `[(i * n + j) * dim + k]`.
    sq_diff: Vec<f64>,
    gram: Vec<f64>,
}

impl LooCriterion {
    pub fn new(train: &TrainingSet, metric: Metric) -> Result<Self> {
        let n = train.len();
        if n < 2 {
            return Err(Error::TooFewPairs { needed: 2, got: n });
        }
        let dim = train.dim();
        let mut sq_diff = vec![0.0; n * n * dim];
        for i in 0..n {
            for j in 0..n {
                for k in 0..dim {
                    let d = train.inputs[i][k] - train.inputs[j][k];
                    sq_diff[(i * n + j) * dim + k] = d * d;
                }
            }
        }
        let dt = train.grid().dt();
        let rows: Vec<Vec<f64>> = match metric {
            Metric::L2 => train.densities.iter().map(|f| f.values().to_vec()).collect(),
            Metric::Hellinger => train.densities.iter().map(|f| f.values().iter().map(|v| v.sqrt()).collect()).collect(),
        };
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum::<f64>() * dt;
                gram[i * n + j] = v;
                gram[j * n + i] = v;
            }
        }
        Ok(Self { n, dim, metric, sq_diff, gram })
    }

    pub fn evaluate(&self, h: &Bandwidth) -> Result<f64> {
        check_dim(self.dim, h.dim())?;
        Ok(self.evaluate_diag(&h.diag))
    }

    fn evaluate_diag(&self, diag: &[f64]) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        let mut e = vec![0.0; n];
        for i in 0..n {
            for (j, ej) in e.iter_mut().enumerate() {
                let row = &self.sq_diff[(i * n + j) * self.dim..(i * n + j + 1) * self.dim];
                *ej = -row.iter().zip(diag).map(|(s, h)| s / h).sum::<f64>();
            }
            let alpha = softmax(&e, Some(i));
            let g = &self.gram;
            let mut quad = 0.0;
            let mut cross = 0.0;
            for j in 0..n {
                if alpha[j] == 0.0 {
                    continue;
                }
                let row = &g[j * n..(j + 1) * n];
                quad += alpha[j] * alpha.iter().zip(row).map(|(a, v)| a * v).sum::<f64>();
                cross += alpha[j] * row[i];
            }
            let term = match self.metric {
                Metric::L2 => quad - 2.0 * cross + g[i * n + i],
                Metric::Hellinger => 1.0 - 2.0 * cross / quad.sqrt() + g[i * n + i],
            };
            total += term.max(0.0);
        }
        total
    }
}

/// Outcome of the bandwidth search.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthFit {
    pub bandwidth: Bandwidth,
    /// Leave-one-out criterion at `bandwidth`.
    pub objective: f64,
    pub seeds: Vec<Bandwidth>,
    pub seed_objectives: Vec<f64>,
}

/// Selects `H` by minimizing the leave-one-out criterion.
///
/// The search runs in `log h` coordinates inside [`BANDWIDTH_BOUNDS`], with
/// central-difference gradients, from the five [`SEED_SCALES`] multiples of
/// the input ranges; the best end point is returned.
pub fn optimize_bandwidth(train: &TrainingSet, isotropic: bool, metric: Metric) -> Result<BandwidthFit> {
    let n = train.len();
    if n < 3 {
        return Err(Error::TooFewPairs { needed: 3, got: n });
    }
    let crit = LooCriterion::new(train, metric)?;
    let dim = train.dim();
    let ranges = train.input_ranges();
    let params = if isotropic { 1 } else { dim };
    let expand = |theta: &[f64]| -> Vec<f64> {
        if isotropic {
            vec![theta[0].exp(); dim]
        } else {
            theta.iter().map(|t| t.exp()).collect()
        }
    };
    let (lo, hi) = (BANDWIDTH_BOUNDS.0.ln(), BANDWIDTH_BOUNDS.1.ln());
    let lower = vec![lo; params];
    let upper = vec![hi; params];
    let opts = LbfgsbOptions::default();

    let mut seeds = Vec::with_capacity(SEED_SCALES.len());
    let mut seed_objectives = Vec::with_capacity(SEED_SCALES.len());
    let mut best: Option<(Vec<f64>, f64)> = None;
    for scale in SEED_SCALES {
        let theta0: Vec<f64> = if isotropic {
            let r = ranges.iter().fold(0.0f64, |m, v| m.max(*v));
            vec![(scale * r).ln().clamp(lo, hi)]
        } else {
            ranges.iter().map(|r| (scale * r).ln().clamp(lo, hi)).collect()
        };
        let seed_diag = expand(&theta0);
        let f0 = crit.evaluate_diag(&seed_diag);
        seeds.push(Bandwidth { diag: seed_diag, isotropic });
        seed_objectives.push(f0);

        let mut value = |theta: &[f64]| crit.evaluate_diag(&expand(theta));
        let fg = |theta: &[f64], g: &mut [f64]| {
            central_difference(&mut value, theta, FD_STEP, g);
            crit.evaluate_diag(&expand(theta))
        };
        let m = minimize_box(fg, &theta0, &lower, &upper, &opts);
        for (theta, f) in [(theta0, f0), (m.x, m.f)] {
            if f.is_finite() && best.as_ref().is_none_or(|(_, fb)| f < *fb) {
                best = Some((theta, f));
            }
        }
    }
    let (theta, objective) = best.ok_or(Error::OptimizerFailed)?;
    Ok(BandwidthFit { bandwidth: Bandwidth { diag: expand(&theta), isotropic }, objective, seeds, seed_objectives })
}

/// Middle search seed, `SEED_SCALES[2]` times the input ranges; the bandwidth
/// used when too few pairs remain for a leave-one-out search.
pub fn median_seed_bandwidth(train: &TrainingSet, isotropic: bool) -> Result<Bandwidth> {
    let (lo, hi) = BANDWIDTH_BOUNDS;
    let ranges = train.input_ranges();
    let scale = SEED_SCALES[SEED_SCALES.len() / 2];
    if isotropic {
        let r = ranges.iter().fold(0.0f64, |m, v| m.max(*v));
        return Bandwidth::isotropic((scale * r).clamp(lo, hi), train.dim());
    }
    Bandwidth::new(ranges.iter().map(|r| (scale * r).clamp(lo, hi)).collect())
}

/// Kernel-weighted Hellinger criterion `sum_i K_H(x_i, x0) int (sqrt f_i - sqrt f)^2`,
/// whose minimizer over densities is [`predict_hellinger`].
pub fn hellinger_objective(train: &TrainingSet, x0: &[f64], h: &Bandwidth, f: &Density) -> Result<f64> {
    let k = kernel_values(train, x0, h)?;
    let dt = train.grid().dt();
    if !f.grid().matches(train.grid()) {
        return Err(Error::GridMismatch);
    }
    Ok(train.densities.iter().zip(&k).map(|(fi, ki)| ki * hellinger_sq(fi.values(), f.values(), dt)).sum())
}

/// Kernel-weighted L2 criterion `sum_i K_H(x_i, x0) int (f_i - f)^2`.
pub fn l2_objective(train: &TrainingSet, x0: &[f64], h: &Bandwidth, f: &Density) -> Result<f64> {
    let k = kernel_values(train, x0, h)?;
    let dt = train.grid().dt();
    if !f.grid().matches(train.grid()) {
        return Err(Error::GridMismatch);
    }
    Ok(train.densities.iter().zip(&k).map(|(fi, ki)| ki * l2_sq(fi.values(), f.values(), dt)).sum())
}

/// Largest rate of decrease of the Hellinger criterion at `f`, divided by
/// `sum_i K_i`, along the directions `p - f` for the probe densities `p`:
/// every `f_i`, their mean, and the uniform density on the support of `f`.
/// Zero (up to rounding) when `f` minimizes the criterion; infinite when a
/// probe adds mass where `f` vanishes but some weighted `f_i` does not.
pub fn hellinger_descent_rate(train: &TrainingSet, x0: &[f64], h: &Bandwidth, f: &Density) -> Result<f64> {
    if !f.grid().matches(train.grid()) {
        return Err(Error::GridMismatch);
    }
    let k = kernel_values(train, x0, h)?;
    let ksum: f64 = k.iter().sum();
    let grid = *train.grid();
    let dt = grid.dt();
    let fv = f.values();
    let m = grid.len();

    let mut root_mix = vec![0.0; m];
    for (fi, ki) in train.densities.iter().zip(&k) {
        for (r, v) in root_mix.iter_mut().zip(fi.values()) {
            *r += ki * v.sqrt();
        }
    }
    // gradient of the criterion on the support of f
    let grad: Vec<f64> = (0..m).map(|j| if fv[j] > 0.0 { ksum - root_mix[j] / fv[j].sqrt() } else { 0.0 }).collect();

    let mut probes: Vec<Vec<f64>> = train.densities.iter().map(|d| d.values().to_vec()).collect();
    let n = train.len() as f64;
    probes.push((0..m).map(|j| train.densities.iter().map(|d| d.values()[j]).sum::<f64>() / n).collect());
    let support = fv.iter().filter(|v| **v > 0.0).count() as f64;
    probes.push(fv.iter().map(|v| if *v > 0.0 { 1.0 / (support * dt) } else { 0.0 }).collect());

    let mut worst: f64 = 0.0;
    for p in &probes {
        let mut deriv = 0.0;
        for j in 0..m {
            if fv[j] > 0.0 {
                deriv += grad[j] * (p[j] - fv[j]);
            } else if p[j] > 0.0 {
                if root_mix[j] > 0.0 {
                    return Ok(f64::INFINITY);
                }
                deriv += ksum * p[j];
            }
        }
        worst = worst.max(-deriv * dt / ksum);
    }
    Ok(worst)
}

/// First-order optimality residual of the prediction at `x0`.
///
/// For L2 this is `|| sum_i K_H(x_i, x0) (f_i - f0) ||`, which vanishes for the
/// kernel-weighted mean. For Hellinger it is [`hellinger_descent_rate`] at the
/// prediction.
pub fn stationarity_check(train: &TrainingSet, x0: &[f64], h: &Bandwidth, metric: Metric) -> Result<f64> {
    match metric {
        Metric::L2 => {
            let f0 = predict_l2(train, x0, h)?;
            let k = kernel_values(train, x0, h)?;
            let mut r = vec![0.0; train.grid().len()];
            for (fi, ki) in train.densities.iter().zip(&k) {
                for ((rj, a), b) in r.iter_mut().zip(fi.values()).zip(f0.values()) {
                    *rj += ki * (a - b);
                }
            }
            Ok((r.iter().map(|v| v * v).sum::<f64>() * train.grid().dt()).sqrt())
        }
        Metric::Hellinger => {
            let f0 = predict_hellinger(train, x0, h)?;
            hellinger_descent_rate(train, x0, h, &f0)
        }
    }
}
