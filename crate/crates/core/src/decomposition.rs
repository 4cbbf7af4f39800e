//! Finite bases for a sample of densities.
//!
//! Each sample density `f_i` is approximated by `sum_k psi_ik w_k`. The convex
//! methods (MMP, AQM and the random baseline) keep every `w_k` a density and
//! every coefficient row on the simplex, so reconstructions are densities by
//! construction. CPCA works in the linear span of centered densities and
//! clips the reconstruction back to a density afterwards.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
#[allow(unused_imports)] // inherent methods exist only when std is linked
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::density::{hellinger_sq, l2_sq, relative_errors, Density, Grid, RelativeErrors};
use crate::kernel_regression::Metric;
use crate::qp::{solve_traced, QpEvent, QuadraticProgram, SimplexProjector};
use crate::{Error, Result};

/// AQM stops once a full sweep lowers the objective by less than this fraction.
pub const AQM_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Cpca,
    MmpL2,
    MmpHellinger,
    Aqm,
    Random,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Cpca, Method::MmpL2, Method::MmpHellinger, Method::Aqm, Method::Random];

    pub fn name(self) -> &'static str {
        match self {
            Method::Cpca => "CPCA",
            Method::MmpL2 => "MMP_L2",
            Method::MmpHellinger => "MMP_HELLINGER",
            Method::Aqm => "AQM",
            Method::Random => "RANDOM",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Basis {
    /// Densities `w_1, ..., w_q`.
    Convex(Vec<Density>),
    /// Mean density plus components orthonormal under the `dt`-weighted inner product.
    Pca { mean: Density, components: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionModel {
    method: Method,
    grid: Grid,
    basis: Basis,
    coeffs: Vec<Vec<f64>>,
    selected: Option<Vec<usize>>,
    history: Vec<f64>,
    seed: Option<u64>,
}

impl DecompositionModel {
    /// Reassembles a model, e.g. one read back from disk.
    pub fn from_parts(
        method: Method,
        basis: Basis,
        coeffs: Vec<Vec<f64>>,
        selected: Option<Vec<usize>>,
        history: Vec<f64>,
        seed: Option<u64>,
    ) -> Result<Self> {
        let (grid, q) = match &basis {
            Basis::Convex(w) => {
                let first = w.first().ok_or_else(|| Error::InvalidArgument("empty basis".into()))?;
                if w.iter().any(|d| !d.grid().matches(first.grid())) {
                    return Err(Error::GridMismatch);
                }
                (*first.grid(), w.len())
            }
            Basis::Pca { mean, components } => {
                if let Some(c) = components.iter().find(|c| c.len() != mean.len()) {
                    return Err(Error::DimensionMismatch { expected: mean.len(), got: c.len() });
                }
                (*mean.grid(), components.len())
            }
        };
        if q == 0 {
            return Err(Error::InvalidArgument("empty basis".into()));
        }
        if let Some(row) = coeffs.iter().find(|r| r.len() != q) {
            return Err(Error::DimensionMismatch { expected: q, got: row.len() });
        }
        Ok(Self { method, grid, basis, coeffs, selected, history, seed })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Number of basis functions.
    pub fn q(&self) -> usize {
        match &self.basis {
            Basis::Convex(w) => w.len(),
            Basis::Pca { components, .. } => components.len(),
        }
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    /// `N x q` coefficient matrix, one row per sample.
    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    /// Sample indices used as basis functions, in selection order (MMP, random).
    pub fn selected_indices(&self) -> Option<&[usize]> {
        self.selected.as_deref()
    }

    /// Objective after every half-sweep (AQM), sup-error after every step
    /// (MMP), or component variances (CPCA).
    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// `sum_k psi_k w_k`, plus the mean for CPCA, before any clipping.
    pub fn combine(&self, psi: &[f64]) -> Result<Vec<f64>> {
        if psi.len() != self.q() {
            return Err(Error::DimensionMismatch { expected: self.q(), got: psi.len() });
        }
        let (mut out, rows): (Vec<f64>, Vec<&[f64]>) = match &self.basis {
            Basis::Convex(w) => (vec![0.0; self.grid.len()], w.iter().map(|d| d.values()).collect()),
            Basis::Pca { mean, components } => (mean.values().to_vec(), components.iter().map(|c| c.as_slice()).collect()),
        };
        for (row, p) in rows.iter().zip(psi) {
            for (o, v) in out.iter_mut().zip(row.iter()) {
                *o += p * v;
            }
        }
        Ok(out)
    }

    /// Reconstruction of sample `i` before clipping.
    pub fn reconstruct_raw(&self, i: usize) -> Result<Vec<f64>> {
        let psi = self.coeffs.get(i).ok_or(Error::DimensionMismatch { expected: self.coeffs.len(), got: i + 1 })?;
        self.combine(psi)
    }

    /// Reconstruction of sample `i` as a density: negatives clipped to zero,
    /// then renormalized unless the integral is already one within tolerance.
    pub fn reconstruct(&self, i: usize) -> Result<Density> {
        let clipped: Vec<f64> = self.reconstruct_raw(i)?.into_iter().map(|v| v.max(0.0)).collect();
        Density::new(self.grid, clipped.clone()).or_else(|_| Density::normalized(self.grid, clipped))
    }
}

fn check_sample(f: &[Density]) -> Result<Grid> {
    let first = f.first().ok_or(Error::TooFewPairs { needed: 1, got: 0 })?;
    let grid = *first.grid();
    if f.iter().any(|d| !d.grid().matches(&grid)) {
        return Err(Error::GridMismatch);
    }
    Ok(grid)
}

fn check_q(q: usize, lo: usize, hi: usize) -> Result<()> {
    if q < lo || q > hi {
        return Err(Error::InvalidArgument(alloc::format!("basis size {q} outside [{lo}, {hi}]")));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Zero-mean cosine `cos(pi k (j + 1/2) / M)` used to complete a degenerate PCA basis.
fn cosine_mode(k: usize, m: usize) -> Vec<f64> {
    (0..m).map(|j| (core::f64::consts::PI * k as f64 * (j as f64 + 0.5) / m as f64).cos()).collect()
}

/// Removes the components along `basis` (orthonormal under `dt`) twice over.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>], dt: f64) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b) * dt;
            for (x, y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
    }
}

/// Functional PCA of the sample, with clipped reconstructions.
///
/// Components come from the eigendecomposition of the `N x N` snapshot
/// matrix `dt/(N-1) F_c F_c'`, sorted by decreasing variance, each with its
/// largest-magnitude entry positive. When the centered data have rank below
/// `q`, the basis is completed with orthogonalized zero-mean cosines.
pub fn cpca_fit(f: &[Density], q: usize) -> Result<DecompositionModel> {
    let grid = check_sample(f)?;
    let n = f.len();
    check_q(q, 1, n.saturating_sub(1))?;
    let m = grid.len();
    let dt = grid.dt();

    let mut mean = vec![0.0; m];
    for d in f {
        for (a, v) in mean.iter_mut().zip(d.values()) {
            *a += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n as f64);
    let centered: Vec<Vec<f64>> = f.iter().map(|d| d.values().iter().zip(&mean).map(|(a, b)| a - b).collect()).collect();

    let scale = 1.0 / (n - 1) as f64;
    let snapshot = DMatrix::from_fn(n, n, |i, j| dt * scale * dot(&centered[i], &centered[j]));
    let eig = SymmetricEigen::new(snapshot);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mean_norm = (dot(&mean, &mean) * dt).sqrt();
    let mut components: Vec<Vec<f64>> = Vec::with_capacity(q);
    let mut variances = Vec::with_capacity(q);
    let mut cosine = 1;
    for &k in order.iter().take(q) {
        let lambda = eig.eigenvalues[k].max(0.0);
        let mut w = vec![0.0; m];
        for (i, c) in centered.iter().enumerate() {
            let u = eig.eigenvectors[(i, k)];
            for (x, y) in w.iter_mut().zip(c) {
                *x += u * y;
            }
        }
        orthogonalize(&mut w, &components, dt);
        let mut norm = (dot(&w, &w) * dt).sqrt();
        let mut variance = lambda;
        if !(norm > 1e-9 * mean_norm) {
            variance = 0.0;
            loop {
                w = cosine_mode(cosine, m);
                cosine += 1;
                orthogonalize(&mut w, &components, dt);
                norm = (dot(&w, &w) * dt).sqrt();
                if norm > 1e-6 {
                    break;
                }
            }
        }
        w.iter_mut().for_each(|v| *v /= norm);
        let peak = w.iter().copied().fold(0.0f64, |p, v| if v.abs() > p.abs() { v } else { p });
        if peak < 0.0 {
            w.iter_mut().for_each(|v| *v = -*v);
        }
        components.push(w);
        variances.push(variance);
    }

    let coeffs = centered.iter().map(|c| components.iter().map(|w| dot(c, w) * dt).collect()).collect();
    let mean = Density::normalized(grid, mean)?;
    Ok(DecompositionModel {
        method: Method::Cpca,
        grid,
        basis: Basis::Pca { mean, components },
        coeffs,
        selected: None,
        history: variances,
        seed: None,
    })
}

fn metric_error(metric: Metric, f: &[f64], g: &[f64], dt: f64) -> f64 {
    match metric {
        Metric::L2 => l2_sq(f, g, dt).sqrt(),
        Metric::Hellinger => hellinger_sq(f, g, dt).sqrt(),
    }
}

fn mix(rows: &[&[f64]], psi: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m];
    for (row, p) in rows.iter().zip(psi) {
        if *p != 0.0 {
            for (o, v) in out.iter_mut().zip(row.iter()) {
                *o += p * v;
            }
        }
    }
    out
}

/// Greedy selection of sample densities as basis functions.
///
/// The first pick maximizes the metric norm of `f_i`; every later pick is
/// the sample worst approximated by its simplex projection onto the current
/// basis. Projections are L2 least squares for both metrics; `metric` only
/// decides which error is maximized. Stops after `q_max` picks or once the
/// largest error is at most `tol`.
///
/// The returned history is the largest error after each step. It never
/// increases: a sample's coefficients are only replaced when the new
/// projection does not do worse in `metric` than the previous coefficients
/// padded with a zero.
pub fn mmp_fit(f: &[Density], q_max: usize, metric: Metric, tol: f64) -> Result<DecompositionModel> {
    let grid = check_sample(f)?;
    let n = f.len();
    check_q(q_max, 1, n)?;
    let m = grid.len();
    let dt = grid.dt();
    let values: Vec<&[f64]> = f.iter().map(|d| d.values()).collect();

    let zero = vec![0.0; m];
    let norms: Vec<f64> = values.iter().map(|v| metric_error(metric, v, &zero, dt)).collect();
    let first = argmax(&norms);

    let mut selected = vec![first];
    let mut coeffs: Vec<Vec<f64>> = vec![vec![1.0]; n];
    let mut errors: Vec<f64> = values.iter().map(|v| metric_error(metric, v, values[first], dt)).collect();
    errors[first] = 0.0;
    let mut history = vec![errors.iter().copied().fold(0.0, f64::max)];

    while selected.len() < q_max && history[history.len() - 1] > tol {
        let pick = argmax(&errors);
        if selected.contains(&pick) {
            break;
        }
        selected.push(pick);
        let q = selected.len();
        let columns: Vec<&[f64]> = selected.iter().map(|&k| values[k]).collect();
        let projector = SimplexProjector::new(&columns, dt)?;
        for i in 0..n {
            coeffs[i].push(0.0);
            if let Some(k) = selected.iter().position(|&s| s == i) {
                coeffs[i] = vec![0.0; q];
                coeffs[i][k] = 1.0;
                errors[i] = 0.0;
                continue;
            }
            let psi = projector.project(values[i])?;
            let err = metric_error(metric, values[i], &mix(&columns, &psi, m), dt);
            if err <= errors[i] {
                coeffs[i] = psi;
                errors[i] = err;
            }
        }
        history.push(errors.iter().copied().fold(0.0, f64::max));
    }

    let basis = selected.iter().map(|&k| f[k].clone()).collect();
    Ok(DecompositionModel {
        method: match metric {
            Metric::L2 => Method::MmpL2,
            Metric::Hellinger => Method::MmpHellinger,
        },
        grid,
        basis: Basis::Convex(basis),
        coeffs,
        selected: Some(selected),
        history,
        seed: None,
    })
}

/// First index of the largest value.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Basis of `q` sample densities drawn without replacement.
///
/// The draw is a prefix of one seeded permutation, so bases for increasing
/// `q` under the same seed are nested.
pub fn random_basis_fit(f: &[Density], q: usize, seed: u64) -> Result<DecompositionModel> {
    let grid = check_sample(f)?;
    let n = f.len();
    check_q(q, 1, n)?;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    perm.truncate(q);

    let columns: Vec<&[f64]> = perm.iter().map(|&k| f[k].values()).collect();
    let projector = SimplexProjector::new(&columns, grid.dt())?;
    let coeffs = (0..n)
        .map(|i| match perm.iter().position(|&s| s == i) {
            Some(k) => {
                let mut e = vec![0.0; q];
                e[k] = 1.0;
                Ok(e)
            }
            None => projector.project(f[i].values()),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecompositionModel {
        method: Method::Random,
        grid,
        basis: Basis::Convex(perm.iter().map(|&k| f[k].clone()).collect()),
        coeffs,
        selected: Some(perm),
        history: Vec::new(),
        seed: Some(seed),
    })
}

/// One active-set change inside an AQM basis-row subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct AqmQpEvent {
    pub sweep: usize,
    pub row: usize,
    pub event: QpEvent,
}

/// Alternate quadratic minimizations of `1/2 sum_ij (F_ij - (Psi W)_ij)^2 dt`.
pub fn aqm_fit(f: &[Density], q: usize, iter_max: usize) -> Result<DecompositionModel> {
    aqm_fit_traced(f, q, iter_max, &mut |_| {})
}

/// [`aqm_fit`], reporting every active-set change of the basis-row QPs.
///
/// Starts from `psi_ik = 1/q` and uniform `w_k`. A sweep first projects each
/// coefficient row onto the simplex for the current basis, then solves for
/// each basis row in turn with the others fixed. A basis row whose
/// coefficient column is zero is replaced by the currently worst
/// approximated sample. Either block update is kept only if it does not
/// raise that block's error, so the recorded objective never increases.
/// A last coefficient pass after the final sweep makes every row optimal for
/// the returned basis.
pub fn aqm_fit_traced(
    f: &[Density],
    q: usize,
    iter_max: usize,
    trace: &mut dyn FnMut(&AqmQpEvent),
) -> Result<DecompositionModel> {
    let grid = check_sample(f)?;
    if q < 1 {
        return Err(Error::InvalidArgument("basis size must be at least 1".into()));
    }
    if iter_max < 1 {
        return Err(Error::InvalidArgument("iter_max must be at least 1".into()));
    }
    let n = f.len();
    let m = grid.len();
    let dt = grid.dt();
    let values: Vec<&[f64]> = f.iter().map(|d| d.values()).collect();

    let mut psi = vec![vec![1.0 / q as f64; q]; n];
    let mut w = vec![vec![1.0 / (m as f64 * dt); m]; q];
    let mut history = vec![aqm_objective(&values, &psi, &w, dt)];

    // Constraint normals for every basis row: sum_j w_j dt = 1, then w_j >= 0.
    let mut normals = Vec::with_capacity(m + 1);
    normals.push(vec![dt; m]);
    for j in 0..m {
        let mut e = vec![0.0; m];
        e[j] = 1.0;
        normals.push(e);
    }
    let mut rhs = vec![0.0; m + 1];
    rhs[0] = 1.0;

    for sweep in 0..iter_max {
        let start = history[history.len() - 1];

        update_coeffs(&values, &mut psi, &w, dt)?;
        history.push(aqm_objective(&values, &psi, &w, dt));

        for k in 0..q {
            let weight: f64 = psi.iter().map(|r| r[k] * r[k]).sum();
            if weight == 0.0 {
                let worst = argmax(&(0..n).map(|i| row_residual(values[i], &psi[i], &w, dt)).collect::<Vec<_>>());
                w[k] = values[worst].to_vec();
                continue;
            }
            // linear term psi_k' R, R the residual without component k
            let mut a = vec![0.0; m];
            for (i, row) in psi.iter().enumerate() {
                let p = row[k];
                if p == 0.0 {
                    continue;
                }
                for j in 0..m {
                    let others: f64 = (0..q).filter(|&l| l != k).map(|l| row[l] * w[l][j]).sum();
                    a[j] += p * (values[i][j] - others);
                }
            }
            let mut g = vec![0.0; m * m];
            for j in 0..m {
                g[j * m + j] = weight;
            }
            let program = QuadraticProgram::new(g, a, &normals, rhs.clone(), 1)?;
            let sol = solve_traced(&program, &mut |event| trace(&AqmQpEvent { sweep, row: k, event: *event }))?;
            let mut row: Vec<f64> = sol.x.iter().map(|v| v.max(0.0)).collect();
            let mass = row.iter().sum::<f64>() * dt;
            row.iter_mut().for_each(|v| *v /= mass);

            let before = aqm_objective(&values, &psi, &w, dt);
            let previous = core::mem::replace(&mut w[k], row);
            if aqm_objective(&values, &psi, &w, dt) > before {
                w[k] = previous;
            }
        }
        let end = aqm_objective(&values, &psi, &w, dt);
        history.push(end);

        if end == 0.0 || start - end < AQM_REL_TOL * start {
            break;
        }
    }

    // leave the coefficients optimal for the returned basis
    update_coeffs(&values, &mut psi, &w, dt)?;
    history.push(aqm_objective(&values, &psi, &w, dt));

    let basis = w.into_iter().map(|row| Density::normalized(grid, row)).collect::<Result<Vec<_>>>()?;
    Ok(DecompositionModel {
        method: Method::Aqm,
        grid,
        basis: Basis::Convex(basis),
        coeffs: psi,
        selected: None,
        history,
        seed: None,
    })
}

/// Projects every coefficient row onto the simplex for basis `w`, keeping
/// the old row when the projection is not better.
fn update_coeffs(values: &[&[f64]], psi: &mut [Vec<f64>], w: &[Vec<f64>], dt: f64) -> Result<()> {
    let columns: Vec<&[f64]> = w.iter().map(|r| r.as_slice()).collect();
    let projector = SimplexProjector::new(&columns, dt)?;
    for (y, row) in values.iter().zip(psi.iter_mut()) {
        let candidate = projector.project(y)?;
        if row_residual(y, &candidate, w, dt) <= row_residual(y, row, w, dt) {
            *row = candidate;
        }
    }
    Ok(())
}

fn row_residual(y: &[f64], psi: &[f64], w: &[Vec<f64>], dt: f64) -> f64 {
    let mut s = 0.0;
    for (j, yj) in y.iter().enumerate() {
        let fit: f64 = psi.iter().zip(w).map(|(p, row)| p * row[j]).sum();
        s += (yj - fit) * (yj - fit);
    }
    s * dt
}

/// `1/2 sum_i sum_j (F_ij - (Psi W)_ij)^2 dt`.
pub fn aqm_objective(f: &[&[f64]], psi: &[Vec<f64>], w: &[Vec<f64>], dt: f64) -> f64 {
    0.5 * f.iter().zip(psi).map(|(y, p)| row_residual(y, p, w, dt)).sum::<f64>()
}

/// Relative errors of every reconstruction, one row per sample.
pub fn reconstruction_errors(model: &DecompositionModel, f: &[Density]) -> Result<Vec<RelativeErrors>> {
    if f.len() != model.coeffs.len() {
        return Err(Error::DimensionMismatch { expected: model.coeffs.len(), got: f.len() });
    }
    f.iter().enumerate().map(|(i, truth)| relative_errors(truth, &model.reconstruct(i)?)).collect()
}

/// Short human-readable summary, e.g. for logs.
pub fn describe(model: &DecompositionModel) -> String {
    alloc::format!("{} with q = {} on {} samples", model.method, model.q(), model.coeffs.len())
}
