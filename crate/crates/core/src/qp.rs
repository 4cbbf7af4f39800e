//! Strictly convex quadratic programming by the Goldfarb-Idnani dual
//! active-set method.
//!
//! Programs have the form
//!
//! ```text
//!     minimize    1/2 x'Gx - a'x
//!     subject to  C_k' x  = b_k   for k < meq
//!                 C_k' x >= b_k   for k >= meq
//! ```
//!
//! The solver starts from the unconstrained minimizer `G^-1 a` with an empty
//! active set and repeatedly adds the most violated constraint, dropping
//! active inequalities whose multipliers would turn negative. It keeps the
//! factorization `J' N = [R; 0]` with `J = L^-T` (`G = LL'`) and `N` the
//! active constraint normals, updated by Givens rotations.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent methods exist only when std is linked
use num_traits::Float;

use crate::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
/// Relative size of the component of a new normal outside the active span
/// below which the normal is treated as linearly dependent.
const DEPENDENCE_TOL: f64 = 1e-14;
const FEASIBILITY_TOL: f64 = 1e-12;

/// `minimize 1/2 x'Gx - a'x` subject to `C'x >= b`, first `meq` rows as equalities.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProgram {
    n: usize,
    g: Vec<f64>,
    a: Vec<f64>,
    /// Constraint normals, column `k` at `c[k*n..(k+1)*n]`.
    c: Vec<f64>,
    b: Vec<f64>,
    meq: usize,
}

impl QuadraticProgram {
    /// `g` is `n x n` row-major, `constraints` holds one normal per constraint.
    pub fn new(g: Vec<f64>, a: Vec<f64>, constraints: &[Vec<f64>], b: Vec<f64>, meq: usize) -> Result<Self> {
        let n = a.len();
        if g.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: g.len() });
        }
        if constraints.len() != b.len() {
            return Err(Error::DimensionMismatch { expected: constraints.len(), got: b.len() });
        }
        if meq > b.len() {
            return Err(Error::InvalidArgument(alloc::format!("meq = {meq} exceeds {} constraints", b.len())));
        }
        let mut c = Vec::with_capacity(n * constraints.len());
        for col in constraints {
            if col.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: col.len() });
            }
            c.extend_from_slice(col);
        }
        let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in 0..i {
                if (g[i * n + j] - g[j * n + i]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::InvalidArgument(alloc::format!("G is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { n, g, a, c, b, meq })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_constraints(&self) -> usize {
        self.b.len()
    }

    pub fn num_equalities(&self) -> usize {
        self.meq
    }

    pub fn hessian(&self) -> &[f64] {
        &self.g
    }

    pub fn linear(&self) -> &[f64] {
        &self.a
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    pub fn normal(&self, k: usize) -> &[f64] {
        &self.c[k * self.n..(k + 1) * self.n]
    }

    /// `1/2 x'Gx - a'x`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let n = self.n;
        let mut quad = 0.0;
        for i in 0..n {
            let row = &self.g[i * n..(i + 1) * n];
            quad += x[i] * dot(row, x);
        }
        0.5 * quad - dot(&self.a, x)
    }

    /// `C_k'x - b_k` for every constraint.
    pub fn slacks(&self, x: &[f64]) -> Vec<f64> {
        (0..self.b.len()).map(|k| dot(self.normal(k), x) - self.b[k]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// One multiplier per constraint; zero for inactive ones.
    pub lagrange: Vec<f64>,
    /// Indices of the active constraints, in the order they were added.
    pub active_set: Vec<usize>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStep {
    Add,
    Drop,
}

/// One change of the active set, reported to the optional trace sink.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpEvent {
    pub iteration: usize,
    pub step: QpStep,
    pub constraint: usize,
    pub active: usize,
    pub objective: f64,
}

pub fn solve(qp: &QuadraticProgram) -> Result<QpSolution> {
    Solver::new(qp)?.run(qp, &mut |_| {})
}

/// Same as [`solve`], reporting every active-set change to `trace`.
pub fn solve_traced(qp: &QuadraticProgram, trace: &mut dyn FnMut(&QpEvent)) -> Result<QpSolution> {
    Solver::new(qp)?.run(qp, trace)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// In-place Cholesky `G = LL'`, returning `L` row-major.
fn cholesky(g: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = g[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = g[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Ok(l)
}

fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    let h = a.hypot(b);
    (a / h, b / h, h)
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (u, v) in x.iter_mut().zip(y.iter_mut()) {
        let (p, q) = (*u, *v);
        *u = c * p + s * q;
        *v = -s * p + c * q;
    }
}

fn two_columns(cols: &mut [Vec<f64>], i: usize) -> (&mut Vec<f64>, &mut Vec<f64>) {
    let (lo, hi) = cols.split_at_mut(i + 1);
    (&mut lo[i], &mut hi[0])
}

struct Solver {
    n: usize,
    /// Columns of `J`.
    j: Vec<Vec<f64>>,
    /// Columns of the upper-triangular `R`, column `k` has `k + 1` meaningful entries.
    r: Vec<Vec<f64>>,
    x: Vec<f64>,
    f: f64,
    active: Vec<usize>,
    /// Multipliers of the active constraints.
    u: Vec<f64>,
    /// `-1` for equalities entered with a flipped sign.
    sign: Vec<f64>,
    nonzeros: Vec<Vec<usize>>,
}

impl Solver {
    fn new(qp: &QuadraticProgram) -> Result<Self> {
        let n = qp.n;
        let mut j = vec![vec![0.0; n]; n];
        let diagonal = (0..n).all(|r| (0..n).all(|c| r == c || qp.g[r * n + c] == 0.0));
        if diagonal {
            for (i, jc) in j.iter_mut().enumerate() {
                let d = qp.g[i * n + i];
                if !(d > 0.0) || !d.is_finite() {
                    return Err(Error::NotPositiveDefinite);
                }
                jc[i] = 1.0 / d.sqrt();
            }
        } else {
            Self::inverse_factor(&qp.g, n, &mut j)?;
        }
        // x0 = J J' a
        let jta: Vec<f64> = j.iter().map(|c| dot(c, &qp.a)).collect();
        let mut x = vec![0.0; n];
        for (c, w) in j.iter().zip(&jta) {
            for (xi, ci) in x.iter_mut().zip(c) {
                *xi += ci * w;
            }
        }
        let f = -0.5 * dot(&qp.a, &x);
        let nonzeros = (0..qp.b.len())
            .map(|k| qp.normal(k).iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect())
            .collect();
        Ok(Self {
            n,
            j,
            r: Vec::new(),
            x,
            f,
            active: Vec::new(),
            u: Vec::new(),
            sign: Vec::new(),
            nonzeros,
        })
    }

    /// `J = L^-T` for `G = LL'`: solves `L' J = I` column by column.
    fn inverse_factor(g: &[f64], n: usize, j: &mut [Vec<f64>]) -> Result<()> {
        let l = cholesky(g, n)?;
        for (col, jc) in j.iter_mut().enumerate() {
            for i in (0..=col).rev() {
                let mut s = if i == col { 1.0 } else { 0.0 };
                for k in i + 1..=col {
                    s -= l[k * n + i] * jc[k];
                }
                jc[i] = s / l[i * n + i];
            }
        }
        Ok(())
    }

    fn slack(&self, qp: &QuadraticProgram, k: usize) -> f64 {
        let col = qp.normal(k);
        self.nonzeros[k].iter().map(|&i| col[i] * self.x[i]).sum::<f64>() - qp.b[k]
    }

    fn tolerance(&self, qp: &QuadraticProgram, k: usize) -> f64 {
        let col = qp.normal(k);
        let mag: f64 = self.nonzeros[k].iter().map(|&i| (col[i] * self.x[i]).abs()).sum();
        FEASIBILITY_TOL * (1.0 + qp.b[k].abs() + mag)
    }

    fn run(mut self, qp: &QuadraticProgram, trace: &mut dyn FnMut(&QpEvent)) -> Result<QpSolution> {
        let ncon = qp.b.len();
        let cap = 50 * (self.n + ncon);
        let mut iterations = 0;
        let mut is_active = vec![false; ncon];

        loop {
            // pick the next constraint: pending equalities first, then the most violated inequality
            let mut pick = None;
            for k in 0..qp.meq {
                if !is_active[k] {
                    pick = Some(k);
                    break;
                }
            }
            if pick.is_none() {
                let mut worst = 0.0;
                for k in qp.meq..ncon {
                    if is_active[k] {
                        continue;
                    }
                    let s = self.slack(qp, k);
                    if s < -self.tolerance(qp, k) && s < worst {
                        worst = s;
                        pick = Some(k);
                    }
                }
            }
            let Some(p) = pick else { break };
            let equality = p < qp.meq;

            let mut sgn = 1.0;
            if equality && self.slack(qp, p) > 0.0 {
                sgn = -1.0;
            }
            let normal: Vec<f64> = qp.normal(p).iter().map(|v| sgn * v).collect();
            let nz = self.nonzeros[p].clone();
            let mut u_new = 0.0;

            loop {
                iterations += 1;
                if iterations > cap {
                    return Err(Error::IterationLimit(cap));
                }
                let q = self.active.len();
                let mut d: Vec<f64> = self.j.iter().map(|c| nz.iter().map(|&i| c[i] * normal[i]).sum()).collect();
                let mut z = vec![0.0; self.n];
                for i in q..self.n {
                    if d[i] != 0.0 {
                        for (zk, jk) in z.iter_mut().zip(&self.j[i]) {
                            *zk += d[i] * jk;
                        }
                    }
                }
                let r = self.back_substitute(&d[..q]);
                let total: f64 = d.iter().map(|v| v * v).sum();
                let zn: f64 = d[q..].iter().map(|v| v * v).sum();
                let s_p = sgn * self.slack(qp, p);

                // partial (dual) step
                let mut t1 = f64::INFINITY;
                let mut drop_at = None;
                for (idx, (&rj, &uj)) in r.iter().zip(&self.u).enumerate() {
                    if self.active[idx] < qp.meq || rj <= 0.0 {
                        continue;
                    }
                    let t = uj / rj;
                    if t < t1 {
                        t1 = t;
                        drop_at = Some(idx);
                    }
                }
                let dependent = zn <= DEPENDENCE_TOL * total;
                let t2 = if dependent { f64::INFINITY } else { -s_p / zn };

                if dependent && equality && s_p.abs() <= self.tolerance(qp, p) {
                    // redundant equality, already satisfied
                    is_active[p] = true;
                    break;
                }
                if t1.is_infinite() && t2.is_infinite() {
                    return Err(Error::Infeasible);
                }
                if t2.is_infinite() {
                    for (uj, rj) in self.u.iter_mut().zip(&r) {
                        *uj -= t1 * rj;
                    }
                    u_new += t1;
                    let idx = drop_at.expect("finite partial step has a blocking constraint");
                    let k = self.active[idx];
                    is_active[k] = false;
                    self.drop_active(idx);
                    trace(&QpEvent { iteration: iterations, step: QpStep::Drop, constraint: k, active: self.active.len(), objective: self.f });
                    continue;
                }

                let t = t1.min(t2);
                for (xi, zi) in self.x.iter_mut().zip(&z) {
                    *xi += t * zi;
                }
                self.f += t * zn * (0.5 * t + u_new);
                for (uj, rj) in self.u.iter_mut().zip(&r) {
                    *uj -= t * rj;
                }
                u_new += t;

                if t2 <= t1 {
                    self.add_active(&mut d, p, u_new, sgn);
                    is_active[p] = true;
                    trace(&QpEvent { iteration: iterations, step: QpStep::Add, constraint: p, active: self.active.len(), objective: self.f });
                    break;
                }
                let idx = drop_at.expect("partial step has a blocking constraint");
                let k = self.active[idx];
                is_active[k] = false;
                self.drop_active(idx);
                trace(&QpEvent { iteration: iterations, step: QpStep::Drop, constraint: k, active: self.active.len(), objective: self.f });
            }
        }

        let mut lagrange = vec![0.0; ncon];
        for ((&k, &uk), &s) in self.active.iter().zip(&self.u).zip(&self.sign) {
            lagrange[k] = s * uk;
        }
        let objective = qp.objective(&self.x);
        Ok(QpSolution { x: self.x, lagrange, active_set: self.active, objective, iterations })
    }

    /// Solves `R r = d` for the current active block.
    fn back_substitute(&self, d: &[f64]) -> Vec<f64> {
        let q = d.len();
        let mut r = vec![0.0; q];
        for i in (0..q).rev() {
            let mut s = d[i];
            for k in i + 1..q {
                s -= self.r[k][i] * r[k];
            }
            r[i] = s / self.r[i][i];
        }
        r
    }

    fn add_active(&mut self, d: &mut [f64], k: usize, u: f64, sign: f64) {
        let q = self.active.len();
        for i in (q + 1..self.n).rev() {
            if d[i] == 0.0 {
                continue;
            }
            let (c, s, h) = givens(d[i - 1], d[i]);
            d[i - 1] = h;
            d[i] = 0.0;
            let (a, b) = two_columns(&mut self.j, i - 1);
            rotate(a, b, c, s);
        }
        let mut col = vec![0.0; self.n];
        col[..=q].copy_from_slice(&d[..=q]);
        self.r.push(col);
        self.active.push(k);
        self.u.push(u);
        self.sign.push(sign);
    }

    fn drop_active(&mut self, idx: usize) {
        self.r.remove(idx);
        self.active.remove(idx);
        self.u.remove(idx);
        self.sign.remove(idx);
        let q = self.active.len();
        // columns idx..q are now upper Hessenberg
        for i in idx..q {
            let (c, s, h) = givens(self.r[i][i], self.r[i][i + 1]);
            self.r[i][i] = h;
            self.r[i][i + 1] = 0.0;
            for col in self.r.iter_mut().skip(i + 1) {
                let (p, w) = (col[i], col[i + 1]);
                col[i] = c * p + s * w;
                col[i + 1] = -s * p + c * w;
            }
            let (a, b) = two_columns(&mut self.j, i);
            rotate(a, b, c, s);
        }
        for col in self.r.iter_mut().skip(idx) {
            for v in col.iter_mut().skip(q + 1) {
                *v = 0.0;
            }
        }
    }
}

/// Least-squares projection onto convex combinations of fixed columns:
/// `argmin sum_j (y_j - sum_k psi_k A_jk)^2 dt` subject to `psi >= 0`, `sum psi = 1`.
///
/// The Gram matrix is factored once, so projecting many targets onto the
/// same basis costs one small QP each.
#[derive(Debug, Clone)]
pub struct SimplexProjector<'a> {
    columns: Vec<&'a [f64]>,
    dt: f64,
    /// `dt * A'A`, row-major.
    gram: Vec<f64>,
    /// `1e-10 * trace(dt A'A) / q`.
    ridge: f64,
}

impl<'a> SimplexProjector<'a> {
    pub fn new(columns: &[&'a [f64]], dt: f64) -> Result<Self> {
        let q = columns.len();
        if q == 0 {
            return Err(Error::InvalidArgument("simplex projection needs at least one column".into()));
        }
        let m = columns[0].len();
        if let Some(bad) = columns.iter().find(|c| c.len() != m) {
            return Err(Error::DimensionMismatch { expected: m, got: bad.len() });
        }
        let mut gram = vec![0.0; q * q];
        for i in 0..q {
            for k in 0..=i {
                let v = dt * dot(columns[i], columns[k]);
                gram[i * q + k] = v;
                gram[k * q + i] = v;
            }
        }
        let trace: f64 = (0..q).map(|i| gram[i * q + i]).sum();
        let ridge = if trace > 0.0 { 1e-10 * trace / q as f64 } else { 1e-10 };
        Ok(Self { columns: columns.to_vec(), dt, gram, ridge })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// The QP solved for target `y`.
    pub fn program(&self, y: &[f64]) -> Result<QuadraticProgram> {
        let q = self.columns.len();
        if let Some(c) = self.columns.first() {
            if c.len() != y.len() {
                return Err(Error::DimensionMismatch { expected: c.len(), got: y.len() });
            }
        }
        let mut g = self.gram.clone();
        for i in 0..q {
            g[i * q + i] += self.ridge;
        }
        let a: Vec<f64> = self.columns.iter().map(|c| self.dt * dot(c, y)).collect();
        let mut constraints = Vec::with_capacity(q + 1);
        constraints.push(vec![1.0; q]);
        for k in 0..q {
            let mut e = vec![0.0; q];
            e[k] = 1.0;
            constraints.push(e);
        }
        let mut b = vec![0.0; q + 1];
        b[0] = 1.0;
        QuadraticProgram::new(g, a, &constraints, b, 1)
    }

    /// Squared residual `sum_j (y_j - (A psi)_j)^2 dt`.
    pub fn residual(&self, y: &[f64], psi: &[f64]) -> f64 {
        let mut s = 0.0;
        for (j, yj) in y.iter().enumerate() {
            let fit: f64 = self.columns.iter().zip(psi).map(|(c, w)| c[j] * w).sum();
            s += (yj - fit) * (yj - fit);
        }
        s * self.dt
    }

    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        let q = self.columns.len();
        if q == 1 {
            return Ok(vec![1.0]);
        }
        let sol = solve(&self.program(y)?)?;
        let mut psi: Vec<f64> = sol.x.iter().map(|v| v.max(0.0)).collect();
        let total: f64 = psi.iter().sum();
        psi.iter_mut().for_each(|v| *v /= total);

        // The ridge term can leave the solution a hair worse than a vertex
        // when a vertex is optimal; keep whichever fits best.
        let mut best = self.residual(y, &psi);
        for k in 0..q {
            let mut e = vec![0.0; q];
            e[k] = 1.0;
            let res = self.residual(y, &e);
            if res < best {
                best = res;
                psi = e;
            }
        }
        Ok(psi)
    }
}

/// Convenience wrapper around [`SimplexProjector`] for a single target.
pub fn simplex_lsq(columns: &[&[f64]], y: &[f64], dt: f64) -> Result<Vec<f64>> {
    SimplexProjector::new(columns, dt)?.project(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn qp(g: &[f64], a: &[f64], cons: &[Vec<f64>], b: &[f64], meq: usize) -> QuadraticProgram {
        QuadraticProgram::new(g.to_vec(), a.to_vec(), cons, b.to_vec(), meq).unwrap()
    }

    #[test]
    fn symmetric_split_on_simplex() {
        let p = qp(&[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0], &[vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 0.0, 0.0], 1);
        let s = solve(&p).unwrap();
        assert!((s.x[0] - 0.5).abs() < 1e-14 && (s.x[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn interior_optimum_is_unconstrained_minimizer() {
        let p = qp(&[1.0, 0.0, 0.0, 1.0], &[1.0, 2.0], &[vec![1.0, 0.0], vec![0.0, 1.0]], &[-5.0, -5.0], 0);
        let s = solve(&p).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-14 && (s.x[1] - 2.0).abs() < 1e-14);
        assert!(s.active_set.is_empty());
        assert_eq!(s.lagrange, vec![0.0, 0.0]);
    }

    #[test]
    fn infeasible_program_is_reported() {
        // x >= 1 and -x >= 0
        let p = qp(&[1.0], &[0.0], &[vec![1.0], vec![-1.0]], &[1.0, 0.0], 0);
        assert_eq!(solve(&p), Err(Error::Infeasible));
        // x = 1 and x = 2
        let p = qp(&[1.0], &[0.0], &[vec![1.0], vec![1.0]], &[1.0, 2.0], 2);
        assert_eq!(solve(&p), Err(Error::Infeasible));
    }

    #[test]
    fn indefinite_hessian_is_rejected() {
        let p = qp(&[1.0, 0.0, 0.0, -1.0], &[0.0, 0.0], &[], &[], 0);
        assert_eq!(solve(&p), Err(Error::NotPositiveDefinite));
        assert!(QuadraticProgram::new(vec![1.0, 0.5, 0.0, 1.0], vec![0.0; 2], &[], vec![], 0).is_err());
    }

    #[test]
    fn equality_entered_from_above() {
        // min 1/2 |x|^2 - (3,3)'x st x1 + x2 = 1: optimum (0.5, 0.5), multiplier 2.5
        let p = qp(&[1.0, 0.0, 0.0, 1.0], &[3.0, 3.0], &[vec![1.0, 1.0]], &[1.0], 1);
        let s = solve(&p).unwrap();
        assert!((s.x[0] - 0.5).abs() < 1e-13);
        // stationarity: Gx - a = C lambda
        assert!((s.x[0] - 3.0 - s.lagrange[0]).abs() < 1e-12);
    }

    #[test]
    fn trace_reports_active_set_changes() {
        let p = qp(&[1.0, 0.0, 0.0, 1.0], &[-1.0, -2.0], &[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.0, 0.0], 0);
        let mut events = Vec::new();
        let s = solve_traced(&p, &mut |e| events.push(*e)).unwrap();
        assert_eq!(s.x, vec![0.0, 0.0]);
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].constraint, 1); // most violated first
        assert!(events.iter().all(|e| e.step == QpStep::Add));
    }

    #[test]
    fn simplex_lsq_single_column() {
        let w = [1.0, 2.0, 3.0];
        assert_eq!(simplex_lsq(&[&w], &[9.0, 9.0, 9.0], 0.1).unwrap(), vec![1.0]);
        assert!(simplex_lsq(&[], &[1.0], 0.1).is_err());
    }

    #[test]
    fn simplex_lsq_recovers_member_column() {
        let a = [1.0, 0.0, 0.0, 1.0];
        let b = [0.0, 1.0, 0.0, 1.0];
        let c = [0.0, 0.0, 1.0, 1.0];
        let psi = simplex_lsq(&[&a, &b, &c], &b, 0.5).unwrap();
        assert_eq!(psi, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn simplex_lsq_midpoint_of_disjoint_columns() {
        // y halfway between two disjoint-support columns: the two-variable
        // problem min_t |y - t a - (1-t) b|^2 has t = 1/2 in closed form.
        let a = [2.0, 2.0, 0.0, 0.0];
        let b = [0.0, 0.0, 2.0, 2.0];
        let y = [1.0, 1.0, 1.0, 1.0];
        let psi = simplex_lsq(&[&a, &b], &y, 0.25).unwrap();
        assert!((psi[0] - 0.5).abs() < 1e-9 && (psi[1] - 0.5).abs() < 1e-9, "{psi:?}");
    }
}
