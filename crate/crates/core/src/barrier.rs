//! Log-barrier interior-point method for the small convex programs behind the
//! FO rate and the cut-set bound.
//!
//! The program is
//!
//! ```text
//! minimize    c . z
//! subject to  a_i . z <= b_i                         (linear inequalities)
//!             e_j . z  = f_j                         (linear equalities)
//!             t (LSE_k(lw_k + P_k / t) - lb) <= 0    (perspective log-sum-exp)
//! ```
//!
//! where `P_k` is the sum of the first `p_k` flow variables of the
//! constraint. Every Gaussian broadcast region scaled by a slot length has
//! this form after telescoping the superposition-coding power sum.
//!
//! Centering uses Newton's method on `c.z / mu + barrier`, started from an
//! arbitrary point that is strictly inside the inequalities; equalities are
//! reached by infeasible-start Newton steps.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Sparse row `coefs . z` compared against `rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearRow {
    pub coefs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearRow {
    pub fn new(coefs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { coefs, rhs }
    }

    pub fn dot(&self, z: &[f64]) -> f64 {
        self.coefs.iter().map(|&(i, a)| a * z[i]).sum()
    }
}

/// `t (LSE_k(log_weights[k] + (x_0 + ... + x_{prefix[k]-1}) / t) - log_budget) <= 0`
/// with `x_j = z[flows[j]]` and `t = z[time]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerspectiveLse {
    pub time: usize,
    pub flows: Vec<usize>,
    /// `(log weight, prefix length)`; prefix lengths in `1..=flows.len()`.
    pub terms: Vec<(f64, usize)>,
    pub log_budget: f64,
}

impl PerspectiveLse {
    /// Constraint value, `+inf` outside the domain `t > 0`.
    pub fn value(&self, z: &[f64]) -> f64 {
        let t = z[self.time];
        if !(t > 0.0) {
            return f64::INFINITY;
        }
        let prefix = self.prefix(z);
        let v: Vec<f64> = self.terms.iter().map(|&(lw, p)| lw + prefix[p] / t).collect();
        t * (log_sum_exp(&v) - self.log_budget)
    }

    fn prefix(&self, z: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flows.len() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for &j in &self.flows {
            acc += z[j];
            out.push(acc);
        }
        out
    }

    /// Value, gradient and Hessian in the local order `(flows..., time)`.
    fn derivatives(&self, z: &[f64]) -> Option<(f64, Vec<f64>, Vec<f64>)> {
        let t = z[self.time];
        if !(t > 0.0) {
            return None;
        }
        let m = self.flows.len();
        let prefix = self.prefix(z);
        let v: Vec<f64> = self.terms.iter().map(|&(lw, p)| lw + prefix[p] / t).collect();
        let lse = log_sum_exp(&v);
        let h = lse - self.log_budget;
        // pi_j = sum of softmax weights over terms that include flow j
        let mut pi = vec![0.0; m];
        for (&(_, p), &vk) in self.terms.iter().zip(&v) {
            let q = (vk - lse).exp();
            for pj in pi.iter_mut().take(p) {
                *pj += q;
            }
        }
        let u: Vec<f64> = self.flows.iter().map(|&j| z[j] / t).collect();
        let pu: f64 = pi.iter().zip(&u).map(|(a, b)| a * b).sum();

        let dim = m + 1;
        let mut grad = vec![0.0; dim];
        grad[..m].copy_from_slice(&pi);
        grad[m] = h - pu;

        let mut hu = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                hu[i * m + j] = pi[i.max(j)] - pi[i] * pi[j];
            }
        }
        let w: Vec<f64> = (0..m).map(|i| (0..m).map(|j| hu[i * m + j] * u[j]).sum()).collect();
        let uhu: f64 = u.iter().zip(&w).map(|(a, b)| a * b).sum();
        let mut hess = vec![0.0; dim * dim];
        for i in 0..m {
            for j in 0..m {
                hess[i * dim + j] = hu[i * m + j] / t;
            }
            hess[i * dim + m] = -w[i] / t;
            hess[m * dim + i] = -w[i] / t;
        }
        hess[m * dim + m] = uhu / t;
        Some((t * h, grad, hess))
    }

    fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.flows.iter().copied().chain(std::iter::once(self.time))
    }
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + v.iter().map(|&x| (x - top).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Program {
    pub n_vars: usize,
    pub cost: Vec<f64>,
    pub inequalities: Vec<LinearRow>,
    pub equalities: Vec<LinearRow>,
    pub lse: Vec<PerspectiveLse>,
}

impl Program {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            cost: vec![0.0; n_vars],
            ..Self::default()
        }
    }

    pub fn n_inequalities(&self) -> usize {
        self.inequalities.len() + self.lse.len()
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        self.cost.iter().zip(z).map(|(c, x)| c * x).sum()
    }

    /// Largest inequality value (linear `a.z - b` and LSE `g`); negative iff
    /// strictly feasible.
    pub fn max_inequality(&self, z: &[f64]) -> f64 {
        let lin = self.inequalities.iter().map(|r| r.dot(z) - r.rhs);
        let lse = self.lse.iter().map(|c| c.value(z));
        lin.chain(lse).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn equality_residual(&self, z: &[f64]) -> f64 {
        self.equalities
            .iter()
            .map(|r| (r.dot(z) - r.rhs).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub mu_start: f64,
    pub mu_end: f64,
    pub mu_factor: f64,
    /// Centering stops once half the squared Newton decrement is below this.
    pub newton_tol: f64,
    pub max_newton_per_center: usize,
    /// Stop early once the objective provably ends up above or below this.
    pub target: Option<f64>,
    /// Centering failures are tolerated (and flagged) once `mu` is this small.
    pub accept_inexact_below: f64,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            mu_start: 10.0,
            mu_end: 1e-8,
            mu_factor: 10.0,
            newton_tol: 1e-10,
            max_newton_per_center: 100,
            target: None,
            accept_inexact_below: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    /// Ran the full barrier schedule.
    Optimal,
    /// An equality-feasible iterate reached `c.z <= target`.
    TargetReached,
    /// The dual bound shows `min c.z > target`.
    TargetUnreachable,
}

#[derive(Debug, Clone, Serialize)]
pub struct Solution {
    pub status: Status,
    pub z: Vec<f64>,
    pub objective: f64,
    /// Upper bound on `objective - optimum` (valid at a centered point).
    pub gap_bound: f64,
    pub mu: f64,
    pub iterations: usize,
    pub newton_decrement: f64,
    pub equality_residual: f64,
    /// Some centering step stopped short of the Newton tolerance.
    pub inexact: bool,
    pub inequality_multipliers: Vec<f64>,
    pub lse_multipliers: Vec<f64>,
    pub equality_multipliers: Vec<f64>,
}

const EQ_FEASIBLE_TOL: f64 = 1e-9;
const ARMIJO: f64 = 0.25;
/// Squared Newton decrement below which the full step needs no line search.
const QUADRATIC_REGION: f64 = 0.1;
const BOUNDARY_FRACTION: f64 = 0.99;

struct Newton {
    dz: Vec<f64>,
    nu: Vec<f64>,
    /// `-grad F . dz`
    decrement_sq: f64,
}

struct Engine<'a> {
    p: &'a Program,
    iterations: usize,
}

impl<'a> Engine<'a> {
    /// Barrier value `-sum log(-g)`, `+inf` outside the strict interior.
    fn barrier(&self, z: &[f64]) -> f64 {
        let mut total = 0.0;
        for r in &self.p.inequalities {
            let s = r.rhs - r.dot(z);
            if !(s > 0.0) {
                return f64::INFINITY;
            }
            total -= s.ln();
        }
        for c in &self.p.lse {
            let g = c.value(z);
            if !(g < 0.0) {
                return f64::INFINITY;
            }
            total -= (-g).ln();
        }
        total
    }

    fn merit(&self, z: &[f64], tau: f64) -> f64 {
        tau * self.p.objective(z) + self.barrier(z)
    }

    fn gradient_hessian(&self, z: &[f64], tau: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let n = self.p.n_vars;
        let mut g = DVector::from_iterator(n, self.p.cost.iter().map(|c| tau * c));
        let mut h = DMatrix::zeros(n, n);
        for r in &self.p.inequalities {
            let s = r.rhs - r.dot(z);
            if !(s > 0.0) {
                return None;
            }
            for &(i, a) in &r.coefs {
                g[i] += a / s;
                for &(j, b) in &r.coefs {
                    h[(i, j)] += a * b / (s * s);
                }
            }
        }
        for c in &self.p.lse {
            let (val, lg, lh) = c.derivatives(z)?;
            let s = -val;
            if !(s > 0.0) {
                return None;
            }
            let idx: Vec<usize> = c.indices().collect();
            let d = idx.len();
            for a in 0..d {
                g[idx[a]] += lg[a] / s;
                for b in 0..d {
                    h[(idx[a], idx[b])] += lh[a * d + b] / s + lg[a] * lg[b] / (s * s);
                }
            }
        }
        Some((g, h))
    }

    fn newton_step(&self, z: &[f64], tau: f64) -> Option<Newton> {
        let n = self.p.n_vars;
        let m = self.p.equalities.len();
        let (g, h) = self.gradient_hessian(z, tau)?;
        let dim = n + m;
        let mut k = DMatrix::zeros(dim, dim);
        k.view_mut((0, 0), (n, n)).copy_from(&h);
        let mut rhs = DVector::zeros(dim);
        for i in 0..n {
            rhs[i] = -g[i];
        }
        for (e, row) in self.p.equalities.iter().enumerate() {
            for &(i, a) in &row.coefs {
                k[(n + e, i)] += a;
                k[(i, n + e)] += a;
            }
            rhs[n + e] = row.rhs - row.dot(z);
        }
        // symmetric diagonal scaling keeps the pivots comparable
        let mut scale = DVector::from_element(dim, 1.0);
        for i in 0..n {
            let d = k[(i, i)];
            if d > 0.0 && d.is_finite() {
                scale[i] = 1.0 / d.sqrt();
            }
        }
        for e in 0..m {
            let norm: f64 = self.p.equalities[e].coefs.iter().map(|&(i, a)| (a * scale[i]).powi(2)).sum();
            if norm > 0.0 {
                scale[n + e] = 1.0 / norm.sqrt();
            }
        }
        for i in 0..dim {
            for j in 0..dim {
                k[(i, j)] *= scale[i] * scale[j];
            }
            rhs[i] *= scale[i];
        }
        let mut delta = 0.0;
        for _ in 0..8 {
            let mut kk = k.clone();
            if delta > 0.0 {
                for i in 0..n {
                    kk[(i, i)] += delta;
                }
                for e in 0..m {
                    kk[(n + e, n + e)] -= delta;
                }
            }
            let lu = kk.clone().lu();
            if let Some(mut sol) = lu.solve(&rhs) {
                for _ in 0..2 {
                    let resid = &rhs - &kk * &sol;
                    match lu.solve(&resid) {
                        Some(corr) => sol += corr,
                        None => break,
                    }
                }
                if sol.iter().all(|v| v.is_finite()) {
                    let dz: Vec<f64> = (0..n).map(|i| sol[i] * scale[i]).collect();
                    let nu: Vec<f64> = (0..m).map(|e| sol[n + e] * scale[n + e]).collect();
                    let decrement_sq = -(0..n).map(|i| g[i] * dz[i]).sum::<f64>();
                    return Some(Newton { dz, nu, decrement_sq });
                }
            }
            delta = if delta == 0.0 { 1e-12 } else { delta * 100.0 };
        }
        None
    }

    /// Largest step keeping the linear inequalities strictly satisfied.
    fn max_linear_step(&self, z: &[f64], dz: &[f64]) -> f64 {
        let mut s_max = f64::INFINITY;
        for r in &self.p.inequalities {
            let ad = r.dot(dz);
            if ad > 0.0 {
                s_max = s_max.min((r.rhs - r.dot(z)) / ad);
            }
        }
        s_max
    }

    fn lse_strict(&self, z: &[f64]) -> bool {
        self.p.lse.iter().all(|c| c.value(z) < 0.0)
    }

    /// Centers at `tau`. Returns the final squared Newton decrement, the last
    /// equality multipliers and whether the tolerance was met.
    fn center(&mut self, z: &mut [f64], tau: f64, opts: &Options) -> Result<(f64, Vec<f64>, bool)> {
        let n = self.p.n_vars;
        let mut trial = vec![0.0; n];
        let mut last_dec = f64::INFINITY;
        let mut nu = vec![0.0; self.p.equalities.len()];
        for _ in 0..opts.max_newton_per_center {
            self.iterations += 1;
            let step = self.newton_step(z, tau).ok_or_else(|| self.fail("singular Newton system", z))?;
            nu = step.nu;
            let feasible = self.p.equality_residual(z) <= EQ_FEASIBLE_TOL * (1.0 + self.eq_scale());
            last_dec = step.decrement_sq;
            if feasible && step.decrement_sq / 2.0 <= opts.newton_tol {
                return Ok((last_dec, nu, true));
            }
            let mut s = (BOUNDARY_FRACTION * self.max_linear_step(z, &step.dz)).min(1.0);
            if feasible && step.decrement_sq < QUADRATIC_REGION {
                loop {
                    for i in 0..n {
                        trial[i] = z[i] + s * step.dz[i];
                    }
                    if self.merit(&trial, tau).is_finite() {
                        break;
                    }
                    s *= 0.5;
                    if s < 1e-14 {
                        return Ok((last_dec, nu, last_dec / 2.0 <= opts.newton_tol.sqrt()));
                    }
                }
            } else if feasible {
                let f0 = self.merit(z, tau);
                let slope = -step.decrement_sq;
                loop {
                    for i in 0..n {
                        trial[i] = z[i] + s * step.dz[i];
                    }
                    let f1 = self.merit(&trial, tau);
                    if f1.is_finite() && f1 <= f0 + ARMIJO * s * slope {
                        break;
                    }
                    s *= 0.5;
                    if s < 1e-14 {
                        // no progress possible at working precision
                        return Ok((last_dec, nu, last_dec / 2.0 <= opts.newton_tol.sqrt()));
                    }
                }
            } else {
                loop {
                    for i in 0..n {
                        trial[i] = z[i] + s * step.dz[i];
                    }
                    if self.lse_strict(&trial) {
                        break;
                    }
                    s *= 0.5;
                    if s < 1e-14 {
                        return Err(self.fail("infeasible-start step collapsed", z));
                    }
                }
            }
            z.copy_from_slice(&trial);
        }
        Ok((last_dec, nu, false))
    }

    fn eq_scale(&self) -> f64 {
        self.p.equalities.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max)
    }

    fn fail(&self, reason: &str, z: &[f64]) -> Error {
        Error::Solver {
            reason: reason.to_string(),
            iterations: self.iterations,
            last_iterate: z.to_vec(),
        }
    }
}

/// Runs the barrier method from `start`, which must satisfy every inequality
/// strictly (equalities may be violated).
pub fn solve(p: &Program, start: &[f64], opts: &Options) -> Result<Solution> {
    if start.len() != p.n_vars || p.cost.len() != p.n_vars {
        return Err(Error::Contract("start point or cost has the wrong length".into()));
    }
    let mut engine = Engine { p, iterations: 0 };
    if !engine.barrier(start).is_finite() {
        return Err(Error::Contract("start point is not strictly feasible".into()));
    }
    let m = p.n_inequalities() as f64;
    let mut z = start.to_vec();
    let mut mu = opts.mu_start;
    let mut inexact = false;
    loop {
        let (dec, nu, ok) = match engine.center(&mut z, 1.0 / mu, opts) {
            Ok(r) => r,
            Err(e) if mu <= opts.accept_inexact_below => {
                if let Error::Solver { last_iterate, .. } = e {
                    z = last_iterate;
                }
                inexact = true;
                let nu = vec![0.0; p.equalities.len()];
                (f64::NAN, nu, false)
            }
            Err(e) => return Err(e),
        };
        if !ok {
            if mu > opts.accept_inexact_below {
                return Err(engine.fail(&format!("centering did not converge at mu = {mu:e}"), &z));
            }
            inexact = true;
        }
        let obj = p.objective(&z);
        let eq_ok = p.equality_residual(&z) <= 1e-9 * (1.0 + engine.eq_scale());
        let mut status = Status::Optimal;
        if let Some(target) = opts.target {
            if eq_ok && obj <= target {
                status = Status::TargetReached;
            } else if ok && obj - 1.5 * m * mu > target {
                status = Status::TargetUnreachable;
            }
        }
        let done = status != Status::Optimal || mu <= opts.mu_end * (1.0 + 1e-9);
        if done {
            let inequality_multipliers = p.inequalities.iter().map(|r| mu / (r.rhs - r.dot(&z))).collect();
            let lse_multipliers = p.lse.iter().map(|c| mu / (-c.value(&z))).collect();
            // the Newton system's nu carries the 1/mu scaling of the merit
            let equality_multipliers = nu.iter().map(|v| v * mu).collect();
            return Ok(Solution {
                status,
                objective: obj,
                gap_bound: m * mu,
                mu,
                iterations: engine.iterations,
                newton_decrement: dec.max(0.0).sqrt(),
                equality_residual: p.equality_residual(&z),
                inexact,
                inequality_multipliers,
                lse_multipliers,
                equality_multipliers,
                z,
            });
        }
        mu /= opts.mu_factor;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds_row(i: usize, sign: f64, rhs: f64) -> LinearRow {
        LinearRow::new(vec![(i, sign)], rhs)
    }

    #[test]
    fn small_lp() {
        // max x + y  s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0  -> (1.6, 1.2)
        let mut p = Program::new(2);
        p.cost = vec![-1.0, -1.0];
        p.inequalities = vec![
            LinearRow::new(vec![(0, 1.0), (1, 2.0)], 4.0),
            LinearRow::new(vec![(0, 3.0), (1, 1.0)], 6.0),
            bounds_row(0, -1.0, 0.0),
            bounds_row(1, -1.0, 0.0),
        ];
        let s = solve(&p, &[0.1, 0.1], &Options::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.z[0] - 1.6).abs() < 1e-6 && (s.z[1] - 1.2).abs() < 1e-6, "{:?}", s.z);
        assert!(s.gap_bound < 1e-6);
    }

    #[test]
    fn equality_from_infeasible_start() {
        // min x - y  s.t. x + y = 1, 0 <= x, y
        let mut p = Program::new(2);
        p.cost = vec![1.0, -1.0];
        p.inequalities = vec![bounds_row(0, -1.0, 0.0), bounds_row(1, -1.0, 0.0)];
        p.equalities = vec![LinearRow::new(vec![(0, 1.0), (1, 1.0)], 1.0)];
        let s = solve(&p, &[0.3, 0.2], &Options::default()).unwrap();
        assert!((s.z[1] - 1.0).abs() < 1e-7 && s.z[0].abs() < 1e-7);
        assert!(s.equality_residual < 1e-12 && !s.inexact, "{s:?}");
        assert!((s.equality_multipliers[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn single_receiver_perspective_matches_capacity() {
        // max x s.t. t log(1 + Z S) >= x written as LSE with one term, t = 0.5
        let (z, snr, t) = (2.0f64, 3.0f64, 0.5);
        let mut p = Program::new(2);
        p.cost = vec![-1.0, 0.0];
        p.inequalities = vec![bounds_row(0, -1.0, 0.0), bounds_row(1, -1.0, 0.0)];
        p.equalities = vec![LinearRow::new(vec![(1, 1.0)], t)];
        p.lse = vec![PerspectiveLse {
            time: 1,
            flows: vec![0],
            terms: vec![(-z.ln(), 1)],
            log_budget: (snr + 1.0 / z).ln(),
        }];
        let s = solve(&p, &[0.01, 0.4], &Options::default()).unwrap();
        assert!((s.z[0] - t * (z * snr).ln_1p()).abs() < 1e-7, "{}", s.z[0]);
    }

    #[test]
    fn perspective_derivatives_match_finite_differences() {
        let c = PerspectiveLse {
            time: 3,
            flows: vec![0, 1, 2],
            terms: vec![(-0.3, 1), (0.2, 2), (-1.0, 3)],
            log_budget: 1.7,
        };
        let z = [0.2, 0.35, 0.1, 0.6];
        let (g0, grad, hess) = c.derivatives(&z).unwrap();
        assert!((g0 - c.value(&z)).abs() < 1e-15);
        let idx = [0, 1, 2, 3];
        let h = 1e-6;
        for a in 0..4 {
            let mut zp = z;
            let mut zm = z;
            zp[idx[a]] += h;
            zm[idx[a]] -= h;
            let fd = (c.value(&zp) - c.value(&zm)) / (2.0 * h);
            assert!((fd - grad[a]).abs() < 1e-8, "grad {a}: {fd} vs {}", grad[a]);
            let (_, gp, _) = c.derivatives(&zp).unwrap();
            let (_, gm, _) = c.derivatives(&zm).unwrap();
            for b in 0..4 {
                let fd = (gp[b] - gm[b]) / (2.0 * h);
                assert!((fd - hess[b * 4 + a]).abs() < 1e-6, "hess {a},{b}");
            }
        }
    }

    #[test]
    fn target_exits() {
        let mut p = Program::new(1);
        p.cost = vec![-1.0];
        p.inequalities = vec![bounds_row(0, 1.0, 2.0), bounds_row(0, -1.0, 0.0)];
        let opts = |t| Options {
            target: Some(t),
            ..Options::default()
        };
        let s = solve(&p, &[1.0], &opts(-1.5)).unwrap();
        assert_eq!(s.status, Status::TargetReached);
        let s = solve(&p, &[1.0], &opts(-2.5)).unwrap();
        assert_eq!(s.status, Status::TargetUnreachable);
    }

    #[test]
    fn rejects_bad_start() {
        let mut p = Program::new(1);
        p.inequalities = vec![bounds_row(0, -1.0, 0.0)];
        assert!(matches!(solve(&p, &[0.0], &Options::default()), Err(Error::Contract(_))));
    }
}
