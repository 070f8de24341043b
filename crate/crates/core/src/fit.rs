//! Entropy scaling fit and the finite-size decay fit for reduced density
//! matrix entries.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// `S(n)` samples of one chain of `n_total` sites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropySamples {
    pub n_total: usize,
    pub points: Vec<(usize, f64)>,
}

impl EntropySamples {
    /// From a profile `S(1), …, S(N−1)`.
    pub fn from_profile(n_total: usize, profile: &[f64]) -> Result<Self> {
        if profile.len() + 1 != n_total {
            return Err(Error::Mismatch { expected: n_total.saturating_sub(1), got: profile.len() });
        }
        Ok(EntropySamples { n_total, points: profile.iter().enumerate().map(|(k, &s)| (k + 1, s)).collect() })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_total;
        if self.points.iter().any(|&(m, s)| m == 0 || m >= n || !s.is_finite()) {
            return Err(Error::Config(format!("entropy cut outside 1..{n} or non-finite value")));
        }
        let mut cuts: Vec<usize> = self.points.iter().map(|p| p.0).collect();
        cuts.sort_unstable();
        cuts.dedup();
        if cuts.len() < 3 {
            return Err(Error::Config("need at least 3 distinct cuts".into()));
        }
        Ok(())
    }
}

/// Regressor `ln((N/π) sin(πn/N)) / 3`.
pub fn chord_log(n_total: usize, n: usize) -> f64 {
    let nn = n_total as f64;
    ((nn / PI) * (PI * n as f64 / nn).sin()).ln() / 3.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentralChargeFit {
    pub c: f64,
    pub a: f64,
    pub rms: f64,
    pub points_used: usize,
}

/// Least squares `S = c·chord_log + A`. Cuts `1` and `N−1` are dropped unless
/// `include_edges`.
pub fn fit_central_charge(s: &EntropySamples, include_edges: bool) -> Result<CentralChargeFit> {
    s.validate()?;
    let n = s.n_total;
    let pts: Vec<(f64, f64)> = s
        .points
        .iter()
        .filter(|&&(m, _)| include_edges || (m != 1 && m != n - 1))
        .map(|&(m, v)| (chord_log(n, m), v))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Config("too few cuts left after excluding the edges".into()));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 1e-14 * (1.0 + mx * mx) * k {
        return Err(Error::Numerical("degenerate design: all cuts share one regressor value".into()));
    }
    let c = sxy / sxx;
    let a = my - c * mx;
    let rms = (pts.iter().map(|p| (c * p.0 + a - p.1).powi(2)).sum::<f64>() / k).sqrt();
    Ok(CentralChargeFit { c, a, rms, points_used: pts.len() })
}

/// `c0 + c1 · N^{−c2} · e^{−Δ N}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub delta: f64,
}

impl DecayParams {
    pub fn eval(&self, n: f64) -> f64 {
        self.c0 + self.c1 * n.powf(-self.c2) * (-self.delta * n).exp()
    }

    fn to_vec(self) -> Vector4<f64> {
        Vector4::new(self.c0, self.c1, self.c2, self.delta)
    }

    fn from_vec(v: &Vector4<f64>) -> Self {
        DecayParams { c0: v[0], c1: v[1], c2: v[2], delta: v[3] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFitConfig {
    pub starts: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
}

impl Default for DecayFitConfig {
    fn default() -> Self {
        DecayFitConfig { starts: 16, seed: 0, max_iters: 2000, lambda0: 1e-3, lambda_up: 7.0, lambda_down: 9.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub params: DecayParams,
    /// `½ Σ r²`
    pub cost: f64,
    pub rms: f64,
    /// Infinity norm of the projected gradient at the solution.
    pub grad_norm: f64,
    pub converged: bool,
    pub start_index: usize,
    pub iterations: usize,
    /// Costs after each accepted step of the winning start.
    pub cost_history: Vec<f64>,
    /// `JᵀJ` at the solution, row-major.
    pub jtj: [[f64; 4]; 4],
    pub jtj_condition: f64,
}

/// Samples `(N, value)` of one density-matrix entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecaySeries {
    pub entry: (usize, usize),
    pub points: Vec<(f64, f64)>,
}

impl DecaySeries {
    pub fn validate(&self) -> Result<()> {
        if self.points.len() < 4 {
            return Err(Error::Config(format!("decay fit needs at least 4 sizes, got {}", self.points.len())));
        }
        if self.points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Config("sizes must be strictly increasing".into()));
        }
        if self.points.iter().any(|p| !(p.0 > 0.0 && p.1.is_finite())) {
            return Err(Error::Config("sizes must be positive and values finite".into()));
        }
        Ok(())
    }
}

fn residuals_and_jacobian(pts: &[(f64, f64)], p: &DecayParams) -> (Vec<f64>, Vec<Vector4<f64>>) {
    let mut r = Vec::with_capacity(pts.len());
    let mut j = Vec::with_capacity(pts.len());
    for &(n, y) in pts {
        let e = n.powf(-p.c2) * (-p.delta * n).exp();
        r.push(p.c0 + p.c1 * e - y);
        j.push(Vector4::new(1.0, e, -p.c1 * n.ln() * e, -p.c1 * n * e));
    }
    (r, j)
}

fn cost_of(pts: &[(f64, f64)], p: &DecayParams) -> f64 {
    0.5 * pts.iter().map(|&(n, y)| (p.eval(n) - y).powi(2)).sum::<f64>()
}

fn normal_equations(r: &[f64], j: &[Vector4<f64>]) -> (Matrix4<f64>, Vector4<f64>) {
    let mut a = Matrix4::zeros();
    let mut g = Vector4::zeros();
    for (ri, ji) in r.iter().zip(j) {
        a += ji * ji.transpose();
        g += ji * *ri;
    }
    (a, g)
}

/// Best `(c0, c1)` for fixed `(c2, Δ)`.
fn linear_start(pts: &[(f64, f64)], c2: f64, delta: f64) -> DecayParams {
    let mut m = Matrix2::zeros();
    let mut b = Vector2::zeros();
    for &(n, y) in pts {
        let row = Vector2::new(1.0, n.powf(-c2) * (-delta * n).exp());
        m += row * row.transpose();
        b += row * y;
    }
    let sol = m.try_inverse().map(|inv| inv * b).unwrap_or_else(|| Vector2::new(pts.last().unwrap().1, 0.0));
    DecayParams { c0: sol[0], c1: sol[1], c2, delta }
}

struct LmRun {
    params: DecayParams,
    cost: f64,
    grad_norm: f64,
    converged: bool,
    iterations: usize,
    history: Vec<f64>,
}

fn projected_grad_norm(g: &Vector4<f64>, p: &DecayParams) -> f64 {
    (0..4)
        .map(|k| if k == 3 && p.delta <= 0.0 && g[3] > 0.0 { 0.0 } else { g[k].abs() })
        .fold(0.0, f64::max)
}

fn lm(pts: &[(f64, f64)], start: DecayParams, cfg: &DecayFitConfig) -> LmRun {
    let mut p = start;
    p.delta = p.delta.max(0.0);
    let mut cost = cost_of(pts, &p);
    let mut lambda = cfg.lambda0;
    let mut history = vec![cost];
    let scale = pts.iter().map(|q| q.1 * q.1).sum::<f64>().max(1e-300);
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..cfg.max_iters {
        iterations += 1;
        let (r, j) = residuals_and_jacobian(pts, &p);
        let (a, g) = normal_equations(&r, &j);
        if projected_grad_norm(&g, &p) <= 1e-15 * scale.sqrt() || cost <= 1e-32 * scale {
            converged = true;
            break;
        }
        // Δ pinned at its bound while the gradient pushes it below zero
        let active = p.delta <= 0.0 && g[3] > 0.0;
        let mut step_taken = false;
        while lambda < 1e20 {
            let mut m = a;
            for k in 0..4 {
                m[(k, k)] += lambda * a[(k, k)].max(1e-12);
            }
            let mut rhs = -g;
            if active {
                for k in 0..4 {
                    m[(3, k)] = 0.0;
                    m[(k, 3)] = 0.0;
                }
                m[(3, 3)] = 1.0;
                rhs[3] = 0.0;
            }
            let Some(delta) = m.lu().solve(&rhs) else {
                lambda *= cfg.lambda_up;
                continue;
            };
            let mut trial = DecayParams::from_vec(&(p.to_vec() + delta));
            trial.delta = trial.delta.max(0.0);
            let trial_cost = cost_of(pts, &trial);
            if trial_cost.is_finite() && trial_cost < cost {
                let rel = (cost - trial_cost) / cost.max(1e-300);
                p = trial;
                cost = trial_cost;
                history.push(cost);
                lambda = (lambda / cfg.lambda_down).max(1e-15);
                step_taken = true;
                if rel < 1e-15 {
                    converged = true;
                }
                break;
            }
            lambda *= cfg.lambda_up;
        }
        if !step_taken {
            // no descent at any damping: a stationary point to working precision
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    let (r, j) = residuals_and_jacobian(pts, &p);
    let (_, g) = normal_equations(&r, &j);
    LmRun { params: p, cost, grad_norm: projected_grad_norm(&g, &p), converged, iterations, history }
}

/// Levenberg–Marquardt fit of `c0 + c1 N^{−c2} e^{−ΔN}` with `Δ ≥ 0`, best of
/// `cfg.starts` seeded starting points.
pub fn fit_decay(series: &DecaySeries, cfg: &DecayFitConfig) -> Result<DecayFit> {
    series.validate()?;
    if cfg.starts == 0 || !(cfg.lambda0 > 0.0 && cfg.lambda_up > 1.0 && cfg.lambda_down > 1.0) {
        return Err(Error::Config(format!("invalid decay fit configuration {cfg:?}")));
    }
    let pts = &series.points;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(usize, LmRun)> = None;
    for s in 0..cfg.starts {
        let (c2, delta) = if s == 0 { (1.0, 0.05) } else { (rng.random_range(0.0..3.0), rng.random_range(0.0..0.5)) };
        let run = lm(pts, linear_start(pts, c2, delta), cfg);
        if !run.cost.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|(_, b)| run.cost < b.cost) {
            best = Some((s, run));
        }
    }
    let (start_index, run) = best.ok_or_else(|| Error::Numerical("every decay-fit start diverged".into()))?;
    let (r, j) = residuals_and_jacobian(pts, &run.params);
    let (a, _) = normal_equations(&r, &j);
    let sv = a.singular_values();
    let smin = sv.min();
    let jtj_condition = if smin > 0.0 { sv.max() / smin } else { f64::INFINITY };
    let mut jtj = [[0.0; 4]; 4];
    for (r_, row) in jtj.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = a[(r_, c)];
        }
    }
    if !run.converged {
        log::warn!("decay fit did not converge (grad {:e})", run.grad_norm);
    }
    Ok(DecayFit {
        params: run.params,
        cost: run.cost,
        rms: (2.0 * run.cost / pts.len() as f64).sqrt(),
        grad_norm: run.grad_norm,
        converged: run.converged,
        start_index,
        iterations: run.iterations,
        cost_history: run.history,
        jtj,
        jtj_condition,
    })
}
