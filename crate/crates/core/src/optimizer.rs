//! BFGS over variational angles with a strong-Wolfe line search, seeded
//! restarts and warm starts across system sizes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{canonicalize_params, AnsatzSpec, ParamSet, ParamSource};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendTag {
    Statevector,
    Fermion,
    Cat,
    /// Plain functions (tests, benchmarks).
    Analytic,
}

/// A scalar function of the angle vector.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    fn backend(&self) -> BackendTag;

    fn evaluate(&self, x: &[f64]) -> Result<f64>;

    /// Value and exact gradient, when the objective can supply them; the
    /// optimizer falls back to central differences otherwise.
    fn value_and_gradient(&self, _x: &[f64]) -> Option<Result<(f64, Vec<f64>)>> {
        None
    }
}

/// Central differences `(f(x+h·e_i) − f(x−h·e_i)) / 2h`.
pub fn fd_gradient(obj: &dyn Objective, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {h}")));
    }
    let mut xp = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let fp = obj.evaluate(&xp)?;
        xp[i] = x[i] - h;
        let fm = obj.evaluate(&xp)?;
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

fn value_and_gradient(obj: &dyn Objective, x: &[f64], fd_step: f64) -> Result<(f64, Vec<f64>)> {
    if let Some(r) = obj.value_and_gradient(x) {
        return r;
    }
    Ok((obj.evaluate(x)?, fd_gradient(obj, x, fd_step)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BfgsConfig {
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub grad_tol: f64,
    pub max_iters: usize,
    pub fd_step: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Standard deviation of the perturbation added to restarts 1, 2, ….
    pub restart_noise: f64,
    /// Skip the remaining restarts once a run ends at or below this value.
    pub stop_below: Option<f64>,
}

impl Default for BfgsConfig {
    fn default() -> Self {
        BfgsConfig {
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            grad_tol: 1e-10,
            max_iters: 2000,
            fd_step: 1e-6,
            restarts: 8,
            seed: 0,
            restart_noise: 0.05,
            stop_below: None,
        }
    }
}

impl BfgsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(Error::Config(format!(
                "Wolfe constants must satisfy 0 < c1 < c2 < 1 (got {}, {})",
                self.wolfe_c1, self.wolfe_c2
            )));
        }
        if !(self.grad_tol > 0.0 && self.fd_step > 0.0) {
            return Err(Error::Config("gradient tolerance and FD step must be positive".into()));
        }
        if self.restarts == 0 || self.max_iters == 0 {
            return Err(Error::Config("restarts and max_iters must be at least 1".into()));
        }
        if !(self.restart_noise >= 0.0) {
            return Err(Error::Config("restart noise must be non-negative".into()));
        }
        Ok(())
    }
}

/// Outcome of one BFGS run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_inf: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub line_search_failures: usize,
    /// Accepted objective values, starting with `f(x0)`.
    pub trace: Vec<f64>,
}

/// Best run over all restarts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeResult {
    pub best: RunResult,
    pub restart_index: usize,
    pub restart_values: Vec<f64>,
    pub total_evaluations: usize,
}

struct Counter<'a> {
    obj: &'a dyn Objective,
    fd_step: f64,
    evals: usize,
}

impl Counter<'_> {
    fn eval(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.evals += 1;
        let (f, g) = value_and_gradient(self.obj, x, self.fd_step)?;
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("objective not finite at step {}", self.evals)));
        }
        Ok((f, g))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn step_point(x: &[f64], d: &[f64], a: f64) -> Vec<f64> {
    x.iter().zip(d).map(|(xi, di)| xi + a * di).collect()
}

struct LsPoint {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
    x: Vec<f64>,
}

/// Strong-Wolfe line search (bracketing then zoom with cubic interpolation).
fn line_search(
    c: &mut Counter,
    x: &[f64],
    f0: f64,
    g0: &[f64],
    d: &[f64],
    cfg: &BfgsConfig,
    alpha_init: f64,
) -> Result<Option<LsPoint>> {
    let dphi0 = dot(g0, d);
    if dphi0 >= 0.0 {
        return Ok(None);
    }
    let (c1, c2) = (cfg.wolfe_c1, cfg.wolfe_c2);
    let mut prev = (0.0, f0, dphi0);
    let mut alpha = alpha_init;
    for k in 0..40 {
        let xn = step_point(x, d, alpha);
        let (f, g) = c.eval(&xn)?;
        let dphi = dot(&g, d);
        if f > f0 + c1 * alpha * dphi0 || (k > 0 && f >= prev.1) {
            return zoom(c, x, f0, dphi0, d, cfg, prev, (alpha, f, dphi));
        }
        if dphi.abs() <= -c2 * dphi0 {
            return Ok(Some(LsPoint { alpha, f, g, x: xn }));
        }
        if dphi >= 0.0 {
            return zoom(c, x, f0, dphi0, d, cfg, (alpha, f, dphi), prev);
        }
        prev = (alpha, f, dphi);
        alpha *= 2.0;
    }
    Ok(None)
}

fn cubic_min(a: (f64, f64, f64), b: (f64, f64, f64)) -> Option<f64> {
    let (x0, f0, d0) = a;
    let (x1, f1, d1) = b;
    let h = x1 - x0;
    if h == 0.0 {
        return None;
    }
    let d1_ = d0 + d1 - 3.0 * (f1 - f0) / h;
    let disc = d1_ * d1_ - d0 * d1;
    if disc < 0.0 {
        return None;
    }
    let d2 = h.signum() * disc.sqrt();
    let t = x1 - h * (d1 + d2 - d1_) / (d1 - d0 + 2.0 * d2);
    t.is_finite().then_some(t)
}

#[allow(clippy::too_many_arguments)]
fn zoom(
    c: &mut Counter,
    x: &[f64],
    f0: f64,
    dphi0: f64,
    d: &[f64],
    cfg: &BfgsConfig,
    mut lo: (f64, f64, f64),
    mut hi: (f64, f64, f64),
) -> Result<Option<LsPoint>> {
    let (c1, c2) = (cfg.wolfe_c1, cfg.wolfe_c2);
    for _ in 0..60 {
        let (a, b) = if lo.0 < hi.0 { (lo.0, hi.0) } else { (hi.0, lo.0) };
        let width = b - a;
        if width <= 1e-16 * b.abs().max(1e-300) {
            break;
        }
        let mut alpha = cubic_min(lo, hi).unwrap_or(0.5 * (a + b));
        // keep the trial well inside the bracket
        if !(alpha > a + 0.1 * width && alpha < b - 0.1 * width) {
            alpha = 0.5 * (a + b);
        }
        let xn = step_point(x, d, alpha);
        let (f, g) = c.eval(&xn)?;
        let dphi = dot(&g, d);
        if f > f0 + c1 * alpha * dphi0 || f >= lo.1 {
            hi = (alpha, f, dphi);
        } else {
            if dphi.abs() <= -c2 * dphi0 {
                return Ok(Some(LsPoint { alpha, f, g, x: xn }));
            }
            if dphi * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (alpha, f, dphi);
        }
    }
    // best sufficient-decrease point found, if any
    if lo.0 > 0.0 && lo.1 < f0 {
        let xn = step_point(x, d, lo.0);
        let (f, g) = c.eval(&xn)?;
        return Ok(Some(LsPoint { alpha: lo.0, f, g, x: xn }));
    }
    Ok(None)
}

/// One BFGS run from `x0`.
pub fn bfgs(obj: &dyn Objective, x0: &[f64], cfg: &BfgsConfig) -> Result<RunResult> {
    cfg.validate()?;
    let n = obj.dim();
    if x0.len() != n {
        return Err(Error::Mismatch { expected: n, got: x0.len() });
    }
    let mut c = Counter { obj, fd_step: cfg.fd_step, evals: 0 };
    let mut x = x0.to_vec();
    let (mut f, mut g) = c.eval(&x)?;
    let mut trace = vec![f];
    // inverse Hessian, row-major
    let mut hinv = identity(n);
    let mut fresh = true;
    let mut failures = 0;
    let mut consecutive_failures = 0;
    let mut iterations = 0;
    let mut stalled = false;
    while iterations < cfg.max_iters && inf_norm(&g) >= cfg.grad_tol {
        iterations += 1;
        let d: Vec<f64> = (0..n).map(|i| -dot(&hinv[i * n..(i + 1) * n], &g)).collect();
        let alpha0 = if fresh { (1.0 / inf_norm(&g).max(1e-300)).min(1.0) } else { 1.0 };
        let ls = match line_search(&mut c, &x, f, &g, &d, cfg, alpha0)? {
            Some(p) => p,
            None => {
                failures += 1;
                consecutive_failures += 1;
                if consecutive_failures >= 2 || fresh {
                    stalled = true;
                    break;
                }
                hinv = identity(n);
                fresh = true;
                continue;
            }
        };
        consecutive_failures = 0;
        let s: Vec<f64> = d.iter().map(|di| ls.alpha * di).collect();
        let y: Vec<f64> = ls.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        x = ls.x;
        f = ls.f;
        g = ls.g;
        trace.push(f);
        if sy > 1e-300 {
            if fresh {
                // Shanno–Phua scaling of the initial inverse Hessian
                let scale = sy / dot(&y, &y);
                hinv.iter_mut().for_each(|v| *v *= scale);
            }
            bfgs_update(&mut hinv, &s, &y, sy);
            fresh = false;
        }
    }
    let gi = inf_norm(&g);
    let converged = gi < cfg.grad_tol || (stalled && gi <= 1e-7);
    Ok(RunResult {
        x,
        value: f,
        grad_inf: gi,
        iterations,
        evaluations: c.evals,
        converged,
        line_search_failures: failures,
        trace,
    })
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], y)).collect();
    let yhy = dot(y, &hy);
    let coef = rho * rho * yhy + rho;
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

/// Restart 0 starts at `x0`; restart `r > 0` starts at `x0` plus seeded
/// Gaussian noise. Lowest value wins, ties to the lowest index.
pub fn minimize(obj: &dyn Objective, x0: &[f64], cfg: &BfgsConfig) -> Result<MinimizeResult> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.restart_noise).map_err(|e| Error::Config(e.to_string()))?;
    let mut best: Option<(usize, RunResult)> = None;
    let mut values = Vec::new();
    let mut total = 0;
    for r in 0..cfg.restarts {
        // the noise stream is drawn for every restart so results do not depend
        // on early stopping
        let start: Vec<f64> = if r == 0 {
            x0.to_vec()
        } else {
            x0.iter().map(|v| v + noise.sample(&mut rng)).collect()
        };
        let run = match bfgs(obj, &start, cfg) {
            Ok(run) => run,
            Err(Error::Numerical(msg)) => {
                log::warn!("restart {r} failed: {msg}");
                values.push(f64::NAN);
                continue;
            }
            Err(e) => return Err(e),
        };
        total += run.evaluations;
        values.push(run.value);
        let better = match &best {
            None => true,
            Some((_, b)) => run.value < b.value,
        };
        let reached = cfg.stop_below.is_some_and(|t| run.value <= t);
        if better {
            best = Some((r, run));
        }
        if reached {
            break;
        }
    }
    let (restart_index, best) =
        best.ok_or_else(|| Error::Numerical("every BFGS restart failed".to_string()))?;
    Ok(MinimizeResult { best, restart_index, restart_values: values, total_evaluations: total })
}

/// Interpolates the `(i/p)` profile of `prev` onto depth `target_depth`,
/// returning the flat `[α.., β..]` vector.
pub fn ramp_init(prev: &ParamSet, target_depth: usize) -> Vec<f64> {
    let resample = |v: &[f64]| -> Vec<f64> {
        let p = v.len();
        if p == target_depth {
            return v.to_vec();
        }
        if p == 1 {
            return vec![v[0]; target_depth];
        }
        (1..=target_depth)
            .map(|i| {
                // u = i/p on both grids; points outside [1/p, 1] are clamped
                let u = i as f64 / target_depth as f64;
                let pos = (u * p as f64 - 1.0).clamp(0.0, (p - 1) as f64);
                let k = (pos.floor() as usize).min(p - 2);
                let t = pos - k as f64;
                v[k] * (1.0 - t) + v[k + 1] * t
            })
            .collect()
    };
    let mut x = resample(&prev.alphas);
    x.extend(resample(&prev.betas));
    x
}

/// Result of optimizing one model instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub best_params: ParamSet,
    pub best_energy: f64,
    pub energy_error_percent: Option<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub restart_index: usize,
    pub backend: BackendTag,
}

/// Minimizes the ansatz energy and returns canonicalized angles. `exact`
/// (when known) is used for the error percentage and for early stopping at
/// `target_error_percent`.
pub fn optimize_params(
    spec: &AnsatzSpec,
    obj: &dyn Objective,
    x0: &[f64],
    cfg: &BfgsConfig,
    exact: Option<f64>,
) -> Result<OptimResult> {
    let res = minimize(obj, x0, cfg)?;
    let raw = ParamSet::from_vector(spec.model, &res.best.x, ParamSource::Optimized)?;
    let mut ps = canonicalize_params(&raw, spec)?;
    let energy = obj.evaluate(&ps.to_vector())?;
    ps.energy = Some(energy);
    Ok(OptimResult {
        best_params: ps,
        best_energy: energy,
        energy_error_percent: exact.map(|e0| crate::model::energy_error_percent(energy, e0)),
        iterations: res.best.iterations,
        evaluations: res.total_evaluations,
        converged: res.best.converged,
        restart_index: res.restart_index,
        backend: obj.backend(),
    })
}

/// Wraps a closure as an [`Objective`].
pub struct FnObjective<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn backend(&self) -> BackendTag {
        BackendTag::Analytic
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x))
    }
}

/// Closure objective with an analytic gradient.
pub struct GradObjective<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> (f64, Vec<f64>) + Sync> Objective for GradObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn backend(&self) -> BackendTag {
        BackendTag::Analytic
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x).0)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Option<Result<(f64, Vec<f64>)>> {
        Some(Ok((self.f)(x)))
    }
}
