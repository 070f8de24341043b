//! Restarted Lanczos with full reorthogonalization.
//!
//! Each eigenvector is found by a thick-free restart loop (the Ritz vector of
//! one cycle seeds the next). Degenerate ground spaces are collected by
//! locking converged vectors and searching their orthogonal complement.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{inner, CompiledTerms, StateVector};
use crate::error::{Error, Result};
use crate::model::DEFAULT_LANCZOS_CAP;
use crate::pauli::TermList;

#[derive(Clone, Debug, PartialEq)]
pub struct LanczosConfig {
    /// Largest Krylov basis per restart cycle (further capped by memory).
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// Convergence when `‖Hv − Ev‖ < tol·max(1, |E|)`.
    pub tol: f64,
    pub seed: u64,
    /// Eigenvalues within this (relative) distance of `E0` count as degenerate.
    pub degeneracy_tol: f64,
    /// How many degenerate ground vectors to collect at most.
    pub max_ground_dim: usize,
    /// Budget for the Krylov basis, in bytes.
    pub memory_budget: usize,
    pub max_sites: usize,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        LanczosConfig {
            krylov_dim: 120,
            max_restarts: 60,
            tol: 1e-12,
            seed: 0x5eed,
            degeneracy_tol: 1e-8,
            max_ground_dim: 4,
            memory_budget: 1 << 30,
            max_sites: DEFAULT_LANCZOS_CAP,
        }
    }
}

/// Lowest eigenvalue and an orthonormal basis of its eigenspace.
#[derive(Clone, Debug)]
pub struct GroundSpace {
    pub energy: f64,
    pub states: Vec<StateVector>,
    /// True when more than one eigenvector lies within the degeneracy window.
    pub degenerate: bool,
    /// Gap to the first level outside the ground space, when it was resolved.
    pub gap: Option<f64>,
    /// Final residual norm of each ground vector.
    pub residuals: Vec<f64>,
    pub matvecs: usize,
}

impl GroundSpace {
    pub fn ground(&self) -> &StateVector {
        &self.states[0]
    }
}

struct Eigenpair {
    value: f64,
    vector: Vec<C64>,
    residual: f64,
}

struct Solver<'a> {
    op: &'a CompiledTerms,
    dim: usize,
    krylov: usize,
    cfg: &'a LanczosConfig,
    matvecs: usize,
    scratch: Vec<C64>,
}

fn axpy(y: &mut [C64], a: C64, x: &[C64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn scale(v: &mut [C64], s: f64) {
    v.iter_mut().for_each(|z| *z *= s);
}

fn orthogonalize(w: &mut [C64], against: &[Vec<C64>]) {
    for _ in 0..2 {
        for b in against {
            let c = inner(b, w);
            axpy(w, -c, b);
        }
    }
}

impl<'a> Solver<'a> {
    fn apply(&mut self, v: &[C64], out: &mut [C64]) {
        self.matvecs += 1;
        self.op.apply(v, out);
    }

    /// Lowest eigenpair of `H` restricted to the complement of `locked`.
    fn lowest(&mut self, locked: &[Vec<C64>], mut v: Vec<C64>) -> Result<Eigenpair> {
        orthogonalize(&mut v, locked);
        let nv = norm(&v);
        if nv < 1e-300 {
            return Err(Error::Numerical("Lanczos start vector lies in the locked space".into()));
        }
        scale(&mut v, 1.0 / nv);
        let room = self.dim - locked.len();
        let m_max = self.krylov.min(room).max(1);
        let mut last = (f64::NAN, f64::INFINITY);
        for _restart in 0..self.cfg.max_restarts {
            let mut basis: Vec<Vec<C64>> = vec![v];
            let mut alphas: Vec<f64> = Vec::new();
            let mut betas: Vec<f64> = Vec::new();
            let mut w = vec![C64::new(0.0, 0.0); self.dim];
            loop {
                let j = basis.len() - 1;
                let mut hv = std::mem::take(&mut self.scratch);
                hv.resize(self.dim, C64::new(0.0, 0.0));
                self.apply(&basis[j], &mut hv);
                w.copy_from_slice(&hv);
                self.scratch = hv;
                let alpha = inner(&basis[j], &w).re;
                alphas.push(alpha);
                orthogonalize(&mut w, locked);
                orthogonalize(&mut w, &basis);
                let beta = norm(&w);
                let (theta, y) = tridiagonal_lowest(&alphas, &betas);
                let ritz_res = beta * y[j].abs();
                let done = ritz_res < 0.1 * self.cfg.tol * theta.abs().max(1.0)
                    || beta < 1e-13
                    || basis.len() == m_max;
                if done {
                    let mut ritz = vec![C64::new(0.0, 0.0); self.dim];
                    for (c, b) in y.iter().zip(&basis) {
                        axpy(&mut ritz, C64::new(*c, 0.0), b);
                    }
                    orthogonalize(&mut ritz, locked);
                    let nr = norm(&ritz);
                    scale(&mut ritz, 1.0 / nr);
                    // explicit residual
                    let mut hr = std::mem::take(&mut self.scratch);
                    self.apply(&ritz, &mut hr);
                    let e = inner(&ritz, &hr).re;
                    axpy(&mut hr, C64::new(-e, 0.0), &ritz);
                    orthogonalize(&mut hr, locked);
                    let res = norm(&hr);
                    self.scratch = hr;
                    last = (e, res);
                    if res < self.cfg.tol * e.abs().max(1.0) || basis.len() == room {
                        return Ok(Eigenpair { value: e, vector: ritz, residual: res });
                    }
                    v = ritz;
                    break;
                }
                betas.push(beta);
                scale(&mut w, 1.0 / beta);
                basis.push(w.clone());
            }
        }
        Err(Error::Numerical(format!(
            "Lanczos did not converge after {} restarts (E≈{}, residual {:e}, krylov {})",
            self.cfg.max_restarts, last.0, last.1, self.krylov
        )))
    }
}

/// Lowest eigenpair of the symmetric tridiagonal matrix (alphas on the
/// diagonal, betas off it).
fn tridiagonal_lowest(alphas: &[f64], betas: &[f64]) -> (f64, Vec<f64>) {
    let m = alphas.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let k = eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
    (eig.eigenvalues[k], eig.eigenvectors.column(k).iter().copied().collect())
}

fn random_start(dim: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..dim)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im)
        })
        .collect()
}

/// Ground energy and ground space of `h`.
pub fn lanczos_ground(h: &TermList, cfg: &LanczosConfig) -> Result<GroundSpace> {
    let n = h.n();
    if n == 0 || n > cfg.max_sites {
        return Err(Error::Capability(format!("Lanczos at N={n} exceeds the cap of {}", cfg.max_sites)));
    }
    let dim = 1usize << n;
    let vec_bytes = dim * std::mem::size_of::<C64>();
    let krylov = cfg.krylov_dim.min(cfg.memory_budget / vec_bytes).max(3);
    let op = CompiledTerms::new(h);
    let mut solver = Solver { op: &op, dim, krylov, cfg, matvecs: 0, scratch: vec![C64::new(0.0, 0.0); dim] };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let first = solver.lowest(&[], random_start(dim, &mut rng))?;
    let e0 = first.value;
    let window = cfg.degeneracy_tol * e0.abs().max(1.0);
    let mut locked = vec![first.vector];
    let mut residuals = vec![first.residual];
    let mut gap = None;
    while locked.len() < cfg.max_ground_dim.min(dim) {
        let next = solver.lowest(&locked, random_start(dim, &mut rng))?;
        if next.value - e0 < window {
            locked.push(next.vector);
            residuals.push(next.residual);
        } else {
            gap = Some(next.value - e0);
            break;
        }
    }
    let degenerate = locked.len() > 1;
    let states = locked.into_iter().map(|v| StateVector { n, amps: v }).collect();
    Ok(GroundSpace { energy: e0, states, degenerate, gap, residuals, matvecs: solver.matvecs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_hamiltonian, ModelSpec};
    use approx::assert_abs_diff_eq;

    #[test]
    fn small_examples() {
        let gs = lanczos_ground(&build_hamiltonian(&ModelSpec::tfim(1.0, 6).unwrap()).unwrap(), &LanczosConfig::default())
            .unwrap();
        assert_abs_diff_eq!(gs.energy, -6.0, epsilon = 1e-10);
        assert!(!gs.degenerate);

        let gs = lanczos_ground(&build_hamiltonian(&ModelSpec::xxz(0.1, 2).unwrap()).unwrap(), &LanczosConfig::default())
            .unwrap();
        assert_abs_diff_eq!(gs.energy, -1.9, epsilon = 1e-12);
        let amps = gs.ground().amplitudes();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(amps[0].norm(), r, epsilon = 1e-10);
        assert_abs_diff_eq!(amps[3].norm(), r, epsilon = 1e-10);
        assert_abs_diff_eq!((amps[0] / amps[3]).re, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn classical_ising_ground_space_is_degenerate() {
        // g=0: |0…0⟩ and |1…1⟩
        let h = build_hamiltonian(&ModelSpec::tfim(0.0, 6).unwrap()).unwrap();
        let gs = lanczos_ground(&h, &LanczosConfig::default()).unwrap();
        assert_abs_diff_eq!(gs.energy, -6.0, epsilon = 1e-10);
        assert!(gs.degenerate);
        assert_eq!(gs.states.len(), 2);
        let ferro = StateVector::basis(6, 0);
        let ov = crate::statevector::ground_overlap(&ferro, &gs).unwrap();
        assert_abs_diff_eq!(ov, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn cap_is_enforced() {
        let h = build_hamiltonian(&ModelSpec::tfim(0.5, 8).unwrap()).unwrap();
        let cfg = LanczosConfig { max_sites: 6, ..LanczosConfig::default() };
        assert!(matches!(lanczos_ground(&h, &cfg), Err(Error::Capability(_))));
    }
}
