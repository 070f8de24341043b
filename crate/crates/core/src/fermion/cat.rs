use num_complex::Complex64 as C64;

use super::{monomial_expectation, pauli_to_monomial, MajoranaCovariance, Monomial, QuadraticGenerator};
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString, TermList};

use super::majorana::Frame;

/// `|Ψ⟩ ∝ w0 |G⟩ + w1 F|G⟩` with `|G⟩` Gaussian and `F` a Majorana monomial
/// that commutes with every layer applied to the state, so only `|G⟩` is
/// evolved.
#[derive(Clone, Debug, PartialEq)]
pub struct CatGaussian {
    base: MajoranaCovariance,
    flip: Monomial,
    w0: C64,
    w1: C64,
}

impl CatGaussian {
    pub fn new(base: MajoranaCovariance, flip: Monomial, w0: C64, w1: C64) -> Result<Self> {
        if flip.indices.iter().any(|&k| k >= 2 * base.n()) {
            return Err(Error::Config("flip monomial acts outside the chain".into()));
        }
        Ok(CatGaussian { base, flip, w0, w1 })
    }

    /// `(|0…0⟩ + |1…1⟩)/√2` with the identity frame: the vacuum and its image
    /// under the global flip `Π X`.
    pub fn ghz(n: usize) -> Self {
        let all_x = PauliString::from_sites(n, &(0..n).map(|s| (s, Pauli::X)).collect::<Vec<_>>());
        let r = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        CatGaussian {
            base: MajoranaCovariance::vacuum(n, Frame::Identity),
            flip: pauli_to_monomial(&all_x, Frame::Identity),
            w0: r,
            w1: r,
        }
    }

    pub fn base(&self) -> &MajoranaCovariance {
        &self.base
    }

    pub fn flip(&self) -> &Monomial {
        &self.flip
    }

    pub fn weights(&self) -> (C64, C64) {
        (self.w0, self.w1)
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    /// Applies `exp(iθ·gen)` to both branches; fails if `gen` does not commute
    /// with the flip (the branches would desynchronize).
    pub fn evolve(&self, gen: &QuadraticGenerator, theta: f64) -> Result<CatGaussian> {
        let h = gen.h();
        for k in 0..h.nrows() {
            for l in k + 1..h.ncols() {
                if h[(k, l)] != 0.0 && !Monomial::from_product(&[k, l]).commutes_with(&self.flip) {
                    return Err(Error::Contract(format!(
                        "generator term γ{k}γ{l} does not commute with the branch flip"
                    )));
                }
            }
        }
        Ok(CatGaussian { base: super::evolve(&self.base, gen, theta)?, ..self.clone() })
    }

    /// `⟨Ψ|Ψ⟩` for the unnormalized superposition.
    pub fn norm_sqr(&self) -> f64 {
        let cross = self.w0.conj() * self.w1 * monomial_expectation(&self.base, &self.flip);
        self.w0.norm_sqr() + self.w1.norm_sqr() + 2.0 * cross.re
    }

    /// `⟨Ψ|M|Ψ⟩ / ⟨Ψ|Ψ⟩` for one monomial (complex in general).
    pub fn monomial_expectation(&self, m: &Monomial) -> C64 {
        let f = &self.flip;
        let fd = f.adjoint();
        let g = &self.base;
        let direct = monomial_expectation(g, m) * self.w0.norm_sqr()
            + monomial_expectation(g, &fd.mul(m).mul(f)) * self.w1.norm_sqr();
        let cross = self.w0.conj() * self.w1 * monomial_expectation(g, &m.mul(f))
            + self.w1.conj() * self.w0 * monomial_expectation(g, &fd.mul(m));
        (direct + cross) / self.norm_sqr()
    }

    pub fn pauli_expectation(&self, p: &PauliString) -> Result<C64> {
        if p.n() != self.n() {
            return Err(Error::Mismatch { expected: self.n(), got: p.n() });
        }
        Ok(self.monomial_expectation(&pauli_to_monomial(p, self.base.frame())))
    }
}

/// `⟨Ψ|O|Ψ⟩` for a Hermitian Pauli sum; diagonal branch terms plus the
/// Pfaffian cross terms.
pub fn cat_expectation(state: &CatGaussian, o: &TermList) -> Result<f64> {
    let mut acc = C64::new(0.0, 0.0);
    for t in o.terms() {
        acc += state.pauli_expectation(&t.string)? * t.coeff;
    }
    if acc.im.abs() > 1e-9 * (1.0 + o.norm_bound()) {
        return Err(Error::Numerical(format!("cat expectation has imaginary part {:e}", acc.im)));
    }
    Ok(acc.re)
}
