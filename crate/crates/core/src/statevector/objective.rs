use num_complex::Complex64 as C64;

use super::{inner, prepare_initial, CompiledTerms, StateVector};
use crate::error::Result;
use crate::model::{build_hamiltonian, AnsatzSpec, Layer};
use crate::optimizer::{BackendTag, Objective};

/// Ansatz energy on the dense simulator, with an adjoint (reverse-sweep)
/// gradient.
pub struct StatevectorObjective {
    spec: AnsatzSpec,
    ham: CompiledTerms,
    layer_a: CompiledTerms,
    layer_b: CompiledTerms,
    initial: StateVector,
}

impl StatevectorObjective {
    pub fn new(spec: &AnsatzSpec) -> Result<Self> {
        let h = build_hamiltonian(&spec.model)?;
        Ok(StatevectorObjective {
            ham: CompiledTerms::new(&h),
            layer_a: CompiledTerms::new(&spec.layer_a),
            layer_b: CompiledTerms::new(&spec.layer_b),
            initial: prepare_initial(spec.initial, spec.model.n)?,
            spec: spec.clone(),
        })
    }

    fn layer(&self, l: Layer) -> &CompiledTerms {
        match l {
            Layer::Alpha => &self.layer_a,
            Layer::Beta => &self.layer_b,
        }
    }

    /// Prepared state for the flat angle vector `[α.., β..]`.
    pub fn state(&self, x: &[f64]) -> Result<StateVector> {
        let p = self.spec.depth;
        self.spec.check_lengths(x.len() / 2, x.len() - x.len() / 2)?;
        let mut psi = self.initial.clone();
        for (l, idx) in self.spec.schedule_indices() {
            debug_assert!(idx < 2 * p);
            self.layer(l).evolve(&mut psi.amps, x[idx]);
        }
        Ok(psi)
    }

    /// Energy and gradient by one forward pass and one reverse sweep.
    pub fn energy_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut psi = self.state(x)?;
        let dim = psi.amps.len();
        let mut lambda = vec![C64::new(0.0, 0.0); dim];
        self.ham.apply(&psi.amps, &mut lambda);
        let energy = inner(&psi.amps, &lambda).re;
        let mut grad = vec![0.0; x.len()];
        let mut gphi = vec![C64::new(0.0, 0.0); dim];
        for (l, idx) in self.spec.schedule_indices().into_iter().rev() {
            let gen = self.layer(l);
            // dE/dθ = 2 Re ⟨λ| iG |φ⟩ = −2 Im ⟨λ|G|φ⟩
            gen.apply(&psi.amps, &mut gphi);
            grad[idx] = -2.0 * inner(&lambda, &gphi).im;
            gen.evolve(&mut psi.amps, -x[idx]);
            gen.evolve(&mut lambda, -x[idx]);
        }
        Ok((energy, grad))
    }
}

impl Objective for StatevectorObjective {
    fn dim(&self) -> usize {
        self.spec.num_params()
    }

    fn backend(&self) -> BackendTag {
        BackendTag::Statevector
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let psi = self.state(x)?;
        Ok(self.ham.expectation(&psi.amps).re)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Option<Result<(f64, Vec<f64>)>> {
        Some(self.energy_and_gradient(x))
    }
}
