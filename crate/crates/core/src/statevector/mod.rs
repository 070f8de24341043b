//! Dense `2^N` state-vector simulator.
//!
//! Amplitude index bit `N-1-s` holds site `s` (site 1 is the most significant
//! bit) and `|↑⟩ = |0⟩`. Layers are applied as in-place phase sweeps for the
//! diagonal terms and two-amplitude rotations for the others; no `2^N`
//! matrix is ever formed.

mod density;
mod dump;
mod lanczos;
mod objective;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::{AnsatzSpec, InitialState, Layer, ParamSet};
use crate::pauli::{PauliString, TermList};

pub use density::{entanglement_entropy, reduced_density, von_neumann_entropy, DensityMatrix};
pub use dump::{read_dump, write_dump, DUMP_MAGIC};
pub use lanczos::{lanczos_ground, GroundSpace, LanczosConfig};
pub use objective::StatevectorObjective;

/// Default ceiling on the number of qubits a `StateVector` may hold.
pub const DEFAULT_STATEVECTOR_CAP: usize = 26;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn from_amplitudes(n: usize, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != 1usize << n {
            return Err(Error::Mismatch { expected: 1 << n, got: amps.len() });
        }
        Ok(StateVector { n, amps })
    }

    /// The computational basis state `|index⟩`.
    pub fn basis(n: usize, index: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
        amps[index] = C64::new(1.0, 0.0);
        StateVector { n, amps }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let nrm = self.norm();
        if nrm > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= nrm);
        }
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.n != other.n {
            return Err(Error::Mismatch { expected: self.n, got: other.n });
        }
        Ok(inner(&self.amps, &other.amps))
    }
}

pub(crate) fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Prepares one of the ansatz initial states.
pub fn prepare_initial(kind: InitialState, n: usize) -> Result<StateVector> {
    if n == 0 || n > DEFAULT_STATEVECTOR_CAP {
        return Err(Error::Capability(format!("statevector size N={n} outside 1..={DEFAULT_STATEVECTOR_CAP}")));
    }
    let dim = 1usize << n;
    let zero = C64::new(0.0, 0.0);
    let amps = match kind {
        InitialState::PlusProduct => vec![C64::new((dim as f64).sqrt().recip(), 0.0); dim],
        InitialState::Ghz => {
            if !n.is_multiple_of(2) {
                return Err(Error::Config(format!("GHZ initial state needs even N, got {n}")));
            }
            let mut v = vec![zero; dim];
            let r = std::f64::consts::FRAC_1_SQRT_2;
            v[0] = C64::new(r, 0.0);
            v[dim - 1] = C64::new(r, 0.0);
            v
        }
        InitialState::BellPairProduct => {
            if !n.is_multiple_of(2) {
                return Err(Error::Config(format!("Bell-pair initial state needs even N, got {n}")));
            }
            // |00⟩ + |11⟩ on every pair: bits of each pair are equal
            let pairs = n / 2;
            let amp = C64::new((0.5f64).powf(pairs as f64 / 2.0), 0.0);
            let mut v = vec![zero; dim];
            for word in 0..(1usize << pairs) {
                let mut idx = 0usize;
                for k in 0..pairs {
                    if word >> k & 1 == 1 {
                        idx |= 0b11 << (2 * k);
                    }
                }
                v[idx] = amp;
            }
            v
        }
    };
    Ok(StateVector { n, amps })
}

fn amp_mask(site_mask: u64, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    (site_mask.reverse_bits() >> (64 - n)) as usize
}

/// A Pauli string in amplitude-bit form: `P|x⟩ = phase·(−1)^{|x∧z|}|x⊕x_mask⟩`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PauliAction {
    pub x: usize,
    pub z: usize,
    pub phase: C64,
}

impl PauliAction {
    pub fn new(p: &PauliString) -> Self {
        let n = p.n();
        let phase = match p.y_count() % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        };
        PauliAction { x: amp_mask(p.x_mask(), n), z: amp_mask(p.z_mask(), n), phase }
    }

    #[inline]
    fn sign(&self, idx: usize) -> f64 {
        if (idx & self.z).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }
}

/// A term list split into its diagonal part and Pauli actions, ready to be
/// applied or measured repeatedly.
#[derive(Clone, Debug)]
pub(crate) struct CompiledTerms {
    diag: Vec<(f64, usize)>,
    offdiag: Vec<(f64, PauliAction)>,
    /// every diagonal coefficient is equal
    uniform_diag: bool,
}

impl CompiledTerms {
    pub fn new(terms: &TermList) -> Self {
        let mut diag = Vec::new();
        let mut offdiag = Vec::new();
        for t in terms.terms() {
            let action = PauliAction::new(&t.string);
            if t.string.is_diagonal() {
                diag.push((t.coeff, action.z));
            } else {
                offdiag.push((t.coeff, action));
            }
        }
        let uniform_diag = diag.iter().all(|d| d.0 == diag[0].0);
        CompiledTerms { diag, offdiag, uniform_diag }
    }

    #[inline]
    fn diag_value(&self, idx: usize) -> f64 {
        self.diag
            .iter()
            .map(|&(c, z)| if (idx & z).count_ones().is_multiple_of(2) { c } else { -c })
            .sum()
    }

    /// `ψ ← exp(iθ·Σ terms) ψ`, valid when all terms commute.
    pub fn evolve(&self, amps: &mut [C64], theta: f64) {
        if self.uniform_diag && !self.diag.is_empty() {
            // value is c·(m − 2k) with k the number of odd parities
            let (c, m) = (self.diag[0].0, self.diag.len());
            let table: Vec<C64> = (0..=m).map(|k| C64::from_polar(1.0, theta * c * (m as f64 - 2.0 * k as f64))).collect();
            for (idx, a) in amps.iter_mut().enumerate() {
                let k: u32 = self.diag.iter().map(|&(_, z)| (idx & z).count_ones() & 1).sum();
                *a *= table[k as usize];
            }
        } else if !self.diag.is_empty() {
            for (idx, a) in amps.iter_mut().enumerate() {
                let phi = theta * self.diag_value(idx);
                *a *= C64::new(phi.cos(), phi.sin());
            }
        }
        for &(c, action) in &self.offdiag {
            let (s, co) = (theta * c).sin_cos();
            let isn = C64::new(0.0, s);
            // x runs over indices with the top bit of the flip mask clear, so y > x
            let top = 1usize << (usize::BITS - 1 - action.x.leading_zeros());
            for base in (0..amps.len()).step_by(2 * top) {
                for x in base..base + top {
                    let y = x ^ action.x;
                    let ax = amps[x];
                    let ay = amps[y];
                    // P|x⟩ = phase·sign(x)|y⟩
                    let pxy = action.phase * action.sign(x);
                    let pyx = action.phase * action.sign(y);
                    amps[y] = ay * co + isn * pxy * ax;
                    amps[x] = ax * co + isn * pyx * ay;
                }
            }
        }
    }

    /// `out ← Σ terms · ψ` (overwrites `out`).
    pub fn apply(&self, amps: &[C64], out: &mut [C64]) {
        for (idx, o) in out.iter_mut().enumerate() {
            *o = amps[idx] * self.diag_value(idx);
        }
        for &(c, action) in &self.offdiag {
            for (x, &ax) in amps.iter().enumerate() {
                out[x ^ action.x] += ax * (action.phase * (c * action.sign(x)));
            }
        }
    }

    /// `⟨ψ|Σ terms|ψ⟩` as a complex number (imaginary part is round-off).
    pub fn expectation(&self, amps: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        if !self.diag.is_empty() {
            let d: f64 = amps.iter().enumerate().map(|(i, a)| a.norm_sqr() * self.diag_value(i)).sum();
            acc += d;
        }
        for &(c, action) in &self.offdiag {
            let mut s = C64::new(0.0, 0.0);
            for (x, &ax) in amps.iter().enumerate() {
                s += amps[x ^ action.x].conj() * ax * action.sign(x);
            }
            acc += s * action.phase * c;
        }
        acc
    }
}

/// `state ← exp(iθ·generator)·state` for a generator of mutually commuting terms.
pub fn apply_layer(state: &mut StateVector, generator: &TermList, theta: f64) -> Result<()> {
    if generator.n() != state.n {
        return Err(Error::Mismatch { expected: state.n, got: generator.n() });
    }
    if !generator.is_commuting() {
        return Err(Error::Contract("layer generator terms do not commute".into()));
    }
    CompiledTerms::new(generator).evolve(&mut state.amps, theta);
    Ok(())
}

/// Prepares the variational state of `spec` with angles `ps`.
pub fn run_ansatz(spec: &AnsatzSpec, ps: &ParamSet) -> Result<StateVector> {
    let schedule = spec.schedule(&ps.alphas, &ps.betas)?;
    let mut state = prepare_initial(spec.initial, spec.model.n)?;
    let a = CompiledTerms::new(&spec.layer_a);
    let b = CompiledTerms::new(&spec.layer_b);
    for (layer, theta) in schedule {
        match layer {
            Layer::Alpha => a.evolve(&mut state.amps, theta),
            Layer::Beta => b.evolve(&mut state.amps, theta),
        }
    }
    Ok(state)
}

/// `⟨ψ|H|ψ⟩`; fails if the imaginary residue exceeds `1e-10·(1 + ‖H‖)`.
pub fn expectation(state: &StateVector, h: &TermList) -> Result<f64> {
    if h.n() != state.n {
        return Err(Error::Mismatch { expected: state.n, got: h.n() });
    }
    let e = CompiledTerms::new(h).expectation(&state.amps);
    if e.im.abs() > 1e-10 * (1.0 + h.norm_bound()) {
        return Err(Error::Numerical(format!("expectation has imaginary part {:e}", e.im)));
    }
    Ok(e.re)
}

/// `H|ψ⟩` (not normalized).
pub fn apply_hamiltonian(state: &StateVector, h: &TermList) -> Result<StateVector> {
    if h.n() != state.n {
        return Err(Error::Mismatch { expected: state.n, got: h.n() });
    }
    let mut out = vec![C64::new(0.0, 0.0); state.amps.len()];
    CompiledTerms::new(h).apply(&state.amps, &mut out);
    Ok(StateVector { n: state.n, amps: out })
}

/// `|⟨a|b⟩|`
pub fn overlap(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm())
}

/// Overlap of `state` with a (possibly degenerate) ground space: the norm of
/// its projection, `sqrt(Σ_k |⟨g_k|ψ⟩|²)`.
pub fn ground_overlap(state: &StateVector, ground: &GroundSpace) -> Result<f64> {
    let mut acc = 0.0;
    for g in &ground.states {
        acc += g.inner(state)?.norm_sqr();
    }
    Ok(acc.sqrt())
}
