//! Free-fermion simulation of the TFIM and XY ansätze.
//!
//! Pauli terms are rotated into a model-specific frame and Jordan–Wigner
//! transformed into Majorana bilinears. A state is tracked through its
//! covariance `Γ_kl = (i/2)⟨[γ_k, γ_l]⟩`; a layer `exp(iθG)` with
//! `G = (i/4) Σ h_kl γ_k γ_l` maps `Γ ↦ OΓOᵀ`, `O = exp(−θh)`.
//! Periodic wrap bonds are non-local under Jordan–Wigner; they are reduced
//! by the conserved fermion parity of the sector the circuit lives in.

mod cat;
mod majorana;
mod observables;
mod pfaffian;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, AnsatzSpec, InitialState, Layer, ModelSpec, ParamSet};
use crate::optimizer::{BackendTag, Objective};
use crate::pauli::{Pauli, PauliString, TermList};

pub use cat::{cat_expectation, CatGaussian};
pub use majorana::{parity_monomial, pauli_to_monomial, Frame, Monomial};
pub use observables::{gaussian_entropy, gaussian_entropy_profile, gaussian_rdm2, ground_covariance};
pub use pfaffian::pfaffian;

/// Covariance matrix of a fermionic Gaussian state in a compiled frame.
#[derive(Clone, Debug, PartialEq)]
pub struct MajoranaCovariance {
    n: usize,
    gamma: DMatrix<f64>,
    parity: i8,
    frame: Frame,
}

impl MajoranaCovariance {
    pub fn new(n: usize, gamma: DMatrix<f64>, parity: i8, frame: Frame) -> Result<Self> {
        if gamma.nrows() != 2 * n || gamma.ncols() != 2 * n {
            return Err(Error::Mismatch { expected: 2 * n, got: gamma.nrows() });
        }
        let defect = (&gamma + gamma.transpose()).amax();
        if defect > 1e-10 {
            return Err(Error::Numerical(format!("covariance not antisymmetric (defect {defect:e})")));
        }
        Ok(MajoranaCovariance { n, gamma, parity, frame })
    }

    /// All compiled-frame `Z̃` equal to +1.
    pub fn vacuum(n: usize, frame: Frame) -> Self {
        let mut g = DMatrix::zeros(2 * n, 2 * n);
        for s in 0..n {
            g[(2 * s, 2 * s + 1)] = -1.0;
            g[(2 * s + 1, 2 * s)] = 1.0;
        }
        MajoranaCovariance { n, gamma: g, parity: 1, frame }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    /// Parity sector the state was prepared in.
    pub fn parity(&self) -> i8 {
        self.parity
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    /// `‖Γ² + I‖_max`, zero for pure states.
    pub fn purity_defect(&self) -> f64 {
        let sq = &self.gamma * &self.gamma;
        (sq + DMatrix::<f64>::identity(2 * self.n, 2 * self.n)).amax()
    }

    pub fn antisymmetry_defect(&self) -> f64 {
        (&self.gamma + self.gamma.transpose()).amax()
    }

    /// `⟨P⟩ = (−1)^N Pf(Γ)` for a pure state.
    pub fn measured_parity(&self) -> f64 {
        let sign = if self.n.is_multiple_of(2) { 1.0 } else { -1.0 };
        sign * pfaffian::pfaffian_unchecked(self.gamma.clone())
    }
}

/// `G = (i/4) Σ h_kl γ_k γ_l + offset` in a compiled frame.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticGenerator {
    n: usize,
    h: DMatrix<f64>,
    offset: f64,
    frame: Frame,
    parity: i8,
    /// `(k, l, h_kl)` when the nonzero entries form disjoint pairs.
    pairs: Option<Vec<(usize, usize, f64)>>,
}

impl QuadraticGenerator {
    /// Builds the generator from real-weighted monomials, reducing long
    /// monomials by the parity `P = parity` of the sector.
    pub fn from_monomials(n: usize, terms: &[(f64, Monomial)], frame: Frame, parity: i8) -> Result<Self> {
        let p_mono = parity_monomial(n);
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        let mut offset = 0.0;
        for (coeff, m) in terms {
            let m = reduce_by_parity(m, &p_mono, parity, n);
            let c = m.coefficient() * *coeff;
            match m.indices.as_slice() {
                [] => offset += c.re,
                &[k, l] => {
                    // (i/4)(h_kl γ_kγ_l + h_lk γ_lγ_k) = (i/2) h_kl γ_kγ_l
                    let r = c.im;
                    h[(k, l)] += 2.0 * r;
                    h[(l, k)] -= 2.0 * r;
                }
                other => {
                    return Err(Error::Capability(format!(
                        "term of Majorana degree {} is not free-fermion",
                        other.len()
                    )))
                }
            }
        }
        let pairs = disjoint_pairs(&h);
        Ok(QuadraticGenerator { n, h, offset, frame, parity, pairs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn parity(&self) -> i8 {
        self.parity
    }

    pub fn is_pairwise(&self) -> bool {
        self.pairs.is_some()
    }

    /// `O = exp(−θh)`
    pub fn orthogonal(&self, theta: f64) -> DMatrix<f64> {
        match &self.pairs {
            Some(pairs) => {
                let mut o = DMatrix::identity(2 * self.n, 2 * self.n);
                for &(k, l, w) in pairs {
                    let (s, c) = (theta * w).sin_cos();
                    o[(k, k)] = c;
                    o[(k, l)] = -s;
                    o[(l, k)] = s;
                    o[(l, l)] = c;
                }
                o
            }
            None => (&self.h * -theta).exp(),
        }
    }

    /// `m ← O m Oᵀ` in place.
    fn conjugate(&self, m: &mut DMatrix<f64>, theta: f64) {
        match &self.pairs {
            Some(pairs) => {
                for &(k, l, w) in pairs {
                    let (s, c) = (theta * w).sin_cos();
                    rotate_pair(m, k, l, c, s);
                }
            }
            None => {
                let o = self.orthogonal(theta);
                *m = &o * &*m * o.transpose();
            }
        }
    }

    /// `Tr(Bᵀ [Γ, h])`
    fn commutator_overlap(&self, b: &DMatrix<f64>, g: &DMatrix<f64>) -> f64 {
        match &self.pairs {
            Some(pairs) => {
                let d = b.nrows();
                let mut acc = 0.0;
                for &(k, l, w) in pairs {
                    let mut t = 0.0;
                    for i in 0..d {
                        t += b[(i, l)] * g[(i, k)] - b[(i, k)] * g[(i, l)];
                        t -= b[(k, i)] * g[(l, i)] - b[(l, i)] * g[(k, i)];
                    }
                    acc += w * t;
                }
                acc
            }
            None => {
                let c = g * &self.h - &self.h * g;
                b.component_mul(&c).sum()
            }
        }
    }

    fn check_compatible(&self, cov: &MajoranaCovariance) -> Result<()> {
        if cov.n != self.n {
            return Err(Error::Mismatch { expected: self.n, got: cov.n });
        }
        if cov.frame != self.frame || cov.parity != self.parity {
            return Err(Error::Contract(format!(
                "state ({:?}, parity {}) and generator ({:?}, parity {}) were compiled differently",
                cov.frame, cov.parity, self.frame, self.parity
            )));
        }
        Ok(())
    }
}

/// Rows then columns `k, l` of `m` rotated by `[[c, −s], [s, c]]`.
fn rotate_pair(m: &mut DMatrix<f64>, k: usize, l: usize, c: f64, s: f64) {
    let d = m.nrows();
    for j in 0..d {
        let (a, b) = (m[(k, j)], m[(l, j)]);
        m[(k, j)] = c * a - s * b;
        m[(l, j)] = s * a + c * b;
    }
    for i in 0..d {
        let (a, b) = (m[(i, k)], m[(i, l)]);
        m[(i, k)] = c * a - s * b;
        m[(i, l)] = s * a + c * b;
    }
}

fn disjoint_pairs(h: &DMatrix<f64>) -> Option<Vec<(usize, usize, f64)>> {
    let d = h.nrows();
    let mut used = vec![false; d];
    let mut pairs = Vec::new();
    for k in 0..d {
        for l in k + 1..d {
            if h[(k, l)] != 0.0 {
                if used[k] || used[l] {
                    return None;
                }
                used[k] = true;
                used[l] = true;
                pairs.push((k, l, h[(k, l)]));
            }
        }
    }
    Some(pairs)
}

fn reduce_by_parity(m: &Monomial, p_mono: &Monomial, parity: i8, n: usize) -> Monomial {
    if m.len() > n {
        // on the sector P = parity: T = parity · T P
        let r = m.mul(p_mono);
        if parity < 0 {
            r.scaled(2)
        } else {
            r
        }
    } else {
        m.clone()
    }
}

/// Compiles a Pauli sum into a quadratic generator.
pub fn compile_terms(terms: &TermList, frame: Frame, parity: i8) -> Result<QuadraticGenerator> {
    let monos: Vec<(f64, Monomial)> =
        terms.terms().iter().map(|t| (t.coeff, pauli_to_monomial(&t.string, frame))).collect();
    QuadraticGenerator::from_monomials(terms.n(), &monos, frame, parity)
}

/// The ansatz layers and Hamiltonian of a TFIM or XY instance in fermionic
/// form.
#[derive(Clone, Debug)]
pub struct JwCircuit {
    pub spec: AnsatzSpec,
    pub frame: Frame,
    pub parity: i8,
    pub layer_a: QuadraticGenerator,
    pub layer_b: QuadraticGenerator,
    pub hamiltonian: QuadraticGenerator,
}

impl JwCircuit {
    pub fn layer(&self, l: Layer) -> &QuadraticGenerator {
        match l {
            Layer::Alpha => &self.layer_a,
            Layer::Beta => &self.layer_b,
        }
    }
}

/// Parity sector of the ansatz initial state: `+1` for `|+⟩^N` in the
/// Hadamard frame and for the GHZ state with `N ≡ 0 (mod 4)`.
pub fn initial_parity(spec: &AnsatzSpec) -> Result<i8> {
    match spec.initial {
        InitialState::PlusProduct => Ok(1),
        InitialState::Ghz if spec.model.n.is_multiple_of(4) => Ok(1),
        InitialState::Ghz => Ok(-1),
        InitialState::BellPairProduct => {
            Err(Error::Capability("Bell-pair initial state is not used by a free-fermion model".into()))
        }
    }
}

pub fn jw_compile(spec: &AnsatzSpec, parity: i8) -> Result<JwCircuit> {
    let frame = Frame::for_model(spec.model.kind)?;
    let h = build_hamiltonian(&spec.model)?;
    Ok(JwCircuit {
        spec: spec.clone(),
        frame,
        parity,
        layer_a: compile_terms(&spec.layer_a, frame, parity)?,
        layer_b: compile_terms(&spec.layer_b, frame, parity)?,
        hamiltonian: compile_terms(&h, frame, parity)?,
    })
}

/// Pure Gaussian state fixed by `N` commuting stabilizers (eigenvalue +1)
/// that compile to a perfect matching of Majorana pairs.
pub fn stabilizer_covariance(stabilizers: &[PauliString], frame: Frame, parity: i8) -> Result<MajoranaCovariance> {
    let n = stabilizers.first().map(|s| s.n()).unwrap_or(0);
    if stabilizers.len() != n {
        return Err(Error::Config(format!("need {n} stabilizers, got {}", stabilizers.len())));
    }
    let p_mono = parity_monomial(n);
    let mut g = DMatrix::zeros(2 * n, 2 * n);
    let mut used = vec![false; 2 * n];
    for s in stabilizers {
        let m = reduce_by_parity(&pauli_to_monomial(s, frame), &p_mono, parity, n);
        let (k, l) = match m.indices.as_slice() {
            &[k, l] if m.phase % 2 == 1 => (k, l),
            _ => return Err(Error::Capability(format!("stabilizer {s} is not a Majorana pair"))),
        };
        if used[k] || used[l] {
            return Err(Error::Config(format!("stabilizer {s} reuses a Majorana mode")));
        }
        used[k] = true;
        used[l] = true;
        // ⟨c γ_kγ_l⟩ = 1 with c = ±i, Γ_kl = i⟨γ_kγ_l⟩ = i/c
        let v = if m.phase == 1 { 1.0 } else { -1.0 };
        g[(k, l)] = v;
        g[(l, k)] = -v;
    }
    let cov = MajoranaCovariance { n, gamma: g, parity, frame };
    let measured = cov.measured_parity();
    if (measured - parity as f64).abs() > 1e-9 {
        return Err(Error::Contract(format!("stabilizer state has parity {measured}, sector is {parity}")));
    }
    Ok(cov)
}

/// Initial covariance of the TFIM (`|+⟩^N`) and XY (GHZ) ansätze in their
/// compiled frames. In the XY frame the GHZ state is itself Gaussian: its
/// `Z_s Z_{s+1}` stabilizers (wrap bond included) compile to a perfect
/// matching on the parity sector.
pub fn gaussian_init(kind: InitialState, n: usize) -> Result<MajoranaCovariance> {
    match kind {
        InitialState::PlusProduct => Ok(MajoranaCovariance::vacuum(n, Frame::Hadamard)),
        InitialState::Ghz => {
            if !n.is_multiple_of(4) {
                return Err(Error::Config(format!("GHZ Gaussian form needs N ≡ 0 mod 4, got {n}")));
            }
            let stabs: Vec<PauliString> =
                (0..n).map(|s| PauliString::from_sites(n, &[(s, Pauli::Z), ((s + 1) % n, Pauli::Z)])).collect();
            stabilizer_covariance(&stabs, Frame::QuarterX, 1)
        }
        InitialState::BellPairProduct => {
            Err(Error::Capability("Bell-pair initial state has no free-fermion form here".into()))
        }
    }
}

/// `Γ ← OΓOᵀ` for `exp(iθ·gen)`.
pub fn evolve(cov: &MajoranaCovariance, gen: &QuadraticGenerator, theta: f64) -> Result<MajoranaCovariance> {
    gen.check_compatible(cov)?;
    let mut out = cov.clone();
    gen.conjugate(&mut out.gamma, theta);
    Ok(out)
}

/// `⟨G⟩ = ¼ Σ h_kl Γ_kl + offset`
pub fn gaussian_energy(cov: &MajoranaCovariance, gen: &QuadraticGenerator) -> Result<f64> {
    gen.check_compatible(cov)?;
    Ok(0.25 * gen.h.component_mul(&cov.gamma).sum() + gen.offset)
}

/// `⟨i^p γ_S⟩ = i^p (−i)^{|S|/2} Pf(Γ_S)`; zero for odd `|S|`.
pub fn monomial_expectation(cov: &MajoranaCovariance, m: &Monomial) -> C64 {
    let k = m.len();
    if k % 2 == 1 {
        return C64::new(0.0, 0.0);
    }
    let sub = DMatrix::from_fn(k, k, |a, b| cov.gamma[(m.indices[a], m.indices[b])]);
    let pf = pfaffian::pfaffian_unchecked(sub);
    m.coefficient() * majorana::i_pow((3 * (k / 2) % 4) as u8) * pf
}

/// Expectation of a physical Pauli string.
pub fn pauli_expectation(cov: &MajoranaCovariance, p: &PauliString) -> Result<C64> {
    if p.n() != cov.n {
        return Err(Error::Mismatch { expected: cov.n, got: p.n() });
    }
    Ok(monomial_expectation(cov, &pauli_to_monomial(p, cov.frame)))
}

/// Covariance prepared by the ansatz with angles `ps`.
pub fn run_gaussian_ansatz(circuit: &JwCircuit, ps: &ParamSet) -> Result<MajoranaCovariance> {
    let schedule = circuit.spec.schedule(&ps.alphas, &ps.betas)?;
    let mut cov = gaussian_init(circuit.spec.initial, circuit.spec.model.n)?;
    for (layer, theta) in schedule {
        let gen = circuit.layer(layer);
        gen.check_compatible(&cov)?;
        gen.conjugate(&mut cov.gamma, theta);
    }
    Ok(cov)
}

/// Ansatz energy on the free-fermion backend with an adjoint gradient.
pub struct FermionObjective {
    circuit: JwCircuit,
    initial: MajoranaCovariance,
}

impl FermionObjective {
    pub fn new(spec: &AnsatzSpec) -> Result<Self> {
        let parity = initial_parity(spec)?;
        let circuit = jw_compile(spec, parity)?;
        let initial = gaussian_init(spec.initial, spec.model.n)?;
        circuit.hamiltonian.check_compatible(&initial)?;
        Ok(FermionObjective { circuit, initial })
    }

    pub fn for_model(model: &ModelSpec) -> Result<Self> {
        Self::new(&crate::model::ansatz_spec(model)?)
    }

    pub fn circuit(&self) -> &JwCircuit {
        &self.circuit
    }

    pub fn state(&self, x: &[f64]) -> Result<MajoranaCovariance> {
        let spec = &self.circuit.spec;
        spec.check_lengths(x.len() / 2, x.len() - x.len() / 2)?;
        let mut cov = self.initial.clone();
        for (l, idx) in spec.schedule_indices() {
            self.circuit.layer(l).conjugate(&mut cov.gamma, x[idx]);
        }
        Ok(cov)
    }

    pub fn energy_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut cov = self.state(x)?;
        let ham = &self.circuit.hamiltonian;
        let energy = 0.25 * ham.h.component_mul(&cov.gamma).sum() + ham.offset;
        // B holds the Hamiltonian pulled back through the remaining layers
        let mut b = ham.h.clone();
        let mut grad = vec![0.0; x.len()];
        for (l, idx) in self.circuit.spec.schedule_indices().into_iter().rev() {
            let gen = self.circuit.layer(l);
            grad[idx] = 0.25 * gen.commutator_overlap(&b, &cov.gamma);
            gen.conjugate(&mut cov.gamma, -x[idx]);
            gen.conjugate(&mut b, -x[idx]);
        }
        Ok((energy, grad))
    }
}

impl Objective for FermionObjective {
    fn dim(&self) -> usize {
        self.circuit.spec.num_params()
    }

    fn backend(&self) -> BackendTag {
        BackendTag::Fermion
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let cov = self.state(x)?;
        gaussian_energy(&cov, &self.circuit.hamiltonian)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Option<Result<(f64, Vec<f64>)>> {
        Some(self.energy_and_gradient(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ansatz_spec, ModelSpec, ParamSource};
    use crate::optimizer::fd_gradient;
    use crate::statevector::{self, StatevectorObjective};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn vacuum_examples() {
        let v = MajoranaCovariance::vacuum(1, Frame::Hadamard);
        assert_eq!(v.gamma().as_slice(), &[0.0, 1.0, -1.0, 0.0]); // column-major [[0,-1],[1,0]]
        let v = MajoranaCovariance::vacuum(5, Frame::Hadamard);
        assert_eq!(v.purity_defect(), 0.0);
        assert!((v.measured_parity() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vacuum_energy_is_field_energy() {
        for g in [1.0, 0.3] {
            let m = ModelSpec::tfim(g, 8).unwrap();
            let c = jw_compile(&ansatz_spec(&m).unwrap(), 1).unwrap();
            let e = gaussian_energy(&MajoranaCovariance::vacuum(8, Frame::Hadamard), &c.hamiltonian).unwrap();
            assert!((e + g * 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn transverse_layer_is_on_site() {
        let c = jw_compile(&ansatz_spec(&ModelSpec::tfim(0.5, 4).unwrap()).unwrap(), 1).unwrap();
        let h = c.layer_a.h();
        for k in 0..8 {
            for l in 0..8 {
                let expected = if k / 2 == l / 2 && k != l { if k < l { -2.0 } else { 2.0 } } else { 0.0 };
                assert_eq!(h[(k, l)], expected, "({k},{l})");
            }
        }
        assert!(c.layer_a.is_pairwise() && c.layer_b.is_pairwise());
    }

    #[test]
    fn wrap_bond_sign_follows_parity() {
        let spec = ansatz_spec(&ModelSpec::tfim(0.5, 4).unwrap()).unwrap();
        let even = jw_compile(&spec, 1).unwrap();
        let odd = jw_compile(&spec, -1).unwrap();
        // bulk bond (γ1, γ2) and wrap bond (γ7, γ0)
        assert_eq!(even.layer_b.h()[(1, 2)], odd.layer_b.h()[(1, 2)]);
        assert_eq!(even.layer_b.h()[(0, 7)], -odd.layer_b.h()[(0, 7)]);
        // in the even sector the wrap bond carries the opposite sign to the bulk
        assert_eq!(even.layer_b.h()[(1, 2)], -even.layer_b.h()[(7, 0)]);
    }

    #[test]
    fn xy_generators_have_all_bonds() {
        let c = jw_compile(&ansatz_spec(&ModelSpec::xy(4).unwrap()).unwrap(), 1).unwrap();
        for gen in [&c.layer_a, &c.layer_b] {
            let nonzero = gen.h().iter().filter(|v| **v != 0.0).count();
            assert_eq!(nonzero, 8);
        }
        let xxz = ansatz_spec(&ModelSpec::xxz(0.1, 4).unwrap()).unwrap();
        assert!(matches!(jw_compile(&xxz, 1), Err(Error::Capability(_))));
    }

    #[test]
    fn ghz_covariance_matches_statevector_correlators() {
        let n = 8;
        let cov = gaussian_init(InitialState::Ghz, n).unwrap();
        assert!(cov.purity_defect() < 1e-15);
        let psi = statevector::prepare_initial(InitialState::Ghz, n).unwrap();
        let strings = ["ZZIIIIII", "ZIIIIIIZ", "XXXXXXXX", "YYYYYYYY", "ZIIIIIII", "XXIIIIII", "ZIZIIIII"];
        for s in strings {
            let p = PauliString::parse(s).unwrap();
            let mut h = TermList::new(n);
            h.push(1.0, p).unwrap();
            let sv = statevector::expectation(&psi, &h).unwrap();
            let f = pauli_expectation(&cov, &p).unwrap();
            assert!((f.re - sv).abs() < 1e-12 && f.im.abs() < 1e-12, "{s}: {f} vs {sv}");
        }
        assert!(matches!(gaussian_init(InitialState::BellPairProduct, 4), Err(Error::Capability(_))));
    }

    #[test]
    fn single_layer_calibration_on_two_sites() {
        // exp(iθ Σ X) on |+⟩ leaves the energy, exp(iθ ZZ) rotates it
        let m = ModelSpec::tfim(0.5, 4).unwrap();
        let spec = ansatz_spec(&m).unwrap();
        let obj = FermionObjective::new(&spec).unwrap();
        let sv = StatevectorObjective::new(&spec).unwrap();
        for theta in [0.0, 0.1, 0.7, -1.3] {
            let x = vec![0.0, 0.0, theta, 0.2 * theta];
            let a = obj.evaluate(&x).unwrap();
            let b = sv.evaluate(&x).unwrap();
            assert!((a - b).abs() < 1e-12, "θ={theta}: {a} vs {b}");
        }
    }

    #[test]
    fn energies_match_statevector() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in [ModelSpec::tfim(0.5, 8).unwrap(), ModelSpec::tfim(0.2, 6).unwrap(), ModelSpec::xy(8).unwrap()] {
            let spec = ansatz_spec(&m).unwrap();
            let f = FermionObjective::new(&spec).unwrap();
            let s = StatevectorObjective::new(&spec).unwrap();
            for _ in 0..5 {
                let x: Vec<f64> = (0..spec.num_params()).map(|_| rng.random_range(-1.5..1.5)).collect();
                let (a, b) = (f.evaluate(&x).unwrap(), s.evaluate(&x).unwrap());
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{m:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn adjoint_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for m in [ModelSpec::tfim(0.5, 10).unwrap(), ModelSpec::xy(12).unwrap()] {
            let spec = ansatz_spec(&m).unwrap();
            let f = FermionObjective::new(&spec).unwrap();
            let x: Vec<f64> = (0..spec.num_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (_, g) = f.energy_and_gradient(&x).unwrap();
            let fd = fd_gradient(&f, &x, 1e-5).unwrap();
            for (a, b) in g.iter().zip(&fd) {
                assert!((a - b).abs() < 1e-7, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn evolution_keeps_purity() {
        let m = ModelSpec::tfim(0.5, 12).unwrap();
        let spec = ansatz_spec(&m).unwrap();
        let c = jw_compile(&spec, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut cov = gaussian_init(InitialState::PlusProduct, 12).unwrap();
        for k in 0..100 {
            let gen = if k % 2 == 0 { &c.layer_a } else { &c.layer_b };
            cov = evolve(&cov, gen, rng.random_range(-2.0..2.0)).unwrap();
        }
        assert!(cov.purity_defect() < 1e-8);
        assert!(cov.antisymmetry_defect() < 1e-12);
        let o = c.layer_b.orthogonal(0.37);
        assert!((&o * o.transpose() - DMatrix::<f64>::identity(24, 24)).amax() < 1e-12);
    }

    #[test]
    fn dense_exponential_path_agrees_with_givens() {
        let c = jw_compile(&ansatz_spec(&ModelSpec::tfim(0.5, 6).unwrap()).unwrap(), 1).unwrap();
        let mut dense = c.layer_b.clone();
        dense.pairs = None;
        let cov = gaussian_init(InitialState::PlusProduct, 6).unwrap();
        let cov = evolve(&cov, &c.layer_a, 0.4).unwrap();
        let a = evolve(&cov, &c.layer_b, 0.9).unwrap();
        let b = evolve(&cov, &dense, 0.9).unwrap();
        assert!((a.gamma() - b.gamma()).amax() < 1e-12);
        let b2 = cov.gamma().clone();
        assert!((c.layer_b.commutator_overlap(&b2, a.gamma()) - dense.commutator_overlap(&b2, a.gamma())).abs() < 1e-10);
    }

    #[test]
    fn frame_mismatch_is_a_contract_error() {
        let c = jw_compile(&ansatz_spec(&ModelSpec::tfim(0.5, 4).unwrap()).unwrap(), 1).unwrap();
        let wrong = MajoranaCovariance::vacuum(4, Frame::QuarterX);
        assert!(matches!(evolve(&wrong, &c.layer_a, 0.1), Err(Error::Contract(_))));
        let ps = ParamSet::new(c.spec.model, vec![0.0; 3], vec![0.0; 2], ParamSource::Predicted);
        assert!(run_gaussian_ansatz(&c, &ps).is_err());
    }
}
