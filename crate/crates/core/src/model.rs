//! Spin-chain models, their alternating-layer ansätze and parameter sets.
//!
//! Conventions shared by every backend:
//! - site 1 is the most significant bit of a basis index, `|↑⟩ = |0⟩`;
//! - the ansatz factor with index `i = p` acts first on the initial state and
//!   `i = 1` last, and inside each factor the β layer acts before the α layer.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString, TermList};
use crate::statevector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Tfim,
    Xy,
    Xxz,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Tfim => "tfim",
            ModelKind::Xy => "xy",
            ModelKind::Xxz => "xxz",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text.to_ascii_lowercase().as_str() {
            "tfim" | "ising" => Ok(ModelKind::Tfim),
            "xy" => Ok(ModelKind::Xy),
            "xxz" => Ok(ModelKind::Xxz),
            other => Err(Error::Config(format!("unknown model {other:?} (expected tfim, xy or xxz)"))),
        }
    }

    pub fn boundary(self) -> Boundary {
        match self {
            ModelKind::Tfim | ModelKind::Xy => Boundary::Periodic,
            ModelKind::Xxz => Boundary::Open,
        }
    }

    /// Checks the size constraint of the model family.
    pub fn check_size(self, n: usize) -> Result<()> {
        if !(2..=PauliString::MAX_SITES).contains(&n) {
            return Err(Error::Config(format!("{}: N={n} outside 2..=64", self.name())));
        }
        match self {
            ModelKind::Xy if !n.is_multiple_of(4) => {
                Err(Error::Config(format!("xy: N={n} must be a multiple of 4")))
            }
            ModelKind::Tfim | ModelKind::Xxz if !n.is_multiple_of(2) => {
                Err(Error::Config(format!("{}: N={n} must be even", self.name())))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Open,
}

/// Which chain Hamiltonian, at which coupling and size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub g: f64,
    pub n: usize,
    pub boundary: Boundary,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, g: f64, n: usize, boundary: Boundary) -> Result<Self> {
        let spec = ModelSpec { kind, g, n, boundary };
        spec.validate()?;
        Ok(spec)
    }

    pub fn tfim(g: f64, n: usize) -> Result<Self> {
        Self::new(ModelKind::Tfim, g, n, Boundary::Periodic)
    }

    pub fn xy(n: usize) -> Result<Self> {
        Self::new(ModelKind::Xy, 0.0, n, Boundary::Periodic)
    }

    pub fn xxz(g: f64, n: usize) -> Result<Self> {
        Self::new(ModelKind::Xxz, g, n, Boundary::Open)
    }

    /// Same model family and coupling at a different size.
    pub fn with_size(&self, n: usize) -> Result<Self> {
        Self::new(self.kind, self.g, n, self.boundary)
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.check_size(self.n)?;
        if self.boundary != self.kind.boundary() {
            return Err(Error::Config(format!(
                "{} requires {:?} boundary, got {:?}",
                self.kind,
                self.kind.boundary(),
                self.boundary
            )));
        }
        if !self.g.is_finite() {
            return Err(Error::Config(format!("coupling g={} is not finite", self.g)));
        }
        match self.kind {
            ModelKind::Tfim if !(0.0..=1.0).contains(&self.g) => {
                Err(Error::Config(format!("tfim: g={} outside [0, 1]", self.g)))
            }
            ModelKind::Xxz if self.g < 0.0 => {
                Err(Error::Config(format!("xxz: g={} must be non-negative", self.g)))
            }
            _ => Ok(()),
        }
    }

    /// Nearest-neighbour bonds `(i, i+1)` (0-based), including the wrap bond
    /// `(N-1, 0)` for periodic chains. At `N = 2` a periodic chain lists the
    /// single bond twice.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let n = self.n;
        match self.boundary {
            Boundary::Periodic => (0..n).map(|i| (i, (i + 1) % n)).collect(),
            Boundary::Open => (0..n - 1).map(|i| (i, i + 1)).collect(),
        }
    }
}

fn bond_term(n: usize, (a, b): (usize, usize), p: Pauli) -> PauliString {
    PauliString::from_sites(n, &[(a, p), (b, p)])
}

fn push_nonzero(list: &mut TermList, coeff: f64, s: PauliString) {
    if coeff != 0.0 {
        list.push(coeff, s).expect("sizes agree by construction");
    }
}

/// All terms of the model Hamiltonian, signs as in the defining sums.
pub fn build_hamiltonian(model: &ModelSpec) -> Result<TermList> {
    model.validate()?;
    let n = model.n;
    let mut h = TermList::new(n);
    match model.kind {
        ModelKind::Tfim => {
            for bond in model.bonds() {
                push_nonzero(&mut h, -(1.0 - model.g), bond_term(n, bond, Pauli::Z));
            }
            for s in 0..n {
                push_nonzero(&mut h, -model.g, PauliString::from_sites(n, &[(s, Pauli::X)]));
            }
        }
        ModelKind::Xy => {
            for bond in model.bonds() {
                push_nonzero(&mut h, -1.0, bond_term(n, bond, Pauli::X));
                push_nonzero(&mut h, -1.0, bond_term(n, bond, Pauli::Z));
            }
        }
        ModelKind::Xxz => {
            for bond in model.bonds() {
                xxz_bond(&mut h, n, bond, model.g);
            }
        }
    }
    Ok(h)
}

fn xxz_bond(h: &mut TermList, n: usize, bond: (usize, usize), g: f64) {
    push_nonzero(h, -1.0, bond_term(n, bond, Pauli::X));
    push_nonzero(h, -1.0, bond_term(n, bond, Pauli::Z));
    push_nonzero(h, -g, bond_term(n, bond, Pauli::Y));
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// `|+⟩^⊗N`
    PlusProduct,
    /// `(|0…0⟩ + |1…1⟩)/√2`
    Ghz,
    /// `⊗_i (|00⟩ + |11⟩)/√2` on pairs `(2i-1, 2i)`
    BellPairProduct,
}

/// Which of the two alternating layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    /// generator multiplying `α_i`
    Alpha,
    /// generator multiplying `β_i`
    Beta,
}

/// Layer generators, depth and initial state of the variational circuit.
#[derive(Clone, Debug, PartialEq)]
pub struct AnsatzSpec {
    pub model: ModelSpec,
    pub layer_a: TermList,
    pub layer_b: TermList,
    pub depth: usize,
    pub initial: InitialState,
    /// Period (up to global phase) of `θ ↦ exp(iθ·layer)`, when one exists.
    pub period_a: Option<f64>,
    pub period_b: Option<f64>,
}

pub fn ansatz_spec(model: &ModelSpec) -> Result<AnsatzSpec> {
    model.validate()?;
    let n = model.n;
    let mut a = TermList::new(n);
    let mut b = TermList::new(n);
    let spec = match model.kind {
        ModelKind::Tfim => {
            for s in 0..n {
                push_nonzero(&mut a, 1.0, PauliString::from_sites(n, &[(s, Pauli::X)]));
            }
            for bond in model.bonds() {
                push_nonzero(&mut b, 1.0, bond_term(n, bond, Pauli::Z));
            }
            AnsatzSpec {
                model: *model,
                layer_a: a,
                layer_b: b,
                depth: n / 2,
                initial: InitialState::PlusProduct,
                period_a: Some(PI),
                period_b: Some(PI / 2.0),
            }
        }
        ModelKind::Xy => {
            for bond in model.bonds() {
                push_nonzero(&mut a, 1.0, bond_term(n, bond, Pauli::Z));
                push_nonzero(&mut b, 1.0, bond_term(n, bond, Pauli::X));
            }
            AnsatzSpec {
                model: *model,
                layer_a: a,
                layer_b: b,
                depth: n / 4,
                initial: InitialState::Ghz,
                period_a: Some(PI / 2.0),
                period_b: Some(PI / 2.0),
            }
        }
        ModelKind::Xxz => {
            // bond (i, i+1) with 1-based i odd is an "odd" bond: it lies inside a
            // Bell pair of the initial state.
            for bond in model.bonds() {
                if bond.0 % 2 == 0 {
                    xxz_bond(&mut a, n, bond, model.g);
                } else {
                    xxz_bond(&mut b, n, bond, model.g);
                }
            }
            let period = xxz_bond_period(model.g);
            AnsatzSpec {
                model: *model,
                layer_a: a,
                layer_b: b,
                depth: n / 2 + 1,
                initial: InitialState::BellPairProduct,
                period_a: period,
                period_b: period,
            }
        }
    };
    Ok(spec)
}

/// Period of `exp(iθ(XX + ZZ + gYY))` up to a global phase.
///
/// The bond spectrum is `{2-g, g, g, -2-g}`, so the phase differences are
/// `θ(2-2g)` and `θ(2+2g)`. For `g = a/b` in lowest terms the smallest
/// common period is `π·b / gcd(b-a, b+a)`. Irrational-looking couplings
/// (no denominator up to 1000) have no usable period.
fn xxz_bond_period(g: f64) -> Option<f64> {
    let (a, b) = rational_approx(g, 1000, 1e-12)?;
    let u = (b - a).unsigned_abs();
    let v = (b + a).unsigned_abs();
    let d = gcd(u, v);
    Some(PI * b as f64 / d as f64)
}

fn rational_approx(x: f64, max_den: i64, tol: f64) -> Option<(i64, i64)> {
    for b in 1..=max_den {
        let a = (x * b as f64).round();
        if (x - a / b as f64).abs() <= tol {
            return Some((a as i64, b));
        }
    }
    None
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl AnsatzSpec {
    pub fn layer(&self, layer: Layer) -> &TermList {
        match layer {
            Layer::Alpha => &self.layer_a,
            Layer::Beta => &self.layer_b,
        }
    }

    pub fn period(&self, layer: Layer) -> Option<f64> {
        match layer {
            Layer::Alpha => self.period_a,
            Layer::Beta => self.period_b,
        }
    }

    /// Number of variational angles, `2p`.
    pub fn num_params(&self) -> usize {
        2 * self.depth
    }

    /// Layer applications in the order they act on the initial state.
    pub fn schedule(&self, alphas: &[f64], betas: &[f64]) -> Result<Vec<(Layer, f64)>> {
        self.check_lengths(alphas.len(), betas.len())?;
        let mut out = Vec::with_capacity(2 * self.depth);
        for i in (0..self.depth).rev() {
            out.push((Layer::Beta, betas[i]));
            out.push((Layer::Alpha, alphas[i]));
        }
        Ok(out)
    }

    /// Position in the flat angle vector `[α_1..α_p, β_1..β_p]` of each
    /// scheduled layer, in application order.
    pub fn schedule_indices(&self) -> Vec<(Layer, usize)> {
        let p = self.depth;
        let mut out = Vec::with_capacity(2 * p);
        for i in (0..p).rev() {
            out.push((Layer::Beta, p + i));
            out.push((Layer::Alpha, i));
        }
        out
    }

    pub fn check_lengths(&self, na: usize, nb: usize) -> Result<()> {
        if na != self.depth {
            return Err(Error::Mismatch { expected: self.depth, got: na });
        }
        if nb != self.depth {
            return Err(Error::Mismatch { expected: self.depth, got: nb });
        }
        Ok(())
    }

    /// Content hash of the ansatz structure (model family, coupling, layer
    /// convention and depth rule), independent of the system size.
    pub fn family_fingerprint(&self) -> String {
        let text = format!(
            "{}|g={:?}|{:?}|{:?}|order=p-first|beta-before-alpha",
            self.model.kind, self.model.g, self.model.boundary, self.initial
        );
        hex::encode(Sha256::digest(text.as_bytes()))[..16].to_string()
    }

    /// Adiabatic-ramp angles used as a cold start: a Trotterized linear
    /// interpolation from the initial state's parent Hamiltonian to the model.
    pub fn ramp_guess(&self, dt: f64) -> Vec<f64> {
        let p = self.depth;
        let mut x = vec![0.0; 2 * p];
        for i in 0..p {
            // factor i (0-based) is the (p-1-i)-th to act
            let s = (p - i) as f64 - 0.5;
            let s = s / p as f64;
            let g = self.model.g;
            let (a, b) = match self.model.kind {
                ModelKind::Tfim => (dt * ((1.0 - s) + s * g), dt * s * (1.0 - g)),
                ModelKind::Xy => (dt, dt * s),
                // both XXZ layers already carry the Hamiltonian's minus sign
                ModelKind::Xxz => (-dt, -dt * s),
            };
            x[i] = a;
            x[p + i] = b;
        }
        x
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamSource {
    Optimized,
    Predicted,
}

/// Variational angles `{α_i, β_i}` for one model instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub model: ModelSpec,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Variational energy reached with these angles, when known.
    pub energy: Option<f64>,
    pub source: ParamSource,
}

impl ParamSet {
    pub fn new(model: ModelSpec, alphas: Vec<f64>, betas: Vec<f64>, source: ParamSource) -> Self {
        ParamSet { model, alphas, betas, energy: None, source }
    }

    pub fn zeros(spec: &AnsatzSpec) -> Self {
        Self::new(spec.model, vec![0.0; spec.depth], vec![0.0; spec.depth], ParamSource::Optimized)
    }

    /// Splits a flat `[α.., β..]` vector.
    pub fn from_vector(model: ModelSpec, x: &[f64], source: ParamSource) -> Result<Self> {
        if !x.len().is_multiple_of(2) {
            return Err(Error::Config(format!("angle vector of odd length {}", x.len())));
        }
        let p = x.len() / 2;
        Ok(Self::new(model, x[..p].to_vec(), x[p..].to_vec(), source))
    }

    pub fn to_vector(&self) -> Vec<f64> {
        self.alphas.iter().chain(self.betas.iter()).copied().collect()
    }

    pub fn depth(&self) -> usize {
        self.alphas.len()
    }

    pub fn family(&self, layer: Layer) -> &[f64] {
        match layer {
            Layer::Alpha => &self.alphas,
            Layer::Beta => &self.betas,
        }
    }
}

/// Shifts `theta` by multiples of `period` into `[-period/2, period/2)`.
pub fn wrap_angle(theta: f64, period: f64) -> f64 {
    let shifted = theta - period * ((theta + period / 2.0) / period).floor();
    if shifted >= period / 2.0 {
        shifted - period
    } else {
        shifted
    }
}

/// Moves every angle into the fundamental window of its layer. The prepared
/// state only changes by a global phase.
pub fn canonicalize_params(ps: &ParamSet, spec: &AnsatzSpec) -> Result<ParamSet> {
    spec.check_lengths(ps.alphas.len(), ps.betas.len())?;
    let wrap = |v: &[f64], period: Option<f64>| -> Vec<f64> {
        match period {
            Some(t) => v.iter().map(|&a| wrap_angle(a, t)).collect(),
            None => v.to_vec(),
        }
    };
    let mut out = ps.clone();
    out.alphas = wrap(&ps.alphas, spec.period_a);
    out.betas = wrap(&ps.betas, spec.period_b);
    Ok(out)
}

/// Relative energy error in percent, `100·|E − E₀|/|E₀|`.
pub fn energy_error_percent(energy: f64, exact: f64) -> f64 {
    100.0 * (energy - exact).abs() / exact.abs()
}

/// Largest XXZ chain handed to the Lanczos solver by default.
pub const DEFAULT_LANCZOS_CAP: usize = 24;

/// Ground-state energy: closed forms for the free-fermion chains, Lanczos for
/// XXZ up to `lanczos_cap` sites.
pub fn exact_ground_energy(model: &ModelSpec, lanczos_cap: usize) -> Result<f64> {
    model.validate()?;
    match model.kind {
        ModelKind::Tfim => Ok(tfim_even_sector_energy(model.g, model.n)),
        ModelKind::Xy => Ok(xy_ground_energy(model.n)),
        ModelKind::Xxz => {
            if model.n > lanczos_cap {
                return Err(Error::Capability(format!(
                    "xxz ground energy at N={} exceeds the Lanczos cap of {lanczos_cap}",
                    model.n
                )));
            }
            let h = build_hamiltonian(model)?;
            let gs = statevector::lanczos_ground(&h, &statevector::LanczosConfig::default())?;
            Ok(gs.energy)
        }
    }
}

/// Lowest energy of the periodic TFIM in the `Πσˣ = +1` sector:
/// `−Σ_k √(J² + h² − 2Jh cos k)` over `k = (2m+1)π/N`, with `J = 1−g`, `h = g`.
pub fn tfim_even_sector_energy(g: f64, n: usize) -> f64 {
    let j = 1.0 - g;
    let h = g;
    (0..n)
        .map(|m| {
            let k = (2 * m + 1) as f64 * PI / n as f64;
            -(j * j + h * h - 2.0 * j * h * k.cos()).max(0.0).sqrt()
        })
        .sum()
}

/// Ground energy of the periodic XY chain with `N ≡ 0 (mod 4)`: half filling
/// of `ε_k = −4 cos k` on antiperiodic momenta, which sums to `−4/sin(π/N)`.
pub fn xy_ground_energy(n: usize) -> f64 {
    -4.0 / (PI / n as f64).sin()
}
