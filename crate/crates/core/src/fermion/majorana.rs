//! Majorana monomials and the Jordan–Wigner map.
//!
//! With 0-based sites and string `S_s = Π_{t<s} Z̃_t`:
//! `γ_{2s} = S_s X̃_s`, `γ_{2s+1} = S_s Ỹ_s`, hence `Z̃_s = −i γ_{2s} γ_{2s+1}`.
//! Tildes denote Paulis in the compiled frame, reached from the physical
//! ones by a fixed single-site Clifford rotation.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelKind;
use crate::pauli::{Pauli, PauliString};

/// `i^phase · γ_{k_1} γ_{k_2} ⋯` with strictly increasing indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial {
    pub phase: u8,
    pub indices: Vec<usize>,
}

impl Monomial {
    pub fn identity() -> Self {
        Monomial { phase: 0, indices: Vec::new() }
    }

    pub fn gamma(k: usize) -> Self {
        Monomial { phase: 0, indices: vec![k] }
    }

    /// Normal-orders an arbitrary product `γ_{k_1} ⋯ γ_{k_m}`.
    pub fn from_product(ks: &[usize]) -> Self {
        ks.iter().fold(Self::identity(), |acc, &k| acc.mul(&Self::gamma(k)))
    }

    pub fn coefficient(&self) -> C64 {
        i_pow(self.phase)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn scaled(mut self, quarter_turns: u8) -> Self {
        self.phase = (self.phase + quarter_turns) % 4;
        self
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = self.indices.clone();
        let mut phase = self.phase + other.phase;
        for &k in &other.indices {
            // move γ_k left past every larger index, then cancel or insert
            let larger = out.len() - out.partition_point(|&j| j <= k);
            if larger % 2 == 1 {
                phase += 2;
            }
            let pos = out.partition_point(|&j| j < k);
            if pos < out.len() && out[pos] == k {
                out.remove(pos);
            } else {
                out.insert(pos, k);
            }
        }
        Monomial { phase: phase % 4, indices: out }
    }

    /// `(i^p γ_S)† = (−i)^p (−1)^{m(m−1)/2} γ_S`
    pub fn adjoint(&self) -> Monomial {
        let m = self.indices.len();
        let mut phase = (4 - self.phase) % 4;
        if (m * m.saturating_sub(1) / 2) % 2 == 1 {
            phase = (phase + 2) % 4;
        }
        Monomial { phase, indices: self.indices.clone() }
    }

    /// True when `self` and `other` commute.
    pub fn commutes_with(&self, other: &Monomial) -> bool {
        let a = self.indices.len();
        let b = other.indices.len();
        let shared = self.indices.iter().filter(|k| other.indices.binary_search(k).is_ok()).count();
        (a * b - shared).is_multiple_of(2)
    }
}

pub(crate) fn i_pow(p: u8) -> C64 {
    match p % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

/// Fermion parity `P = Π_s Z̃_s = (−i)^N γ_0 γ_1 ⋯ γ_{2N−1}`.
pub fn parity_monomial(n: usize) -> Monomial {
    Monomial { phase: ((3 * n) % 4) as u8, indices: (0..2 * n).collect() }
}

/// Single-site rotation from physical to compiled Paulis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// `P̃ = P`
    Identity,
    /// Hadamard: `X → Z̃`, `Z → X̃`, `Y → −Ỹ` (field terms become on-site).
    Hadamard,
    /// Quarter turn about x: `X → X̃`, `Z → Ỹ`, `Y → −Z̃` (both XY bond sums
    /// become hopping/pairing terms).
    QuarterX,
}

impl Frame {
    pub fn for_model(kind: ModelKind) -> Result<Frame> {
        match kind {
            ModelKind::Tfim => Ok(Frame::Hadamard),
            ModelKind::Xy => Ok(Frame::QuarterX),
            ModelKind::Xxz => Err(Error::Capability("xxz is interacting and has no free-fermion form".into())),
        }
    }

    /// `(negated, compiled Pauli)`
    pub fn map(self, p: Pauli) -> (bool, Pauli) {
        match (self, p) {
            (_, Pauli::I) => (false, Pauli::I),
            (Frame::Identity, p) => (false, p),
            (Frame::Hadamard, Pauli::X) => (false, Pauli::Z),
            (Frame::Hadamard, Pauli::Z) => (false, Pauli::X),
            (Frame::Hadamard, Pauli::Y) => (true, Pauli::Y),
            (Frame::QuarterX, Pauli::X) => (false, Pauli::X),
            (Frame::QuarterX, Pauli::Z) => (false, Pauli::Y),
            (Frame::QuarterX, Pauli::Y) => (true, Pauli::Z),
        }
    }
}

/// Majorana form of a compiled-frame Pauli on one site.
fn site_monomial(s: usize, p: Pauli) -> Monomial {
    let string = |m: Monomial| {
        let mut idx: Vec<usize> = (0..2 * s).collect();
        idx.extend(m.indices);
        // S_s = Π_{t<s} (−i γ_{2t} γ_{2t+1}) = (−i)^s γ_0 ⋯ γ_{2s−1}
        Monomial { phase: ((3 * s + m.phase as usize) % 4) as u8, indices: idx }
    };
    match p {
        Pauli::I => Monomial::identity(),
        Pauli::X => string(Monomial::gamma(2 * s)),
        Pauli::Y => string(Monomial::gamma(2 * s + 1)),
        Pauli::Z => Monomial { phase: 3, indices: vec![2 * s, 2 * s + 1] },
    }
}

/// Jordan–Wigner image of a physical Pauli string after the frame rotation.
pub fn pauli_to_monomial(p: &PauliString, frame: Frame) -> Monomial {
    let mut acc = Monomial::identity();
    for (s, q) in p.sites() {
        let (neg, q) = frame.map(q);
        let mut m = site_monomial(s, q);
        if neg {
            m = m.scaled(2);
        }
        acc = acc.mul(&m);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn products_and_cancellation() {
        let g0 = Monomial::gamma(0);
        let g1 = Monomial::gamma(1);
        assert_eq!(g0.mul(&g0), Monomial::identity());
        // γ1 γ0 = −γ0 γ1
        assert_eq!(g1.mul(&g0), Monomial { phase: 2, indices: vec![0, 1] });
        // γ0 γ1 γ0 = −γ1
        assert_eq!(Monomial::from_product(&[0, 1, 0]), Monomial { phase: 2, indices: vec![1] });
        assert_eq!(Monomial::from_product(&[2, 0, 1]), Monomial { phase: 0, indices: vec![0, 1, 2] });
    }

    #[test]
    fn z_tilde_squares_to_one() {
        let z = site_monomial(3, Pauli::Z);
        assert_eq!(z.mul(&z), Monomial::identity());
        let x = site_monomial(2, Pauli::X);
        let y = site_monomial(2, Pauli::Y);
        // X̃Ỹ = iZ̃
        assert_eq!(x.mul(&y), site_monomial(2, Pauli::Z).scaled(1));
    }

    #[test]
    fn bond_identities() {
        // 0-based: X̃_s X̃_{s+1} = −i γ_{2s+1} γ_{2s+2}, Ỹ_s Ỹ_{s+1} = i γ_{2s} γ_{2s+3}
        let n = 5;
        for s in 0..n - 1 {
            let xx = PauliString::from_sites(n, &[(s, Pauli::X), (s + 1, Pauli::X)]);
            let yy = PauliString::from_sites(n, &[(s, Pauli::Y), (s + 1, Pauli::Y)]);
            assert_eq!(
                pauli_to_monomial(&xx, Frame::Identity),
                Monomial { phase: 3, indices: vec![2 * s + 1, 2 * s + 2] }
            );
            assert_eq!(
                pauli_to_monomial(&yy, Frame::Identity),
                Monomial { phase: 1, indices: vec![2 * s, 2 * s + 3] }
            );
        }
    }

    #[test]
    fn parity_is_product_of_z() {
        for n in 1..6 {
            let z_all = PauliString::from_sites(n, &(0..n).map(|s| (s, Pauli::Z)).collect::<Vec<_>>());
            assert_eq!(pauli_to_monomial(&z_all, Frame::Identity), parity_monomial(n));
        }
    }

    #[test]
    fn xxz_has_no_frame() {
        assert!(Frame::for_model(ModelKind::Xxz).is_err());
    }

    proptest! {
        #[test]
        fn multiplication_is_associative(a in prop::collection::vec(0usize..8, 0..6),
                                         b in prop::collection::vec(0usize..8, 0..6),
                                         c in prop::collection::vec(0usize..8, 0..6)) {
            let (ma, mb, mc) = (Monomial::from_product(&a), Monomial::from_product(&b), Monomial::from_product(&c));
            prop_assert_eq!(ma.mul(&mb).mul(&mc), ma.mul(&mb.mul(&mc)));
        }

        #[test]
        fn monomials_are_unitary(a in prop::collection::vec(0usize..8, 0..6)) {
            let m = Monomial::from_product(&a);
            prop_assert_eq!(m.adjoint().mul(&m), Monomial::identity());
        }
    }
}
