//! Pauli strings and weighted sums of them.
//!
//! Sites are numbered from 0 internally; site `s` of a string is stored in bit
//! `s` of the `x` and `z` masks (`X = x`, `Z = z`, `Y = x & z`). Chains are
//! limited to 64 sites, which covers every size the pipeline touches.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(c: char) -> Option<Pauli> {
        match c {
            'I' | 'i' | '.' => Some(Pauli::I),
            'X' | 'x' => Some(Pauli::X),
            'Y' | 'y' => Some(Pauli::Y),
            'Z' | 'z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }
}

/// A tensor product of single-site Pauli operators on `n` sites.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
}

impl PauliString {
    pub const MAX_SITES: usize = 64;

    pub fn identity(n: usize) -> Self {
        assert!(n <= Self::MAX_SITES, "at most 64 sites");
        PauliString { n, x: 0, z: 0 }
    }

    /// Builds a string from `(site, pauli)` pairs; unlisted sites are identity.
    pub fn from_sites(n: usize, ops: &[(usize, Pauli)]) -> Self {
        let mut s = Self::identity(n);
        for &(site, p) in ops {
            s.set(site, p);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let n = text.chars().count();
        if n > Self::MAX_SITES {
            return Err(Error::Config(format!("pauli string longer than 64 sites: {n}")));
        }
        let mut s = Self::identity(n);
        for (site, c) in text.chars().enumerate() {
            let p = Pauli::from_char(c)
                .ok_or_else(|| Error::Config(format!("bad pauli letter {c:?} in {text:?}")))?;
            s.set(site, p);
        }
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn get(&self, site: usize) -> Pauli {
        let bit = 1u64 << site;
        match (self.x & bit != 0, self.z & bit != 0) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn set(&mut self, site: usize, p: Pauli) {
        assert!(site < self.n, "site {site} out of range for {} sites", self.n);
        let bit = 1u64 << site;
        let (x, z) = p.bits();
        self.x = if x { self.x | bit } else { self.x & !bit };
        self.z = if z { self.z | bit } else { self.z & !bit };
    }

    /// Sites on which the string acts non-trivially.
    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    pub fn weight(&self) -> u32 {
        self.support().count_ones()
    }

    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    pub fn is_diagonal(&self) -> bool {
        self.x == 0
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()).is_multiple_of(2)
    }

    pub fn sites(&self) -> impl Iterator<Item = (usize, Pauli)> + '_ {
        (0..self.n).map(|s| (s, self.get(s))).filter(|(_, p)| *p != Pauli::I)
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in 0..self.n {
            write!(f, "{}", self.get(s).as_char())?;
        }
        Ok(())
    }
}

impl Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        PauliString::parse(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coeff: f64,
    pub string: PauliString,
}

/// A real linear combination of Pauli strings on `n` sites (always Hermitian).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermList {
    n: usize,
    terms: Vec<PauliTerm>,
}

impl TermList {
    pub fn new(n: usize) -> Self {
        TermList { n, terms: Vec::new() }
    }

    pub fn push(&mut self, coeff: f64, string: PauliString) -> Result<()> {
        if !coeff.is_finite() {
            return Err(Error::Config(format!("non-finite coefficient {coeff}")));
        }
        if string.n() != self.n {
            return Err(Error::Mismatch { expected: self.n, got: string.n() });
        }
        self.terms.push(PauliTerm { coeff, string });
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when every pair of terms commutes.
    pub fn is_commuting(&self) -> bool {
        self.terms.iter().enumerate().all(|(a, ta)| {
            self.terms[a + 1..].iter().all(|tb| ta.string.commutes_with(&tb.string))
        })
    }

    /// Sum of absolute coefficients, an upper bound on the operator norm.
    pub fn norm_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.abs()).sum()
    }

    pub fn extend(&mut self, other: &TermList) -> Result<()> {
        if other.n != self.n {
            return Err(Error::Mismatch { expected: self.n, got: other.n });
        }
        self.terms.extend(other.terms.iter().cloned());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        let s = PauliString::parse("XIYZ").unwrap();
        assert_eq!(s.to_string(), "XIYZ");
        assert_eq!(s.get(2), Pauli::Y);
        assert_eq!(s.weight(), 3);
        assert_eq!(s.y_count(), 1);
    }

    #[test]
    fn commutation_rules() {
        let xx = PauliString::parse("XX").unwrap();
        let zz = PauliString::parse("ZZ").unwrap();
        let zi = PauliString::parse("ZI").unwrap();
        assert!(xx.commutes_with(&zz));
        assert!(!xx.commutes_with(&zi));
        assert!(zz.commutes_with(&zi));
    }

    #[test]
    fn rejects_non_finite_coefficient() {
        let mut t = TermList::new(2);
        assert!(t.push(f64::NAN, PauliString::identity(2)).is_err());
        assert!(t.push(1.0, PauliString::identity(3)).is_err());
    }
}
