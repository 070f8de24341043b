use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

use super::{pauli_expectation, MajoranaCovariance, QuadraticGenerator};
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString};
use crate::statevector::DensityMatrix;

fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q > 1e-300 { -q * q.ln() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Entanglement entropy of the first `n` sites of a pure Gaussian state.
pub fn gaussian_entropy(cov: &MajoranaCovariance, n: usize) -> Result<f64> {
    if n == 0 || n >= cov.n() {
        return Err(Error::Config(format!("cut size {n} outside 1..{}", cov.n())));
    }
    let m = 2 * n;
    let block = cov.gamma().view((0, 0), (m, m)).into_owned();
    // −Γ_A² is symmetric PSD with eigenvalues ν_j², each twice
    let sq = -(&block * &block);
    let sym = (&sq + sq.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    Ok(0.5
        * eig
            .eigenvalues
            .iter()
            .map(|&l| {
                let nu = l.max(0.0).sqrt().min(1.0);
                binary_entropy((1.0 + nu) / 2.0)
            })
            .sum::<f64>())
}

/// `S(n)` for `n = 1..N−1`.
pub fn gaussian_entropy_profile(cov: &MajoranaCovariance) -> Result<Vec<f64>> {
    (1..cov.n()).map(|n| gaussian_entropy(cov, n)).collect()
}

const PAULIS: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

fn pauli_matrix(p: Pauli) -> [[C64; 2]; 2] {
    let (o, z, i) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 1.0));
    match p {
        Pauli::I => [[o, z], [z, o]],
        Pauli::X => [[z, o], [o, z]],
        Pauli::Y => [[z, -i], [i, z]],
        Pauli::Z => [[o, z], [z, -o]],
    }
}

/// `ρ = ¼ Σ_ab ⟨σ^a_j σ^b_k⟩ σ^a ⊗ σ^b` from a Pauli-expectation oracle.
pub(crate) fn rdm2_from_paulis(
    n: usize,
    (j, k): (usize, usize),
    mut expect: impl FnMut(&PauliString) -> Result<C64>,
) -> Result<DensityMatrix> {
    let mut rho = DMatrix::<C64>::zeros(4, 4);
    for &a in &PAULIS {
        for &b in &PAULIS {
            let mut p = PauliString::identity(n);
            p.set(j, a);
            p.set(k, b);
            let e = expect(&p)?;
            let (ma, mb) = (pauli_matrix(a), pauli_matrix(b));
            for r in 0..4 {
                for c in 0..4 {
                    rho[(r, c)] += 0.25 * e * ma[r >> 1][c >> 1] * mb[r & 1][c & 1];
                }
            }
        }
    }
    DensityMatrix::new(rho)
}

/// Reduced state of adjacent sites `(j, j+1)` (0-based) from Wick
/// contractions.
pub fn gaussian_rdm2(cov: &MajoranaCovariance, sites: (usize, usize)) -> Result<DensityMatrix> {
    let n = cov.n();
    if sites.1 != sites.0 + 1 || sites.1 >= n {
        return Err(Error::Capability(format!(
            "only adjacent site pairs (j, j+1) inside the chain are supported, got {sites:?}"
        )));
    }
    rdm2_from_paulis(n, sites, |p| pauli_expectation(cov, p))
}

/// Ground state of `gen` within its parity sector.
///
/// `Γ = −h (−h²)^{−1/2}` minimizes `¼ Σ h_kl Γ_kl`; when that state has the
/// wrong parity the softest mode is flipped.
pub fn ground_covariance(gen: &QuadraticGenerator) -> Result<MajoranaCovariance> {
    let h = gen.h();
    let d = h.nrows();
    let sq = -(h * h);
    let eig = SymmetricEigen::new((&sq + sq.transpose()) * 0.5);
    let scale = eig.eigenvalues.amax().max(1e-300);
    if eig.eigenvalues.iter().any(|&l| l < 1e-12 * scale) {
        return Err(Error::Numerical("quadratic Hamiltonian has a zero mode; ground state is degenerate".into()));
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let root = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    let mut g = -(h * root);
    g = (&g - g.transpose()) * 0.5;
    let mut cov = MajoranaCovariance::new(gen.n(), g, gen.parity(), gen.frame())?;
    if cov.measured_parity() * f64::from(gen.parity()) < 0.0 {
        // i·h is Hermitian with eigenvalues ±ε; the smallest ε spans a real
        // invariant plane {Re v, Im v}
        let ih = h.map(|v| C64::new(0.0, v));
        let ceig = SymmetricEigen::new(ih);
        let (idx, _) = ceig
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0.0)
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .ok_or_else(|| Error::Numerical("no positive mode to flip".into()))?;
        let v = ceig.eigenvectors.column(idx);
        let mut u = nalgebra::DVector::from_fn(d, |i, _| v[i].re);
        let mut w = nalgebra::DVector::from_fn(d, |i, _| v[i].im);
        u /= u.norm();
        w -= &u * u.dot(&w);
        w /= w.norm();
        let proj = &u * u.transpose() + &w * w.transpose();
        let flipped = &cov.gamma - (&proj * &cov.gamma * &proj) * 2.0;
        cov.gamma = (&flipped - flipped.transpose()) * 0.5;
    }
    Ok(cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fermion::{gaussian_energy, gaussian_init, jw_compile, FermionObjective, Frame};
    use crate::model::{ansatz_spec, tfim_even_sector_energy, InitialState, ModelSpec};
    use crate::statevector::{entanglement_entropy, reduced_density, StatevectorObjective};
    use std::f64::consts::LN_2;

    #[test]
    fn vacuum_entropy_is_zero_and_free_mode_is_ln2() {
        let v = MajoranaCovariance::vacuum(6, Frame::Hadamard);
        for n in 1..6 {
            assert!(gaussian_entropy(&v, n).unwrap().abs() < 1e-14);
        }
        // a maximally mixed mode: pair γ1 with γ2 across the cut
        let mut g = DMatrix::zeros(4, 4);
        g[(0, 3)] = 1.0;
        g[(3, 0)] = -1.0;
        g[(1, 2)] = 1.0;
        g[(2, 1)] = -1.0;
        let cov = MajoranaCovariance::new(2, g, 1, Frame::Identity).unwrap();
        assert!((gaussian_entropy(&cov, 1).unwrap() - LN_2).abs() < 1e-14);
    }

    #[test]
    fn vacuum_rdm_is_a_basis_projector() {
        let v = gaussian_init(InitialState::PlusProduct, 5).unwrap();
        let rho = gaussian_rdm2(&v, (1, 2)).unwrap();
        // |+⟩|+⟩ in the physical basis
        for r in 0..4 {
            for c in 0..4 {
                assert!((rho.get(r, c) - C64::new(0.25, 0.0)).norm() < 1e-14);
            }
        }
        let id = MajoranaCovariance::vacuum(3, Frame::Identity);
        let rho = gaussian_rdm2(&id, (0, 1)).unwrap();
        assert!((rho.get(0, 0) - C64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(gaussian_rdm2(&id, (0, 2)).is_err());
    }

    #[test]
    fn entropies_and_rdm_match_statevector() {
        let m = ModelSpec::tfim(0.5, 10).unwrap();
        let spec = ansatz_spec(&m).unwrap();
        let f = FermionObjective::new(&spec).unwrap();
        let s = StatevectorObjective::new(&spec).unwrap();
        let x: Vec<f64> = (0..spec.num_params()).map(|k| 0.3 + 0.05 * k as f64).collect();
        let cov = f.state(&x).unwrap();
        let psi = s.state(&x).unwrap();
        for n in 1..10 {
            let a = gaussian_entropy(&cov, n).unwrap();
            let b = entanglement_entropy(&psi, n).unwrap();
            assert!((a - b).abs() < 1e-9, "n={n}: {a} vs {b}");
        }
        let a = gaussian_rdm2(&cov, (0, 1)).unwrap();
        let b = reduced_density(&psi, &[0, 1]).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert!((a.get(r, c) - b.get(r, c)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn ground_energy_matches_closed_form() {
        for (g, n) in [(0.5, 8), (0.2, 12), (0.8, 10), (0.5, 40)] {
            let m = ModelSpec::tfim(g, n).unwrap();
            let c = jw_compile(&ansatz_spec(&m).unwrap(), 1).unwrap();
            let cov = ground_covariance(&c.hamiltonian).unwrap();
            assert!(cov.purity_defect() < 1e-10);
            assert!((cov.measured_parity() - 1.0).abs() < 1e-9);
            let e = gaussian_energy(&cov, &c.hamiltonian).unwrap();
            assert!((e - tfim_even_sector_energy(g, n)).abs() < 1e-10, "g={g} N={n}: {e}");
        }
        let m = ModelSpec::xy(16).unwrap();
        let c = jw_compile(&ansatz_spec(&m).unwrap(), 1).unwrap();
        let cov = ground_covariance(&c.hamiltonian).unwrap();
        let e = gaussian_energy(&cov, &c.hamiltonian).unwrap();
        assert!((e - crate::model::xy_ground_energy(16)).abs() < 1e-10, "{e}");
    }
}
