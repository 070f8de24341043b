use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::StateVector;
use crate::error::{Error, Result};

/// Reduced state of `k` retained qubits; the first retained site is the most
/// significant bit of the row/column index.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    k: usize,
    entries: DMatrix<C64>,
}

/// Plain-data form used in output files: `re[i][j]`, `im[i][j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrixRecord {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl DensityMatrix {
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        let dim = entries.nrows();
        if dim != entries.ncols() || !dim.is_power_of_two() {
            return Err(Error::Config(format!("density matrix must be 2^k square, got {}x{}", dim, entries.ncols())));
        }
        Ok(DensityMatrix { k: dim.trailing_zeros() as usize, entries })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    /// 0-based entry access.
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[(i, j)]
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    /// `‖ρ − ρ†‖_max`
    pub fn hermiticity_defect(&self) -> f64 {
        let adj = self.entries.adjoint();
        (&self.entries - adj).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Eigenvalues in ascending order (after Hermitian symmetrization).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.entries + self.entries.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    /// Checks Hermiticity, unit trace and positivity within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let h = self.hermiticity_defect();
        if h > tol {
            return Err(Error::Numerical(format!("density matrix not Hermitian (defect {h:e})")));
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > tol {
            return Err(Error::Numerical(format!("density matrix trace {tr} != 1")));
        }
        let min = self.eigenvalues()[0];
        if min < -tol {
            return Err(Error::Numerical(format!("density matrix eigenvalue {min:e} < 0")));
        }
        Ok(())
    }

    /// `−Tr ρ ln ρ`, dropping eigenvalues below `1e-14`.
    pub fn entropy(&self) -> f64 {
        entropy_of(&self.eigenvalues())
    }

    pub fn to_record(&self) -> DensityMatrixRecord {
        let d = self.dim();
        DensityMatrixRecord {
            re: (0..d).map(|i| (0..d).map(|j| self.entries[(i, j)].re).collect()).collect(),
            im: (0..d).map(|i| (0..d).map(|j| self.entries[(i, j)].im).collect()).collect(),
        }
    }
}

fn entropy_of(eigs: &[f64]) -> f64 {
    eigs.iter().filter(|&&l| l > 1e-14).map(|&l| -l * l.ln()).sum()
}

/// Von Neumann entropy of a Hermitian matrix given as eigenvalues.
pub fn von_neumann_entropy(eigs: &[f64]) -> f64 {
    entropy_of(eigs)
}

/// Partial trace over every site not listed in `sites` (0-based, distinct).
pub fn reduced_density(state: &StateVector, sites: &[usize]) -> Result<DensityMatrix> {
    let n = state.n();
    let k = sites.len();
    if k == 0 || k > n {
        return Err(Error::Config(format!("cannot keep {k} of {n} sites")));
    }
    let mut seen = 0u64;
    for &s in sites {
        if s >= n {
            return Err(Error::Config(format!("site {s} out of range for N={n}")));
        }
        if seen >> s & 1 == 1 {
            return Err(Error::Config(format!("site {s} listed twice")));
        }
        seen |= 1 << s;
    }
    // amplitude bit for each retained site, first listed = most significant
    let bits: Vec<usize> = sites.iter().map(|&s| 1usize << (n - 1 - s)).collect();
    let kept_mask: usize = bits.iter().sum();
    let dim = 1usize << k;
    let offsets: Vec<usize> = (0..dim)
        .map(|a| (0..k).filter(|&t| a >> (k - 1 - t) & 1 == 1).map(|t| bits[t]).sum())
        .collect();
    let amps = state.amplitudes();
    let mut rho = DMatrix::<C64>::zeros(dim, dim);
    let mut local = vec![C64::new(0.0, 0.0); dim];
    for rest in 0..amps.len() {
        if rest & kept_mask != 0 {
            continue;
        }
        for (a, off) in offsets.iter().enumerate() {
            local[a] = amps[rest | off];
        }
        for a in 0..dim {
            if local[a] == C64::new(0.0, 0.0) {
                continue;
            }
            for b in 0..dim {
                rho[(a, b)] += local[a] * local[b].conj();
            }
        }
    }
    DensityMatrix::new(rho)
}

/// Entanglement entropy (natural log) of the block of the first `n` sites.
pub fn entanglement_entropy(state: &StateVector, n: usize) -> Result<f64> {
    let total = state.n();
    if n == 0 || n >= total {
        return Err(Error::Config(format!("cut size {n} outside 1..{total}")));
    }
    let rows = 1usize << n;
    let cols = 1usize << (total - n);
    let amps = state.amplitudes();
    // Gram matrix of the smaller side
    let gram = if rows <= cols {
        let mut g = DMatrix::<C64>::zeros(rows, rows);
        for a in 0..rows {
            let ra = &amps[a * cols..(a + 1) * cols];
            for b in a..rows {
                let rb = &amps[b * cols..(b + 1) * cols];
                let v: C64 = ra.iter().zip(rb).map(|(x, y)| x * y.conj()).sum();
                g[(a, b)] = v;
                g[(b, a)] = v.conj();
            }
        }
        g
    } else {
        let mut g = DMatrix::<C64>::zeros(cols, cols);
        for r in 0..rows {
            let row = &amps[r * cols..(r + 1) * cols];
            for a in 0..cols {
                if row[a] == C64::new(0.0, 0.0) {
                    continue;
                }
                let ca = row[a].conj();
                for b in 0..cols {
                    g[(a, b)] += ca * row[b];
                }
            }
        }
        g
    };
    let eigs: Vec<f64> = SymmetricEigen::new(gram).eigenvalues.iter().copied().collect();
    Ok(entropy_of(&eigs))
}
