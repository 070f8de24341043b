use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Pfaffian of a real antisymmetric matrix by Parlett–Reid elimination with
/// partial pivoting.
pub fn pfaffian(a: &DMatrix<f64>) -> Result<f64> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Config(format!("pfaffian of a {}x{} matrix", n, a.ncols())));
    }
    if n % 2 == 1 {
        return Err(Error::Config(format!("pfaffian of odd dimension {n}")));
    }
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let defect = (a + a.transpose()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if defect > 1e-8 * scale {
        return Err(Error::Contract(format!("pfaffian input not antisymmetric (defect {defect:e})")));
    }
    Ok(pfaffian_unchecked(a.clone()))
}

pub(crate) fn pfaffian_unchecked(mut m: DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 1.0;
    }
    let mut pf = 1.0;
    for k in (0..n - 1).step_by(2) {
        let mut kp = k + 1;
        let mut best = m[(k + 1, k)].abs();
        for i in k + 2..n {
            if m[(i, k)].abs() > best {
                best = m[(i, k)].abs();
                kp = i;
            }
        }
        if kp != k + 1 {
            m.swap_rows(k + 1, kp);
            m.swap_columns(k + 1, kp);
            pf = -pf;
        }
        let pivot = m[(k, k + 1)];
        if pivot == 0.0 {
            return 0.0;
        }
        pf *= pivot;
        if k + 2 < n {
            let tau: Vec<f64> = (k + 2..n).map(|j| m[(k, j)] / pivot).collect();
            let col: Vec<f64> = (k + 2..n).map(|i| m[(i, k + 1)]).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    m[(i, j)] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
    }
    pf
}
