//! Linear least squares under inequality constraints, after Lawson and
//! Hanson: NNLS, least distance programming, and the LSI reduction.

use nalgebra::{DMatrix, DVector};

use crate::linalg::lstsq;
use crate::{Error, Result};

/// `min ‖Ax − b‖` subject to `x ≥ 0`.
pub(crate) fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 10.0 * f64::EPSILON * a.norm() * (a.nrows().max(n) as f64) * b.norm().max(1.0);
    let at = a.transpose();

    for _ in 0..3 * n + 10 {
        let w = &at * (b - a * &x);
        let Some(jmax) = (0..n).filter(|&j| !passive[j]).max_by(|&i, &k| w[i].total_cmp(&w[k])) else {
            break;
        };
        if w[jmax] <= tol {
            break;
        }
        passive[jmax] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let sub = a.select_columns(&idx);
            let z_sub = match lstsq(&sub, b) {
                Ok(z) => z,
                Err(_) => {
                    // column set became dependent; drop the newest column
                    passive[jmax] = false;
                    break;
                }
            };
            let mut z = DVector::zeros(n);
            for (k, &j) in idx.iter().enumerate() {
                z[j] = z_sub[k];
            }
            if idx.iter().all(|&j| z[j] > 0.0) {
                x = z;
                break;
            }
            let mut step = 1.0_f64;
            for &j in &idx {
                if z[j] <= 0.0 {
                    step = step.min(x[j] / (x[j] - z[j]));
                }
            }
            x += (z - &x) * step;
            let floor = f64::EPSILON * x.amax();
            for &j in &idx {
                if x[j] <= floor {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

/// `min ‖z‖` subject to `G z ≥ h`.
fn ldp(g: &DMatrix<f64>, h: &DVector<f64>) -> Result<DVector<f64>> {
    let (k, n) = g.shape();
    let mut e = DMatrix::zeros(n + 1, k);
    e.rows_mut(0, n).copy_from(&g.transpose());
    e.row_mut(n).copy_from(&h.transpose());
    let mut f = DVector::zeros(n + 1);
    f[n] = 1.0;
    let u = nnls(&e, &f);
    let r = &e * &u - &f;
    if r[n].abs() < 1e-14 {
        return Err(Error::Conditioning("constraints are infeasible".into()));
    }
    Ok(DVector::from_iterator(n, (0..n).map(|i| -r[i] / r[n])))
}

/// `min ‖Ex − f‖` subject to `G x ≥ h`, for `E` of full column rank.
pub(crate) fn lsi(e: &DMatrix<f64>, f: &DVector<f64>, g: &DMatrix<f64>, h: &DVector<f64>) -> Result<DVector<f64>> {
    let n = e.ncols();
    if e.nrows() < n {
        return Err(Error::RankDeficient(format!("{} equations for {} unknowns", e.nrows(), n)));
    }
    let qr = e.clone().qr();
    let r = qr.r();
    let f1 = qr.q().transpose() * f;
    let rinv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("design matrix is singular".into()))?;
    let g_hat = g * &rinv;
    let h_hat = h - &g_hat * &f1;
    let z = ldp(&g_hat, &h_hat)?;
    Ok(rinv * (z + f1))
}
