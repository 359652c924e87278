//! Dense linear-algebra helpers on `nalgebra` matrices.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result, C64};

pub type CMatrix = DMatrix<C64>;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn one_norm(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(a: &CMatrix) -> CMatrix {
    assert!(a.is_square(), "expm: matrix must be square");
    let n = a.nrows();
    let norm = one_norm(a);
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a.scale(0.5f64.powi(s));
    let b = |k: usize| C64::new(PADE13[k], 0.0);
    let ident = CMatrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &ident * b(1);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &ident * b(0);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .expect("expm: singular Padé denominator");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Least-squares solution of `a x ≈ b` by Householder QR. `a` must have full
/// column rank and at least as many rows as columns.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::RankDeficient(format!(
            "{m} equations for {n} unknowns"
        )));
    }
    let qr = a.clone().qr();
    let qtb = qr.q().transpose() * b;
    let r = qr.r();
    r.solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::RankDeficient("singular triangular factor".into()))
}

/// Ratio of extreme singular values; `f64::INFINITY` when the smallest is zero.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Nearest physical density matrix: Hermitian part, eigenvalues clipped at
/// zero, trace renormalized to one.
pub fn project_physical(rho: &CMatrix) -> CMatrix {
    let herm = (rho + rho.adjoint()).scale(0.5);
    let eig = herm.symmetric_eigen();
    let clipped: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let n = rho.nrows();
    let mut out = CMatrix::zeros(n, n);
    if total <= 0.0 {
        return out;
    }
    for (j, &lam) in clipped.iter().enumerate() {
        if lam == 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(j);
        out += (&v * v.adjoint()).scale(lam / total);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_diagonal() {
        let mut a = CMatrix::zeros(3, 3);
        a[(0, 0)] = C64::new(1.0, 0.0);
        a[(1, 1)] = C64::new(0.0, 2.0);
        a[(2, 2)] = C64::new(-7.5, 0.3);
        let e = expm(&a);
        for i in 0..3 {
            assert!((e[(i, i)] - a[(i, i)].exp()).norm() < 1e-13 * e[(i, i)].norm().max(1.0));
        }
        assert!(e[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn expm_rotation_generator() {
        // exp(θ [[0,-1],[1,0]]) is a rotation; θ large enough to force squaring
        let th = 17.3;
        let a = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.0, 0.0), C64::new(-th, 0.0), C64::new(th, 0.0), C64::new(0.0, 0.0)],
        );
        let e = expm(&a);
        assert!((e[(0, 0)].re - th.cos()).abs() < 1e-12);
        assert!((e[(1, 0)].re - th.sin()).abs() < 1e-12);
    }

    #[test]
    fn projection_clips_negative_eigenvalues() {
        let rho = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(1.1, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-0.1, 0.0)],
        );
        let p = project_physical(&rho);
        assert!((p[(0, 0)].re - 1.0).abs() < 1e-14);
        assert!(p[(1, 1)].norm() < 1e-14);
    }

    #[test]
    fn lstsq_recovers_exact_solution() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let x = DVector::from_vec(vec![0.5, -2.0]);
        let b = &a * &x;
        let sol = lstsq(&a, &b).unwrap();
        assert!((sol - x).norm() < 1e-13);
    }
}
