//! Factorials and Laguerre polynomials.

/// `ln(n!)` by direct summation for small `n`, Stirling series beyond.
pub fn ln_factorial(n: usize) -> f64 {
    if n < 64 {
        (2..=n).map(|k| (k as f64).ln()).sum()
    } else {
        let x = n as f64 + 1.0;
        // ln Γ(x) asymptotic series; at x ≥ 65 the truncation error is far below 1e-16
        (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln()
            + 1.0 / (12.0 * x)
            - 1.0 / (360.0 * x.powi(3))
            + 1.0 / (1260.0 * x.powi(5))
            - 1.0 / (1680.0 * x.powi(7))
    }
}

/// Generalized Laguerre polynomial `L_n^{(k)}(x)` by the three-term recurrence.
pub fn laguerre(n: usize, k: usize, x: f64) -> f64 {
    let k = k as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + k - x;
    for j in 1..n {
        let j = j as f64;
        let next = ((2.0 * j + 1.0 + k - x) * cur - (j + k) * prev) / (j + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// All of `L_0^{(k)}(x), ..., L_{n_max}^{(k)}(x)` in one pass.
pub fn laguerre_all(n_max: usize, k: usize, x: f64) -> Vec<f64> {
    let kf = k as f64;
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    if n_max == 0 {
        return out;
    }
    out.push(1.0 + kf - x);
    for j in 1..n_max {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + kf - x) * out[j] - (jf + kf) * out[j - 1]) / (jf + 1.0);
        out.push(next);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ln_factorial_matches_product_across_switchover() {
        let mut acc = 0.0;
        for n in 1..200usize {
            acc += (n as f64).ln();
            assert_relative_eq!(ln_factorial(n), acc, max_relative = 1e-14);
        }
        assert_eq!(ln_factorial(0), 0.0);
    }

    #[test]
    fn laguerre_low_orders() {
        let x = 0.37;
        assert_relative_eq!(laguerre(1, 1, x), 2.0 - x, epsilon = 1e-15);
        assert_relative_eq!(laguerre(2, 0, x), 1.0 - 2.0 * x + x * x / 2.0, epsilon = 1e-15);
        // L_2^{(1)}(x) = (x^2 - 6x + 6)/2
        assert_relative_eq!(laguerre(2, 1, x), (x * x - 6.0 * x + 6.0) / 2.0, epsilon = 1e-15);
        // L_n^{(k)}(0) = C(n+k, n)
        assert_relative_eq!(laguerre(5, 3, 0.0), 56.0, epsilon = 1e-12);
    }

    #[test]
    fn laguerre_all_agrees_with_single() {
        let all = laguerre_all(30, 4, 2.3);
        for (n, v) in all.iter().enumerate() {
            assert_relative_eq!(*v, laguerre(n, 4, 2.3), max_relative = 1e-13);
        }
    }
}
