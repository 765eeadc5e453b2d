//! Gauss–Legendre rules and Legendre polynomial evaluation.

use std::f64::consts::PI;

/// `P_n(x)` and `P_{n-1}(x)` by the three-term recurrence.
pub fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 1..n {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

pub fn legendre_p(n: usize, x: f64) -> f64 {
    legendre_pair(n, x).0
}

/// Nodes and weights of the `n`-point rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, q) = legendre_pair(n, x);
            let dp = n as f64 * (x * p - q) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (p, q) = legendre_pair(n, x);
        let dp = n as f64 * (x * p - q) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = -x;
        xs[n - 1 - i] = x;
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(20);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        for deg in 0..40usize {
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((got - want).abs() < 1e-13, "deg {deg}");
        }
    }

    #[test]
    fn legendre_values() {
        assert_eq!(legendre_p(0, 0.3), 1.0);
        assert!((legendre_p(2, 0.5) - (-0.125)).abs() < 1e-15);
        assert!((legendre_p(3, 1.0) - 1.0).abs() < 1e-15);
    }
}
