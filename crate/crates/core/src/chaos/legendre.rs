//! Legendre polynomials and Gauss-Legendre rules.

use std::f64::consts::PI;

/// `P_0(x), …, P_n(x)` by the three-term recurrence.
pub fn legendre_all(n: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(n + 1);
    p.push(1.0);
    if n >= 1 {
        p.push(x);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p[k] - kf * p[k - 1]) / (kf + 1.0);
        p.push(next);
    }
    p
}

/// Orthonormal Legendre polynomials `ψ_0..ψ_n` for the uniform law on `[-√3, √3]`.
pub fn psi_all(n: usize, xi: f64) -> Vec<f64> {
    let x = xi / 3f64.sqrt();
    legendre_all(n, x)
        .into_iter()
        .enumerate()
        .map(|(k, pk)| (2.0 * k as f64 + 1.0).sqrt() * pk)
        .collect()
}

/// `E[ξ ψ_n ψ_{n+1}]` under the uniform law on `[-√3, √3]`.
pub fn adjacent_moment(n: usize) -> f64 {
    let n = n as f64;
    3f64.sqrt() * (n + 1.0) / ((2.0 * n + 1.0) * (2.0 * n + 3.0)).sqrt()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (weights sum to 2), nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rules_integrate_polynomials_exactly() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-14, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn three_point_rule_known_values() {
        let (x, w) = gauss_legendre(3);
        assert!((x[2] - 0.6f64.sqrt()).abs() < 1e-15);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn psi_orthonormal_and_moments() {
        let (x, w) = gauss_legendre(10);
        let s3 = 3f64.sqrt();
        let vals: Vec<Vec<f64>> = x.iter().map(|&t| psi_all(5, s3 * t)).collect();
        for a in 0..=5 {
            for b in 0..=5 {
                let e: f64 = vals.iter().zip(&w).map(|(v, w)| 0.5 * w * v[a] * v[b]).sum();
                assert!((e - if a == b { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
            if a < 5 {
                let m: f64 = vals.iter().zip(&w).zip(&x).map(|((v, w), t)| 0.5 * w * s3 * t * v[a] * v[a + 1]).sum();
                assert!((m - adjacent_moment(a)).abs() < 1e-13);
            }
        }
        assert!((adjacent_moment(0) - 1.0).abs() < 1e-15);
    }
}
