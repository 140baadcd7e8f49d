//! Karhunen-Loève expansion of a random diffusion coefficient on `[-1, 1]²`
//! with the separable exponential covariance
//! `C(x, y) = σ² exp(-|x₁ - y₁|/b - |x₂ - y₂|/b)`.
//!
//! The one-dimensional eigenpairs are known in closed form up to roots of two
//! transcendental equations. The two-dimensional modes are their tensor products.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// Number of one-dimensional modes per direction in the candidate pool.
pub const POOL_SIZE: usize = 100;

/// One eigenpair of the 1D kernel `exp(-|s - t|/b)` on `[-1, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct Mode1d {
    pub omega: f64,
    pub lambda: f64,
    pub even: bool,
    /// Sign and normalization folded into one factor.
    scale: f64,
}

impl Mode1d {
    pub fn eval(&self, x: f64) -> f64 {
        if self.even {
            self.scale * (self.omega * x).cos()
        } else {
            self.scale * (self.omega * x).sin()
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        if self.even {
            -self.scale * self.omega * (self.omega * x).sin()
        } else {
            self.scale * self.omega * (self.omega * x).cos()
        }
    }
}

/// The `n` leading 1D eigenpairs, eigenvalues descending.
pub fn modes_1d(corr_len: f64, n: usize) -> Vec<Mode1d> {
    let c = 1.0 / corr_len;
    (0..n)
        .map(|idx| {
            let k = (idx / 2) as f64;
            let even = idx % 2 == 0;
            let omega = if even {
                // c cos ω - ω sin ω = 0 on (kπ, kπ + π/2)
                bisect(|w| c * w.cos() - w * w.sin(), k * PI, k * PI + FRAC_PI_2)
            } else {
                // ω cos ω + c sin ω = 0 on (kπ + π/2, (k+1)π)
                bisect(|w| w * w.cos() + c * w.sin(), k * PI + FRAC_PI_2, (k + 1.0) * PI)
            };
            let lambda = 2.0 * c / (omega * omega + c * c);
            let s2 = (2.0 * omega).sin() / (2.0 * omega);
            let norm = if even { 1.0 + s2 } else { 1.0 - s2 }.sqrt();
            let at_left = if even { omega.cos() } else { -omega.sin() };
            Mode1d {
                omega,
                lambda,
                even,
                scale: at_left.signum() / norm,
            }
        })
        .collect()
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// How many terms of the expansion to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KlTruncation {
    /// Smallest `m` whose modes carry at least this fraction of the pool's variance.
    Energy(f64),
    Fixed(usize),
}

#[derive(Debug, Clone)]
struct Mode2d {
    i: usize,
    j: usize,
    beta: f64,
}

/// `a(x, ξ) = a₀ + Σ_{l=1}^m √β_l a_l(x) ξ_l` with `ξ_l` uniform on `[-√3, √3]`.
#[derive(Debug, Clone)]
pub struct KlExpansion {
    pub mean: f64,
    pub sigma: f64,
    pub corr_len: f64,
    pool: Vec<Mode1d>,
    modes: Vec<Mode2d>,
}

impl KlExpansion {
    pub fn new(corr_len: f64, sigma: f64, truncation: KlTruncation) -> Result<Self> {
        if !(corr_len > 0.0) || !(sigma >= 0.0) {
            return Err(Error::Config(format!(
                "correlation length must be positive and sigma non-negative (got b={corr_len}, σ={sigma})"
            )));
        }
        let pool = modes_1d(corr_len, POOL_SIZE);
        let mut all: Vec<Mode2d> = Vec::with_capacity(POOL_SIZE * POOL_SIZE);
        for i in 0..POOL_SIZE {
            for j in 0..POOL_SIZE {
                all.push(Mode2d {
                    i,
                    j,
                    beta: sigma * sigma * pool[i].lambda * pool[j].lambda,
                });
            }
        }
        all.sort_by(|a, b| b.beta.total_cmp(&a.beta).then(a.i.cmp(&b.i)));

        let m = match truncation {
            KlTruncation::Fixed(m) => {
                if m == 0 || m > all.len() {
                    return Err(Error::Config(format!("number of KL terms must be in 1..={}", all.len())));
                }
                m
            }
            KlTruncation::Energy(frac) => {
                if !(frac > 0.0 && frac <= 1.0) {
                    return Err(Error::Config(format!("energy fraction must be in (0, 1], got {frac}")));
                }
                energy_rank(&all, frac)
            }
        };
        all.truncate(m);
        Ok(KlExpansion {
            mean: 1.0,
            sigma,
            corr_len,
            pool,
            modes: all,
        })
    }

    /// Number of random variables `m`.
    pub fn n_terms(&self) -> usize {
        self.modes.len()
    }

    pub fn beta(&self, l: usize) -> f64 {
        self.modes[l - 1].beta
    }

    /// `a_l(x)`, the unit-norm spatial mode `l ≥ 1`.
    pub fn mode(&self, l: usize, x: [f64; 2]) -> f64 {
        let md = &self.modes[l - 1];
        self.pool[md.i].eval(x[0]) * self.pool[md.j].eval(x[1])
    }

    /// Coefficient function of `ξ_l`: `a₀` for `l = 0`, otherwise `√β_l a_l(x)`.
    pub fn coefficient(&self, l: usize, x: [f64; 2]) -> f64 {
        if l == 0 {
            self.mean
        } else {
            self.beta(l).sqrt() * self.mode(l, x)
        }
    }

    pub fn eval(&self, x: [f64; 2], xi: &[f64]) -> f64 {
        assert_eq!(xi.len(), self.n_terms());
        self.mean + xi.iter().enumerate().map(|(l, &z)| z * self.coefficient(l + 1, x)).sum::<f64>()
    }

    /// Guaranteed lower bound of `a(x, ·)` over the whole parameter box.
    pub fn lower_bound_at(&self, x: [f64; 2]) -> f64 {
        let s3 = 3f64.sqrt();
        self.mean - s3 * (1..=self.n_terms()).map(|l| self.coefficient(l, x).abs()).sum::<f64>()
    }
}

fn energy_rank(sorted: &[Mode2d], frac: f64) -> usize {
    let total: f64 = sorted.iter().map(|m| m.beta).sum();
    let mut acc = 0.0;
    for (k, m) in sorted.iter().enumerate() {
        acc += m.beta;
        if acc >= frac * total {
            return k + 1;
        }
    }
    sorted.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::sym_eig;
    use faer::Mat;

    #[test]
    fn energy_rule_gives_expected_term_counts() {
        for (b, m) in [(4.0, 11), (5.0, 8), (3.0, 16)] {
            let kl = KlExpansion::new(b, 0.01, KlTruncation::Energy(0.95)).unwrap();
            assert_eq!(kl.n_terms(), m, "b = {b}");
        }
    }

    #[test]
    fn roots_satisfy_their_equations() {
        let c = 0.25;
        for md in modes_1d(4.0, 20) {
            let w = md.omega;
            let r = if md.even { c - w * w.tan() } else { w + c * w.tan() };
            assert!(r.abs() < 1e-9 * (1.0 + w), "{md:?}");
        }
    }

    #[test]
    fn one_dim_modes_are_eigenfunctions() {
        // ∫ exp(-|x - t|/b) f(t) dt = λ f(x) checked by Gauss quadrature split at x
        let b = 4.0;
        let (gx, gw) = crate::chaos::legendre::gauss_legendre(40);
        for md in modes_1d(b, 6) {
            for &x in &[-0.7, 0.1, 0.9] {
                let mut integral = 0.0;
                for (lo, hi) in [(-1.0, x), (x, 1.0)] {
                    let half = 0.5 * (hi - lo);
                    for (t, w) in gx.iter().zip(&gw) {
                        let s = lo + half * (t + 1.0);
                        integral += half * w * (-(x - s).abs() / b).exp() * md.eval(s);
                    }
                }
                assert!((integral - md.lambda * md.eval(x)).abs() < 1e-12);
            }
            let norm2: f64 = gx.iter().zip(&gw).map(|(t, w)| w * md.eval(*t).powi(2)).sum();
            assert!((norm2 - 1.0).abs() < 1e-10);
            assert!(md.eval(-1.0) > 0.0);
        }
    }

    /// Midpoint Nyström eigenvalues of the 1D kernel on an `n`-point grid.
    fn nystrom(b: f64, n: usize) -> Vec<f64> {
        let h = 2.0 / n as f64;
        let x: Vec<f64> = (0..n).map(|i| -1.0 + h * (i as f64 + 0.5)).collect();
        let k = Mat::from_fn(n, n, |i, j| h * (-(x[i] - x[j]).abs() / b).exp());
        let (mut v, _) = sym_eig(k.as_ref()).unwrap();
        v.reverse();
        v
    }

    #[test]
    fn leading_eigenvalues_match_nystrom_oracle() {
        let b = 4.0;
        let (fine, coarse) = (nystrom(b, 512), nystrom(b, 256));
        // Richardson extrapolation removes the O(h²) error of the midpoint rule.
        let extrap: Vec<f64> = (0..6).map(|i| (4.0 * fine[i] - coarse[i]) / 3.0).collect();
        let mut products: Vec<f64> = (0..6).flat_map(|i| (0..6).map(move |j| (i, j))).map(|(i, j)| extrap[i] * extrap[j]).collect();
        products.sort_by(|a, b| b.total_cmp(a));

        let sigma = 0.3;
        let kl = KlExpansion::new(b, sigma, KlTruncation::Fixed(6)).unwrap();
        for l in 1..=6 {
            let rel = (kl.beta(l) / (sigma * sigma) - products[l - 1]).abs() / products[l - 1];
            assert!(rel < 1e-6, "mode {l}: rel err {rel:e}");
        }
    }

    #[test]
    fn variance_trace_identity_in_the_limit() {
        let modes = modes_1d(4.0, 4000);
        let s: f64 = modes.iter().map(|m| m.lambda).sum();
        // Σ λ_i = ∫ C(x, x) dx = 2 in 1D, hence 4σ² over the square
        assert!((s - 2.0).abs() < 1e-4);
    }

    #[test]
    fn modes_are_positive_at_reference_corner_and_unit_norm() {
        let kl = KlExpansion::new(4.0, 0.01, KlTruncation::Energy(0.95)).unwrap();
        let (gx, gw) = crate::chaos::legendre::gauss_legendre(30);
        for l in 1..=kl.n_terms() {
            assert!(kl.mode(l, [-1.0, -1.0]) > 0.0);
            let mut n2 = 0.0;
            for (a, wa) in gx.iter().zip(&gw) {
                for (b, wb) in gx.iter().zip(&gw) {
                    n2 += wa * wb * kl.mode(l, [*a, *b]).powi(2);
                }
            }
            assert!((n2 - 1.0).abs() < 1e-10);
        }
        assert!(kl.lower_bound_at([0.0, 0.0]) > 0.9);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(KlExpansion::new(-1.0, 0.01, KlTruncation::Energy(0.95)).is_err());
        assert!(KlExpansion::new(4.0, 0.01, KlTruncation::Energy(1.5)).is_err());
        assert!(KlExpansion::new(4.0, 0.01, KlTruncation::Fixed(0)).is_err());
    }
}
