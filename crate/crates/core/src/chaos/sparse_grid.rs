//! Smolyak sparse grids built from Gauss-Legendre rules.
//!
//! Level `i` of the one-dimensional family uses the `i`-point Gauss rule, so a
//! level-`L` grid integrates polynomials of total degree `2L - 1` exactly.

use std::collections::HashMap;

use super::legendre::gauss_legendre;

/// A quadrature rule for the uniform probability law on `[-√3, √3]^m`.
#[derive(Debug, Clone)]
pub struct SparseGrid {
    dim: usize,
    level: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl SparseGrid {
    pub fn new(dim: usize, level: usize) -> Self {
        assert!(dim >= 1 && level >= 1);
        let rules: Vec<(Vec<f64>, Vec<f64>)> = (1..=level).map(gauss_legendre).collect();
        let q = dim + level - 1;
        let lo = dim.max(level);

        let mut index: HashMap<Vec<(u16, u16)>, usize> = HashMap::new();
        let mut points = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        let mut levels = vec![0usize; dim];

        for total in lo..=q {
            let k = q - total;
            if k > dim - 1 {
                continue;
            }
            let coeff = if k.is_multiple_of(2) { 1.0 } else { -1.0 } * binomial(dim - 1, k) as f64;
            compositions(total, dim, &mut levels, 0, &mut |lv| {
                tensor_product(lv, &rules, coeff, &mut index, &mut points, &mut weights);
            });
        }

        // Drop nodes whose combined weight cancelled exactly.
        let keep: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] != 0.0).collect();
        SparseGrid {
            dim,
            level,
            points: keep.iter().map(|&i| points[i].clone()).collect(),
            weights: keep.iter().map(|&i| weights[i]).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i as u64 + 1))
}

/// Calls `f` for every vector of `dim` positive integers summing to `total`.
fn compositions(total: usize, dim: usize, buf: &mut Vec<usize>, pos: usize, f: &mut impl FnMut(&[usize])) {
    if pos == dim - 1 {
        if total >= 1 {
            buf[pos] = total;
            f(buf);
        }
        return;
    }
    let remaining = dim - pos - 1;
    if total < remaining + 1 {
        return;
    }
    for v in 1..=(total - remaining) {
        buf[pos] = v;
        compositions(total - v, dim, buf, pos + 1, f);
    }
}

fn tensor_product(
    levels: &[usize],
    rules: &[(Vec<f64>, Vec<f64>)],
    coeff: f64,
    index: &mut HashMap<Vec<(u16, u16)>, usize>,
    points: &mut Vec<Vec<f64>>,
    weights: &mut Vec<f64>,
) {
    let s3 = 3f64.sqrt();
    let dim = levels.len();
    let mut counter = vec![0usize; dim];
    loop {
        let mut w = coeff;
        let mut key = Vec::with_capacity(dim);
        let mut x = Vec::with_capacity(dim);
        for d in 0..dim {
            let n = levels[d];
            let (nodes, wts) = &rules[n - 1];
            let i = counter[d];
            w *= 0.5 * wts[i];
            x.push(s3 * nodes[i]);
            // Odd rules share the node 0.
            let id = if n % 2 == 1 && i == n / 2 { (0, 0) } else { (n as u16, i as u16) };
            key.push(id);
        }
        match index.get(&key) {
            Some(&k) => weights[k] += w,
            None => {
                index.insert(key, weights.len());
                points.push(x);
                weights.push(w);
            }
        }

        let mut d = 0;
        loop {
            if d == dim {
                return;
            }
            counter[d] += 1;
            if counter[d] < levels[d] {
                break;
            }
            counter[d] = 0;
            d += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_counts() {
        assert_eq!(SparseGrid::new(1, 4).len(), 4);
        assert_eq!(SparseGrid::new(2, 2).len(), 5);
        assert_eq!(SparseGrid::new(8, 4).len(), 849);
        assert_eq!(SparseGrid::new(11, 4).len(), 2069);
    }

    #[test]
    fn weights_form_a_probability_measure() {
        let g = SparseGrid::new(5, 4);
        let total: f64 = g.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-13);
        assert!(g.points().iter().flatten().all(|x| x.abs() <= 3f64.sqrt()));
    }

    #[test]
    fn exact_for_total_degree_seven() {
        let g = SparseGrid::new(3, 4);
        // E[ξ²] = 1 and E[ξ⁴] = 9/5 for the uniform law on [-√3, √3]
        let e = g.integrate(|x| x[0].powi(4) * x[1].powi(2));
        assert!((e - 1.8).abs() < 1e-13);
        let e = g.integrate(|x| x[0].powi(2) * x[1].powi(2) * x[2].powi(2));
        assert!((e - 1.0).abs() < 1e-13);
        let e = g.integrate(|x| x[0].powi(6));
        assert!((e - 27.0 / 7.0).abs() < 1e-12);
    }
}
