//! Tensor-product Lagrange elements of order 1 and 2 on a uniform square mesh.

use crate::chaos::legendre::gauss_legendre;
use crate::lowrank::SparseMatrix;

/// Uniform mesh of `[-1, 1]²` with `2^n_c` cells per side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mesh {
    pub n_c: usize,
    pub cells: usize,
}

impl Mesh {
    pub fn new(n_c: usize) -> Self {
        Mesh { n_c, cells: 1 << n_c }
    }

    pub fn h(&self) -> f64 {
        2.0 / self.cells as f64
    }

    /// Coordinate of node `i` along one axis for Lagrange order `order`.
    pub fn coord(&self, order: usize, i: usize) -> f64 {
        -1.0 + i as f64 * self.h() / order as f64
    }
}

/// Values and derivatives of the 1D Lagrange basis of order 1 or 2 at `t ∈ [-1, 1]`.
pub(crate) fn basis_1d(order: usize, t: f64) -> ([f64; 3], [f64; 3]) {
    match order {
        1 => ([0.5 * (1.0 - t), 0.5 * (1.0 + t), 0.0], [-0.5, 0.5, 0.0]),
        2 => (
            [0.5 * t * (t - 1.0), 1.0 - t * t, 0.5 * t * (t + 1.0)],
            [t - 0.5, -2.0 * t, t + 0.5],
        ),
        _ => panic!("unsupported element order {order}"),
    }
}

/// Quadrature point on the reference element with everything the assemblers need.
pub(crate) struct QuadPoint {
    pub x: [f64; 2],
    /// `w · |J|`
    pub dx: f64,
    pub t: [f64; 2],
}

/// 3×3 Gauss points of element `(ex, ey)`.
pub(crate) fn element_points(mesh: &Mesh, ex: usize, ey: usize) -> Vec<QuadPoint> {
    let (g, w) = gauss_legendre(3);
    let h = mesh.h();
    let (x0, y0) = (mesh.coord(1, ex), mesh.coord(1, ey));
    let mut out = Vec::with_capacity(9);
    for a in 0..3 {
        for b in 0..3 {
            out.push(QuadPoint {
                x: [x0 + 0.5 * h * (g[a] + 1.0), y0 + 0.5 * h * (g[b] + 1.0)],
                dx: w[a] * w[b] * 0.25 * h * h,
                t: [g[a], g[b]],
            });
        }
    }
    out
}

/// Local shape functions of a tensor element: values and physical gradients.
pub(crate) fn shape(order: usize, h: f64, t: [f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>) {
    let (vx, dx) = basis_1d(order, t[0]);
    let (vy, dy) = basis_1d(order, t[1]);
    let n = order + 1;
    let s = 2.0 / h;
    let mut v = Vec::with_capacity(n * n);
    let mut g = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            v.push(vx[a] * vy[b]);
            g.push([s * dx[a] * vy[b], s * vx[a] * dy[b]]);
        }
    }
    (v, g)
}

/// Global node `(i, j)` of local node `k` in element `(ex, ey)`.
pub(crate) fn local_node(order: usize, ex: usize, ey: usize, k: usize) -> (usize, usize) {
    let n = order + 1;
    (order * ex + k / n, order * ey + k % n)
}

/// Stiffness matrices `∫ c_l ∇φ_a·∇φ_b` for a family of coefficients evaluated together.
pub(crate) fn stiffness_family(
    mesh: &Mesh,
    order: usize,
    n_coeffs: usize,
    coeffs: &mut dyn FnMut([f64; 2]) -> Vec<f64>,
    dof: &dyn Fn(usize, usize) -> Option<usize>,
    ndof: usize,
) -> Vec<SparseMatrix> {
    let nloc = (order + 1) * (order + 1);
    let mut triplets: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); n_coeffs];
    let mut local = vec![vec![0.0; nloc * nloc]; n_coeffs];
    for ex in 0..mesh.cells {
        for ey in 0..mesh.cells {
            local.iter_mut().for_each(|l| l.iter_mut().for_each(|v| *v = 0.0));
            for qp in element_points(mesh, ex, ey) {
                let c = coeffs(qp.x);
                let (_, g) = shape(order, mesh.h(), qp.t);
                for a in 0..nloc {
                    for b in 0..nloc {
                        let gg = (g[a][0] * g[b][0] + g[a][1] * g[b][1]) * qp.dx;
                        for (l, cl) in c.iter().enumerate() {
                            local[l][a * nloc + b] += cl * gg;
                        }
                    }
                }
            }
            scatter(order, ex, ey, nloc, &local, dof, &mut triplets);
        }
    }
    triplets
        .into_iter()
        .map(|t| SparseMatrix::from_triplets(ndof, ndof, &t))
        .collect()
}

pub(crate) fn mass(mesh: &Mesh, order: usize, dof: &dyn Fn(usize, usize) -> Option<usize>, ndof: usize) -> SparseMatrix {
    let nloc = (order + 1) * (order + 1);
    let mut triplets = vec![Vec::new()];
    let mut local = vec![vec![0.0; nloc * nloc]];
    for ex in 0..mesh.cells {
        for ey in 0..mesh.cells {
            local[0].iter_mut().for_each(|v| *v = 0.0);
            for qp in element_points(mesh, ex, ey) {
                let (v, _) = shape(order, mesh.h(), qp.t);
                for a in 0..nloc {
                    for b in 0..nloc {
                        local[0][a * nloc + b] += v[a] * v[b] * qp.dx;
                    }
                }
            }
            scatter(order, ex, ey, nloc, &local, dof, &mut triplets);
        }
    }
    SparseMatrix::from_triplets(ndof, ndof, &triplets[0])
}

fn scatter(
    order: usize,
    ex: usize,
    ey: usize,
    nloc: usize,
    local: &[Vec<f64>],
    dof: &dyn Fn(usize, usize) -> Option<usize>,
    triplets: &mut [Vec<(usize, usize, f64)>],
) {
    let map: Vec<Option<usize>> = (0..nloc)
        .map(|k| {
            let (i, j) = local_node(order, ex, ey, k);
            dof(i, j)
        })
        .collect();
    for a in 0..nloc {
        let Some(ga) = map[a] else { continue };
        for b in 0..nloc {
            let Some(gb) = map[b] else { continue };
            for (l, loc) in local.iter().enumerate() {
                triplets[l].push((ga, gb, loc[a * nloc + b]));
            }
        }
    }
}

/// Interpolation of a continuous Lagrange function from the mesh with
/// `n_c - 1` to the mesh with `n_c`, restricted to the given dof maps.
pub(crate) fn prolongation(
    n_c: usize,
    order: usize,
    fine_dof: &dyn Fn(usize, usize) -> Option<usize>,
    n_fine: usize,
    coarse_dof: &dyn Fn(usize, usize) -> Option<usize>,
    n_coarse: usize,
) -> SparseMatrix {
    let coarse_cells = 1usize << (n_c - 1);
    let fine_nodes = order * (2 * coarse_cells) + 1;
    // 1D weights: fine node → [(coarse node, weight)]
    let weights_1d: Vec<Vec<(usize, f64)>> = (0..fine_nodes)
        .map(|i| {
            let e = (i / (2 * order)).min(coarse_cells - 1);
            let local = i - 2 * order * e;
            let t = -1.0 + local as f64 / order as f64;
            let (v, _) = basis_1d(order, t);
            (0..=order)
                .filter(|&a| v[a].abs() > 1e-14)
                .map(|a| (order * e + a, v[a]))
                .collect()
        })
        .collect();
    let mut t = Vec::new();
    for i in 0..fine_nodes {
        for j in 0..fine_nodes {
            let Some(row) = fine_dof(i, j) else { continue };
            for &(ci, wi) in &weights_1d[i] {
                for &(cj, wj) in &weights_1d[j] {
                    if let Some(col) = coarse_dof(ci, cj) {
                        t.push((row, col, wi * wj));
                    }
                }
            }
        }
    }
    SparseMatrix::from_triplets(n_fine, n_coarse, &t)
}
