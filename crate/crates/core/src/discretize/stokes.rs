use super::diffusion::{check_level, combine, stiffness_matrices};
use super::fem::{self, element_points, local_node, shape, Mesh};
use crate::error::Result;
use crate::lowrank::SparseMatrix;
use crate::randfield::KlExpansion;

/// Taylor-Hood (Q2-Q1) discretization of a Stokes channel flow with a random
/// viscosity. Velocity is fixed on `x₁ = -1` and `x₂ = ±1`, the outflow at
/// `x₁ = 1` is natural.
///
/// Velocity unknowns are ordered as all first components followed by all
/// second components, each block in lexicographic node order.
#[derive(Debug, Clone)]
pub struct StokesProblem {
    pub mesh: Mesh,
    /// Block-diagonal vector Laplacians `K_0, K_1, …, K_m`.
    pub stiffness: Vec<SparseMatrix>,
    /// Discrete negative divergence `B`, `n_p × n_u`.
    pub divergence: SparseMatrix,
    /// Q1 pressure mass matrix.
    pub pressure_mass: SparseMatrix,
}

/// Free Q2 velocity nodes (per component).
pub fn q2_free_dof(mesh: Mesh) -> (impl Fn(usize, usize) -> Option<usize>, usize) {
    let n2 = 2 * mesh.cells;
    (
        move |i: usize, j: usize| (i >= 1 && j >= 1 && j < n2).then(|| (i - 1) * (n2 - 1) + (j - 1)),
        n2 * (n2 - 1),
    )
}

/// All Q1 pressure nodes.
pub fn q1_all_dof(mesh: Mesh) -> (impl Fn(usize, usize) -> Option<usize>, usize) {
    let n = mesh.cells + 1;
    (move |i: usize, j: usize| Some(i * n + j), n * n)
}

pub(crate) fn block_diag2(a: &SparseMatrix) -> SparseMatrix {
    let n = a.nrows();
    let m = a.ncols();
    let t: Vec<_> = a
        .iter()
        .flat_map(|(i, j, v)| [(i, j, v), (i + n, j + m, v)])
        .collect();
    SparseMatrix::from_triplets(2 * n, 2 * m, &t)
}

/// `B[k, (c, i)] = -∫ q_k ∂φ_i/∂x_c` over the given dof maps.
pub(crate) fn divergence(
    mesh: &Mesh,
    p_dof: &dyn Fn(usize, usize) -> Option<usize>,
    n_p: usize,
    v_dof: &dyn Fn(usize, usize) -> Option<usize>,
    n_v: usize,
) -> SparseMatrix {
    let mut t = Vec::new();
    for ex in 0..mesh.cells {
        for ey in 0..mesh.cells {
            let mut local = [[[0.0; 9]; 4]; 2];
            for qp in element_points(mesh, ex, ey) {
                let (q, _) = shape(1, mesh.h(), qp.t);
                let (_, g) = shape(2, mesh.h(), qp.t);
                for a in 0..4 {
                    for b in 0..9 {
                        for c in 0..2 {
                            local[c][a][b] -= q[a] * g[b][c] * qp.dx;
                        }
                    }
                }
            }
            for a in 0..4 {
                let (pi, pj) = local_node(1, ex, ey, a);
                let Some(row) = p_dof(pi, pj) else { continue };
                for b in 0..9 {
                    let (vi, vj) = local_node(2, ex, ey, b);
                    let Some(col) = v_dof(vi, vj) else { continue };
                    for c in 0..2 {
                        t.push((row, c * n_v + col, local[c][a][b]));
                    }
                }
            }
        }
    }
    SparseMatrix::from_triplets(n_p, 2 * n_v, &t)
}

impl StokesProblem {
    pub fn assemble(n_c: usize, kl: &KlExpansion) -> Result<Self> {
        check_level(n_c)?;
        let mesh = Mesh::new(n_c);
        let (vdof, nv) = q2_free_dof(mesh);
        let (pdof, np) = q1_all_dof(mesh);
        let stiffness = stiffness_matrices(mesh, kl, 2, &vdof, nv)?
            .iter()
            .map(block_diag2)
            .collect();
        let divergence = divergence(&mesh, &pdof, np, &vdof, nv);
        let pressure_mass = fem::mass(&mesh, 1, &pdof, np);
        Ok(StokesProblem {
            mesh,
            stiffness,
            divergence,
            pressure_mass,
        })
    }

    pub fn n_u(&self) -> usize {
        self.divergence.ncols()
    }

    pub fn n_p(&self) -> usize {
        self.divergence.nrows()
    }

    /// Size of the full saddle-point system.
    pub fn n_x(&self) -> usize {
        self.n_u() + self.n_p()
    }

    pub fn stiffness_at(&self, xi: &[f64]) -> SparseMatrix {
        combine(&self.stiffness, xi)
    }
}

/// Q2 velocity prolongation from level `n_c - 1` to `n_c` on free nodes, both components.
pub fn q2_prolongation(n_c: usize) -> SparseMatrix {
    let (fd, nf) = q2_free_dof(Mesh::new(n_c));
    let (cd, nc) = q2_free_dof(Mesh::new(n_c - 1));
    block_diag2(&fem::prolongation(n_c, 2, &fd, nf, &cd, nc))
}
