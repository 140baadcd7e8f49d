use super::fem::{self, Mesh};
use crate::error::{Error, Result};
use crate::lowrank::SparseMatrix;
use crate::randfield::KlExpansion;

/// Bilinear (Q1) discretization of `-∇·(a ∇u) = λ u` with homogeneous Dirichlet
/// conditions. Unknowns are the interior nodes in lexicographic order.
#[derive(Debug, Clone)]
pub struct DiffusionProblem {
    pub mesh: Mesh,
    /// `K_0` (mean coefficient) followed by `K_l` for each KL term.
    pub stiffness: Vec<SparseMatrix>,
    pub mass: SparseMatrix,
}

/// Interior-node numbering for Q1 on `mesh`.
pub fn q1_dof(mesh: Mesh) -> (impl Fn(usize, usize) -> Option<usize>, usize) {
    let n = mesh.cells;
    let inner = n.saturating_sub(1);
    (
        move |i: usize, j: usize| (i >= 1 && j >= 1 && i < n && j < n).then(|| (i - 1) * inner + (j - 1)),
        inner * inner,
    )
}

pub(crate) fn check_level(n_c: usize) -> Result<()> {
    if !(1..=12).contains(&n_c) {
        return Err(Error::Config(format!("mesh level n_c must be in 1..=12, got {n_c}")));
    }
    Ok(())
}

/// The KL coefficient functions at `x` with a positivity check on the whole parameter box.
pub(crate) fn coefficient_values(kl: &KlExpansion, x: [f64; 2]) -> Result<Vec<f64>> {
    if kl.lower_bound_at(x) <= 0.0 {
        return Err(Error::Config(format!(
            "diffusion coefficient is not uniformly positive at ({:.3}, {:.3}); reduce sigma",
            x[0], x[1]
        )));
    }
    Ok((0..=kl.n_terms()).map(|l| kl.coefficient(l, x)).collect())
}

impl DiffusionProblem {
    pub fn assemble(n_c: usize, kl: &KlExpansion) -> Result<Self> {
        check_level(n_c)?;
        let mesh = Mesh::new(n_c);
        let (dof, n) = q1_dof(mesh);
        let stiffness = stiffness_matrices(mesh, kl, 1, &dof, n)?;
        let mass = fem::mass(&mesh, 1, &dof, n);
        Ok(DiffusionProblem { mesh, stiffness, mass })
    }

    pub fn n_x(&self) -> usize {
        self.mass.nrows()
    }

    /// `K(ξ) = K_0 + Σ ξ_l K_l`.
    pub fn stiffness_at(&self, xi: &[f64]) -> SparseMatrix {
        combine(&self.stiffness, xi)
    }
}

pub(crate) fn combine(k: &[SparseMatrix], xi: &[f64]) -> SparseMatrix {
    assert_eq!(xi.len() + 1, k.len());
    let mut terms = vec![(1.0, &k[0])];
    terms.extend(xi.iter().zip(&k[1..]).map(|(&x, m)| (x, m)));
    SparseMatrix::linear_combination(&terms)
}

pub(crate) fn stiffness_matrices(
    mesh: Mesh,
    kl: &KlExpansion,
    order: usize,
    dof: &dyn Fn(usize, usize) -> Option<usize>,
    n: usize,
) -> Result<Vec<SparseMatrix>> {
    let mut failure = None;
    let mut coeffs = |x: [f64; 2]| match coefficient_values(kl, x) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            vec![0.0; kl.n_terms() + 1]
        }
    };
    let k = fem::stiffness_family(&mesh, order, kl.n_terms() + 1, &mut coeffs, dof, n);
    match failure {
        Some(e) => Err(e),
        None => Ok(k),
    }
}

/// Q1 prolongation from level `n_c - 1` to `n_c` on interior nodes.
pub fn q1_prolongation(n_c: usize) -> SparseMatrix {
    let (fd, nf) = q1_dof(Mesh::new(n_c));
    let (cd, nc) = q1_dof(Mesh::new(n_c - 1));
    fem::prolongation(n_c, 1, &fd, nf, &cd, nc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::generalized_sym_eig;
    use crate::randfield::KlTruncation;

    #[test]
    fn sizes() {
        let kl = KlExpansion::new(4.0, 0.01, KlTruncation::Fixed(2)).unwrap();
        for (n_c, n_x) in [(2, 9), (3, 49), (5, 961)] {
            let p = DiffusionProblem::assemble(n_c, &kl).unwrap();
            assert_eq!(p.n_x(), n_x);
            assert_eq!(p.stiffness.len(), 3);
        }
        assert_eq!(q1_dof(Mesh::new(6)).1, 3969);
        assert_eq!(q1_dof(Mesh::new(8)).1, 65025);
    }

    #[test]
    fn smallest_mean_eigenvalue_near_continuum() {
        let kl = KlExpansion::new(5.0, 0.01, KlTruncation::Energy(0.95)).unwrap();
        let p = DiffusionProblem::assemble(5, &kl).unwrap();
        assert!(p.stiffness[0].is_symmetric(1e-12) && p.mass.is_symmetric(1e-12));
        let (vals, _) = generalized_sym_eig(p.stiffness[0].to_dense().as_ref(), p.mass.to_dense().as_ref()).unwrap();
        let exact = std::f64::consts::PI.powi(2) / 2.0;
        assert!((vals[0] - exact).abs() / exact < 0.02);
        // the second and third are a double eigenvalue 5π²/4
        assert!((vals[1] - vals[2]).abs() < 1e-8 * vals[1]);
    }

    #[test]
    fn random_stiffness_is_positive_definite_on_the_box() {
        let kl = KlExpansion::new(4.0, 0.01, KlTruncation::Energy(0.95)).unwrap();
        let p = DiffusionProblem::assemble(3, &kl).unwrap();
        let corner = vec![3f64.sqrt(); kl.n_terms()];
        let k = p.stiffness_at(&corner);
        assert!(crate::discretize::EnvelopeCholesky::factor(&k).is_ok());
    }

    #[test]
    fn rejects_non_positive_coefficient() {
        let kl = KlExpansion::new(4.0, 2.0, KlTruncation::Fixed(3)).unwrap();
        assert!(matches!(DiffusionProblem::assemble(2, &kl), Err(Error::Config(_))));
    }
}
