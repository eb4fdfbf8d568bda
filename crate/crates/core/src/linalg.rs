//! Small helpers over nalgebra for Hermitian positive-definite systems.

use nalgebra::{Cholesky, Dyn};

use crate::{CMat, Error, Result, C64};

/// Condition-number ceiling for any Hermitian solve in the crate.
pub const MAX_CONDITION: f64 = 1e12;

/// Cholesky factor of a Hermitian positive-definite matrix, with a
/// condition guard estimated from the factor's diagonal.
pub struct HpdFactor {
    chol: Cholesky<C64, Dyn>,
}

impl HpdFactor {
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!(
                "expected square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let chol = Cholesky::new(m)
            .ok_or_else(|| Error::Numerical("matrix is not positive definite".into()))?;
        // diag(L)^2 brackets the eigenvalue range; cheap lower bound on cond.
        let l = chol.l_dirty();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..l.nrows() {
            let d = l[(i, i)].re * l[(i, i)].re;
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let condition = hi / lo;
        if !(condition <= MAX_CONDITION) {
            return Err(Error::IllConditioned {
                condition,
                limit: MAX_CONDITION,
            });
        }
        Ok(Self { chol })
    }

    pub fn solve(&self, rhs: &CMat) -> CMat {
        self.chol.solve(rhs)
    }

    pub fn inverse(&self) -> CMat {
        self.chol.inverse()
    }
}

/// `A^H B` without forming the adjoint twice.
pub fn adjoint_mul(a: &CMat, b: &CMat) -> CMat {
    a.adjoint() * b
}

/// Squared Frobenius norm.
pub fn fro2(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Real eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let eig = m.clone().symmetric_eigen();
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Hermitian eigendecomposition with eigenpairs sorted by ascending eigenvalue.
pub fn hermitian_eigen_sorted(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_normal_matrix, stream, Domain};

    #[test]
    fn hpd_solve_matches_inverse() {
        let mut rng = stream(3, Domain::Oracle, 0);
        let x = complex_normal_matrix(&mut rng, 6, 6, 1.0);
        let a = &x * x.adjoint() + CMat::identity(6, 6);
        let f = HpdFactor::new(a.clone()).unwrap();
        let b = complex_normal_matrix(&mut rng, 6, 2, 1.0);
        let sol = f.solve(&b);
        assert!((&a * &sol - &b).norm() < 1e-10);
    }

    #[test]
    fn condition_guard_trips() {
        let mut a = CMat::identity(3, 3);
        a[(2, 2)] = C64::new(1e-14, 0.0);
        assert!(matches!(
            HpdFactor::new(a),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn sorted_eigen_reconstructs() {
        let mut rng = stream(4, Domain::Oracle, 0);
        let x = complex_normal_matrix(&mut rng, 5, 5, 1.0);
        let a = &x * x.adjoint();
        let (vals, vecs) = hermitian_eigen_sorted(&a);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            5,
            vals.iter().map(|&v| C64::new(v, 0.0)),
        ));
        assert!((&vecs * d * vecs.adjoint() - a).norm() < 1e-9);
    }
}
