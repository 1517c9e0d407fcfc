//! ADMM solver for the constrained dictionary subproblem
//! min_D ||X - D C||_F^2 subject to every column of D in the unit ball.
//!
//! Splitting: f(D) = ||X - D C||_F^2, g(R) = indicator of the column-wise
//! unit ball, constraint D = R, scaled dual U. The returned iterate is R,
//! so feasibility is exact.

use crate::error::Result;
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct AdmmResult<S: Scalar> {
    /// Feasible dictionary (the R iterate).
    pub dictionary: DenseMatrix<S>,
    pub iters: usize,
    pub primal_res: S,
    pub dual_res: S,
    pub converged: bool,
}

/// Column-wise projection onto the unit ball: r_i <- r_i / max(1, ||r_i||).
pub fn project_unit_ball<S: Scalar>(m: &DenseMatrix<S>) -> DenseMatrix<S> {
    let mut out = m.clone();
    for c in 0..m.cols() {
        let norm = m.col_norm_sq(c).sqrt();
        if norm > S::one() {
            for r in 0..m.rows() {
                out.set(r, c, out.get(r, c) / norm);
            }
        }
    }
    out
}

/// `rho <= 0` selects the penalty automatically: the mean diagonal of
/// C C^T, which keeps the dual updates on the scale of the data term.
pub fn solve_dictionary<S: Scalar>(
    x: &DenseMatrix<S>,
    c: &DenseMatrix<S>,
    d_init: &DenseMatrix<S>,
    rho: S,
    tol: S,
    max_iters: usize,
) -> Result<AdmmResult<S>> {
    // Constant pieces of the D-step normal equations:
    // D (C C^T + rho I) = X C^T + rho (R - U).
    let xct = x.matmul_t(c)?;
    let mut gram = c.matmul_t(c)?;
    let rho = if rho > S::zero() {
        rho
    } else {
        gram.mean_abs_diag().max(S::from_f64(1e-12))
    };
    gram.add_ridge(rho);

    let mut r = project_unit_ball(d_init);
    let mut u = DenseMatrix::zeros(d_init.rows(), d_init.cols());

    let mut primal = S::infinity();
    let mut dual = S::infinity();
    for iter in 1..=max_iters {
        let rhs = xct.add(&r.sub(&u)?.scale(rho))?;
        let d = gram.solve_spd_right(&rhs, "admm dictionary step")?;

        let r_prev = r;
        r = project_unit_ball(&d.add(&u)?);
        u = u.add(&d.sub(&r)?)?;

        primal = d.sub(&r)?.frob_norm();
        dual = r.sub(&r_prev)?.frob_norm() * rho;
        if primal.max(dual) < tol {
            return Ok(AdmmResult {
                dictionary: r,
                iters: iter,
                primal_res: primal,
                dual_res: dual,
                converged: true,
            });
        }
    }
    Ok(AdmmResult {
        dictionary: r,
        iters: max_iters,
        primal_res: primal,
        dual_res: dual,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    type M = DenseMatrix<f64>;

    #[test]
    fn projection_examples() {
        let m = M::new(2, 1, vec![3.0, 4.0]).unwrap();
        let p = project_unit_ball(&m);
        assert!((p.get(0, 0) - 0.6).abs() < 1e-15);
        assert!((p.get(1, 0) - 0.8).abs() < 1e-15);

        let inside = M::new(2, 1, vec![0.3, 0.4]).unwrap();
        assert_eq!(project_unit_ball(&inside), inside);

        let zero = M::zeros(2, 1);
        assert_eq!(project_unit_ball(&zero), zero);
    }

    #[test]
    fn projection_is_idempotent() {
        let m = M::from_fn(4, 5, |r, c| (r as f64 - 1.5) * (c as f64 + 0.7));
        let once = project_unit_ball(&m);
        let twice = project_unit_ball(&once);
        assert!(once.max_abs_diff(&twice) < 1e-15);
    }

    #[test]
    fn identity_codes_feasible_target() {
        // C = I and X already column-feasible: optimum is D = X.
        let x = M::new(2, 2, vec![0.5, 0.1, 0.2, 0.6]).unwrap();
        let c = M::identity(2);
        let res = solve_dictionary(&x, &c, &M::zeros(2, 2), 1.0, 1e-9, 500).unwrap();
        assert!(res.converged);
        assert!(res.dictionary.max_abs_diff(&x) < 1e-6);
    }

    #[test]
    fn identity_codes_infeasible_target_projects() {
        // X = 2 I: each column shrinks onto the unit sphere.
        let x = M::identity(3).scale(2.0);
        let c = M::identity(3);
        let res = solve_dictionary(&x, &c, &M::zeros(3, 3), 1.0, 1e-9, 1000).unwrap();
        assert!(res.converged);
        assert!(res.dictionary.max_abs_diff(&M::identity(3)) < 1e-6);
    }

    #[test]
    fn returned_iterate_is_feasible() {
        let x = M::from_fn(4, 6, |r, c| ((r * 5 + c * 3) % 7) as f64 - 2.0);
        let c = M::from_fn(3, 6, |r, c| ((r + c * 2) % 5) as f64 * 0.5 - 1.0);
        let res = solve_dictionary(&x, &c, &M::zeros(4, 3), 1.0, 1e-8, 200).unwrap();
        for j in 0..3 {
            assert!(res.dictionary.col_norm_sq(j) <= 1.0 + 1e-8);
        }
    }

    #[test]
    fn d_step_satisfies_normal_equations() {
        // One hand-rolled ADMM iteration, checking
        // D (C C^T + rho I) = X C^T + rho (R - U) at the solve.
        let x = M::from_fn(3, 5, |r, c| (r as f64 + 1.0) * 0.4 - c as f64 * 0.2);
        let c = M::from_fn(2, 5, |r, c| (c as f64 - r as f64) * 0.3);
        let rho = 1.0;
        let r = project_unit_ball(&M::from_fn(3, 2, |r, c| (r + c) as f64 * 0.4));
        let u = M::zeros(3, 2);

        let xct = x.matmul_t(&c).unwrap();
        let mut gram = c.matmul_t(&c).unwrap();
        gram.add_ridge(rho);
        let rhs = xct.add(&r.sub(&u).unwrap().scale(rho)).unwrap();
        let d = gram.solve_spd_right(&rhs, "test").unwrap();

        let lhs = d.matmul(&gram).unwrap();
        let rel = lhs.max_abs_diff(&rhs) / rhs.max_abs().max(1.0);
        assert!(rel < 1e-10, "normal equation residual {rel}");
    }
}
