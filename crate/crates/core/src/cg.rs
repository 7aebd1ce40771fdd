//! Conjugate gradient for symmetric positive-definite operators.

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

#[derive(Clone, Debug)]
pub struct CgOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// Final `‖Ax − b‖ / ‖b‖` (zero when `b = 0`).
    pub relative_residual: T,
    pub converged: bool,
    /// Residual norm `‖b − A x_k‖` after every iteration, starting with `x_0`.
    pub residual_history: Vec<T>,
}

/// Solves `A x = b` for an SPD operator `apply_a`, starting from `x0` (or
/// zero) and stopping when `‖Ax − b‖ ≤ tol ‖b‖` or after `max_iter` steps.
pub fn cg_solve<T: Scalar>(
    mut apply_a: impl FnMut(&[T]) -> Result<Vec<T>>,
    b: &[T],
    x0: Option<&[T]>,
    tol: T,
    max_iter: usize,
) -> Result<CgOutcome<T>> {
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    if !b_norm.is_finite() {
        return Err(Error::Numeric("non-finite right-hand side".into()));
    }
    if b_norm == T::zero() {
        return Ok(CgOutcome {
            x: vec![T::zero(); n],
            iterations: 0,
            relative_residual: T::zero(),
            converged: true,
            residual_history: vec![T::zero()],
        });
    }
    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.to_vec(),
        Some(_) => return Err(Error::Dimension("initial guess length".into())),
        None => vec![T::zero(); n],
    };
    let mut r: Vec<T> = if x0.is_some() {
        let ax = apply_a(&x)?;
        b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect()
    } else {
        b.to_vec()
    };
    let mut p = r.clone();
    let mut rs = dot(&r, &r);
    let mut history = vec![rs.sqrt()];
    let target = tol * b_norm;
    let mut iterations = 0;
    while iterations < max_iter && rs.sqrt() > target {
        let ap = apply_a(&p)?;
        if ap.len() != n {
            return Err(Error::Dimension("operator changed the vector length".into()));
        }
        let pap = dot(&p, &ap);
        if !pap.is_finite() {
            return Err(Error::Numeric("non-finite curvature in CG".into()));
        }
        if pap <= T::zero() {
            return Err(Error::Numeric("operator is not positive definite".into()));
        }
        let alpha = rs / pap;
        x.iter_mut().zip(&p).for_each(|(xi, &pi)| *xi += alpha * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, &ai)| *ri -= alpha * ai);
        let rs_new = dot(&r, &r);
        if !rs_new.is_finite() {
            return Err(Error::Numeric("non-finite residual in CG".into()));
        }
        iterations += 1;
        history.push(rs_new.sqrt());
        let beta = rs_new / rs;
        p.iter_mut().zip(&r).for_each(|(pi, &ri)| *pi = ri + beta * *pi);
        rs = rs_new;
    }
    let relative_residual = rs.sqrt() / b_norm;
    Ok(CgOutcome { x, iterations, relative_residual, converged: rs.sqrt() <= target, residual_history: history })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_converges_in_one_step() {
        let b = vec![1.0, -2.0, 3.5];
        let out = cg_solve(|v: &[f64]| Ok(v.to_vec()), &b, None, 1e-12, 10).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.x, b);
        assert!(out.converged);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let out = cg_solve(|v: &[f64]| Ok(v.iter().map(|x| 2.0 * x).collect()), &[0.0; 4], None, 1e-8, 10).unwrap();
        assert_eq!(out.x, vec![0.0; 4]);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn reports_non_finite_values() {
        let err = cg_solve(|v: &[f64]| Ok(v.iter().map(|_| f64::NAN).collect()), &[1.0, 1.0], None, 1e-8, 10);
        assert!(matches!(err, Err(Error::Numeric(_))));
        assert!(matches!(
            cg_solve(|v: &[f64]| Ok(v.to_vec()), &[f64::INFINITY], None, 1e-8, 10),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn stops_at_max_iter() {
        // diag(1..=20) needs 20 iterations for an exact solve
        let a = |v: &[f64]| Ok(v.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x).collect());
        let out = cg_solve(a, &[1.0; 20], None, 1e-14, 3).unwrap();
        assert_eq!(out.iterations, 3);
        assert!(!out.converged);
        assert_eq!(out.residual_history.len(), 4);
    }

    #[test]
    fn warm_start_at_solution() {
        let a = |v: &[f64]| Ok(v.iter().map(|x| 4.0 * x).collect());
        let out = cg_solve(a, &[4.0, 8.0], Some(&[1.0, 2.0]), 1e-10, 5).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.x, vec![1.0, 2.0]);
    }
}
