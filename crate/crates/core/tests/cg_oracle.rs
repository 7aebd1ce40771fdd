use n2i_core::cg::cg_solve;
use n2i_core::rng::rng_from;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_from(seed);
    let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &b * b.transpose() + DMatrix::identity(n, n) * (n as f64 * 0.1)
}

fn apply(a: &DMatrix<f64>) -> impl FnMut(&[f64]) -> n2i_core::Result<Vec<f64>> + '_ {
    move |v| Ok((a * DVector::from_column_slice(v)).as_slice().to_vec())
}

#[test]
fn dense_spd_matches_cholesky() {
    for seed in 0..20 {
        let a = random_spd(32, seed);
        let b: Vec<f64> = (0..32).map(|i| ((i * 7 + seed as usize) % 11) as f64 - 5.0).collect();
        let direct = a.clone().cholesky().unwrap().solve(&DVector::from_column_slice(&b));
        let out = cg_solve(apply(&a), &b, None, 1e-12, 500).unwrap();
        assert!(out.converged);
        let err = (DVector::from_column_slice(&out.x) - &direct).norm() / direct.norm();
        assert!(err < 1e-8, "seed {seed}: relative error {err}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // CG minimizes the A-norm of the error over growing Krylov spaces, so
    // that norm cannot increase from one iterate to the next.
    #[test]
    fn energy_norm_of_error_is_non_increasing(seed in any::<u64>(), n in 4usize..24) {
        let a = random_spd(n, seed);
        let mut rng = rng_from(seed ^ 1);
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let exact = a.clone().cholesky().unwrap().solve(&DVector::from_column_slice(&b));
        let energy = |x: &[f64]| {
            let e = DVector::from_column_slice(x) - &exact;
            e.dot(&(&a * &e)).sqrt()
        };
        let mut prev = energy(&vec![0.0; n]);
        for k in 1..=n {
            let out = cg_solve(apply(&a), &b, None, 1e-14, k).unwrap();
            let cur = energy(&out.x);
            prop_assert!(cur <= prev * (1.0 + 1e-9) + 1e-12, "iteration {k}: {cur} > {prev}");
            prev = cur;
            if out.converged {
                break;
            }
        }
    }

    #[test]
    fn residual_history_matches_reported_residual(seed in any::<u64>()) {
        let a = random_spd(10, seed);
        let b = vec![1.0; 10];
        let out = cg_solve(apply(&a), &b, None, 1e-10, 100).unwrap();
        let b_norm = 10f64.sqrt();
        prop_assert!((out.residual_history[0] - b_norm).abs() < 1e-12);
        prop_assert!((out.residual_history.last().unwrap() / b_norm - out.relative_residual).abs() < 1e-15);
        prop_assert_eq!(out.residual_history.len(), out.iterations + 1);
    }
}
