use matchctl::geometry::ConfigState;
use matchctl::linear::{
    jordan_oracle, lemma1_solve, random_instance, theorem2_match, NONDEGENERACY_TOL,
};
use matchctl::matching::{control_law, matching_residuals};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn sigma_ratio(x: &DMatrix<f64>) -> f64 {
    let sv = x.clone().singular_values();
    sv.min() / sv.max()
}

fn assert_solution(r: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<(), TestCaseError> {
    prop_assert_eq!(x, &x.transpose());
    let res = (r * x - x * r.transpose()).norm();
    prop_assert!(res <= 1e-10 * (1.0 + r.norm() * x.norm()), "residual {:e}", res);
    prop_assert!(sigma_ratio(x) > NONDEGENERACY_TOL);
    Ok(())
}

fn square(max_n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(-1.0..1.0_f64, n * n)
            .prop_map(move |v| DMatrix::from_row_slice(n, n, &v))
    })
}

/// Symmetric solution-space dimension of a diagonalizable matrix:
/// `m(m+1)/2` per real eigenvalue of multiplicity `m`, 2 per simple complex pair.
fn diagonalizable_dimension(multiplicities: &[usize], complex_pairs: usize) -> usize {
    multiplicities.iter().map(|m| m * (m + 1) / 2).sum::<usize>() + 2 * complex_pairs
}

#[test]
fn nilpotent_example_exact() {
    let r = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    let sol = lemma1_solve(&r).unwrap();
    assert_eq!(sol.dimension, 3);
    assert!((&r * &sol.x - &sol.x * r.transpose()).norm() < 1e-14);
    assert!(sigma_ratio(&sol.x) > NONDEGENERACY_TOL);
    // Every solution is Hankel with a free anti-diagonal.
    let x = &sol.x;
    assert!(x[(2, 2)].abs() < 1e-14 && x[(1, 2)].abs() < 1e-14);
    assert!((x[(0, 2)] - x[(1, 1)]).abs() < 1e-14);
    let oracle = jordan_oracle(&r).unwrap().unwrap();
    assert_eq!(oracle.dimension, 3);
}

#[test]
fn repeated_eigenvalues_raise_the_dimension() {
    let q = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, -0.2, 0.1, 1.2, 0.3, -0.5, 0.2, 0.9]);
    let qinv = q.clone().try_inverse().unwrap();
    let r = &q * DMatrix::from_diagonal(&DVector::from_row_slice(&[2.0, 2.0, -1.0])) * qinv;
    let sol = lemma1_solve(&r).unwrap();
    assert_eq!(sol.dimension, diagonalizable_dimension(&[2, 1], 0));
    assert_eq!(jordan_oracle(&r).unwrap().unwrap().dimension, 4);
}

#[test]
fn rotation_block_dimension() {
    let r = DMatrix::from_row_slice(3, 3, &[0.5, -2.0, 0.0, 2.0, 0.5, 0.0, 0.0, 0.0, 3.0]);
    let sol = lemma1_solve(&r).unwrap();
    assert_eq!(sol.dimension, diagonalizable_dimension(&[1], 1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn lemma1_random(r in square(6)) {
        let sol = lemma1_solve(&r).unwrap();
        prop_assert!(sol.dimension >= r.nrows());
        assert_solution(&r, &sol.x)?;
    }

    #[test]
    fn lemma1_scaling_covariance(r in square(6), c in prop_oneof![-50.0..-0.01_f64, 0.01..50.0_f64]) {
        let sol = lemma1_solve(&r).unwrap();
        assert_solution(&(&r * c), &sol.x)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn jordan_oracle_agrees_for_small_n(r in square(3)) {
        let sol = lemma1_solve(&r).unwrap();
        if let Some(o) = jordan_oracle(&r).unwrap() {
            prop_assert_eq!(o.dimension, sol.dimension);
            assert_solution(&r, &o.x)?;
        }
    }

    #[test]
    fn theorem2_round_trip(n in 1..=5_usize, seed in any::<u64>(), states in prop::collection::vec(-1.0..1.0_f64, 200)) {
        let (sys, fb) = random_instance(n, seed).unwrap();
        let closed = theorem2_match(&sys, &fb).unwrap();
        prop_assert!(closed.matching_residual(&sys).unwrap() <= 1e-9);
        let open = sys.to_lagrangian().unwrap();
        let spec = closed.to_closed_loop_spec().unwrap();
        for k in 0..20 {
            let chunk = &states[k * 10..k * 10 + 2 * n];
            let x = ConfigState::from_slices(&chunk[..n], &chunk[n..]).unwrap();
            let u = control_law(&open, &spec, &x).unwrap();
            let want = fb.eval(&x.q, &x.qdot);
            prop_assert!((&u - &want).amax() <= 1e-9, "round trip {:e}", (&u - &want).amax());
            let r = matching_residuals(&open, &spec, &x.q, &x.qdot).unwrap();
            prop_assert!(r.max_norm() <= 1e-9);
        }
    }
}
