use std::sync::{Arc, LazyLock};

use matchctl::ballbeam::BallBeamModel;
use matchctl::geometry::{
    check_projection, christoffel_first, christoffel_second, fd_partials, ConstantMetric, FnMetric,
    MetricField,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Independent oracle: central differences at `h` and `h/2` combined by Richardson.
fn oracle_partials(metric: &dyn MetricField<f64>, q: &DVector<f64>, h: f64) -> Vec<DMatrix<f64>> {
    let n = q.len();
    let central = |k: usize, step: f64| {
        let mut qp = q.clone();
        let mut qm = q.clone();
        qp[k] += step;
        qm[k] -= step;
        (metric.value(&qp).unwrap() - metric.value(&qm).unwrap()) / (2.0 * step)
    };
    (0..n)
        .map(|k| {
            let coarse = central(k, h);
            let fine = central(k, h / 2.0);
            (&fine * 4.0 - coarse) / 3.0
        })
        .collect()
}

/// `[jk, i] = ½(∂_k g_ij + ∂_j g_ki − ∂_i g_jk)` at `(j, k, i)`.
fn oracle_first(dg: &[DMatrix<f64>]) -> Vec<f64> {
    let n = dg.len();
    let mut out = vec![0.0; n * n * n];
    for j in 0..n {
        for k in 0..n {
            for i in 0..n {
                out[(j * n + k) * n + i] = 0.5 * (dg[k][(i, j)] + dg[j][(k, i)] - dg[i][(j, k)]);
            }
        }
    }
    out
}

fn polar() -> Arc<dyn MetricField<f64>> {
    Arc::new(FnMetric::new(2, |q: &DVector<f64>| {
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, q[0] * q[0]])
    }))
}

fn constant() -> Arc<dyn MetricField<f64>> {
    Arc::new(ConstantMetric::new(DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0])).unwrap())
}

static MODEL: LazyLock<BallBeamModel> = LazyLock::new(|| BallBeamModel::reference().unwrap());

fn ball_beam() -> Arc<dyn MetricField<f64>> {
    MODEL.open_loop_system().unwrap().metric
}

fn check_against_oracle(metric: &dyn MetricField<f64>, q: &DVector<f64>) {
    let n = q.len();
    let first = christoffel_first(metric, q).unwrap();
    let second = christoffel_second(metric, q).unwrap();
    let g = metric.value(q).unwrap();
    let scale = q.amax().max(1.0);
    let expected = oracle_first(&oracle_partials(metric, q, 1e-3 * scale));
    let size = expected.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(g.amax());
    for j in 0..n {
        for k in 0..n {
            assert_eq!(first[(j, k, 0)], first[(k, j, 0)]);
            for i in 0..n {
                let want = expected[(j * n + k) * n + i];
                let got = first[(j, k, i)];
                assert!((got - want).abs() <= 1e-8 * size, "[{j}{k},{i}] {got} vs {want} at {q}");
                assert_eq!(second[(i, j, k)], second[(i, k, j)]);
                let lowered: f64 = (0..n).map(|l| g[(i, l)] * second[(l, j, k)]).sum();
                assert!((lowered - got).abs() <= 1e-10 * size, "lowering [{j}{k},{i}]");
            }
        }
    }
}

#[test]
fn polar_hand_values() {
    let q = DVector::from_row_slice(&[2.0, 0.7]);
    let first = christoffel_first(polar().as_ref(), &q).unwrap();
    let second = christoffel_second(polar().as_ref(), &q).unwrap();
    assert!((first[(1, 1, 0)] + 2.0).abs() < 1e-8);
    assert!((first[(0, 1, 1)] - 2.0).abs() < 1e-8);
    assert!((first[(1, 0, 1)] - 2.0).abs() < 1e-8);
    assert!((second[(0, 1, 1)] + 2.0).abs() < 1e-8);
    assert!((second[(1, 0, 1)] - 0.5).abs() < 1e-8);
}

proptest! {
    #[test]
    fn constant_metric_symbols(q in prop::collection::vec(-5.0..5.0_f64, 3)) {
        check_against_oracle(constant().as_ref(), &DVector::from_vec(q));
    }

    #[test]
    fn polar_metric_symbols(r in 0.3..5.0_f64, phi in -3.0..3.0_f64) {
        check_against_oracle(polar().as_ref(), &DVector::from_row_slice(&[r, phi]));
    }

    #[test]
    fn ball_beam_metric_symbols(s in 2.5..40.0_f64, theta in -0.55..0.55_f64) {
        check_against_oracle(ball_beam().as_ref(), &DVector::from_row_slice(&[s, theta]));
    }

    #[test]
    fn library_fd_matches_analytic_partials(s in 2.5..40.0_f64, theta in -0.55..0.55_f64) {
        let metric = ball_beam();
        let q = DVector::from_row_slice(&[s, theta]);
        let analytic = metric.partials(&q).unwrap();
        let fd = fd_partials(|x: &DVector<f64>| metric.value(x), &q, 1e-5).unwrap();
        for (a, f) in analytic.iter().zip(&fd) {
            prop_assert!((a - f).amax() <= 1e-6 * a.amax().max(1.0));
        }
    }

    #[test]
    fn ball_beam_projection_invariants(s in 2.0..41.0_f64, theta in -0.6..0.6_f64) {
        let sys = MODEL.open_loop_system().unwrap();
        let q = DVector::from_row_slice(&[s, theta]);
        let c = check_projection(sys.metric.as_ref(), sys.projection.as_ref(), &q).unwrap();
        prop_assert!(c.idempotency <= 1e-12);
        prop_assert!(c.self_adjointness <= 1e-12);
        prop_assert_eq!(c.numerical_rank, sys.projection.rank());
        prop_assert!(matchctl::geometry::is_positive_definite(&sys.metric.value(&q).unwrap()));
    }
}
