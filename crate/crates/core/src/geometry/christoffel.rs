use nalgebra::{DMatrix, DVector};

use super::{MetricField, Tensor3};
use crate::scalar::to_f64_vec;
use crate::{Error, Result, Scalar};

/// Christoffel symbols of the first kind from the metric partials.
///
/// `result[(j, k, i)] = [jk, i] = ½(∂_k g_ij + ∂_j g_ki − ∂_i g_jk)`, where
/// `dg[k] = ∂g/∂q^k`. The (j, k) symmetry is exact.
pub fn christoffel_first_from_partials<T: Scalar>(dg: &[DMatrix<T>]) -> Tensor3<T> {
    let n = dg.len();
    let half = T::lit(0.5);
    let mut out = Tensor3::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in j..n {
                let v = half * (dg[k][(i, j)] + dg[j][(k, i)] - dg[i][(j, k)]);
                out[(j, k, i)] = v;
                out[(k, j, i)] = v;
            }
        }
    }
    out
}

/// Raises the last index: `Γ^k_ij = g^{kℓ}[ij, ℓ]`, stored as `result[(k, i, j)]`.
pub fn raise_christoffel<T: Scalar>(ginv: &DMatrix<T>, first: &Tensor3<T>) -> Tensor3<T> {
    let n = first.dim();
    let mut out = Tensor3::zeros(n);
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut acc = T::zero();
                for l in 0..n {
                    acc += ginv[(k, l)] * first[(i, j, l)];
                }
                out[(k, i, j)] = acc;
                out[(k, j, i)] = acc;
            }
        }
    }
    out
}

pub fn christoffel_first<T: Scalar>(
    metric: &dyn MetricField<T>,
    q: &DVector<T>,
) -> Result<Tensor3<T>> {
    Ok(christoffel_first_from_partials(&metric.partials(q)?))
}

pub fn christoffel_second<T: Scalar>(
    metric: &dyn MetricField<T>,
    q: &DVector<T>,
) -> Result<Tensor3<T>> {
    let ginv = invert(metric.value(q)?, "metric", q)?;
    Ok(raise_christoffel(&ginv, &christoffel_first(metric, q)?))
}

/// Quadratic velocity term `[jk, r] q̇^j q̇^k` as a covector.
pub fn contract_velocities<T: Scalar>(first: &Tensor3<T>, qdot: &DVector<T>) -> DVector<T> {
    let n = first.dim();
    DVector::from_fn(n, |r, _| {
        let mut acc = T::zero();
        for j in 0..n {
            for k in 0..n {
                acc += first[(j, k, r)] * qdot[j] * qdot[k];
            }
        }
        acc
    })
}

pub(crate) fn invert<T: Scalar>(
    m: DMatrix<T>,
    what: &'static str,
    q: &DVector<T>,
) -> Result<DMatrix<T>> {
    m.try_inverse().ok_or_else(|| Error::Singular {
        what,
        q: to_f64_vec(q.iter().copied()),
    })
}
