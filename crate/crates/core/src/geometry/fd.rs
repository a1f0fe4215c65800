use std::ops::{Add, Mul, Sub};

use nalgebra::DVector;

use crate::{Result, Scalar};

/// Relative base step used when a field has no analytic partials.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Partial derivatives `∂f/∂q^k`, `k = 0..n`, of a tensor-valued map.
///
/// Each partial is a central difference with step `h_k = step · max(1, |q_k|)`
/// followed by one Richardson extrapolation against the half step, which
/// makes the rule exact for polynomials up to degree four. If an evaluation
/// leaves the field's domain the step is shrunk tenfold once before the
/// domain error is propagated.
pub fn fd_partials<T, V, F>(f: F, q: &DVector<T>, step: T) -> Result<Vec<V>>
where
    T: Scalar,
    V: Clone + Add<Output = V> + Sub<Output = V> + Mul<T, Output = V>,
    F: Fn(&DVector<T>) -> Result<V>,
{
    if !(step > T::zero()) {
        return Err(crate::Error::InvalidArgument(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    (0..q.len())
        .map(|k| {
            let h = step * T::one().max(q[k].abs());
            match richardson(&f, q, k, h) {
                Err(e) if e.is_domain() => richardson(&f, q, k, h * T::lit(0.1)),
                other => other,
            }
        })
        .collect()
}

/// Same as [`fd_partials`] with the default step.
pub fn fd_partials_default<T, V, F>(f: F, q: &DVector<T>) -> Result<Vec<V>>
where
    T: Scalar,
    V: Clone + Add<Output = V> + Sub<Output = V> + Mul<T, Output = V>,
    F: Fn(&DVector<T>) -> Result<V>,
{
    fd_partials(f, q, T::lit(DEFAULT_FD_STEP))
}

fn central<T, V, F>(f: &F, q: &DVector<T>, k: usize, h: T) -> Result<V>
where
    T: Scalar,
    V: Clone + Add<Output = V> + Sub<Output = V> + Mul<T, Output = V>,
    F: Fn(&DVector<T>) -> Result<V>,
{
    let mut plus = q.clone();
    plus[k] += h;
    let mut minus = q.clone();
    minus[k] -= h;
    let fp = f(&plus)?;
    let fm = f(&minus)?;
    Ok((fp - fm) * (T::one() / (h + h)))
}

fn richardson<T, V, F>(f: &F, q: &DVector<T>, k: usize, h: T) -> Result<V>
where
    T: Scalar,
    V: Clone + Add<Output = V> + Sub<Output = V> + Mul<T, Output = V>,
    F: Fn(&DVector<T>) -> Result<V>,
{
    let coarse = central(f, q, k, h)?;
    let fine = central(f, q, k, h * T::lit(0.5))?;
    // (4 D(h/2) - D(h)) / 3
    Ok(fine.clone() * T::lit(4.0 / 3.0) - coarse * T::lit(1.0 / 3.0))
}
