//! Matching conditions, the λ-equations, and the matching control law.
//!
//! Index conventions: `P[(i, j)] = P^i_j`, `λ = g ĝ⁻¹` so that
//! `λ[(r, ℓ)] = λ^ℓ_r`, and Christoffel tensors as in [`crate::geometry`].
//! Residual blocks are reported in the ambient index space, already
//! contracted with `P`, so no basis of the unactuated subspace is needed.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::geometry::{
    christoffel_first_from_partials, contract_velocities, fd_partials_default, invert,
    raise_christoffel, ConfigState, DissipationField, LagrangianSystem, MetricField, ScalarField,
    Tensor3,
};
use crate::scalar::to_f64_vec;
use crate::{Error, Result, Scalar};

/// Target closed-loop data `(ĝ, V̂, Ĉ)`.
#[derive(Clone)]
pub struct ClosedLoopSpec<T: Scalar> {
    pub metric: Arc<dyn MetricField<T>>,
    pub potential: Arc<dyn ScalarField<T>>,
    pub dissipation: Arc<dyn DissipationField<T>>,
}

impl<T: Scalar> ClosedLoopSpec<T> {
    pub fn new(
        metric: Arc<dyn MetricField<T>>,
        potential: Arc<dyn ScalarField<T>>,
        dissipation: Arc<dyn DissipationField<T>>,
    ) -> Result<Self> {
        let n = metric.dim();
        for (context, got) in [
            ("closed-loop potential", potential.dim()),
            ("closed-loop dissipation", dissipation.dim()),
        ] {
            if got != n {
                return Err(Error::Dimension {
                    context,
                    expected: n,
                    got,
                });
            }
        }
        Ok(Self {
            metric,
            potential,
            dissipation,
        })
    }

    /// The trivial choice `ĝ = g, V̂ = V, Ĉ = C`.
    pub fn from_open(open: &LagrangianSystem<T>) -> Self {
        Self {
            metric: open.metric.clone(),
            potential: open.potential.clone(),
            dissipation: open.dissipation.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }
}

impl<T: Scalar> std::fmt::Debug for ClosedLoopSpec<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClosedLoopSpec").field("dim", &self.dim()).finish()
    }
}

/// Residuals of the three matching conditions at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingResidual<T: Scalar> {
    /// `P^r_k (Γ^k_ij − Γ̂^k_ij)` stored at `(r, i, j)`.
    pub geodesic: Tensor3<T>,
    /// `P (g⁻¹ C − ĝ⁻¹ Ĉ)`.
    pub dissipative: DVector<T>,
    /// `P (g⁻¹ ∇V − ĝ⁻¹ ∇V̂)`.
    pub potential: DVector<T>,
    pub geodesic_norm: T,
    pub dissipative_norm: T,
    pub potential_norm: T,
}

impl<T: Scalar> MatchingResidual<T> {
    pub fn max_norm(&self) -> T {
        self.geodesic_norm
            .max(self.dissipative_norm)
            .max(self.potential_norm)
    }
}

/// Serializable summary of a residual evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub geodesic_norm: f64,
    pub dissipative_norm: f64,
    pub potential_norm: f64,
}

impl ResidualRecord {
    pub fn new<T: Scalar>(state: &ConfigState<T>, r: &MatchingResidual<T>) -> Self {
        Self {
            q: to_f64_vec(state.q.iter().copied()),
            qdot: to_f64_vec(state.qdot.iter().copied()),
            geodesic_norm: r.geodesic_norm.to_f64_lossy(),
            dissipative_norm: r.dissipative_norm.to_f64_lossy(),
            potential_norm: r.potential_norm.to_f64_lossy(),
        }
    }
}

fn max_abs<T: Scalar>(v: &DVector<T>) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

fn check_dims<T: Scalar>(
    open: &LagrangianSystem<T>,
    closed: &ClosedLoopSpec<T>,
    q: &DVector<T>,
) -> Result<()> {
    let n = open.dim();
    if closed.dim() != n {
        return Err(Error::Dimension {
            context: "closed-loop spec",
            expected: n,
            got: closed.dim(),
        });
    }
    if q.len() != n {
        return Err(Error::Dimension {
            context: "configuration",
            expected: n,
            got: q.len(),
        });
    }
    open.domain.check(q)
}

fn invert_hat<T: Scalar>(g_hat: DMatrix<T>, q: &DVector<T>) -> Result<DMatrix<T>> {
    invert(g_hat, "closed-loop metric", q)
}

/// Evaluates the three blocks of the matching conditions at `(q, q̇)`.
pub fn matching_residuals<T: Scalar>(
    open: &LagrangianSystem<T>,
    closed: &ClosedLoopSpec<T>,
    q: &DVector<T>,
    qdot: &DVector<T>,
) -> Result<MatchingResidual<T>> {
    check_dims(open, closed, q)?;
    let n = open.dim();
    let ginv = invert(open.metric.value(q)?, "metric", q)?;
    let ghat_inv = invert_hat(closed.metric.value(q)?, q)?;
    let p = open.projection.value(q)?;

    let gamma = raise_christoffel(
        &ginv,
        &christoffel_first_from_partials(&open.metric.partials(q)?),
    );
    let gamma_hat = raise_christoffel(
        &ghat_inv,
        &christoffel_first_from_partials(&closed.metric.partials(q)?),
    );
    let diff = gamma.sub(&gamma_hat);
    let geodesic = Tensor3::from_fn(n, |r, i, j| {
        (0..n).fold(T::zero(), |acc, k| acc + p[(r, k)] * diff[(k, i, j)])
    });

    let c = open.dissipation.value(q, qdot)?;
    let c_hat = closed.dissipation.value(q, qdot)?;
    let dissipative = &p * (&ginv * c - &ghat_inv * c_hat);

    let dv = open.potential.gradient(q)?;
    let dv_hat = closed.potential.gradient(q)?;
    let potential = &p * (&ginv * dv - &ghat_inv * dv_hat);

    Ok(MatchingResidual {
        geodesic_norm: geodesic.max_abs(),
        dissipative_norm: max_abs(&dissipative),
        potential_norm: max_abs(&potential),
        geodesic,
        dissipative,
        potential,
    })
}

/// `λ = g ĝ⁻¹`, i.e. `λ[(r, ℓ)] = λ^ℓ_r = g_rj ĝ^{jℓ}`.
pub fn lambda_tensor<T: Scalar>(
    open: &LagrangianSystem<T>,
    closed: &ClosedLoopSpec<T>,
    q: &DVector<T>,
) -> Result<DMatrix<T>> {
    check_dims(open, closed, q)?;
    let g = open.metric.value(q)?;
    let ghat_inv = invert_hat(closed.metric.value(q)?, q)?;
    Ok(g * ghat_inv)
}

/// Residuals of the first-order λ-system.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaPdeResidual<T: Scalar> {
    /// Equation for `λ` alone, stored at `(k, t, j)`.
    pub lambda_eq: Tensor3<T>,
    /// Transport equation for `ĝ` along `λP`, stored at `(t, n, m)`.
    pub metric_eq: Tensor3<T>,
    pub lambda_norm: T,
    pub metric_norm: T,
}

/// Residuals of the intermediate identities of the λ-derivation.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivationResidual<T: Scalar> {
    /// Geodesic condition lowered with `g`, stored at `(t, i, j)`.
    pub lowered: Tensor3<T>,
    /// λ-form before symmetrization, stored at `(k, t, j)`.
    pub unsymmetrized: Tensor3<T>,
}

struct LambdaData<T: Scalar> {
    n: usize,
    g: DMatrix<T>,
    g_hat: DMatrix<T>,
    lam: DMatrix<T>,
    p: DMatrix<T>,
    dg: Vec<DMatrix<T>>,
    dg_hat: Vec<DMatrix<T>>,
    dlam: Vec<DMatrix<T>>,
    dp: Vec<DMatrix<T>>,
    first: Tensor3<T>,
}

impl<T: Scalar> LambdaData<T> {
    fn gather(
        open: &LagrangianSystem<T>,
        closed: &ClosedLoopSpec<T>,
        q: &DVector<T>,
    ) -> Result<Self> {
        check_dims(open, closed, q)?;
        let g = open.metric.value(q)?;
        let g_hat = closed.metric.value(q)?;
        let lam = &g * invert_hat(g_hat.clone(), q)?;
        let dg = open.metric.partials(q)?;
        let dg_hat = closed.metric.partials(q)?;
        let dlam = fd_partials_default(
            |x| {
                let gx = open.metric.value(x)?;
                Ok(gx * invert_hat(closed.metric.value(x)?, x)?)
            },
            q,
        )?;
        let dp = open.projection.partials(q)?;
        let first = christoffel_first_from_partials(&dg);
        Ok(Self {
            n: open.dim(),
            p: open.projection.value(q)?,
            g,
            g_hat,
            lam,
            dg,
            dg_hat,
            dlam,
            dp,
            first,
        })
    }

    /// Contracts `e[(s, r, j)]` to `P^s_k P^r_t e[(s, r, j)]` at `(k, t, j)`.
    fn project_pair(&self, e: &Tensor3<T>) -> Tensor3<T> {
        let n = self.n;
        let p = &self.p;
        Tensor3::from_fn(n, |k, t, j| {
            let mut acc = T::zero();
            for s in 0..n {
                for r in 0..n {
                    acc += p[(s, k)] * p[(r, t)] * e[(s, r, j)];
                }
            }
            acc
        })
    }

    /// `W^ℓ_t = λ^ℓ_r P^r_t` and its partials.
    fn lambda_p(&self) -> (DMatrix<T>, Vec<DMatrix<T>>) {
        let w = self.lam.transpose() * &self.p;
        let dw = (0..self.n)
            .map(|m| self.dlam[m].transpose() * &self.p + self.lam.transpose() * &self.dp[m])
            .collect();
        (w, dw)
    }
}

/// Evaluates both λ-equations at `q`; partials of `λ` come from finite differences.
pub fn lambda_pde_residuals<T: Scalar>(
    open: &LagrangianSystem<T>,
    closed: &ClosedLoopSpec<T>,
    q: &DVector<T>,
) -> Result<LambdaPdeResidual<T>> {
    let d = LambdaData::gather(open, closed, q)?;
    let n = d.n;
    let (g, lam, first) = (&d.g, &d.lam, &d.first);

    // A[s][r][j] = g_ℓs ∂_j λ^ℓ_r + ([ℓj,s] − [sj,ℓ]) λ^ℓ_r; the λ-equation is
    // the P-projection of A + Aᵀ in (s, r).
    let a = Tensor3::from_fn(n, |s, r, j| {
        let mut acc = T::zero();
        for l in 0..n {
            acc += g[(l, s)] * d.dlam[j][(r, l)]
                + (first[(l, j, s)] - first[(s, j, l)]) * lam[(r, l)];
        }
        acc
    });
    let sym = Tensor3::from_fn(n, |s, r, j| a[(s, r, j)] + a[(r, s, j)]);
    let lambda_eq = d.project_pair(&sym);

    let (w, dw) = d.lambda_p();
    let metric_eq = Tensor3::from_fn(n, |t, a_, b| {
        let mut lhs = T::zero();
        let mut rhs = T::zero();
        for l in 0..n {
            lhs += w[(l, t)] * d.dg_hat[l][(a_, b)]
                + d.g_hat[(l, a_)] * dw[b][(l, t)]
                + d.g_hat[(l, b)] * dw[a_][(l, t)];
            rhs += d.p[(l, t)] * d.dg[l][(a_, b)]
                + g[(l, a_)] * d.dp[b][(l, t)]
                + g[(l, b)] * d.dp[a_][(l, t)];
        }
        lhs - rhs
    });

    Ok(LambdaPdeResidual {
        lambda_norm: lambda_eq.max_abs(),
        metric_norm: metric_eq.max_abs(),
        lambda_eq,
        metric_eq,
    })
}

/// Evaluates the two intermediate identities of the λ-derivation.
pub fn derivation_residuals<T: Scalar>(
    open: &LagrangianSystem<T>,
    closed: &ClosedLoopSpec<T>,
    q: &DVector<T>,
) -> Result<DerivationResidual<T>> {
    let d = LambdaData::gather(open, closed, q)?;
    let n = d.n;
    let (w, _) = d.lambda_p();

    let lowered = Tensor3::from_fn(n, |t, i, j| {
        let mut lhs = T::zero();
        let mut rhs = T::zero();
        for l in 0..n {
            lhs += w[(l, t)] * (d.dg_hat[l][(i, j)] - d.dg_hat[j][(l, i)] - d.dg_hat[i][(j, l)]);
        }
        for r in 0..n {
            rhs += d.p[(r, t)] * (d.dg[r][(i, j)] - d.dg[j][(r, i)] - d.dg[i][(j, r)]);
        }
        lhs - rhs
    });

    let (g, gh, lam, dlam, dg) = (&d.g, &d.g_hat, &d.lam, &d.dlam, &d.dg);
    let e = Tensor3::from_fn(n, |s, r, j| {
        let mut acc = T::zero();
        for l in 0..n {
            acc += g[(l, s)] * dlam[j][(r, l)] + lam[(r, l)] * dg[l][(j, s)];
        }
        for i in 0..n {
            acc -= lam[(s, i)] * dg[r][(i, j)];
        }
        for i in 0..n {
            for l in 0..n {
                acc -= gh[(i, j)] * lam[(r, l)] * dlam[l][(s, i)];
                acc += lam[(s, i)] * gh[(l, j)] * dlam[i][(r, l)];
            }
        }
        acc
    });
    let unsymmetrized = d.project_pair(&e);
    Ok(DerivationResidual {
        lowered,
        unsymmetrized,
    })
}

/// The matching control law
/// `u = [ij,·] q̇q̇ − λ [ij,·]^ q̇q̇ + C − λ Ĉ + ∇V − λ ∇V̂`, `λ = g ĝ⁻¹`.
///
/// The dissipative term is lowered with `g ĝ⁻¹` like the other two; this is
/// the form for which `P g⁻¹ u = 0` follows from the matching conditions.
pub fn control_law<T: Scalar>(
    open: &LagrangianSystem<T>,
    closed: &ClosedLoopSpec<T>,
    state: &ConfigState<T>,
) -> Result<DVector<T>> {
    let q = &state.q;
    let qdot = &state.qdot;
    check_dims(open, closed, q)?;
    let lam = lambda_tensor_unchecked(open, closed, q)?;

    let quad = contract_velocities(&christoffel_first_from_partials(&open.metric.partials(q)?), qdot);
    let quad_hat = contract_velocities(
        &christoffel_first_from_partials(&closed.metric.partials(q)?),
        qdot,
    );
    let c = open.dissipation.value(q, qdot)?;
    let c_hat = closed.dissipation.value(q, qdot)?;
    let dv = open.potential.gradient(q)?;
    let dv_hat = closed.potential.gradient(q)?;

    Ok(quad + c + dv - lam * (quad_hat + c_hat + dv_hat))
}

fn lambda_tensor_unchecked<T: Scalar>(
    open: &LagrangianSystem<T>,
    closed: &ClosedLoopSpec<T>,
    q: &DVector<T>,
) -> Result<DMatrix<T>> {
    let g = open.metric.value(q)?;
    Ok(g * invert_hat(closed.metric.value(q)?, q)?)
}

/// `P g⁻¹ u`, zero for admissible actuation.
pub fn actuation_violation<T: Scalar>(
    open: &LagrangianSystem<T>,
    q: &DVector<T>,
    u: &DVector<T>,
) -> Result<DVector<T>> {
    let ginv = invert(open.metric.value(q)?, "metric", q)?;
    Ok(open.projection.value(q)? * ginv * u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedLoopEnergy<T> {
    /// `Ĥ = ½ ĝ_ij q̇^i q̇^j + V̂`.
    pub h_hat: T,
    /// `−Ĉ_j q̇^j`, the rate of `Ĥ` along matched trajectories.
    pub h_hat_rate: T,
}

pub fn closed_loop_energy<T: Scalar>(
    closed: &ClosedLoopSpec<T>,
    state: &ConfigState<T>,
) -> Result<ClosedLoopEnergy<T>> {
    let (q, qdot) = (&state.q, &state.qdot);
    let g_hat = closed.metric.value(q)?;
    let kinetic = qdot.dot(&(g_hat * qdot)) * T::lit(0.5);
    let c_hat = closed.dissipation.value(q, qdot)?;
    Ok(ClosedLoopEnergy {
        h_hat: kinetic + closed.potential.value(q)?,
        h_hat_rate: -c_hat.dot(qdot),
    })
}

/// One grid point of a residual sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    #[serde(flatten)]
    pub residual: ResidualRecord,
    pub lambda_norm: f64,
    pub metric_norm: f64,
}

/// A point where evaluation failed; the sweep continues past it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub q: Vec<f64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub max_geodesic: f64,
    pub max_dissipative: f64,
    pub max_potential: f64,
    pub max_lambda: f64,
    pub max_metric: f64,
    pub points: Vec<SweepPoint>,
    pub failures: Vec<SweepFailure>,
}

impl SweepReport {
    pub fn max_matching(&self) -> f64 {
        self.max_geodesic.max(self.max_dissipative).max(self.max_potential)
    }

    pub fn max_pde(&self) -> f64 {
        self.max_lambda.max(self.max_metric)
    }
}

/// Matching and λ-equation residuals at every state.
pub fn sweep_residuals(
    open: &LagrangianSystem<f64>,
    closed: &ClosedLoopSpec<f64>,
    states: &[ConfigState<f64>],
) -> SweepReport {
    let mut report = SweepReport {
        max_geodesic: 0.0,
        max_dissipative: 0.0,
        max_potential: 0.0,
        max_lambda: 0.0,
        max_metric: 0.0,
        points: Vec::with_capacity(states.len()),
        failures: Vec::new(),
    };
    for state in states {
        let eval = || -> Result<SweepPoint> {
            let r = matching_residuals(open, closed, &state.q, &state.qdot)?;
            let pde = lambda_pde_residuals(open, closed, &state.q)?;
            let norms = [r.max_norm(), pde.lambda_norm, pde.metric_norm];
            if norms.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument("non-finite residual".into()));
            }
            Ok(SweepPoint {
                residual: ResidualRecord::new(state, &r),
                lambda_norm: pde.lambda_norm,
                metric_norm: pde.metric_norm,
            })
        };
        match eval() {
            Ok(p) => {
                report.max_geodesic = report.max_geodesic.max(p.residual.geodesic_norm);
                report.max_dissipative = report.max_dissipative.max(p.residual.dissipative_norm);
                report.max_potential = report.max_potential.max(p.residual.potential_norm);
                report.max_lambda = report.max_lambda.max(p.lambda_norm);
                report.max_metric = report.max_metric.max(p.metric_norm);
                report.points.push(p);
            }
            Err(e) => report.failures.push(SweepFailure {
                q: state.q.iter().copied().collect(),
                message: e.to_string(),
            }),
        }
    }
    report
}
