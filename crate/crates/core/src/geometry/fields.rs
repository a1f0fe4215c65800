use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::fd::fd_partials_default;
use crate::scalar::to_f64_vec;
use crate::{Error, Result, Scalar};

/// Generalized coordinates and velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigState<T: Scalar> {
    pub q: DVector<T>,
    pub qdot: DVector<T>,
}

impl<T: Scalar> ConfigState<T> {
    pub fn new(q: DVector<T>, qdot: DVector<T>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::InvalidArgument("state dimension must be at least 1".into()));
        }
        if q.len() != qdot.len() {
            return Err(Error::Dimension {
                context: "ConfigState velocity",
                expected: q.len(),
                got: qdot.len(),
            });
        }
        Ok(Self { q, qdot })
    }

    pub fn from_slices(q: &[T], qdot: &[T]) -> Result<Self> {
        Self::new(DVector::from_column_slice(q), DVector::from_column_slice(qdot))
    }

    pub fn at_rest(q: DVector<T>) -> Result<Self> {
        let n = q.len();
        Self::new(q, DVector::zeros(n))
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qdot.iter()).all(|x| x.is_finite())
    }
}

/// Axis-aligned validity region for the coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox<T: Scalar> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Scalar> DomainBox<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension {
                context: "DomainBox bounds",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidArgument("domain box has lower > upper".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn unbounded(n: usize) -> Self {
        let inf = T::lit(f64::INFINITY);
        Self {
            lower: vec![-inf; n],
            upper: vec![inf; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, q: &DVector<T>) -> bool {
        self.check(q).is_ok()
    }

    pub fn check(&self, q: &DVector<T>) -> Result<()> {
        if q.len() != self.dim() {
            return Err(Error::Dimension {
                context: "domain check",
                expected: self.dim(),
                got: q.len(),
            });
        }
        for (i, &x) in q.iter().enumerate() {
            if !(x >= self.lower[i] && x <= self.upper[i]) {
                return Err(Error::Domain {
                    q: to_f64_vec(q.iter().copied()),
                    index: i,
                    value: x.to_f64_lossy(),
                    lower: self.lower[i].to_f64_lossy(),
                    upper: self.upper[i].to_f64_lossy(),
                });
            }
        }
        Ok(())
    }
}

/// Mass matrix `g_ij(q)`.
pub trait MetricField<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, q: &DVector<T>) -> Result<DMatrix<T>>;

    /// `∂g/∂q^k` for `k = 0..n`. Falls back to finite differences.
    fn partials(&self, q: &DVector<T>) -> Result<Vec<DMatrix<T>>> {
        fd_partials_default(|x| self.value(x), q)
    }
}

pub trait ScalarField<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, q: &DVector<T>) -> Result<T>;

    fn gradient(&self, q: &DVector<T>) -> Result<DVector<T>> {
        let parts = fd_partials_default(|x| self.value(x), q)?;
        Ok(DVector::from_vec(parts))
    }
}

/// Dissipative generalized force `C_r(q, q̇)`.
pub trait DissipationField<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, q: &DVector<T>, qdot: &DVector<T>) -> Result<DVector<T>>;

    /// Whether the field is declared odd in the velocities.
    fn odd_in_velocity(&self) -> bool {
        false
    }
}

/// `P^i_j(q)`: the projection whose kernel holds the actuated directions.
pub trait ProjectionField<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    /// Number of unactuated directions, the rank of `P`.
    fn rank(&self) -> usize;

    fn value(&self, q: &DVector<T>) -> Result<DMatrix<T>>;

    fn partials(&self, q: &DVector<T>) -> Result<Vec<DMatrix<T>>> {
        fd_partials_default(|x| self.value(x), q)
    }
}

/// Open-loop data of `g q̈ + [jk,·] q̇ q̇ + C + ∇V = u` with `P g⁻¹ u = 0`.
#[derive(Clone)]
pub struct LagrangianSystem<T: Scalar> {
    pub metric: Arc<dyn MetricField<T>>,
    pub potential: Arc<dyn ScalarField<T>>,
    pub dissipation: Arc<dyn DissipationField<T>>,
    pub projection: Arc<dyn ProjectionField<T>>,
    pub domain: DomainBox<T>,
}

impl<T: Scalar> LagrangianSystem<T> {
    pub fn new(
        metric: Arc<dyn MetricField<T>>,
        potential: Arc<dyn ScalarField<T>>,
        dissipation: Arc<dyn DissipationField<T>>,
        projection: Arc<dyn ProjectionField<T>>,
        domain: DomainBox<T>,
    ) -> Result<Self> {
        let n = metric.dim();
        for (context, got) in [
            ("potential", potential.dim()),
            ("dissipation", dissipation.dim()),
            ("projection", projection.dim()),
            ("domain", domain.dim()),
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
            projection,
            domain,
        })
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }
}

impl<T: Scalar> std::fmt::Debug for LagrangianSystem<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LagrangianSystem")
            .field("dim", &self.dim())
            .field("unactuated", &self.projection.rank())
            .field("domain", &self.domain)
            .finish()
    }
}

// ---------------------------------------------------------------------------
// Concrete fields

#[derive(Debug, Clone)]
pub struct ConstantMetric<T: Scalar> {
    pub g: DMatrix<T>,
}

impl<T: Scalar> ConstantMetric<T> {
    pub fn new(g: DMatrix<T>) -> Result<Self> {
        if !g.is_square() {
            return Err(Error::InvalidArgument("metric must be square".into()));
        }
        if g != g.transpose() {
            return Err(Error::InvalidArgument("metric must be symmetric".into()));
        }
        Ok(Self { g })
    }
}

impl<T: Scalar> MetricField<T> for ConstantMetric<T> {
    fn dim(&self) -> usize {
        self.g.nrows()
    }

    fn value(&self, _q: &DVector<T>) -> Result<DMatrix<T>> {
        Ok(self.g.clone())
    }

    fn partials(&self, _q: &DVector<T>) -> Result<Vec<DMatrix<T>>> {
        let n = self.dim();
        Ok(vec![DMatrix::zeros(n, n); n])
    }
}

type MatFn<T> = Box<dyn Fn(&DVector<T>) -> DMatrix<T> + Send + Sync>;
type MatsFn<T> = Box<dyn Fn(&DVector<T>) -> Vec<DMatrix<T>> + Send + Sync>;

/// Metric given by closures, with optional analytic partials.
pub struct FnMetric<T: Scalar> {
    n: usize,
    value: MatFn<T>,
    partials: Option<MatsFn<T>>,
}

impl<T: Scalar> FnMetric<T> {
    pub fn new(n: usize, value: impl Fn(&DVector<T>) -> DMatrix<T> + Send + Sync + 'static) -> Self {
        Self {
            n,
            value: Box::new(value),
            partials: None,
        }
    }

    pub fn with_partials(
        mut self,
        partials: impl Fn(&DVector<T>) -> Vec<DMatrix<T>> + Send + Sync + 'static,
    ) -> Self {
        self.partials = Some(Box::new(partials));
        self
    }
}

impl<T: Scalar> MetricField<T> for FnMetric<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, q: &DVector<T>) -> Result<DMatrix<T>> {
        Ok((self.value)(q))
    }

    fn partials(&self, q: &DVector<T>) -> Result<Vec<DMatrix<T>>> {
        match &self.partials {
            Some(p) => Ok(p(q)),
            None => fd_partials_default(|x| self.value(x), q),
        }
    }
}

/// `V(q) = ½ qᵀ V₂ q + v₁ · q` with symmetric `V₂`, so `∇V = V₂ q + v₁`.
#[derive(Debug, Clone)]
pub struct QuadraticPotential<T: Scalar> {
    pub v2: DMatrix<T>,
    pub v1: DVector<T>,
}

impl<T: Scalar> QuadraticPotential<T> {
    pub fn new(v2: DMatrix<T>, v1: DVector<T>) -> Result<Self> {
        if !v2.is_square() || v2.nrows() != v1.len() {
            return Err(Error::Dimension {
                context: "quadratic potential",
                expected: v2.nrows(),
                got: v1.len(),
            });
        }
        Ok(Self { v2, v1 })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            v2: DMatrix::zeros(n, n),
            v1: DVector::zeros(n),
        }
    }
}

impl<T: Scalar> ScalarField<T> for QuadraticPotential<T> {
    fn dim(&self) -> usize {
        self.v1.len()
    }

    fn value(&self, q: &DVector<T>) -> Result<T> {
        Ok(q.dot(&(&self.v2 * q)) * T::lit(0.5) + self.v1.dot(q))
    }

    fn gradient(&self, q: &DVector<T>) -> Result<DVector<T>> {
        let sym = (&self.v2 + self.v2.transpose()) * T::lit(0.5);
        Ok(sym * q + &self.v1)
    }
}

type ScalarFn<T> = Box<dyn Fn(&DVector<T>) -> T + Send + Sync>;
type VecFn<T> = Box<dyn Fn(&DVector<T>) -> DVector<T> + Send + Sync>;

pub struct FnScalarField<T: Scalar> {
    n: usize,
    value: ScalarFn<T>,
    gradient: Option<VecFn<T>>,
}

impl<T: Scalar> FnScalarField<T> {
    pub fn new(n: usize, value: impl Fn(&DVector<T>) -> T + Send + Sync + 'static) -> Self {
        Self {
            n,
            value: Box::new(value),
            gradient: None,
        }
    }

    pub fn with_gradient(
        mut self,
        gradient: impl Fn(&DVector<T>) -> DVector<T> + Send + Sync + 'static,
    ) -> Self {
        self.gradient = Some(Box::new(gradient));
        self
    }
}

impl<T: Scalar> ScalarField<T> for FnScalarField<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, q: &DVector<T>) -> Result<T> {
        Ok((self.value)(q))
    }

    fn gradient(&self, q: &DVector<T>) -> Result<DVector<T>> {
        match &self.gradient {
            Some(g) => Ok(g(q)),
            None => {
                let parts = fd_partials_default(|x| self.value(x), q)?;
                Ok(DVector::from_vec(parts))
            }
        }
    }
}

/// `C(q, q̇) = C₂ q̇`.
#[derive(Debug, Clone)]
pub struct LinearDissipation<T: Scalar> {
    pub c2: DMatrix<T>,
}

impl<T: Scalar> LinearDissipation<T> {
    pub fn new(c2: DMatrix<T>) -> Result<Self> {
        if !c2.is_square() {
            return Err(Error::InvalidArgument("dissipation matrix must be square".into()));
        }
        Ok(Self { c2 })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            c2: DMatrix::zeros(n, n),
        }
    }
}

impl<T: Scalar> DissipationField<T> for LinearDissipation<T> {
    fn dim(&self) -> usize {
        self.c2.nrows()
    }

    fn value(&self, _q: &DVector<T>, qdot: &DVector<T>) -> Result<DVector<T>> {
        Ok(&self.c2 * qdot)
    }

    fn odd_in_velocity(&self) -> bool {
        true
    }
}

/// Constant projection matrix.
#[derive(Debug, Clone)]
pub struct ConstantProjection<T: Scalar> {
    pub p: DMatrix<T>,
    pub rank: usize,
}

impl<T: Scalar> ConstantProjection<T> {
    pub fn new(p: DMatrix<T>, rank: usize) -> Result<Self> {
        if !p.is_square() {
            return Err(Error::InvalidArgument("projection must be square".into()));
        }
        Ok(Self { p, rank })
    }
}

impl<T: Scalar> ProjectionField<T> for ConstantProjection<T> {
    fn dim(&self) -> usize {
        self.p.nrows()
    }

    fn rank(&self) -> usize {
        self.rank
    }

    fn value(&self, _q: &DVector<T>) -> Result<DMatrix<T>> {
        Ok(self.p.clone())
    }

    fn partials(&self, _q: &DVector<T>) -> Result<Vec<DMatrix<T>>> {
        let n = self.dim();
        Ok(vec![DMatrix::zeros(n, n); n])
    }
}

/// `P = I − g⁻¹B (Bᵀ g⁻¹ B)⁻¹ Bᵀ` for an input matrix `B` whose columns
/// span the actuated forces. `P g⁻¹ u = 0` exactly when `u ∈ range(B)`.
pub fn input_projection<T: Scalar>(g: &DMatrix<T>, input: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = g.nrows();
    let ginv = g
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular {
            what: "metric",
            q: vec![],
        })?;
    let gb = &ginv * input;
    let schur = input.transpose() * &gb;
    let schur_inv = schur.try_inverse().ok_or_else(|| Error::Singular {
        what: "input Gram matrix",
        q: vec![],
    })?;
    Ok(DMatrix::identity(n, n) - gb * schur_inv * input.transpose())
}

/// g-orthogonal projection built from a metric field and a constant input matrix.
pub struct InputProjection<T: Scalar> {
    metric: Arc<dyn MetricField<T>>,
    input: DMatrix<T>,
}

impl<T: Scalar> InputProjection<T> {
    pub fn new(metric: Arc<dyn MetricField<T>>, input: DMatrix<T>) -> Result<Self> {
        if input.nrows() != metric.dim() || input.ncols() > metric.dim() {
            return Err(Error::Dimension {
                context: "input matrix rows",
                expected: metric.dim(),
                got: input.nrows(),
            });
        }
        Ok(Self { metric, input })
    }
}

impl<T: Scalar> ProjectionField<T> for InputProjection<T> {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn rank(&self) -> usize {
        self.metric.dim() - self.input.ncols()
    }

    fn value(&self, q: &DVector<T>) -> Result<DMatrix<T>> {
        let g = self.metric.value(q)?;
        input_projection(&g, &self.input).map_err(|e| match e {
            Error::Singular { what, .. } => Error::Singular {
                what,
                q: to_f64_vec(q.iter().copied()),
            },
            other => other,
        })
    }
}

/// Properties a projection field must satisfy at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionCheck {
    /// `‖PP − P‖ / ‖P‖`.
    pub idempotency: f64,
    /// `‖P g⁻¹ − g⁻¹ Pᵀ‖ / ‖g⁻¹‖`.
    pub self_adjointness: f64,
    pub numerical_rank: usize,
}

pub fn check_projection<T: Scalar>(
    metric: &dyn MetricField<T>,
    projection: &dyn ProjectionField<T>,
    q: &DVector<T>,
) -> Result<ProjectionCheck> {
    let p = projection.value(q)?;
    let g = metric.value(q)?;
    let ginv = g.try_inverse().ok_or_else(|| Error::Singular {
        what: "metric",
        q: to_f64_vec(q.iter().copied()),
    })?;
    let pn = p.norm().to_f64_lossy().max(f64::MIN_POSITIVE);
    let idempotency = (&p * &p - &p).norm().to_f64_lossy() / pn;
    let self_adjointness =
        (&p * &ginv - &ginv * p.transpose()).norm().to_f64_lossy() / ginv.norm().to_f64_lossy();
    let sv = p.clone().singular_values();
    let smax = sv.iter().fold(T::zero(), |m, &s| m.max(s));
    let tol = smax * T::lit(1e-9);
    let numerical_rank = sv.iter().filter(|&&s| s > tol).count();
    Ok(ProjectionCheck {
        idempotency,
        self_adjointness,
        numerical_rank,
    })
}

/// Attempts a Cholesky factorization, the positive-definiteness test for metrics.
pub fn is_positive_definite<T: Scalar>(g: &DMatrix<T>) -> bool {
    g.clone().cholesky().is_some()
}
