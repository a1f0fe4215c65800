//! Constant-coefficient matching: every admissible linear state feedback is
//! produced by constant closed-loop data `(ĝ, V̂, Ĉ)`.
//!
//! Quadratic potentials use the `V = ½ qᵀ V₂ q + v₁ · q` convention, so that
//! `∇V = V₂ q + v₁` and the construction `V̂₂ = ĝ g⁻¹ (V₂ − a)` reproduces the
//! position gain `a` exactly.

use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{
    input_projection, is_positive_definite, ConfigState, ConstantMetric, ConstantProjection, DomainBox,
    LagrangianSystem, LinearDissipation, QuadraticPotential,
};
use crate::matching::{control_law, ClosedLoopSpec};
use crate::{Error, Result, Scalar};

/// Tolerance for the structural checks on constant data.
pub const STRUCTURE_TOL: f64 = 1e-9;
/// Singular values below this fraction of the largest span the nullspace.
pub const NULLSPACE_REL_TOL: f64 = 1e-10;
/// Minimum `σ_min/σ_max` accepted as nondegenerate.
pub const NONDEGENERACY_TOL: f64 = 1e-8;
const SWEEP_CANDIDATES: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem<T: Scalar> {
    pub g: DMatrix<T>,
    pub v2: DMatrix<T>,
    pub v1: DVector<T>,
    pub c2: DMatrix<T>,
    pub p: DMatrix<T>,
    /// Number of unactuated directions.
    pub rank: usize,
}

impl<T: Scalar> LtiSystem<T> {
    pub fn new(
        g: DMatrix<T>,
        v2: DMatrix<T>,
        v1: DVector<T>,
        c2: DMatrix<T>,
        p: DMatrix<T>,
        rank: usize,
    ) -> Result<Self> {
        let sys = Self {
            g,
            v2,
            v1,
            c2,
            p,
            rank,
        };
        sys.validate()?;
        Ok(sys)
    }

    /// System whose actuated forces span the columns of `input`.
    pub fn with_input(
        g: DMatrix<T>,
        v2: DMatrix<T>,
        v1: DVector<T>,
        c2: DMatrix<T>,
        input: &DMatrix<T>,
    ) -> Result<Self> {
        let p = input_projection(&g, input)?;
        let rank = g.nrows() - input.ncols();
        Self::new(g, v2, v1, c2, p, rank)
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.g.nrows();
        for (context, m) in [("V2", &self.v2), ("C2", &self.c2), ("P", &self.p)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Dimension {
                    context,
                    expected: n,
                    got: m.nrows(),
                });
            }
        }
        if self.v1.len() != n {
            return Err(Error::Dimension {
                context: "v1",
                expected: n,
                got: self.v1.len(),
            });
        }
        if self.g != self.g.transpose() || !is_positive_definite(&self.g) {
            return Err(Error::InvalidArgument(
                "g must be symmetric positive definite".into(),
            ));
        }
        if self.v2 != self.v2.transpose() {
            return Err(Error::InvalidArgument("V2 must be symmetric".into()));
        }
        let tol = T::lit(STRUCTURE_TOL);
        let pn = T::one().max(self.p.norm());
        if (&self.p * &self.p - &self.p).norm() > tol * pn {
            return Err(Error::InvalidArgument("P must be idempotent".into()));
        }
        let ginv = self.g_inv()?;
        if (&self.p * &ginv - &ginv * self.p.transpose()).norm() > tol * ginv.norm() {
            return Err(Error::InvalidArgument("P must be g-self-adjoint".into()));
        }
        if numerical_rank(&self.p) != self.rank {
            return Err(Error::InvalidArgument(format!(
                "rank(P) = {} but {} unactuated directions declared",
                numerical_rank(&self.p),
                self.rank
            )));
        }
        Ok(())
    }

    pub fn g_inv(&self) -> Result<DMatrix<T>> {
        self.g.clone().try_inverse().ok_or(Error::Singular {
            what: "metric",
            q: vec![],
        })
    }

    /// The system as configuration-space fields.
    pub fn to_lagrangian(&self) -> Result<LagrangianSystem<T>> {
        LagrangianSystem::new(
            Arc::new(ConstantMetric::new(self.g.clone())?),
            Arc::new(QuadraticPotential::new(self.v2.clone(), self.v1.clone())?),
            Arc::new(LinearDissipation::new(self.c2.clone())?),
            Arc::new(ConstantProjection::new(self.p.clone(), self.rank)?),
            DomainBox::unbounded(self.dim()),
        )
    }
}

/// `u = v + a q + b q̇`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFeedback<T: Scalar> {
    pub v: DVector<T>,
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
}

impl<T: Scalar> LinearFeedback<T> {
    pub fn zero(n: usize) -> Self {
        Self {
            v: DVector::zeros(n),
            a: DMatrix::zeros(n, n),
            b: DMatrix::zeros(n, n),
        }
    }

    pub fn eval(&self, q: &DVector<T>, qdot: &DVector<T>) -> DVector<T> {
        &self.v + &self.a * q + &self.b * qdot
    }

    /// Fails with the first of `P g⁻¹ v`, `P g⁻¹ a`, `P g⁻¹ b` that is not zero.
    pub fn check_admissible(&self, sys: &LtiSystem<T>) -> Result<()> {
        let pg = &sys.p * sys.g_inv()?;
        let tol = T::lit(STRUCTURE_TOL);
        let checks: [(&'static str, DMatrix<T>, T); 3] = [
            (
                "P g^-1 v = 0",
                &pg * DMatrix::from_column_slice(self.v.len(), 1, self.v.as_slice()),
                self.v.norm(),
            ),
            ("P g^-1 a = 0", &pg * &self.a, self.a.norm()),
            ("P g^-1 b = 0", &pg * &self.b, self.b.norm()),
        ];
        for (constraint, m, scale) in checks {
            let violation = m.amax();
            if violation > tol * (T::one() + scale) {
                return Err(Error::Inadmissible {
                    constraint,
                    violation: violation.to_f64_lossy(),
                });
            }
        }
        Ok(())
    }
}

/// Constant closed loop `ĝ`, `V̂ = ½ qᵀ V̂₂ q + v̂₁ · q`, `Ĉ = Ĉ₂ q̇`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantClosedLoop<T: Scalar> {
    pub g_hat: DMatrix<T>,
    pub v2_hat: DMatrix<T>,
    /// Zero whenever the feedback offset equals the open-loop linear potential term.
    pub v1_hat: DVector<T>,
    pub c2_hat: DMatrix<T>,
    /// Whether `ĝ` is positive definite, which `Ĥ` needs to be a Lyapunov function.
    pub g_hat_positive_definite: bool,
}

impl<T: Scalar> ConstantClosedLoop<T> {
    pub fn to_closed_loop_spec(&self) -> Result<ClosedLoopSpec<T>> {
        ClosedLoopSpec::new(
            Arc::new(ConstantMetric::new(self.g_hat.clone())?),
            Arc::new(QuadraticPotential::new(
                self.v2_hat.clone(),
                self.v1_hat.clone(),
            )?),
            Arc::new(LinearDissipation::new(self.c2_hat.clone())?),
        )
    }

    /// Largest entry of the constant matching conditions
    /// `P(g⁻¹V₂ − ĝ⁻¹V̂₂)`, `P(g⁻¹v₁ − ĝ⁻¹v̂₁)` and `P(g⁻¹C₂ − ĝ⁻¹Ĉ₂)`.
    pub fn matching_residual(&self, sys: &LtiSystem<T>) -> Result<T> {
        let ginv = sys.g_inv()?;
        let ghat_inv = self.g_hat.clone().try_inverse().ok_or(Error::Singular {
            what: "closed-loop metric",
            q: vec![],
        })?;
        let pot = &sys.p * (&ginv * &sys.v2 - &ghat_inv * &self.v2_hat);
        let lin = &sys.p * (&ginv * &sys.v1 - &ghat_inv * &self.v1_hat);
        let dis = &sys.p * (&ginv * &sys.c2 - &ghat_inv * &self.c2_hat);
        Ok(pot.amax().max(lin.amax()).max(dis.amax()))
    }
}

fn numerical_rank<T: Scalar>(m: &DMatrix<T>) -> usize {
    let sv = m.clone().singular_values();
    let smax = sv.iter().fold(T::one(), |a, &b| a.max(b));
    sv.iter().filter(|&&s| s > smax * T::lit(1e-9)).count()
}

/// Frobenius-orthonormal basis of the symmetric `n × n` matrices.
fn symmetric_basis<T: Scalar>(n: usize) -> Vec<DMatrix<T>> {
    let r = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            let mut e = DMatrix::zeros(n, n);
            if i == j {
                e[(i, i)] = T::one();
            } else {
                e[(i, j)] = r;
                e[(j, i)] = r;
            }
            out.push(e);
        }
    }
    out
}

/// Orthonormal basis of `{X = Xᵀ : RX − XRᵀ = 0}`.
///
/// The map is assembled on symmetric coordinates (image coordinates are the
/// strictly upper entries of the antisymmetric result), padded to a square
/// matrix and split by SVD.
pub fn symmetric_solution_space<T: Scalar>(r: &DMatrix<T>) -> Result<Vec<DMatrix<T>>> {
    if !r.is_square() || r.nrows() == 0 {
        return Err(Error::InvalidArgument("R must be a nonempty square matrix".into()));
    }
    let n = r.nrows();
    let basis = symmetric_basis::<T>(n);
    let dim = basis.len();
    let mut map = DMatrix::<T>::zeros(dim, dim);
    let sqrt2 = T::lit(std::f64::consts::SQRT_2);
    for (col, e) in basis.iter().enumerate() {
        let img = r * e - e * r.transpose();
        let mut row = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                map[(row, col)] = img[(i, j)] * sqrt2;
                row += 1;
            }
        }
    }
    let svd = map.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().fold(T::zero(), |a, &b| a.max(b));
    let thresh = smax * T::lit(NULLSPACE_REL_TOL);
    let mut out = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= thresh {
            let mut x = DMatrix::zeros(n, n);
            for (c, e) in basis.iter().enumerate() {
                x += e * v_t[(k, c)];
            }
            out.push(x);
        }
    }
    Ok(out)
}

/// Output of [`lemma1_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSolution<T: Scalar> {
    /// Symmetric, nondegenerate, `‖X‖_F = √n`.
    pub x: DMatrix<T>,
    /// Dimension of the symmetric solution space.
    pub dimension: usize,
    /// Number of sweep candidates examined (1 when the seed projection was accepted).
    pub attempts: usize,
}

/// Nondegenerate symmetric `X` with `RX = XRᵀ`, starting from the projection of the identity.
pub fn lemma1_solve<T: Scalar>(r: &DMatrix<T>) -> Result<SymmetricSolution<T>> {
    lemma1_solve_seeded(r, &DMatrix::identity(r.nrows(), r.ncols()))
}

/// As [`lemma1_solve`], trying the orthogonal projection of `seed` onto the
/// solution space first and then a deterministic low-discrepancy sweep of
/// basis combinations.
pub fn lemma1_solve_seeded<T: Scalar>(
    r: &DMatrix<T>,
    seed: &DMatrix<T>,
) -> Result<SymmetricSolution<T>> {
    let basis = symmetric_solution_space(r)?;
    let n = r.nrows();
    let dimension = basis.len();
    let finish = |x: DMatrix<T>, attempts| {
        let x = symmetrize(&x);
        let scale = T::lit((n as f64).sqrt()) / x.norm();
        SymmetricSolution {
            x: x * scale,
            dimension,
            attempts,
        }
    };

    let seed = symmetrize(seed);
    let projected = basis
        .iter()
        .fold(DMatrix::zeros(n, n), |acc, b| acc + b * b.dot(&seed));
    if nondegenerate(&projected) {
        return Ok(finish(projected, 1));
    }

    let steps = kronecker_steps(dimension);
    for k in 1..=SWEEP_CANDIDATES {
        let mut x = DMatrix::zeros(n, n);
        for (b, &step) in basis.iter().zip(&steps) {
            let c = (0.5 + k as f64 * step).fract() - 0.5;
            x += b * T::lit(c);
        }
        if nondegenerate(&x) {
            return Ok(finish(x, k + 1));
        }
    }
    Err(Error::NoNondegenerateSolution {
        attempts: SWEEP_CANDIDATES + 1,
        dimension,
        basis: basis
            .iter()
            .map(|b| b.iter().map(|v| v.to_f64_lossy()).collect())
            .collect(),
    })
}

/// Additive-recurrence increments `φ_d^{-i}` with `φ_d^{d+1} = φ_d + 1`.
fn kronecker_steps(d: usize) -> Vec<f64> {
    let mut phi = 2.0_f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (d as f64 + 1.0));
    }
    (1..=d).map(|i| phi.powi(-(i as i32)).fract()).collect()
}

fn symmetrize<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * T::lit(0.5)
}

fn nondegenerate<T: Scalar>(x: &DMatrix<T>) -> bool {
    condition_ratio(x) > T::lit(NONDEGENERACY_TOL)
}

/// `σ_min / σ_max`, zero for the zero matrix.
pub fn condition_ratio<T: Scalar>(x: &DMatrix<T>) -> T {
    let sv = x.clone().singular_values();
    let smax = sv.iter().fold(T::zero(), |a, &b| a.max(b));
    if smax == T::zero() || !smax.is_finite() {
        return T::zero();
    }
    let smin = sv.iter().fold(smax, |a, &b| a.min(b));
    smin / smax
}

/// `‖RX − XRᵀ‖_F`.
pub fn lemma1_residual<T: Scalar>(r: &DMatrix<T>, x: &DMatrix<T>) -> T {
    (r * x - x * r.transpose()).norm()
}

/// Result of the Jordan-form construction.
#[derive(Debug, Clone, PartialEq)]
pub struct JordanOracle<T: Scalar> {
    /// `Q Y Qᵀ` with `Y` block anti-identity.
    pub x: DMatrix<T>,
    /// Solution-space dimension implied by the detected structure.
    pub dimension: usize,
}

/// Builds a solution from the real Jordan structure of `R` for `n ≤ 4`.
///
/// Handles diagonalizable matrices (complex pairs as rotation-scaling
/// blocks, repeated real eigenvalues as identity blocks) and matrices with a
/// single Jordan block. Returns `Ok(None)` when the structure is anything
/// else or the similarity transform is too ill-conditioned to trust.
pub fn jordan_oracle(r: &DMatrix<f64>) -> Result<Option<JordanOracle<f64>>> {
    const TOL: f64 = 1e-8;
    if !r.is_square() {
        return Err(Error::InvalidArgument("R must be square".into()));
    }
    let n = r.nrows();
    if n == 0 || n > 4 {
        return Ok(None);
    }
    let scale = 1.0_f64.max(r.amax());
    let eig = r.complex_eigenvalues();
    let clusters = cluster_eigenvalues(eig.as_slice(), TOL * scale);
    let id = DMatrix::<f64>::identity(n, n);

    // Single Jordan block of full size.
    if clusters.len() == 1 && clusters[0].1 == n && n > 1 {
        let lambda = clusters[0].0;
        if lambda.im.abs() > TOL * scale {
            return Ok(None);
        }
        let nil = r - &id * lambda.re;
        if numerical_rank_tol(&nil, TOL * scale) == n - 1 {
            let top = nil.pow((n - 1) as u32);
            let svd = top.svd(false, true);
            let v_t = svd.v_t.expect("requested V^T");
            let kmax = argmax(svd.singular_values.as_slice());
            let mut chain = vec![DVector::from_iterator(n, v_t.row(kmax).iter().copied())];
            for _ in 1..n {
                let next = &nil * chain.last().unwrap();
                chain.push(next);
            }
            chain.reverse();
            let q = DMatrix::from_columns(&chain);
            let y = anti_identity(n);
            return Ok(well_conditioned(&q).then(|| JordanOracle {
                x: symmetrize(&(&q * y * q.transpose())),
                dimension: n,
            }));
        }
    }

    // Diagonalizable: the geometric multiplicity of every cluster must match.
    let mut columns: Vec<DVector<f64>> = Vec::new();
    let mut blocks: Vec<usize> = Vec::new();
    let mut dimension = 0;
    for &(lambda, mult) in &clusters {
        if lambda.im.abs() <= TOL * scale {
            let kernel = null_vectors(&(r - &id * lambda.re), TOL * scale);
            if kernel.len() != mult {
                return Ok(None);
            }
            for v in kernel {
                columns.push(v);
                blocks.push(1);
            }
            dimension += mult * (mult + 1) / 2;
        } else if lambda.im > 0.0 {
            if mult != 1 {
                return Ok(None);
            }
            let (a, b) = (lambda.re, lambda.im);
            // (R − aI) x = −b y,  (R − aI) y = b x.
            let mut big = DMatrix::<f64>::zeros(2 * n, 2 * n);
            let shifted = r - &id * a;
            big.view_mut((0, 0), (n, n)).copy_from(&shifted);
            big.view_mut((n, n), (n, n)).copy_from(&shifted);
            big.view_mut((0, n), (n, n)).copy_from(&(&id * b));
            big.view_mut((n, 0), (n, n)).copy_from(&(&id * -b));
            let kernel = null_vectors(&big, TOL * scale);
            let Some(v) = kernel.first() else {
                return Ok(None);
            };
            columns.push(v.rows(0, n).into_owned());
            columns.push(v.rows(n, n).into_owned());
            blocks.push(2);
            dimension += 2;
        }
    }
    if columns.len() != n {
        return Ok(None);
    }
    let q = DMatrix::from_columns(&columns);
    if !well_conditioned(&q) {
        return Ok(None);
    }
    let mut y = DMatrix::<f64>::zeros(n, n);
    let mut at = 0;
    for size in blocks {
        y.view_mut((at, at), (size, size))
            .copy_from(&anti_identity(size));
        at += size;
    }
    Ok(Some(JordanOracle {
        x: symmetrize(&(&q * y * q.transpose())),
        dimension,
    }))
}

fn cluster_eigenvalues(eig: &[Complex<f64>], tol: f64) -> Vec<(Complex<f64>, usize)> {
    let mut out: Vec<(Complex<f64>, usize)> = Vec::new();
    for &e in eig {
        match out.iter_mut().find(|(c, _)| (*c - e).norm() <= tol.sqrt()) {
            Some((c, m)) => {
                *c = (*c * (*m as f64) + e) / (*m as f64 + 1.0);
                *m += 1;
            }
            None => out.push((e, 1)),
        }
    }
    out
}

fn null_vectors(m: &DMatrix<f64>, tol: f64) -> Vec<DVector<f64>> {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= tol.sqrt())
        .map(|(k, _)| DVector::from_iterator(n, v_t.row(k).iter().copied()))
        .collect()
}

fn numerical_rank_tol(m: &DMatrix<f64>, tol: f64) -> usize {
    m.clone()
        .singular_values()
        .iter()
        .filter(|&&s| s > tol.sqrt())
        .count()
}

fn argmax(xs: &[f64]) -> usize {
    xs.iter()
        .enumerate()
        .fold((0, f64::MIN), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

fn anti_identity(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i + j == n - 1 { 1.0 } else { 0.0 })
}

fn well_conditioned(q: &DMatrix<f64>) -> bool {
    condition_ratio(q) > 1e-8
}

/// Constant closed-loop data whose matching law is the feedback `fb`.
///
/// With `M = g⁻¹(V₂ − a)`, `ĝ` solves `ĝM = Mᵀĝ` (seeded with `g`, so zero
/// gains return a multiple of `g`), then `V̂₂ = ĝM`, `v̂₁ = ĝ g⁻¹ (v₁ − v)`
/// and `Ĉ₂ = ĝ g⁻¹ (C₂ − b)`.
pub fn theorem2_match<T: Scalar>(
    sys: &LtiSystem<T>,
    fb: &LinearFeedback<T>,
) -> Result<ConstantClosedLoop<T>> {
    let n = sys.dim();
    for (context, got) in [
        ("feedback v", fb.v.len()),
        ("feedback a", fb.a.nrows()),
        ("feedback b", fb.b.nrows()),
    ] {
        if got != n {
            return Err(Error::Dimension {
                context,
                expected: n,
                got,
            });
        }
    }
    fb.check_admissible(sys)?;
    let ginv = sys.g_inv()?;
    let m = &ginv * (&sys.v2 - &fb.a);
    let sol = lemma1_solve_seeded(&m.transpose(), &sys.g)?;
    let g_hat = sol.x;
    let v2_hat = symmetrize(&(&g_hat * &m));
    let v1_hat = &g_hat * &ginv * (&sys.v1 - &fb.v);
    let c2_hat = &g_hat * &ginv * (&sys.c2 - &fb.b);
    Ok(ConstantClosedLoop {
        g_hat_positive_definite: is_positive_definite(&g_hat),
        g_hat,
        v2_hat,
        v1_hat,
        c2_hat,
    })
}

/// Random admissible instance: entries uniform in `[−1, 1]`, `g = AAᵀ + nI`,
/// `⌊n/2⌋` unactuated directions, and gains drawn inside the actuated range.
pub fn random_instance(n: usize, seed: u64) -> Result<(LtiSystem<f64>, LinearFeedback<f64>)> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..=1.0));
    let a = uniform(n, n);
    let g = &a * a.transpose() + DMatrix::identity(n, n) * n as f64;
    let g = symmetrize(&g);
    let v2 = symmetrize(&uniform(n, n));
    let v1 = uniform(n, 1).column(0).into_owned();
    let c2 = uniform(n, n);
    let actuated = n - n / 2;
    let input = uniform(n, actuated);
    let fb = LinearFeedback {
        v: (&input * uniform(actuated, 1)).column(0).into_owned(),
        a: &input * uniform(actuated, n),
        b: &input * uniform(actuated, n),
    };
    let sys = LtiSystem::with_input(g, v2, v1, c2, &input)?;
    Ok((sys, fb))
}

/// Row-major matrix with explicit shape; vectors have a one-element shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JsonMatrix {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl JsonMatrix {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self {
            shape: vec![m.nrows(), m.ncols()],
            data: m.transpose().as_slice().to_vec(),
        }
    }

    pub fn from_vector(v: &DVector<f64>) -> Self {
        Self {
            shape: vec![v.len()],
            data: v.as_slice().to_vec(),
        }
    }

    fn check(&self, expected_rank: usize) -> Result<()> {
        if self.shape.len() != expected_rank {
            return Err(Error::InvalidArgument(format!(
                "expected a rank-{expected_rank} array, got shape {:?}",
                self.shape
            )));
        }
        let size: usize = self.shape.iter().product();
        if size != self.data.len() {
            return Err(Error::InvalidArgument(format!(
                "shape {:?} needs {size} entries, got {}",
                self.shape,
                self.data.len()
            )));
        }
        Ok(())
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        self.check(2)?;
        Ok(DMatrix::from_row_slice(self.shape[0], self.shape[1], &self.data))
    }

    pub fn to_vector(&self) -> Result<DVector<f64>> {
        self.check(1)?;
        Ok(DVector::from_column_slice(&self.data))
    }
}

/// Serialized form of [`LinearFeedback`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackJson {
    pub v: JsonMatrix,
    pub a: JsonMatrix,
    pub b: JsonMatrix,
}

impl From<&LinearFeedback<f64>> for FeedbackJson {
    fn from(f: &LinearFeedback<f64>) -> Self {
        Self {
            v: JsonMatrix::from_vector(&f.v),
            a: JsonMatrix::from_matrix(&f.a),
            b: JsonMatrix::from_matrix(&f.b),
        }
    }
}

impl FeedbackJson {
    pub fn to_feedback(&self) -> Result<LinearFeedback<f64>> {
        let fb = LinearFeedback {
            v: self.v.to_vector()?,
            a: self.a.to_matrix()?,
            b: self.b.to_matrix()?,
        };
        let n = fb.v.len();
        if fb.a.shape() != (n, n) || fb.b.shape() != (n, n) {
            return Err(Error::InvalidArgument(format!(
                "gains must be {n} x {n} to match v"
            )));
        }
        Ok(fb)
    }
}

/// Serialized form of [`LtiSystem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtiJson {
    pub g: JsonMatrix,
    pub v2: JsonMatrix,
    pub v1: JsonMatrix,
    pub c2: JsonMatrix,
    pub p: JsonMatrix,
    pub rank: usize,
}

impl From<&LtiSystem<f64>> for LtiJson {
    fn from(s: &LtiSystem<f64>) -> Self {
        Self {
            g: JsonMatrix::from_matrix(&s.g),
            v2: JsonMatrix::from_matrix(&s.v2),
            v1: JsonMatrix::from_vector(&s.v1),
            c2: JsonMatrix::from_matrix(&s.c2),
            p: JsonMatrix::from_matrix(&s.p),
            rank: s.rank,
        }
    }
}

/// Serialized form of [`ConstantClosedLoop`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopJson {
    pub g_hat: JsonMatrix,
    pub v2_hat: JsonMatrix,
    pub v1_hat: JsonMatrix,
    pub c2_hat: JsonMatrix,
    pub g_hat_positive_definite: bool,
}

impl From<&ConstantClosedLoop<f64>> for ClosedLoopJson {
    fn from(c: &ConstantClosedLoop<f64>) -> Self {
        Self {
            g_hat: JsonMatrix::from_matrix(&c.g_hat),
            v2_hat: JsonMatrix::from_matrix(&c.v2_hat),
            v1_hat: JsonMatrix::from_vector(&c.v1_hat),
            c2_hat: JsonMatrix::from_matrix(&c.c2_hat),
            g_hat_positive_definite: c.g_hat_positive_definite,
        }
    }
}

/// Largest `|u(q, q̇) − (v + aq + bq̇)|` over the states, `u` being the
/// matching control law of the constructed closed loop.
pub fn round_trip_error(
    sys: &LtiSystem<f64>,
    fb: &LinearFeedback<f64>,
    closed: &ConstantClosedLoop<f64>,
    states: &[ConfigState<f64>],
) -> Result<f64> {
    let open = sys.to_lagrangian()?;
    let spec = closed.to_closed_loop_spec()?;
    let mut worst = 0.0_f64;
    for st in states {
        let u = control_law(&open, &spec, st)?;
        let err = (u - fb.eval(&st.q, &st.qdot)).amax();
        if !err.is_finite() {
            return Ok(f64::INFINITY);
        }
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Square matrix with entries uniform in `[−1, 1]`.
pub fn random_matrix(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0))
}

/// States with entries uniform in `[−1, 1]`.
pub fn random_states(n: usize, count: usize, seed: u64) -> Vec<ConfigState<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| ConfigState {
            q: DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0)),
            qdot: DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0)),
        })
        .collect()
}
