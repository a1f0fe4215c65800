//! The ball-and-beam: linkage kinematics, rescaling, the open-loop model and
//! the explicit closed-loop family.
//!
//! Coordinates are `q = (s, θ)`: ball position along the beam and servo
//! angle. The beam angle `α(θ)` follows from the linkage constraint. Only
//! `θ` is actuated.

mod family;
mod kinematics;
mod motor;
mod params;
mod tuning;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

pub use family::{FamilyPoint, TABLE_NODES};
pub use kinematics::{AlphaDerivatives, ConstraintPartials, Kinematics, KinematicsContext};
pub use motor::{ServoMotor, VoltageCommand, DEFAULT_V_SAT};
pub use params::{
    params_report, rescale_params, DimensionlessParams, ParamRow, ParamsReport, PhysicalParams,
    UnitScales,
};
pub use tuning::{default_tuning, Damping, Mu1, Polynomial, PsiRule, TuningFunctions};

use family::{FamilyCore, FamilyDissipation, FamilyMetric, FamilyPotential};
use crate::geometry::{
    ConfigState, DissipationField, DomainBox, InputProjection, LagrangianSystem, MetricField,
    ScalarField,
};
use crate::linear::LinearFeedback;
use crate::matching::{control_law, ClosedLoopSpec};
use crate::Result;

/// Rescaled working box for the ball position.
pub const S_RANGE: (f64, f64) = (2.0, 41.0);
/// Servo working range, rad.
pub const THETA_RANGE: (f64, f64) = (-0.6, 0.6);
/// Servo range covered by the kinematic tables, rad.
pub const THETA_TABLE_RANGE: (f64, f64) = (-0.9, 0.9);

/// Coefficients of a beam Lagrangian
/// `T = ½ m_ss ṡ² + m_sa α′ ṡ θ̇ + ½ (m_θ + (m_a + m_s2 s²) α′²) θ̇²`,
/// `V = k_θ sin θ + (k_s s + k_a) sin α`, `C = (0, c θ̇)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamCoefficients {
    pub m_ss: f64,
    pub m_sa: f64,
    pub m_theta: f64,
    pub m_a: f64,
    pub m_s2: f64,
    pub k_theta: f64,
    pub k_s: f64,
    pub k_a: f64,
    pub c: f64,
}

impl BeamCoefficients {
    pub fn dimensionless(d: &DimensionlessParams) -> Self {
        Self {
            m_ss: 1.0,
            m_sa: 1.0,
            m_theta: d.a4,
            m_a: d.a3,
            m_s2: 2.5,
            k_theta: d.a5,
            k_s: 1.0,
            k_a: d.a6,
            c: d.a7,
        }
    }

    /// SI coefficients; the ball rolls without slipping with inertia `i_ball`.
    pub fn physical(p: &PhysicalParams) -> Self {
        Self {
            m_ss: p.i_ball / (p.r_ball * p.r_ball),
            m_sa: p.i_ball / p.r_ball,
            m_theta: p.i_servo,
            m_a: p.i_ball + p.i_beam,
            m_s2: p.m_ball,
            k_theta: 0.5 * p.m_link * p.grav * p.r_g,
            k_s: p.m_ball * p.grav,
            k_a: 0.5 * (p.m_beam + p.m_link) * p.grav * p.l_b,
            c: p.c0,
        }
    }
}

struct BeamMetric {
    kin: Kinematics,
    k: BeamCoefficients,
}

impl MetricField<f64> for BeamMetric {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        let (s, k) = (q[0], &self.k);
        let p = self.kin.derivatives(q[1])?.d1;
        let g12 = k.m_sa * p;
        let g22 = k.m_theta + (k.m_a + k.m_s2 * s * s) * p * p;
        Ok(DMatrix::from_row_slice(2, 2, &[k.m_ss, g12, g12, g22]))
    }

    fn partials(&self, q: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        let (s, k) = (q[0], &self.k);
        let d = self.kin.derivatives(q[1])?;
        let (p, pp) = (d.d1, d.d2);
        let ds = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 2.0 * k.m_s2 * s * p * p]);
        let dt_12 = k.m_sa * pp;
        let dt_22 = 2.0 * (k.m_a + k.m_s2 * s * s) * p * pp;
        let dt = DMatrix::from_row_slice(2, 2, &[0.0, dt_12, dt_12, dt_22]);
        Ok(vec![ds, dt])
    }
}

struct BeamPotential {
    kin: Kinematics,
    k: BeamCoefficients,
}

impl ScalarField<f64> for BeamPotential {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, q: &DVector<f64>) -> Result<f64> {
        let (s, theta, k) = (q[0], q[1], &self.k);
        let alpha = self.kin.alpha(theta)?;
        Ok(k.k_theta * theta.sin() + (k.k_s * s + k.k_a) * alpha.sin())
    }

    fn gradient(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        let (s, theta, k) = (q[0], q[1], &self.k);
        let d = self.kin.derivatives(theta)?;
        Ok(DVector::from_row_slice(&[
            k.k_s * d.alpha.sin(),
            k.k_theta * theta.cos() + (k.k_s * s + k.k_a) * d.alpha.cos() * d.d1,
        ]))
    }
}

struct ServoDamping {
    c: f64,
}

impl DissipationField<f64> for ServoDamping {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, _q: &DVector<f64>, qdot: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(DVector::from_row_slice(&[0.0, self.c * qdot[1]]))
    }

    fn odd_in_velocity(&self) -> bool {
        true
    }
}

/// Beam Lagrangian system with `θ` actuated and the given domain.
pub fn beam_system(
    kin: Kinematics,
    coeffs: BeamCoefficients,
    domain: DomainBox<f64>,
) -> Result<LagrangianSystem<f64>> {
    let metric: Arc<dyn MetricField<f64>> = Arc::new(BeamMetric { kin, k: coeffs });
    let projection = InputProjection::new(metric.clone(), DMatrix::from_row_slice(2, 1, &[0.0, 1.0]))?;
    LagrangianSystem::new(
        metric,
        Arc::new(BeamPotential { kin, k: coeffs }),
        Arc::new(ServoDamping { c: coeffs.c }),
        Arc::new(projection),
        domain,
    )
}

/// Rescaled open-loop system for `dims`.
pub fn dimensionless_system(dims: &DimensionlessParams) -> Result<LagrangianSystem<f64>> {
    beam_system(
        Kinematics::new(dims.a1, dims.a2),
        BeamCoefficients::dimensionless(dims),
        DomainBox::new(
            vec![S_RANGE.0, THETA_RANGE.0],
            vec![S_RANGE.1, THETA_RANGE.1],
        )?,
    )
}

/// SI open-loop system assembled from physical quantities, `q = (s [m], θ [rad])`.
pub fn physical_system(phys: &PhysicalParams) -> Result<LagrangianSystem<f64>> {
    phys.validate()?;
    beam_system(
        Kinematics::new(phys.l_l / phys.l_b, phys.r_g / phys.l_b),
        BeamCoefficients::physical(phys),
        DomainBox::new(
            vec![S_RANGE.0 * phys.r_ball, THETA_RANGE.0],
            vec![S_RANGE.1 * phys.r_ball, THETA_RANGE.1],
        )?,
    )
}

/// Physical parameters, the rescaled constants actually used, and the
/// chosen member of the closed-loop family.
#[derive(Clone)]
pub struct BallBeamModel {
    pub phys: PhysicalParams,
    pub dims: DimensionlessParams,
    pub tuning: TuningFunctions,
    pub scales: UnitScales,
    pub kin: Kinematics,
    core: Arc<FamilyCore>,
}

impl std::fmt::Debug for BallBeamModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BallBeamModel")
            .field("phys", &self.phys)
            .field("dims", &self.dims)
            .field("tuning", &self.tuning)
            .field("scales", &self.scales)
            .finish_non_exhaustive()
    }
}

impl BallBeamModel {
    /// Builds the kinematics and the cached α-tables eagerly.
    pub fn new(phys: PhysicalParams, dims: DimensionlessParams, tuning: TuningFunctions) -> Result<Self> {
        phys.validate()?;
        dims.validate()?;
        let kin = Kinematics::new(dims.a1, dims.a2);
        let a_lo = kin.alpha(THETA_TABLE_RANGE.0)?;
        let a_hi = kin.alpha(THETA_TABLE_RANGE.1)?;
        let margin = 0.1 * (a_hi - a_lo) + 0.01;
        let s0 = tuning.s0_offset.unwrap_or(dims.s0_star);
        let core = FamilyCore::build(kin, tuning.clone(), s0, (a_lo - margin, a_hi + margin))?;
        Ok(Self {
            scales: UnitScales::of(&phys),
            phys,
            dims,
            tuning,
            kin,
            core: Arc::new(core),
        })
    }

    /// Laboratory parameters, printed constants and the chosen tuning.
    pub fn reference() -> Result<Self> {
        Self::new(
            PhysicalParams::bench(),
            DimensionlessParams::printed(),
            default_tuning(),
        )
    }

    pub fn kinematics_context(&self) -> KinematicsContext {
        KinematicsContext::new(self.kin)
    }

    pub fn alpha_derivatives(&self, theta: f64) -> Result<AlphaDerivatives> {
        self.kin.derivatives(theta)
    }

    pub fn open_loop_system(&self) -> Result<LagrangianSystem<f64>> {
        dimensionless_system(&self.dims)
    }

    pub fn closed_loop_family(&self) -> Result<ClosedLoopSpec<f64>> {
        ClosedLoopSpec::new(
            Arc::new(FamilyMetric(self.core.clone())),
            Arc::new(FamilyPotential(self.core.clone())),
            Arc::new(FamilyDissipation(self.core.clone())),
        )
    }

    /// All family quantities at `(s, θ)`.
    pub fn family_point(&self, s: f64, theta: f64) -> Result<FamilyPoint> {
        self.core.at(s, theta)
    }

    /// `ψ(α)` of the active rule.
    pub fn psi(&self, alpha: f64) -> Result<f64> {
        self.core.psi(alpha)
    }

    pub fn equilibrium(&self) -> ConfigState<f64> {
        ConfigState {
            q: DVector::from_row_slice(&[self.dims.s0_star, 0.0]),
            qdot: DVector::zeros(2),
        }
    }

    pub fn motor(&self, v_sat: f64) -> ServoMotor {
        ServoMotor::new(&self.phys, self.scales, v_sat)
    }

    /// Affine feedback `u = v + a q + b q̇` tangent to the matching law at
    /// the equilibrium, from central differences with step `1e-5`.
    pub fn linearize_control(&self, closed: &ClosedLoopSpec<f64>) -> Result<LinearFeedback<f64>> {
        const STEP: f64 = 1e-5;
        let open = self.open_loop_system()?;
        let eq = self.equilibrium();
        let u0 = control_law(&open, closed, &eq)?;
        let mut a = DMatrix::zeros(2, 2);
        let mut b = DMatrix::zeros(2, 2);
        for k in 0..4 {
            let shifted = |h: f64| {
                let mut x = eq.clone();
                if k < 2 {
                    x.q[k] += h;
                } else {
                    x.qdot[k - 2] += h;
                }
                control_law(&open, closed, &x)
            };
            let col = (shifted(STEP)? - shifted(-STEP)?) / (2.0 * STEP);
            if k < 2 {
                a.set_column(k, &col);
            } else {
                b.set_column(k - 2, &col);
            }
        }
        let v = u0 - &a * &eq.q;
        Ok(LinearFeedback { v, a, b })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::is_positive_definite;

    #[test]
    fn metric_at_equilibrium() {
        let d = DimensionlessParams::printed();
        let sys = dimensionless_system(&d).unwrap();
        let g = sys.metric.value(&DVector::from_row_slice(&[22.0, 0.0])).unwrap();
        assert_eq!(g[(0, 0)], 1.0);
        assert!((g[(0, 1)] - 0.0588).abs() < 1e-15);
        let g22 = d.a4 + (d.a3 + 2.5 * 484.0) * 0.0588 * 0.0588;
        assert!((g[(1, 1)] - g22).abs() < 1e-9);
        assert_eq!(sys.potential.value(&DVector::from_row_slice(&[22.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn metric_positive_on_domain() {
        let sys = dimensionless_system(&DimensionlessParams::printed()).unwrap();
        for i in 0..=20 {
            for j in 0..=20 {
                let s = 2.0 + 39.0 * i as f64 / 20.0;
                let t = -0.6 + 1.2 * j as f64 / 20.0;
                let g = sys.metric.value(&DVector::from_row_slice(&[s, t])).unwrap();
                assert!(is_positive_definite(&g));
            }
        }
    }

    #[test]
    fn analytic_open_partials_match_differences() {
        let sys = dimensionless_system(&DimensionlessParams::printed()).unwrap();
        let q = DVector::from_row_slice(&[13.0, 0.27]);
        let exact = sys.metric.partials(&q).unwrap();
        let fd = crate::geometry::fd_partials_default(|x| sys.metric.value(x), &q).unwrap();
        for k in 0..2 {
            assert!((&exact[k] - &fd[k]).amax() < 1e-7 * (1.0 + exact[k].amax()));
        }
        let grad = sys.potential.gradient(&q).unwrap();
        let fd = crate::geometry::fd_partials_default(|x| sys.potential.value(x), &q).unwrap();
        assert!((grad[0] - fd[0]).abs() < 1e-9 && (grad[1] - fd[1]).abs() < 1e-8);
    }

    #[test]
    fn family_at_equilibrium() {
        let m = BallBeamModel::reference().unwrap();
        let pt = m.family_point(22.0, 0.0).unwrap();
        assert_eq!(pt.alpha, 0.0);
        assert!((pt.psi - 1.0).abs() < 1e-14);
        assert!(pt.y.abs() < 1e-12);
        assert!((pt.g_hat[0][0] - 1.1031).abs() < 1e-15);
        assert!((pt.g_hat[0][1] + 0.1803).abs() < 1e-3);
        assert!((pt.g_hat[1][1] - 0.3064).abs() < 1e-3);
        assert!((pt.sigma - 1.0377).abs() < 1e-3);
        assert!((pt.mu - 0.8025).abs() < 1e-3);
        assert!(pt.v_hat_grad[0].abs() < 1e-12 && pt.v_hat_grad[1].abs() < 1e-12);
    }

    #[test]
    fn family_partials_match_differences() {
        let m = BallBeamModel::reference().unwrap();
        let closed = m.closed_loop_family().unwrap();
        for &(s, t) in &[(5.0, -0.4), (22.0, 0.1), (37.0, 0.35)] {
            let q = DVector::from_row_slice(&[s, t]);
            let exact = closed.metric.partials(&q).unwrap();
            let fd = crate::geometry::fd_partials_default(|x| closed.metric.value(x), &q).unwrap();
            for k in 0..2 {
                assert!((&exact[k] - &fd[k]).amax() < 1e-6 * (1.0 + exact[k].amax()), "{s} {t} {k}");
            }
            let grad = closed.potential.gradient(&q).unwrap();
            let fd = crate::geometry::fd_partials_default(|x| closed.potential.value(x), &q).unwrap();
            assert!((grad[0] - fd[0]).abs().max((grad[1] - fd[1]).abs()) < 1e-7 * (1.0 + grad.amax()), "{s} {t}");
        }
    }

    #[test]
    fn lambda_row_is_sigma_mu() {
        let m = BallBeamModel::reference().unwrap();
        let open = m.open_loop_system().unwrap();
        let closed = m.closed_loop_family().unwrap();
        let q = DVector::from_row_slice(&[17.0, -0.2]);
        let lam = crate::matching::lambda_tensor(&open, &closed, &q).unwrap();
        let pt = m.family_point(17.0, -0.2).unwrap();
        assert!((lam[(0, 0)] - pt.sigma).abs() < 1e-10);
        assert!((lam[(0, 1)] - pt.mu).abs() < 1e-10);
    }

    #[test]
    fn linearization_is_admissible_and_restoring() {
        let m = BallBeamModel::reference().unwrap();
        let closed = m.closed_loop_family().unwrap();
        let fb = m.linearize_control(&closed).unwrap();
        assert!(fb.a.row(0).amax() < 1e-7 && fb.b.row(0).amax() < 1e-7 && fb.v[0].abs() < 1e-7);
        // A ball beyond the target needs the beam tilted down towards it.
        assert!(fb.a[(1, 0)] > 0.0);
    }
}
