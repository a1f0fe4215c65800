//! The explicit closed-loop family `(ĝ, V̂, Ĉ)` for the rescaled ball-and-beam.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::kinematics::Kinematics;
use super::tuning::TuningFunctions;
use crate::geometry::{DissipationField, MetricField, ScalarField};
use crate::quadrature::{CumulativeTable, DEFAULT_ABS_TOL};
use crate::{Error, Result};

/// Nodes of the cached α-tables.
pub const TABLE_NODES: usize = 2001;

/// Cached one-dimensional integrals in `α`, all anchored at `α = 0`.
pub(crate) struct FamilyCore {
    kin: Kinematics,
    tuning: TuningFunctions,
    sign: f64,
    s0: f64,
    log_psi: CumulativeTable,
    psi_int: CumulativeTable,
    j: CumulativeTable,
    i1: CumulativeTable,
    i2: CumulativeTable,
}

/// Every quantity of the family at one configuration, with first partials
/// in `(s, θ)` where the metric and potential need them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyPoint {
    pub alpha: f64,
    /// `α′(θ)`, equal to the open-loop `g₁₂`.
    pub p: f64,
    pub psi: f64,
    pub y: f64,
    pub sigma: f64,
    pub mu: f64,
    pub g_hat: [[f64; 2]; 2],
    pub g_hat_ds: [[f64; 2]; 2],
    pub g_hat_dtheta: [[f64; 2]; 2],
    pub v_hat: f64,
    pub v_hat_grad: [f64; 2],
}

impl FamilyCore {
    pub(crate) fn build(
        kin: Kinematics,
        tuning: TuningFunctions,
        s0: f64,
        alpha_range: (f64, f64),
    ) -> Result<Self> {
        let (lo, hi) = alpha_range;
        tuning.validate(lo, hi, TABLE_NODES)?;
        let tol = DEFAULT_ABS_TOL;
        let mu1 = tuning.mu1.clone();
        let sign = tuning.psi.sign();

        let m = mu1.clone();
        let log_psi = CumulativeTable::build(
            move |a| {
                let (v, d1, _) = m.eval(a);
                v / d1
            },
            lo,
            hi,
            0.0,
            TABLE_NODES,
            tol,
        )?;
        let psi = |a: f64| (5.0 * sign * log_psi.value(a).unwrap_or(f64::NAN)).exp();
        let psi_int = CumulativeTable::build(psi, lo, hi, 0.0, TABLE_NODES, tol)?;
        let d1 = |a: f64| mu1.eval(a).1;
        let j = CumulativeTable::build(
            |a| 1.0 / (d1(a) * psi(a).powi(2)),
            lo,
            hi,
            0.0,
            TABLE_NODES,
            tol,
        )?;
        let i1 = CumulativeTable::build(
            |a| a.sin() / (d1(a) * psi(a)),
            lo,
            hi,
            0.0,
            TABLE_NODES,
            tol,
        )?;
        let i2 = CumulativeTable::build(
            |a| a.sin() * psi_int.value(a).unwrap_or(f64::NAN) / (d1(a) * psi(a)),
            lo,
            hi,
            0.0,
            TABLE_NODES,
            tol,
        )?;
        Ok(Self {
            kin,
            tuning,
            sign,
            s0,
            log_psi,
            psi_int,
            j,
            i1,
            i2,
        })
    }

    pub(crate) fn psi(&self, alpha: f64) -> Result<f64> {
        Ok((5.0 * self.sign * self.log_psi.value(alpha)?).exp())
    }

    pub(crate) fn at(&self, s: f64, theta: f64) -> Result<FamilyPoint> {
        if s == 0.0 {
            return Err(Error::Singular {
                what: "closed-loop family at s = 0",
                q: vec![s, theta],
            });
        }
        let kd = self.kin.derivatives(theta)?;
        let (alpha, p, pp) = (kd.alpha, kd.d1, kd.d2);
        let (m, m1, m2) = self.tuning.mu1.eval(alpha);
        if m1 == 0.0 {
            return Err(Error::Tuning(format!("mu1' vanishes at alpha = {alpha}")));
        }
        let sa = alpha.sin();

        let psi = self.psi(alpha)?;
        let psi_a = 5.0 * self.sign * m / m1 * psi;
        let big_psi = self.psi_int.value(alpha)?;
        let j = self.j.value(alpha)?;
        let j_a = 1.0 / (m1 * psi * psi);
        let i1 = self.i1.value(alpha)?;
        let i1_a = sa / (m1 * psi);
        let i2 = self.i2.value(alpha)?;
        let i2_a = sa * big_psi / (m1 * psi);

        let y = psi * s - self.s0 + big_psi;
        let y_s = psi;
        let y_t = p * (psi_a * s + psi);

        let h = self.tuning.h.value(y);
        let h_y = self.tuning.h.derivative(y);
        let g11 = psi * psi * (h + 10.0 * j);
        let g11_s = psi * psi * h_y * y_s;
        let g11_t = p * (2.0 * psi * psi_a * (h + 10.0 * j) + psi * psi * 10.0 * j_a)
            + psi * psi * h_y * y_t;

        let sigma = m - m1 / (5.0 * s);
        let sigma_s = m1 / (5.0 * s * s);
        let sigma_t = p * (m1 - m2 / (5.0 * s));
        let mu = m1 / (5.0 * s * p);
        if mu == 0.0 || !mu.is_finite() {
            return Err(Error::Singular {
                what: "closed-loop family (mu = 0)",
                q: vec![s, theta],
            });
        }
        let mu_s = -mu / s;
        let mu_t = m2 / (5.0 * s) - m1 * pp / (5.0 * s * p * p);

        // Open-loop g₁₁ = 1 and g₁₂ = α′.
        let g12 = (1.0 - sigma * g11) / mu;
        let g12_s = (-sigma_s * g11 - sigma * g11_s) / mu - g12 * mu_s / mu;
        let g12_t = (-sigma_t * g11 - sigma * g11_t) / mu - g12 * mu_t / mu;
        let g22 = (p - sigma * g12) / mu;
        let g22_s = (-sigma_s * g12 - sigma * g12_s) / mu - g22 * mu_s / mu;
        let g22_t = (pp - sigma_t * g12 - sigma * g12_t) / mu - g22 * mu_t / mu;

        let w = self.tuning.w.value(y);
        let w_y = self.tuning.w.derivative(y);
        let v_hat = w + 5.0 * (y + self.s0) * i1 - 5.0 * i2;
        let v_s = (w_y + 5.0 * i1) * y_s;
        let v_t = (w_y + 5.0 * i1) * y_t + 5.0 * p * ((y + self.s0) * i1_a - i2_a);

        Ok(FamilyPoint {
            alpha,
            p,
            psi,
            y,
            sigma,
            mu,
            g_hat: [[g11, g12], [g12, g22]],
            g_hat_ds: [[g11_s, g12_s], [g12_s, g22_s]],
            g_hat_dtheta: [[g11_t, g12_t], [g12_t, g22_t]],
            v_hat,
            v_hat_grad: [v_s, v_t],
        })
    }

    /// `Ĉ = (Ĉ₁, Ĉ₂)` with `Ĉ₁ = (g₁ᵢĝ^{i1})⁻¹(C₁ − g₁ⱼĝ^{j2}Ĉ₂)` and `C₁ = 0`.
    pub(crate) fn dissipation(&self, s: f64, theta: f64, sdot: f64, thetadot: f64) -> Result<[f64; 2]> {
        let pt = self.at(s, theta)?;
        let [[a, b], [_, d]] = pt.g_hat;
        let det = a * d - b * b;
        if det == 0.0 || !det.is_finite() {
            return Err(Error::Singular {
                what: "closed-loop metric",
                q: vec![s, theta],
            });
        }
        // Row one of λ = g ĝ⁻¹ with g₁· = (1, α′).
        let lam11 = (d - pt.p * b) / det;
        let lam12 = (-b + pt.p * a) / det;
        let c2 = self.tuning.damping.value(b, pt.sigma, pt.mu, sdot, thetadot);
        Ok([-lam12 * c2 / lam11, c2])
    }
}

fn to_dmatrix(m: [[f64; 2]; 2]) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]])
}

pub(crate) struct FamilyMetric(pub(crate) Arc<FamilyCore>);
pub(crate) struct FamilyPotential(pub(crate) Arc<FamilyCore>);
pub(crate) struct FamilyDissipation(pub(crate) Arc<FamilyCore>);

impl MetricField<f64> for FamilyMetric {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(to_dmatrix(self.0.at(q[0], q[1])?.g_hat))
    }

    fn partials(&self, q: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        let pt = self.0.at(q[0], q[1])?;
        Ok(vec![to_dmatrix(pt.g_hat_ds), to_dmatrix(pt.g_hat_dtheta)])
    }
}

impl ScalarField<f64> for FamilyPotential {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, q: &DVector<f64>) -> Result<f64> {
        Ok(self.0.at(q[0], q[1])?.v_hat)
    }

    fn gradient(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        let g = self.0.at(q[0], q[1])?.v_hat_grad;
        Ok(DVector::from_row_slice(&g))
    }
}

impl DissipationField<f64> for FamilyDissipation {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<DVector<f64>> {
        let c = self.0.dissipation(q[0], q[1], qdot[0], qdot[1])?;
        Ok(DVector::from_row_slice(&c))
    }

    fn odd_in_velocity(&self) -> bool {
        true
    }
}
