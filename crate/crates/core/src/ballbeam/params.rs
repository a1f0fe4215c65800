use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::geometry::ConfigState;

use crate::{Error, Result};

/// SI parameters of the laboratory ball-and-beam with its DC servo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    /// Beam length, m.
    pub l_b: f64,
    /// Link length, m.
    pub l_l: f64,
    /// Gear radius, m.
    pub r_g: f64,
    /// Ball radius, m.
    pub r_ball: f64,
    pub m_ball: f64,
    pub m_beam: f64,
    pub m_link: f64,
    /// Ball inertia, kg·m².
    pub i_ball: f64,
    pub i_beam: f64,
    /// Effective servo inertia, kg·m².
    pub i_servo: f64,
    pub grav: f64,
    /// Desired ball position, m.
    pub s0: f64,
    /// Servo dissipation, kg·m²/s.
    pub c0: f64,
    /// Armature resistance, Ω.
    pub r_m: f64,
    /// Gear ratio.
    pub n_g: f64,
    /// Motor torque constant, V·s.
    pub k_m: f64,
}

impl PhysicalParams {
    pub fn bench() -> Self {
        Self {
            l_b: 0.43,
            l_l: 0.11,
            r_g: 0.03,
            r_ball: 0.01,
            m_ball: 0.07,
            m_beam: 0.15,
            m_link: 0.01,
            i_ball: 4.25e-6,
            i_beam: 0.001,
            i_servo: 0.002,
            grav: 9.8,
            s0: 0.22,
            c0: 9.33e-10,
            r_m: 2.6,
            n_g: 70.5,
            k_m: 0.00767,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("l_b", self.l_b),
            ("l_l", self.l_l),
            ("r_g", self.r_g),
            ("r_ball", self.r_ball),
            ("m_ball", self.m_ball),
            ("m_beam", self.m_beam),
            ("m_link", self.m_link),
            ("i_ball", self.i_ball),
            ("i_beam", self.i_beam),
            ("i_servo", self.i_servo),
            ("grav", self.grav),
            ("r_m", self.r_m),
            ("n_g", self.n_g),
            ("k_m", self.k_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("physical.{name} must be positive, got {v}")));
            }
        }
        if !(self.c0 >= 0.0) {
            return Err(Error::Config("physical.c0 must be nonnegative".into()));
        }
        if !(self.s0 > 0.0 && self.s0 < self.l_b) {
            return Err(Error::Config(format!(
                "physical.s0 = {} must lie strictly inside the beam (0, {})",
                self.s0, self.l_b
            )));
        }
        Ok(())
    }

    /// Solid-sphere inertia `⅖ m_B r_B²`.
    pub fn solid_ball_inertia(&self) -> f64 {
        0.4 * self.m_ball * self.r_ball * self.r_ball
    }

    /// Relative gap between `i_ball` and the solid-sphere inertia.
    pub fn ball_inertia_discrepancy(&self) -> f64 {
        (self.i_ball - self.solid_ball_inertia()).abs() / self.solid_ball_inertia()
    }

    /// Copy with `i_ball` replaced by the solid-sphere value, which the
    /// rescaled kinetic energy assumes.
    pub fn with_solid_ball(&self) -> Self {
        Self {
            i_ball: self.solid_ball_inertia(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionlessParams {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    pub a6: f64,
    pub a7: f64,
    pub s0_star: f64,
}

impl DimensionlessParams {
    /// Values used for the experiments.
    pub fn printed() -> Self {
        Self {
            a1: 0.2547,
            a2: 0.0588,
            a3: 236.294,
            a4: 471.126,
            a5: 0.1889,
            a6: 42.0,
            a7: 5e-6,
            s0_star: 22.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a1 > 0.0 && self.a1 < 1.0) {
            return Err(Error::Config(format!("a1 = {} must lie in (0, 1)", self.a1)));
        }
        if !(self.a2 > 0.0 && self.a2 < self.a1) {
            return Err(Error::Config(format!(
                "a2 = {} must lie in (0, a1)",
                self.a2
            )));
        }
        if !(self.a3 > 1.0 && self.a4 > 1.0) {
            return Err(Error::Config("a3 and a4 must exceed 1".into()));
        }
        if !(self.a7 >= 0.0) {
            return Err(Error::Config("a7 must be nonnegative".into()));
        }
        for (name, v) in [("a5", self.a5), ("a6", self.a6), ("s0_star", self.s0_star)] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// Length `L`, time `τ` and energy `E0` scales of the rescaled model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitScales {
    pub length: f64,
    pub time: f64,
    pub energy: f64,
}

impl UnitScales {
    pub fn of(phys: &PhysicalParams) -> Self {
        Self {
            length: phys.r_ball,
            time: (2.0 * phys.r_ball / (5.0 * phys.grav)).sqrt(),
            energy: phys.m_ball * phys.grav * phys.r_ball,
        }
    }

    /// `(s, θ, ṡ, θ̇)` from rescaled to SI units.
    pub fn state_to_si(&self, x: &ConfigState<f64>) -> ConfigState<f64> {
        ConfigState {
            q: DVector::from_row_slice(&[x.q[0] * self.length, x.q[1]]),
            qdot: DVector::from_row_slice(&[
                x.qdot[0] * self.length / self.time,
                x.qdot[1] / self.time,
            ]),
        }
    }

    pub fn state_from_si(&self, x: &ConfigState<f64>) -> ConfigState<f64> {
        ConfigState {
            q: DVector::from_row_slice(&[x.q[0] / self.length, x.q[1]]),
            qdot: DVector::from_row_slice(&[
                x.qdot[0] * self.time / self.length,
                x.qdot[1] * self.time,
            ]),
        }
    }

    /// Generalized force `(N, N·m)` from its rescaled value.
    pub fn force_to_si(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_row_slice(&[u[0] * self.energy / self.length, u[1] * self.energy])
    }

    pub fn force_from_si(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_row_slice(&[u[0] * self.length / self.energy, u[1] / self.energy])
    }
}

pub fn rescale_params(phys: &PhysicalParams) -> Result<(DimensionlessParams, UnitScales)> {
    phys.validate()?;
    let p = phys;
    let dims = DimensionlessParams {
        a1: p.l_l / p.l_b,
        a2: p.r_g / p.l_b,
        a3: (p.i_beam + p.i_ball) / p.i_ball,
        a4: p.i_servo / p.i_ball,
        a5: p.m_link * p.r_g / (2.0 * p.m_ball * p.r_ball),
        a6: p.l_b * (p.m_beam + p.m_link) / (2.0 * p.m_ball * p.r_ball),
        a7: (5.0 / (2.0 * p.r_ball.powi(3) * p.grav)).sqrt() * p.c0 / p.m_ball,
        s0_star: p.s0 / p.r_ball,
    };
    Ok((dims, UnitScales::of(p)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRow {
    pub name: String,
    pub derived: f64,
    pub printed: f64,
    pub relative_discrepancy: f64,
}

/// Side-by-side comparison of rescaled physical values and the printed set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsReport {
    pub rows: Vec<ParamRow>,
    pub scales: UnitScales,
    pub ball_inertia_discrepancy: f64,
}

pub fn params_report(phys: &PhysicalParams, printed: &DimensionlessParams) -> Result<ParamsReport> {
    let (d, scales) = rescale_params(phys)?;
    let pairs = [
        ("a1", d.a1, printed.a1),
        ("a2", d.a2, printed.a2),
        ("a3", d.a3, printed.a3),
        ("a4", d.a4, printed.a4),
        ("a5", d.a5, printed.a5),
        ("a6", d.a6, printed.a6),
        ("a7", d.a7, printed.a7),
        ("s0_star", d.s0_star, printed.s0_star),
    ];
    Ok(ParamsReport {
        rows: pairs
            .iter()
            .map(|&(name, derived, printed)| ParamRow {
                name: name.to_string(),
                derived,
                printed,
                relative_discrepancy: (derived - printed).abs() / printed.abs(),
            })
            .collect(),
        scales,
        ball_inertia_discrepancy: phys.ball_inertia_discrepancy(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_and_force_conversions_invert() {
        let sc = UnitScales::of(&PhysicalParams::bench());
        let x = ConfigState {
            q: DVector::from_row_slice(&[22.0, 0.1]),
            qdot: DVector::from_row_slice(&[-0.5, 3.6]),
        };
        let si = sc.state_to_si(&x);
        assert!((si.q[0] - 0.22).abs() < 1e-15);
        assert!((si.qdot[1] - 3.6 / sc.time).abs() < 1e-12);
        let back = sc.state_from_si(&si);
        assert!((back.q - &x.q).amax() < 1e-14 && (back.qdot - &x.qdot).amax() < 1e-14);
        let u = DVector::from_row_slice(&[0.3, -2.0]);
        assert!((sc.force_from_si(&sc.force_to_si(&u)) - &u).amax() < 1e-14);
    }

    #[test]
    fn table_values_rescale() {
        let (d, s) = rescale_params(&PhysicalParams::bench()).unwrap();
        assert!((d.a1 - 0.11 / 0.43).abs() < 1e-15);
        assert!((d.a3 - 236.294).abs() < 1e-3);
        assert!((d.a4 - 0.002 / 4.25e-6).abs() < 1e-9);
        assert!((d.s0_star - 22.0).abs() < 1e-12);
        assert!(d.a7 > 0.0 && d.a7.is_finite());
        assert!((s.time - (0.02_f64 / 49.0).sqrt()).abs() < 1e-15);
        assert!((s.energy - 0.07 * 9.8 * 0.01).abs() < 1e-15);
    }

    #[test]
    fn table_ball_inertia_is_not_a_solid_sphere() {
        let p = PhysicalParams::bench();
        assert!(p.ball_inertia_discrepancy() > 0.5);
        assert_eq!(p.with_solid_ball().ball_inertia_discrepancy(), 0.0);
    }

    #[test]
    fn rejects_bad_values() {
        let mut p = PhysicalParams::bench();
        p.s0 = 0.5;
        assert!(p.validate().is_err());
        let mut d = DimensionlessParams::printed();
        d.a1 = 1.5;
        assert!(d.validate().is_err());
        DimensionlessParams::printed().validate().unwrap();
    }

    #[test]
    fn report_flags_a2() {
        let r = params_report(&PhysicalParams::bench(), &DimensionlessParams::printed()).unwrap();
        let a2 = r.rows.iter().find(|r| r.name == "a2").unwrap();
        assert!((a2.derived - 0.0698).abs() < 1e-4);
        assert!(a2.relative_discrepancy > 0.1);
        let a3 = r.rows.iter().find(|r| r.name == "a3").unwrap();
        assert!(a3.relative_discrepancy < 1e-4);
    }
}
