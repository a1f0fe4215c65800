use serde::{Deserialize, Serialize};

use super::params::{PhysicalParams, UnitScales};

/// Default amplifier limit, V.
pub const DEFAULT_V_SAT: f64 = 5.0;

/// Permanent-magnet DC servo: `v = R_m τ / (K_m N_g) + K_m N_g θ̇`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServoMotor {
    pub r_m: f64,
    pub n_g: f64,
    pub k_m: f64,
    pub v_sat: f64,
    pub scales: UnitScales,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoltageCommand {
    pub v_in: f64,
    pub saturated: bool,
}

impl ServoMotor {
    pub fn new(phys: &PhysicalParams, scales: UnitScales, v_sat: f64) -> Self {
        Self {
            r_m: phys.r_m,
            n_g: phys.n_g,
            k_m: phys.k_m,
            v_sat,
            scales,
        }
    }

    fn back_emf_constant(&self) -> f64 {
        self.k_m * self.n_g
    }

    /// Voltage for an SI torque and servo rate, before clamping.
    pub fn voltage_si(&self, torque: f64, thetadot: f64) -> f64 {
        let k = self.back_emf_constant();
        self.r_m * torque / k + k * thetadot
    }

    /// Torque delivered by voltage `v_in` at servo rate `thetadot` (SI).
    pub fn torque_si(&self, v_in: f64, thetadot: f64) -> f64 {
        let k = self.back_emf_constant();
        k * (v_in - k * thetadot) / self.r_m
    }

    /// Dimensionless torque and rate to a clamped input voltage.
    pub fn torque_to_voltage(&self, u2: f64, thetadot: f64) -> VoltageCommand {
        let v = self.voltage_si(u2 * self.scales.energy, thetadot / self.scales.time);
        if v.abs() > self.v_sat {
            VoltageCommand {
                v_in: self.v_sat.copysign(v),
                saturated: true,
            }
        } else {
            VoltageCommand {
                v_in: v,
                saturated: false,
            }
        }
    }

    /// Dimensionless torque produced by `v_in` at dimensionless rate `thetadot`.
    pub fn voltage_to_torque(&self, v_in: f64, thetadot: f64) -> f64 {
        self.torque_si(v_in, thetadot / self.scales.time) / self.scales.energy
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn motor() -> ServoMotor {
        let p = PhysicalParams::bench();
        ServoMotor::new(&p, UnitScales::of(&p), DEFAULT_V_SAT)
    }

    #[test]
    fn reference_voltages() {
        let m = motor();
        assert_eq!(m.torque_to_voltage(0.0, 0.0).v_in, 0.0);
        assert!((m.voltage_si(1.0, 0.0) - 4.808).abs() < 1e-3);
        assert!((m.voltage_si(0.0, 1.0) - 0.5407).abs() < 1e-4);
    }

    #[test]
    fn round_trip_and_clamp() {
        let m = motor();
        let cmd = m.torque_to_voltage(0.4, 0.01);
        assert!(!cmd.saturated);
        assert!((m.voltage_to_torque(cmd.v_in, 0.01) - 0.4).abs() < 1e-12);
        let big = m.torque_to_voltage(1e3, 0.0);
        assert!(big.saturated);
        assert_eq!(big.v_in, DEFAULT_V_SAT);
        assert_eq!(m.torque_to_voltage(-1e3, 0.0).v_in, -DEFAULT_V_SAT);
    }
}
