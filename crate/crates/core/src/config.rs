//! JSON run configuration: physical parameters, dimensionless overrides,
//! tuning, simulation settings and the residual grid.

use std::path::Path;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ballbeam::{
    default_tuning, rescale_params, BallBeamModel, DimensionlessParams, PhysicalParams,
    TuningFunctions,
};
use crate::geometry::ConfigState;
use crate::sim::{ControllerMode, DivergenceBounds, SimConfig, VelocityEstimator};
use crate::{Error, Result};

/// The configuration file shipped with the crate.
pub const DEFAULT_CONFIG_JSON: &str = include_str!("../config/default.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ParamSource {
    /// The constants used in the experiments.
    #[default]
    Printed,
    /// Rescaled from the physical section.
    Physical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DimensionlessOverrides {
    #[serde(default)]
    pub base: ParamSource,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub a3: Option<f64>,
    pub a4: Option<f64>,
    pub a5: Option<f64>,
    pub a6: Option<f64>,
    pub a7: Option<f64>,
    pub s0_star: Option<f64>,
}

impl DimensionlessOverrides {
    pub fn resolve(&self, phys: &PhysicalParams) -> Result<DimensionlessParams> {
        let mut d = match self.base {
            ParamSource::Printed => DimensionlessParams::printed(),
            ParamSource::Physical => rescale_params(phys)?.0,
        };
        let slots = [
            (&mut d.a1, self.a1),
            (&mut d.a2, self.a2),
            (&mut d.a3, self.a3),
            (&mut d.a4, self.a4),
            (&mut d.a5, self.a5),
            (&mut d.a6, self.a6),
            (&mut d.a7, self.a7),
            (&mut d.s0_star, self.s0_star),
        ];
        for (slot, v) in slots {
            if let Some(v) = v {
                *slot = v;
            }
        }
        d.validate()?;
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    /// Physical seconds.
    pub duration_seconds: f64,
    pub mode: ControllerMode,
    pub sample_rate_hz: f64,
    pub estimator: VelocityEstimator,
    pub v_sat: Option<f64>,
    #[serde(default)]
    pub divergence: Option<DivergenceBounds>,
    #[serde(default = "one")]
    pub record_stride: usize,
    /// `(s, θ, ṡ, θ̇)` in rescaled units.
    pub initial: [f64; 4],
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn points(&self) -> Vec<f64> {
        if self.n <= 1 {
            return vec![self.lo];
        }
        (0..self.n)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub s: Axis,
    pub theta: Axis,
}

impl GridSpec {
    /// Parses `"s=LO:HI:N,theta=LO:HI:N"`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = None;
        let mut theta = None;
        for part in text.split(',') {
            let (name, spec) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("grid entry `{part}` is not NAME=LO:HI:N")))?;
            let fields: Vec<&str> = spec.split(':').collect();
            if fields.len() != 3 {
                return Err(Error::Config(format!("grid entry `{part}` is not NAME=LO:HI:N")));
            }
            let num = |x: &str| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("grid bound `{x}` is not a number")))
            };
            let n = fields[2]
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("grid count `{}` is not an integer", fields[2])))?;
            let axis = Axis {
                lo: num(fields[0])?,
                hi: num(fields[1])?,
                n,
            };
            match name.trim() {
                "s" => s = Some(axis),
                "theta" => theta = Some(axis),
                other => return Err(Error::Config(format!("unknown grid axis `{other}`"))),
            }
        }
        let grid = Self {
            s: s.ok_or_else(|| Error::Config("grid is missing the s axis".into()))?,
            theta: theta.ok_or_else(|| Error::Config("grid is missing the theta axis".into()))?,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, a) in [("s", self.s), ("theta", self.theta)] {
            if a.n == 0 || !a.lo.is_finite() || !a.hi.is_finite() || a.hi < a.lo {
                return Err(Error::Config(format!("grid.{name} must have n >= 1 and lo <= hi")));
            }
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        let th = self.theta.points();
        self.s
            .points()
            .into_iter()
            .flat_map(|s| th.iter().map(move |&t| (s, t)))
            .collect()
    }
    /// Grid configurations with velocities drawn from `ṡ ∈ [−2, 2]`, `θ̇ ∈ [−1, 1]`.
    pub fn states(&self, seed: u64) -> Vec<ConfigState<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.points()
            .into_iter()
            .map(|(s, t)| ConfigState {
                q: DVector::from_row_slice(&[s, t]),
                qdot: DVector::from_row_slice(&[
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-1.0..1.0),
                ]),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub physical: PhysicalParams,
    #[serde(default)]
    pub dimensionless_overrides: DimensionlessOverrides,
    #[serde(default = "default_tuning")]
    pub tuning: TuningFunctions,
    pub sim: SimSection,
    pub grid: GridSpec,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::from_json(DEFAULT_CONFIG_JSON).expect("shipped configuration parses")
    }
}

impl ModelConfig {
    /// Parses and validates; errors name the offending key.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("{path}: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.physical.validate()?;
        self.dimensionless_overrides.resolve(&self.physical)?;
        self.grid.validate()?;
        if !(self.sim.duration_seconds > 0.0) {
            return Err(Error::Config("sim.duration_seconds must be positive".into()));
        }
        Ok(())
    }

    pub fn dimensionless(&self) -> Result<DimensionlessParams> {
        self.dimensionless_overrides.resolve(&self.physical)
    }

    pub fn build_model(&self) -> Result<BallBeamModel> {
        BallBeamModel::new(self.physical.clone(), self.dimensionless()?, self.tuning.clone())
    }

    pub fn sim_config(&self, model: &BallBeamModel) -> Result<SimConfig> {
        let s = &self.sim;
        let cfg = SimConfig {
            dt: s.dt,
            duration: s.duration_seconds / model.scales.time,
            mode: s.mode,
            sample_rate_hz: s.sample_rate_hz,
            estimator: s.estimator,
            v_sat: s.v_sat,
            divergence: s
                .divergence
                .clone()
                .unwrap_or_else(|| DivergenceBounds::ball_beam(model.dims.s0_star)),
            time_unit_seconds: model.scales.time,
            record_stride: s.record_stride,
        };
        cfg.validate(2)?;
        Ok(cfg)
    }

    pub fn initial_state(&self) -> ConfigState<f64> {
        let x = self.sim.initial;
        ConfigState {
            q: DVector::from_row_slice(&x[..2]),
            qdot: DVector::from_row_slice(&x[2..]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_file_reproduces_defaults() {
        let cfg = ModelConfig::default();
        assert_eq!(cfg.physical, PhysicalParams::bench());
        assert_eq!(cfg.dimensionless().unwrap(), DimensionlessParams::printed());
        assert_eq!(cfg.tuning, default_tuning());
        let model = cfg.build_model().unwrap();
        let sim = cfg.sim_config(&model).unwrap();
        assert_eq!(sim.divergence, DivergenceBounds::ball_beam(22.0));
        assert_eq!(sim.sample_rate_hz, 300.0);
        assert_eq!(cfg.initial_state().q[0], 5.0);
    }

    #[test]
    fn errors_name_the_key() {
        let bad = DEFAULT_CONFIG_JSON.replace("\"l_b\": 0.43", "\"l_b\": \"long\"");
        let msg = ModelConfig::from_json(&bad).unwrap_err().to_string();
        assert!(msg.contains("physical.l_b"), "{msg}");
        let bad = DEFAULT_CONFIG_JSON.replace("\"grav\"", "\"gravity\"");
        let msg = ModelConfig::from_json(&bad).unwrap_err().to_string();
        assert!(msg.contains("gravity"), "{msg}");
    }

    #[test]
    fn physical_base_uses_rescaled_values() {
        let mut cfg = ModelConfig::default();
        cfg.dimensionless_overrides = DimensionlessOverrides {
            base: ParamSource::Physical,
            a7: Some(0.0),
            ..Default::default()
        };
        let d = cfg.dimensionless().unwrap();
        assert!((d.a2 - 0.03 / 0.43).abs() < 1e-15);
        assert_eq!(d.a7, 0.0);
    }

    #[test]
    fn grid_parsing() {
        let g = GridSpec::parse("s=5:38:21,theta=-0.4:0.4:21").unwrap();
        assert_eq!(g.points().len(), 441);
        assert_eq!(g.s.points()[20], 38.0);
        assert!(GridSpec::parse("s=5:38").is_err());
        assert!(GridSpec::parse("s=5:38:3").is_err());
        assert!(GridSpec::parse("s=5:38:3,phi=0:1:2").is_err());
    }
}
