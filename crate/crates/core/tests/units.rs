use std::sync::Arc;

use matchctl::ballbeam::{default_tuning, physical_system, rescale_params, BallBeamModel, PhysicalParams};
use matchctl::sim::{
    DivergenceBounds, IdealActuator, MatchingController, SiController, SimConfig, Simulation,
};
use matchctl::{ConfigState, Trajectory};
use nalgebra::DVector;

fn solid_ball_model() -> BallBeamModel {
    let phys = PhysicalParams::bench().with_solid_ball();
    let (dims, _) = rescale_params(&phys).unwrap();
    BallBeamModel::new(phys, dims, default_tuning()).unwrap()
}

/// Rescaled and SI runs of the same nonlinear closed loop over `seconds`.
fn paired_runs(seconds: f64, dt: f64, initial: [f64; 4]) -> (BallBeamModel, Trajectory, Trajectory) {
    let m = solid_ball_model();
    let tau = m.scales.time;
    let x0 = ConfigState {
        q: DVector::from_row_slice(&initial[..2]),
        qdot: DVector::from_row_slice(&initial[2..]),
    };
    let controller = || MatchingController {
        open: m.open_loop_system().unwrap(),
        closed: m.closed_loop_family().unwrap(),
    };

    let open = m.open_loop_system().unwrap();
    let mut cfg = SimConfig::new(2, seconds / tau);
    cfg.dt = dt;
    cfg.divergence = DivergenceBounds::unbounded(2);
    cfg.time_unit_seconds = tau;
    let rescaled = Simulation {
        system: &open,
        controller: Box::new(controller()),
        actuator: Arc::new(IdealActuator),
        energy: None,
        config: &cfg,
    }
    .run(&x0)
    .unwrap();

    let plant = physical_system(&m.phys).unwrap();
    let mut cfg_si = SimConfig::new(2, seconds);
    cfg_si.dt = dt * tau;
    cfg_si.divergence = DivergenceBounds::unbounded(2);
    cfg_si.time_unit_seconds = 1.0;
    let si = Simulation {
        system: &plant,
        controller: Box::new(SiController {
            inner: controller(),
            scales: m.scales,
        }),
        actuator: Arc::new(IdealActuator),
        energy: None,
        config: &cfg_si,
    }
    .run(&m.scales.state_to_si(&x0))
    .unwrap();
    (m, rescaled, si)
}

/// Largest componentwise deviation relative to the component's range.
fn max_relative_deviation(m: &BallBeamModel, rescaled: &Trajectory, si: &Trajectory) -> f64 {
    assert_eq!(rescaled.records.len(), si.records.len());
    let converted: Vec<[f64; 5]> = rescaled
        .records
        .iter()
        .map(|r| {
            let x = m.scales.state_to_si(&ConfigState {
                q: DVector::from_vec(r.q.clone()),
                qdot: DVector::from_vec(r.qdot.clone()),
            });
            [r.t * m.scales.time, x.q[0], x.q[1], x.qdot[0], x.qdot[1]]
        })
        .collect();
    let direct: Vec<[f64; 5]> = si
        .records
        .iter()
        .map(|r| [r.t, r.q[0], r.q[1], r.qdot[0], r.qdot[1]])
        .collect();
    let mut worst = 0.0_f64;
    for c in 0..5 {
        let scale = converted.iter().fold(0.0_f64, |a, x| a.max(x[c].abs()));
        for (a, b) in converted.iter().zip(&direct) {
            worst = worst.max((a[c] - b[c]).abs() / scale);
        }
    }
    worst
}

#[test]
fn solid_ball_coefficients_rescale_exactly() {
    let m = solid_ball_model();
    assert!(m.phys.ball_inertia_discrepancy() < 1e-12);
    let plant = physical_system(&m.phys).unwrap();
    let open = m.open_loop_system().unwrap();
    let x = ConfigState {
        q: DVector::from_row_slice(&[25.0, 0.2]),
        qdot: DVector::from_row_slice(&[0.4, -1.0]),
    };
    let xs = m.scales.state_to_si(&x);
    let e = m.scales.energy;
    let t_dim = 0.5 * x.qdot.dot(&(open.metric.value(&x.q).unwrap() * &x.qdot));
    let t_si = 0.5 * xs.qdot.dot(&(plant.metric.value(&xs.q).unwrap() * &xs.qdot));
    assert!((t_si / e - t_dim).abs() < 1e-12 * t_dim.abs());
    let v_dim = open.potential.value(&x.q).unwrap();
    let v_si = plant.potential.value(&xs.q).unwrap();
    assert!((v_si / e - v_dim).abs() < 1e-12 * v_dim.abs());
}

#[test]
fn short_runs_agree_through_scales() {
    let (m, rescaled, si) = paired_runs(0.5, 1e-3, [25.0, 0.0, 0.0, 0.0]);
    assert!(rescaled.completed() && si.completed());
    let dev = max_relative_deviation(&m, &rescaled, &si);
    assert!(dev < 1e-6, "deviation {dev:e}");
}
