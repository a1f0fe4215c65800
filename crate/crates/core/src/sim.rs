//! Fixed-step RK4 simulation of controlled Lagrangian systems, with an
//! optional zero-order-hold emulation of a digital control loop.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::ballbeam::{BallBeamModel, ServoMotor, UnitScales};
use crate::geometry::{christoffel_first_from_partials, contract_velocities, invert, ConfigState, LagrangianSystem};
use crate::linear::LinearFeedback;
use crate::matching::{closed_loop_energy, control_law, ClosedLoopSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerMode {
    /// Control evaluated at every RK4 stage.
    Continuous,
    /// Zero-order hold at `sample_rate_hz`.
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityEstimator {
    Exact,
    ForwardDifference,
}

/// State box whose exit ends a run as diverged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergenceBounds {
    pub q_lower: Vec<f64>,
    pub q_upper: Vec<f64>,
    /// Bound on `|q̇_i|`.
    pub qdot_max: Vec<f64>,
}

impl DivergenceBounds {
    /// `|s − s0| ≤ 25`, `|θ| ≤ 0.6`, `|ṡ| ≤ 50`, `|θ̇| ≤ 10`.
    pub fn ball_beam(s0: f64) -> Self {
        Self {
            q_lower: vec![s0 - 25.0, -0.6],
            q_upper: vec![s0 + 25.0, 0.6],
            qdot_max: vec![50.0, 10.0],
        }
    }

    pub fn unbounded(n: usize) -> Self {
        Self {
            q_lower: vec![f64::NEG_INFINITY; n],
            q_upper: vec![f64::INFINITY; n],
            qdot_max: vec![f64::INFINITY; n],
        }
    }

    /// Description of the first violated bound.
    pub fn violation(&self, state: &ConfigState<f64>) -> Option<String> {
        for (i, &q) in state.q.iter().enumerate() {
            if !(q >= self.q_lower[i] && q <= self.q_upper[i]) {
                return Some(format!(
                    "q[{i}] = {q} outside [{}, {}]",
                    self.q_lower[i], self.q_upper[i]
                ));
            }
        }
        for (i, &v) in state.qdot.iter().enumerate() {
            if !(v.abs() <= self.qdot_max[i]) {
                return Some(format!("|qdot[{i}]| = {} above {}", v.abs(), self.qdot_max[i]));
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    pub mode: ControllerMode,
    /// Physical sampling rate, Hz.
    pub sample_rate_hz: f64,
    pub estimator: VelocityEstimator,
    /// Amplifier limit in volts; no clamping when absent.
    pub v_sat: Option<f64>,
    pub divergence: DivergenceBounds,
    /// Seconds per unit of simulation time.
    pub time_unit_seconds: f64,
    /// Keep every `record_stride`-th step (the final state is always kept).
    pub record_stride: usize,
}

impl SimConfig {
    pub fn new(n: usize, duration: f64) -> Self {
        Self {
            dt: 1e-3,
            duration,
            mode: ControllerMode::Continuous,
            sample_rate_hz: 300.0,
            estimator: VelocityEstimator::Exact,
            v_sat: None,
            divergence: DivergenceBounds::unbounded(n),
            time_unit_seconds: 1.0,
            record_stride: 1,
        }
    }

    /// Rescaled time, the laboratory divergence box and a 5 V amplifier.
    pub fn ball_beam(model: &BallBeamModel, duration: f64) -> Self {
        Self {
            v_sat: Some(crate::ballbeam::DEFAULT_V_SAT),
            divergence: DivergenceBounds::ball_beam(model.dims.s0_star),
            time_unit_seconds: model.scales.time,
            ..Self::new(2, duration)
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("sim.dt must be positive, got {}", self.dt)));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!(
                "sim.duration must be positive, got {}",
                self.duration
            )));
        }
        if self.mode == ControllerMode::Sampled && !(self.sample_rate_hz > 0.0) {
            return Err(Error::Config("sim.sample_rate_hz must be positive".into()));
        }
        if !(self.time_unit_seconds > 0.0) {
            return Err(Error::Config("sim.time_unit_seconds must be positive".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::Config("sim.record_stride must be at least 1".into()));
        }
        if let Some(v) = self.v_sat {
            if !(v > 0.0) {
                return Err(Error::Config("sim.v_sat must be positive".into()));
            }
        }
        let d = &self.divergence;
        if d.q_lower.len() != n || d.q_upper.len() != n || d.qdot_max.len() != n {
            return Err(Error::Config(format!(
                "sim.divergence bounds must have {n} entries each"
            )));
        }
        Ok(())
    }

    /// Sample period in simulation time units.
    pub fn sample_period(&self) -> f64 {
        1.0 / (self.sample_rate_hz * self.time_unit_seconds)
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

/// Control force together with the state estimate it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub u: DVector<f64>,
    pub estimate: ConfigState<f64>,
}

pub trait Controller: Send {
    /// Called once at the start of every integrator step.
    fn begin_step(&mut self, _t: f64, _state: &ConfigState<f64>) -> Result<()> {
        Ok(())
    }

    fn command(&mut self, t: f64, state: &ConfigState<f64>) -> Result<Command>;
}

/// The matching law for a closed-loop specification.
pub struct MatchingController {
    pub open: LagrangianSystem<f64>,
    pub closed: ClosedLoopSpec<f64>,
}

impl Controller for MatchingController {
    fn command(&mut self, _t: f64, state: &ConfigState<f64>) -> Result<Command> {
        Ok(Command {
            u: control_law(&self.open, &self.closed, state)?,
            estimate: state.clone(),
        })
    }
}

pub struct LinearController {
    pub feedback: LinearFeedback<f64>,
}

impl Controller for LinearController {
    fn command(&mut self, _t: f64, state: &ConfigState<f64>) -> Result<Command> {
        Ok(Command {
            u: self.feedback.eval(&state.q, &state.qdot),
            estimate: state.clone(),
        })
    }
}

/// Zero-order hold around a continuous controller.
///
/// Positions are latched at the first step start at or after each sample
/// instant; with the forward-difference estimator the velocity is the
/// latched displacement over the elapsed time since the previous latch, and
/// zero at the first sample.
pub struct SampledController<C> {
    inner: C,
    period: f64,
    estimator: VelocityEstimator,
    next_sample: f64,
    previous: Option<(f64, DVector<f64>)>,
    held: Option<Command>,
}

impl<C: Controller> SampledController<C> {
    pub fn new(inner: C, period: f64, estimator: VelocityEstimator) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::InvalidArgument("sample period must be positive".into()));
        }
        Ok(Self {
            inner,
            period,
            estimator,
            next_sample: 0.0,
            previous: None,
            held: None,
        })
    }
}

impl<C: Controller> Controller for SampledController<C> {
    fn begin_step(&mut self, t: f64, state: &ConfigState<f64>) -> Result<()> {
        if self.held.is_some() && t < self.next_sample - 1e-9 * self.period {
            return Ok(());
        }
        let qdot = match self.estimator {
            VelocityEstimator::Exact => state.qdot.clone(),
            VelocityEstimator::ForwardDifference => match &self.previous {
                Some((tp, qp)) => (&state.q - qp) / (t - tp),
                None => DVector::zeros(state.dim()),
            },
        };
        let estimate = ConfigState {
            q: state.q.clone(),
            qdot,
        };
        self.inner.begin_step(t, &estimate)?;
        let cmd = self.inner.command(t, &estimate)?;
        self.held = Some(cmd);
        self.previous = Some((t, state.q.clone()));
        while self.next_sample <= t + 1e-9 * self.period {
            self.next_sample += self.period;
        }
        Ok(())
    }

    fn command(&mut self, t: f64, state: &ConfigState<f64>) -> Result<Command> {
        if self.held.is_none() {
            self.begin_step(t, state)?;
        }
        Ok(self.held.clone().expect("latched above"))
    }
}

/// Runs a controller designed in rescaled ball-and-beam units on a plant
/// integrated in SI units.
pub struct SiController<C> {
    pub inner: C,
    pub scales: UnitScales,
}

impl<C: Controller> Controller for SiController<C> {
    fn begin_step(&mut self, t: f64, state: &ConfigState<f64>) -> Result<()> {
        self.inner
            .begin_step(t / self.scales.time, &self.scales.state_from_si(state))
    }

    fn command(&mut self, t: f64, state: &ConfigState<f64>) -> Result<Command> {
        let cmd = self
            .inner
            .command(t / self.scales.time, &self.scales.state_from_si(state))?;
        Ok(Command {
            u: self.scales.force_to_si(&cmd.u),
            estimate: self.scales.state_to_si(&cmd.estimate),
        })
    }
}

/// Drive signal held by the actuator, and whether it was clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct Drive {
    pub command: DVector<f64>,
    /// Physical drive signal (volts for a servo); `NaN` for an ideal actuator.
    pub signal: f64,
    pub saturated: bool,
}

pub trait Actuator: Send + Sync {
    fn drive(&self, cmd: &Command) -> Drive;

    /// Generalized force produced by `drive` at the true state.
    fn force(&self, drive: &Drive, state: &ConfigState<f64>) -> DVector<f64>;
}

/// Applies the commanded force exactly.
pub struct IdealActuator;

impl Actuator for IdealActuator {
    fn drive(&self, cmd: &Command) -> Drive {
        Drive {
            command: cmd.u.clone(),
            signal: f64::NAN,
            saturated: false,
        }
    }

    fn force(&self, drive: &Drive, _state: &ConfigState<f64>) -> DVector<f64> {
        drive.command.clone()
    }
}

/// Servo on coordinate `index`: the commanded torque becomes a (possibly
/// clamped) voltage, and the delivered torque follows from that voltage and
/// the true servo rate. Other force components are dropped.
pub struct ServoActuator {
    pub motor: ServoMotor,
    pub index: usize,
    pub clamp: bool,
}

impl Actuator for ServoActuator {
    fn drive(&self, cmd: &Command) -> Drive {
        let rate = cmd.estimate.qdot[self.index];
        let (signal, saturated) = if self.clamp {
            let v = self.motor.torque_to_voltage(cmd.u[self.index], rate);
            (v.v_in, v.saturated)
        } else {
            let s = self.motor.scales;
            (self.motor.voltage_si(cmd.u[self.index] * s.energy, rate / s.time), false)
        };
        Drive {
            command: cmd.u.clone(),
            signal,
            saturated,
        }
    }

    fn force(&self, drive: &Drive, state: &ConfigState<f64>) -> DVector<f64> {
        let mut f = DVector::zeros(state.dim());
        f[self.index] = self.motor.voltage_to_torque(drive.signal, state.qdot[self.index]);
        f
    }
}

/// `(q̇, q̈)` with `g q̈ = u − [jk,·] q̇q̇ − C − ∇V`.
pub fn dynamics_rhs(
    sys: &LagrangianSystem<f64>,
    state: &ConfigState<f64>,
    u: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let (q, qdot) = (&state.q, &state.qdot);
    let ginv = invert(sys.metric.value(q)?, "metric", q)?;
    let quad = contract_velocities(&christoffel_first_from_partials(&sys.metric.partials(q)?), qdot);
    let rhs = u - quad - sys.dissipation.value(q, qdot)? - sys.potential.gradient(q)?;
    Ok((qdot.clone(), ginv * rhs))
}

/// One classical RK4 step; `force` is queried at each stage time and state.
pub fn rk4_step(
    sys: &LagrangianSystem<f64>,
    force: &mut dyn FnMut(f64, &ConfigState<f64>) -> Result<DVector<f64>>,
    t: f64,
    state: &ConfigState<f64>,
    dt: f64,
) -> Result<ConfigState<f64>> {
    let mut eval = |tt: f64, s: &ConfigState<f64>| {
        let u = force(tt, s)?;
        dynamics_rhs(sys, s, &u)
    };
    let shift = |k: &(DVector<f64>, DVector<f64>), h: f64| ConfigState {
        q: &state.q + &k.0 * h,
        qdot: &state.qdot + &k.1 * h,
    };
    let k1 = eval(t, state)?;
    let k2 = eval(t + 0.5 * dt, &shift(&k1, 0.5 * dt))?;
    let k3 = eval(t + 0.5 * dt, &shift(&k2, 0.5 * dt))?;
    let k4 = eval(t + dt, &shift(&k3, dt))?;
    let w = dt / 6.0;
    Ok(ConfigState {
        q: &state.q + (k1.0 + k2.0 * 2.0 + k3.0 * 2.0 + k4.0) * w,
        qdot: &state.qdot + (k1.1 + k2.1 * 2.0 + k3.1 * 2.0 + k4.1) * w,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    /// Commanded force.
    pub u: Vec<f64>,
    /// Force delivered by the actuator at the recorded state.
    pub applied: Vec<f64>,
    pub v_in: f64,
    pub h_hat: f64,
    pub h_hat_rate: f64,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TerminalStatus {
    Completed,
    Diverged { t: f64, reason: String },
    Error { t: f64, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<Record>,
    pub status: TerminalStatus,
}

pub const CSV_HEADER: [&str; 10] = [
    "t", "s", "theta", "s_dot", "theta_dot", "u", "v_in", "H_hat", "H_hat_rate", "saturated",
];

impl Trajectory {
    pub fn completed(&self) -> bool {
        self.status == TerminalStatus::Completed
    }

    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }

    /// Two-coordinate CSV; `u` is the commanded force on the second coordinate.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.records {
            if r.q.len() != 2 {
                return Err(Error::Dimension {
                    context: "csv export",
                    expected: 2,
                    got: r.q.len(),
                });
            }
            w.write_record([
                r.t.to_string(),
                r.q[0].to_string(),
                r.q[1].to_string(),
                r.qdot[0].to_string(),
                r.qdot[1].to_string(),
                r.u[1].to_string(),
                r.v_in.to_string(),
                r.h_hat.to_string(),
                r.h_hat_rate.to_string(),
                r.saturated.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Everything a run needs besides the initial state.
pub struct Simulation<'a> {
    pub system: &'a LagrangianSystem<f64>,
    pub controller: Box<dyn Controller + 'a>,
    pub actuator: Arc<dyn Actuator>,
    /// Closed loop whose energy is recorded; `NaN` columns when absent.
    pub energy: Option<&'a ClosedLoopSpec<f64>>,
    pub config: &'a SimConfig,
}

enum StepFailure {
    Diverged(String),
    Error(String),
}

fn classify(e: Error) -> StepFailure {
    if e.is_domain() || matches!(e, Error::Kinematics(_)) {
        StepFailure::Diverged(e.to_string())
    } else {
        StepFailure::Error(e.to_string())
    }
}

impl Simulation<'_> {
    pub fn run(mut self, initial: &ConfigState<f64>) -> Result<Trajectory> {
        let cfg = self.config;
        let n = self.system.dim();
        cfg.validate(n)?;
        if initial.dim() != n {
            return Err(Error::Dimension {
                context: "initial state",
                expected: n,
                got: initial.dim(),
            });
        }
        self.system.domain.check(&initial.q)?;
        if cfg.mode == ControllerMode::Sampled {
            return Err(Error::Config(
                "wrap the controller with SampledController for sampled mode".into(),
            ));
        }
        Ok(self.integrate(initial))
    }

    fn record(&mut self, t: f64, state: &ConfigState<f64>) -> std::result::Result<(Record, Drive), StepFailure> {
        self.controller.begin_step(t, state).map_err(classify)?;
        let cmd = self.controller.command(t, state).map_err(classify)?;
        let drive = self.actuator.drive(&cmd);
        let applied = self.actuator.force(&drive, state);
        let (h_hat, h_hat_rate) = match self.energy {
            Some(closed) => {
                let e = closed_loop_energy(closed, state).map_err(classify)?;
                (e.h_hat, e.h_hat_rate)
            }
            None => (f64::NAN, f64::NAN),
        };
        Ok((
            Record {
                t,
                q: state.q.iter().copied().collect(),
                qdot: state.qdot.iter().copied().collect(),
                u: cmd.u.iter().copied().collect(),
                applied: applied.iter().copied().collect(),
                v_in: drive.signal,
                h_hat,
                h_hat_rate,
                saturated: drive.saturated,
            },
            drive,
        ))
    }

    fn integrate(&mut self, initial: &ConfigState<f64>) -> Trajectory {
        let cfg = self.config;
        let steps = cfg.steps();
        let mut records = Vec::with_capacity(steps / cfg.record_stride + 2);
        let mut state = initial.clone();
        let mut k = 0;
        let status = loop {
            let t = k as f64 * cfg.dt;
            let (rec, drive) = match self.record(t, &state) {
                Ok(r) => r,
                Err(StepFailure::Diverged(reason)) => break TerminalStatus::Diverged { t, reason },
                Err(StepFailure::Error(message)) => break TerminalStatus::Error { t, message },
            };
            if k % cfg.record_stride == 0 || k == steps {
                records.push(rec);
            }
            if k == steps {
                break TerminalStatus::Completed;
            }
            let controller = &mut self.controller;
            let actuator = &self.actuator;
            // The first stage is evaluated at (t, state), which `record` just did.
            let mut first = Some(actuator.force(&drive, &state));
            let mut force = |tt: f64, s: &ConfigState<f64>| -> Result<DVector<f64>> {
                if let Some(f) = first.take() {
                    return Ok(f);
                }
                let cmd = controller.command(tt, s)?;
                Ok(actuator.force(&actuator.drive(&cmd), s))
            };
            let next = match rk4_step(self.system, &mut force, t, &state, cfg.dt) {
                Ok(next) => next,
                Err(e) => match classify(e) {
                    StepFailure::Diverged(reason) => break TerminalStatus::Diverged { t, reason },
                    StepFailure::Error(message) => break TerminalStatus::Error { t, message },
                },
            };
            let t_next = (k + 1) as f64 * cfg.dt;
            if !next.is_finite() {
                break TerminalStatus::Diverged {
                    t: t_next,
                    reason: "non-finite state".into(),
                };
            }
            if let Some(reason) = cfg.divergence.violation(&next) {
                break TerminalStatus::Diverged { t: t_next, reason };
            }
            if !self.system.domain.contains(&next.q) {
                break TerminalStatus::Diverged {
                    t: t_next,
                    reason: "left the model domain".into(),
                };
            }
            state = next;
            k += 1;
        };
        Trajectory { records, status }
    }
}

/// Controller choices for the ball-and-beam.
#[derive(Debug, Clone, PartialEq)]
pub enum BallBeamController {
    Nonlinear,
    /// Tangent affine law at the equilibrium.
    Linearized,
    Gains(LinearFeedback<f64>),
}

/// Simulates the rescaled ball-and-beam under `controller` with the servo
/// actuator, recording the energy of the default closed-loop family.
pub fn simulate_ball_beam(
    model: &BallBeamModel,
    controller: &BallBeamController,
    config: &SimConfig,
    initial: &ConfigState<f64>,
) -> Result<Trajectory> {
    let open = model.open_loop_system()?;
    let closed = model.closed_loop_family()?;
    let inner: Box<dyn Controller> = match controller {
        BallBeamController::Nonlinear => Box::new(MatchingController {
            open: model.open_loop_system()?,
            closed: model.closed_loop_family()?,
        }),
        BallBeamController::Linearized => Box::new(LinearController {
            feedback: model.linearize_control(&closed)?,
        }),
        BallBeamController::Gains(fb) => {
            if fb.v.len() != 2 || fb.a.shape() != (2, 2) || fb.b.shape() != (2, 2) {
                return Err(Error::Dimension {
                    context: "ball-and-beam gains",
                    expected: 2,
                    got: fb.v.len(),
                });
            }
            Box::new(LinearController {
                feedback: fb.clone(),
            })
        }
    };
    let controller: Box<dyn Controller> = match config.mode {
        ControllerMode::Continuous => inner,
        ControllerMode::Sampled => Box::new(SampledController::new(
            inner,
            config.sample_period(),
            config.estimator,
        )?),
    };
    let actuator = Arc::new(ServoActuator {
        motor: model.motor(config.v_sat.unwrap_or(f64::INFINITY)),
        index: 1,
        clamp: config.v_sat.is_some(),
    });
    let mut cfg = config.clone();
    cfg.mode = ControllerMode::Continuous;
    Simulation {
        system: &open,
        controller,
        actuator,
        energy: Some(&closed),
        config: &cfg,
    }
    .run(initial)
}

impl<C: Controller + ?Sized> Controller for Box<C> {
    fn begin_step(&mut self, t: f64, state: &ConfigState<f64>) -> Result<()> {
        (**self).begin_step(t, state)
    }

    fn command(&mut self, t: f64, state: &ConfigState<f64>) -> Result<Command> {
        (**self).command(t, state)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub max_h_hat: f64,
    /// Largest `Ĥ_{k+1} − Ĥ_k` (zero when `Ĥ` never increases).
    pub max_positive_increment: f64,
    /// First `k` with `Ĥ_{k+1} − Ĥ_k > tolerance · max|Ĥ|`.
    pub first_violation: Option<usize>,
    /// Correlation between the difference quotient of `Ĥ` and the recorded rate.
    pub rate_correlation: f64,
    /// Largest `|(Ĥ_{k+1} − Ĥ_{k−1})/(t_{k+1} − t_{k−1}) − rate_k|`.
    pub max_rate_mismatch: f64,
}

pub fn lyapunov_report(traj: &Trajectory, tolerance: f64) -> LyapunovReport {
    let r = &traj.records;
    let max_h_hat = r.iter().fold(0.0_f64, |m, x| m.max(x.h_hat.abs()));
    let mut max_inc = 0.0_f64;
    let mut first = None;
    for (k, w) in r.windows(2).enumerate() {
        let inc = w[1].h_hat - w[0].h_hat;
        max_inc = max_inc.max(inc);
        if first.is_none() && inc > tolerance * max_h_hat {
            first = Some(k);
        }
    }
    let mut quotients = Vec::new();
    let mut rates = Vec::new();
    let mut mismatch = 0.0_f64;
    for w in r.windows(3) {
        let q = (w[2].h_hat - w[0].h_hat) / (w[2].t - w[0].t);
        mismatch = mismatch.max((q - w[1].h_hat_rate).abs());
        quotients.push(q);
        rates.push(w[1].h_hat_rate);
    }
    LyapunovReport {
        max_h_hat,
        max_positive_increment: max_inc,
        first_violation: first,
        rate_correlation: correlation(&quotients, &rates),
        max_rate_mismatch: mismatch,
    }
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    if a.is_empty() {
        return f64::NAN;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Earliest record time after which every later record has
/// `|q_i − target_i| < tolerance_i`; `None` when the final record is outside.
pub fn settle_time(traj: &Trajectory, target: &[f64], tolerance: &[f64]) -> Option<f64> {
    let inside = |r: &Record| {
        r.q.iter()
            .zip(target.iter().zip(tolerance))
            .all(|(q, (c, tol))| (q - c).abs() < *tol)
    };
    let mut t = None;
    for r in traj.records.iter().rev() {
        if !inside(r) {
            break;
        }
        t = Some(r.t);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        ConstantMetric, ConstantProjection, DomainBox, LinearDissipation, QuadraticPotential,
    };
    use nalgebra::{dmatrix, dvector};

    fn oscillator() -> LagrangianSystem<f64> {
        LagrangianSystem::new(
            Arc::new(ConstantMetric::new(dmatrix![1.0]).unwrap()),
            Arc::new(QuadraticPotential::new(dmatrix![1.0], dvector![0.0]).unwrap()),
            Arc::new(LinearDissipation::zero(1)),
            Arc::new(ConstantProjection::new(dmatrix![0.0], 0).unwrap()),
            DomainBox::unbounded(1),
        )
        .unwrap()
    }

    #[test]
    fn harmonic_acceleration() {
        let s = ConfigState::new(dvector![1.0], dvector![0.0]).unwrap();
        let (_, acc) = dynamics_rhs(&oscillator(), &s, &dvector![0.0]).unwrap();
        assert_eq!(acc[0], -1.0);
    }

    #[test]
    fn fixed_point_stays() {
        let sys = oscillator();
        let s = ConfigState::at_rest(dvector![0.0]).unwrap();
        let next = rk4_step(&sys, &mut |_, _| Ok(dvector![0.0]), 0.0, &s, 0.1).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn sampled_first_estimate_is_zero() {
        let fb = LinearFeedback {
            v: dvector![0.0],
            a: dmatrix![0.0],
            b: dmatrix![1.0],
        };
        let mut c = SampledController::new(
            LinearController { feedback: fb },
            0.1,
            VelocityEstimator::ForwardDifference,
        )
        .unwrap();
        let s0 = ConfigState::new(dvector![0.0], dvector![5.0]).unwrap();
        c.begin_step(0.0, &s0).unwrap();
        assert_eq!(c.command(0.0, &s0).unwrap().u[0], 0.0);
        let s1 = ConfigState::new(dvector![0.2], dvector![5.0]).unwrap();
        c.begin_step(0.05, &s1).unwrap();
        assert_eq!(c.command(0.05, &s1).unwrap().u[0], 0.0);
        c.begin_step(0.1, &s1).unwrap();
        assert!((c.command(0.1, &s1).unwrap().u[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let mut c = SimConfig::new(1, 1.0);
        c.validate(1).unwrap();
        c.dt = 0.0;
        assert!(c.validate(1).is_err());
        let mut c = SimConfig::new(1, 1.0);
        c.mode = ControllerMode::Sampled;
        c.sample_rate_hz = 0.0;
        assert!(c.validate(1).is_err());
        assert!(SimConfig::new(2, 1.0).validate(1).is_err());
    }

    #[test]
    fn record_count_and_stride() {
        let sys = oscillator();
        let mut cfg = SimConfig::new(1, 1.0);
        cfg.dt = 0.01;
        let init = ConfigState::new(dvector![1.0], dvector![0.0]).unwrap();
        let run = |cfg: &SimConfig| {
            Simulation {
                system: &sys,
                controller: Box::new(LinearController {
                    feedback: LinearFeedback::zero(1),
                }),
                actuator: Arc::new(IdealActuator),
                energy: None,
                config: cfg,
            }
            .run(&init)
            .unwrap()
        };
        let t = run(&cfg);
        assert!(t.completed());
        assert_eq!(t.records.len(), 101);
        assert!(t.records.windows(2).all(|w| w[1].t > w[0].t));
        cfg.record_stride = 7;
        let t = run(&cfg);
        assert_eq!(t.records.len(), 100 / 7 + 2);
        assert_eq!(t.last().unwrap().t, 1.0);
    }
}
