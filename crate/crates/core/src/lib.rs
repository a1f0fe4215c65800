//! Matching control laws for underactuated Lagrangian systems.
//!
//! The library evaluates the matching conditions that make a feedback law
//! turn `g q̈ + [jk,·] q̇ q̇ + C + ∇V = u` (with `u` restricted by
//! `P g⁻¹ u = 0`) into a closed loop of the same form with new data
//! `(ĝ, V̂, Ĉ)`, assembles the resulting control law, and ships:
//!
//! * [`geometry`]: fields, Christoffel symbols and finite-difference partials;
//! * [`matching`]: residuals of the matching conditions and the λ-equations,
//!   the control law and the closed-loop energy `Ĥ`;
//! * [`linear`]: the constant-coefficient construction showing every linear
//!   state feedback is a matching law, with the `RX = XRᵀ` solver;
//! * [`ballbeam`]: the explicit control-law family for a ball-and-beam;
//! * [`sim`]: RK4 closed-loop simulation with sampled-data emulation.
//!
//! The geometric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, the precision used by the ball-and-beam
//! model and the command-line tool.

pub mod ballbeam;
pub mod config;
mod error;
pub mod geometry;
pub mod linear;
pub mod matching;
pub mod quadrature;
mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ConfigState = geometry::ConfigState<f64>;
pub type LagrangianSystem = geometry::LagrangianSystem<f64>;
pub type Tensor3 = geometry::Tensor3<f64>;
pub use sim::{SimConfig, Trajectory};
pub type ClosedLoopSpec = matching::ClosedLoopSpec<f64>;
pub type MatchingResidual = matching::MatchingResidual<f64>;
pub type LtiSystem = linear::LtiSystem<f64>;
pub type LinearFeedback = linear::LinearFeedback<f64>;
pub type ConstantClosedLoop = linear::ConstantClosedLoop<f64>;



pub type ConfigState32 = geometry::ConfigState<f32>;
pub type LagrangianSystem32 = geometry::LagrangianSystem<f32>;
pub type LtiSystem32 = linear::LtiSystem<f32>;
