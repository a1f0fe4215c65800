//! Configuration-space fields and their connection coefficients.
//!
//! Tensors are dense and indexed with 0-based tuples. Partials of a
//! matrix-valued field are returned as a `Vec` indexed by the differentiation
//! coordinate.

mod christoffel;
mod fd;
mod fields;
mod tensor;

pub use christoffel::{
    christoffel_first, christoffel_first_from_partials, christoffel_second, contract_velocities,
    raise_christoffel,
};
pub(crate) use christoffel::invert;
pub use fd::{fd_partials, fd_partials_default, DEFAULT_FD_STEP};
pub use fields::{
    check_projection, input_projection, is_positive_definite, ConfigState, ConstantMetric,
    ConstantProjection, DissipationField, DomainBox, FnMetric, FnScalarField, InputProjection,
    LagrangianSystem, LinearDissipation, MetricField, ProjectionCheck, ProjectionField,
    QuadraticPotential, ScalarField,
};
pub use tensor::Tensor3;
