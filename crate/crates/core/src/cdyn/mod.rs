//! Classical dynamics: flow with variational equations, twisted periodic
//! orbit search and the linearized orbit data used by the trace formula.

mod flow;
mod monodromy;
mod orbits;

pub use flow::{flow, flow_end, twisted_residual, FlowOptions, FlowResult};
pub use monodromy::{
    maslov_from_samples, maslov_index, nondegeneracy_certificate, reduced_determinant_of, Certificate, EIGEN_ONE_TOL,
    KERNEL_TOL, PHASE_TOL,
};
pub use orbits::{
    find_twisted_orbits, nondegeneracy_check, reduced_determinant, OrbitDatabase, OrbitSearchSpec, TwistedOrbit,
};
