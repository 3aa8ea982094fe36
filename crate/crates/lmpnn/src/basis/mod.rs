//! Orthogonal basis families used to featurize molecular geometry.
//!
//! Distances are expanded with Legendre rational functions on (0, inf),
//! angle cosines with Legendre polynomials of the first kind on [-1, 1].
//! Both families are evaluated by three-term recurrences; closed-form
//! routes exist alongside them so the two can be cross-checked.

mod expand;
mod legendre;
mod quadrature;
mod rational;

pub use expand::{expand_angle_cosine, AngularBasisConfig, RadialBasisConfig, RadialBasisTable};
pub use legendre::{
    legendre_explicit_sum, legendre_first_kind, legendre_sequence, legendre_sequence_with_deriv,
};
pub use quadrature::{gauss_legendre, orthogonality_residual};
pub use rational::{
    legendre_rational, legendre_rational_direct, rational_sequence, rational_sequence_with_deriv,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BasisError {
    #[error("legendre rational functions are defined for x >= 0, got {x}")]
    NegativeArgument { x: f64 },
    #[error("distance {d} outside the radial basis domain (0, {cutoff}]")]
    DistanceOutOfRange { d: f64, cutoff: f64 },
    #[error("quadrature order {order} insufficient for degrees {i} + {j} (need >= {required})")]
    InsufficientQuadratureOrder {
        order: usize,
        i: usize,
        j: usize,
        required: usize,
    },
    #[error("invalid basis configuration: {0}")]
    InvalidConfig(String),
}
