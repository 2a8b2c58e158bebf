//! Identification of optimal history (internal) variables for linear
//! viscoelastic hereditary laws.
//!
//! The crate is organised bottom-up:
//!
//! * [`hist`]: the weighted history space `H`, nodal quadrature and the
//!   trigonometric-exponential orthonormal basis.
//! * [`kernels`]: exponential, Prony and discrete-spectrum relaxation kernels,
//!   Mandel isotropic moduli and the Hilbert-Schmidt admissibility bound.
//! * [`operator`]: the inelastic-strain operator `S`, its adjoint and the
//!   closed-form standard-linear-solid spectrum.
//! * [`oracle`]: black-box strain-program to stress-evolution maps.
//! * [`rve`]: a discrete periodic RVE simulator with Laplace-domain
//!   effective moduli.
//! * [`reduce`]: sampling of the truncated operator, optimal rank-N reduction
//!   and the online internal-variable law.

pub mod error;
pub mod hist;
pub mod kernels;
pub mod linalg;
pub mod operator;
pub mod table;
pub mod oracle;
pub mod reduce;
pub mod rve;

pub use error::{Error, Result};
