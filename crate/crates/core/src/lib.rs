//! Numerical toolkit for curl-free vector fields: potentials via the
//! adjoint of the Bogovskii operator, right-inverses for the divergence,
//! mollifier machinery, ball-cover gluing, and homotopy-invariant line
//! integrals, verified at desk scale.

pub mod error;
pub mod fieldspec;
pub mod geometry;
pub mod homotopy;
pub mod mollify;
pub mod operators;
pub mod potential;
pub mod quadrature;
pub mod sobolev;

pub use error::{Error, Result};
