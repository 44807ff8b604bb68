//! Field representations: analytic expressions, grid samples, closures, and
//! the numerical differentiation used by every curl/divergence check.

pub mod diff;
pub mod expr;
pub mod grid;

pub use diff::{curl_residual, divergence, gradient, partial, partial_component, FiniteDiffScheme};
pub use expr::{parse_expr, Expr};
pub use grid::GridField;

use crate::error::{Error, Result};
use crate::geometry::Shape;

/// Scalar-valued field on (a subset of) R^n.
pub trait ScalarField {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<f64>;
}

/// Vector-valued field on (a subset of) R^n, with n components.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()>;

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }
}

impl<T: ScalarField + ?Sized> ScalarField for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64]) -> Result<f64> {
        (**self).eval(x)
    }
}

impl<T: VectorField + ?Sized> VectorField for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).eval_into(x, out)
    }
}

/// Scalar field backed by a closure.
pub struct ScalarFn<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64> ScalarFn<F> {
    pub fn new(dim: usize, f: F) -> Self {
        ScalarFn { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64> ScalarField for ScalarFn<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x))
    }
}

/// Vector field backed by a closure writing into the output slice.
pub struct VectorFn<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> VectorFn<F> {
    pub fn new(dim: usize, f: F) -> Self {
        VectorFn { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> VectorField for VectorFn<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (self.f)(x, out);
        Ok(())
    }
}

/// One component of a configured field.
#[derive(Debug, Clone)]
pub enum Component {
    Analytic(Expr),
    Grid(GridField),
}

impl Component {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            Component::Analytic(e) => e.eval(x),
            Component::Grid(g) => g.eval(x),
        }
    }
}

/// A field declared in a config: 1 component (scalar) or n (vector).
#[derive(Debug, Clone)]
pub struct Field {
    dim: usize,
    components: Vec<Component>,
}

impl Field {
    pub fn new(dim: usize, components: Vec<Component>) -> Result<Self> {
        if components.is_empty() || (components.len() != 1 && components.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: components.len(),
            });
        }
        for c in &components {
            match c {
                Component::Analytic(e) => {
                    if e.min_dim() > dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            got: e.min_dim(),
                        });
                    }
                }
                Component::Grid(g) => {
                    if g.dim() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            got: g.dim(),
                        });
                    }
                }
            }
        }
        Ok(Field { dim, components })
    }

    pub fn scalar(dim: usize, component: Component) -> Result<Self> {
        Field::new(dim, vec![component])
    }

    pub fn is_scalar(&self) -> bool {
        self.components.len() == 1
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }
}

impl ScalarField for Field {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> Result<f64> {
        self.components[0].eval(x)
    }
}

impl VectorField for Field {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if self.components.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: self.components.len(),
            });
        }
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval(x)?;
        }
        Ok(())
    }
}

/// Scalar field together with its declared compact support, required by the
/// Bogovskii operator.
pub struct Supported<F> {
    pub field: F,
    pub support: Shape,
}

impl<F: ScalarField> Supported<F> {
    pub fn new(field: F, support: Shape) -> Self {
        Supported { field, support }
    }
}

impl<F: ScalarField> ScalarField for Supported<F> {
    fn dim(&self) -> usize {
        self.field.dim()
    }
    fn eval(&self, x: &[f64]) -> Result<f64> {
        self.field.eval(x)
    }
}
