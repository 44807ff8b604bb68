//! Central finite differences. These realize every partial derivative in the
//! toolkit; identities are checked as residuals, never symbolically.

use super::{ScalarField, VectorField};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffOrder {
    Two,
    Four,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDiffScheme {
    pub step: f64,
    pub order: DiffOrder,
}

impl FiniteDiffScheme {
    pub fn order2(step: f64) -> Self {
        FiniteDiffScheme {
            step,
            order: DiffOrder::Two,
        }
    }

    pub fn order4(step: f64) -> Self {
        FiniteDiffScheme {
            step,
            order: DiffOrder::Four,
        }
    }

    /// Default step: 1e-5 of the domain diameter, order 2.
    pub fn for_domain(diameter: f64) -> Self {
        FiniteDiffScheme::order2(1e-5 * diameter)
    }
}

/// d/dx_j of a scalar field at `x`. Evaluation failures at stencil points
/// propagate with the offending point.
pub fn partial<F: ScalarField + ?Sized>(
    f: &F,
    j: usize,
    x: &[f64],
    scheme: FiniteDiffScheme,
) -> Result<f64> {
    let h = scheme.step;
    let mut p = x.to_vec();
    match scheme.order {
        DiffOrder::Two => {
            p[j] = x[j] + h;
            let fp = f.eval(&p)?;
            p[j] = x[j] - h;
            let fm = f.eval(&p)?;
            Ok((fp - fm) / (2.0 * h))
        }
        DiffOrder::Four => {
            p[j] = x[j] + 2.0 * h;
            let fp2 = f.eval(&p)?;
            p[j] = x[j] + h;
            let fp1 = f.eval(&p)?;
            p[j] = x[j] - h;
            let fm1 = f.eval(&p)?;
            p[j] = x[j] - 2.0 * h;
            let fm2 = f.eval(&p)?;
            Ok((-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h))
        }
    }
}

/// d/dx_j of component `comp` of a vector field at `x`.
pub fn partial_component<V: VectorField + ?Sized>(
    v: &V,
    comp: usize,
    j: usize,
    x: &[f64],
    scheme: FiniteDiffScheme,
) -> Result<f64> {
    let h = scheme.step;
    let n = v.dim();
    let mut p = x.to_vec();
    let mut buf = vec![0.0; n];
    let at = |pj: f64, p: &mut Vec<f64>, buf: &mut Vec<f64>| -> Result<f64> {
        p[j] = pj;
        v.eval_into(p, buf)?;
        Ok(buf[comp])
    };
    match scheme.order {
        DiffOrder::Two => {
            let fp = at(x[j] + h, &mut p, &mut buf)?;
            let fm = at(x[j] - h, &mut p, &mut buf)?;
            Ok((fp - fm) / (2.0 * h))
        }
        DiffOrder::Four => {
            let fp2 = at(x[j] + 2.0 * h, &mut p, &mut buf)?;
            let fp1 = at(x[j] + h, &mut p, &mut buf)?;
            let fm1 = at(x[j] - h, &mut p, &mut buf)?;
            let fm2 = at(x[j] - 2.0 * h, &mut p, &mut buf)?;
            Ok((-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h))
        }
    }
}

pub fn gradient<F: ScalarField + ?Sized>(
    f: &F,
    x: &[f64],
    scheme: FiniteDiffScheme,
) -> Result<Vec<f64>> {
    (0..x.len()).map(|j| partial(f, j, x, scheme)).collect()
}

pub fn divergence<V: VectorField + ?Sized>(
    v: &V,
    x: &[f64],
    scheme: FiniteDiffScheme,
) -> Result<f64> {
    let mut d = 0.0;
    for j in 0..v.dim() {
        d += partial_component(v, j, j, x, scheme)?;
    }
    Ok(d)
}

/// Max over probes and component pairs j < k of |d_j v_k - d_k v_j|.
/// Zero (to scheme tolerance) characterizes fields admissible for potential
/// reconstruction.
pub fn curl_residual<V: VectorField + ?Sized>(
    v: &V,
    probes: &[Vec<f64>],
    scheme: FiniteDiffScheme,
) -> Result<f64> {
    let n = v.dim();
    let mut worst = 0.0f64;
    for x in probes {
        for j in 0..n {
            for k in (j + 1)..n {
                let a = partial_component(v, k, j, x, scheme)?;
                let b = partial_component(v, j, k, x, scheme)?;
                worst = worst.max((a - b).abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldspec::{ScalarFn, VectorFn};

    #[test]
    fn order2_is_exact_on_quadratics() {
        let f = ScalarFn::new(2, |x| x[0] * x[0]);
        let d = partial(&f, 0, &[3.0, 0.5], FiniteDiffScheme::order2(1e-3)).unwrap();
        assert!((d - 6.0).abs() < 1e-9);
    }

    #[test]
    fn order4_hits_sin_derivative() {
        let f = ScalarFn::new(1, |x| x[0].sin());
        let d = partial(&f, 0, &[0.0], FiniteDiffScheme::order4(1e-4)).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_field_has_zero_derivative() {
        let f = ScalarFn::new(3, |_| 42.0);
        let d = partial(&f, 2, &[0.1, 0.2, 0.3], FiniteDiffScheme::order2(1e-5)).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn curl_residual_vanishes_for_gradient() {
        // v = grad(x1 x2) = (x2, x1).
        let v = VectorFn::new(2, |x, out| {
            out[0] = x[1];
            out[1] = x[0];
        });
        let probes = vec![vec![0.3, -0.2], vec![1.0, 2.0]];
        let r = curl_residual(&v, &probes, FiniteDiffScheme::order2(1e-4)).unwrap();
        assert!(r <= 1e-10);
    }

    #[test]
    fn curl_residual_detects_rotation() {
        let v = VectorFn::new(2, |x, out| {
            out[0] = -x[1];
            out[1] = x[0];
        });
        let probes = vec![vec![0.3, -0.2]];
        let r = curl_residual(&v, &probes, FiniteDiffScheme::order2(1e-4)).unwrap();
        assert!((r - 2.0).abs() < 1e-9);
    }
}
