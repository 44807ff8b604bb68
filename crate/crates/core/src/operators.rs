//! The two central integral operators: the Bogovskii operator B and the
//! potential operator A (the restriction of -B^t to smooth fields), with
//! support verification and the duality identity between them.
//!
//! B phi(x) = int_Omega phi(y) (x-y) int_1^inf rho(y + r(x-y)) r^(n-1) dr dy
//! A v(x)   = int_Omega rho(y) int_0^1 v(sy + (1-s)x) . (x-y) ds dy

use crate::error::{Error, Result};
use crate::fieldspec::{ScalarField, Supported, VectorField};
use crate::geometry::{ray_ball_interval, Shape, StarDomain};
use crate::mollify::Mollifier;
use crate::quadrature::{
    sphere_directions, BallQuad, GaussRule, KahanSum, QuadratureRule, RegionQuad, TensorGrid,
};

/// Quadrature path for `bogovskii_apply`.
///
/// `Direct` follows the defining formula: a tensor rule over the support of
/// phi with the exact r-interval for the inner integral. Its outer integrand
/// carries a |x-y|^(1-n) singularity, so it is accurate only at evaluation
/// points away from the support of phi.
///
/// `Polar` substitutes z = x - y and integrates in spherical coordinates
/// around x (the rewritten kernel from the operator's continuity argument);
/// the Jacobian cancels the singularity and the integrand becomes smooth, so
/// this path is accurate everywhere and is the default. Both paths vanish
/// identically outside the convex hull of the two supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BogovskiiForm {
    Polar,
    Direct,
}

#[derive(Debug, Clone)]
pub struct BogovskiiOp {
    pub domain: StarDomain,
    pub rho: Mollifier,
    pub quad: QuadratureRule,
    pub form: BogovskiiForm,
    /// Nodes over spt rho (flattened, n per node) with weights premultiplied
    /// by rho, shared by every `potential_apply` evaluation.
    rho_nodes: Vec<f64>,
    rho_weights: Vec<f64>,
}

impl BogovskiiOp {
    /// Requires spt rho inside the star ball (hence inside the domain).
    pub fn new(domain: StarDomain, rho: Mollifier, quad: QuadratureRule) -> Result<Self> {
        if rho.dim() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                got: rho.dim(),
            });
        }
        let sb = &domain.star_ball;
        let rb = &rho.support_ball;
        let dist: f64 = sb
            .center
            .iter()
            .zip(&rb.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if dist + rb.radius > sb.radius * (1.0 + 1e-12) {
            return Err(Error::SupportNotInsideDomain);
        }
        let n = domain.dim();
        let ball_rule = BallQuad::unit(n, quad.inner_order, quad.angular_order);
        let mut rho_nodes = Vec::new();
        let mut rho_weights = Vec::new();
        ball_rule.for_each_on(&rb.center, rb.radius, |y, w| {
            let r = rho.value(y);
            if r != 0.0 {
                rho_nodes.extend_from_slice(y);
                rho_weights.push(w * r);
            }
        });
        let form = if n <= 3 {
            BogovskiiForm::Polar
        } else {
            BogovskiiForm::Direct
        };
        Ok(BogovskiiOp {
            domain,
            rho,
            quad,
            form,
            rho_nodes,
            rho_weights,
        })
    }

    pub fn with_form(mut self, form: BogovskiiForm) -> Self {
        self.form = form;
        self
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }
}

/// True iff `sup` lies inside `dom` (closed containment of primitives).
pub fn shape_inside(sup: &Shape, dom: &Shape) -> bool {
    let eps = 1e-12;
    match (sup, dom) {
        (Shape::Ball(s), Shape::Ball(d)) => {
            let dist: f64 = s
                .center
                .iter()
                .zip(&d.center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            dist + s.radius <= d.radius * (1.0 + eps)
        }
        (Shape::Ball(s), Shape::Box(d)) => s
            .center
            .iter()
            .zip(d.lo.iter().zip(&d.hi))
            .all(|(c, (lo, hi))| c - s.radius >= lo - eps && c + s.radius <= hi + eps),
        (Shape::Box(s), Shape::Ball(d)) => {
            // All corners inside the ball.
            let n = s.lo.len();
            (0..1usize << n).all(|mask| {
                let mut d2 = 0.0;
                for i in 0..n {
                    let v = if mask >> i & 1 == 1 { s.hi[i] } else { s.lo[i] };
                    d2 += (v - d.center[i]) * (v - d.center[i]);
                }
                d2.sqrt() <= d.radius * (1.0 + eps)
            })
        }
        (Shape::Box(s), Shape::Box(d)) => {
            s.lo.iter().zip(&d.lo).all(|(a, b)| a >= &(b - eps))
                && s.hi.iter().zip(&d.hi).all(|(a, b)| a <= &(b + eps))
        }
    }
}

fn binomial_row(n: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    for _ in 0..n {
        let mut next = vec![1.0];
        for w in row.windows(2) {
            next.push(w[0] + w[1]);
        }
        next.push(1.0);
        row = next;
    }
    row
}

/// Set of directions (angles) under which a convex support is seen from x.
enum DirectionArc {
    Full,
    /// Center angle and half-width; width is < pi for a convex body viewed
    /// from outside.
    Arc {
        center: f64,
        half: f64,
    },
    Empty,
}

fn ball_arc(x: &[f64], ball: &crate::geometry::Ball) -> DirectionArc {
    let dx = ball.center[0] - x[0];
    let dy = ball.center[1] - x[1];
    let d = (dx * dx + dy * dy).sqrt();
    if d < ball.radius {
        return DirectionArc::Full;
    }
    let half = (ball.radius / d).min(1.0).asin();
    DirectionArc::Arc {
        center: dy.atan2(dx),
        half,
    }
}

fn shape_arc(x: &[f64], shape: &Shape) -> DirectionArc {
    match shape {
        Shape::Ball(b) => ball_arc(x, b),
        Shape::Box(b) => {
            if b.contains(x) {
                return DirectionArc::Full;
            }
            // Reference direction towards the center always hits the box;
            // corner angles measured relative to it bound the view cone.
            let cx = 0.5 * (b.lo[0] + b.hi[0]) - x[0];
            let cy = 0.5 * (b.lo[1] + b.hi[1]) - x[1];
            let theta_ref = cy.atan2(cx);
            let mut lo = 0.0f64;
            let mut hi = 0.0f64;
            for corner in 0..4 {
                let px = if corner & 1 == 1 { b.hi[0] } else { b.lo[0] };
                let py = if corner & 2 == 2 { b.hi[1] } else { b.lo[1] };
                let mut a = (py - x[1]).atan2(px - x[0]) - theta_ref;
                while a > std::f64::consts::PI {
                    a -= 2.0 * std::f64::consts::PI;
                }
                while a < -std::f64::consts::PI {
                    a += 2.0 * std::f64::consts::PI;
                }
                lo = lo.min(a);
                hi = hi.max(a);
            }
            DirectionArc::Arc {
                center: theta_ref + 0.5 * (lo + hi),
                half: 0.5 * (hi - lo),
            }
        }
    }
}

fn rotate_by_pi(arc: DirectionArc) -> DirectionArc {
    match arc {
        DirectionArc::Arc { center, half } => DirectionArc::Arc {
            center: center + std::f64::consts::PI,
            half,
        },
        other => other,
    }
}

/// Intersection of two view arcs (each of width < pi, hence the result is a
/// single arc or empty).
fn arc_intersection(a: DirectionArc, b: DirectionArc) -> DirectionArc {
    match (a, b) {
        (DirectionArc::Empty, _) | (_, DirectionArc::Empty) => DirectionArc::Empty,
        (DirectionArc::Full, other) | (other, DirectionArc::Full) => other,
        (
            DirectionArc::Arc {
                center: c1,
                half: h1,
            },
            DirectionArc::Arc {
                center: c2,
                half: h2,
            },
        ) => {
            let mut d = c2 - c1;
            while d > std::f64::consts::PI {
                d -= 2.0 * std::f64::consts::PI;
            }
            while d < -std::f64::consts::PI {
                d += 2.0 * std::f64::consts::PI;
            }
            let lo = (-h1).max(d - h2);
            let hi = h1.min(d + h2);
            if lo >= hi {
                DirectionArc::Empty
            } else {
                DirectionArc::Arc {
                    center: c1 + 0.5 * (lo + hi),
                    half: 0.5 * (hi - lo),
                }
            }
        }
    }
}

/// Direction nodes for the polar form in 2-D, restricted to the wedge of
/// directions under which both supports are visible. The wedge edges carry
/// tangent rays where the integrand vanishes to all orders, so aligning
/// panels with them restores spectral convergence.
fn polar_directions_2d(
    x: &[f64],
    rho_ball: &crate::geometry::Ball,
    phi_support: &Shape,
    quad: &QuadratureRule,
) -> Vec<(Vec<f64>, f64)> {
    let wedge = arc_intersection(
        ball_arc(x, rho_ball),
        rotate_by_pi(shape_arc(x, phi_support)),
    );
    match wedge {
        DirectionArc::Empty => Vec::new(),
        DirectionArc::Full => sphere_directions(2, quad.gauss_order, quad.angular_order.max(192)),
        DirectionArc::Arc { center, half } => {
            let width = 2.0 * half;
            let panels = ((width / 0.4).ceil() as usize).max(2);
            let rule = GaussRule::new(quad.inner_order.max(16));
            let mut out = Vec::with_capacity(panels * rule.nodes.len());
            for p in 0..panels {
                let a = center - half + width * p as f64 / panels as f64;
                let b = center - half + width * (p + 1) as f64 / panels as f64;
                for (th, w) in rule.mapped(a, b) {
                    out.push((vec![th.cos(), th.sin()], w));
                }
            }
            out
        }
    }
}

/// Applies the Bogovskii operator to a compactly supported scalar field.
pub fn bogovskii_apply<F: ScalarField>(
    op: &BogovskiiOp,
    phi: &Supported<F>,
    x: &[f64],
) -> Result<Vec<f64>> {
    let n = op.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    if !op.domain.contains(x) {
        return Err(Error::PointOutsideDomain(x.to_vec()));
    }
    if !shape_inside(&phi.support, &op.domain.shape) {
        return Err(Error::SupportNotInsideDomain);
    }
    match op.form {
        BogovskiiForm::Polar if n <= 3 => bogovskii_polar(op, phi, x),
        _ => bogovskii_direct(op, phi, x),
    }
}

fn bogovskii_polar<F: ScalarField>(
    op: &BogovskiiOp,
    phi: &Supported<F>,
    x: &[f64],
) -> Result<Vec<f64>> {
    let n = op.dim();
    let binom = binomial_row(n - 1);
    let rho_shape = Shape::Ball(op.rho.support_ball.clone());
    // Both chord integrals are inner one-dimensional rules.
    let s_rule = GaussRule::new(op.quad.inner_order);
    let t_rule = GaussRule::new(op.quad.inner_order);
    let mut acc = vec![KahanSum::new(); n];
    let mut moments = vec![0.0f64; n];
    let mut t_sums = vec![0.0f64; n];
    let mut point = vec![0.0f64; n];
    let mut neg_u = vec![0.0f64; n];

    let directions = if n == 2 {
        polar_directions_2d(x, &op.rho.support_ball, &phi.support, &op.quad)
    } else {
        sphere_directions(n, op.quad.gauss_order, op.quad.angular_order)
    };
    for (u, wu) in directions {
        // s-moments of rho along x + s u.
        let Some((s0, s1)) = rho_shape.ray_interval(x, &u) else {
            continue;
        };
        moments.fill(0.0);
        for (s, ws) in s_rule.mapped(s0, s1) {
            for d in 0..n {
                point[d] = x[d] + s * u[d];
            }
            let r = op.rho.value(&point);
            if r == 0.0 {
                continue;
            }
            let mut s_pow = 1.0;
            for m in moments.iter_mut() {
                *m += ws * r * s_pow;
                s_pow *= s;
            }
        }
        if moments.iter().all(|m| *m == 0.0) {
            continue;
        }
        // t-moments of phi along x - t u.
        for d in 0..n {
            neg_u[d] = -u[d];
        }
        let Some((t0, t1)) = phi.support.ray_interval(x, &neg_u) else {
            continue;
        };
        t_sums.fill(0.0);
        for (t, wt) in t_rule.mapped(t0, t1) {
            for d in 0..n {
                point[d] = x[d] - t * u[d];
            }
            let f = phi.field.eval(&point)?;
            if f == 0.0 {
                continue;
            }
            let mut t_pow = 1.0;
            for q in t_sums.iter_mut() {
                *q += wt * f * t_pow;
                t_pow *= t;
            }
        }
        // (s + t)^(n-1) expanded: sum_m C(n-1, m) s^m t^(n-1-m).
        let mut kernel = 0.0;
        for m in 0..n {
            kernel += binom[m] * moments[m] * t_sums[n - 1 - m];
        }
        if kernel == 0.0 {
            continue;
        }
        for d in 0..n {
            acc[d].add(wu * u[d] * kernel);
        }
    }
    Ok(acc.iter().map(|a| a.value()).collect())
}

fn bogovskii_direct<F: ScalarField>(
    op: &BogovskiiOp,
    phi: &Supported<F>,
    x: &[f64],
) -> Result<Vec<f64>> {
    let n = op.dim();
    // Ball supports get the radial rule; its 1-D bump accuracy needs the
    // inner order.
    let outer = RegionQuad::for_shape(&phi.support, op.quad.inner_order, op.quad.angular_order);
    let inner_rule = GaussRule::new(op.quad.inner_order);
    let mut acc = vec![KahanSum::new(); n];
    let mut err = None;
    let mut dir = vec![0.0f64; n];
    let mut p = vec![0.0f64; n];
    outer.for_each(|y, w| {
        if err.is_some() {
            return;
        }
        if !phi.support.contains(y) {
            return;
        }
        let f = match phi.field.eval(y) {
            Ok(f) => f,
            Err(e) => {
                err = Some(e);
                return;
            }
        };
        if f == 0.0 {
            return;
        }
        for d in 0..n {
            dir[d] = x[d] - y[d];
        }
        if dir.iter().all(|v| *v == 0.0) {
            return; // singular point, measure zero
        }
        let interval = match ray_ball_interval(x, y, &op.rho.support_ball) {
            Ok(iv) => iv,
            Err(e) => {
                err = Some(e);
                return;
            }
        };
        let Some((a, b)) = interval else { return };
        let mut inner = 0.0;
        for (r, wr) in inner_rule.mapped(a, b) {
            for d in 0..n {
                p[d] = y[d] + r * dir[d];
            }
            let v = op.rho.value(&p);
            if v != 0.0 {
                inner += wr * v * r.powi(n as i32 - 1);
            }
        }
        if inner == 0.0 {
            return;
        }
        for d in 0..n {
            acc[d].add(w * f * dir[d] * inner);
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(acc.iter().map(|a| a.value()).collect())
}

/// Applies the potential operator A to a vector field:
/// Av(x) = int rho(y) int_0^1 v(sy + (1-s)x) . (x-y) ds dy.
/// Star-shapedness guarantees the segments [x, y] stay inside the domain.
pub fn potential_apply<V: VectorField + ?Sized>(op: &BogovskiiOp, v: &V, x: &[f64]) -> Result<f64> {
    let n = op.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    if !op.domain.contains(x) {
        return Err(Error::PointOutsideDomain(x.to_vec()));
    }
    let s_rule = GaussRule::new(op.quad.segment_order);
    let s_nodes: Vec<(f64, f64)> = s_rule.mapped(0.0, 1.0).collect();
    let mut total = KahanSum::new();
    let mut seg = vec![0.0f64; n];
    let mut buf = vec![0.0f64; n];
    for (i, wr) in op.rho_weights.iter().enumerate() {
        let y = &op.rho_nodes[i * n..(i + 1) * n];
        let mut inner = 0.0;
        for &(s, ws) in &s_nodes {
            for d in 0..n {
                seg[d] = s * y[d] + (1.0 - s) * x[d];
            }
            v.eval_into(&seg, &mut buf).map_err(|e| Error::EvalFailed {
                point: seg.clone(),
                reason: format!("potential segment evaluation: {e}"),
            })?;
            let mut dot = 0.0;
            for d in 0..n {
                dot += buf[d] * (x[d] - y[d]);
            }
            inner += ws * dot;
        }
        total.add(wr * inner);
    }
    Ok(total.value())
}

/// |int (Av) phi dx + int v . B phi dx|, computed with a pairing quadrature
/// independent of the operator rule (order offset +7). The identity is
/// exact for the true operators, so agreement between the independent
/// discretizations is the test.
pub fn duality_residual<V, F>(op: &BogovskiiOp, v: &V, phi: &Supported<F>) -> Result<f64>
where
    V: VectorField + ?Sized,
    F: ScalarField,
{
    let n = op.dim();
    let pairing_order = op.quad.gauss_order + 7;
    let pairing = GaussRule::new(pairing_order);

    // int (Av) phi over spt phi, with the quadrature shaped to the support.
    let phi_box = phi.support.bounding_box();
    let grid_a = RegionQuad::for_shape(&phi.support, pairing_order, 4 * pairing_order);
    let mut int_av_phi = KahanSum::new();
    let mut err = None;
    grid_a.for_each(|x, w| {
        if err.is_some() {
            return;
        }
        let fx = match phi.field.eval(x) {
            Ok(f) => f,
            Err(e) => {
                err = Some(e);
                return;
            }
        };
        if fx == 0.0 {
            return;
        }
        match potential_apply(op, v, x) {
            Ok(av) => int_av_phi.add(w * av * fx),
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }

    // int v . B phi over the hull of the two supports.
    let hull_box = phi_box.merge(&op.rho.support_ball.bounding_box());
    let grid_b = TensorGrid::new(&pairing, &hull_box.lo, &hull_box.hi);
    let mut int_v_bphi = KahanSum::new();
    let mut buf = vec![0.0f64; n];
    let mut err = None;
    grid_b.for_each(|x, w| {
        if err.is_some() {
            return;
        }
        if !op.domain.contains(x) {
            return;
        }
        let b = match bogovskii_apply(op, phi, x) {
            Ok(b) => b,
            Err(e) => {
                err = Some(e);
                return;
            }
        };
        if b.iter().all(|c| *c == 0.0) {
            return;
        }
        match v.eval_into(x, &mut buf) {
            Ok(()) => {
                let mut dot = 0.0;
                for d in 0..n {
                    dot += b[d] * buf[d];
                }
                int_v_bphi.add(w * dot);
            }
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }

    Ok((int_av_phi.value() + int_v_bphi.value()).abs())
}

/// The action of the reconstructed distribution F on phi:
/// <F, phi> = -<G, B phi>.
///
/// Computed through the substitution identity -int G . B phi = int (AG) phi,
/// which moves the pairing onto the support of phi where the quadrature can
/// be shaped to the support geometry. `duality_residual` independently
/// verifies that the two routes agree, so this path is not self-certifying.
pub fn derham_local_functional<V, F>(op: &BogovskiiOp, g: &V, phi: &Supported<F>) -> Result<f64>
where
    V: VectorField + ?Sized,
    F: ScalarField,
{
    let pairing_order = op.quad.gauss_order + 3;
    let grid = RegionQuad::for_shape(&phi.support, pairing_order, 4 * pairing_order);
    let mut total = KahanSum::new();
    let mut err = None;
    grid.for_each(|x, w| {
        if err.is_some() {
            return;
        }
        let fx = match phi.field.eval(x) {
            Ok(f) => f,
            Err(e) => {
                err = Some(e);
                return;
            }
        };
        if fx == 0.0 {
            return;
        }
        match potential_apply(op, g, x) {
            Ok(ag) => total.add(w * ag * fx),
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(total.value())
}
