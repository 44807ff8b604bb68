//! Gauss–Legendre rules, tensor-product and ball quadratures, and
//! compensated summation.

use crate::error::{Error, Result};
use crate::geometry::{Ball, Shape};

/// Nodes and weights of an `order`-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Computes the rule by Newton iteration on the Legendre polynomial.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss rule needs at least one node");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        // Roots are symmetric; solve for the lower half and mirror.
        for i in 0..n.div_ceil(2) {
            // Chebyshev-based initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussRule { nodes, weights }
    }

    /// Integrates `f` over [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut sum = KahanSum::new();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            sum.add(w * f(mid + half * x));
        }
        half * sum.value()
    }

    /// Nodes and weights mapped onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, w * half))
    }
}

/// Legendre polynomial P_n and its derivative at x, by recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Compensated (Kahan–Neumaier) accumulator. Quadrature reductions must be
/// insensitive to summation order to ~1e-13, which plain summation does not
/// guarantee at the node counts used here.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Tensor-product Gauss rule over an axis-aligned box, visiting
/// `(point, weight)` pairs. `lo`/`hi` give the box corners.
pub struct TensorGrid {
    axes: Vec<Vec<(f64, f64)>>,
}

impl TensorGrid {
    pub fn new(rule: &GaussRule, lo: &[f64], hi: &[f64]) -> Self {
        assert_eq!(lo.len(), hi.len());
        let axes = lo
            .iter()
            .zip(hi)
            .map(|(&a, &b)| rule.mapped(a, b).collect())
            .collect();
        TensorGrid { axes }
    }

    /// Calls `f(point, weight)` for every tensor node. The point buffer is
    /// reused between calls.
    pub fn for_each<F: FnMut(&[f64], f64)>(&self, mut f: F) {
        let n = self.axes.len();
        let mut idx = vec![0usize; n];
        let mut point = vec![0.0f64; n];
        loop {
            let mut w = 1.0;
            for d in 0..n {
                let (x, wd) = self.axes[d][idx[d]];
                point[d] = x;
                w *= wd;
            }
            f(&point, w);
            // Odometer increment.
            let mut d = 0;
            loop {
                if d == n {
                    return;
                }
                idx[d] += 1;
                if idx[d] < self.axes[d].len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }

    /// Sum of all weights (equals the box volume up to roundoff).
    pub fn weight_sum(&self) -> f64 {
        let mut total = KahanSum::new();
        self.for_each(|_, w| total.add(w));
        total.value()
    }
}

/// Unit directions and weights covering the sphere S^(n-1), n in {1, 2, 3}:
/// signed points for n = 1, uniform angles (spectrally accurate for periodic
/// integrands) for n = 2, Gauss in the polar cosine times uniform azimuth
/// for n = 3.
pub fn sphere_directions(n: usize, polar_order: usize, azimuth: usize) -> Vec<(Vec<f64>, f64)> {
    match n {
        1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        2 => {
            let m = azimuth.max(8);
            let w = 2.0 * std::f64::consts::PI / m as f64;
            (0..m)
                .map(|i| {
                    let th = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / m as f64;
                    (vec![th.cos(), th.sin()], w)
                })
                .collect()
        }
        3 => {
            let polar = GaussRule::new(polar_order.max(4));
            let m = azimuth.max(8);
            let wphi = 2.0 * std::f64::consts::PI / m as f64;
            let mut out = Vec::with_capacity(polar.nodes.len() * m);
            for (c, wc) in polar.nodes.iter().zip(&polar.weights) {
                let s = (1.0 - c * c).max(0.0).sqrt();
                for i in 0..m {
                    let th = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / m as f64;
                    out.push((vec![s * th.cos(), s * th.sin(), *c], wc * wphi));
                }
            }
            out
        }
        _ => panic!("sphere_directions supports n in {{1, 2, 3}}, got {n}"),
    }
}

/// Quadrature nodes over a ball in radial-angular form. Ball-supported
/// integrands (bumps) lose smoothness exactly on the bounding sphere; with
/// these nodes that edge coincides with the end of the radial panel, which
/// restores the one-dimensional Gauss convergence a tensor box rule loses.
#[derive(Debug, Clone)]
pub struct BallQuad {
    dim: usize,
    /// Flattened unit-ball nodes, `dim` coordinates per node.
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl BallQuad {
    /// Rule on the unit ball; map onto concrete balls with `for_each_on`.
    pub fn unit(dim: usize, radial_order: usize, azimuth: usize) -> Self {
        let rule = GaussRule::new(radial_order);
        let dirs = sphere_directions(dim, radial_order, azimuth);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (r, wr) in rule.mapped(0.0, 1.0) {
            let rpow = r.powi(dim as i32 - 1);
            for (u, wu) in &dirs {
                for d in 0..dim {
                    points.push(r * u[d]);
                }
                weights.push(wr * rpow * wu);
            }
        }
        BallQuad {
            dim,
            points,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Visits `(point, weight)` over the ball `B(center, radius)`.
    pub fn for_each_on<F: FnMut(&[f64], f64)>(&self, center: &[f64], radius: f64, mut f: F) {
        let n = self.dim;
        let scale = radius.powi(n as i32);
        let mut p = vec![0.0; n];
        for (i, w) in self.weights.iter().enumerate() {
            for d in 0..n {
                p[d] = center[d] + radius * self.points[i * n + d];
            }
            f(&p, w * scale);
        }
    }
}

/// Quadrature over a convex primitive: radial-angular on balls, tensor
/// Gauss on boxes.
pub enum RegionQuad {
    Ball {
        rule: BallQuad,
        center: Vec<f64>,
        radius: f64,
    },
    Box(TensorGrid),
}

impl RegionQuad {
    pub fn for_shape(shape: &Shape, order: usize, azimuth: usize) -> Self {
        match shape {
            Shape::Ball(b) => RegionQuad::Ball {
                rule: BallQuad::unit(b.dim(), order, azimuth),
                center: b.center.clone(),
                radius: b.radius,
            },
            Shape::Box(b) => RegionQuad::Box(TensorGrid::new(&GaussRule::new(order), &b.lo, &b.hi)),
        }
    }

    pub fn for_each<F: FnMut(&[f64], f64)>(&self, f: F) {
        match self {
            RegionQuad::Ball {
                rule,
                center,
                radius,
            } => rule.for_each_on(center, *radius, f),
            RegionQuad::Box(grid) => grid.for_each(f),
        }
    }
}

/// Surface measure of the unit sphere S^(n-1) for the dimensions we handle.
pub fn unit_sphere_measure(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => panic!("unit_sphere_measure supports n in {{1, 2, 3}}, got {n}"),
    }
}

/// Helper: radial integral over a ball of a radially symmetric function,
/// i.e. the sphere measure times the integral of f(r) r^(n-1) on [0, R].
pub fn radial_integral<F: FnMut(f64) -> f64>(ball: &Ball, order: usize, mut f: F) -> f64 {
    let n = ball.dim();
    let rule = GaussRule::new(order);
    unit_sphere_measure(n) * rule.integrate(0.0, ball.radius, |r| f(r) * r.powi(n as i32 - 1))
}

/// Quadrature orders for the integral operators. `gauss_order` is the
/// per-axis node count of the outer tensor rule, `inner_order` drives the
/// one-dimensional radial/segment rule, and `angular_order` the number of
/// uniform angles used by the polar evaluation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureRule {
    pub gauss_order: usize,
    pub inner_order: usize,
    pub angular_order: usize,
    /// Order of the [0, 1] segment rule inside the potential operator; it
    /// must out-resolve support edges of the data crossing the segments.
    pub segment_order: usize,
}

impl QuadratureRule {
    pub const MIN_ORDER: usize = 8;

    pub fn new(gauss_order: usize, inner_order: usize) -> Result<Self> {
        if gauss_order < Self::MIN_ORDER {
            return Err(Error::QuadratureOrderTooSmall {
                order: gauss_order,
                min: Self::MIN_ORDER,
            });
        }
        if inner_order < Self::MIN_ORDER {
            return Err(Error::QuadratureOrderTooSmall {
                order: inner_order,
                min: Self::MIN_ORDER,
            });
        }
        Ok(QuadratureRule {
            gauss_order,
            inner_order,
            angular_order: 4 * gauss_order,
            segment_order: inner_order,
        })
    }

    pub fn with_angular(mut self, angular_order: usize) -> Self {
        self.angular_order = angular_order;
        self
    }

    pub fn with_segment(mut self, segment_order: usize) -> Self {
        self.segment_order = segment_order;
        self
    }

    /// Default orders: 24 per axis outer, 32 inner.
    pub fn default_orders() -> Self {
        QuadratureRule::new(24, 32).expect("defaults are above the minimum")
    }

    /// A rule offset from this one, for verification quadratures that must
    /// not share discretization error with the primary rule.
    pub fn offset(&self, delta: usize) -> Self {
        QuadratureRule {
            gauss_order: self.gauss_order + delta,
            inner_order: self.inner_order + delta,
            angular_order: self.angular_order + 4 * delta,
            segment_order: self.segment_order + delta,
        }
    }
}
