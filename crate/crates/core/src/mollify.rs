//! Smooth bumps with prescribed support and unit mass, delta sequences,
//! field scaling and mollification, and the contract-extend-convolve
//! smoothing of FEP homotopies.

use crate::error::{Error, Result};
use crate::fieldspec::{ScalarField, VectorField};
use crate::geometry::{Ball, Domain};
use crate::homotopy::{Curve, Homotopy};
use crate::quadrature::{radial_integral, BallQuad, GaussRule, KahanSum};

/// Below this distance (in the squared-radius variable) from the support
/// sphere the raw bump value is an irrelevant subnormal; evaluating the
/// closed-form derivative there would produce 0 * inf.
const BUMP_EDGE: f64 = 1e-3;

/// The standard exponential bump: normalization * exp(-1/(1 - |x-c|^2/R^2))
/// inside the ball, exactly 0 outside (by branch, not underflow).
#[derive(Debug, Clone, PartialEq)]
pub struct Mollifier {
    pub support_ball: Ball,
    pub normalization: f64,
}

/// Builds the bump on the given ball. The bump is radially symmetric, so
/// the normalization reduces to a one-dimensional radial integral (Gauss
/// order 32); aligning the quadrature with the support edge keeps the
/// unit-mass error below 1e-8.
pub fn make_bump(ball: Ball) -> Mollifier {
    let raw = raw_bump_mass(&ball, 32);
    Mollifier {
        support_ball: ball,
        normalization: 1.0 / raw,
    }
}

fn raw_bump_mass(ball: &Ball, order: usize) -> f64 {
    let rr = ball.radius * ball.radius;
    radial_integral(ball, order, |r| {
        let u = r * r / rr;
        if u >= 1.0 - BUMP_EDGE {
            0.0
        } else {
            (-1.0 / (1.0 - u)).exp()
        }
    })
}

#[inline]
fn radial2(ball: &Ball, x: &[f64]) -> f64 {
    let mut d2 = 0.0;
    for (xi, ci) in x.iter().zip(&ball.center) {
        d2 += (xi - ci) * (xi - ci);
    }
    d2 / (ball.radius * ball.radius)
}

#[inline]
fn raw_bump(ball: &Ball, x: &[f64]) -> f64 {
    let u = radial2(ball, x);
    if u >= 1.0 - BUMP_EDGE {
        0.0
    } else {
        (-1.0 / (1.0 - u)).exp()
    }
}

impl Mollifier {
    pub fn dim(&self) -> usize {
        self.support_ball.dim()
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        self.normalization * raw_bump(&self.support_ball, x)
    }

    /// Closed-form partial derivative d rho / d x_j.
    #[inline]
    pub fn partial(&self, x: &[f64], j: usize) -> f64 {
        let u = radial2(&self.support_ball, x);
        if u >= 1.0 - BUMP_EDGE {
            return 0.0;
        }
        let r2 = self.support_ball.radius * self.support_ball.radius;
        let g = 1.0 - u;
        let v = self.normalization * (-1.0 / g).exp();
        v * (-2.0 * (x[j] - self.support_ball.center[j]) / r2) / (g * g)
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let u = radial2(&self.support_ball, x);
        if u >= 1.0 - BUMP_EDGE {
            out.fill(0.0);
            return;
        }
        let r2 = self.support_ball.radius * self.support_ball.radius;
        let g = 1.0 - u;
        let v = self.normalization * (-1.0 / g).exp();
        let c = -2.0 * v / (r2 * g * g);
        for (o, (xi, ci)) in out.iter_mut().zip(x.iter().zip(&self.support_ball.center)) {
            *o = c * (xi - ci);
        }
    }

    /// Mass by quadrature at the given order; equals 1 to quadrature accuracy.
    pub fn mass(&self, order: usize) -> f64 {
        self.normalization * raw_bump_mass(&self.support_ball, order)
    }

    /// The gradient as a vector field (compactly supported, divergence of
    /// nothing in particular, curl-free).
    pub fn gradient_field(&self) -> MollifierGradient {
        MollifierGradient { bump: self.clone() }
    }
}

impl ScalarField for Mollifier {
    fn dim(&self) -> usize {
        self.support_ball.dim()
    }
    fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(self.value(x))
    }
}

/// grad rho as a vector field.
#[derive(Debug, Clone)]
pub struct MollifierGradient {
    pub bump: Mollifier,
}

impl VectorField for MollifierGradient {
    fn dim(&self) -> usize {
        self.bump.dim()
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.bump.gradient_into(x, out);
        Ok(())
    }
}

/// One-dimensional delta sequence member: unit-mass bump on [-1/k, 1/k].
#[derive(Debug, Clone)]
pub struct DeltaSeq1D {
    pub k: u32,
    pub mollifier: Mollifier,
}

impl DeltaSeq1D {
    pub fn new(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::NonPositiveRadius(0.0));
        }
        let ball = Ball::new(vec![0.0], 1.0 / k as f64)?;
        Ok(DeltaSeq1D {
            k,
            mollifier: make_bump(ball),
        })
    }
}

/// Field dilation: x -> g(x / lambda) on the lambda-dilated domain. The
/// star center is assumed translated to the origin.
#[derive(Debug, Clone)]
pub struct Scaled<F> {
    pub inner: F,
    pub lambda: f64,
}

pub fn scale_field<F>(inner: F, lambda: f64) -> Result<Scaled<F>> {
    if lambda <= 1.0 {
        return Err(Error::ScaleNotGreaterThanOne(lambda));
    }
    Ok(Scaled { inner, lambda })
}

impl<F: ScalarField> ScalarField for Scaled<F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, x: &[f64]) -> Result<f64> {
        let y: Vec<f64> = x.iter().map(|v| v / self.lambda).collect();
        self.inner.eval(&y)
    }
}

impl<F: VectorField> VectorField for Scaled<F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let y: Vec<f64> = x.iter().map(|v| v / self.lambda).collect();
        self.inner.eval_into(&y, out)
    }
}

/// Mollified field: v(x) = integral of g(y) rho_l(y - x) dy over the support
/// ball of rho_l, by tensor quadrature. Evaluation requires the margin
/// dist(x, boundary of domain) > 1/l.
#[derive(Debug, Clone)]
pub struct Mollified<F> {
    pub inner: F,
    pub domain: Domain,
    pub l: u32,
    /// Sample offsets y - x (flattened, n per node) and kernel-premultiplied
    /// weights, normalized so the discrete kernel has exactly unit mass.
    offsets: Vec<f64>,
    weights: Vec<f64>,
}

pub fn mollified<F>(inner: F, domain: Domain, l: u32, rule_order: usize) -> Result<Mollified<F>> {
    if l == 0 {
        return Err(Error::NonPositiveRadius(0.0));
    }
    let n = domain.dim();
    let radius = 1.0 / l as f64;
    let ball = Ball::new(vec![0.0; n], radius)?;
    let rho = make_bump(ball);
    let rule = BallQuad::unit(n, rule_order, 4 * rule_order);
    let mut offsets = Vec::new();
    let mut weights = Vec::new();
    let mut mass = KahanSum::new();
    rule.for_each_on(&vec![0.0; n], radius, |z, w| {
        let k = rho.value(z);
        if k != 0.0 {
            offsets.extend_from_slice(z);
            weights.push(w * k);
            mass.add(w * k);
        }
    });
    let mass = mass.value();
    for w in &mut weights {
        *w /= mass;
    }
    Ok(Mollified {
        inner,
        domain,
        l,
        offsets,
        weights,
    })
}

impl<F> Mollified<F> {
    fn check_margin(&self, x: &[f64]) -> Result<()> {
        let radius = 1.0 / self.l as f64;
        let available = self.domain.inner_dist(x);
        if available <= radius {
            return Err(Error::MollificationMargin {
                point: x.to_vec(),
                needed: radius,
                available,
            });
        }
        Ok(())
    }
}

impl<F: ScalarField> ScalarField for Mollified<F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_margin(x)?;
        let n = x.len();
        let mut total = KahanSum::new();
        let mut y = vec![0.0; n];
        for (i, w) in self.weights.iter().enumerate() {
            for d in 0..n {
                y[d] = x[d] + self.offsets[i * n + d];
            }
            total.add(w * self.inner.eval(&y)?);
        }
        Ok(total.value())
    }
}

impl<F: VectorField> VectorField for Mollified<F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_margin(x)?;
        let n = out.len();
        let mut sums = vec![KahanSum::new(); n];
        let mut y = vec![0.0; n];
        let mut buf = vec![0.0; n];
        for (i, w) in self.weights.iter().enumerate() {
            for d in 0..n {
                y[d] = x[d] + self.offsets[i * n + d];
            }
            self.inner.eval_into(&y, &mut buf)?;
            for (s, v) in sums.iter_mut().zip(&buf) {
                s.add(w * v);
            }
        }
        for (o, s) in out.iter_mut().zip(&sums) {
            *o = s.value();
        }
        Ok(())
    }
}

/// Samples of the mollified scalar field at the given points.
pub fn mollify_field<F: ScalarField>(
    g: F,
    domain: &Domain,
    l: u32,
    eval_points: &[Vec<f64>],
    rule_order: usize,
) -> Result<Vec<f64>> {
    let m = mollified(g, domain.clone(), l, rule_order)?;
    eval_points.iter().map(|x| m.eval(x)).collect()
}

/// The paper's contract-and-extend clamp: 0 on [-1/4, 1/4], 1 on [3/4, 5/4],
/// affine between.
#[inline]
pub fn alpha_clamp(s: f64) -> f64 {
    if s <= 0.25 {
        0.0
    } else if s >= 0.75 {
        1.0
    } else {
        2.0 * (s - 0.25)
    }
}

/// Smoothed homotopy: reparameterize with the clamp, then convolve both
/// parameters with a 1-D delta-sequence bump of index k. Endpoint columns
/// stay pinned exactly: for s within 1/k of the flat clamp region the map is
/// constant and is returned as such.
#[derive(Debug, Clone)]
pub struct SmoothedHomotopy {
    base: Homotopy,
    pub k: u32,
    rho: Mollifier,
    s_breaks: Vec<f64>,
    t_breaks: Vec<f64>,
    x0: Vec<f64>,
    x1: Vec<f64>,
    panel_order: usize,
}

pub fn mollify_homotopy(base: &Homotopy, k: u32) -> Result<SmoothedHomotopy> {
    if k < 4 {
        return Err(Error::SmoothingIndexTooSmall(k));
    }
    let rho = DeltaSeq1D::new(k)?.mollifier;
    let map_breaks = |b: Vec<f64>| -> Vec<f64> {
        // Preimages under the clamp's affine middle part, plus its kinks.
        let mut out = vec![0.25, 0.75];
        out.extend(b.into_iter().map(|x| 0.25 + 0.5 * x));
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        out
    };
    let (x0, x1) = base.endpoints();
    Ok(SmoothedHomotopy {
        s_breaks: map_breaks(base.s_breaks()),
        t_breaks: map_breaks(base.t_breaks()),
        base: base.clone(),
        k,
        rho,
        x0,
        x1,
        panel_order: 16,
    })
}

/// Kernel-weighted nodes over the window [c - 1/k, c + 1/k], split at
/// breakpoints. Returns (node, weight * rho(c - node)) pairs and their sum.
struct WindowNodes {
    nodes: Vec<(f64, f64)>,
    mass: f64,
}

impl SmoothedHomotopy {
    fn window(&self, center: f64, breaks: &[f64], derivative: bool) -> WindowNodes {
        let r = 1.0 / self.k as f64;
        let (lo, hi) = (center - r, center + r);
        let mut cuts = vec![lo];
        for &b in breaks {
            if b > lo + 1e-14 && b < hi - 1e-14 {
                cuts.push(b);
            }
        }
        cuts.push(hi);
        let rule = GaussRule::new(self.panel_order);
        let max_len = (hi - lo) / 4.0;
        let mut nodes = Vec::new();
        let mut mass = KahanSum::new();
        for w in cuts.windows(2) {
            let pieces = ((w[1] - w[0]) / max_len).ceil().max(1.0) as usize;
            for p in 0..pieces {
                let a = w[0] + (w[1] - w[0]) * p as f64 / pieces as f64;
                let b = w[0] + (w[1] - w[0]) * (p + 1) as f64 / pieces as f64;
                for (x, wq) in rule.mapped(a, b) {
                    let arg = [center - x];
                    let k = if derivative {
                        self.rho.partial(&arg, 0)
                    } else {
                        self.rho.value(&arg)
                    };
                    nodes.push((x, wq * k));
                    mass.add(wq * k);
                }
            }
        }
        WindowNodes {
            nodes,
            mass: mass.value(),
        }
    }

    /// Convolution of `f(s')` against the kernel window at `center`,
    /// renormalized by the kernel mass so constants are reproduced.
    fn conv<G: FnMut(f64, &mut [f64])>(
        &self,
        center: f64,
        breaks: &[f64],
        mut f: G,
        dim: usize,
    ) -> Vec<f64> {
        let win = self.window(center, breaks, false);
        let mut sums = vec![KahanSum::new(); dim];
        let mut buf = vec![0.0; dim];
        for (x, wk) in &win.nodes {
            f(*x, &mut buf);
            for (s, v) in sums.iter_mut().zip(&buf) {
                s.add(wk * v);
            }
        }
        sums.iter().map(|s| s.value() / win.mass).collect()
    }

    /// d/dcenter of the renormalized convolution (quotient rule).
    fn conv_deriv<G: FnMut(f64, &mut [f64])>(
        &self,
        center: f64,
        breaks: &[f64],
        mut f: G,
        dim: usize,
    ) -> Vec<f64> {
        let win = self.window(center, breaks, false);
        let win_d = self.window(center, breaks, true);
        let mut m = vec![KahanSum::new(); dim];
        let mut md = vec![KahanSum::new(); dim];
        let mut buf = vec![0.0; dim];
        for ((x, wk), (_, wkd)) in win.nodes.iter().zip(&win_d.nodes) {
            f(*x, &mut buf);
            for d in 0..dim {
                m[d].add(wk * buf[d]);
                md[d].add(wkd * buf[d]);
            }
        }
        let (w, wd) = (win.mass, win_d.mass);
        (0..dim)
            .map(|d| (md[d].value() * w - m[d].value() * wd) / (w * w))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    fn radius(&self) -> f64 {
        1.0 / self.k as f64
    }

    pub fn eval(&self, s: f64, t: f64) -> Vec<f64> {
        let r = self.radius();
        // Exact endpoint pinning: the reparameterized map is constant on
        // these windows.
        if s + r <= 0.25 {
            return self.x0.clone();
        }
        if s - r >= 0.75 {
            return self.x1.clone();
        }
        let n = self.dim();
        match &self.base {
            Homotopy::StraightLine { gamma, gamma_tilde } => {
                // Separable: conv distributes over the affine t-blend.
                let gs = self.conv(
                    s,
                    &self.s_breaks.clone(),
                    |sp, out| {
                        out.copy_from_slice(&gamma.point(alpha_clamp(sp)));
                    },
                    n,
                );
                let gst = self.conv(
                    s,
                    &self.s_breaks.clone(),
                    |sp, out| {
                        out.copy_from_slice(&gamma_tilde.point(alpha_clamp(sp)));
                    },
                    n,
                );
                let at = self.conv(
                    t,
                    &self.t_breaks.clone(),
                    |tp, out| {
                        out[0] = alpha_clamp(tp);
                    },
                    1,
                )[0];
                gs.iter()
                    .zip(&gst)
                    .map(|(a, b)| (1.0 - at) * a + at * b)
                    .collect()
            }
            Homotopy::UserGrid(_) => {
                let swin = self.window(s, &self.s_breaks, false);
                let twin = self.window(t, &self.t_breaks, false);
                let mut sums = vec![KahanSum::new(); n];
                for (sp, wks) in &swin.nodes {
                    let as_ = alpha_clamp(*sp);
                    for (tp, wkt) in &twin.nodes {
                        let p = self.base.eval(as_, alpha_clamp(*tp));
                        let w = wks * wkt;
                        for (acc, v) in sums.iter_mut().zip(&p) {
                            acc.add(w * v);
                        }
                    }
                }
                let norm = swin.mass * twin.mass;
                sums.iter().map(|a| a.value() / norm).collect()
            }
        }
    }

    /// Smoothed boundary row j in {0, 1}: the curve s -> Gamma~_k(s, j),
    /// which equals the clamped original row convolved with rho_k.
    pub fn boundary_path(&self, row: usize) -> SmoothedBoundaryPath {
        SmoothedBoundaryPath {
            parent: self.clone(),
            row: row.min(1),
        }
    }

    /// All 64x64 (or per-axis) samples must land inside the domain.
    pub fn check_in_domain(&self, domain: &Domain, per_axis: usize) -> Result<()> {
        for i in 0..=per_axis {
            let s = i as f64 / per_axis as f64;
            for j in 0..=per_axis {
                let t = j as f64 / per_axis as f64;
                let p = self.eval(s, t);
                if !domain.contains(&p) {
                    return Err(Error::HomotopyLeavesDomain { s, t, point: p });
                }
            }
        }
        Ok(())
    }
}

/// Boundary row of a smoothed homotopy, as a curve with closed-form
/// (quadrature) velocity.
#[derive(Debug, Clone)]
pub struct SmoothedBoundaryPath {
    parent: SmoothedHomotopy,
    row: usize,
}

impl SmoothedBoundaryPath {
    fn row_point(&self, sp: f64, out: &mut [f64]) {
        let v = self.parent.base.eval(alpha_clamp(sp), self.row as f64);
        out.copy_from_slice(&v);
    }
}

impl Curve for SmoothedBoundaryPath {
    fn dim(&self) -> usize {
        self.parent.dim()
    }

    fn point(&self, s: f64) -> Vec<f64> {
        let r = self.parent.radius();
        if s + r <= 0.25 {
            return self.parent.x0.clone();
        }
        if s - r >= 0.75 {
            return self.parent.x1.clone();
        }
        let n = self.parent.dim();
        let breaks = self.parent.s_breaks.clone();
        self.parent
            .conv(s, &breaks, |sp, out| self.row_point(sp, out), n)
    }

    fn velocity(&self, s: f64) -> Vec<f64> {
        let r = self.parent.radius();
        if s + r <= 0.25 || s - r >= 0.75 {
            return vec![0.0; self.parent.dim()];
        }
        let n = self.parent.dim();
        let breaks = self.parent.s_breaks.clone();
        self.parent
            .conv_deriv(s, &breaks, |sp, out| self.row_point(sp, out), n)
    }

    fn breaks(&self) -> Vec<f64> {
        // The row is smooth; return uniform cuts so the integrator uses
        // enough panels to track the kernel-width features.
        (1..16).map(|i| i as f64 / 16.0).collect()
    }
}
