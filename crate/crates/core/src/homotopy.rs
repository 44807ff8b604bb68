//! C1 paths with clamped endpoints, line integrals, FEP homotopies, the
//! divergence-theorem field w, and the homotopy-invariance verdict.

use crate::error::{Error, Result};
use crate::fieldspec::{curl_residual, FiniteDiffScheme, VectorField};
use crate::geometry::Domain;
use crate::mollify::{mollify_homotopy, SmoothedHomotopy};
use crate::quadrature::{GaussRule, KahanSum};

/// Parameterized curve on [0, 1].
pub trait Curve {
    fn dim(&self) -> usize;
    fn point(&self, s: f64) -> Vec<f64>;
    fn velocity(&self, s: f64) -> Vec<f64>;
    /// Interior parameters where the curve loses smoothness (panel joints).
    fn breaks(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl<T: Curve + ?Sized> Curve for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn point(&self, s: f64) -> Vec<f64> {
        (**self).point(s)
    }
    fn velocity(&self, s: f64) -> Vec<f64> {
        (**self).velocity(s)
    }
    fn breaks(&self) -> Vec<f64> {
        (**self).breaks()
    }
}

/// Smoothstep clamp: sigma(0)=0, sigma(1)=1, sigma'(0)=sigma'(1)=0.
#[inline]
pub fn smoothstep(s: f64) -> f64 {
    3.0 * s * s - 2.0 * s * s * s
}

#[inline]
fn smoothstep_deriv(s: f64) -> f64 {
    6.0 * s - 6.0 * s * s
}

/// Inverse of the smoothstep on [0, 1], by bisection.
fn smoothstep_inv(y: f64) -> f64 {
    let (mut a, mut b) = (0.0f64, 1.0f64);
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if smoothstep(m) < y {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Piecewise-cubic (Catmull-Rom) path through waypoints, composed with a
/// smoothstep so the endpoint velocities vanish exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    waypoints: Vec<Vec<f64>>,
    break_params: Vec<f64>,
}

impl Path {
    pub fn new(waypoints: Vec<Vec<f64>>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: waypoints.len(),
            });
        }
        let dim = waypoints[0].len();
        if waypoints.iter().any(|w| w.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: 0,
            });
        }
        let segs = waypoints.len() - 1;
        let break_params = (1..segs)
            .map(|k| smoothstep_inv(k as f64 / segs as f64))
            .collect();
        Ok(Path {
            waypoints,
            break_params,
        })
    }

    /// Straight segment between two points.
    pub fn segment(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        Path::new(vec![a, b])
    }

    pub fn reversed(&self) -> Path {
        let mut w = self.waypoints.clone();
        w.reverse();
        Path::new(w).expect("reversal preserves validity")
    }

    pub fn start(&self) -> &[f64] {
        &self.waypoints[0]
    }

    pub fn end(&self) -> &[f64] {
        self.waypoints.last().unwrap()
    }

    fn tangent(&self, i: usize) -> Vec<f64> {
        let n = self.waypoints.len();
        let (a, b, scale) = if i == 0 {
            (0, 1, 1.0)
        } else if i == n - 1 {
            (n - 2, n - 1, 1.0)
        } else {
            (i - 1, i + 1, 0.5)
        };
        self.waypoints[a]
            .iter()
            .zip(&self.waypoints[b])
            .map(|(p, q)| (q - p) * scale)
            .collect()
    }

    /// Spline point and d/dtau at global parameter tau in [0, 1].
    fn spline(&self, tau: f64) -> (Vec<f64>, Vec<f64>) {
        let segs = (self.waypoints.len() - 1) as f64;
        let u = (tau * segs).clamp(0.0, segs);
        let seg = (u.floor() as usize).min(self.waypoints.len() - 2);
        let t = u - seg as f64;
        let p0 = &self.waypoints[seg];
        let p1 = &self.waypoints[seg + 1];
        let m0 = self.tangent(seg);
        let m1 = self.tangent(seg + 1);
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = 6.0 * t - 6.0 * t2;
        let d11 = 3.0 * t2 - 2.0 * t;
        let dim = p0.len();
        let mut pt = vec![0.0; dim];
        let mut dv = vec![0.0; dim];
        for d in 0..dim {
            pt[d] = h00 * p0[d] + h10 * m0[d] + h01 * p1[d] + h11 * m1[d];
            dv[d] = (d00 * p0[d] + d10 * m0[d] + d01 * p1[d] + d11 * m1[d]) * segs;
        }
        (pt, dv)
    }

    /// Check the image against a domain on `samples` parameter values.
    pub fn check_in_domain(&self, domain: &Domain, samples: usize) -> Result<()> {
        for i in 0..=samples {
            let s = i as f64 / samples as f64;
            let p = self.point(s);
            if !domain.contains(&p) {
                return Err(Error::PathLeavesDomain { s, point: p });
            }
        }
        Ok(())
    }
}

impl Curve for Path {
    fn dim(&self) -> usize {
        self.waypoints[0].len()
    }

    fn point(&self, s: f64) -> Vec<f64> {
        self.spline(smoothstep(s)).0
    }

    fn velocity(&self, s: f64) -> Vec<f64> {
        let (_, mut dv) = self.spline(smoothstep(s));
        let c = smoothstep_deriv(s);
        for v in &mut dv {
            *v *= c;
        }
        dv
    }

    fn breaks(&self) -> Vec<f64> {
        self.break_params.clone()
    }
}

/// Curve traversed backwards.
pub struct ReversedCurve<C>(pub C);

impl<C: Curve> Curve for ReversedCurve<C> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn point(&self, s: f64) -> Vec<f64> {
        self.0.point(1.0 - s)
    }
    fn velocity(&self, s: f64) -> Vec<f64> {
        self.0.velocity(1.0 - s).into_iter().map(|v| -v).collect()
    }
    fn breaks(&self) -> Vec<f64> {
        self.0.breaks().into_iter().map(|b| 1.0 - b).rev().collect()
    }
}

/// Two curves glued at s = 1/2. Clamped endpoint velocities make the joint C1.
pub struct ConcatCurve<A, B> {
    pub first: A,
    pub second: B,
}

impl<A: Curve, B: Curve> Curve for ConcatCurve<A, B> {
    fn dim(&self) -> usize {
        self.first.dim()
    }
    fn point(&self, s: f64) -> Vec<f64> {
        if s < 0.5 {
            self.first.point(2.0 * s)
        } else {
            self.second.point(2.0 * s - 1.0)
        }
    }
    fn velocity(&self, s: f64) -> Vec<f64> {
        let mut v = if s < 0.5 {
            self.first.velocity(2.0 * s)
        } else {
            self.second.velocity(2.0 * s - 1.0)
        };
        for c in &mut v {
            *c *= 2.0;
        }
        v
    }
    fn breaks(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.first.breaks().into_iter().map(|x| 0.5 * x).collect();
        b.push(0.5);
        b.extend(self.second.breaks().into_iter().map(|x| 0.5 + 0.5 * x));
        b
    }
}

/// Composite Gauss-Legendre line integral of `v` along the curve:
/// the integral of v(gamma(s)) . gamma'(s) over [0, 1], with panels split at
/// the curve's smoothness breaks.
pub fn line_integral<V, C>(v: &V, curve: &C, quad_order: usize) -> Result<f64>
where
    V: VectorField + ?Sized,
    C: Curve + ?Sized,
{
    let rule = GaussRule::new(quad_order.max(4));
    let mut cuts = vec![0.0];
    let mut breaks = curve.breaks();
    breaks.retain(|b| *b > 0.0 && *b < 1.0);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.extend(breaks);
    cuts.push(1.0);
    // Subdivide long panels so sparse-break curves still get resolution.
    let mut panels = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let pieces = ((b - a) / 0.125).ceil().max(1.0) as usize;
        for p in 0..pieces {
            let lo = a + (b - a) * p as f64 / pieces as f64;
            let hi = a + (b - a) * (p + 1) as f64 / pieces as f64;
            panels.push((lo, hi));
        }
    }
    let n = curve.dim();
    let mut buf = vec![0.0; n];
    let mut total = KahanSum::new();
    for (a, b) in panels {
        for (s, w) in rule.mapped(a, b) {
            let p = curve.point(s);
            let vel = curve.velocity(s);
            v.eval_into(&p, &mut buf).map_err(|e| Error::EvalFailed {
                point: p.clone(),
                reason: format!("line integral at s={s}: {e}"),
            })?;
            let dot: f64 = buf.iter().zip(&vel).map(|(a, b)| a * b).sum();
            total.add(w * dot);
        }
    }
    Ok(total.value())
}

/// FEP homotopy between two paths on [0,1]^2.
#[derive(Debug, Clone)]
pub enum Homotopy {
    /// Gamma(s,t) = (1-t) gamma(s) + t gamma~(s).
    StraightLine { gamma: Path, gamma_tilde: Path },
    /// Sampled map with bilinear interpolation between grid nodes.
    UserGrid(GridHomotopy),
}

#[derive(Debug, Clone)]
pub struct GridHomotopy {
    pub ns: usize,
    pub nt: usize,
    /// Node (i, j) at flat index i * nt + j maps (i/(ns-1), j/(nt-1)).
    pub points: Vec<Vec<f64>>,
}

impl Homotopy {
    pub fn straight_line(gamma: Path, gamma_tilde: Path) -> Result<Self> {
        let tol = 1e-12;
        let close = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
        };
        if !close(gamma.start(), gamma_tilde.start()) || !close(gamma.end(), gamma_tilde.end()) {
            return Err(Error::DimensionMismatch {
                expected: gamma.dim(),
                got: gamma_tilde.dim(),
            });
        }
        Ok(Homotopy::StraightLine { gamma, gamma_tilde })
    }

    pub fn user_grid(ns: usize, nt: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if ns < 2 || nt < 2 || points.len() != ns * nt {
            return Err(Error::DimensionMismatch {
                expected: ns * nt,
                got: points.len(),
            });
        }
        let g = GridHomotopy { ns, nt, points };
        // FEP asserted on the sampled columns.
        let x0 = g.eval(0.0, 0.0);
        let x1 = g.eval(1.0, 0.0);
        for j in 0..nt {
            let t = j as f64 / (nt - 1) as f64;
            let a = g.eval(0.0, t);
            let b = g.eval(1.0, t);
            let near = |p: &[f64], q: &[f64]| {
                p.iter()
                    .zip(q)
                    .all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()))
            };
            if !near(&a, &x0) || !near(&b, &x1) {
                return Err(Error::HomotopyLeavesDomain {
                    s: 0.0,
                    t,
                    point: a,
                });
            }
        }
        Ok(Homotopy::UserGrid(g))
    }

    pub fn dim(&self) -> usize {
        match self {
            Homotopy::StraightLine { gamma, .. } => gamma.dim(),
            Homotopy::UserGrid(g) => g.points[0].len(),
        }
    }

    pub fn eval(&self, s: f64, t: f64) -> Vec<f64> {
        match self {
            Homotopy::StraightLine { gamma, gamma_tilde } => {
                let a = gamma.point(s);
                let b = gamma_tilde.point(s);
                a.iter()
                    .zip(&b)
                    .map(|(x, y)| (1.0 - t) * x + t * y)
                    .collect()
            }
            Homotopy::UserGrid(g) => g.eval(s, t),
        }
    }

    /// Fixed endpoints.
    pub fn endpoints(&self) -> (Vec<f64>, Vec<f64>) {
        (self.eval(0.0, 0.0), self.eval(1.0, 0.0))
    }

    /// Parameters where smoothness in s degrades.
    pub fn s_breaks(&self) -> Vec<f64> {
        match self {
            Homotopy::StraightLine { gamma, gamma_tilde } => {
                let mut b = gamma.breaks();
                b.extend(gamma_tilde.breaks());
                b.sort_by(|a, c| a.partial_cmp(c).unwrap());
                b.dedup_by(|a, c| (*a - *c).abs() < 1e-12);
                b
            }
            Homotopy::UserGrid(g) => (1..g.ns - 1)
                .map(|i| i as f64 / (g.ns - 1) as f64)
                .collect(),
        }
    }

    pub fn t_breaks(&self) -> Vec<f64> {
        match self {
            Homotopy::StraightLine { .. } => Vec::new(),
            Homotopy::UserGrid(g) => (1..g.nt - 1)
                .map(|j| j as f64 / (g.nt - 1) as f64)
                .collect(),
        }
    }

    /// Check all (s, t) samples on a grid stay inside the domain.
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

impl GridHomotopy {
    fn eval(&self, s: f64, t: f64) -> Vec<f64> {
        let dim = self.points[0].len();
        let u = (s.clamp(0.0, 1.0)) * (self.ns - 1) as f64;
        let v = (t.clamp(0.0, 1.0)) * (self.nt - 1) as f64;
        let i = (u.floor() as usize).min(self.ns - 2);
        let j = (v.floor() as usize).min(self.nt - 2);
        let (a, b) = (u - i as f64, v - j as f64);
        let mut out = vec![0.0; dim];
        let idx = |i: usize, j: usize| i * self.nt + j;
        for d in 0..dim {
            out[d] = (1.0 - a) * (1.0 - b) * self.points[idx(i, j)][d]
                + a * (1.0 - b) * self.points[idx(i + 1, j)][d]
                + (1.0 - a) * b * self.points[idx(i, j + 1)][d]
                + a * b * self.points[idx(i + 1, j + 1)][d];
        }
        out
    }
}

/// The paper's auxiliary field on parameter space:
/// w(s,t) = ( v(G(s,t)) . dG/dt , -v(G(s,t)) . dG/ds ),
/// with dG by central differences of step `h` (default 1/512). For curl-free
/// v and twice-differentiable G, div w = 0.
pub fn w_field<V: VectorField + ?Sized>(
    v: &V,
    map: &dyn Fn(f64, f64) -> Vec<f64>,
    s: f64,
    t: f64,
    h: f64,
) -> Result<[f64; 2]> {
    if s - h < 0.0 || s + h > 1.0 || t - h < 0.0 || t + h > 1.0 {
        return Err(Error::StencilOutsideDomain {
            point: vec![s, t],
            axis: 0,
        });
    }
    let p = map(s, t);
    let vp = v.eval(&p)?;
    let dgds: Vec<f64> = {
        let a = map(s + h, t);
        let b = map(s - h, t);
        a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * h)).collect()
    };
    let dgdt: Vec<f64> = {
        let a = map(s, t + h);
        let b = map(s, t - h);
        a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * h)).collect()
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    Ok([dot(&vp, &dgdt), -dot(&vp, &dgds)])
}

/// Default parameter-space step for homotopy derivatives.
pub const HOMOTOPY_FD_STEP: f64 = 1.0 / 512.0;

/// Settings for the homotopy-invariance check.
#[derive(Debug, Clone)]
pub struct InvarianceConfig {
    pub curl_tolerance: f64,
    pub curl_fd: FiniteDiffScheme,
    pub quad_order: usize,
    /// Probes along each path image for the curl precondition.
    pub curl_probes: usize,
    /// Samples per axis for image-containment checks.
    pub containment_samples: usize,
}

impl Default for InvarianceConfig {
    fn default() -> Self {
        InvarianceConfig {
            curl_tolerance: 1e-6,
            curl_fd: FiniteDiffScheme::order4(1e-4),
            quad_order: 16,
            curl_probes: 33,
            containment_samples: 48,
        }
    }
}

/// Outcome of `homotopy_invariance_check`.
#[derive(Debug, Clone)]
pub struct InvarianceReport {
    /// |int_gamma v - int_gamma~ v|.
    pub residual: f64,
    /// Integrals over the two smoothed boundary rows of Gamma~_k.
    pub smoothed_residual: f64,
    /// |int over smoothed row j - int over original path j|, j = 0, 1.
    pub boundary_residual: [f64; 2],
    pub integral_gamma: f64,
    pub integral_gamma_tilde: f64,
    pub k_used: u32,
}

/// Verifies that two FEP-homotopic paths give the same line integral for a
/// curl-free field. Refuses when the curl precondition fails, a path or the
/// homotopy leaves the domain, or the smoothing index is below the
/// admissible threshold.
pub fn homotopy_invariance_check<V: VectorField + ?Sized>(
    v: &V,
    domain: &Domain,
    gamma: &Path,
    gamma_tilde: &Path,
    homotopy: &Homotopy,
    k: u32,
    cfg: &InvarianceConfig,
) -> Result<InvarianceReport> {
    // Curl precondition along both images.
    let mut probes = Vec::new();
    for i in 0..cfg.curl_probes {
        let s = (i as f64 + 0.5) / cfg.curl_probes as f64;
        probes.push(gamma.point(s));
        probes.push(gamma_tilde.point(s));
    }
    let curl = curl_residual(v, &probes, cfg.curl_fd)?;
    if curl > cfg.curl_tolerance {
        return Err(Error::CurlResidualExceeded {
            residual: curl,
            tolerance: cfg.curl_tolerance,
        });
    }

    gamma.check_in_domain(domain, 1000)?;
    gamma_tilde.check_in_domain(domain, 1000)?;
    homotopy.check_in_domain(domain, cfg.containment_samples)?;

    // Smoothing admissibility: the mollified homotopy must stay inside the
    // domain for the chosen k. The sweep finds the smallest admissible
    // power-of-two index for the diagnostic.
    let smoothed = mollify_homotopy(homotopy, k)?;
    if smoothed.check_in_domain(domain, 64).is_err() {
        let mut k0 = 4u32;
        while k0 <= 1 << 16 {
            if mollify_homotopy(homotopy, k0)
                .and_then(|sm| sm.check_in_domain(domain, 64))
                .is_ok()
            {
                break;
            }
            k0 *= 2;
        }
        return Err(Error::SmoothingIndexBelowAdmissible { k, k0 });
    }

    let i_gamma = line_integral(v, gamma, cfg.quad_order)?;
    let i_tilde = line_integral(v, gamma_tilde, cfg.quad_order)?;

    let row0 = smoothed.boundary_path(0);
    let row1 = smoothed.boundary_path(1);
    let i_row0 = line_integral(v, &row0, cfg.quad_order)?;
    let i_row1 = line_integral(v, &row1, cfg.quad_order)?;

    Ok(InvarianceReport {
        residual: (i_gamma - i_tilde).abs(),
        smoothed_residual: (i_row0 - i_row1).abs(),
        boundary_residual: [(i_row0 - i_gamma).abs(), (i_row1 - i_tilde).abs()],
        integral_gamma: i_gamma,
        integral_gamma_tilde: i_tilde,
        k_used: k,
    })
}

/// Convenience: smoothed homotopy sampler for diagnostics.
pub fn smooth_homotopy(h: &Homotopy, k: u32) -> Result<SmoothedHomotopy> {
    mollify_homotopy(h, k)
}
