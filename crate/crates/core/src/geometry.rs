//! Balls, boxes, star-shaped domains, covers and chains, plus the ray and
//! hull predicates the integral operators are built on.

use crate::error::{Error, Result};
use rand::Rng;

/// Open ball in R^n.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if radius <= 0.0 {
            return Err(Error::NonPositiveRadius(radius));
        }
        Ok(Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        dist2(x, &self.center) < self.radius * self.radius
    }

    /// Signed distance to the sphere: negative inside.
    pub fn signed_dist(&self, x: &[f64]) -> f64 {
        dist2(x, &self.center).sqrt() - self.radius
    }

    pub fn bounding_box(&self) -> AxisBox {
        let lo = self.center.iter().map(|c| c - self.radius).collect();
        let hi = self.center.iter().map(|c| c + self.radius).collect();
        AxisBox { lo, hi }
    }
}

/// Axis-aligned box, given by its lower and upper corners.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        for (a, b) in lo.iter().zip(&hi) {
            if a >= b {
                return Err(Error::NonPositiveRadius(b - a));
            }
        }
        Ok(AxisBox { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| v > a && v < b)
    }

    /// Distance from `x` to the box (0 inside).
    pub fn dist(&self, x: &[f64]) -> f64 {
        let mut d2 = 0.0;
        for (v, (a, b)) in x.iter().zip(self.lo.iter().zip(&self.hi)) {
            let c = v.clamp(*a, *b);
            d2 += (v - c) * (v - c);
        }
        d2.sqrt()
    }

    /// Distance from an interior point to the boundary (negative outside).
    pub fn inner_dist(&self, x: &[f64]) -> f64 {
        let mut m = f64::INFINITY;
        for (v, (a, b)) in x.iter().zip(self.lo.iter().zip(&self.hi)) {
            m = m.min(v - a).min(b - v);
        }
        m
    }

    pub fn diameter(&self) -> f64 {
        dist2(&self.lo, &self.hi).sqrt()
    }

    /// Smallest box containing both.
    pub fn merge(&self, other: &AxisBox) -> AxisBox {
        let lo = self
            .lo
            .iter()
            .zip(&other.lo)
            .map(|(a, b)| a.min(*b))
            .collect();
        let hi = self
            .hi
            .iter()
            .zip(&other.hi)
            .map(|(a, b)| a.max(*b))
            .collect();
        AxisBox { lo, hi }
    }

    pub fn grown(&self, pad: f64) -> AxisBox {
        AxisBox {
            lo: self.lo.iter().map(|v| v - pad).collect(),
            hi: self.hi.iter().map(|v| v + pad).collect(),
        }
    }
}

/// Convex primitive: ball or axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Ball(Ball),
    Box(AxisBox),
}

impl Shape {
    pub fn dim(&self) -> usize {
        match self {
            Shape::Ball(b) => b.dim(),
            Shape::Box(b) => b.dim(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Shape::Ball(b) => b.contains(x),
            Shape::Box(b) => b.contains(x),
        }
    }

    pub fn bounding_box(&self) -> AxisBox {
        match self {
            Shape::Ball(b) => b.bounding_box(),
            Shape::Box(b) => b.clone(),
        }
    }

    /// Distance from an interior point to the boundary (negative outside).
    pub fn inner_dist(&self, x: &[f64]) -> f64 {
        match self {
            Shape::Ball(b) => -b.signed_dist(x),
            Shape::Box(b) => b.inner_dist(x),
        }
    }

    /// {t >= 0 : origin + t dir in shape}, as a closed interval, or None.
    pub fn ray_interval(&self, origin: &[f64], dir: &[f64]) -> Option<(f64, f64)> {
        match self {
            Shape::Ball(b) => ray_ball_raw(origin, dir, b).and_then(|(a, c)| clip_nonneg(a, c)),
            Shape::Box(b) => ray_box_raw(origin, dir, b).and_then(|(a, c)| clip_nonneg(a, c)),
        }
    }
}

/// Domain: a convex primitive or a finite union of primitives.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Ball(Ball),
    Box(AxisBox),
    BallUnion(Vec<Ball>),
    BoxUnion(Vec<AxisBox>),
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Ball(b) => b.dim(),
            Domain::Box(b) => b.dim(),
            Domain::BallUnion(v) => v[0].dim(),
            Domain::BoxUnion(v) => v[0].dim(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Ball(b) => b.contains(x),
            Domain::Box(b) => b.contains(x),
            Domain::BallUnion(v) => v.iter().any(|b| b.contains(x)),
            Domain::BoxUnion(v) => v.iter().any(|b| b.contains(x)),
        }
    }

    pub fn bounding_box(&self) -> AxisBox {
        match self {
            Domain::Ball(b) => b.bounding_box(),
            Domain::Box(b) => b.clone(),
            Domain::BallUnion(v) => v
                .iter()
                .map(|b| b.bounding_box())
                .reduce(|a, b| a.merge(&b))
                .expect("union must be nonempty"),
            Domain::BoxUnion(v) => v
                .iter()
                .cloned()
                .reduce(|a, b| a.merge(&b))
                .expect("union must be nonempty"),
        }
    }

    pub fn diameter(&self) -> f64 {
        self.bounding_box().diameter()
    }

    /// Lower bound on the distance from an interior point to the complement.
    /// Exact for single primitives; for unions it is the best single-member
    /// margin, which never overestimates.
    pub fn inner_dist(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Ball(b) => -b.signed_dist(x),
            Domain::Box(b) => b.inner_dist(x),
            Domain::BallUnion(v) => v
                .iter()
                .map(|b| -b.signed_dist(x))
                .fold(f64::NEG_INFINITY, f64::max),
            Domain::BoxUnion(v) => v
                .iter()
                .map(|b| b.inner_dist(x))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    fn primitives(&self) -> Vec<Shape> {
        match self {
            Domain::Ball(b) => vec![Shape::Ball(b.clone())],
            Domain::Box(b) => vec![Shape::Box(b.clone())],
            Domain::BallUnion(v) => v.iter().cloned().map(Shape::Ball).collect(),
            Domain::BoxUnion(v) => v.iter().cloned().map(Shape::Box).collect(),
        }
    }

    /// Dilation by a factor about the origin (used for field scaling).
    pub fn scaled(&self, lambda: f64) -> Domain {
        let s = |v: &Vec<f64>| v.iter().map(|c| c * lambda).collect::<Vec<_>>();
        match self {
            Domain::Ball(b) => Domain::Ball(Ball {
                center: s(&b.center),
                radius: b.radius * lambda,
            }),
            Domain::Box(b) => Domain::Box(AxisBox {
                lo: s(&b.lo),
                hi: s(&b.hi),
            }),
            Domain::BallUnion(v) => Domain::BallUnion(
                v.iter()
                    .map(|b| Ball {
                        center: s(&b.center),
                        radius: b.radius * lambda,
                    })
                    .collect(),
            ),
            Domain::BoxUnion(v) => Domain::BoxUnion(
                v.iter()
                    .map(|b| AxisBox {
                        lo: s(&b.lo),
                        hi: s(&b.hi),
                    })
                    .collect(),
            ),
        }
    }
}

/// Domain star-shaped with respect to every point of `star_ball`.
#[derive(Debug, Clone, PartialEq)]
pub struct StarDomain {
    pub shape: Shape,
    pub star_ball: Ball,
}

impl StarDomain {
    pub fn new(shape: Shape, star_ball: Ball) -> Result<Self> {
        if shape.dim() != star_ball.dim() {
            return Err(Error::DimensionMismatch {
                expected: shape.dim(),
                got: star_ball.dim(),
            });
        }
        let ok = match &shape {
            Shape::Ball(b) => {
                dist2(&b.center, &star_ball.center).sqrt() + star_ball.radius <= b.radius
            }
            Shape::Box(b) => star_ball
                .center
                .iter()
                .zip(b.lo.iter().zip(&b.hi))
                .all(|(c, (lo, hi))| c - star_ball.radius >= *lo && c + star_ball.radius <= *hi),
        };
        if !ok {
            return Err(Error::StarBallNotContained);
        }
        Ok(StarDomain { shape, star_ball })
    }

    /// Unit ball/box helpers used throughout the tests.
    pub fn ball(center: Vec<f64>, radius: f64, star_radius: f64) -> Result<Self> {
        let b = Ball::new(center.clone(), radius)?;
        let s = Ball::new(center, star_radius)?;
        StarDomain::new(Shape::Ball(b), s)
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.shape.contains(x)
    }

    /// Monte-Carlo check of the star-shape invariant: sampled segments from
    /// domain points to star-ball points must stay inside the shape.
    pub fn validate_star_shape<R: Rng>(&self, samples: usize, rng: &mut R) -> Result<()> {
        let bbox = self.shape.bounding_box();
        for _ in 0..samples {
            let y = sample_in_shape(&self.shape, &bbox, rng);
            let z = sample_in_ball(&self.star_ball, rng);
            for k in 1..8 {
                let lam = k as f64 / 8.0;
                let p: Vec<f64> = y
                    .iter()
                    .zip(&z)
                    .map(|(a, b)| lam * a + (1.0 - lam) * b)
                    .collect();
                if !self.shape.contains(&p) {
                    return Err(Error::StarBallNotContained);
                }
            }
        }
        Ok(())
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn clip_nonneg(a: f64, b: f64) -> Option<(f64, f64)> {
    let a = a.max(0.0);
    if a < b {
        Some((a, b))
    } else {
        None
    }
}

/// Raw parameter interval {t : origin + t dir in ball}, unclipped.
fn ray_ball_raw(origin: &[f64], dir: &[f64], ball: &Ball) -> Option<(f64, f64)> {
    let mut a = 0.0;
    let mut b = 0.0;
    let mut c = 0.0;
    for i in 0..origin.len() {
        let m = origin[i] - ball.center[i];
        a += dir[i] * dir[i];
        b += 2.0 * dir[i] * m;
        c += m * m;
    }
    c -= ball.radius * ball.radius;
    if a == 0.0 {
        return None;
    }
    let disc = b * b - 4.0 * a * c;
    if disc <= 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    Some(((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)))
}

/// Raw parameter interval {t : origin + t dir in box} (slab method).
fn ray_box_raw(origin: &[f64], dir: &[f64], bx: &AxisBox) -> Option<(f64, f64)> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for i in 0..origin.len() {
        if dir[i] == 0.0 {
            if origin[i] <= bx.lo[i] || origin[i] >= bx.hi[i] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / dir[i];
        let (a, b) = ((bx.lo[i] - origin[i]) * inv, (bx.hi[i] - origin[i]) * inv);
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        t0 = t0.max(a);
        t1 = t1.min(b);
        if t0 >= t1 {
            return None;
        }
    }
    Some((t0, t1))
}

/// Interval of `r >= 1` for which `y + r (x - y)` lies in `ball`.
///
/// This is the exact support of the inner integrand of the Bogovskii
/// operator, obtained by solving `|y + r(x-y) - c|^2 = R^2` and clipping
/// to `[1, inf)`. Returns `None` when the intersection is empty.
pub fn ray_ball_interval(x: &[f64], y: &[f64], ball: &Ball) -> Result<Option<(f64, f64)>> {
    if x.len() != y.len() || x.len() != ball.dim() {
        return Err(Error::DimensionMismatch {
            expected: ball.dim(),
            got: x.len(),
        });
    }
    let dir: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    if dir.iter().all(|&d| d == 0.0) {
        return Err(Error::ZeroRayDirection);
    }
    Ok(ray_ball_raw(y, &dir, ball).and_then(|(a, b)| {
        let a = a.max(1.0);
        if a < b {
            Some((a, b))
        } else {
            None
        }
    }))
}

/// True iff `x` lies in the convex hull of `phi_support` and `rho_support`,
/// i.e. in {lam z1 + (1-lam) z2 : z1 in spt phi, z2 in spt rho, lam in [0,1]}.
///
/// The lam-slice of the hull is the Minkowski blend `lam A + (1-lam) B`, a
/// ball or rounded box, so the slice distance is exact and convex in lam;
/// a ternary search finds its minimum.
pub fn support_hull_test(x: &[f64], phi_support: &Shape, rho_support: &Ball) -> bool {
    hull_distance(x, phi_support, rho_support) <= 1e-12
}

/// Distance from `x` to the convex hull of the two supports (0 inside).
pub fn hull_distance(x: &[f64], phi_support: &Shape, rho_support: &Ball) -> f64 {
    let f = |lam: f64| -> f64 {
        let slice_radius = (1.0 - lam) * rho_support.radius;
        let d = match phi_support {
            Shape::Ball(b) => {
                let mut d2 = 0.0;
                for i in 0..x.len() {
                    let c = lam * b.center[i] + (1.0 - lam) * rho_support.center[i];
                    d2 += (x[i] - c) * (x[i] - c);
                }
                d2.sqrt() - lam * b.radius
            }
            Shape::Box(b) => {
                let mut d2 = 0.0;
                for i in 0..x.len() {
                    let lo = lam * b.lo[i] + (1.0 - lam) * rho_support.center[i];
                    let hi = lam * b.hi[i] + (1.0 - lam) * rho_support.center[i];
                    let c = x[i].clamp(lo, hi);
                    d2 += (x[i] - c) * (x[i] - c);
                }
                d2.sqrt()
            }
        };
        d - slice_radius
    };
    let (mut a, mut b) = (0.0, 1.0);
    for _ in 0..200 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if f(m1) <= f(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    let best = f(0.5 * (a + b)).min(f(0.0)).min(f(1.0));
    best.max(0.0)
}

/// Largest ball inscribed in the intersection of two overlapping balls,
/// centered on the segment between the two centers.
pub fn lens_ball(a: &Ball, b: &Ball) -> Option<Ball> {
    let d = dist2(&a.center, &b.center).sqrt();
    let h = 0.5 * (a.radius + b.radius - d);
    if h <= 0.0 || d == 0.0 {
        // Concentric: the smaller ball is the intersection.
        if d == 0.0 {
            let r = a.radius.min(b.radius);
            return Some(Ball {
                center: a.center.clone(),
                radius: r,
            });
        }
        return None;
    }
    let m = 0.5 * (d - b.radius + a.radius);
    let center = a
        .center
        .iter()
        .zip(&b.center)
        .map(|(ca, cb)| ca + (cb - ca) * (m / d))
        .collect();
    Some(Ball {
        center,
        radius: h.min(a.radius).min(b.radius),
    })
}

/// Ordered ball cover with intersection graph.
#[derive(Debug, Clone)]
pub struct Cover {
    pub balls: Vec<Ball>,
    pub adjacency: Vec<Vec<usize>>,
    pub simply_connected: bool,
    pub overlap_margin: f64,
}

impl Cover {
    /// Builds a cover from balls already listed in a valid order: every ball
    /// after the first must overlap the union of its predecessors.
    pub fn new(balls: Vec<Ball>, simply_connected: bool) -> Result<Self> {
        let cover = Self::assemble(balls, simply_connected)?;
        for m in 1..cover.balls.len() {
            if !cover.adjacency[m].iter().any(|&k| k < m) {
                return Err(Error::CoverOrderingViolated { index: m });
            }
        }
        Ok(cover)
    }

    /// Builds a cover, reordering the balls (greedy, lowest index first) so
    /// the ordering invariant holds. Fails if the adjacency graph is
    /// disconnected.
    pub fn new_reordered(balls: Vec<Ball>, simply_connected: bool) -> Result<Self> {
        let tmp = Self::assemble(balls, simply_connected)?;
        let n = tmp.balls.len();
        let mut placed = vec![false; n];
        let mut order = Vec::with_capacity(n);
        placed[0] = true;
        order.push(0);
        while order.len() < n {
            let next = (0..n)
                .find(|&i| !placed[i] && tmp.adjacency[i].iter().any(|&j| placed[j]))
                .ok_or(Error::DisconnectedCover)?;
            placed[next] = true;
            order.push(next);
        }
        let balls = order.iter().map(|&i| tmp.balls[i].clone()).collect();
        Self::assemble(balls, simply_connected)
    }

    fn assemble(balls: Vec<Ball>, simply_connected: bool) -> Result<Self> {
        if balls.is_empty() {
            return Err(Error::NoAdmissibleBallPlacement);
        }
        let dim = balls[0].dim();
        for b in &balls {
            if b.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: b.dim(),
                });
            }
        }
        let min_r = balls.iter().map(|b| b.radius).fold(f64::INFINITY, f64::min);
        let overlap_margin = 1e-9 * min_r;
        let n = balls.len();
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                let overlap = balls[i].radius + balls[j].radius
                    - dist2(&balls[i].center, &balls[j].center).sqrt();
                if overlap >= overlap_margin {
                    adjacency[i].push(j);
                    adjacency[j].push(i);
                }
            }
        }
        // Connectivity check (BFS from 0).
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::DisconnectedCover);
        }
        Ok(Cover {
            balls,
            adjacency,
            simply_connected,
            overlap_margin,
        })
    }

    pub fn dim(&self) -> usize {
        self.balls[0].dim()
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.balls.iter().any(|b| b.contains(x))
    }

    /// Overlap width of a pair (positive iff they intersect with margin).
    pub fn overlap(&self, i: usize, j: usize) -> f64 {
        self.balls[i].radius + self.balls[j].radius
            - dist2(&self.balls[i].center, &self.balls[j].center).sqrt()
    }
}

/// Sequence of cover indices with consecutive pairwise intersection.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub indices: Vec<usize>,
}

/// Shortest chain in the cover adjacency graph from `i` to `j` (BFS,
/// neighbor ties broken by lower index).
pub fn find_chain(cover: &Cover, i: usize, j: usize) -> Result<Chain> {
    let n = cover.len();
    if i >= n || j >= n {
        return Err(Error::NoChainExists);
    }
    if i == j {
        return Ok(Chain { indices: vec![i] });
    }
    let mut pred = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::from([i]);
    pred[i] = i;
    while let Some(u) = queue.pop_front() {
        let mut nbrs = cover.adjacency[u].clone();
        nbrs.sort_unstable();
        for v in nbrs {
            if pred[v] == usize::MAX {
                pred[v] = u;
                if v == j {
                    let mut path = vec![j];
                    let mut c = j;
                    while c != i {
                        c = pred[c];
                        path.push(c);
                    }
                    path.reverse();
                    return Ok(Chain { indices: path });
                }
                queue.push_back(v);
            }
        }
    }
    Err(Error::NoChainExists)
}

/// Configuration for `build_cover`.
#[derive(Debug, Clone)]
pub struct CoverConfig {
    /// Coverage is guaranteed only for points at least this far inside the
    /// domain boundary. `None` picks 5e-3 of the domain diameter. Box
    /// primitives additionally exclude the corner shadow of depth
    /// `radius * (1 - 1/sqrt(n))`, which balls of the given radius placed
    /// inside the box can never reach.
    pub boundary_margin: Option<f64>,
    /// Number of seeded samples used to verify coverage after construction.
    pub verify_samples: usize,
    pub seed: u64,
    pub simply_connected: bool,
}

impl Default for CoverConfig {
    fn default() -> Self {
        CoverConfig {
            boundary_margin: None,
            verify_samples: 2048,
            seed: 7,
            simply_connected: true,
        }
    }
}

/// Covers the domain with balls of the given radius placed on a cubic
/// lattice (plus boundary projections), keeping only balls contained in the
/// domain. Coverage of a seeded sample set of the margin-shrunk domain is
/// verified before returning.
pub fn build_cover(domain: &Domain, radius: f64, cfg: &CoverConfig) -> Result<Cover> {
    use rand::SeedableRng;
    if radius <= 0.0 {
        return Err(Error::NonPositiveRadius(radius));
    }
    let n = domain.dim();
    let delta = cfg.boundary_margin.unwrap_or(5e-3 * domain.diameter());
    let mut centers: Vec<Vec<f64>> = Vec::new();

    for prim in domain.primitives() {
        let admissible = admissible_region(&prim, radius);
        let Some(admissible) = admissible else {
            continue;
        };
        // Identity case: the ball fills the primitive.
        if let Region::Point(p) = &admissible {
            push_center(&mut centers, p.clone(), 0.0);
            continue;
        }
        // Lattice spacing: the covering radius a sqrt(n)/2 must stay below
        // 0.9 r in the interior and below the boundary band width for points
        // `delta` inside the boundary (after projecting candidates into the
        // admissible region).
        let band = (2.0 * radius * delta - delta * delta).max(0.0).sqrt();
        let a = (1.8 / (n as f64).sqrt()) * radius.min(band).max(1e-6 * radius);
        let bbox = prim.bounding_box();
        let counts: Vec<usize> = bbox
            .lo
            .iter()
            .zip(&bbox.hi)
            .map(|(lo, hi)| ((hi - lo) / a).ceil() as usize + 1)
            .collect();
        let mut idx = vec![0usize; n];
        loop {
            let p: Vec<f64> = (0..n).map(|d| bbox.lo[d] + idx[d] as f64 * a).collect();
            if let Some(q) = admissible.project_nearby(&p, a * (n as f64).sqrt()) {
                push_center(&mut centers, q, 0.25 * a);
            }
            let mut d = 0;
            loop {
                if d == n {
                    break;
                }
                idx[d] += 1;
                if idx[d] < counts[d] {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == n {
                break;
            }
        }
    }

    if centers.is_empty() {
        return Err(Error::NoAdmissibleBallPlacement);
    }
    let balls: Vec<Ball> = centers
        .into_iter()
        .map(|c| Ball { center: c, radius })
        .collect();

    // Verify coverage of the margin-shrunk domain on a seeded sample set.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let union_contains = |x: &[f64]| balls.iter().any(|b| b.contains(x));
    for prim in domain.primitives() {
        let margin = cover_margin(&prim, radius, delta);
        let bbox = prim.bounding_box();
        let mut accepted = 0usize;
        let mut tries = 0usize;
        while accepted < cfg.verify_samples && tries < cfg.verify_samples * 200 {
            tries += 1;
            let x: Vec<f64> = (0..n)
                .map(|d| rng.gen_range(bbox.lo[d]..bbox.hi[d]))
                .collect();
            if prim.inner_dist(&x) <= margin {
                continue;
            }
            accepted += 1;
            if !union_contains(&x) {
                return Err(Error::CoverageGap(x));
            }
        }
    }

    Cover::new_reordered(balls, cfg.simply_connected)
}

/// Effective coverage margin for a primitive: the configured margin, plus
/// the unreachable corner shadow for boxes.
pub fn cover_margin(prim: &Shape, radius: f64, boundary_margin: f64) -> f64 {
    match prim {
        Shape::Ball(_) => boundary_margin,
        Shape::Box(b) => {
            let n = b.dim() as f64;
            boundary_margin + radius * (1.0 - 1.0 / n.sqrt())
        }
    }
}

enum Region {
    Ball(Ball),
    Box(AxisBox),
    Point(Vec<f64>),
}

impl Region {
    /// Projects `p` into the region if it lies within `reach` of it.
    fn project_nearby(&self, p: &[f64], reach: f64) -> Option<Vec<f64>> {
        match self {
            Region::Ball(b) => {
                let d = b.signed_dist(p);
                if d <= 0.0 {
                    return Some(p.to_vec());
                }
                if d > reach {
                    return None;
                }
                let norm = dist2(p, &b.center).sqrt();
                Some(
                    b.center
                        .iter()
                        .zip(p)
                        .map(|(c, v)| c + (v - c) * (b.radius / norm))
                        .collect(),
                )
            }
            Region::Box(b) => {
                if b.dist(p) > reach {
                    return None;
                }
                Some(
                    p.iter()
                        .zip(b.lo.iter().zip(&b.hi))
                        .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
                        .collect(),
                )
            }
            Region::Point(_) => None,
        }
    }
}

/// Region of admissible centers for balls of radius `r` inside `prim`.
fn admissible_region(prim: &Shape, r: f64) -> Option<Region> {
    match prim {
        Shape::Ball(b) => {
            if r > b.radius {
                None
            } else if b.radius - r < 1e-12 * b.radius {
                Some(Region::Point(b.center.clone()))
            } else {
                Some(Region::Ball(Ball {
                    center: b.center.clone(),
                    radius: b.radius - r,
                }))
            }
        }
        Shape::Box(b) => {
            let lo: Vec<f64> = b.lo.iter().map(|v| v + r).collect();
            let hi: Vec<f64> = b.hi.iter().map(|v| v - r).collect();
            if lo.iter().zip(&hi).any(|(a, b)| a > b) {
                return None;
            }
            if lo.iter().zip(&hi).all(|(a, b)| (b - a).abs() < 1e-12) {
                return Some(Region::Point(lo));
            }
            // Degenerate axes collapse to an interval; widen by 0 is fine.
            Some(Region::Box(AxisBox {
                lo: lo.iter().zip(&hi).map(|(a, b)| a.min(*b)).collect(),
                hi: lo.iter().zip(&hi).map(|(a, b)| a.max(*b)).collect(),
            }))
        }
    }
}

fn push_center(centers: &mut Vec<Vec<f64>>, c: Vec<f64>, min_sep: f64) {
    if centers.iter().all(|e| dist2(e, &c).sqrt() > min_sep) {
        centers.push(c);
    }
}

/// Uniform sample from a ball (rejection from the bounding box).
pub fn sample_in_ball<R: Rng>(ball: &Ball, rng: &mut R) -> Vec<f64> {
    loop {
        let x: Vec<f64> = ball
            .center
            .iter()
            .map(|c| rng.gen_range(c - ball.radius..c + ball.radius))
            .collect();
        if ball.contains(&x) {
            return x;
        }
    }
}

fn sample_in_shape<R: Rng>(shape: &Shape, bbox: &AxisBox, rng: &mut R) -> Vec<f64> {
    loop {
        let x: Vec<f64> = bbox
            .lo
            .iter()
            .zip(&bbox.hi)
            .map(|(a, b)| rng.gen_range(*a..*b))
            .collect();
        if shape.contains(&x) {
            return x;
        }
    }
}
