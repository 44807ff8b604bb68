//! Global potential reconstruction: local A-potentials on star charts,
//! constant gluing across a ball cover, chain divergence transport, rough
//! (mollified) reconstruction, and compactly supported potentials.

use crate::error::{Error, Result};
use crate::fieldspec::{
    curl_residual, gradient, FiniteDiffScheme, ScalarField, Supported, VectorField,
};
use crate::geometry::{
    build_cover, lens_ball, sample_in_ball, AxisBox, Ball, Chain, Cover, CoverConfig, Domain,
    Shape, StarDomain,
};
use crate::mollify::{make_bump, mollified, scale_field, Mollified, Mollifier, Scaled};
use crate::operators::{bogovskii_apply, potential_apply, shape_inside, BogovskiiOp};
use crate::quadrature::QuadratureRule;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Scalar field F = Av backed by one chart operator.
#[derive(Debug, Clone)]
pub struct PotentialField<V> {
    pub op: BogovskiiOp,
    pub v: V,
}

impl<V: VectorField> ScalarField for PotentialField<V> {
    fn dim(&self) -> usize {
        self.op.dim()
    }
    fn eval(&self, x: &[f64]) -> Result<f64> {
        potential_apply(&self.op, &self.v, x)
    }
}

#[derive(Debug, Clone)]
pub struct LocalPotentialConfig {
    pub quad: QuadratureRule,
    pub curl_tolerance: f64,
    pub curl_fd: FiniteDiffScheme,
    pub grad_fd: FiniteDiffScheme,
    pub probes: usize,
    pub seed: u64,
}

impl Default for LocalPotentialConfig {
    fn default() -> Self {
        LocalPotentialConfig {
            quad: QuadratureRule::default_orders(),
            curl_tolerance: 1e-6,
            curl_fd: FiniteDiffScheme::order4(1e-4),
            grad_fd: FiniteDiffScheme::order4(1e-4),
            probes: 24,
            seed: 11,
        }
    }
}

/// Reconstruction on a single star chart with its residual report.
pub struct LocalPotential<V> {
    pub field: PotentialField<V>,
    pub grad_residual: f64,
}

/// Interior probes of a star domain, clear of the boundary so that
/// finite-difference stencils stay inside.
fn star_probes(domain: &StarDomain, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bbox = domain.shape.bounding_box();
    let margin = 0.05 * bbox.diameter();
    let mut probes = Vec::with_capacity(count);
    let mut guard = 0;
    while probes.len() < count && guard < count * 1000 {
        guard += 1;
        let p: Vec<f64> = bbox
            .lo
            .iter()
            .zip(&bbox.hi)
            .map(|(a, b)| rng.gen_range(*a..*b))
            .collect();
        if domain.shape.inner_dist(&p) > margin {
            probes.push(p);
        }
    }
    probes
}

/// F = Av on a star chart; refuses when the input field is not closed.
pub fn local_potential<V: VectorField>(
    domain: StarDomain,
    rho: Mollifier,
    v: V,
    cfg: &LocalPotentialConfig,
) -> Result<LocalPotential<V>> {
    let probes = star_probes(&domain, cfg.probes, cfg.seed);
    let curl = curl_residual(&v, &probes, cfg.curl_fd)?;
    if curl > cfg.curl_tolerance {
        return Err(Error::CurlResidualExceeded {
            residual: curl,
            tolerance: cfg.curl_tolerance,
        });
    }
    let op = BogovskiiOp::new(domain, rho, cfg.quad)?;
    let field = PotentialField { op, v };
    let mut worst = 0.0f64;
    let mut want = vec![0.0; field.dim()];
    for p in &probes {
        let g = gradient(&field, p, cfg.grad_fd)?;
        field.v.eval_into(p, &mut want)?;
        for d in 0..want.len() {
            worst = worst.max((g[d] - want[d]).abs());
        }
    }
    Ok(LocalPotential {
        field,
        grad_residual: worst,
    })
}

#[derive(Debug, Clone)]
pub struct GlueConfig {
    pub quad: QuadratureRule,
    /// Fraction of the ball radius used for the chart mollifier.
    pub rho_fraction: f64,
    /// Fraction of the ball radius used for the star ball.
    pub star_fraction: f64,
    pub overlap_samples: usize,
    pub min_overlap_samples: usize,
    pub curl_tolerance: f64,
    pub curl_fd: FiniteDiffScheme,
    pub grad_fd: FiniteDiffScheme,
    pub probes_per_ball: usize,
    pub seed: u64,
}

impl Default for GlueConfig {
    fn default() -> Self {
        GlueConfig {
            quad: QuadratureRule::new(16, 24)
                .expect("defaults above minimum")
                .with_angular(48),
            rho_fraction: 0.4,
            star_fraction: 0.5,
            overlap_samples: 64,
            min_overlap_samples: 64,
            curl_tolerance: 1e-6,
            curl_fd: FiniteDiffScheme::order4(1e-4),
            grad_fd: FiniteDiffScheme::order4(1e-4),
            probes_per_ball: 12,
            seed: 23,
        }
    }
}

/// Glued potential: per-chart fields F_m plus additive constants c_m.
/// Evaluation picks the lowest-index chart containing the point.
pub struct PotentialResult<V> {
    pub ops: Vec<BogovskiiOp>,
    pub constants: Vec<f64>,
    pub cover: Cover,
    pub v: V,
    /// Max std-dev of chart differences over overlap samples.
    pub overlap_consistency: f64,
    /// Worst |mean chart difference| over adjacent pairs after gluing; on a
    /// simply connected cover this must vanish, and a nonzero value is the
    /// period of the obstruction.
    pub worst_cross_pair: f64,
    /// Sup over per-ball probes of |grad F - v|.
    pub grad_residual: f64,
}

impl<V: VectorField> PotentialResult<V> {
    pub fn chart_value(&self, m: usize, x: &[f64]) -> Result<f64> {
        Ok(potential_apply(&self.ops[m], &self.v, x)? + self.constants[m])
    }

    /// F(x) via the lowest-index chart containing x; None outside the cover.
    pub fn evaluate(&self, x: &[f64]) -> Result<Option<f64>> {
        for (m, ball) in self.cover.balls.iter().enumerate() {
            if ball.contains(x) {
                return self.chart_value(m, x).map(Some);
            }
        }
        Ok(None)
    }

    /// Whether the glued family is consistent at the given tolerance.
    pub fn is_consistent(&self, tolerance: f64) -> bool {
        self.worst_cross_pair <= tolerance
    }

    /// Shift the global gauge: adds `delta` to every chart constant.
    pub fn shift_gauge(&mut self, delta: f64) {
        for c in &mut self.constants {
            *c += delta;
        }
    }
}

fn chart_op(
    ball: &Ball,
    cfg_quad: QuadratureRule,
    rho_frac: f64,
    star_frac: f64,
) -> Result<BogovskiiOp> {
    let star = StarDomain::ball(ball.center.clone(), ball.radius, star_frac * ball.radius)?;
    let rho = make_bump(Ball::new(ball.center.clone(), rho_frac * ball.radius)?);
    BogovskiiOp::new(star, rho, cfg_quad)
}

/// Glues local chart potentials across the cover: c_1 = 0, each later chart
/// matched to its lowest-index overlapping predecessor by the mean chart
/// difference over samples of the overlap lens, then every other adjacent
/// pair is checked for a vanishing cross-pair constant.
pub fn glue_potentials<V: VectorField>(
    cover: &Cover,
    v: V,
    cfg: &GlueConfig,
) -> Result<PotentialResult<V>> {
    let n_balls = cover.len();
    for m in 1..n_balls {
        if !cover.adjacency[m].iter().any(|&k| k < m) {
            return Err(Error::CoverOrderingViolated { index: m });
        }
    }
    if cfg.overlap_samples < cfg.min_overlap_samples {
        return Err(Error::TooFewOverlapSamples {
            pair: (0, 0),
            got: cfg.overlap_samples,
            min: cfg.min_overlap_samples,
        });
    }

    // Curl precondition on every ball.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut probes = Vec::new();
    for ball in &cover.balls {
        let inner = Ball::new(ball.center.clone(), 0.8 * ball.radius)?;
        for _ in 0..cfg.probes_per_ball {
            probes.push(sample_in_ball(&inner, &mut rng));
        }
    }
    let curl = curl_residual(&v, &probes, cfg.curl_fd)?;
    if curl > cfg.curl_tolerance {
        return Err(Error::CurlResidualExceeded {
            residual: curl,
            tolerance: cfg.curl_tolerance,
        });
    }

    let ops: Vec<BogovskiiOp> = cover
        .balls
        .iter()
        .map(|b| chart_op(b, cfg.quad, cfg.rho_fraction, cfg.star_fraction))
        .collect::<Result<_>>()?;

    // Raw chart values on samples of each overlap lens, shared between the
    // constant matching and the consistency diagnostics.
    struct PairData {
        pair: (usize, usize),
        values_i: Vec<f64>,
        values_j: Vec<f64>,
    }
    let mut pairs: Vec<PairData> = Vec::new();
    for i in 0..n_balls {
        for &j in &cover.adjacency[i] {
            if j > i {
                let lens = lens_ball(&cover.balls[i], &cover.balls[j]).ok_or(
                    Error::TooFewOverlapSamples {
                        pair: (i, j),
                        got: 0,
                        min: cfg.min_overlap_samples,
                    },
                )?;
                let shrunk = Ball::new(lens.center.clone(), 0.9 * lens.radius)?;
                let mut values_i = Vec::with_capacity(cfg.overlap_samples);
                let mut values_j = Vec::with_capacity(cfg.overlap_samples);
                for _ in 0..cfg.overlap_samples {
                    let x = sample_in_ball(&shrunk, &mut rng);
                    values_i.push(potential_apply(&ops[i], &v, &x)?);
                    values_j.push(potential_apply(&ops[j], &v, &x)?);
                }
                pairs.push(PairData {
                    pair: (i, j),
                    values_i,
                    values_j,
                });
            }
        }
    }

    // Constants: c_0 = 0; match chart m to its lowest-index predecessor.
    let mut constants = vec![0.0f64; n_balls];
    for m in 1..n_balls {
        let pred = *cover.adjacency[m].iter().filter(|&&k| k < m).min().unwrap();
        let key = (pred.min(m), pred.max(m));
        let data = pairs.iter().find(|p| p.pair == key).unwrap();
        let (pred_vals, m_vals) = if pred < m {
            (&data.values_i, &data.values_j)
        } else {
            (&data.values_j, &data.values_i)
        };
        let mean: f64 = pred_vals
            .iter()
            .zip(m_vals)
            .map(|(fp, fm)| fp + constants[pred] - fm)
            .sum::<f64>()
            / pred_vals.len() as f64;
        constants[m] = mean;
    }

    // Consistency diagnostics over every adjacent pair.
    let mut worst_cross_pair = 0.0f64;
    let mut overlap_consistency = 0.0f64;
    for data in &pairs {
        let (i, j) = data.pair;
        let diffs: Vec<f64> = data
            .values_i
            .iter()
            .zip(&data.values_j)
            .map(|(fi, fj)| fi + constants[i] - fj - constants[j])
            .collect();
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / diffs.len() as f64;
        worst_cross_pair = worst_cross_pair.max(mean.abs());
        overlap_consistency = overlap_consistency.max(var.sqrt());
    }

    // Gradient residual on per-ball probes.
    let mut grad_residual = 0.0f64;
    let mut want = vec![0.0; cover.dim()];
    for (m, ball) in cover.balls.iter().enumerate() {
        let inner = Ball::new(ball.center.clone(), 0.7 * ball.radius)?;
        let field = PotentialField {
            op: ops[m].clone(),
            v: &v,
        };
        for _ in 0..cfg.probes_per_ball {
            let p = sample_in_ball(&inner, &mut rng);
            let g = gradient(&field, &p, cfg.grad_fd)?;
            v.eval_into(&p, &mut want)?;
            for d in 0..want.len() {
                grad_residual = grad_residual.max((g[d] - want[d]).abs());
            }
        }
    }

    Ok(PotentialResult {
        ops,
        constants,
        cover: cover.clone(),
        v,
        overlap_consistency,
        worst_cross_pair,
        grad_residual,
    })
}

#[derive(Debug, Clone)]
pub struct ChainTransportConfig {
    pub quad: QuadratureRule,
    /// Intersection bumps use this fraction of the inscribed lens radius.
    pub lens_fraction: f64,
    /// Smallest admissible bump radius in a chain intersection.
    pub min_bump_radius: f64,
}

impl Default for ChainTransportConfig {
    fn default() -> Self {
        ChainTransportConfig {
            quad: QuadratureRule::default_orders(),
            lens_fraction: 0.85,
            min_bump_radius: 1e-3,
        }
    }
}

/// Vector field Phi with div Phi = rho_first - rho_last, telescoped along a
/// chain: Phi = sum_j B_j(tau_{j-1} - tau_j), where tau_0, tau_L are the
/// endpoint mollifiers and the interior tau_j are unit bumps in the
/// consecutive intersections. Every summand has zero mean and support in a
/// single chain ball, so Phi vanishes identically outside the chain union.
pub struct ChainTransport {
    /// Per chain link: the chart operator and the two bumps it transports.
    terms: Vec<(BogovskiiOp, Mollifier, Mollifier)>,
    dim: usize,
}

impl ChainTransport {
    /// rho_first - rho_last, the divergence this field realizes.
    pub fn divergence_target(&self, x: &[f64]) -> f64 {
        let first = &self.terms.first().expect("nonempty chain").1;
        let last = &self.terms.last().expect("nonempty chain").2;
        first.value(x) - last.value(x)
    }

    pub fn chain_len(&self) -> usize {
        self.terms.len()
    }
}

impl VectorField for ChainTransport {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        for (op, prev, next) in &self.terms {
            // Each summand is supported inside its chart ball.
            if !op.domain.contains(x) {
                continue;
            }
            let prev_supported = Supported::new(prev, Shape::Ball(prev.support_ball.clone()));
            let next_supported = Supported::new(next, Shape::Ball(next.support_ball.clone()));
            let a = bogovskii_apply(op, &prev_supported, x)?;
            let b = bogovskii_apply(op, &next_supported, x)?;
            for d in 0..self.dim {
                out[d] += a[d] - b[d];
            }
        }
        Ok(())
    }
}

/// Builds the transport field for `chain` in `cover`, with one mollifier per
/// cover ball (each supported in its ball).
pub fn chain_divergence_transport(
    cover: &Cover,
    chain: &Chain,
    rho_per_ball: &[Mollifier],
    cfg: &ChainTransportConfig,
) -> Result<ChainTransport> {
    if chain.indices.is_empty() || rho_per_ball.len() != cover.len() {
        return Err(Error::NoChainExists);
    }
    let dim = cover.dim();
    for (k, &idx) in chain.indices.iter().enumerate() {
        let ball_shape = Shape::Ball(cover.balls[idx].clone());
        let rho_shape = Shape::Ball(rho_per_ball[idx].support_ball.clone());
        if !shape_inside(&rho_shape, &ball_shape) {
            return Err(Error::SupportNotInsideDomain);
        }
        if k + 1 < chain.indices.len() {
            let next = chain.indices[k + 1];
            if cover.overlap(idx, next) < cover.overlap_margin {
                return Err(Error::CoverOrderingViolated { index: next });
            }
        }
    }

    // Interior bumps in the consecutive intersections.
    let links = chain.indices.len();
    let mut taus: Vec<Mollifier> = Vec::with_capacity(links + 1);
    taus.push(rho_per_ball[chain.indices[0]].clone());
    for w in chain.indices.windows(2) {
        let lens = lens_ball(&cover.balls[w[0]], &cover.balls[w[1]]).ok_or(
            Error::IntersectionTooSmall {
                pair: (w[0], w[1]),
                width: cover.overlap(w[0], w[1]),
                needed: cfg.min_bump_radius,
            },
        )?;
        let radius = cfg.lens_fraction * lens.radius;
        if radius < cfg.min_bump_radius {
            return Err(Error::IntersectionTooSmall {
                pair: (w[0], w[1]),
                width: radius,
                needed: cfg.min_bump_radius,
            });
        }
        taus.push(make_bump(Ball::new(lens.center, radius)?));
    }
    taus.push(rho_per_ball[*chain.indices.last().unwrap()].clone());

    let mut terms = Vec::with_capacity(links);
    for (k, &idx) in chain.indices.iter().enumerate() {
        let ball = &cover.balls[idx];
        // The chart operator's own mollifier doubles as the star-ball bump.
        let star = StarDomain::ball(ball.center.clone(), ball.radius, (1.0 - 1e-9) * ball.radius)?;
        let op = BogovskiiOp::new(star, rho_per_ball[idx].clone(), cfg.quad)?;
        terms.push((op, taus[k].clone(), taus[k + 1].clone()));
    }
    Ok(ChainTransport { terms, dim })
}

#[derive(Debug, Clone)]
pub struct CompactSupportConfig {
    pub cover_radius: f64,
    pub glue: GlueConfig,
    pub cover: CoverConfig,
    /// Far probes keep this distance from the support box.
    pub far_margin: f64,
    pub far_probes: usize,
    pub seed: u64,
}

impl Default for CompactSupportConfig {
    fn default() -> Self {
        CompactSupportConfig {
            cover_radius: 0.35,
            glue: GlueConfig::default(),
            cover: CoverConfig::default(),
            far_margin: 0.1,
            far_probes: 48,
            seed: 31,
        }
    }
}

/// Compactly supported potential for compactly supported curl-free data.
pub struct CompactPotential<V> {
    pub result: PotentialResult<V>,
    /// Constant subtracted so the potential vanishes on the far region.
    pub constant: f64,
    /// Max |F| over the far probes after subtraction.
    pub far_residual: f64,
}

impl<V: VectorField> CompactPotential<V> {
    pub fn evaluate(&self, x: &[f64]) -> Result<Option<f64>> {
        Ok(self.result.evaluate(x)?.map(|f| f - self.constant))
    }
}

/// Reconstructs F with compact support from G supported in `support_box`:
/// glue a potential over a ball cover of `workbox`, then subtract the
/// far-region constant. Requires n >= 2 (in one dimension the complement of
/// the support is disconnected and no compactly supported potential exists
/// for generic data).
pub fn compact_support_potential<V: VectorField>(
    g: V,
    support_box: &AxisBox,
    workbox: &AxisBox,
    cfg: &CompactSupportConfig,
) -> Result<CompactPotential<V>> {
    let n = g.dim();
    if n < 2 {
        return Err(Error::RequiresDimensionAtLeastTwo);
    }
    let mut margin = f64::INFINITY;
    for d in 0..n {
        margin = margin.min(support_box.lo[d] - workbox.lo[d]);
        margin = margin.min(workbox.hi[d] - support_box.hi[d]);
    }
    if margin < 2.0 * cfg.cover_radius {
        return Err(Error::WorkboxMarginTooSmall {
            margin,
            needed: 2.0 * cfg.cover_radius,
        });
    }

    let mut cover_cfg = cfg.cover.clone();
    cover_cfg.simply_connected = true;
    let cover = build_cover(&Domain::Box(workbox.clone()), cfg.cover_radius, &cover_cfg)?;
    let result = glue_potentials(&cover, g, &cfg.glue)?;

    // Far probes: inside the workbox but clear of the support box.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut far = Vec::new();
    let mut guard = 0;
    while far.len() < cfg.far_probes && guard < cfg.far_probes * 2000 {
        guard += 1;
        let p: Vec<f64> = workbox
            .lo
            .iter()
            .zip(&workbox.hi)
            .map(|(a, b)| rng.gen_range(*a..*b))
            .collect();
        if support_box.dist(&p) > cfg.far_margin && cover.contains(&p) {
            far.push(p);
        }
    }
    if far.is_empty() {
        return Err(Error::WorkboxMarginTooSmall {
            margin,
            needed: cfg.far_margin,
        });
    }
    let mut values = Vec::with_capacity(far.len());
    for p in &far {
        if let Some(fv) = result.evaluate(p)? {
            values.push(fv);
        }
    }
    let constant = values.iter().sum::<f64>() / values.len() as f64;
    let far_residual = values
        .iter()
        .map(|v| (v - constant).abs())
        .fold(0.0f64, f64::max);
    Ok(CompactPotential {
        result,
        constant,
        far_residual,
    })
}

/// One stage of the rough reconstruction.
pub struct RoughStage<V> {
    pub lambda: f64,
    pub l: u32,
    pub field: PotentialField<Mollified<Scaled<V>>>,
    /// Sup over probes of |grad F - v_stage|.
    pub grad_residual: f64,
    /// RMS change against the previous stage over the probe set.
    pub rms_change: f64,
}

#[derive(Debug, Clone)]
pub struct RoughConfig {
    pub quad: QuadratureRule,
    pub mollify_order: usize,
    pub curl_tolerance: f64,
    pub curl_fd: FiniteDiffScheme,
    pub grad_fd: FiniteDiffScheme,
    pub probes: usize,
    pub seed: u64,
}

impl Default for RoughConfig {
    fn default() -> Self {
        RoughConfig {
            // Every field evaluation is itself a mollification quadrature,
            // so the outer orders stay low; the renormalized kernel keeps
            // affine data exact regardless.
            quad: QuadratureRule::new(8, 10)
                .expect("defaults above minimum")
                .with_angular(16),
            mollify_order: 6,
            curl_tolerance: 1e-4,
            curl_fd: FiniteDiffScheme::order4(1e-3),
            grad_fd: FiniteDiffScheme::order2(1e-4),
            probes: 10,
            seed: 17,
        }
    }
}

/// Mollified reconstruction for rough (grid) data on a star domain whose
/// star center sits at the origin: per stage, dilate by lambda, mollify with
/// the delta-sequence index l, and apply A. The schedules approach (1, inf)
/// and the residual trend mirrors the paper's limit argument.
pub fn rough_local_potential<V: VectorField + Clone>(
    domain: &StarDomain,
    rho: Mollifier,
    g: V,
    g_domain: &Domain,
    lambda_schedule: &[f64],
    l_schedule: &[u32],
    cfg: &RoughConfig,
) -> Result<Vec<RoughStage<V>>> {
    if lambda_schedule.is_empty() || l_schedule.is_empty() {
        return Err(Error::EmptySchedule);
    }
    if lambda_schedule.len() != l_schedule.len() {
        return Err(Error::DimensionMismatch {
            expected: lambda_schedule.len(),
            got: l_schedule.len(),
        });
    }
    for w in lambda_schedule.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::ScaleNotGreaterThanOne(w[1]));
        }
    }
    for w in l_schedule.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::EmptySchedule);
        }
    }
    let center_norm: f64 = domain
        .star_ball
        .center
        .iter()
        .map(|c| c * c)
        .sum::<f64>()
        .sqrt();
    if center_norm > 1e-12 {
        return Err(Error::StarBallNotContained);
    }

    // Probes for residual reports, inside the star domain with margin.
    let probes = star_probes(domain, cfg.probes, cfg.seed);

    // Weak curl precondition on the finest mollification.
    {
        let lam = *lambda_schedule.last().unwrap();
        let l = *l_schedule.last().unwrap();
        let scaled = scale_field(g.clone(), lam)?;
        let smooth = mollified(scaled, g_domain.scaled(lam), l, cfg.mollify_order)?;
        let curl = curl_residual(&smooth, &probes, cfg.curl_fd)?;
        if curl > cfg.curl_tolerance {
            return Err(Error::CurlResidualExceeded {
                residual: curl,
                tolerance: cfg.curl_tolerance,
            });
        }
    }

    let mut stages: Vec<RoughStage<V>> = Vec::new();
    let mut prev_values: Option<Vec<f64>> = None;
    for (&lam, &l) in lambda_schedule.iter().zip(l_schedule) {
        let scaled = scale_field(g.clone(), lam)?;
        let smooth = mollified(scaled, g_domain.scaled(lam), l, cfg.mollify_order)?;
        let op = BogovskiiOp::new(domain.clone(), rho.clone(), cfg.quad)?;
        let field = PotentialField { op, v: smooth };
        let mut worst = 0.0f64;
        let mut want = vec![0.0; field.dim()];
        let mut values = Vec::with_capacity(probes.len());
        for p in &probes {
            let grad = gradient(&field, p, cfg.grad_fd)?;
            field.v.eval_into(p, &mut want)?;
            for d in 0..want.len() {
                worst = worst.max((grad[d] - want[d]).abs());
            }
            values.push(field.eval(p)?);
        }
        let rms_change = match &prev_values {
            None => f64::NAN,
            Some(prev) => {
                let squares: f64 = prev
                    .iter()
                    .zip(&values)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (squares / values.len() as f64).sqrt()
            }
        };
        prev_values = Some(values);
        stages.push(RoughStage {
            lambda: lam,
            l,
            field,
            grad_residual: worst,
            rms_change,
        });
    }
    Ok(stages)
}
