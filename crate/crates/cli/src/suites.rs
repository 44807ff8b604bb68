//! The named verification suites behind `curlfree verify`: each runs a
//! family of identity checks at desk scale with the config's seed and
//! returns one result per check.

use crate::config::RunConfig;
use crate::report::CheckResult;
use curlfree_core::fieldspec::{
    divergence, FiniteDiffScheme, ScalarField, ScalarFn, Supported, VectorField, VectorFn,
};
use curlfree_core::geometry::{hull_distance, Ball, Domain, Shape, StarDomain};
use curlfree_core::homotopy::{
    homotopy_invariance_check, line_integral, Homotopy, InvarianceConfig, Path as CurvePath,
    ReversedCurve,
};
use curlfree_core::mollify::{make_bump, Mollifier};
use curlfree_core::operators::{bogovskii_apply, duality_residual, BogovskiiOp};
use curlfree_core::quadrature::QuadratureRule;
use curlfree_core::sobolev::{
    adjointness_check, solve_potential_l2, weak_poincare_pipeline, DivFreeTestSet, GridSpace,
    PipelineConfig, SolveConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct SuiteContext {
    pub star: StarDomain,
    pub rho: Mollifier,
    pub quad: QuadratureRule,
    pub seed: u64,
}

impl SuiteContext {
    pub fn from_config(cfg: &RunConfig, seed: u64) -> Result<Self, crate::config::ConfigError> {
        let star = cfg.star_domain()?;
        let rho = make_bump(cfg.rho_ball(&star)?);
        Ok(SuiteContext {
            star,
            rho,
            quad: cfg.quadrature()?,
            seed,
        })
    }

    fn op(&self) -> BogovskiiOp {
        BogovskiiOp::new(self.star.clone(), self.rho.clone(), self.quad)
            .expect("suite context validated at construction")
    }
}

/// Zero-mean scalar made of two unit bumps with opposite signs.
struct BumpPair {
    plus: Mollifier,
    minus: Mollifier,
}

impl ScalarField for BumpPair {
    fn dim(&self) -> usize {
        self.plus.dim()
    }
    fn eval(&self, x: &[f64]) -> curlfree_core::Result<f64> {
        Ok(self.plus.value(x) - self.minus.value(x))
    }
}

impl BumpPair {
    fn support(&self) -> Shape {
        Shape::Box(
            self.plus
                .support_ball
                .bounding_box()
                .merge(&self.minus.support_ball.bounding_box()),
        )
    }

    fn sup_norm(&self) -> f64 {
        let e = (-1.0f64).exp();
        (self.plus.normalization * e).max(self.minus.normalization * e)
    }

    /// B applied through the pair's linear structure: each bump is
    /// integrated over its exact ball support, where the chord quadratures
    /// align with the support edge. Linearity of B is checked separately.
    fn apply_b(&self, op: &BogovskiiOp, x: &[f64]) -> curlfree_core::Result<Vec<f64>> {
        let plus = Supported::new(&self.plus, Shape::Ball(self.plus.support_ball.clone()));
        let minus = Supported::new(&self.minus, Shape::Ball(self.minus.support_ball.clone()));
        let a = bogovskii_apply(op, &plus, x)?;
        let b = bogovskii_apply(op, &minus, x)?;
        Ok(a.iter().zip(&b).map(|(p, m)| p - m).collect())
    }
}

/// Random bump pair near the star center. Keeping centers within 0.3 of the
/// inscribed radius (and radii below 0.15 of it) guarantees the merged
/// support box stays inside the domain for both ball and box shapes.
fn random_pair(star: &StarDomain, rng: &mut ChaCha8Rng) -> BumpPair {
    let center = &star.star_ball.center;
    let inscribed = star.shape.inner_dist(center);
    let place = |rng: &mut ChaCha8Rng| -> Ball {
        let r = rng.gen_range(0.08..0.15) * inscribed;
        let c: Vec<f64> = center
            .iter()
            .map(|v| v + rng.gen_range(-0.3..0.3) * inscribed)
            .collect();
        Ball::new(c, r).unwrap()
    };
    BumpPair {
        plus: make_bump(place(rng)),
        minus: make_bump(place(rng)),
    }
}

fn interior_probe(star: &StarDomain, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let bbox = star.shape.bounding_box();
    let margin = 0.08 * bbox.diameter();
    loop {
        let p: Vec<f64> = bbox
            .lo
            .iter()
            .zip(&bbox.hi)
            .map(|(a, b)| rng.gen_range(*a..*b))
            .collect();
        if star.shape.inner_dist(&p) > margin {
            return p;
        }
    }
}

/// div B phi = phi on generated zero-mean inputs, plus linearity and the
/// zero map.
pub fn suite_bogovskii(ctx: &SuiteContext) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let op = ctx.op();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let fd = FiniteDiffScheme::order2(5e-4);

    for case in 0..3 {
        let pair = random_pair(&ctx.star, &mut rng);
        let bphi = VectorFn::new(ctx.star.dim(), |x, outv| {
            let b = pair.apply_b(&op, x).unwrap();
            outv.copy_from_slice(&b);
        });
        let mut worst = 0.0f64;
        for _ in 0..10 {
            let p = interior_probe(&ctx.star, &mut rng);
            let div = divergence(&bphi, &p, fd).unwrap();
            let want = pair.eval(&p).unwrap();
            worst = worst.max((div - want).abs());
        }
        out.push(CheckResult::new(
            &format!("bogovskii_div_identity_{}", case + 1),
            worst,
            1e-4 * pair.sup_norm(),
        ));
    }

    // Linearity at probes (quadrature is linear, so this is near-exact).
    let b1 = make_bump(
        Ball::new(
            ctx.rho.support_ball.center.clone(),
            0.5 * ctx.rho.support_ball.radius,
        )
        .unwrap(),
    );
    let mut c2 = ctx.rho.support_ball.center.clone();
    c2[0] += 0.3 * ctx.rho.support_ball.radius;
    let b2 = make_bump(Ball::new(c2, 0.4 * ctx.rho.support_ball.radius).unwrap());
    let support = Shape::Box(
        b1.support_ball
            .bounding_box()
            .merge(&b2.support_ball.bounding_box()),
    );
    let (ca, cb) = (1.3, -0.7);
    let combo_field = ScalarFn::new(ctx.star.dim(), |x| ca * b1.value(x) + cb * b2.value(x));
    let phi1 = Supported::new(&b1, support.clone());
    let phi2 = Supported::new(&b2, support.clone());
    let combo = Supported::new(&combo_field, support.clone());
    let mut worst = 0.0f64;
    for _ in 0..4 {
        let p = interior_probe(&ctx.star, &mut rng);
        let v1 = bogovskii_apply(&op, &phi1, &p).unwrap();
        let v2 = bogovskii_apply(&op, &phi2, &p).unwrap();
        let vc = bogovskii_apply(&op, &combo, &p).unwrap();
        for d in 0..v1.len() {
            let lin = ca * v1[d] + cb * v2[d];
            worst = worst.max((vc[d] - lin).abs() / (1.0 + lin.abs()));
        }
    }
    out.push(CheckResult::new("bogovskii_linearity", worst, 1e-12));

    // phi = 0 maps to exactly 0.
    let zero = Supported::new(
        ScalarFn::new(ctx.star.dim(), |_| 0.0),
        Shape::Ball(ctx.rho.support_ball.clone()),
    );
    let p = interior_probe(&ctx.star, &mut rng);
    let z = bogovskii_apply(&op, &zero, &p).unwrap();
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    out.push(CheckResult::new("bogovskii_zero_input", norm, 0.0));
    out
}

/// The duality identity between independent quadratures, on the configured
/// field when present (vector analytic), otherwise on a default field.
pub fn suite_duality(
    ctx: &SuiteContext,
    field: Option<&curlfree_core::fieldspec::Field>,
) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let op = ctx.op();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed.wrapping_add(1));
    let default_v = VectorFn::new(ctx.star.dim(), |x, outv| {
        outv[0] = x[1] * x[1];
        outv[1] = x[0];
        for o in outv.iter_mut().skip(2) {
            *o = 0.0;
        }
    });
    for case in 0..3 {
        // Unit-amplitude bump so the absolute tolerance is scale-fair.
        let pair = random_pair(&ctx.star, &mut rng);
        let bump = pair.plus.clone();
        let amp = bump.normalization;
        let phi_field = ScalarFn::new(ctx.star.dim(), move |x| bump.value(x) / amp);
        let phi = Supported::new(&phi_field, Shape::Ball(pair.plus.support_ball.clone()));
        let r = match field {
            Some(f) if !f.is_scalar() => duality_residual(&op, f, &phi),
            _ => duality_residual(&op, &default_v, &phi),
        };
        match r {
            Ok(resid) => out.push(CheckResult::new(
                &format!("duality_identity_{}", case + 1),
                resid,
                1e-6,
            )),
            Err(e) => out.push(CheckResult::refused(
                &format!("duality_identity_{}", case + 1),
                1e-6,
                e.to_string(),
            )),
        }
    }
    out
}

/// B phi vanishes outside the convex hull of the supports (exactly, by the
/// support bookkeeping; the check allows 1e-10).
pub fn suite_support(ctx: &SuiteContext) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let op = ctx.op();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed.wrapping_add(2));
    let pair = random_pair(&ctx.star, &mut rng);
    let support = pair.support();
    let bbox = ctx.star.shape.bounding_box();
    let mut worst = 0.0f64;
    let mut outside = 0usize;
    let mut guard = 0usize;
    while outside < 200 && guard < 200_000 {
        guard += 1;
        let p: Vec<f64> = bbox
            .lo
            .iter()
            .zip(&bbox.hi)
            .map(|(a, b)| rng.gen_range(*a..*b))
            .collect();
        if ctx.star.shape.inner_dist(&p) < 0.02 * bbox.diameter() {
            continue;
        }
        if hull_distance(&p, &support, &op.rho.support_ball) <= 1e-6 {
            continue;
        }
        outside += 1;
        let b = pair.apply_b(&op, &p).unwrap();
        worst = worst.max(b.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    out.push(
        CheckResult::new("support_containment", worst, 1e-10)
            .with_note(format!("{outside} probes outside the hull")),
    );
    // Points inside either support are inside the hull (lambda = 0 or 1).
    let in_phi = f64::from(!curlfree_core::geometry::support_hull_test(
        &pair.plus.support_ball.center,
        &support,
        &op.rho.support_ball,
    ));
    let in_rho = f64::from(!curlfree_core::geometry::support_hull_test(
        &op.rho.support_ball.center,
        &support,
        &op.rho.support_ball,
    ));
    out.push(CheckResult::new(
        "hull_contains_endpoints",
        in_phi + in_rho,
        0.0,
    ));
    out
}

/// Homotopy invariance of line integrals for the configured field (default:
/// a gradient field), plus the reversal property.
pub fn suite_homotopy(
    ctx: &SuiteContext,
    field: Option<&curlfree_core::fieldspec::Field>,
) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed.wrapping_add(3));
    let n = ctx.star.dim();
    let bbox = ctx.star.shape.bounding_box();
    let scale = 0.3 * bbox.diameter() / (n as f64).sqrt();
    let center = &ctx.star.star_ball.center;

    // Two FEP paths with a bulge between shared endpoints.
    let endpoint = |sign: f64| -> Vec<f64> {
        let mut p = center.clone();
        p[0] += sign * scale;
        p
    };
    let mid = |bulge: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut p = center.clone();
        p[1] += bulge * scale * rng.gen_range(0.6..1.0);
        p
    };
    let gamma = CurvePath::new(vec![endpoint(-1.0), mid(0.6, &mut rng), endpoint(1.0)]).unwrap();
    let gamma_tilde =
        CurvePath::new(vec![endpoint(-1.0), mid(-0.6, &mut rng), endpoint(1.0)]).unwrap();
    let homotopy = Homotopy::straight_line(gamma.clone(), gamma_tilde.clone()).unwrap();
    let domain = match &ctx.star.shape {
        Shape::Ball(b) => Domain::Ball(b.clone()),
        Shape::Box(b) => Domain::Box(b.clone()),
    };

    let default_v = VectorFn::new(n, |x, outv| {
        // grad(x1 x2) padded with zeros.
        outv[0] = x[1];
        outv[1] = x[0];
        for o in outv.iter_mut().skip(2) {
            *o = 0.0;
        }
    });
    let inv_cfg = InvarianceConfig::default();
    let run = |v: &dyn VectorField| -> CheckResult {
        match homotopy_invariance_check(v, &domain, &gamma, &gamma_tilde, &homotopy, 16, &inv_cfg) {
            Ok(report) => {
                CheckResult::new("homotopy_invariance", report.residual, 1e-6).with_note(format!(
                    "smoothed-path residual {:.3e} at k = {}",
                    report.smoothed_residual, report.k_used
                ))
            }
            Err(e) => CheckResult::refused("homotopy_invariance", 1e-6, e.to_string()),
        }
    };
    out.push(match field {
        Some(f) if !f.is_scalar() => run(f),
        _ => run(&default_v),
    });

    // Reversal property for the default field.
    let forward = line_integral(&default_v, &gamma, 16).unwrap();
    let backward = line_integral(&default_v, &ReversedCurve(&gamma), 16).unwrap();
    out.push(CheckResult::new(
        "line_integral_reversal",
        (forward + backward).abs(),
        1e-12 * (1.0 + forward.abs()),
    ));
    out
}

/// Discrete Sobolev suite on the configured lattice: exact adjointness,
/// exact divergence-free test fields, gradient recovery, and the rotational
/// rejection at the curl stage. A configured vector grid field (CFGR files)
/// is additionally run through the pipeline.
pub fn suite_sobolev(
    cfg: &RunConfig,
    field: Option<&curlfree_core::fieldspec::Field>,
    seed: u64,
) -> Result<Vec<CheckResult>, String> {
    let shape = cfg.params.grid_shape.clone();
    if shape.len() != cfg.dimension {
        return Err(format!(
            "params.grid_shape has {} axes, dimension is {}",
            shape.len(),
            cfg.dimension
        ));
    }
    let h = 1.0 / (*shape.iter().max().unwrap() as f64 - 1.0);
    let space = GridSpace::new(shape, h, vec![0.0; cfg.dimension]).map_err(|e| e.to_string())?;
    let mut out = Vec::new();

    out.push(CheckResult::new(
        "sobolev_adjointness",
        adjointness_check(&space, 100, seed),
        1e-12,
    ));

    let tests =
        DivFreeTestSet::generate(&space, 50, seed.wrapping_add(5)).map_err(|e| e.to_string())?;
    let worst_div = tests
        .fields
        .iter()
        .map(|u| space.div(u).iter().map(|v| v.abs()).fold(0.0f64, f64::max))
        .fold(0.0f64, f64::max);
    out.push(CheckResult::new(
        "sobolev_testset_divergence",
        worst_div,
        0.0,
    ));

    // Known-potential recovery through the full pipeline.
    let f0 = space.sample(|x| (2.0 * x[0]).sin() + x.get(1).map_or(0.0, |y| y * y));
    let g = space.grad(&f0);
    let report = weak_poincare_pipeline(&space, &g, &tests, &PipelineConfig::default())
        .map_err(|e| e.to_string())?;
    match report.potential {
        Some(f) => {
            let mut f0c = f0.clone();
            let mean = f0c.iter().sum::<f64>() / f0c.len() as f64;
            for v in &mut f0c {
                *v -= mean;
            }
            let diff: Vec<f64> = f.iter().zip(&f0c).map(|(a, b)| a - b).collect();
            let rel = space.norm(&diff) / space.norm(&f0c);
            out.push(CheckResult::new("sobolev_pipeline_recovery", rel, 1e-8));
        }
        None => out.push(CheckResult::refused(
            "sobolev_pipeline_recovery",
            1e-8,
            format!(
                "pipeline failed at stage {:?}",
                report.first_failure().map(|s| s.name)
            ),
        )),
    }

    // Rotational field must fail at the curl stage with residual ~ 2.
    if cfg.dimension == 2 {
        let u = vec![space.sample(|x| -x[1]), space.sample(|x| x[0])];
        let report = weak_poincare_pipeline(&space, &u, &tests, &PipelineConfig::default())
            .map_err(|e| e.to_string())?;
        let ok = !report.passed()
            && report.first_failure().map(|s| s.name) == Some("curl")
            && (report.stages[0].residual - 2.0).abs() < 1e-9;
        out.push(
            CheckResult::new(
                "sobolev_rotational_rejected",
                if ok { 0.0 } else { 1.0 },
                0.0,
            )
            .with_note(format!("curl residual {:.6}", report.stages[0].residual)),
        );

        // Least-squares residual for the rotational field stays away from 0.
        let (_, resid) =
            solve_potential_l2(&space, &u, &SolveConfig::default()).map_err(|e| e.to_string())?;
        out.push(CheckResult::new(
            "sobolev_rotational_residual_floor",
            if resid > 0.3 { 0.0 } else { 1.0 },
            0.0,
        ));
    }

    // Configured vector grid data runs through the pipeline on its own
    // lattice.
    if let Some(f) = field {
        if !f.is_scalar() {
            let grids: Vec<&curlfree_core::fieldspec::GridField> = f
                .components()
                .iter()
                .filter_map(|c| match c {
                    curlfree_core::fieldspec::Component::Grid(g) => Some(g),
                    _ => None,
                })
                .collect();
            if grids.len() == cfg.dimension
                && grids.windows(2).all(|w| {
                    w[0].shape == w[1].shape && w[0].origin == w[1].origin && w[0].h == w[1].h
                })
            {
                let data_space =
                    GridSpace::new(grids[0].shape.clone(), grids[0].h, grids[0].origin.clone())
                        .map_err(|e| e.to_string())?;
                let data_tests = DivFreeTestSet::generate(&data_space, 50, seed.wrapping_add(9))
                    .map_err(|e| e.to_string())?;
                let g: Vec<Vec<f64>> = grids.iter().map(|c| c.values.clone()).collect();
                let report =
                    weak_poincare_pipeline(&data_space, &g, &data_tests, &PipelineConfig::default())
                        .map_err(|e| e.to_string())?;
                let last = report.stages.last().unwrap();
                out.push(
                    CheckResult::new("sobolev_config_grid_pipeline", last.residual, last.tolerance)
                        .with_note(match report.first_failure() {
                            None => "all stages passed".to_string(),
                            Some(s) => format!("failed at stage {}", s.name),
                        }),
                );
            }
        }
    }
    Ok(out)
}
