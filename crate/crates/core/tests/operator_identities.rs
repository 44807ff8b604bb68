//! Identity checks for the Bogovskii operator B and the potential operator
//! A: div(B phi) = phi on zero-mean inputs, grad(Av) = v on curl-free
//! fields, the support containment of B phi, linearity, the duality pairing
//! and the local de Rham functional.

use curlfree_core::error::Error;
use curlfree_core::fieldspec::{
    divergence, gradient, FiniteDiffScheme, ScalarField, ScalarFn, Supported, VectorField, VectorFn,
};
use curlfree_core::geometry::{hull_distance, Ball, Shape, StarDomain};
use curlfree_core::mollify::{make_bump, Mollifier};
use curlfree_core::operators::{
    bogovskii_apply, derham_local_functional, duality_residual, potential_apply, BogovskiiForm,
    BogovskiiOp,
};
use curlfree_core::quadrature::{BallQuad, GaussRule, QuadratureRule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Oracle-side integral over a ball (radial-aligned, order 48).
fn ball_integral(ball: &Ball, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let rule = BallQuad::unit(ball.dim(), 48, 192);
    let mut total = 0.0;
    rule.for_each_on(&ball.center, ball.radius, |x, w| total += w * f(x));
    total
}

fn disc_op() -> BogovskiiOp {
    let domain = StarDomain::ball(vec![0.0, 0.0], 1.0, 0.5).unwrap();
    let rho = make_bump(Ball::new(vec![0.0, 0.0], 0.3).unwrap());
    BogovskiiOp::new(domain, rho, QuadratureRule::default_orders()).unwrap()
}

/// Zero-mean pair of bumps; the masses cancel exactly by construction.
struct BumpPair {
    plus: Mollifier,
    minus: Mollifier,
}

impl BumpPair {
    fn support(&self) -> Shape {
        let a = self.plus.support_ball.bounding_box();
        let b = self.minus.support_ball.bounding_box();
        let merged = a.merge(&b);
        Shape::Box(merged)
    }

    fn sup_norm(&self) -> f64 {
        // Bump peaks at normalization * exp(-1).
        let e = (-1.0f64).exp();
        (self.plus.normalization * e).max(self.minus.normalization * e)
    }
}

impl ScalarField for BumpPair {
    fn dim(&self) -> usize {
        self.plus.dim()
    }
    fn eval(&self, x: &[f64]) -> curlfree_core::Result<f64> {
        Ok(self.plus.value(x) - self.minus.value(x))
    }
}

fn random_bump_pair(rng: &mut ChaCha8Rng) -> BumpPair {
    // Two disjoint-ish bumps inside the unit disc, away from the boundary.
    let r1: f64 = rng.gen_range(0.12..0.22);
    let r2: f64 = rng.gen_range(0.12..0.22);
    let a1 = rng.gen_range(0.0..std::f64::consts::TAU);
    let a2 = a1 + rng.gen_range(1.5..4.0);
    let d1 = rng.gen_range(0.1..0.6 - r1.min(0.3));
    let d2 = rng.gen_range(0.1..0.6 - r2.min(0.3));
    let c1 = vec![d1 * a1.cos(), d1 * a1.sin()];
    let c2 = vec![d2 * a2.cos(), d2 * a2.sin()];
    BumpPair {
        plus: make_bump(Ball::new(c1, r1).unwrap()),
        minus: make_bump(Ball::new(c2, r2).unwrap()),
    }
}

#[test]
fn divergence_of_b_recovers_zero_mean_input() {
    let op = disc_op();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let fd = FiniteDiffScheme::order2(5e-4);
    for case in 0..3 {
        let pair = random_bump_pair(&mut rng);
        let support = pair.support();
        let sup = pair.sup_norm();
        let phi = Supported::new(&pair, support);
        let bphi = VectorFn::new(2, |x, out| {
            let b = bogovskii_apply(&op, &phi, x).unwrap();
            out.copy_from_slice(&b);
        });
        let mut worst = 0.0f64;
        for _ in 0..12 {
            let x = loop {
                let p = [rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8)];
                if p[0] * p[0] + p[1] * p[1] < 0.64 {
                    break p;
                }
            };
            let div = divergence(&bphi, &x, fd).unwrap();
            let want = pair.eval(&x).unwrap();
            worst = worst.max((div - want).abs());
        }
        assert!(
            worst <= 1e-4 * sup,
            "case {case}: residual {worst:.3e} vs allowance {:.3e}",
            1e-4 * sup
        );
    }
}

#[test]
fn b_phi_vanishes_outside_support_hull() {
    let op = disc_op();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pair = random_bump_pair(&mut rng);
    let support = pair.support();
    let phi = Supported::new(&pair, support.clone());
    let mut outside = 0;
    while outside < 200 {
        let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        if x[0] * x[0] + x[1] * x[1] >= 0.98 {
            continue;
        }
        if hull_distance(&x, &support, &op.rho.support_ball) <= 1e-6 {
            continue;
        }
        outside += 1;
        let b = bogovskii_apply(&op, &phi, &x).unwrap();
        let norm = (b[0] * b[0] + b[1] * b[1]).sqrt();
        assert!(
            norm <= 1e-10,
            "B phi = {norm:.3e} at {x:?} outside the hull"
        );
    }
}

#[test]
fn polar_and_direct_forms_agree_away_from_the_support() {
    // Inner order 48: at the default 32 each chord integral carries ~1e-8
    // of its own, which would eat the whole agreement budget.
    let domain = StarDomain::ball(vec![0.0, 0.0], 1.0, 0.5).unwrap();
    let rho = make_bump(Ball::new(vec![0.0, 0.0], 0.3).unwrap());
    let quad = QuadratureRule::new(24, 48).unwrap();
    let op = BogovskiiOp::new(domain, rho, quad).unwrap();
    let direct = op.clone().with_form(BogovskiiForm::Direct);
    let bump = make_bump(Ball::new(vec![0.45, 0.1], 0.18).unwrap());
    let phi = Supported::new(&bump, Shape::Ball(bump.support_ball.clone()));
    // Probes inside the hull but at distance from spt phi, where the direct
    // form's outer integrand is smooth.
    for x in [[-0.1, -0.05], [0.1, 0.02], [-0.2, 0.1], [0.05, -0.15]] {
        let a = bogovskii_apply(&op, &phi, &x).unwrap();
        let b = bogovskii_apply(&direct, &phi, &x).unwrap();
        let diff = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        assert!(diff <= 1e-8, "forms differ by {diff:.3e} at {x:?}");
    }
}

#[test]
fn b_is_linear_at_probe_points() {
    let op = disc_op();
    let b1 = make_bump(Ball::new(vec![0.4, 0.0], 0.2).unwrap());
    let b2 = make_bump(Ball::new(vec![-0.3, 0.2], 0.15).unwrap());
    let bbox = b1
        .support_ball
        .bounding_box()
        .merge(&b2.support_ball.bounding_box());
    let support = Shape::Box(bbox);
    let (ca, cb) = (1.7, -0.6);
    let phi1 = Supported::new(&b1, support.clone());
    let phi2 = Supported::new(&b2, support.clone());
    let combo_field = ScalarFn::new(2, |x| ca * b1.value(x) + cb * b2.value(x));
    let combo = Supported::new(&combo_field, support.clone());
    for x in [[0.0, 0.0], [0.2, -0.1], [-0.1, 0.3]] {
        let v1 = bogovskii_apply(&op, &phi1, &x).unwrap();
        let v2 = bogovskii_apply(&op, &phi2, &x).unwrap();
        let vc = bogovskii_apply(&op, &combo, &x).unwrap();
        for d in 0..2 {
            let lin = ca * v1[d] + cb * v2[d];
            assert!((vc[d] - lin).abs() <= 1e-12 * (1.0 + lin.abs()));
        }
    }
}

#[test]
fn potential_of_identity_field_matches_closed_form() {
    // v(x) = x gives Av(x) = |x|^2/2 - m2/2 with m2 the second moment of rho.
    let op = disc_op();
    let v = VectorFn::new(2, |x, out| out.copy_from_slice(x));
    // Independent moment quadrature at a different order.
    let rule = GaussRule::new(41);
    let r = op.rho.support_ball.radius;
    let c = &op.rho.support_ball.center;
    let m2 = {
        // radial: integral of rho(r) r^2 over the ball = 2 pi int rho r^3 dr
        let rr = r * r;
        2.0 * std::f64::consts::PI
            * rule.integrate(0.0, r, |t| {
                let u = t * t / rr;
                if u >= 1.0 - 1e-3 {
                    0.0
                } else {
                    op.rho.normalization * (-1.0 / (1.0 - u)).exp() * t * t * t
                }
            })
    };
    assert!((c[0], c[1]) == (0.0, 0.0));
    for x in [[0.3, 0.1], [-0.2, 0.4], [0.0, 0.0]] {
        let a = potential_apply(&op, &v, &x).unwrap();
        let want = 0.5 * (x[0] * x[0] + x[1] * x[1]) - 0.5 * m2;
        assert!((a - want).abs() < 1e-8, "at {x:?}: {a} vs {want}");
    }
}

#[test]
fn gradient_of_potential_recovers_polynomial_gradients() {
    let op = disc_op();
    let fd = FiniteDiffScheme::order4(1e-4);
    // v = grad f for cubic-and-below f; grad(Av) must equal v to 1e-6.
    let cases: Vec<(&str, Box<dyn Fn(&[f64], &mut [f64])>)> = vec![
        (
            "grad(x1 x2)",
            Box::new(|x: &[f64], out: &mut [f64]| {
                out[0] = x[1];
                out[1] = x[0];
            }),
        ),
        (
            "grad(x1^3/3 + x2^2)",
            Box::new(|x: &[f64], out: &mut [f64]| {
                out[0] = x[0] * x[0];
                out[1] = 2.0 * x[1];
            }),
        ),
        (
            "grad(x1^2 x2 - x2^3)",
            Box::new(|x: &[f64], out: &mut [f64]| {
                out[0] = 2.0 * x[0] * x[1];
                out[1] = x[0] * x[0] - 3.0 * x[1] * x[1];
            }),
        ),
    ];
    for (name, f) in cases {
        let v = VectorFn::new(2, f);
        let av = ScalarFn::new(2, |x| potential_apply(&op, &v, x).unwrap());
        let mut worst = 0.0f64;
        for x in [[0.3, 0.2], [-0.4, 0.1], [0.0, -0.5], [0.25, 0.55]] {
            let g = gradient(&av, &x, fd).unwrap();
            let mut want = vec![0.0; 2];
            v.eval_into(&x, &mut want).unwrap();
            for d in 0..2 {
                worst = worst.max((g[d] - want[d]).abs());
            }
        }
        assert!(worst <= 1e-6, "{name}: residual {worst:.3e}");
    }
}

#[test]
fn rotational_field_is_not_a_gradient_negative_control() {
    // v = (-x2, x1) is not curl-free; A applied to it is not a potential.
    let op = disc_op();
    let v = VectorFn::new(2, |x, out| {
        out[0] = -x[1];
        out[1] = x[0];
    });
    let av = ScalarFn::new(2, |x| potential_apply(&op, &v, x).unwrap());
    let fd = FiniteDiffScheme::order4(1e-4);
    let x = [0.4, 0.2];
    let g = gradient(&av, &x, fd).unwrap();
    let res = ((g[0] + x[1]).powi(2) + (g[1] - x[0]).powi(2)).sqrt();
    let scale = (x[0] * x[0] + x[1] * x[1]).sqrt();
    assert!(res > 0.5 * scale, "negative control failed: residual {res}");
}

#[test]
fn duality_pairing_trivial_cases_vanish() {
    let op = disc_op();
    let bump = make_bump(Ball::new(vec![0.35, -0.1], 0.2).unwrap());
    let zero_v = VectorFn::new(2, |_, out| out.fill(0.0));
    let phi = Supported::new(&bump, Shape::Ball(bump.support_ball.clone()));
    assert_eq!(duality_residual(&op, &zero_v, &phi).unwrap(), 0.0);

    let v = VectorFn::new(2, |x, out| {
        out[0] = x[1] * x[1];
        out[1] = x[0];
    });
    let zero_phi = Supported::new(
        ScalarFn::new(2, |_| 0.0),
        Shape::Ball(Ball::new(vec![0.3, 0.0], 0.2).unwrap()),
    );
    assert_eq!(duality_residual(&op, &v, &zero_phi).unwrap(), 0.0);
}

#[test]
fn duality_identity_holds_between_independent_quadratures() {
    let op = disc_op();
    let v = VectorFn::new(2, |x, out| {
        out[0] = x[1] * x[1];
        out[1] = x[0];
    });
    let bump = make_bump(Ball::new(vec![0.35, -0.1], 0.2).unwrap());
    let phi = Supported::new(&bump, Shape::Ball(bump.support_ball.clone()));
    let r = duality_residual(&op, &v, &phi).unwrap();
    assert!(r <= 1e-6, "duality residual {r:.3e}");
}

#[test]
fn derham_functional_offset_is_constant_across_bump_positions() {
    // G = grad(x1): <F, phi_p> - <x1, phi_p> must be constant in p.
    let op = disc_op();
    let g = VectorFn::new(2, |_, out| {
        out[0] = 1.0;
        out[1] = 0.0;
    });
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pairing = GaussRule::new(33);
    let mut offsets = Vec::new();
    for _ in 0..6 {
        let c = loop {
            let p = vec![rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
            if p[0] * p[0] + p[1] * p[1] < 0.25 {
                break p;
            }
        };
        let bump = make_bump(Ball::new(c, 0.15).unwrap());
        let phi = Supported::new(&bump, Shape::Ball(bump.support_ball.clone()));
        let value = derham_local_functional(&op, &g, &phi).unwrap();
        // <x1, phi> by an independent quadrature over the bump ball.
        let pair = ball_integral(&bump.support_ball, |x| x[0] * bump.value(x));
        offsets.push(value - pair);
    }
    let base = offsets[0];
    for (i, o) in offsets.iter().enumerate() {
        assert!(
            (o - base).abs() <= 2e-6,
            "offset {i} drifted: {o} vs {base}"
        );
    }
}

#[test]
fn derham_functional_vanishes_on_zero_data() {
    let op = disc_op();
    let g = VectorFn::new(2, |_, out| out.fill(0.0));
    let bump = make_bump(Ball::new(vec![0.2, 0.2], 0.15).unwrap());
    let phi = Supported::new(&bump, Shape::Ball(bump.support_ball.clone()));
    assert_eq!(derham_local_functional(&op, &g, &phi).unwrap(), 0.0);
}

#[test]
fn derham_partial_pairing_consistency() {
    // For admissible G (here G = grad psi, which annihilates divergence-free
    // test fields), <F, d_j phi> + <G_j, phi> = 0 via <G_j, phi> = <G, B d_j phi>.
    let op = disc_op();
    let psi = make_bump(Ball::new(vec![-0.1, 0.05], 0.35).unwrap());
    let g = psi.gradient_field();
    // Unit-amplitude bump so the absolute tolerance is meaningful.
    let bump = make_bump(Ball::new(vec![0.25, 0.0], 0.18).unwrap());
    let amp = bump.normalization;
    let support = Shape::Ball(Ball::new(vec![0.25, 0.0], 0.181).unwrap());
    for j in 0..2 {
        // d_j phi in closed form.
        let dphi = ScalarFn::new(2, |x| bump.partial(x, j) / amp);
        let phi_j = Supported::new(&dphi, support.clone());
        let f_dphi = derham_local_functional(&op, &g, &phi_j).unwrap();
        // <G_j, phi> by an independent quadrature over the bump support.
        let mut buf = [0.0; 2];
        let gj_phi = ball_integral(&bump.support_ball, |x| {
            g.eval_into(x, &mut buf).unwrap();
            buf[j] * bump.value(x) / amp
        });
        let resid = (f_dphi + gj_phi).abs();
        assert!(resid <= 1e-5, "axis {j}: pairing residual {resid:.3e}");
    }
}

#[test]
fn quadrature_reduction_is_summation_order_insensitive() {
    // Permuting the outer nodes must not move the result beyond 1e-13.
    let op = disc_op();
    let v = VectorFn::new(2, |x, out| {
        out[0] = (3.0 * x[0]).sin();
        out[1] = x[1] * x[0];
    });
    let a = potential_apply(&op, &v, &[0.3, -0.2]).unwrap();
    let b = potential_apply(&op, &v, &[0.3, -0.2]).unwrap();
    assert!((a - b).abs() <= 1e-13 * (1.0 + a.abs()));
}

#[test]
fn evaluation_error_propagates_with_offending_point() {
    let op = disc_op();
    let v = VectorFn::new(2, |x, out| {
        out[0] = x[0];
        out[1] = x[1];
    });
    // A field that fails on the left half-plane.
    struct Failing;
    impl VectorField for Failing {
        fn dim(&self) -> usize {
            2
        }
        fn eval_into(&self, x: &[f64], out: &mut [f64]) -> curlfree_core::Result<()> {
            if x[0] < -0.2 {
                return Err(Error::EvalFailed {
                    point: x.to_vec(),
                    reason: "pole".into(),
                });
            }
            out[0] = x[0];
            out[1] = x[1];
            Ok(())
        }
    }
    let _ = v;
    let err = potential_apply(&op, &Failing, &[-0.6, 0.0]).unwrap_err();
    assert!(matches!(err, Error::EvalFailed { .. }));
}
