//! Line-integral properties, the divergence-theorem parameter field, and
//! the homotopy-invariance verdict with its refusal paths.

use curlfree_core::error::Error;
use curlfree_core::fieldspec::VectorFn;
use curlfree_core::geometry::{AxisBox, Ball, Domain};
use curlfree_core::homotopy::{
    homotopy_invariance_check, line_integral, smooth_homotopy, w_field, ConcatCurve, Curve,
    Homotopy, InvarianceConfig, Path, ReversedCurve, HOMOTOPY_FD_STEP,
};
use curlfree_core::mollify::mollify_homotopy;

fn winding() -> VectorFn<impl Fn(&[f64], &mut [f64])> {
    VectorFn::new(2, |x: &[f64], out: &mut [f64]| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        out[0] = -x[1] / r2;
        out[1] = x[0] / r2;
    })
}

#[test]
fn reversal_negates_the_line_integral() {
    let v = VectorFn::new(2, |x, out| {
        out[0] = (2.0 * x[1]).sin() + x[0];
        out[1] = x[0] * x[1];
    });
    let p = Path::new(vec![vec![0.1, 0.0], vec![0.6, 0.4], vec![0.2, 0.9]]).unwrap();
    let forward = line_integral(&v, &p, 16).unwrap();
    let back_path = p.reversed();
    let backward = line_integral(&v, &back_path, 16).unwrap();
    assert!((forward + backward).abs() <= 1e-12 * (1.0 + forward.abs()));

    // Reversal of an arbitrary curve object behaves identically.
    let back_curve = ReversedCurve(&p);
    let backward2 = line_integral(&v, &back_curve, 16).unwrap();
    assert!((forward + backward2).abs() <= 1e-12 * (1.0 + forward.abs()));
}

#[test]
fn concatenation_is_additive_over_a_shared_waypoint() {
    let v = VectorFn::new(2, |x, out| {
        out[0] = x[1] * x[1] - x[0];
        out[1] = (3.0 * x[0]).cos();
    });
    let a = Path::new(vec![vec![0.0, 0.0], vec![0.4, 0.3], vec![0.8, 0.1]]).unwrap();
    let b = Path::new(vec![vec![0.8, 0.1], vec![1.1, 0.6], vec![1.5, 0.2]]).unwrap();
    let ia = line_integral(&v, &a, 20).unwrap();
    let ib = line_integral(&v, &b, 20).unwrap();
    let joined = ConcatCurve {
        first: &a,
        second: &b,
    };
    let ij = line_integral(&v, &joined, 20).unwrap();
    assert!(
        (ij - ia - ib).abs() <= 1e-10 * (1.0 + ij.abs()),
        "{ij} vs {}",
        ia + ib
    );
}

#[test]
fn w_field_is_divergence_free_for_curl_free_input() {
    // v = grad(x1^2 x2 + x2) is curl-free and smooth; Gamma is a smooth
    // straight-line homotopy, affine in t.
    let v = VectorFn::new(2, |x, out| {
        out[0] = 2.0 * x[0] * x[1];
        out[1] = x[0] * x[0] + 1.0;
    });
    let gamma = Path::segment(vec![0.0, 0.0], vec![1.0, 0.2]).unwrap();
    let gamma_tilde = Path::new(vec![vec![0.0, 0.0], vec![0.5, 0.6], vec![1.0, 0.2]]).unwrap();
    let h = Homotopy::straight_line(gamma, gamma_tilde).unwrap();
    let map = |s: f64, t: f64| h.eval(s, t);
    // Scale of w over the probe grid.
    let mut scale = 0.0f64;
    let mut worst = 0.0f64;
    let hd = 1.0 / 512.0;
    for i in 1..32 {
        for j in 1..32 {
            let s = i as f64 / 32.0;
            let t = j as f64 / 32.0;
            let w = w_field(&v, &map, s, t, HOMOTOPY_FD_STEP).unwrap();
            scale = scale.max(w[0].abs().max(w[1].abs()));
            // Central-difference divergence in parameter space.
            let ws = {
                let a = w_field(&v, &map, s + hd, t, HOMOTOPY_FD_STEP).unwrap();
                let b = w_field(&v, &map, s - hd, t, HOMOTOPY_FD_STEP).unwrap();
                (a[0] - b[0]) / (2.0 * hd)
            };
            let wt = {
                let a = w_field(&v, &map, s, t + hd, HOMOTOPY_FD_STEP).unwrap();
                let b = w_field(&v, &map, s, t - hd, HOMOTOPY_FD_STEP).unwrap();
                (a[1] - b[1]) / (2.0 * hd)
            };
            worst = worst.max((ws + wt).abs());
        }
    }
    assert!(
        worst <= 1e-4 * scale,
        "div w = {worst:.3e}, scale {scale:.3e}"
    );
}

#[test]
fn gradient_fields_are_homotopy_invariant() {
    // v = grad(|x|^2/2); any two FEP-homotopic paths agree.
    let v = VectorFn::new(2, |x, out| out.copy_from_slice(x));
    let gamma = Path::new(vec![vec![0.2, -0.5], vec![0.6, 0.0], vec![0.2, 0.5]]).unwrap();
    let gamma_tilde = Path::new(vec![vec![0.2, -0.5], vec![-0.1, 0.0], vec![0.2, 0.5]]).unwrap();
    let h = Homotopy::straight_line(gamma.clone(), gamma_tilde.clone()).unwrap();
    let domain = Domain::Ball(Ball::new(vec![0.0, 0.0], 1.0).unwrap());
    let report = homotopy_invariance_check(
        &v,
        &domain,
        &gamma,
        &gamma_tilde,
        &h,
        16,
        &InvarianceConfig::default(),
    )
    .unwrap();
    assert!(report.residual <= 1e-8, "residual {:.3e}", report.residual);
    assert!(report.smoothed_residual <= 1e-6);
}

#[test]
fn half_plane_winding_integral_matches_angle_difference() {
    // The winding field restricted to the right half-plane is curl-free on a
    // simply connected set; both integrals equal the atan2 difference pi/2.
    let v = winding();
    let gamma = Path::new(vec![vec![1.0, -1.0], vec![1.4, 0.0], vec![1.0, 1.0]]).unwrap();
    let gamma_tilde = Path::new(vec![vec![1.0, -1.0], vec![0.6, 0.0], vec![1.0, 1.0]]).unwrap();
    let h = Homotopy::straight_line(gamma.clone(), gamma_tilde.clone()).unwrap();
    let domain = Domain::Box(AxisBox::new(vec![0.2, -2.0], vec![3.0, 2.0]).unwrap());
    let report = homotopy_invariance_check(
        &v,
        &domain,
        &gamma,
        &gamma_tilde,
        &h,
        16,
        &InvarianceConfig::default(),
    )
    .unwrap();
    assert!(report.residual <= 1e-6, "residual {:.3e}", report.residual);
    let quarter = std::f64::consts::FRAC_PI_2;
    assert!((report.integral_gamma - quarter).abs() <= 1e-6);
    assert!((report.integral_gamma_tilde - quarter).abs() <= 1e-6);
}

#[test]
fn homotopy_leaving_the_annulus_is_refused() {
    // Two paths on opposite sides of the hole; the straight-line blend
    // crosses the hole and must be rejected on image containment.
    let v = winding();
    let arc = |sign: f64| -> Path {
        let pts: Vec<Vec<f64>> = (0..=6)
            .map(|i| {
                let th = std::f64::consts::PI * i as f64 / 6.0 - std::f64::consts::FRAC_PI_2;
                vec![th.cos(), sign * (th.sin() + 0.0)]
            })
            .map(|p| vec![p[0], p[1] * 1.0])
            .collect();
        Path::new(pts).unwrap()
    };
    let gamma = arc(1.0);
    let gamma_tilde = {
        let pts: Vec<Vec<f64>> = (0..=6)
            .map(|i| {
                let th = -std::f64::consts::PI * i as f64 / 6.0 - std::f64::consts::FRAC_PI_2;
                vec![th.cos(), th.sin()]
            })
            .collect();
        Path::new(pts).unwrap()
    };
    // Annulus as a ring of balls around the unit circle.
    let ring: Vec<Ball> = (0..12)
        .map(|i| {
            let th = 2.0 * std::f64::consts::PI * i as f64 / 12.0;
            Ball::new(vec![th.cos(), th.sin()], 0.42).unwrap()
        })
        .collect();
    let domain = Domain::BallUnion(ring);
    let h = Homotopy::straight_line(gamma.clone(), gamma_tilde.clone()).unwrap();
    let err = homotopy_invariance_check(
        &v,
        &domain,
        &gamma,
        &gamma_tilde,
        &h,
        16,
        &InvarianceConfig::default(),
    )
    .unwrap_err();
    assert!(
        matches!(err, Error::HomotopyLeavesDomain { .. }),
        "expected containment refusal, got {err:?}"
    );
}

#[test]
fn curl_bearing_fields_are_refused() {
    let v = VectorFn::new(2, |x, out| {
        out[0] = -x[1];
        out[1] = x[0];
    });
    let gamma = Path::segment(vec![-0.5, 0.0], vec![0.5, 0.0]).unwrap();
    let gamma_tilde = Path::new(vec![vec![-0.5, 0.0], vec![0.0, 0.4], vec![0.5, 0.0]]).unwrap();
    let h = Homotopy::straight_line(gamma.clone(), gamma_tilde.clone()).unwrap();
    let domain = Domain::Ball(Ball::new(vec![0.0, 0.0], 1.0).unwrap());
    let err = homotopy_invariance_check(
        &v,
        &domain,
        &gamma,
        &gamma_tilde,
        &h,
        16,
        &InvarianceConfig::default(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::CurlResidualExceeded { .. }));
}

#[test]
fn small_k_is_rejected_when_smoothing_cuts_a_corner() {
    // An L-shaped tube domain; the path hugs the bend, so over-aggressive
    // smoothing (small k) cuts the corner and exits the tube.
    let v = VectorFn::new(2, |x, out| out.copy_from_slice(x));
    let bend = Path::new(vec![
        vec![0.0, 1.0],
        vec![0.0, 0.55],
        vec![0.0, 0.12],
        vec![0.45, 0.0],
        vec![1.0, 0.0],
    ])
    .unwrap();
    let domain = Domain::BallUnion(vec![
        Ball::new(vec![0.0, 1.0], 0.22).unwrap(),
        Ball::new(vec![0.0, 0.66], 0.22).unwrap(),
        Ball::new(vec![0.0, 0.33], 0.22).unwrap(),
        Ball::new(vec![0.05, 0.05], 0.25).unwrap(),
        Ball::new(vec![0.33, 0.0], 0.22).unwrap(),
        Ball::new(vec![0.66, 0.0], 0.22).unwrap(),
        Ball::new(vec![1.0, 0.0], 0.22).unwrap(),
    ]);
    let h = Homotopy::straight_line(bend.clone(), bend.clone()).unwrap();
    match homotopy_invariance_check(
        &v,
        &domain,
        &bend,
        &bend,
        &h,
        4,
        &InvarianceConfig::default(),
    ) {
        Err(Error::SmoothingIndexBelowAdmissible { k: 4, k0 }) => {
            assert!(
                k0 > 4,
                "sweep should find a larger admissible index, got {k0}"
            );
            // The index found by the sweep must indeed be admissible.
            let sm = mollify_homotopy(&h, k0).unwrap();
            assert!(sm.check_in_domain(&domain, 64).is_ok());
        }
        Err(Error::PathLeavesDomain { s, point }) => {
            panic!("path itself left the domain at s={s}: {point:?}")
        }
        other => panic!("expected smoothing-index refusal, got {other:?}"),
    }
}

#[test]
fn user_grid_homotopy_matches_its_sampled_map() {
    // Sample a straight-line homotopy onto a grid; the UserGrid variant
    // must validate FEP, interpolate the map, and smooth like the original.
    let gamma = Path::new(vec![vec![-0.5, 0.0], vec![0.0, 0.4], vec![0.5, 0.0]]).unwrap();
    let gamma_tilde =
        Path::new(vec![vec![-0.5, 0.0], vec![0.0, -0.4], vec![0.5, 0.0]]).unwrap();
    let exact = Homotopy::straight_line(gamma.clone(), gamma_tilde.clone()).unwrap();
    let (ns, nt) = (33, 9);
    let mut points = Vec::with_capacity(ns * nt);
    for i in 0..ns {
        for j in 0..nt {
            points.push(exact.eval(i as f64 / (ns - 1) as f64, j as f64 / (nt - 1) as f64));
        }
    }
    let sampled = Homotopy::user_grid(ns, nt, points).unwrap();
    // Interpolation error of the bilinear grid against the exact map.
    let mut worst = 0.0f64;
    for i in 0..=32 {
        for j in 0..=32 {
            let (s, t) = (i as f64 / 32.0, j as f64 / 32.0);
            let a = exact.eval(s, t);
            let b = sampled.eval(s, t);
            for d in 0..2 {
                worst = worst.max((a[d] - b[d]).abs());
            }
        }
    }
    assert!(worst < 5e-3, "bilinear map deviates by {worst:.3e}");

    // The tensor smoothing path pins endpoints exactly and stays close to
    // the separable smoothing of the exact homotopy.
    let sm_grid = mollify_homotopy(&sampled, 16).unwrap();
    let sm_exact = mollify_homotopy(&exact, 16).unwrap();
    let x0 = exact.eval(0.0, 0.0);
    for j in 0..=8 {
        let t = j as f64 / 8.0;
        assert!(sm_grid.eval(0.0, t) == x0, "UserGrid smoothing must pin endpoints");
    }
    let mut drift = 0.0f64;
    for i in 0..=16 {
        for j in 0..=16 {
            let (s, t) = (i as f64 / 16.0, j as f64 / 16.0);
            let a = sm_exact.eval(s, t);
            let b = sm_grid.eval(s, t);
            for d in 0..2 {
                drift = drift.max((a[d] - b[d]).abs());
            }
        }
    }
    assert!(drift < 5e-3, "smoothed maps deviate by {drift:.3e}");

    // A non-FEP grid is rejected.
    let mut bad = Vec::new();
    for i in 0..ns {
        for j in 0..nt {
            let mut p = exact.eval(i as f64 / (ns - 1) as f64, j as f64 / (nt - 1) as f64);
            if i == 0 {
                p[1] += 0.01 * j as f64; // wiggle the start column
            }
            bad.push(p);
        }
    }
    assert!(Homotopy::user_grid(ns, nt, bad).is_err());
}

#[test]
fn smoothing_convergence_trend_is_monotone() {
    // For a merely continuous-curl field the smoothed boundary integral
    // converges to the original path integral as k grows.
    let v = VectorFn::new(2, |x, out| {
        out[0] = -x[1];
        out[1] = x[0];
    });
    let gamma = Path::new(vec![
        vec![0.5, -0.4],
        vec![0.75, -0.1],
        vec![0.55, 0.25],
        vec![0.7, 0.5],
    ])
    .unwrap();
    let h = Homotopy::straight_line(gamma.clone(), gamma.clone()).unwrap();
    let reference = line_integral(&v, &gamma, 24).unwrap();
    let mut residuals = Vec::new();
    for k in [8u32, 16, 32, 64] {
        let sm = smooth_homotopy(&h, k).unwrap();
        let row = sm.boundary_path(0);
        let i = line_integral(&v, &row, 24).unwrap();
        residuals.push((i - reference).abs());
    }
    assert!(
        residuals.windows(2).all(|w| w[1] <= w[0] + 1e-12),
        "smoothing residuals not monotone: {residuals:?}"
    );
    assert!(
        residuals[0] > 1e-7,
        "first residual suspiciously small: {residuals:?}"
    );
}
