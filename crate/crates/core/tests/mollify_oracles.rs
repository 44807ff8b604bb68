//! Oracle checks for mollifiers, field scaling and mollification, and the
//! contract-extend-convolve homotopy smoothing.

use curlfree_core::error::Error;
use curlfree_core::fieldspec::{GridField, ScalarField, ScalarFn};
use curlfree_core::geometry::{AxisBox, Ball, Domain};
use curlfree_core::homotopy::{Curve, Homotopy, Path};
use curlfree_core::mollify::{
    make_bump, mollified, mollify_field, mollify_homotopy, scale_field, DeltaSeq1D,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Adaptive Simpson oracle, independent of the Gauss machinery.
fn adaptive_simpson<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
    }
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, left, 0.5 * tol, depth - 1) + rec(f, m, b, right, 0.5 * tol, depth - 1)
        }
    }
    let whole = simpson(&f, a, b);
    rec(&f, a, b, whole, tol, 40)
}

#[test]
fn one_dimensional_raw_integral_matches_adaptive_oracle() {
    let raw = |x: f64| {
        if x.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - x * x)).exp()
        }
    };
    let oracle = adaptive_simpson(raw, -1.0, 1.0, 1e-13);
    assert!((oracle - 0.44399).abs() < 1e-5, "oracle = {oracle}");
    let bump = make_bump(Ball::new(vec![0.0], 1.0).unwrap());
    assert!((1.0 / bump.normalization - oracle).abs() <= 1e-10);
    assert!((bump.normalization - 2.2523).abs() < 1e-3);
}

#[test]
fn two_dimensional_mass_matches_adaptive_radial_oracle() {
    let r_outer = 0.45f64;
    let bump = make_bump(Ball::new(vec![0.2, -0.1], r_outer).unwrap());
    let raw_radial = |r: f64| {
        let u = r * r / (r_outer * r_outer);
        if u >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - u)).exp() * r
        }
    };
    let oracle = 2.0 * std::f64::consts::PI * adaptive_simpson(raw_radial, 0.0, r_outer, 1e-14);
    assert!((bump.normalization * oracle - 1.0).abs() <= 1e-8);
}

#[test]
fn bump_derivatives_are_bounded_and_continuous_across_the_boundary() {
    let bump = make_bump(Ball::new(vec![0.0, 0.0], 0.5).unwrap());
    let h = 1e-4;
    // First and second central differences along a radial line crossing the
    // support boundary at r = 0.5.
    let f = |r: f64| bump.value(&[r, 0.0]);
    for r in [0.499, 0.4995, 0.5, 0.5005, 0.501] {
        let d1 = (f(r + h) - f(r - h)) / (2.0 * h);
        let d2 = (f(r + h) - 2.0 * f(r) + f(r - h)) / (h * h);
        assert!(d1.abs() <= 1e-6, "first derivative jump {d1:.3e} at r={r}");
        assert!(
            d2.abs() <= 1e-6 * bump.normalization.max(1.0) + 1e-6,
            "second derivative {d2:.3e} at r={r}"
        );
    }
}

#[test]
fn scaled_grid_field_matches_interpolation_oracle() {
    let grid = GridField::sample(vec![-1.0, -1.0], 0.05, vec![41, 41], |x| {
        (1.7 * x[0]).sin() + x[1] * x[0]
    })
    .unwrap();
    let lambda = 1.25;
    let scaled = scale_field(&grid, lambda).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..1000 {
        let x = [rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2)];
        let direct = grid.eval(&[x[0] / lambda, x[1] / lambda]).unwrap();
        let via_scaled = scaled.eval(&x).unwrap();
        assert_eq!(direct, via_scaled);
    }
}

#[test]
fn mollification_residual_decreases_for_steep_profiles() {
    // Indicator-like tanh front; sup |v - g| over fixed probes must drop
    // monotonically as l quadruples.
    let g = ScalarFn::new(2, |x| (40.0 * (x[0] - 0.1)).tanh());
    let domain = Domain::Box(AxisBox::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap());
    let probes: Vec<Vec<f64>> = (0..9).map(|i| vec![-0.4 + 0.1 * i as f64, 0.2]).collect();
    let mut sups = Vec::new();
    for l in [4u32, 16, 64] {
        let vals = mollify_field(&g, &domain, l, &probes, 16).unwrap();
        let sup = vals
            .iter()
            .zip(&probes)
            .map(|(v, p)| (v - (40.0 * (p[0] - 0.1)).tanh()).abs())
            .fold(0.0f64, f64::max);
        sups.push(sup);
    }
    assert!(sups[0] > sups[1] && sups[1] > sups[2], "sups = {sups:?}");
}

#[test]
fn delta_sequence_mass_stays_one_as_support_shrinks() {
    for k in [4u32, 8, 64, 256] {
        let d = DeltaSeq1D::new(k).unwrap();
        assert!((d.mollifier.support_ball.radius - 1.0 / k as f64).abs() < 1e-15);
        assert!((d.mollifier.mass(48) - 1.0).abs() <= 1e-8);
    }
}

fn quarter_circle(radius: f64, waypoints: usize) -> Path {
    let pts: Vec<Vec<f64>> = (0..=waypoints)
        .map(|i| {
            let th = std::f64::consts::FRAC_PI_2 * i as f64 / waypoints as f64;
            vec![radius * th.cos(), radius * th.sin()]
        })
        .collect();
    Path::new(pts).unwrap()
}

/// Shared endpoints for the two quarter-circle-like arcs.
fn blended_arcs() -> (Path, Path) {
    let a = quarter_circle(0.7, 6);
    // Same endpoints, bulged interior.
    let pts: Vec<Vec<f64>> = (0..=6)
        .map(|i| {
            let th = std::f64::consts::FRAC_PI_2 * i as f64 / 6.0;
            let r = 0.7 + 0.18 * (std::f64::consts::PI * i as f64 / 6.0).sin();
            let mut p = vec![r * th.cos(), r * th.sin()];
            if i == 0 {
                p = vec![0.7, 0.0];
            }
            if i == 6 {
                p = vec![0.7 * (std::f64::consts::FRAC_PI_2).cos(), 0.7];
            }
            p
        })
        .collect();
    (a, Path::new(pts).unwrap())
}

#[test]
fn smoothing_requires_k_at_least_four() {
    let (a, b) = blended_arcs();
    let h = Homotopy::straight_line(a, b).unwrap();
    assert!(matches!(
        mollify_homotopy(&h, 3),
        Err(Error::SmoothingIndexTooSmall(3))
    ));
    assert!(mollify_homotopy(&h, 4).is_ok());
}

#[test]
fn constant_homotopy_smooths_to_the_constant() {
    let p = vec![0.3, -0.2];
    let path = Path::new(vec![p.clone(), p.clone()]).unwrap();
    let h = Homotopy::straight_line(path.clone(), path).unwrap();
    let sm = mollify_homotopy(&h, 8).unwrap();
    for &(s, t) in &[(0.0, 0.0), (0.3, 0.7), (0.5, 0.5), (1.0, 1.0), (0.9, 0.1)] {
        let v = sm.eval(s, t);
        assert!(
            (v[0] - p[0]).abs() <= 1e-12 && (v[1] - p[1]).abs() <= 1e-12,
            "at ({s},{t}): {v:?}"
        );
    }
}

#[test]
fn t_independent_homotopy_stays_t_independent() {
    let gamma = quarter_circle(0.6, 5);
    let h = Homotopy::straight_line(gamma.clone(), gamma).unwrap();
    let sm = mollify_homotopy(&h, 16).unwrap();
    for &s in &[0.2, 0.35, 0.5, 0.8] {
        let base = sm.eval(s, 0.0);
        for &t in &[0.25, 0.5, 0.75, 1.0] {
            let v = sm.eval(s, t);
            for d in 0..2 {
                assert!(
                    (v[d] - base[d]).abs() <= 1e-12,
                    "t-dependence at s={s}, t={t}"
                );
            }
        }
    }
}

#[test]
fn endpoint_columns_are_pinned_exactly() {
    let (a, b) = blended_arcs();
    let x0 = a.start().to_vec();
    let x1 = a.end().to_vec();
    let h = Homotopy::straight_line(a, b).unwrap();
    for k in [4u32, 8, 32] {
        let sm = mollify_homotopy(&h, k).unwrap();
        for i in 0..=16 {
            let t = i as f64 / 16.0;
            let p0 = sm.eval(0.0, t);
            let p1 = sm.eval(1.0, t);
            assert!(p0 == x0, "start not pinned at k={k}, t={t}");
            assert!(p1 == x1, "end not pinned at k={k}, t={t}");
        }
    }
}

#[test]
fn smoothed_image_approaches_the_original_image() {
    let (a, b) = blended_arcs();
    let h = Homotopy::straight_line(a, b).unwrap();
    // Dense sample of the original image; its spacing (~2e-3) floors the
    // measured distances.
    let mut image = Vec::new();
    for i in 0..=512 {
        for j in 0..=32 {
            image.push(h.eval(i as f64 / 512.0, j as f64 / 32.0));
        }
    }
    let dist_to_image = |p: &[f64]| -> f64 {
        image
            .iter()
            .map(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min)
    };
    let mut deltas = Vec::new();
    for k in [8u32, 16, 32, 64] {
        let sm = mollify_homotopy(&h, k).unwrap();
        let mut worst = 0.0f64;
        for i in 0..=64 {
            for j in 0..=64 {
                let p = sm.eval(i as f64 / 64.0, j as f64 / 64.0);
                worst = worst.max(dist_to_image(&p));
            }
        }
        deltas.push(worst);
    }
    assert!(
        deltas.windows(2).all(|w| w[1] <= w[0] + 2e-3),
        "Hausdorff trend not decreasing: {deltas:?}"
    );
    assert!(
        *deltas.last().unwrap() < 0.02,
        "delta(64) = {}",
        deltas.last().unwrap()
    );
}

#[test]
fn containment_sweep_eventually_lands_inside_the_domain() {
    let (a, b) = blended_arcs();
    let h = Homotopy::straight_line(a, b).unwrap();
    let domain = Domain::Ball(Ball::new(vec![0.0, 0.0], 1.0).unwrap());
    let mut admissible = None;
    let mut k = 4u32;
    while k <= 256 {
        let sm = mollify_homotopy(&h, k).unwrap();
        if sm.check_in_domain(&domain, 64).is_ok() {
            admissible = Some(k);
            break;
        }
        k *= 2;
    }
    assert!(
        admissible.is_some(),
        "no admissible smoothing index up to 256"
    );
}

#[test]
fn boundary_rows_match_the_clamped_convolution() {
    // Gamma~_k(., 0) must equal the smoothed boundary path itself.
    let (a, b) = blended_arcs();
    let h = Homotopy::straight_line(a, b).unwrap();
    let sm = mollify_homotopy(&h, 16).unwrap();
    let row0 = sm.boundary_path(0);
    let row1 = sm.boundary_path(1);
    for i in 0..=32 {
        let s = i as f64 / 32.0;
        let via_eval0 = sm.eval(s, 0.0);
        let via_row0 = row0.point(s);
        let via_eval1 = sm.eval(s, 1.0);
        let via_row1 = row1.point(s);
        for d in 0..2 {
            assert!((via_eval0[d] - via_row0[d]).abs() <= 1e-12);
            assert!((via_eval1[d] - via_row1[d]).abs() <= 1e-12);
        }
    }
}

#[test]
fn mollifying_a_bump_lowers_its_peak() {
    let bump = make_bump(Ball::new(vec![0.0, 0.0], 0.4).unwrap());
    let domain = Domain::Ball(Ball::new(vec![0.0, 0.0], 2.0).unwrap());
    let m = mollified(&bump, domain, 16, 16).unwrap();
    let at_center = m.eval(&[0.0, 0.0]).unwrap();
    let peak = bump.value(&[0.0, 0.0]);
    assert!(at_center < peak && at_center > 0.0);
}
