//! Desk-scale discrete surrogate for the Sobolev-space statements: exact
//! grid gradient/divergence adjointness, polar membership against
//! divergence-free test fields, the zero-mean least-squares potential solve,
//! and the weak Poincare pipeline chaining them.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform lattice over a box with the h^n-weighted inner product. The
/// discrete operators are the forward-difference gradient and the
/// backward-difference divergence, a pair whose integration-by-parts
/// identity holds exactly (telescoping) for interior-supported fields.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpace {
    pub shape: Vec<usize>,
    pub h: f64,
    pub origin: Vec<f64>,
}

impl GridSpace {
    pub fn new(shape: Vec<usize>, h: f64, origin: Vec<f64>) -> Result<Self> {
        if h <= 0.0 {
            return Err(Error::NonPositiveRadius(h));
        }
        if shape.len() != origin.len() || shape.iter().any(|&s| s < 4) {
            return Err(Error::DimensionMismatch {
                expected: shape.len(),
                got: origin.len(),
            });
        }
        Ok(GridSpace { shape, h, origin })
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn node_count(&self) -> usize {
        self.shape.iter().product()
    }

    #[inline]
    pub fn flat(&self, idx: &[usize]) -> usize {
        let mut f = 0;
        for d in 0..self.shape.len() {
            f = f * self.shape[d] + idx[d];
        }
        f
    }

    pub fn node_point(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .zip(&self.origin)
            .map(|(i, o)| o + *i as f64 * self.h)
            .collect()
    }

    /// Iterates multi-indices in row-major order.
    pub fn for_each_index<F: FnMut(&[usize], usize)>(&self, mut f: F) {
        let n = self.dim();
        let mut idx = vec![0usize; n];
        let count = self.node_count();
        for flat in 0..count {
            f(&idx, flat);
            for d in (0..n).rev() {
                idx[d] += 1;
                if idx[d] < self.shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
    }

    /// Samples a function at every node.
    pub fn sample<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> Vec<f64> {
        let mut out = vec![0.0; self.node_count()];
        self.for_each_index(|idx, flat| {
            out[flat] = f(&self.node_point(idx));
        });
        out
    }

    /// h^n-weighted inner product.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let w = self.h.powi(self.dim() as i32);
        w * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.inner(a, a).sqrt()
    }

    pub fn vector_inner(&self, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        a.iter().zip(b).map(|(x, y)| self.inner(x, y)).sum()
    }

    pub fn vector_norm(&self, a: &[Vec<f64>]) -> f64 {
        self.vector_inner(a, a).sqrt()
    }

    fn stride(&self, d: usize) -> usize {
        self.shape[d + 1..].iter().product()
    }

    /// Forward-difference gradient; the top boundary row of each axis is 0.
    pub fn grad(&self, f: &[f64]) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut out = vec![vec![0.0; f.len()]; n];
        for d in 0..n {
            let stride = self.stride(d);
            self.for_each_index(|idx, flat| {
                if idx[d] + 1 < self.shape[d] {
                    out[d][flat] = (f[flat + stride] - f[flat]) / self.h;
                }
            });
        }
        out
    }

    /// Backward-difference divergence with zero ghost values below the
    /// lattice: the exact negative adjoint of `grad` for interior-supported
    /// vector fields.
    pub fn div(&self, u: &[Vec<f64>]) -> Vec<f64> {
        let n = self.dim();
        let count = self.node_count();
        let mut out = vec![0.0; count];
        for d in 0..n {
            let stride = self.stride(d);
            self.for_each_index(|idx, flat| {
                let below = if idx[d] > 0 { u[d][flat - stride] } else { 0.0 };
                out[flat] += (u[d][flat] - below) / self.h;
            });
        }
        out
    }

    /// Max over valid nodes and component pairs of |D_j u_k - D_k u_j|
    /// (forward differences).
    pub fn curl_residual(&self, u: &[Vec<f64>]) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for j in 0..n {
            for k in (j + 1)..n {
                let sj = self.stride(j);
                let sk = self.stride(k);
                self.for_each_index(|idx, flat| {
                    if idx[j] + 1 < self.shape[j] && idx[k] + 1 < self.shape[k] {
                        let djuk = (u[k][flat + sj] - u[k][flat]) / self.h;
                        let dkuj = (u[j][flat + sk] - u[j][flat]) / self.h;
                        worst = worst.max((djuk - dkuj).abs());
                    }
                });
            }
        }
        worst
    }

    /// True if the index is at least `margin` nodes from every face.
    fn is_interior(&self, idx: &[usize], margin: usize) -> bool {
        idx.iter()
            .zip(&self.shape)
            .all(|(i, s)| *i >= margin && *i + margin < *s)
    }

    /// Extracts a subgrid's values (row-major over `shape` starting at `lo`).
    pub fn extract(&self, f: &[f64], lo: &[usize], shape: &[usize]) -> Vec<f64> {
        let sub = GridSpace {
            shape: shape.to_vec(),
            h: self.h,
            origin: vec![0.0; self.dim()],
        };
        let mut out = vec![0.0; sub.node_count()];
        sub.for_each_index(|idx, flat| {
            let full: Vec<usize> = idx.iter().zip(lo).map(|(i, l)| i + l).collect();
            out[flat] = f[self.flat(&full)];
        });
        out
    }

    /// Subgrid space with the origin shifted accordingly.
    pub fn subspace(&self, lo: &[usize], shape: &[usize]) -> Result<GridSpace> {
        let origin = lo
            .iter()
            .zip(&self.origin)
            .map(|(l, o)| o + *l as f64 * self.h)
            .collect();
        GridSpace::new(shape.to_vec(), self.h, origin)
    }
}

/// Discrete divergence-free, interior-supported vector fields, built as
/// discrete curls of integer-valued stream functions. Integer arithmetic in
/// f64 is exact, and the two divergence terms are exact negatives, so the
/// discrete divergence of every member is exactly zero (asserted).
pub struct DivFreeTestSet {
    pub fields: Vec<Vec<Vec<f64>>>,
}

impl DivFreeTestSet {
    pub fn generate(space: &GridSpace, count: usize, seed: u64) -> Result<Self> {
        let n = space.dim();
        if n < 2 {
            return Err(Error::RequiresDimensionAtLeastTwo);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let margin = 3usize;
        let mut fields = Vec::with_capacity(count);
        for _ in 0..count {
            // Integer stream function, zero on the margin band.
            let mut psi = vec![0.0f64; space.node_count()];
            space.for_each_index(|idx, flat| {
                if space.is_interior(idx, margin) {
                    psi[flat] = rng.gen_range(-65536i32..=65536) as f64;
                }
            });
            // One plane pair per member keeps the cancellation pairwise.
            let d1 = rng.gen_range(0..n);
            let d2 = (d1 + 1 + rng.gen_range(0..n - 1)) % n;
            let (d1, d2) = (d1.min(d2), d1.max(d2));
            let s1 = space.stride(d1);
            let s2 = space.stride(d2);
            let mut u = vec![vec![0.0f64; space.node_count()]; n];
            space.for_each_index(|idx, flat| {
                if idx[d2] > 0 {
                    u[d1][flat] = psi[flat] - psi[flat - s2];
                }
                if idx[d1] > 0 {
                    u[d2][flat] = -(psi[flat] - psi[flat - s1]);
                }
            });
            let div = space.div(&u);
            assert!(
                div.iter().all(|v| *v == 0.0),
                "test-set member has nonzero discrete divergence"
            );
            fields.push(u);
        }
        Ok(DivFreeTestSet { fields })
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

/// Max normalized adjointness defect over random trials:
/// |<div u, f> + <u, grad f>| / (|u| |f|), with u interior-supported.
pub fn adjointness_check(space: &GridSpace, trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = space.dim();
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let mut u = vec![vec![0.0f64; space.node_count()]; n];
        for comp in u.iter_mut() {
            space.for_each_index(|idx, flat| {
                if space.is_interior(idx, 2) {
                    comp[flat] = rng.gen_range(-1.0..1.0);
                }
            });
        }
        let f: Vec<f64> = (0..space.node_count())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let lhs = space.inner(&space.div(&u), &f);
        let rhs = space.vector_inner(&u, &space.grad(&f));
        let denom = space.vector_norm(&u) * space.norm(&f);
        if denom > 0.0 {
            worst = worst.max((lhs + rhs).abs() / denom);
        }
    }
    worst
}

/// Polar membership: true iff the max normalized pairing against the test
/// set is within tolerance.
pub fn polar_membership(
    space: &GridSpace,
    g: &[Vec<f64>],
    tests: &DivFreeTestSet,
    tol: f64,
) -> (bool, f64) {
    let mut worst = 0.0f64;
    for phi in &tests.fields {
        let pairing = space.vector_inner(g, phi).abs();
        let norm = space.vector_norm(phi);
        if norm > 0.0 {
            worst = worst.max(pairing / norm);
        }
    }
    (worst <= tol, worst)
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub cg_tolerance: f64,
    /// Multiplied by the node count.
    pub max_iter_factor: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            cg_tolerance: 1e-12,
            max_iter_factor: 10,
        }
    }
}

/// Least-squares potential: solves grad f = g in the normal-equation sense
/// (conjugate gradient on a discrete Neumann problem), then removes the
/// mean. Returns (f, relative residual |grad f - g|/|g|).
pub fn solve_potential_l2(
    space: &GridSpace,
    g: &[Vec<f64>],
    cfg: &SolveConfig,
) -> Result<(Vec<f64>, f64)> {
    let count = space.node_count();
    let n = space.dim();
    let g_norm = space.vector_norm(g);
    if g_norm == 0.0 {
        return Ok((vec![0.0; count], 0.0));
    }
    // Right-hand side of the normal equations: the true transpose of the
    // forward-difference gradient. Its range has zero top-boundary rows, so
    // data there is invisible to the operator; -div of the masked copy is
    // exactly (grad)^T g, while -div of g itself would not be.
    let mut masked = g.to_vec();
    for d in 0..n {
        space.for_each_index(|idx, flat| {
            if idx[d] + 1 == space.shape[d] {
                masked[d][flat] = 0.0;
            }
        });
    }
    let mut b: Vec<f64> = space.div(&masked).iter().map(|v| -v).collect();
    remove_mean(&mut b);
    let apply = |f: &[f64]| -> Vec<f64> {
        let mut out = space.div(&space.grad(f));
        for v in &mut out {
            *v = -*v;
        }
        out
    };
    let mut x = vec![0.0; count];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rs_old: f64 = r.iter().map(|v| v * v).sum();
    let b_norm = rs_old.sqrt();
    let max_iter = cfg.max_iter_factor * count;
    let mut converged = rs_old.sqrt() <= cfg.cg_tolerance * b_norm;
    let mut iterations = 0;
    while !converged && iterations < max_iter {
        iterations += 1;
        let ap = apply(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap.abs() < 1e-30 {
            break;
        }
        let alpha = rs_old / pap;
        for i in 0..count {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new: f64 = r.iter().map(|v| v * v).sum();
        if rs_new.sqrt() <= cfg.cg_tolerance * b_norm {
            converged = true;
            break;
        }
        let beta = rs_new / rs_old;
        for i in 0..count {
            p[i] = r[i] + beta * p[i];
        }
        rs_old = rs_new;
    }
    if !converged {
        return Err(Error::CgDidNotConverge {
            iterations,
            residual: rs_old.sqrt() / b_norm,
        });
    }
    remove_mean(&mut x);
    // Least-squares residual of the original first-order system.
    let gx = space.grad(&x);
    let mut resid2 = 0.0;
    for d in 0..space.dim() {
        let diff: Vec<f64> = gx[d].iter().zip(&g[d]).map(|(a, b)| a - b).collect();
        resid2 += space.inner(&diff, &diff);
    }
    Ok((x, resid2.sqrt() / g_norm))
}

fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

/// Outcome of the weak Poincare pipeline: stage-by-stage residuals in the
/// paper's implication order (curl-free, then polar, then potential).
#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub stages: Vec<StageReport>,
    pub potential: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct StageReport {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl PipelineReport {
    pub fn passed(&self) -> bool {
        self.stages.iter().all(|s| s.passed)
    }

    pub fn first_failure(&self) -> Option<&StageReport> {
        self.stages.iter().find(|s| !s.passed)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub curl_tolerance: f64,
    pub polar_tolerance: f64,
    pub residual_tolerance: f64,
    pub solve: SolveConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            curl_tolerance: 1e-8,
            polar_tolerance: 1e-8,
            residual_tolerance: 1e-8,
            solve: SolveConfig::default(),
        }
    }
}

/// Discrete curl check, polar membership, then the least-squares solve;
/// success requires every stage within its tolerance.
pub fn weak_poincare_pipeline(
    space: &GridSpace,
    g: &[Vec<f64>],
    tests: &DivFreeTestSet,
    cfg: &PipelineConfig,
) -> Result<PipelineReport> {
    let scale = space.vector_norm(g).max(1e-300);
    let mut stages = Vec::new();

    let curl = space.curl_residual(g);
    let curl_pass = curl <= cfg.curl_tolerance * scale;
    stages.push(StageReport {
        name: "curl",
        residual: curl,
        tolerance: cfg.curl_tolerance * scale,
        passed: curl_pass,
    });
    if !curl_pass {
        return Ok(PipelineReport {
            stages,
            potential: None,
        });
    }

    let (polar_ok, pairing) = polar_membership(space, g, tests, cfg.polar_tolerance * scale);
    stages.push(StageReport {
        name: "polar",
        residual: pairing,
        tolerance: cfg.polar_tolerance * scale,
        passed: polar_ok,
    });
    if !polar_ok {
        return Ok(PipelineReport {
            stages,
            potential: None,
        });
    }

    let (f, residual) = solve_potential_l2(space, g, &cfg.solve)?;
    let solve_pass = residual <= cfg.residual_tolerance;
    stages.push(StageReport {
        name: "solve",
        residual,
        tolerance: cfg.residual_tolerance,
        passed: solve_pass,
    });
    Ok(PipelineReport {
        stages,
        potential: solve_pass.then_some(f),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space32() -> GridSpace {
        GridSpace::new(vec![32, 32], 1.0 / 31.0, vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn adjointness_is_exact_to_roundoff() {
        let s = space32();
        let worst = adjointness_check(&s, 20, 5);
        assert!(worst <= 1e-13, "adjointness defect {worst:.3e}");
    }

    #[test]
    fn test_set_members_have_exactly_zero_divergence() {
        let s = space32();
        let set = DivFreeTestSet::generate(&s, 10, 9).unwrap();
        for u in &set.fields {
            let div = s.div(u);
            assert!(div.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn discrete_gradients_are_polar_members() {
        let s = space32();
        let set = DivFreeTestSet::generate(&s, 20, 2).unwrap();
        let f = s.sample(|x| (3.0 * x[0]).sin() * (2.0 * x[1]).cos());
        let g = s.grad(&f);
        let scale = s.vector_norm(&g);
        let (member, worst) = polar_membership(&s, &g, &set, 1e-12 * scale);
        assert!(member, "pairing {worst:.3e}");
    }

    #[test]
    fn rotational_samples_are_not_polar_members() {
        let s = space32();
        let set = DivFreeTestSet::generate(&s, 20, 2).unwrap();
        let u = vec![s.sample(|x| -x[1]), s.sample(|x| x[0])];
        let (member, worst) = polar_membership(&s, &u, &set, 1e-10);
        assert!(!member);
        assert!(worst > 1e-4, "rotational pairing too small: {worst:.3e}");
    }

    #[test]
    fn zero_field_solves_to_zero() {
        let s = space32();
        let g = vec![vec![0.0; s.node_count()]; 2];
        let (f, r) = solve_potential_l2(&s, &g, &SolveConfig::default()).unwrap();
        assert!(f.iter().all(|v| *v == 0.0));
        assert_eq!(r, 0.0);
    }

    #[test]
    fn discrete_gradient_is_recovered_to_solver_tolerance() {
        let s = space32();
        let f0 = s.sample(|x| (2.0 * x[0]).cos() + x[1] * x[1] - x[0] * x[1]);
        let g = s.grad(&f0);
        let (f, r) = solve_potential_l2(&s, &g, &SolveConfig::default()).unwrap();
        assert!(r <= 1e-10, "relative residual {r:.3e}");
        // f equals f0 - mean(f0).
        let mut f0c = f0.clone();
        remove_mean(&mut f0c);
        let diff: Vec<f64> = f.iter().zip(&f0c).map(|(a, b)| a - b).collect();
        let rel = s.norm(&diff) / s.norm(&f0c);
        assert!(rel <= 1e-8, "recovery error {rel:.3e}");
    }

    #[test]
    fn solver_output_has_negligible_mean() {
        let s = space32();
        let f0 = s.sample(|x| x[0].exp() + x[1]);
        let g = s.grad(&f0);
        let (f, _) = solve_potential_l2(&s, &g, &SolveConfig::default()).unwrap();
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        assert!(mean.abs() <= 1e-13 * s.norm(&f).max(1e-300));
    }

    #[test]
    fn exhausted_iteration_budget_is_an_error() {
        let s = space32();
        let f0 = s.sample(|x| (3.0 * x[0]).sin() + x[1]);
        let g = s.grad(&f0);
        let cfg = SolveConfig {
            cg_tolerance: 1e-16,
            max_iter_factor: 0,
        };
        match solve_potential_l2(&s, &g, &cfg) {
            Err(crate::error::Error::CgDidNotConverge { .. }) => {}
            other => panic!("expected CG failure, got {other:?}"),
        }
    }

    #[test]
    fn pipeline_rejects_rotational_field_at_curl_stage() {
        let s = space32();
        let set = DivFreeTestSet::generate(&s, 10, 4).unwrap();
        let u = vec![s.sample(|x| -x[1]), s.sample(|x| x[0])];
        let report = weak_poincare_pipeline(&s, &u, &set, &PipelineConfig::default()).unwrap();
        assert!(!report.passed());
        let first = report.first_failure().unwrap();
        assert_eq!(first.name, "curl");
        assert!((first.residual - 2.0).abs() < 1e-10);
    }

    #[test]
    fn pipeline_accepts_gradient_and_zero_fields() {
        let s = space32();
        let set = DivFreeTestSet::generate(&s, 10, 4).unwrap();
        let f0 = s.sample(|x| x[0] * x[0] - 0.5 * x[1]);
        let g = s.grad(&f0);
        let report = weak_poincare_pipeline(&s, &g, &set, &PipelineConfig::default()).unwrap();
        assert!(report.passed());
        assert!(report.potential.is_some());

        let zero = vec![vec![0.0; s.node_count()]; 2];
        let report = weak_poincare_pipeline(&s, &zero, &set, &PipelineConfig::default()).unwrap();
        assert!(report.passed());
        assert!(report.potential.unwrap().iter().all(|v| *v == 0.0));
    }
}
