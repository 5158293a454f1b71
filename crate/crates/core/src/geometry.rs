//! Projections and distances: linearization half-spaces, simple sets,
//! quadratic sublevel sets, and Dykstra's algorithm for intersections.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{check_point, DenseVector, SimpleSet};

/// `{y : ⟨ζ, y⟩ ≤ c}`, or the whole space when `degenerate`.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfSpace {
    normal: DenseVector,
    offset: f64,
    degenerate: bool,
}

impl HalfSpace {
    /// Non-degenerate half-space; the normal must be nonzero.
    pub fn new(normal: DenseVector, offset: f64) -> Result<Self> {
        if normal.norm_squared() == 0.0 {
            return Err(Error::Argument("half-space normal must be nonzero".into()));
        }
        if !offset.is_finite() || normal.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("half-space data must be finite".into()));
        }
        Ok(HalfSpace {
            normal,
            offset,
            degenerate: false,
        })
    }

    /// The whole space ℝᵈ, stored as a degenerate half-space.
    pub fn whole_space(d: usize) -> Self {
        HalfSpace {
            normal: DVector::zeros(d),
            offset: 0.0,
            degenerate: true,
        }
    }

    pub fn normal(&self) -> &DenseVector {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn dimension(&self) -> usize {
        self.normal.len()
    }

    /// `⟨ζ, x⟩ − c`, or `-∞` for the whole space.
    pub fn signed_violation(&self, x: &DenseVector) -> f64 {
        if self.degenerate {
            f64::NEG_INFINITY
        } else {
            self.normal.dot(x) - self.offset
        }
    }

    pub fn contains(&self, x: &DenseVector, tol: f64) -> bool {
        self.signed_violation(x) <= tol
    }

    /// Closed-form projection, no input checks.
    pub(crate) fn project_point(&self, u: &DenseVector) -> DenseVector {
        if self.degenerate {
            return u.clone();
        }
        let excess = self.normal.dot(u) - self.offset;
        if excess <= 0.0 {
            return u.clone();
        }
        let mut y = u.clone();
        y.axpy(-excess / self.normal.norm_squared(), &self.normal, 1.0);
        y
    }
}

/// Result of a projection.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionReport {
    pub point: DenseVector,
    /// `‖input − point‖`.
    pub distance: f64,
    /// 1 for closed-form projections, root-find steps or sweeps otherwise.
    pub iterations: usize,
    /// 0 for closed forms; `|g(λ)|` for quadratic sets; final max violation
    /// for Dykstra.
    pub kkt_residual: f64,
}

impl ProjectionReport {
    fn closed_form(input: &DenseVector, point: DenseVector) -> Self {
        let distance = (input - &point).norm();
        ProjectionReport {
            point,
            distance,
            iterations: 1,
            kkt_residual: 0.0,
        }
    }
}

/// Linearization cut of a constraint at `x`:
/// `H = {y : φ(x) + ⟨ξ, y − x⟩ ≤ 0}`, or the whole space when `ξ = 0`.
pub fn build_halfspace(phi_value: f64, x: &DenseVector, xi: &DenseVector) -> Result<HalfSpace> {
    if x.len() != xi.len() {
        return Err(Error::Argument(format!(
            "point has dimension {} but subgradient has {}",
            x.len(),
            xi.len()
        )));
    }
    if xi.iter().all(|v| *v == 0.0) {
        return Ok(HalfSpace::whole_space(x.len()));
    }
    HalfSpace::new(xi.clone(), xi.dot(x) - phi_value)
}

/// `u − ((⟨ζ,u⟩ − c)₊ / ‖ζ‖²) ζ`.
pub fn project_halfspace(h: &HalfSpace, u: &DenseVector) -> Result<ProjectionReport> {
    check_point(u, h.dimension())?;
    if !h.degenerate && h.normal.norm_squared() == 0.0 {
        return Err(Error::Internal("non-degenerate half-space with zero normal".into()));
    }
    Ok(ProjectionReport::closed_form(u, h.project_point(u)))
}

/// Exact projection onto `C₀`.
pub fn project_simple_set(s: &SimpleSet, u: &DenseVector) -> Result<ProjectionReport> {
    if let Some(d) = s.dimension() {
        check_point(u, d)?;
    } else {
        check_point(u, u.len())?;
    }
    Ok(ProjectionReport::closed_form(u, s.project(u)))
}

/// `{x : xᵀMx + bᵀx ≤ w}` with `M` symmetric PSD, with the eigenbasis of `M`
/// precomputed so each projection costs O(d²) plus a scalar root-find.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticSet {
    matrix: DMatrix<f64>,
    linear: DVector<f64>,
    offset: f64,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

/// `|g(λ)|` target of the multiplier root-find.
pub const QUADRATIC_KKT_TOL: f64 = 1e-10;
const LAMBDA_CAP: f64 = (1u64 << 60) as f64;

impl QuadraticSet {
    pub fn new(matrix: DMatrix<f64>, linear: DVector<f64>, offset: f64) -> Result<Self> {
        let d = matrix.nrows();
        if matrix.ncols() != d || linear.len() != d {
            return Err(Error::Argument("quadratic set needs a square M matching b".into()));
        }
        let asym = (&matrix - matrix.transpose()).amax();
        let scale = matrix.amax().max(1.0);
        if asym > 1e-10 * scale {
            return Err(Error::Argument("quadratic set matrix is not symmetric".into()));
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let eps = 1e-12 * scale;
        if (&sym + DMatrix::identity(d, d) * eps).cholesky().is_none() {
            return Err(Error::Argument("quadratic set matrix is not positive semidefinite".into()));
        }
        let eig = sym.clone().symmetric_eigen();
        let eigenvalues = eig.eigenvalues.map(|v| v.max(0.0));
        Ok(QuadraticSet {
            matrix: sym,
            linear,
            offset,
            eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn dimension(&self) -> usize {
        self.linear.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.linear
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// `xᵀMx + bᵀx − w`.
    pub fn constraint_value(&self, x: &DenseVector) -> f64 {
        x.dot(&(&self.matrix * x)) + self.linear.dot(x) - self.offset
    }

    /// Projection, no input checks.
    pub(crate) fn project_point(&self, u: &DenseVector) -> Result<ProjectionReport> {
        if self.constraint_value(u) <= 0.0 {
            return Ok(ProjectionReport {
                point: u.clone(),
                distance: 0.0,
                iterations: 1,
                kkt_residual: 0.0,
            });
        }
        // Work in the eigenbasis: x̃(λ)ᵢ = (ũᵢ − λb̃ᵢ) / (1 + 2λμᵢ).
        let ut = self.eigenvectors.tr_mul(u);
        let bt = self.eigenvectors.tr_mul(&self.linear);
        let mu = &self.eigenvalues;
        let w = self.offset;
        let d = ut.len();
        let g_and_slope = |lambda: f64| -> (f64, f64, DVector<f64>) {
            let mut xt = DVector::zeros(d);
            let mut g = -w;
            let mut slope = 0.0;
            for i in 0..d {
                let den = 1.0 + 2.0 * lambda * mu[i];
                let xi = (ut[i] - lambda * bt[i]) / den;
                xt[i] = xi;
                g += mu[i] * xi * xi + bt[i] * xi;
                let t = 2.0 * mu[i] * xi + bt[i];
                slope -= t * t / den;
            }
            (g, slope, xt)
        };

        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut steps = 0usize;
        loop {
            let (g, _, _) = g_and_slope(hi);
            steps += 1;
            if g <= 0.0 {
                break;
            }
            lo = hi;
            hi *= 2.0;
            if hi > LAMBDA_CAP {
                return Err(Error::InfeasibleSet(format!(
                    "g(λ) > 0 up to λ = 2^60 (g = {g:.3e})"
                )));
            }
        }

        let mut lambda = 0.5 * (lo + hi);
        let mut best = g_and_slope(hi);
        for _ in 0..500 {
            let (g, slope, xt) = g_and_slope(lambda);
            steps += 1;
            if g.abs() < best.0.abs() || (g.abs() == best.0.abs() && g <= 0.0) {
                best = (g, slope, xt);
            }
            if g.abs() <= QUADRATIC_KKT_TOL {
                break;
            }
            if g > 0.0 {
                lo = lambda;
            } else {
                hi = lambda;
            }
            if hi - lo <= f64::EPSILON * hi.max(1.0) {
                break;
            }
            // Newton step, falling back to bisection when it leaves the bracket.
            let newton = if slope < 0.0 { lambda - g / slope } else { f64::NAN };
            lambda = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        let (g, _, xt) = best;
        let point = &self.eigenvectors * xt;
        let distance = (u - &point).norm();
        Ok(ProjectionReport {
            point,
            distance,
            iterations: steps,
            kkt_residual: g.abs(),
        })
    }

    /// Exact projection of `u`.
    pub fn project(&self, u: &DenseVector) -> Result<ProjectionReport> {
        check_point(u, self.dimension())?;
        self.project_point(u)
    }
}

/// Projection onto `{x : xᵀMx + bᵀx ≤ w}` for a one-off set. Build a
/// [`QuadraticSet`] once when projecting repeatedly.
pub fn project_quadratic_set(
    m: &DMatrix<f64>,
    b: &DenseVector,
    w: f64,
    u: &DenseVector,
) -> Result<ProjectionReport> {
    QuadraticSet::new(m.clone(), b.clone(), w)?.project(u)
}

/// A convex set with an exact projection.
#[derive(Clone, Debug, PartialEq)]
pub enum ProjectableSet {
    HalfSpace(HalfSpace),
    Quadratic(QuadraticSet),
    Simple(SimpleSet),
}

impl ProjectableSet {
    pub fn project(&self, u: &DenseVector) -> Result<DenseVector> {
        match self {
            ProjectableSet::HalfSpace(h) => Ok(h.project_point(u)),
            ProjectableSet::Quadratic(q) => Ok(q.project_point(u)?.point),
            ProjectableSet::Simple(s) => Ok(s.project(u)),
        }
    }

    /// Nonnegative violation: positive part of the constraint value for
    /// functional sets, distance for simple sets.
    pub fn violation(&self, x: &DenseVector) -> f64 {
        match self {
            ProjectableSet::HalfSpace(h) => h.signed_violation(x).max(0.0),
            ProjectableSet::Quadratic(q) => q.constraint_value(x).max(0.0),
            ProjectableSet::Simple(s) => (x - s.project(x)).norm(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DykstraOptions {
    pub max_sweeps: usize,
    pub tol: f64,
}

impl Default for DykstraOptions {
    fn default() -> Self {
        DykstraOptions {
            max_sweeps: 100_000,
            tol: 1e-10,
        }
    }
}

/// Correction vectors carried between Dykstra calls on the same list of sets.
///
/// Dykstra is block coordinate ascent on the dual of the projection problem,
/// so corrections from a previous solve are a valid starting dual point for a
/// nearby input.
#[derive(Clone, Debug, Default)]
pub struct DykstraWarmStart {
    corrections: Vec<DenseVector>,
}

impl DykstraWarmStart {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.corrections.clear();
    }
}

/// Projection onto the intersection of `sets` by Dykstra's algorithm.
///
/// Stops once a full sweep moves both the iterate and the correction vectors
/// by at most `opts.tol`. `kkt_residual` is the final max violation over the
/// sets. Running out of sweeps with violation above `100·tol` is an error
/// carrying the partial result.
pub fn dykstra_project(
    sets: &[ProjectableSet],
    u: &DenseVector,
    opts: DykstraOptions,
    warm: Option<&mut DykstraWarmStart>,
) -> Result<ProjectionReport> {
    check_point(u, u.len())?;
    let d = u.len();
    let mut local = DykstraWarmStart::new();
    let warm = warm.unwrap_or(&mut local);
    if warm.corrections.len() != sets.len() || warm.corrections.iter().any(|p| p.len() != d) {
        warm.corrections = vec![DVector::zeros(d); sets.len()];
    }
    let corrections = &mut warm.corrections;

    // x = u − Σ pⱼ is maintained throughout.
    let mut x = u.clone();
    for p in corrections.iter() {
        x -= p;
    }

    let mut sweeps = 0;
    let mut y = DVector::zeros(d);
    loop {
        sweeps += 1;
        let x_start = x.clone();
        let mut correction_change = 0.0;
        for (set, p) in sets.iter().zip(corrections.iter_mut()) {
            y.copy_from(&x);
            y += &*p;
            let projected = set.project(&y)?;
            let new_p = &y - &projected;
            correction_change += (&new_p - &*p).norm_squared();
            *p = new_p;
            x = projected;
        }
        let displacement = (&x - &x_start).norm().max(correction_change.sqrt());
        if displacement <= opts.tol || sweeps >= opts.max_sweeps {
            let violation = sets.iter().map(|s| s.violation(&x)).fold(0.0, f64::max);
            let report = ProjectionReport {
                distance: (u - &x).norm(),
                point: x,
                iterations: sweeps,
                kkt_residual: violation,
            };
            if displacement > opts.tol && violation > 100.0 * opts.tol {
                return Err(Error::NonConvergence {
                    sweeps,
                    violation,
                    partial: Box::new(report),
                });
            }
            return Ok(report);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_subgradient_gives_whole_space() {
        let h = build_halfspace(3.0, &dvector![1.0, 2.0], &dvector![0.0, 0.0]).unwrap();
        assert!(h.is_degenerate());
        let u = dvector![5.0, -7.0];
        assert_eq!(project_halfspace(&h, &u).unwrap().point, u);
    }

    #[test]
    fn linearization_of_circle_constraint() {
        // φ(x) = x₁² − 1 at (2, 0), ξ = (4, 0): H = {4y₁ ≤ 5}.
        let h = build_halfspace(3.0, &dvector![2.0, 0.0], &dvector![4.0, 0.0]).unwrap();
        assert_eq!(h.normal(), &dvector![4.0, 0.0]);
        assert_eq!(h.offset(), 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let y = dvector![rng.random_range(-1.0..=1.0), rng.random_range(-50.0..50.0)];
            assert!(h.contains(&y, 1e-9));
        }
    }

    #[test]
    fn linearization_of_affine_is_itself() {
        let q = dvector![1.0, -2.0, 0.5];
        let w = 0.3;
        let x = dvector![4.0, 1.0, -1.0];
        let phi = q.dot(&x) - w;
        let h = build_halfspace(phi, &x, &q).unwrap();
        assert_eq!(h.normal(), &q);
        assert!((h.offset() - w).abs() < 1e-15);
    }

    #[test]
    fn halfspace_examples() {
        let h = HalfSpace::new(dvector![1.0, 0.0], 0.0).unwrap();
        let r = project_halfspace(&h, &dvector![-1.0, 5.0]).unwrap();
        assert_eq!((r.point, r.distance), (dvector![-1.0, 5.0], 0.0));
        let r = project_halfspace(&h, &dvector![3.0, 2.0]).unwrap();
        assert_eq!((r.point, r.distance), (dvector![0.0, 2.0], 3.0));

        let h = HalfSpace::new(dvector![1.0, 1.0], 1.0).unwrap();
        let r = project_halfspace(&h, &dvector![2.0, 2.0]).unwrap();
        assert!((r.point - dvector![0.5, 0.5]).amax() < 1e-15);
        assert!((r.distance - 3.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_normal_rejected() {
        assert!(HalfSpace::new(dvector![0.0, 0.0], 1.0).is_err());
        let h = HalfSpace::new(dvector![1.0], 0.0).unwrap();
        assert!(project_halfspace(&h, &dvector![1.0, 2.0]).is_err());
    }

    #[test]
    fn simple_set_examples() {
        let b = SimpleSet::symmetric_box(2, 10.0).unwrap();
        assert_eq!(project_simple_set(&b, &dvector![3.0, -4.0]).unwrap().point, dvector![3.0, -4.0]);
        assert_eq!(project_simple_set(&b, &dvector![12.0, -11.0]).unwrap().point, dvector![10.0, -10.0]);
        let ball = SimpleSet::ball(dvector![0.0, 0.0], 1.0).unwrap();
        let r = project_simple_set(&ball, &dvector![3.0, 4.0]).unwrap();
        assert!((r.point - dvector![0.6, 0.8]).amax() < 1e-15);
        assert!((r.distance - 4.0).abs() < 1e-15);
        let whole = SimpleSet::WholeSpace;
        assert_eq!(project_simple_set(&whole, &dvector![1e5]).unwrap().point, dvector![1e5]);
    }

    #[test]
    fn quadratic_examples() {
        let m = DMatrix::identity(2, 2);
        let b = DVector::zeros(2);
        let u = dvector![0.2, -0.3];
        let r = project_quadratic_set(&m, &b, 1.0, &u).unwrap();
        assert_eq!((r.point, r.distance), (u, 0.0));

        let r = project_quadratic_set(&m, &b, 1.0, &dvector![2.0, 0.0]).unwrap();
        assert!((r.point - dvector![1.0, 0.0]).amax() < 1e-10);
        assert!(r.kkt_residual <= QUADRATIC_KKT_TOL);
    }

    #[test]
    fn quadratic_rejects_bad_inputs() {
        let not_psd = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            project_quadratic_set(&not_psd, &DVector::zeros(2), 1.0, &dvector![3.0, 0.0]),
            Err(Error::Argument(_))
        ));
        // xᵀx ≤ −1 is empty.
        assert!(matches!(
            project_quadratic_set(&DMatrix::identity(2, 2), &DVector::zeros(2), -1.0, &dvector![3.0, 0.0]),
            Err(Error::InfeasibleSet(_))
        ));
    }

    #[test]
    fn quadratic_with_singular_matrix() {
        // x₁² + x₂ ≤ 0: unbounded paraboloid region.
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let b = dvector![0.0, 1.0];
        let set = QuadraticSet::new(m, b, 0.0).unwrap();
        let r = set.project(&dvector![1.0, 1.0]).unwrap();
        assert!(set.constraint_value(&r.point).abs() <= 1e-9);
        // KKT: u − x is a nonnegative multiple of (2x₁, 1).
        let diff = dvector![1.0, 1.0] - &r.point;
        let lambda = diff[1];
        assert!(lambda > 0.0);
        assert!((diff[0] - lambda * 2.0 * r.point[0]).abs() < 1e-8);
    }

    #[test]
    fn dykstra_examples() {
        let h = HalfSpace::new(dvector![1.0, 2.0], 0.5).unwrap();
        let u = dvector![3.0, 1.0];
        let r = dykstra_project(&[ProjectableSet::HalfSpace(h.clone())], &u, DykstraOptions::default(), None).unwrap();
        assert_eq!(r.point, project_halfspace(&h, &u).unwrap().point);

        let quadrant = [
            ProjectableSet::HalfSpace(HalfSpace::new(dvector![1.0, 0.0], 0.0).unwrap()),
            ProjectableSet::HalfSpace(HalfSpace::new(dvector![0.0, 1.0], 0.0).unwrap()),
        ];
        let r = dykstra_project(&quadrant, &dvector![1.0, 1.0], DykstraOptions::default(), None).unwrap();
        assert!(r.point.amax() < 1e-12);

        let inside = dvector![-1.0, -2.0];
        let r = dykstra_project(&quadrant, &inside, DykstraOptions::default(), None).unwrap();
        assert_eq!(r.point, inside);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn dykstra_non_convergence_carries_partial() {
        // Two nearly parallel half-spaces meeting at a sharp angle converge slowly.
        let sets = [
            ProjectableSet::HalfSpace(HalfSpace::new(dvector![1.0, 1e-4], 0.0).unwrap()),
            ProjectableSet::HalfSpace(HalfSpace::new(dvector![-1.0, 1e-4], 0.0).unwrap()),
        ];
        let opts = DykstraOptions { max_sweeps: 3, tol: 1e-14 };
        match dykstra_project(&sets, &dvector![0.0, 10.0], opts, None) {
            Err(Error::NonConvergence { sweeps, partial, .. }) => {
                assert_eq!(sweeps, 3);
                assert_eq!(partial.iterations, 3);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn dykstra_warm_start_reaches_same_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sets: Vec<_> = (0..8)
            .map(|_| {
                let q = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
                ProjectableSet::HalfSpace(HalfSpace::new(q, rng.random_range(0.0..0.5)).unwrap())
            })
            .collect();
        let opts = DykstraOptions { max_sweeps: 100_000, tol: 1e-13 };
        let mut warm = DykstraWarmStart::new();
        let u1 = dvector![2.0, 2.0, 2.0];
        let u2 = dvector![2.01, 1.99, 2.0];
        dykstra_project(&sets, &u1, opts, Some(&mut warm)).unwrap();
        let warm_r = dykstra_project(&sets, &u2, opts, Some(&mut warm)).unwrap();
        let cold_r = dykstra_project(&sets, &u2, opts, None).unwrap();
        assert!((warm_r.point - cold_r.point).amax() < 1e-10);
    }

    fn random_halfspace(rng: &mut ChaCha8Rng, d: usize) -> HalfSpace {
        let q = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        HalfSpace::new(q, rng.random_range(-0.5..0.5)).unwrap()
    }

    fn random_quadratic(rng: &mut ChaCha8Rng, d: usize) -> QuadraticSet {
        let b = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        QuadraticSet::new(
            b.transpose() * &b,
            DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)),
            rng.random_range(0.1..1.0),
        )
        .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn halfspace_nonexpansive_and_firm(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_halfspace(&mut rng, 4);
            let u = DVector::from_fn(4, |_, _| rng.random_range(-5.0..5.0));
            let v = DVector::from_fn(4, |_, _| rng.random_range(-5.0..5.0));
            let pu = project_halfspace(&h, &u).unwrap();
            let pv = project_halfspace(&h, &v).unwrap();
            prop_assert!((&pu.point - &pv.point).norm() <= (&u - &v).norm() + 1e-12);
            prop_assert!(h.contains(&pu.point, 1e-9));
            prop_assert_eq!(pu.distance, (&u - &pu.point).norm());
            // any feasible y: use the projection of v
            let y = pv.point.clone();
            let lhs = (&pu.point - &y).norm_squared();
            let rhs = (&u - &y).norm_squared() - (&u - &pu.point).norm_squared();
            prop_assert!(lhs <= rhs + 1e-9);
            let again = project_halfspace(&h, &pu.point).unwrap();
            prop_assert!((&again.point - &pu.point).amax() <= 1e-12);
        }

        #[test]
        fn simple_sets_nonexpansive_and_idempotent(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sets = [
                SimpleSet::symmetric_box(3, 1.5).unwrap(),
                SimpleSet::ball(dvector![0.5, -0.2, 0.1], 1.3).unwrap(),
            ];
            for s in &sets {
                let u = DVector::from_fn(3, |_, _| rng.random_range(-5.0..5.0));
                let v = DVector::from_fn(3, |_, _| rng.random_range(-5.0..5.0));
                let pu = project_simple_set(s, &u).unwrap();
                let pv = project_simple_set(s, &v).unwrap();
                prop_assert!((&pu.point - &pv.point).norm() <= (&u - &v).norm() + 1e-12);
                prop_assert!(s.contains(&pu.point, 1e-9));
                let again = project_simple_set(s, &pu.point).unwrap();
                prop_assert!((&again.point - &pu.point).amax() <= 1e-12);
                let lhs = (&pu.point - &pv.point).norm_squared();
                let rhs = (&u - &pv.point).norm_squared() - (&u - &pu.point).norm_squared();
                prop_assert!(lhs <= rhs + 1e-9);
            }
        }

        #[test]
        fn quadratic_projection_properties(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let set = random_quadratic(&mut rng, 3);
            let u = DVector::from_fn(3, |_, _| rng.random_range(-4.0..4.0));
            let v = DVector::from_fn(3, |_, _| rng.random_range(-4.0..4.0));
            let pu = set.project(&u).unwrap();
            let pv = set.project(&v).unwrap();
            prop_assert!(set.constraint_value(&pu.point) <= 1e-9);
            prop_assert!((&pu.point - &pv.point).norm() <= (&u - &v).norm() + 1e-9);
            let again = set.project(&pu.point).unwrap();
            prop_assert!((&again.point - &pu.point).amax() <= 1e-9);
            let lhs = (&pu.point - &pv.point).norm_squared();
            let rhs = (&u - &pv.point).norm_squared() - (&u - &pu.point).norm_squared();
            prop_assert!(lhs <= rhs + 1e-9);
        }
    }
}
