use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use vr3pm::geometry::{project_halfspace, project_quadratic_set, HalfSpace};

fn vector(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, d)
}

proptest! {
    #[test]
    fn halfspace_projection_is_firmly_nonexpansive(
        a in vector(3), c in -2.0..2.0f64, u in vector(3), w in vector(3)
    ) {
        let a = DVector::from_vec(a);
        prop_assume!(a.norm() > 1e-3);
        let h = HalfSpace::new(a, c).unwrap();
        let (u, w) = (DVector::from_vec(u), DVector::from_vec(w));
        let pu = project_halfspace(&h, &u).unwrap().point;
        let pw = project_halfspace(&h, &w).unwrap().point;
        let lhs = (&pu - &pw).norm_squared();
        let rhs = (&u - &w).dot(&(&pu - &pw));
        prop_assert!(lhs <= rhs + 1e-10);
        prop_assert!(h.contains(&pu, 1e-10));
    }

    #[test]
    fn quadratic_projection_satisfies_the_obtuse_angle_test(
        b in vector(4), lin in vector(2), u in vector(2), y in vector(2), radius in 0.1..2.0f64
    ) {
        let b = DMatrix::from_vec(2, 2, b);
        let m = b.transpose() * &b;
        let lin = DVector::from_vec(lin) * 0.2;
        let u = DVector::from_vec(u);
        let p = project_quadratic_set(&m, &lin, radius, &u).unwrap().point;
        let phi = |x: &DVector<f64>| x.dot(&(&m * x)) + lin.dot(x) - radius;
        prop_assert!(phi(&p) <= 1e-9);
        // Any feasible y makes an obtuse angle with u - p at p.
        let y = DVector::from_vec(y) * 0.1;
        if phi(&y) <= 0.0 {
            prop_assert!((&u - &p).dot(&(&y - &p)) <= 1e-7 * (1.0 + u.norm()));
        }
    }
}
