//! Property tests for the operator algebra: composition identities,
//! telescoping and linearity, on random periodic fields.

use parcs::grid::{average, central_diff, forward_diff, lincomb, shift, Field};
use parcs::{BoundaryKind, Grid1D};
use proptest::prelude::*;

fn grid(n: usize) -> Grid1D {
    Grid1D::new(-3.0, 3.0, n - 1, BoundaryKind::Periodic).unwrap()
}

fn field(values: Vec<f64>) -> Field {
    let g = grid(values.len());
    Field::new(values, g).unwrap()
}

fn rel_close(a: &Field, b: &Field, tol: f64) -> bool {
    let scale = 1.0 + a.max_norm().max(b.max_norm());
    a.values().iter().zip(b.values()).all(|(x, y)| (x - y).abs() <= tol * scale)
}

fn values_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 8..40)
}

proptest! {
    #[test]
    fn d2_equals_composition(vals in values_strategy()) {
        // D_{2,dx} = D^2 S^{-1}
        let f = field(vals);
        let direct = central_diff(&f, 2, None).unwrap();
        let shifted = shift(&f, -1, None).unwrap();
        let composed = forward_diff(&forward_diff(&shifted, None).unwrap(), None).unwrap();
        prop_assert!(rel_close(&direct, &composed, 1e-13));
    }

    #[test]
    fn d1_equals_composition(vals in values_strategy()) {
        // D_{1,dx} = D S^{-1} mu
        let f = field(vals);
        let direct = central_diff(&f, 1, None).unwrap();
        let averaged = average(&f, None).unwrap();
        let shifted = shift(&averaged, -1, None).unwrap();
        let composed = forward_diff(&shifted, None).unwrap();
        prop_assert!(rel_close(&direct, &composed, 1e-13));
    }

    #[test]
    fn forward_diff_telescopes_to_zero(vals in values_strategy()) {
        let f = field(vals);
        let d = forward_diff(&f, None).unwrap();
        let sum: f64 = d.values().iter().sum();
        let scale = 1.0 + f.max_norm() / f.grid().dx;
        prop_assert!(sum.abs() <= 1e-12 * scale * f.len() as f64);
    }

    #[test]
    fn central_diff_is_linear(
        vals in values_strategy(),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let f = field(vals.clone());
        let g = field(vals.iter().rev().copied().collect());
        for order in 1..=4u32 {
            let combo = lincomb(a, &f, b, &g).unwrap();
            let lhs = central_diff(&combo, order, None).unwrap();
            let rhs = lincomb(
                a,
                &central_diff(&f, order, None).unwrap(),
                b,
                &central_diff(&g, order, None).unwrap(),
            )
            .unwrap();
            prop_assert!(rel_close(&lhs, &rhs, 1e-12));
        }
    }

    #[test]
    fn shift_roundtrip(vals in values_strategy(), k in -3isize..=3) {
        let f = field(vals);
        let back = shift(&shift(&f, k, None).unwrap(), -k, None).unwrap();
        prop_assert_eq!(back.values(), f.values());
    }
}
