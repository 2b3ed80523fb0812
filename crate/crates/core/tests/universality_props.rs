use ian::universality::{
    build_box_indicator, build_step_sum, build_uniform_approximator, grid_max_error, raw_output, BoxSpec, StepSum,
};
use proptest::prelude::*;

fn unit_box(dim: usize) -> impl Strategy<Value = BoxSpec> {
    prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), dim).prop_filter_map("degenerate box", |sides| {
        let lows: Vec<f64> = sides.iter().map(|(a, b)| a.min(*b)).collect();
        let highs: Vec<f64> = sides.iter().map(|(a, b)| a.max(*b)).collect();
        BoxSpec::new(lows, highs).ok()
    })
}

/// Points in the unit square, with coordinates sometimes snapped onto the box faces.
fn probe(b: &BoxSpec, picks: &[(u8, f64)]) -> Vec<f64> {
    picks
        .iter()
        .enumerate()
        .map(|(i, &(choice, v))| match choice % 4 {
            0 => b.lows()[i],
            1 => b.highs()[i],
            _ => v,
        })
        .collect()
}

fn inside(b: &BoxSpec, x: &[f64]) -> bool {
    x.iter().zip(b.lows().iter().zip(b.highs())).all(|(v, (lo, hi))| lo <= v && v < hi)
}

proptest! {
    #[test]
    fn box_indicator_is_membership(
        b in unit_box(2),
        picks in prop::collection::vec(prop::collection::vec((any::<u8>(), 0.0f64..1.0), 2), 20),
    ) {
        let net = build_box_indicator(&b).unwrap();
        for p in &picks {
            let x = probe(&b, p);
            let v = raw_output(&net, &x).unwrap();
            prop_assert!(v == 0.0 || v == 1.0, "value {v}");
            prop_assert_eq!(v == 1.0, inside(&b, &x), "x = {:?}", x);
            prop_assert_eq!(b.contains(&x), inside(&b, &x));
        }
    }

    #[test]
    fn step_sums_build_linearly(
        boxes in prop::collection::vec(unit_box(2), 1..5),
        ca in prop::collection::vec(-3.0f64..3.0, 5),
        cb in prop::collection::vec(-3.0f64..3.0, 5),
        alpha in -2.0f64..2.0,
        beta in -2.0f64..2.0,
        points in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 20),
    ) {
        let a = StepSum::new(boxes.iter().cloned().zip(ca.iter()).map(|(b, &c)| (c, b)).collect()).unwrap();
        let b = StepSum::new(boxes.iter().cloned().zip(cb.iter()).map(|(b, &c)| (c, b)).collect()).unwrap();
        let combined = StepSum::new(
            boxes.iter().cloned().zip(ca.iter().zip(&cb)).map(|(bx, (&x, &y))| (alpha * x + beta * y, bx)).collect(),
        )
        .unwrap();
        let (na, nb, nc) = (build_step_sum(&a).unwrap(), build_step_sum(&b).unwrap(), build_step_sum(&combined).unwrap());
        for x in &points {
            let lhs = raw_output(&nc, x).unwrap();
            let rhs = alpha * raw_output(&na, x).unwrap() + beta * raw_output(&nb, x).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()) * 10.0, "{lhs} vs {rhs}");
            prop_assert!((lhs - combined.eval(x)).abs() < 1e-12 * 10.0 * (1.0 + lhs.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn approximation_error_shrinks_with_resolution(
        a in prop::collection::vec(-1.0f64..1.0, 2),
        c in -1.0f64..1.0,
        bump in 0.0f64..0.5,
    ) {
        let g = |x: &[f64]| a[0] * x[0] + a[1] * x[1] + c + bump * (x[0] - 0.3).abs();
        let mut last = f64::INFINITY;
        for m in [1usize, 2, 4, 8, 16] {
            let net = build_uniform_approximator(g, 2, m).unwrap();
            let err = grid_max_error(&net, g, 41).unwrap();
            prop_assert!(err <= last + 1e-12, "m = {m}: {err} after {last}");
            last = err;
        }
    }
}
