mod common;

use hardcoreboost::lp::{solve, LinearProgram, LpStatus};
use proptest::prelude::*;

fn build(a: &[Vec<f64>], b: &[f64], lo: &[f64], hi: &[f64], c: &[f64]) -> LinearProgram {
    let mut lp = LinearProgram::new(lo.len());
    for j in 0..lo.len() {
        lp.set_bounds(j, lo[j], hi[j]).unwrap();
    }
    lp.set_objective(c.to_vec()).unwrap();
    for (row, &v) in a.iter().zip(b) {
        lp.add_equality(row.clone(), v).unwrap();
    }
    lp
}

fn problem() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, bool)> {
    (1usize..=3, 2usize..=5).prop_flat_map(|(rows, n)| {
        (
            prop::collection::vec(prop::collection::vec(-3i32..=3, n), rows),
            prop::collection::vec(-2i32..=0, n),
            prop::collection::vec(0i32..=3, n),
            prop::collection::vec(0.0f64..=1.0, n),
            prop::collection::vec(-5i32..=5, n),
            any::<bool>(),
            prop::collection::vec(-6i32..=6, rows),
        )
            .prop_map(|(a, lo, width, t, c, feasible, raw_b)| {
                let a: Vec<Vec<f64>> = a.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect();
                let lo: Vec<f64> = lo.into_iter().map(f64::from).collect();
                let hi: Vec<f64> = lo.iter().zip(&width).map(|(l, w)| l + f64::from(*w)).collect();
                // A point inside the box makes the program feasible by construction.
                let x0: Vec<f64> = lo.iter().zip(&hi).zip(&t).map(|((l, h), t)| l + t * (h - l)).collect();
                let b: Vec<f64> = if feasible {
                    a.iter().map(|r| r.iter().zip(&x0).map(|(p, q)| p * q).sum()).collect()
                } else {
                    raw_b.into_iter().map(f64::from).collect()
                };
                let c: Vec<f64> = c.into_iter().map(f64::from).collect();
                (a, b, lo, hi, c, feasible)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn simplex_matches_vertex_enumeration((a, b, lo, hi, c, _) in problem()) {
        let lp = build(&a, &b, &lo, &hi, &c);
        let sol = solve(&lp).unwrap();
        let vertices = common::polytope_vertices(&a, &b, &lo, &hi);
        if vertices.is_empty() {
            prop_assert_eq!(sol.status, LpStatus::Infeasible);
        } else {
            let best = vertices
                .iter()
                .map(|v| v.iter().zip(&c).map(|(x, y)| x * y).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(sol.status, LpStatus::Optimal);
            prop_assert!((sol.value - best).abs() <= 1e-7, "simplex {} vs oracle {}", sol.value, best);
            prop_assert!(lp.max_violation(&sol.x) <= 1e-8);
        }
    }

    #[test]
    fn solutions_are_reproducible((a, b, lo, hi, c, _) in problem()) {
        let lp = build(&a, &b, &lo, &hi, &c);
        let (first, second) = (solve(&lp).unwrap(), solve(&lp).unwrap());
        prop_assert_eq!(first.status, second.status);
        prop_assert_eq!(first.value.to_bits(), second.value.to_bits());
        prop_assert_eq!(first.x, second.x);
        prop_assert_eq!(first.iterations, second.iterations);
    }
}

#[test]
fn degenerate_decorrelation_programs_terminate() {
    // Many identical columns and a zero right-hand side: every basis is
    // degenerate, which is where cycling would show up.
    let m = 12;
    let mut lp = LinearProgram::new(m);
    for j in 0..m {
        lp.set_bounds(j, 0.0, 1.0).unwrap();
    }
    let row1: Vec<f64> = (0..m).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let row2: Vec<f64> = (0..m).map(|j| if j % 3 == 0 { 1.0 } else { -0.5 }).collect();
    lp.add_equality(row1, 0.0).unwrap();
    lp.add_equality(row2, 0.0).unwrap();
    for target in 0..m {
        let mut c = vec![0.0; m];
        c[target] = 1.0;
        lp.set_objective(c).unwrap();
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(lp.max_violation(&sol.x) <= 1e-8);
    }
}
