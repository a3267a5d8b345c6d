use beamgain::admm::{
    secular_bisect, secular_bracket, solve_sphere_lsq, sphere_cost, update_g_wosc, update_gh_wsc,
    SecularSystem,
};
use beamgain::oracle::{
    check_block, check_secular, check_sphere, oracle_g0_grid, oracle_secular_scan, oracle_sphere,
    random_block_problem, random_sphere_problem, BlockProblem,
};
use beamgain::C64;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rvec(v: &[f64]) -> DVector<C64> {
    DVector::from_iterator(v.len(), v.iter().map(|&r| C64::new(r, 0.0)))
}

#[test]
fn block_examples_agree_with_the_grid() {
    let r = update_g_wosc(&rvec(&[1.0, 4.0]), 1.0).unwrap();
    let o = oracle_g0_grid(&BlockProblem::wosc(&rvec(&[1.0, 4.0]), 1.0), 8.0, 1e-4).unwrap();
    assert!((r.g0 - 2.0).abs() < 1e-12);
    assert!((r.g0 - o.g0).abs() <= 1e-4);
    assert!((r.cost - o.cost).abs() <= 1e-8);
    assert!((r.g[1].re - 4.0).abs() < 1e-12);

    let z1 = rvec(&[2.0]);
    let z2 = rvec(&[1.0]);
    for (gamma, g0, h) in [(1.0, 3.0, 1.0), (0.04, 40.0 / 13.0, 8.0 / 13.0)] {
        let r = update_gh_wsc(&z1, &z2, 1.0, 1.0, gamma).unwrap();
        let o = oracle_g0_grid(&BlockProblem::wsc(&z1, &z2, 1.0, 1.0, gamma), 8.0, 1e-4).unwrap();
        assert!((r.g0 - g0).abs() < 1e-12, "{} vs {g0}", r.g0);
        assert!((r.h[0].re - h).abs() < 1e-12);
        assert!((r.g0 - o.g0).abs() <= 1e-4);
    }
}

#[test]
fn secular_examples_are_the_smallest_roots() {
    let cases: [(&[f64], &[f64], f64); 3] = [
        (&[0.0], &[2.0], -2.0),
        (&[1.0, 1.0], &[1.0, 1.0], 1.0 - 2f64.sqrt()),
        (&[1.0, 4.0], &[1.0, 2.0], f64::NAN),
    ];
    for (l, b, expected) in cases {
        let sys = SecularSystem {
            lambdas: DVector::from_column_slice(l),
            u: DMatrix::identity(l.len(), l.len()),
            beta: DVector::from_column_slice(b),
        };
        let nu = secular_bisect(&sys, 1e-12).unwrap();
        let roots = oracle_secular_scan(l, b, 1e-4);
        assert!((nu - roots[0]).abs() < 1e-9);
        if expected.is_nan() {
            assert!((nu + 0.142).abs() < 1e-3);
        } else {
            assert!((nu - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn sphere_examples_match_the_restart_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases = [
        (DMatrix::identity(2, 2), DVector::from_vec(vec![3.0, 4.0])),
        (
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]),
            DVector::from_vec(vec![0.0, 0.0]),
        ),
        (
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]),
            DVector::from_vec(vec![1.0, 1.0]),
        ),
    ];
    for (m, d) in &cases {
        let x = solve_sphere_lsq(m, d).unwrap();
        let (_, c) = oracle_sphere(m, d, 64, &mut rng);
        assert!((sphere_cost(m, d, &x) - c).abs() < 1e-6);
    }
    let x = solve_sphere_lsq(&cases[2].0, &cases[2].1).unwrap();
    assert!((x[0] - 0.876).abs() < 1e-3 && (x[1] - 0.483).abs() < 1e-3);
}

#[test]
fn oracle_budgets_are_converged() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let (m, d) = random_sphere_problem(&mut rng, 8);
        let (_, c1) = oracle_sphere(&m, &d, 20, &mut rng);
        let (_, c2) = oracle_sphere(&m, &d, 200, &mut rng);
        assert!((c1 - c2).abs() < 1e-6);
    }
    let (l, b) = (vec![0.5, 2.0, 2.5, 7.0], vec![0.3, -1.0, 0.2, 2.0]);
    let coarse = oracle_secular_scan(&l, &b, 1e-4);
    let fine = oracle_secular_scan(&l, &b, 1e-5);
    assert_eq!(coarse.len(), fine.len());
    for (a, c) in coarse.iter().zip(&fine) {
        assert!((a - c).abs() < 1e-9);
    }
}

#[test]
fn seeded_random_batches_pass() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for k in 0..500 {
        let p = random_block_problem(&mut rng, k % 2 == 0);
        let r = check_block(&p).unwrap();
        assert!(r.passed, "{r:?}");
    }
    for _ in 0..50 {
        let (m, d) = random_sphere_problem(&mut rng, 12);
        let r = check_sphere(&m, &d, 24, &mut rng).unwrap();
        assert!(r.passed, "{r:?}");
    }
}

fn secular_system() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..=8).prop_flat_map(|n| {
        (
            proptest::collection::vec(0.0f64..10.0, n),
            proptest::collection::vec(
                prop_oneof![-3.0f64..-0.05, 0.05f64..3.0],
                n,
            ),
        )
            .prop_map(|(mut l, b)| {
                l.sort_by(f64::total_cmp);
                (l, b)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn secular_root_is_minimal_and_accurate((l, b) in secular_system()) {
        let report = check_secular(&l, &b, 1e-12).unwrap();
        prop_assert!(report.passed, "{:?}", report);
    }

    #[test]
    fn secular_bracket_encloses_the_root((l, b) in secular_system()) {
        let (lo, hi) = secular_bracket(&l, &b).unwrap();
        prop_assert!(lo <= hi);
        prop_assert!(hi <= l[0]);
        let roots = oracle_secular_scan(&l, &b, f64::INFINITY);
        prop_assert!(roots[0] >= lo - 1e-9 && roots[0] <= hi + 1e-9);
    }

    #[test]
    fn sphere_solution_is_unit_and_stationary(
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, d) = random_sphere_problem(&mut rng, 10);
        let x = solve_sphere_lsq(&m, &d).unwrap();
        prop_assert!((x.norm() - 1.0).abs() <= 1e-9);
        // the gradient is normal to the sphere at a stationary point
        let grad = (&m * m.transpose() * &x - &m * &d).scale(2.0);
        let tangent = &grad - x.scale(x.dot(&grad));
        prop_assert!(tangent.norm() <= 1e-7 * (1.0 + grad.norm()));
    }
}
