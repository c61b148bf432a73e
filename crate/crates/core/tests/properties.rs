use gridfill::linalg::{inner, singular_values, Matrix};
use gridfill::powergrid::{
    assemble_state_matrix, generate_radial_case, physics_constraints, residuals, solve_power_flow,
    StateLayout, BUS_COLUMNS,
};
use gridfill::sampling::{empirical_cdf, grid_sample, uniform_entries, wrap_degrees};
use gridfill::solver::{
    assemble_affine, solve_least_squares, solve_nuclear, svt, Entry, LinearConstraint, SolverConfig,
};
use gridfill::subspace::{
    mu_coherence, mu_q_perp, mu_q_perp_trace, nu_q_perp, orthonormalize_constraints,
    truncated_svd, RankSelection, SubspaceT,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(n1: usize, n2: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(n1, n2, |_, _| rng.random_range(-1.0..1.0))
}

/// Shape with n1 ≥ n2, a rank in range, and a seed.
fn instance() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (2usize..12, 1usize..8, any::<u64>()).prop_flat_map(|(a, b, seed)| {
        let (n1, n2) = (a.max(b), a.min(b));
        (Just(n1), Just(n2), 1..=n2, Just(seed))
    })
}

fn low_rank(n1: usize, n2: usize, r: usize, rng: &mut ChaCha8Rng) -> Matrix {
    random(n1, r, rng) * random(r, n2, rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projector_algebra((n1, n2, r, seed) in instance()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = low_rank(n1, n2, r, &mut rng);
        let f = truncated_svd(&m, RankSelection::Fixed(r)).unwrap();
        let t = SubspaceT::from_factors(&f);
        let x = random(n1, n2, &mut rng);
        let pt = t.project(&x).unwrap();
        prop_assert!((t.project(&pt).unwrap() - &pt).norm() < 1e-9);
        prop_assert!(t.project_perp(&pt).unwrap().norm() < 1e-9);

        let mats: Vec<Matrix> = (0..3).map(|_| random(n1, n2, &mut rng)).collect();
        let q = orthonormalize_constraints(n1, n2, &mats).unwrap();
        let pq = q.project(&x).unwrap();
        prop_assert!((q.project(&pq).unwrap() - &pq).norm() < 1e-9);
    }

    #[test]
    fn trace_identity((n1, n2, r, seed) in instance()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = low_rank(n1, n2, r, &mut rng);
        let t = SubspaceT::from_factors(&truncated_svd(&m, RankSelection::Fixed(r)).unwrap());
        let mut sum = 0.0;
        for i in 0..n1 {
            for j in 0..n2 {
                let mut e = Matrix::zeros(n1, n2);
                e[(i, j)] = 1.0;
                sum += t.project(&e).unwrap().norm_squared();
            }
        }
        let dim = (r * (n1 + n2 - r)) as f64;
        prop_assert!(((sum - dim) / dim).abs() < 1e-8);
    }

    #[test]
    fn metric_ranges((n1, n2, r, seed) in instance(), k in 0usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = low_rank(n1, n2, r, &mut rng);
        let f = truncated_svd(&m, RankSelection::Fixed(r)).unwrap();
        let mu_u = mu_coherence(&f.left).unwrap();
        prop_assert!(mu_u >= 1.0 - 1e-9 && mu_u <= n1 as f64 / r as f64 + 1e-9);
        let t = SubspaceT::from_factors(&f);
        let mats: Vec<Matrix> = (0..k).map(|_| random(n1, n2, &mut rng)).collect();
        let q = orthonormalize_constraints(n1, n2, &mats).unwrap();
        let mu = mu_q_perp(&t, &q).unwrap();
        let nu = nu_q_perp(&f, &q).unwrap();
        prop_assert!((0.0..=1.0).contains(&mu));
        prop_assert!((0.0..=1.0).contains(&nu));
        prop_assert!((mu - mu_q_perp_trace(&t, &q).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn svt_shrinks_singular_values((n1, n2, _r, seed) in instance(), tau in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random(n1, n2, &mut rng);
        let mut want: Vec<f64> = singular_values(&x).iter().map(|s| (s - tau).max(0.0)).collect();
        let mut got = singular_values(&svt(&x, tau));
        want.sort_by(f64::total_cmp);
        got.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-9);
        }
    }

    #[test]
    fn least_squares_is_orthogonal_to_null_space(
        (n1, n2, _r, seed) in instance(),
        observed in 0usize..20,
        n_constraints in 0usize..6,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = observed.min(n1 * n2);
        let entries = uniform_entries((n1, n2), m, seed, &[]).unwrap();
        let values: Vec<(Entry, f64)> =
            entries.entries().iter().map(|&e| (e, rng.random_range(-1.0..1.0))).collect();
        let dense: Vec<Matrix> = (0..n_constraints).map(|_| random(n1, n2, &mut rng)).collect();
        let constraints: Vec<LinearConstraint> = dense
            .iter()
            .map(|a| LinearConstraint::from_dense(a, rng.random_range(-1.0..1.0)))
            .collect();
        let sys = match assemble_affine((n1, n2), &values, constraints) {
            Ok(s) => s,
            Err(_) => return Ok(()),
        };
        let ls = match solve_least_squares(&sys) {
            Ok(r) => r.solution,
            Err(_) => return Ok(()),
        };
        // homogeneous version of the same system: its feasible set is the null space
        let zeros: Vec<(Entry, f64)> = values.iter().map(|&(e, _)| (e, 0.0)).collect();
        let homogeneous: Vec<LinearConstraint> =
            dense.iter().map(|a| LinearConstraint::from_dense(a, 0.0)).collect();
        let null = assemble_affine((n1, n2), &zeros, homogeneous).unwrap();
        for _ in 0..20 {
            let v = null.project(&random(n1, n2, &mut rng)).unwrap();
            prop_assert!(inner(&ls, &v).abs() < 1e-8);
        }
    }

    #[test]
    fn uniform_prefix((n1, n2, _r, seed) in instance(), a in 0usize..100, b in 0usize..100) {
        let total = n1 * n2;
        let (small, large) = (a.min(b) % (total + 1), a.max(b) % (total + 1));
        let (small, large) = (small.min(large), small.max(large));
        let x = uniform_entries((n1, n2), small, seed, &[]).unwrap();
        let y = uniform_entries((n1, n2), large, seed, &[]).unwrap();
        prop_assert_eq!(x.entries(), &y.entries()[..small]);
    }

    #[test]
    fn wrapped_angles(d in -1e4f64..1e4) {
        let w = wrap_degrees(d);
        prop_assert!(w > -180.0 && w <= 180.0);
        let k = (d - w) / 360.0;
        prop_assert!((k - k.round()).abs() < 1e-9);
    }

    #[test]
    fn cdf_is_a_distribution(values in prop::collection::vec(prop::option::of(-5.0f64..5.0), 1..40)) {
        let cdf = empirical_cdf(&values);
        if values.iter().all(Option::is_none) {
            prop_assert!(cdf.is_empty());
        } else {
            prop_assert!(cdf.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
            prop_assert_eq!(cdf.last().unwrap().1, 1.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nuclear_solve_is_deterministic((n1, n2, r, seed) in instance(), frac in 0.3f64..0.9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = low_rank(n1, n2, r, &mut rng);
        let m = ((n1 * n2) as f64 * frac) as usize;
        let obs = uniform_entries((n1, n2), m, seed, &[]).unwrap().values(&truth).unwrap();
        let cfg = SolverConfig { max_iterations: 300, ..SolverConfig::default() };
        let a = solve_nuclear(&assemble_affine((n1, n2), &obs, vec![]).unwrap(), &cfg).unwrap();
        let b = solve_nuclear(&assemble_affine((n1, n2), &obs, vec![]).unwrap(), &cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn generated_feeders_satisfy_physics(n in 2usize..40, seed in 0u64..1000, load in 0.0f64..0.02) {
        let case = generate_radial_case(n, seed, load).unwrap();
        let flow = solve_power_flow(&case).unwrap();
        let state = assemble_state_matrix(&case, &flow).unwrap();
        prop_assert!(residuals(&case, &state).unwrap().max() <= 1e-8);
        let phys = physics_constraints(&case);
        prop_assert_eq!(phys.len(), 4 * (2 * n - 1));
        for c in &phys {
            prop_assert!(c.residual(state.values()).abs() <= 1e-9);
        }
    }

    #[test]
    fn grid_sample_shape(n in 3usize..40, seed in any::<u64>(), fraction in 0.0f64..=1.0) {
        let layout = StateLayout { n_buses: n, n_lines: n - 1 };
        let pmus = [0, n / 2];
        let obs = grid_sample(&layout, fraction, seed, &pmus).unwrap();
        let mask = obs.mask();
        let n2 = layout.shape().1;
        for &p in &pmus {
            let row = layout.bus_row(p);
            prop_assert!((0..BUS_COLUMNS).all(|c| mask[row * n2 + c]));
        }
        // the same seed reveals a superset at a larger fraction
        let more = grid_sample(&layout, (fraction + 0.1).min(1.0), seed, &pmus).unwrap().mask();
        prop_assert!(mask.iter().zip(&more).all(|(a, b)| !a || *b));
    }
}
