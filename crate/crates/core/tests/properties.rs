use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use regbl::basis::{select_basis, verify_locbd_exponent, ZERO_TOL};
use regbl::exponent::CandidateOptions;
use regbl::kakeya::inflate_family;
use regbl::lattice::LatticeSet;
use regbl::{
    fit_loglog, gamma_of, gamma_sup, image_dim, locbd_exponent, norm_a, random_subspace, random_tube_family, rank,
    BlDatum, LatticeFn, Matrix, Subspace,
};

fn datum_from(n: usize, kernel_dims: &[usize], p: &[f64], seed: u64) -> BlDatum {
    let kernels = kernel_dims
        .iter()
        .enumerate()
        .map(|(j, &k)| random_subspace(n, k, seed.wrapping_mul(31).wrapping_add(j as u64)).unwrap())
        .collect();
    BlDatum::from_kernels(n, kernels, p.to_vec()).unwrap()
}

prop_compose! {
    fn orthogonal_datum()(n in 2usize..=4, j in 1usize..=3, seed in any::<u64>())
        (kernel_dims in prop::collection::vec(0..n, j), p in prop::collection::vec(0.0f64..=1.0, j), n in Just(n), seed in Just(seed))
        -> BlDatum {
        datum_from(n, &kernel_dims, &p, seed)
    }
}

prop_compose! {
    fn subspace()(n in 1usize..=5, seed in any::<u64>())(k in 0..=n, n in Just(n), seed in Just(seed)) -> Subspace {
        random_subspace(n, k, seed).unwrap()
    }
}

fn orthogonal(n: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal))
        .qr()
        .q()
}

prop_compose! {
    fn lattice_fn()(m in 1usize..=3)
        (cells in prop::collection::vec((prop::collection::vec(-6i64..6, m), 0.0f64..5.0), 1..12), m in Just(m))
        -> LatticeFn {
        LatticeFn::from_cells(m, cells).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projections_are_idempotent_and_symmetric(v in subspace()) {
        let p = v.projection_matrix();
        prop_assert!((&p * &p - &p).amax() < 1e-10);
        prop_assert!((&p - p.transpose()).amax() < 1e-12);
        prop_assert!((p.trace() - v.dim() as f64).abs() < 1e-10);
    }

    #[test]
    fn grassmann_distance_is_a_metric(n in 2usize..=5, k in 1usize..=4, s in any::<[u64; 3]>()) {
        let k = k.min(n - 1);
        let [a, b, c] = s.map(|seed| random_subspace(n, k, seed).unwrap());
        let ab = a.grassmann_distance(&b).unwrap();
        prop_assert!(a.grassmann_distance(&a).unwrap() < 1e-10);
        prop_assert!((ab - b.grassmann_distance(&a).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        let triangle = a.grassmann_distance(&c).unwrap() + c.grassmann_distance(&b).unwrap();
        prop_assert!(ab <= triangle + 1e-10);
    }

    #[test]
    fn sum_and_intersection_satisfy_the_dimension_formula(n in 2usize..=5, ka in 0usize..=5, kb in 0usize..=5, s in any::<[u64; 2]>()) {
        let a = random_subspace(n, ka.min(n), s[0]).unwrap();
        let b = random_subspace(n, kb.min(n), s[1]).unwrap();
        let sum = a.sum(&b).unwrap();
        let meet = a.intersect(&b).unwrap();
        prop_assert_eq!(sum.dim() + meet.dim(), a.dim() + b.dim());
        prop_assert!(meet.is_contained_in(&a) && meet.is_contained_in(&b));
        prop_assert!(a.is_contained_in(&sum) && b.is_contained_in(&sum));
    }

    #[test]
    fn image_dim_is_bounded_by_rank_and_dim(v in subspace(), rows in 1usize..=4, seed in any::<u64>()) {
        let n = v.ambient_dim();
        let m = Matrix::from_fn(rows, n, |i, j| ((seed.wrapping_add((i * 7 + j * 13) as u64) % 17) as f64) - 8.0);
        let d = image_dim(&m, &v).unwrap();
        prop_assert!(d <= rank(&m, 1e-8).unwrap().min(v.dim()));
    }

    #[test]
    fn exponent_is_rotation_invariant(d in orthogonal_datum(), seed in any::<u64>(), k in 0usize..=4) {
        let n = d.n();
        let o = orthogonal(n, seed);
        let rotated = d.composed_with(&o).unwrap();
        let v = random_subspace(n, k.min(n), seed ^ 0x5a5a).unwrap();
        let moved = v.transformed(&o.transpose()).unwrap();
        prop_assert!((gamma_of(&d, &v).unwrap() - gamma_of(&rotated, &moved).unwrap()).abs() < 1e-12);
        let opts = CandidateOptions::structured();
        let g0 = gamma_sup(&d, &opts).unwrap().gamma;
        let g1 = gamma_sup(&rotated, &opts).unwrap().gamma;
        prop_assert!((g0 - g1).abs() < 1e-9, "{} vs {}", g0, g1);
    }

    #[test]
    fn exponent_is_monotone_in_p(d in orthogonal_datum(), bump in 0.0f64..=1.0, which in 0usize..3) {
        let mut p = d.p().to_vec();
        let j = which % p.len();
        p[j] = (p[j] + bump).min(1.0);
        let heavier = d.with_exponents(p);
        let opts = CandidateOptions::structured();
        prop_assert!(gamma_sup(&heavier, &opts).unwrap().gamma <= gamma_sup(&d, &opts).unwrap().gamma + 1e-12);
        prop_assert!(locbd_exponent(&heavier).unwrap() <= locbd_exponent(&d).unwrap() + 1e-12);
    }

    #[test]
    fn local_bound_dominates_the_exponent(d in orthogonal_datum()) {
        let g = gamma_sup(&d, &CandidateOptions::structured()).unwrap().gamma;
        prop_assert!(locbd_exponent(&d).unwrap() >= g - 1e-9);
        let full = Subspace::full(d.n());
        let expected = d.n() as f64 - d.p().iter().enumerate().map(|(j, p)| p * d.target_dim(j) as f64).sum::<f64>();
        prop_assert_eq!(gamma_of(&d, &full).unwrap(), expected);
    }

    #[test]
    fn norm_inequality(f in lattice_fn(), a in 1usize..=3) {
        let integral = f.integral();
        let norm = norm_a(&f, a as f64, &LatticeSet::All).unwrap();
        prop_assert!(norm <= (a as f64).powi(f.dim() as i32) * integral + 1e-9);
        prop_assert!((norm_a(&f, 1.0, &LatticeSet::All).unwrap() - integral).abs() < 1e-9);
    }

    #[test]
    fn basis_selection_is_orthonormal_with_a_gap(d in orthogonal_datum(), seed in any::<u64>()) {
        let sel = select_basis(&d, 256, seed).unwrap();
        let e = sel.tail_matrix(0);
        prop_assert!((e.transpose() * &e - Matrix::identity(d.n(), d.n())).amax() < 1e-8);
        for row in &sel.residuals {
            for &r in row {
                prop_assert!(r < ZERO_TOL || r >= sel.margin - 1e-15);
            }
        }
        prop_assert!(verify_locbd_exponent(&d, &sel).unwrap().matches);
    }

    #[test]
    fn inflation_only_adds_coverage(seed in any::<u64>(), extra in 0.0f64..0.5, x in prop::array::uniform2(-1.0f64..1.0)) {
        let center = Subspace::coordinate(2, &[0]).unwrap();
        let f = random_tube_family(&center, 0.1, 0.05, 6, seed).unwrap();
        let g = inflate_family(&f, extra).unwrap();
        prop_assert!(g.count_at(&x) >= f.count_at(&x));
        prop_assert!(g.max_deviation() == f.max_deviation());
    }

    #[test]
    fn loglog_recovers_power_laws(slope in -3.0f64..3.0, c in 0.1f64..10.0) {
        let xs = [1.0, 2.0, 4.0, 8.0, 16.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| c * x.powf(slope)).collect();
        let fit = fit_loglog(&xs, &ys).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-9);
        prop_assert!((fit.intercept - c.ln()).abs() < 1e-9);
    }
}
