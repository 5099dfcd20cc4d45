use modulus_core::curves::{
    intersection_length, is_admissible, length_function, line_integral, normal_representation,
};
use modulus_core::linalg::{min_stretch, op_norm, Matrix};
use modulus_core::mappings::dilatation_of;
use modulus_core::modulus::family_union;
use modulus_core::*;
use proptest::prelude::*;

fn polyline() -> impl Strategy<Value = Curve> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..24).prop_map(|pts| {
        let rows: Vec<Vec<f64>> = pts.iter().map(|&(x, y)| vec![x, y]).collect();
        let params = (0..rows.len()).map(|i| i as f64).collect();
        Curve::from_points(params, &rows, false).unwrap()
    })
}

fn matrix(n: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-2.0f64..2.0, n * n).prop_map(move |v| {
        let rows: Vec<Vec<f64>> = v.chunks(n).map(|r| r.to_vec()).collect();
        Matrix::from_rows(&rows).unwrap()
    })
}

fn density(res: usize) -> impl Strategy<Value = DensityField> {
    prop::collection::vec(0.0f64..3.0, res * res)
        .prop_map(move |v| DensityField::new(Grid::cube(2, -1.0, 1.0, res).unwrap(), v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn length_function_is_monotone(c in polyline()) {
        let lf = length_function(&c).unwrap();
        prop_assert!(lf.lengths().windows(2).all(|w| w[0] <= w[1]));
        prop_assert!((lf.total() - c.total_length()).abs() <= 1e-12 * (1.0 + lf.total()));
    }

    #[test]
    fn normal_representation_is_idempotent(c in polyline()) {
        let once = normal_representation(&c).unwrap();
        let twice = normal_representation(once.curve()).unwrap();
        prop_assert!((once.total_length() - twice.total_length()).abs() <= 1e-12 * (1.0 + once.total_length()));
        for (a, b) in once.curve().params().iter().zip(twice.curve().params()) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn line_integral_ignores_parametrisation(c in polyline(), rho in density(8), scale in 0.1f64..10.0) {
        let params: Vec<f64> = c.params().iter().map(|t| scale * t + t * t).collect();
        let rows: Vec<Vec<f64>> = c.points().map(|p| p.to_vec()).collect();
        let d = Curve::from_points(params, &rows, false).unwrap();
        prop_assert_eq!(line_integral(&rho, &c), line_integral(&rho, &d));
    }

    #[test]
    fn intersection_length_complements(c in polyline(), r in 0.1f64..1.0) {
        let inside = intersection_length(&c, |x| x[0] * x[0] + x[1] * x[1] < r * r);
        let outside = intersection_length(&c, |x| x[0] * x[0] + x[1] * x[1] >= r * r);
        prop_assert!((inside + outside - c.total_length()).abs() <= 1e-12 * (1.0 + c.total_length()));
    }

    #[test]
    fn admissibility_is_monotone_in_rho(rho in density(8), bump in 0.0f64..1.0) {
        let fam = CurveFamily::segment_bundle(-0.9, 0.9, -0.9, 0.9, 6, 20).unwrap();
        let worst = is_admissible(&rho, &fam, 0.0).worst_slack;
        let bigger = DensityField::new(rho.grid().clone(), rho.values().iter().map(|v| v + bump).collect()).unwrap();
        prop_assert!(is_admissible(&bigger, &fam, 0.0).worst_slack >= worst);
    }

    #[test]
    fn inner_dilatation_of_order_n_is_at_least_one(m in matrix(2), k in matrix(3)) {
        for a in [m, k] {
            let j = a.det();
            if j.abs() > 1e-6 {
                let n = a.dim() as f64;
                prop_assert!(dilatation_of(&a, j, n) >= 1.0 - 1e-9);
            }
        }
    }

    #[test]
    fn dilatation_scales_like_power(m in matrix(2), lambda in 0.1f64..10.0, p in 1.0f64..4.0) {
        let j = m.det();
        prop_assume!(j.abs() > 1e-6);
        let s = m.scale(lambda);
        let k0 = dilatation_of(&m, j, p);
        let k1 = dilatation_of(&s, s.det(), p);
        let expect = lambda.powf(2.0 - p) * k0;
        prop_assert!((k1 - expect).abs() <= 1e-8 * expect);
    }

    #[test]
    fn min_stretch_below_norm(m in matrix(3)) {
        prop_assert!(min_stretch(&m) <= op_norm(&m) * (1.0 + 1e-12));
    }
}

fn random_segments(seed: u64, count: usize) -> CurveFamily {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let curves = (0..count)
        .map(|_| {
            let a = [rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)];
            let b = [rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)];
            let n = 30;
            let params: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
            let rows: Vec<Vec<f64>> = params
                .iter()
                .map(|&t| vec![a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])
                .collect();
            Curve::from_points(params, &rows, false).unwrap()
        })
        .collect();
    CurveFamily::custom(2, "random-segments", curves).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn modulus_is_monotone_and_subadditive(seed in any::<u64>(), n1 in 1usize..5, n2 in 1usize..5) {
        let g = Grid::cube(2, 0.0, 1.0, 16).unwrap();
        let opts = SolverOptions { tolerance: 1e-4, ..SolverOptions::default() };
        let a = random_segments(seed, n1);
        let b = random_segments(seed ^ 0x9e37_79b9, n2);
        let u = family_union(&a, &b).unwrap();
        let ma = p_modulus(&a, 2.0, &g, &opts).unwrap().value;
        let mb = p_modulus(&b, 2.0, &g, &opts).unwrap().value;
        let mu = p_modulus(&u, 2.0, &g, &opts).unwrap().value;
        prop_assert!(ma <= mu * (1.0 + 2.0 * opts.tolerance));
        prop_assert!(mb <= mu * (1.0 + 2.0 * opts.tolerance));
        prop_assert!(mu <= (ma + mb) * (1.0 + 2.0 * opts.tolerance));
    }
}

/// Exact solution of the `p = 2` problem on a tiny instance. Hildreth's
/// coordinate ascent identifies the active constraints and the support;
/// the KKT system on that pattern is then solved directly.
fn exact_p2(fam: &CurveFamily, grid: &Grid) -> f64 {
    use nalgebra::{DMatrix, DVector};
    let cells = grid.cell_count();
    let v = grid.cell_measure();
    // dense constraint rows via unit densities
    let a: Vec<Vec<f64>> = fam
        .curves()
        .iter()
        .map(|c| {
            (0..cells)
                .map(|j| {
                    let mut e = vec![0.0; cells];
                    e[j] = 1.0;
                    line_integral(&DensityField::new(grid.clone(), e).unwrap(), c)
                })
                .collect()
        })
        .collect();
    let k = a.len();
    let rho_of = |lam: &[f64]| -> Vec<f64> {
        (0..cells)
            .map(|j| ((0..k).map(|i| lam[i] * a[i][j]).sum::<f64>() / (2.0 * v)).max(0.0))
            .collect()
    };
    let mut lam = vec![0.0; k];
    for _ in 0..200_000 {
        for i in 0..k {
            let rho = rho_of(&lam);
            let ai: f64 = (0..cells).map(|j| a[i][j] * rho[j]).sum();
            let curv: f64 = (0..cells)
                .filter(|&j| rho[j] > 0.0 || lam[i] == 0.0)
                .map(|j| a[i][j] * a[i][j])
                .sum::<f64>()
                / (2.0 * v);
            lam[i] = (lam[i] + (1.0 - ai) / curv.max(1e-300)).max(0.0);
        }
    }
    let rho = rho_of(&lam);
    let act: Vec<usize> = (0..k).filter(|&i| lam[i] > 1e-12).collect();
    let sup: Vec<usize> = (0..cells).filter(|&j| rho[j] > 1e-12).collect();
    // (A_S D A_Sᵀ) μ = 2v·1 on the identified pattern
    let n = act.len();
    let m = DMatrix::from_fn(n, n, |r, c| {
        sup.iter()
            .map(|&j| a[act[r]][j] * a[act[c]][j])
            .sum::<f64>()
    });
    let rhs = DVector::from_element(n, 2.0 * v);
    let mu = m.lu().solve(&rhs).expect("nonsingular KKT system");
    let exact: Vec<f64> = (0..cells)
        .map(|j| {
            if sup.contains(&j) {
                (0..n).map(|r| mu[r] * a[act[r]][j]).sum::<f64>() / (2.0 * v)
            } else {
                0.0
            }
        })
        .collect();
    for row in &a {
        let s: f64 = row.iter().zip(&exact).map(|(x, y)| x * y).sum();
        assert!(s >= 1.0 - 1e-8, "KKT pattern infeasible: {s}");
    }
    exact.iter().map(|r| r * r * v).sum()
}

#[test]
fn solver_matches_exact_small_instances() {
    let g = Grid::cube(2, 0.0, 1.0, 5).unwrap();
    for seed in 0..12 {
        let fam = random_segments(seed, 1 + (seed as usize % 4));
        let exact = exact_p2(&fam, &g);
        let opts = SolverOptions {
            tolerance: 1e-6,
            ..SolverOptions::default()
        };
        let r = p_modulus(&fam, 2.0, &g, &opts).unwrap();
        assert!(
            (r.value - exact).abs() <= 1e-5 * exact,
            "seed {seed}: {} vs {exact}",
            r.value
        );
        assert!(r.lower_bound <= exact * (1.0 + 1e-9));
    }
}

#[test]
fn refinement_stability_of_annulus_value() {
    let e = std::f64::consts::E;
    // ray spacing at the outer circle must stay below the finer cell width
    let fam = CurveFamily::annulus_connecting(1.0, e, 1440, 2000).unwrap();
    let v = |res| {
        let g = Grid::cube(2, -1.02 * e, 1.02 * e, res).unwrap();
        p_modulus(&fam, 2.0, &g, &SolverOptions::default())
            .unwrap()
            .value
    };
    let (a, b) = (v(256), v(512));
    assert!((a - b).abs() / a < 0.02, "{a} vs {b}");
}

#[test]
fn extremal_density_is_admissible() {
    let e = std::f64::consts::E;
    let g = Grid::cube(2, -1.02 * e, 1.02 * e, 96).unwrap();
    let fam = CurveFamily::annulus_separating(1.0, e, 120, 600).unwrap();
    let opts = SolverOptions::default();
    let r = p_modulus(&fam, 2.0, &g, &opts).unwrap();
    let adm = is_admissible(&r.extremal_density, &fam, opts.tolerance);
    assert!(adm.admissible);
    assert!(1.0 + adm.worst_slack >= 1.0 - r.max_constraint_violation);
}
