mod common;

use proptest::prelude::*;
use serde_json::json;

use fracpen::config::{self, ExperimentConfig};
use fracpen::energy::{self, EnergyContext};
use fracpen::fracops;
use fracpen::model::{ModelParams, NonlinearitySpec, PotentialSpec};
use fracpen::{Field, Grid};

fn bumps(grid: Grid, seed: u64, positive: bool) -> Field {
    common::random_bumps(grid, &mut common::rng(seed), 3, positive)
}

fn roll(u: &Field, k: usize) -> Field {
    let n = u.values().len();
    let mut v = vec![0.0; n];
    for (j, x) in u.values().iter().enumerate() {
        v[(j + k) % n] = *x;
    }
    Field::new(*u.grid(), v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn spectral_operator_is_linear(seed in any::<u64>(), s in 0.05f64..0.95, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let g = Grid::new(1, 6.0, 256).unwrap();
        let u = bumps(g, seed, false);
        let w = bumps(g, seed ^ 0x5a5a, false);
        let lhs = fracops::apply_fraclap_spectral(&u.scaled(a).axpy(b, &w), s).unwrap();
        let rhs = fracops::apply_fraclap_spectral(&u, s).unwrap().scaled(a)
            .axpy(b, &fracops::apply_fraclap_spectral(&w, s).unwrap());
        let scale = 1.0 + rhs.max_abs();
        prop_assert!(common::max_abs_diff(lhs.values(), rhs.values()) < 1e-11 * scale);
    }

    #[test]
    fn spectral_operator_is_self_adjoint(seed in any::<u64>(), s in 0.05f64..0.95) {
        let g = Grid::new(2, 3.0, 32).unwrap();
        let u = bumps(g, seed, false);
        let w = bumps(g, seed.wrapping_add(1), false);
        let l = fracops::apply_fraclap_spectral(&u, s).unwrap().dot(&w);
        let r = u.dot(&fracops::apply_fraclap_spectral(&w, s).unwrap());
        prop_assert!((l - r).abs() <= 1e-10 * (1.0 + l.abs().max(r.abs())));
    }

    #[test]
    fn spectral_operator_commutes_with_node_shifts(seed in any::<u64>(), s in 0.05f64..0.95, k in 0usize..128) {
        let g = Grid::new(1, 4.0, 128).unwrap();
        let u = bumps(g, seed, false);
        let a = roll(&fracops::apply_fraclap_spectral(&u, s).unwrap(), k);
        let b = fracops::apply_fraclap_spectral(&roll(&u, k), s).unwrap();
        prop_assert!(common::max_abs_diff(a.values(), b.values()) < 1e-11 * (1.0 + a.max_abs()));
    }

    #[test]
    fn quadratic_form_is_nonnegative(seed in any::<u64>(), s in 0.05f64..0.95) {
        let g = Grid::new(1, 5.0, 128).unwrap();
        let u = bumps(g, seed, false);
        prop_assert!(fracops::gagliardo_seminorm_sq(&u, s).unwrap() >= -1e-12);
    }

    #[test]
    fn penalized_nonlinearity_never_exceeds_either_branch(p in 2.1f64..6.0, pen in 0.0f64..10.0, t in 0.0f64..50.0) {
        let g = energy::g_pure(p, false, pen, t);
        prop_assert!(g <= t.powf(p - 1.0) + 1e-12);
        prop_assert!(g <= pen * t + 1e-12);
        prop_assert_eq!(energy::g_pure(p, true, pen, t), t.powf(p - 1.0));
    }

    #[test]
    fn penalized_primitive_matches_quadrature(p in 2.2f64..5.0, pen in 0.01f64..5.0, t in 0.01f64..5.0) {
        let want = energy::primitive_by_quadrature(|x| energy::g_pure(p, false, pen, x), t).unwrap();
        let got = energy::big_g_pure(p, false, pen, t);
        prop_assert!((got - want).abs() <= 1e-7 * (1.0 + want.abs()));
    }

    #[test]
    fn nehari_scale_is_reciprocal_in_amplitude(seed in any::<u64>(), c in 0.1f64..10.0) {
        let params = ModelParams::default_1d().with_eps(0.4).unwrap();
        let spec = PotentialSpec::default_bump(1);
        let g = Grid::new(1, 10.24, 512).unwrap();
        let ctx = EnergyContext::penalized(&params, &spec, &NonlinearitySpec::PurePower, &g).unwrap();
        let u = bumps(g, seed, true);
        let (t1, p1) = ctx.nehari_project(&u).unwrap();
        let (tc, pc) = ctx.nehari_project(&u.scaled(c)).unwrap();
        prop_assert!((tc * c / t1 - 1.0).abs() < 1e-9, "t(cu) = {tc}, t(u)/c = {}", t1 / c);
        prop_assert!(common::max_abs_diff(p1.values(), pc.values()) < 1e-9 * p1.max_abs());
    }

    #[test]
    fn limiting_energy_scales_with_a_covariant_grid(seed in any::<u64>(), a in 0.25f64..8.0) {
        let (s, p) = (0.25, 3.5);
        let g1 = Grid::new(1, 8.0, 256).unwrap();
        let ga = Grid::new(1, 8.0 * a.powf(-0.5 / s), 256).unwrap();
        let v = bumps(g1, seed, true);
        let va = Field::new(ga, v.values().iter().map(|x| a.powf(1.0 / (p - 2.0)) * x).collect()).unwrap();
        let e1 = energy::limiting_energy(1.0, s, p, &v).unwrap().total;
        let ea = energy::limiting_energy(a, s, p, &va).unwrap().total;
        let k = p / (p - 2.0) - 1.0 / (2.0 * s);
        prop_assert!((ea - e1 * a.powf(k)).abs() <= 1e-10 * (e1.abs() * a.powf(k) + 1e-300));
    }

    #[test]
    fn override_writes_the_addressed_leaf(eps in 0.01f64..1.0, m in 4u32..14) {
        let mut v = serde_json::to_value(ExperimentConfig::default_1d()).unwrap();
        config::apply_override(&mut v, &format!("model.eps={eps}")).unwrap();
        config::apply_override(&mut v, &format!("grid.points_per_axis={}", 1u64 << m)).unwrap();
        config::apply_override(&mut v, "sweep.eps_list.1=0.15").unwrap();
        prop_assert_eq!(v["model"]["eps"].as_f64(), Some(eps));
        prop_assert_eq!(&v["grid"]["points_per_axis"], &json!(1u64 << m));
        prop_assert_eq!(v["sweep"]["eps_list"][1].as_f64(), Some(0.15));
    }
}
