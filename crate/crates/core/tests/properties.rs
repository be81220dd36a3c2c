use metallic_lab::chart::{
    christoffel, covariant_derivative_metric, nijenhuis, nijenhuis_covariant_rhs, riemann, ConnectionField,
    ConnectionKind, EndoField, ExprMatrix, MetricField,
};
use metallic_lab::cli::{run_suites, scenario_from_str, Suite};
use metallic_lab::expr::{parse, Expr};
use metallic_lab::genbundle::{
    build_jc, build_jm, build_jp, congruence_inertia, derived_family, ghat_matrix, neutral_metric_g,
};
use metallic_lab::metallic::{
    check_metallic, compat_residual, from_projection, metallic_from_product, product_from_metallic,
    random_compatible_pair, MetallicParams,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

fn config(cases: u32) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(0x6d65_7461),
        failure_persistence: None,
        ..Config::default()
    }
}

fn coords2() -> Vec<String> {
    vec!["x1".into(), "x2".into()]
}

fn constant() -> impl Strategy<Value = String> {
    (-2.0..2.0f64).prop_map(|c| format!("({c:.4})"))
}

fn leaf() -> impl Strategy<Value = String> {
    prop_oneof![Just("x1".to_string()), Just("x2".to_string()), constant()]
}

/// Smooth everywhere: no division, logs or roots.
fn smooth_expr() -> BoxedStrategy<String> {
    leaf()
        .prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
                (inner.clone(), 0u32..4).prop_map(|(a, k)| format!("{a}^{k}")),
                (inner.clone(), prop::sample::select(vec!["sin", "cos", "tanh", "sinh"]))
                    .prop_map(|(a, f)| format!("{f}({a})")),
                inner.clone().prop_map(|a| format!("-{a}")),
            ]
        })
        .boxed()
}

fn any_expr() -> BoxedStrategy<String> {
    leaf()
        .prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} / {b})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} * {b}")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a}^{b}")),
                (inner.clone(), prop::sample::select(vec!["ln", "sqrt", "exp", "tan", "cosh"]))
                    .prop_map(|(a, f)| format!("{f}({a})")),
                inner.clone().prop_map(|a| format!("-{a}")),
            ]
        })
        .boxed()
}

fn point2() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 2)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn richardson(e: &Expr, pt: &[f64], k: usize) -> f64 {
    let central = |h: f64| {
        let mut a = pt.to_vec();
        let mut b = pt.to_vec();
        a[k] += h;
        b[k] -= h;
        (e.eval(&a).unwrap() - e.eval(&b).unwrap()) / (2.0 * h)
    };
    let h = 1e-5;
    (4.0 * central(h / 2.0) - central(h)) / 3.0
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn printed_expressions_reparse_to_the_same_values(src in any_expr(), pts in prop::collection::vec(point2(), 5)) {
        let c = coords2();
        let e = parse(&src, &c).unwrap();
        let again = parse(&e.to_source(&c), &c).unwrap();
        for p in &pts {
            match (e.eval(p), again.eval(p)) {
                (Ok(a), Ok(b)) if a.is_finite() || b.is_finite() => prop_assert!(close(a, b, 1e-12), "{src}: {a} vs {b}"),
                (Ok(_), Ok(_)) | (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "{src}: {a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences(src in smooth_expr(), p in point2()) {
        let e = parse(&src, &coords2()).unwrap();
        for k in 0..2 {
            let sym = e.diff(k).eval(&p).unwrap();
            let fd = richardson(&e, &p, k);
            prop_assert!(close(sym, fd, 1e-6), "{src} d{k}: {sym} vs {fd}");
        }
    }

    #[test]
    fn mixed_partials_commute(src in smooth_expr(), p in point2()) {
        let e = parse(&src, &coords2()).unwrap();
        let a = e.diff(0).diff(1).eval(&p).unwrap();
        let b = e.diff(1).diff(0).eval(&p).unwrap();
        prop_assert!(close(a, b, 1e-10), "{src}: {a} vs {b}");
    }
}

/// Positive definite on `[-1, 1]²`: diagonal at least 1, off-diagonal at most 0.3.
fn metric2() -> impl Strategy<Value = [String; 3]> {
    (0.0..1.0f64, -0.8..0.8f64, 0.0..0.5f64, -0.3..0.3f64).prop_map(|(a, b, c, e)| {
        [
            format!("1 + {a:.3}*x2^2"),
            format!("{e:.3}*sin(x1)"),
            format!("exp({b:.3}*x1) + {c:.3}*x1^2*x2^2"),
        ]
    })
}

fn metric_field(m: &[String; 3]) -> MetricField {
    let c = coords2();
    let p = |s: &str| parse(s, &c).unwrap();
    MetricField::from_upper(&ExprMatrix::new(2, 2, vec![p(&m[0]), p(&m[1]), p(&m[1]), p(&m[2])])).unwrap()
}

fn poly() -> impl Strategy<Value = String> {
    (constant(), constant(), constant(), constant())
        .prop_map(|(a, b, c, d)| format!("{a} + {b}*x1 + {c}*x2 + {d}*x1*x2"))
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn levi_civita_is_metric_and_satisfies_bianchi(m in metric2(), pts in prop::collection::vec(point2(), 4)) {
        let g = metric_field(&m);
        let gamma = christoffel(&g, &pts).unwrap();
        let dg = covariant_derivative_metric(&gamma, &g);
        let r = riemann(&gamma);
        for p in &pts {
            prop_assert!(dg.at(p).unwrap().max_abs() <= 1e-9);
            let rt = r.at(p).unwrap();
            let scale = rt.max_abs().max(1.0);
            for l in 0..2 { for i in 0..2 { for j in 0..2 { for k in 0..2 {
                let s = rt.get(&[l, i, j, k]) + rt.get(&[l, j, k, i]) + rt.get(&[l, k, i, j]);
                prop_assert!(s.abs() <= 1e-9 * scale);
            }}}}
        }
    }

    #[test]
    fn covariant_nijenhuis_identity_for_any_connection(
        j in prop::collection::vec(poly(), 4),
        gamma in prop::collection::vec(poly(), 8),
        pts in prop::collection::vec(point2(), 4),
    ) {
        let c = coords2();
        let jf = EndoField::new(ExprMatrix::new(2, 2, j.iter().map(|s| parse(s, &c).unwrap()).collect())).unwrap();
        let comps = gamma.iter().map(|s| parse(s, &c).unwrap()).collect();
        let conn = ConnectionField::from_components(2, comps, ConnectionKind::UserSupplied).unwrap();
        let n = nijenhuis(&jf);
        for p in &pts {
            let a = n.at(p).unwrap();
            let b = nijenhuis_covariant_rhs(&jf, &conn, p).unwrap();
            prop_assert!(a.max_abs_diff(&b) <= 1e-8 * a.max_abs().max(1.0));
        }
    }
}

fn params() -> impl Strategy<Value = MetallicParams> {
    prop::sample::select(vec![
        MetallicParams::GOLDEN,
        MetallicParams::SILVER,
        MetallicParams::COPPER,
        MetallicParams::new(3.0, 1.0),
        MetallicParams::new(0.5, 0.75),
    ])
}

fn pair(n: usize, params: MetallicParams, seed: u64) -> metallic_lab::metallic::RandomPair {
    random_compatible_pair(n, params, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn generalized_structures_on_random_pairs(n in 2usize..=4, p in params(), seed in any::<u64>()) {
        let rp = pair(n, p, seed);
        let tol = 1e-9;
        let jm = build_jm(&rp.j, &rp.g, tol).unwrap();
        let jp = build_jp(&rp.j, &rp.g, tol).unwrap();
        let jc = build_jc(&rp.j, &rp.g, tol).unwrap();
        let scale = rp.g.amax().max(1.0) * rp.j.amax().max(1.0);
        prop_assert!(ghat_matrix(&rp.g).unwrap().symmetry_residual(&jm) <= 1e-10 * scale);
        prop_assert!(jp.square_residual(1.0) <= 1e-10 * scale * scale);
        prop_assert!(jc.square_residual(-1.0) <= 1e-10 * scale * scale);
        prop_assert!((jc.matrix() * jp.matrix() + jp.matrix() * jc.matrix()).amax() <= 1e-10 * scale * scale);
        prop_assert_eq!(neutral_metric_g(&jp).unwrap().signature, (n, n));
        let g_form = metallic_lab::genbundle::pairing_matrix(n) * jp.matrix();
        prop_assert_eq!(congruence_inertia(&g_form, 1e-9), (n, n, 0));
        let fam = derived_family(&rp.j, &rp.g, p, tol).unwrap();
        for e in fam.jm.iter().chain(&fam.plus_m).chain(&fam.minus_m) {
            prop_assert!(e.metallic_residual(p) <= 1e-10 * scale * scale);
        }
    }

    #[test]
    fn projection_structures_are_metallic_and_round_trip(n in 2usize..=4, p in params(), seed in any::<u64>()) {
        let rp = pair(n, p, seed);
        let origin = vec![vec![0.0; n]];
        let proj = EndoField::constant(&rp.proj).unwrap();
        let g = MetricField::from_upper(&ExprMatrix::from_constant(&rp.g)).unwrap();
        let s = from_projection(&proj, &g, p, &origin, 1e-8).unwrap();
        let scale = rp.j.amax().max(1.0);
        prop_assert!(check_metallic(&s.j, p, &origin, 1e-10 * scale * scale).passed);

        let (fp, _) = product_from_metallic(&s.j, p).unwrap();
        let (back, other) = metallic_from_product(&fp, p, &origin, 1e-8).unwrap();
        let jv = s.j.eval(&origin[0]).unwrap();
        prop_assert!((back.eval(&origin[0]).unwrap() - &jv).amax() <= 1e-10 * scale);
        let expect_other = DMatrix::identity(n, n) * p.p - &jv;
        prop_assert!((other.eval(&origin[0]).unwrap() - expect_other).amax() <= 1e-10 * scale);
    }

    #[test]
    fn powers_of_a_compatible_structure_stay_compatible(n in 2usize..=4, p in params(), seed in any::<u64>()) {
        let rp = pair(n, p, seed);
        let j2 = &rp.j * &rp.j;
        let j3 = &j2 * &rp.j;
        let scale = rp.g.amax().max(1.0) * rp.j.amax().max(1.0).powi(3);
        prop_assert!(compat_residual(&rp.g, &j2) <= 1e-10 * scale);
        prop_assert!(compat_residual(&rp.g, &j3) <= 1e-10 * scale);
    }
}

fn scenario_json(name: &str, metric: &[String; 3], j: serde_json::Value, suites: &[&str], seed: u64) -> String {
    json!({
        "schema_version": 1,
        "name": name,
        "dimension": 2,
        "coords": ["x1", "x2"],
        "domain": [[-1.0, 1.0], [-1.0, 1.0]],
        "p": 1,
        "q": 1,
        "metric": [[metric[0], metric[1]], [metric[1], metric[2]]],
        "J": j,
        "suites": suites,
        "samples": 6,
        "seed": seed
    })
    .to_string()
}

proptest! {
    #![proptest_config(config(8))]

    #[test]
    fn lifted_structures_on_random_metrics(m in metric2(), seed in 0u64..1000) {
        let scalar = json!({"projection": [["1", "0"], ["0", "1"]]});
        let s = scenario_from_str(&scenario_json("random-lift", &m, scalar, &["lifts-tangent", "lifts-cotangent", "commutation"], seed)).unwrap();
        let r = run_suites(&s);
        for id in [
            "lifts.tangent.metallic", "lifts.tangent.compatible", "lifts.tangent.coordinate_display",
            "lifts.cotangent.metallic", "lifts.cotangent.compatible", "lifts.cotangent.coordinate_display",
            "lifts.tangent.nijenhuis_zero", "lifts.cotangent.nijenhuis_zero", "commutation",
        ] {
            let e = r.find(id).unwrap();
            prop_assert!(e.check.passed, "{id}: {:?}", e.check);
        }
        prop_assert!(r.passed);
    }

    #[test]
    fn seed_changes_points_but_not_verdicts(seed in 1u64..10_000) {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/sphere-diagJ.json");
        let base = metallic_lab::cli::load_scenario(path).unwrap()
            .with_overrides(Some(vec![Suite::Core, Suite::Genconn]), Some(8), None, None).unwrap();
        let moved = base.clone().with_overrides(None, None, Some(seed ^ 0xabc), None).unwrap();
        prop_assume!(moved.seed() != base.seed());
        prop_assert_ne!(base.sample_points(), moved.sample_points());
        let a = run_suites(&base);
        let b = run_suites(&moved);
        let verdicts = |r: &metallic_lab::cli::SuiteReport| -> Vec<(String, bool)> {
            r.checks.iter().map(|e| (e.check.id.clone(), e.check.passed)).collect()
        };
        prop_assert_eq!(verdicts(&a), verdicts(&b));
    }

    #[test]
    fn six_conditions_imply_integrability(n_seed in any::<u64>()) {
        // constant data: the conditions hold, so the direct tensor must vanish too
        let rp = pair(2, MetallicParams::GOLDEN, n_seed);
        let f = |m: &DMatrix<f64>| -> Vec<Vec<String>> {
            (0..2).map(|i| (0..2).map(|j| format!("{:e}", m[(i, j)])).collect()).collect()
        };
        let text = json!({
            "schema_version": 1, "name": "constant", "dimension": 2, "coords": ["x1", "x2"],
            "domain": [[-1.0, 1.0], [-1.0, 1.0]], "p": 1, "q": 1,
            "metric": f(&rp.g), "J": {"matrix": f(&rp.j)}, "suites": ["genconn"], "samples": 4,
            "tolerance": 1e-8
        }).to_string();
        let s = scenario_from_str(&text).unwrap();
        let r = run_suites(&s);
        for which in ["jp", "jc"] {
            let cond = r.find(&format!("genconn.{which}_conditions")).unwrap();
            let direct = r.find(&format!("genconn.{which}_integrable")).unwrap();
            if cond.check.passed {
                prop_assert!(direct.check.residual.unwrap() <= 10.0 * s.tolerance);
            }
        }
    }
}

#[test]
fn special_parameter_families() {
    let origin = vec![vec![0.0, 0.0]];
    let c = |m: &[f64]| EndoField::constant(&DMatrix::from_row_slice(2, 2, m)).unwrap();
    // swap: F² = I
    assert!(check_metallic(&c(&[0.0, 1.0, 1.0, 0.0]), MetallicParams::new(0.0, 1.0), &origin, 1e-14).passed);
    // rotation by a quarter turn: J² = −I
    assert!(check_metallic(&c(&[0.0, -1.0, 1.0, 0.0]), MetallicParams::new(0.0, -1.0), &origin, 1e-14).passed);
    // nilpotent: J² = 0
    assert!(check_metallic(&c(&[0.0, 1.0, 0.0, 0.0]), MetallicParams::new(0.0, 0.0), &origin, 1e-14).passed);
    assert!(!check_metallic(&c(&[0.0, 1.0, 0.0, 0.0]), MetallicParams::new(0.0, 1.0), &origin, 1e-14).passed);
}
