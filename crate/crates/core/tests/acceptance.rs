//! One verdict line per acceptance criterion. Lines go straight to the
//! process stderr so they appear in the test log without `--nocapture`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use metallic_lab::cli::{emit_report, load_scenario, run_suites, scenario_from_str, Format, SuiteReport};
use metallic_lab::genbundle::{
    build_jc, build_jm, build_jp, check_anti_pseudo_calibrated, check_calibrated, neutral_metric_g,
};
use metallic_lab::lifts::Resolution;
use metallic_lab::metallic::{metallic_number, random_compatible_pair, MetallicParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CORPUS: [&str; 7] = [
    "flat-golden",
    "flat-silver",
    "polar-plane",
    "sphere-scalarJ",
    "sphere-diagJ",
    "product-decomposable",
    "warped-3d",
];

/// Criteria that cannot hold as stated; their line reports FAIL and the
/// test pins the observed outcome instead.
const UNATTAINABLE: [usize; 1] = [10];

fn path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"))
}

fn scenario_text(name: &str) -> String {
    std::fs::read_to_string(path(name)).unwrap()
}

struct Verdict {
    number: usize,
    passed: bool,
    line: String,
}

fn verdict(number: usize, title: &str, passed: bool, detail: String) -> Verdict {
    let status = if passed { "PASS" } else { "FAIL" };
    Verdict {
        number,
        passed,
        line: format!("criterion {number:>2} {status}  {title}: {detail}"),
    }
}

fn residual(r: &SuiteReport, id: &str) -> f64 {
    r.find(id)
        .unwrap_or_else(|| panic!("{}: no check {id}", r.scenario))
        .check
        .residual
        .unwrap_or(f64::INFINITY)
}

fn worst(r: &SuiteReport, ids: &[&str]) -> f64 {
    ids.iter().map(|id| residual(r, id)).fold(0.0, f64::max)
}

struct Reports(BTreeMap<&'static str, SuiteReport>);

impl Reports {
    fn get(&self, name: &str) -> &SuiteReport {
        &self.0[name]
    }
}

fn metallic_numbers() -> Verdict {
    let s13 = 13f64.sqrt();
    let cases = [
        ("golden", 1.0, 1.0, (1.0 + 5f64.sqrt()) / 2.0),
        ("silver", 2.0, 1.0, 1.0 + 2f64.sqrt()),
        ("bronze", 3.0, 1.0, (3.0 + s13) / 2.0),
        ("copper", 1.0, 2.0, 2.0),
        ("nickel", 1.0, 3.0, (1.0 + s13) / 2.0),
    ];
    let err = cases
        .iter()
        .map(|(_, p, q, v)| (metallic_number(*p, *q).unwrap() - v).abs())
        .fold(0.0, f64::max);
    verdict(1, "metallic numbers", err <= 1e-12, format!("max |error| {err:.1e} <= 1e-12 over 5 members"))
}

fn random_pairs() -> Vec<(usize, MetallicParams, metallic_lab::metallic::RandomPair)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let family = [MetallicParams::GOLDEN, MetallicParams::SILVER, MetallicParams::COPPER, MetallicParams::new(3.0, 1.0)];
    let mut out = Vec::new();
    for n in 2..=4 {
        for k in 0..100 {
            let p = family[k % family.len()];
            out.push((n, p, random_compatible_pair(n, p, &mut rng).unwrap()));
        }
    }
    out
}

fn algebraic_identities(pairs: &[(usize, MetallicParams, metallic_lab::metallic::RandomPair)]) -> Verdict {
    let mut err = 0.0_f64;
    for (_, p, rp) in pairs {
        let jm = build_jm(&rp.j, &rp.g, 1e-9).unwrap();
        let jp = build_jp(&rp.j, &rp.g, 1e-9).unwrap();
        let jc = build_jc(&rp.j, &rp.g, 1e-9).unwrap();
        let anti = (jc.matrix() * jp.matrix() + jp.matrix() * jc.matrix()).amax();
        err = err
            .max(jm.metallic_residual(*p))
            .max(jp.square_residual(1.0))
            .max(jc.square_residual(-1.0))
            .max(anti);
    }
    verdict(
        2,
        "generalized structure identities",
        err <= 1e-10,
        format!("max residual {err:.1e} <= 1e-10 over {} pairs, n in 2..=4", pairs.len()),
    )
}

fn neutral_signature(pairs: &[(usize, MetallicParams, metallic_lab::metallic::RandomPair)]) -> Verdict {
    let mut bad = 0;
    for (n, _, rp) in pairs {
        let jp = build_jp(&rp.j, &rp.g, 1e-9).unwrap();
        if neutral_metric_g(&jp).map(|m| m.signature) != Ok((*n, *n)) {
            bad += 1;
        }
    }
    verdict(3, "neutral metric signature", bad == 0, format!("{bad} of {} pairs off (n, n)", pairs.len()))
}

fn calibration(pairs: &[(usize, MetallicParams, metallic_lab::metallic::RandomPair)]) -> Verdict {
    let mut worst_anti = 0.0_f64;
    let mut worst_cal = 0.0_f64;
    let mut ok = true;
    for (_, _, rp) in pairs {
        let a = check_anti_pseudo_calibrated(&build_jp(&rp.j, &rp.g, 1e-9).unwrap(), 1e-10);
        let c = check_calibrated(&build_jc(&rp.j, &rp.g, 1e-9).unwrap(), 1e-10);
        ok &= a.passed && c.passed;
        worst_anti = worst_anti.max(a.residual_or_inf());
        worst_cal = worst_cal.max(c.residual_or_inf());
    }
    verdict(
        4,
        "calibration",
        ok,
        format!("J_p anti-invariance {worst_anti:.1e}, J_c invariance {worst_cal:.1e}, positivity held: {ok}"),
    )
}

fn covariant_nijenhuis(reports: &Reports) -> Verdict {
    let r = reports.get("sphere-diagJ");
    let lc = residual(r, "genconn.nijenhuis_covariant");
    let kd = residual(r, "karaman.nijenhuis_covariant");
    verdict(
        5,
        "covariant Nijenhuis identity",
        lc <= 1e-8 && kd <= 1e-8,
        format!("sphere-diagJ Levi-Civita {lc:.1e}, Karaman {kd:.1e} <= 1e-8"),
    )
}

fn karaman_random_forms() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut base: serde_json::Value = serde_json::from_str(&scenario_text("product-decomposable")).unwrap();
    base["suites"] = serde_json::json!(["karaman"]);
    base["expect"] = serde_json::json!({});
    let ids = [
        "karaman.metric",
        "karaman.torsion_formula",
        "karaman.torsion_j_linear",
        "karaman.phi_torsion",
        "karaman.gen_nijenhuis_jm",
    ];
    let mut err = 0.0_f64;
    for _ in 0..20 {
        let mut c = || rng.gen_range(-1.0..1.0);
        let omega = [
            format!("{:.6} + {:.6}*x2", c(), c()),
            format!("{:.6}*x1 + {:.6}*sin(x3)", c(), c()),
            format!("{:.6} + {:.6}*x1*x2", c(), c()),
        ];
        base["omega"] = serde_json::json!(omega);
        let r = run_suites(&scenario_from_str(&base.to_string()).unwrap());
        err = err.max(worst(&r, &ids));
    }
    verdict(
        6,
        "Karaman connection",
        err <= 1e-9,
        format!("product-decomposable, 20 random forms, max residual {err:.1e} <= 1e-9"),
    )
}

fn locally_metallic_integrability(reports: &Reports) -> Verdict {
    let ids = ["genconn.jp_conditions", "genconn.jc_conditions", "genconn.jp_integrable", "genconn.jc_integrable"];
    let a = worst(reports.get("flat-golden"), &ids);
    let b = worst(reports.get("sphere-scalarJ"), &ids);
    verdict(
        7,
        "locally metallic integrability",
        a <= 1e-9 && b <= 1e-9,
        format!("flat-golden {a:.1e}, sphere-scalarJ {b:.1e} <= 1e-9"),
    )
}

fn dhat_parallelism(reports: &Reports) -> Verdict {
    let prod = reports.get("product-decomposable");
    let dhat = worst(prod, &["karaman.dhat_jm", "karaman.dhat_ghat", "karaman.dhat_jp", "karaman.dhat_jc"]);
    let dg = residual(prod, "karaman.metric");
    let tracks = prod.find("karaman.dhat_tracks").unwrap().check.passed;
    let sphere = reports.get("sphere-diagJ");
    let dhat_jm = residual(sphere, "genconn.dhat_jm");
    let lc_dg = residual(sphere, "chart.metric_connection");
    let sphere_tracks = sphere.find("genconn.dhat_tracks").unwrap().check.passed;
    let ok = dhat <= 1e-9 && dg <= 1e-9 && tracks && dhat_jm > 1e-3 && lc_dg <= 1e-9 && sphere_tracks;
    verdict(
        8,
        "generalized parallelism",
        ok,
        format!(
            "product-decomposable Karaman D-hat {dhat:.1e}, Dg {dg:.1e}; sphere-diagJ D-hat J_m {dhat_jm:.1e} (fails), Dg {lc_dg:.1e}"
        ),
    )
}

fn lifted_structures(reports: &Reports) -> Verdict {
    let mut err = 0.0_f64;
    for name in CORPUS {
        let r = reports.get(name);
        for flavor in ["tangent", "cotangent"] {
            for what in ["metallic", "compatible", "frame_horizontal", "frame_vertical", "coordinate_display"] {
                err = err.max(residual(r, &format!("lifts.{flavor}.{what}")));
            }
        }
    }
    let flat = reports.get("flat-golden");
    let n = worst(flat, &["lifts.tangent.nijenhuis_zero", "lifts.cotangent.nijenhuis_zero"]);
    verdict(
        9,
        "lifted structures",
        err <= 1e-9 && n <= 1e-9,
        format!("structure and frame displays {err:.1e} on {} scenarios, flat-golden lifted N {n:.1e} <= 1e-9", CORPUS.len()),
    )
}

fn curvature_convention(reports: &Reports) -> (Verdict, bool) {
    let r = reports.get("sphere-diagJ");
    let mut unique = true;
    let mut parts = Vec::new();
    let mut as_documented = true;
    for flavor in ["tangent", "cotangent"] {
        let rec = &r.curvature_convention[flavor];
        let best = rec.residuals.iter().map(|c| c.residual).fold(f64::INFINITY, f64::min);
        match &rec.resolution {
            Resolution::Unique(c) => parts.push(format!("{flavor} unique {c} ({best:.1e})")),
            Resolution::Ambiguous(v) => {
                unique = false;
                as_documented &= v == &["R^l_{abc}".to_string(), "-R^l_{abc}".to_string()] && best <= 1e-7;
                parts.push(format!("{flavor} ambiguous {{{}}} ({best:.1e})", v.join(", ")));
            }
            Resolution::None => {
                unique = false;
                as_documented = false;
                parts.push(format!("{flavor} unmatched"));
            }
        }
        unique &= best <= 1e-7;
    }
    let w = reports.get("warped-3d");
    let warped: Vec<String> = ["tangent", "cotangent"]
        .iter()
        .map(|f| match &w.curvature_convention[*f].resolution {
            Resolution::Unique(c) => c.clone(),
            other => format!("{other:?}"),
        })
        .collect();
    let detail = format!(
        "sphere-diagJ {}; in dimension 2 the curvature bracket vanishes, so signs cannot be told apart; warped-3d resolves {}",
        parts.join(", "),
        warped.join(" / ")
    );
    (verdict(10, "curvature convention", unique, detail), as_documented)
}

fn commutation(reports: &Reports) -> Verdict {
    let err = CORPUS.iter().map(|n| residual(reports.get(n), "commutation")).fold(0.0, f64::max);
    verdict(11, "commutation", err <= 1e-9, format!("max residual {err:.1e} <= 1e-9 on {} scenarios", CORPUS.len()))
}

fn determinism() -> Verdict {
    let mut same = 0;
    for name in CORPUS {
        let a = emit_report(&run_suites(&load_scenario(path(name)).unwrap()), Format::Machine);
        let b = emit_report(&run_suites(&load_scenario(path(name)).unwrap()), Format::Machine);
        same += usize::from(a == b);
    }
    verdict(
        12,
        "determinism",
        same == CORPUS.len(),
        format!("{same} of {} machine reports byte-identical across runs", CORPUS.len()),
    )
}

#[test]
fn acceptance() {
    let reports = Reports(CORPUS.iter().map(|n| (*n, run_suites(&load_scenario(path(n)).unwrap()))).collect());
    let pairs = random_pairs();
    let (c10, c10_documented) = curvature_convention(&reports);
    let verdicts = vec![
        metallic_numbers(),
        algebraic_identities(&pairs),
        neutral_signature(&pairs),
        calibration(&pairs),
        covariant_nijenhuis(&reports),
        karaman_random_forms(),
        locally_metallic_integrability(&reports),
        dhat_parallelism(&reports),
        lifted_structures(&reports),
        c10,
        commutation(&reports),
        determinism(),
    ];
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err);
    for v in &verdicts {
        let _ = writeln!(err, "{}", v.line);
    }
    let passed = verdicts.iter().filter(|v| v.passed).count();
    let _ = writeln!(err, "acceptance: {passed} of {} criteria pass", verdicts.len());
    drop(err);

    for v in &verdicts {
        if UNATTAINABLE.contains(&v.number) {
            assert!(!v.passed, "criterion {} now passes; drop it from UNATTAINABLE", v.number);
        } else {
            assert!(v.passed, "{}", v.line);
        }
    }
    assert!(c10_documented, "criterion 10 outcome changed: {}", verdicts[9].line);
}
