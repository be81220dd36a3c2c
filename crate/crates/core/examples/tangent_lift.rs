//! Lift a metallic pair to the tangent and cotangent bundles and compare the
//! lifted Nijenhuis tensor with the frame formulas.

use metallic_lab::chart::{christoffel, Chart, EndoField, ExprMatrix, MetricField};
use metallic_lab::expr::parse;
use metallic_lab::lifts::{check_lifted_structure, lift_structure, lifted_nijenhuis, lifted_samples, Flavor, FIBRE_BOX};
use metallic_lab::metallic::{from_projection, MetallicParams};

fn main() {
    let names: Vec<String> = ["x1", "x2", "x3"].iter().map(|s| s.to_string()).collect();
    let p = |s: &str| parse(s, &names).unwrap();
    let chart = Chart::new(names.clone(), vec![(-1.0, 1.0); 3], 21).unwrap();
    let base = chart.samples(6);
    let params = MetallicParams::GOLDEN;

    let g = MetricField::diagonal(vec![p("exp(x2*x3)"), p("1 + x1^2"), p("1 + x2^2")]);
    let proj = EndoField::new(ExprMatrix::new(3, 3, ["1", "0", "0", "0", "1", "0", "0", "0", "0"].map(p).to_vec())).unwrap();
    let j = from_projection(&proj, &g, params, &base, 1e-12).unwrap().j;
    let gamma = christoffel(&g, &base).unwrap();
    let pts = lifted_samples(&base, &[FIBRE_BOX; 3], chart.seed());

    for flavor in [Flavor::Tangent, Flavor::Cotangent] {
        let lift = lift_structure(flavor, &g, &j, &gamma).unwrap();
        for r in check_lifted_structure(&lift, params, &pts, 1e-9) {
            println!("{:<28} {:.1e} {}", r.id, r.residual_or_inf(), if r.passed { "pass" } else { "FAIL" });
        }
        let cmp = lifted_nijenhuis(&lift, params, &pts, 1e-8).unwrap();
        for c in &cmp.conventions {
            println!("  {:<12} residual {:.1e}{}", c.convention, c.residual, if c.matches { "  <- matches" } else { "" });
        }
        println!("  resolution: {:?}", cmp.resolution);
    }
}
