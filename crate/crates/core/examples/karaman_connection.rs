//! A semi-symmetric metric connection on a product manifold and its torsion.

use metallic_lab::chart::{covariant_derivative_metric, torsion, Chart, EndoField, ExprMatrix, MetricField, OneFormField};
use metallic_lab::expr::parse;
use metallic_lab::genconn::{karaman_connection, torsion_formula_d};
use metallic_lab::metallic::{from_projection, MetallicParams};

fn main() {
    let names: Vec<String> = ["x1", "x2", "x3"].iter().map(|s| s.to_string()).collect();
    let p = |s: &str| parse(s, &names).unwrap();
    let chart = Chart::new(names.clone(), vec![(0.5, 2.5), (-1.0, 1.0), (-1.0, 1.0)], 4).unwrap();
    let samples = chart.samples(6);
    let params = MetallicParams::GOLDEN;

    let g = MetricField::diagonal(vec![p("1"), p("sin(x1)^2"), p("exp(x3)")]);
    let proj = EndoField::new(ExprMatrix::new(3, 3, ["1", "0", "0", "0", "1", "0", "0", "0", "0"].map(p).to_vec())).unwrap();
    let j = from_projection(&proj, &g, params, &samples, 1e-12).unwrap().j;
    let omega = OneFormField::new(vec![p("0.3"), p("x1"), p("0.5*x2")]);

    let k = karaman_connection(&g, &j, params, &omega, &samples).unwrap();
    let dg = covariant_derivative_metric(&k.d, &g);
    let t = torsion(&k.d);
    for pt in &samples[..3] {
        let tv = t.at(pt).unwrap();
        let closed = torsion_formula_d(&j.eval(pt).unwrap(), params, &omega.eval(pt).unwrap(), &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap();
        let mut diff = 0.0_f64;
        for (c, v) in closed.iter().enumerate() {
            diff = diff.max((tv.get(&[c, 0, 1]) - v).abs());
        }
        println!("{pt:.3?}: |Dg| = {:.1e}, |T(d1, d2) - closed form| = {diff:.1e}", dg.at(pt).unwrap().max_abs());
    }
}
