//! Christoffel symbols and curvature of the round sphere in polar coordinates.

use metallic_lab::chart::{christoffel, riemann, Chart, MetricField};
use metallic_lab::expr::parse;

fn main() {
    let names = vec!["x1".to_string(), "x2".to_string()];
    let chart = Chart::new(names.clone(), vec![(0.5, 2.5), (0.0, 6.0)], 1).unwrap();
    let g = MetricField::diagonal(vec![parse("1", &names).unwrap(), parse("sin(x1)^2", &names).unwrap()]);
    let gamma = christoffel(&g, &chart.samples(8)).unwrap();
    let r = riemann(&gamma);

    for pt in chart.samples(3) {
        let c = gamma.values(&pt).unwrap();
        let rt = r.at(&pt).unwrap();
        println!(
            "x1 = {:.4}: G^1_22 = {:+.6} (-sin cos = {:+.6}), R(d1,d2)d2 . d1 = {:.6} (sin^2 = {:.6})",
            pt[0],
            c.get(&[0, 1, 1]),
            -pt[0].sin() * pt[0].cos(),
            rt.get(&[0, 0, 1, 1]),
            pt[0].sin().powi(2)
        );
    }
    if let Some(sym) = gamma.component(0, 1, 1) {
        println!("symbolic G^1_22 = {}", sym.to_source(&names));
    }
}
