//! The metallic means and a structure built from a projection.

use metallic_lab::chart::{EndoField, ExprMatrix, MetricField};
use metallic_lab::metallic::{check_metallic, from_projection, metallic_number, product_from_metallic, MetallicParams};
use nalgebra::DMatrix;

fn main() {
    for (name, p, q) in [("golden", 1.0, 1.0), ("silver", 2.0, 1.0), ("bronze", 3.0, 1.0), ("copper", 1.0, 2.0), ("nickel", 1.0, 3.0)] {
        println!("{name:<7} p={p} q={q}  sigma = {:.12}", metallic_number(p, q).unwrap());
    }

    let params = MetallicParams::SILVER;
    let origin = vec![vec![0.0, 0.0, 0.0]];
    let proj = EndoField::constant(&DMatrix::from_diagonal(&nalgebra::dvector![1.0, 0.0, 1.0])).unwrap();
    let g = MetricField::from_upper(&ExprMatrix::identity(3)).unwrap();
    let s = from_projection(&proj, &g, params, &origin, 1e-12).unwrap();
    println!("J from P = diag(1, 0, 1):\n{}", s.j.eval(&origin[0]).unwrap());
    println!("{:?}", check_metallic(&s.j, params, &origin, 1e-12));

    let (f, _) = product_from_metallic(&s.j, params).unwrap();
    let fm = f.eval(&origin[0]).unwrap();
    println!("associated product structure F (F^2 = I):\n{fm}");
}
