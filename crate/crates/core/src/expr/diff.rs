//! Symbolic differentiation.

use std::collections::HashMap;
use std::sync::Arc;

use super::{BinOp, Expr, Func, Node};

pub(super) fn differentiate(e: &Expr, index: usize) -> Expr {
    let mut memo = HashMap::new();
    d(e, index, &mut memo)
}

fn d(e: &Expr, i: usize, memo: &mut HashMap<*const Node, Expr>) -> Expr {
    let key = Arc::as_ptr(&e.0);
    if let Some(hit) = memo.get(&key) {
        return hit.clone();
    }
    let out = match e.node() {
        Node::Const(_) => Expr::zero(),
        Node::Coord(j) => {
            if *j == i {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Neg(a) => d(a, i, memo).neg(),
        Node::Binary(op, a, b) => {
            let da = d(a, i, memo);
            let db = d(b, i, memo);
            match op {
                BinOp::Add => &da + &db,
                BinOp::Sub => &da - &db,
                BinOp::Mul => &(&da * b) + &(a * &db),
                BinOp::Div => {
                    if db.is_zero() {
                        &da / b
                    } else {
                        &(&(&da * b) - &(a * &db)) / &b.powi(2)
                    }
                }
                BinOp::Pow => power_rule(e, a, b, &da, &db),
            }
        }
        Node::Call(f, a) => {
            let da = d(a, i, memo);
            if da.is_zero() {
                Expr::zero()
            } else {
                let outer = match f {
                    Func::Sin => Expr::call(Func::Cos, a),
                    Func::Cos => Expr::call(Func::Sin, a).neg(),
                    Func::Tan => &Expr::one() / &Expr::call(Func::Cos, a).powi(2),
                    Func::Sinh => Expr::call(Func::Cosh, a),
                    Func::Cosh => Expr::call(Func::Sinh, a),
                    Func::Tanh => &Expr::one() - &e.powi(2),
                    Func::Exp => e.clone(),
                    Func::Ln => &Expr::one() / a,
                    Func::Sqrt => &Expr::one() / &e.scale(2.0),
                };
                &outer * &da
            }
        }
    };
    memo.insert(key, out.clone());
    out
}

fn power_rule(e: &Expr, base: &Expr, exponent: &Expr, db: &Expr, de: &Expr) -> Expr {
    if let Some(c) = exponent.as_const() {
        // c * base^(c-1) * base'
        let lowered = base.pow(&Expr::constant(c - 1.0));
        return &lowered.scale(c) * db;
    }
    if de.is_zero() && db.is_zero() {
        return Expr::zero();
    }
    if db.is_zero() {
        // base^e * ln(base) * e'
        return &(e * &Expr::call(Func::Ln, base)) * de;
    }
    // base^e * (e' ln(base) + e base'/base)
    let inner = &(de * &Expr::call(Func::Ln, base)) + &(&(exponent * db) / base);
    e * &inner
}

#[cfg(test)]
mod tests {
    use crate::expr::parse;

    fn names(n: &[&str]) -> Vec<String> {
        n.iter().map(|s| s.to_string()).collect()
    }

    fn central(f: &crate::expr::Expr, pt: &[f64], i: usize, h: f64) -> f64 {
        let mut a = pt.to_vec();
        let mut b = pt.to_vec();
        a[i] += h;
        b[i] -= h;
        (f.eval(&a).unwrap() - f.eval(&b).unwrap()) / (2.0 * h)
    }

    #[test]
    fn sin_squared_at_quarter_pi() {
        let e = parse("sin(x1)^2", &names(&["x1", "x2"])).unwrap();
        let v = e.diff(0).eval(&[std::f64::consts::FRAC_PI_4, 0.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unrelated_coordinate_gives_zero() {
        let e = parse("x1", &names(&["x1", "x2"])).unwrap();
        assert!(e.diff(1).is_zero());
    }

    #[test]
    fn log_of_square_matches_finite_difference() {
        let e = parse("ln(x1*x1)", &names(&["x1"])).unwrap();
        let sym = e.diff(0).eval(&[3.0]).unwrap();
        let fd = central(&e, &[3.0], 0, 1e-5);
        assert!((sym - 2.0 / 3.0).abs() < 1e-15);
        assert!((sym - fd).abs() < 1e-8);
    }

    #[test]
    fn every_function_against_finite_differences() {
        let n = names(&["x", "y"]);
        let cases = [
            "sin(x*y)",
            "cos(x)^3",
            "tan(x/2)",
            "sinh(x) - cosh(y)",
            "tanh(x*y)",
            "exp(-x^2)",
            "ln(1 + x^2)",
            "sqrt(x + y)",
            "x^y",
            "2^x",
            "(x + 1)/(y*y + 1)",
            "-(x^2.5)",
        ];
        let pt = [0.7, 1.3];
        for src in cases {
            let e = parse(src, &n).unwrap();
            for i in 0..2 {
                let sym = e.diff(i).eval(&pt).unwrap();
                let h = 1e-5;
                // one Richardson step on the central difference
                let rich = (4.0 * central(&e, &pt, i, h / 2.0) - central(&e, &pt, i, h)) / 3.0;
                assert!(
                    (sym - rich).abs() <= 1e-6 * sym.abs().max(1.0),
                    "{src} d/d{i}: {sym} vs {rich}"
                );
            }
        }
    }

    #[test]
    fn constant_exponent_derivative_is_compact() {
        let e = parse("x^2", &names(&["x"])).unwrap();
        assert_eq!(e.diff(0).to_string(), "(2.0 * x0)");
    }
}
