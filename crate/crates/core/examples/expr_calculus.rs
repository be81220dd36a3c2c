//! Parse an expression, differentiate it and evaluate at a point.

use metallic_lab::expr::parse;

fn main() {
    let coords = vec!["x1".to_string(), "x2".to_string()];
    let e = parse("sin(x1)^2 * exp(x2) + ln(x1*x1)", &coords).expect("valid expression");
    let pt = [1.2, -0.3];
    println!("f        = {}", e.to_source(&coords));
    println!("f(pt)    = {:.12}", e.eval(&pt).unwrap());
    for k in 0..2 {
        let d = e.diff(k);
        println!("d{}f      = {}", k + 1, d.to_source(&coords));
        println!("d{}f(pt)  = {:.12}", k + 1, d.eval(&pt).unwrap());
    }
    match parse("sin(x1 +", &coords) {
        Ok(_) => unreachable!(),
        Err(err) => println!("parse error: {err}"),
    }
}
