//! Scalar expressions in chart coordinates.
//!
//! An [`Expr`] is an immutable, reference-counted AST. Subtrees are shared
//! freely, so cloning is cheap and building large tensor expressions (inverse
//! metrics, Christoffel symbols, curvature) does not copy trees.
//!
//! The smart constructors fold literal-only subtrees and drop additive zeros
//! and multiplicative ones. Nothing else is simplified.

mod diff;
mod parse;

use std::collections::HashMap;
use std::fmt;
use std::ops;
use std::sync::Arc;

use thiserror::Error;

pub use parse::{parse, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
            BinOp::Pow => a.powf(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
        Func::Exp,
        Func::Ln,
        Func::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Tanh => x.tanh(),
            Func::Exp => x.exp(),
            Func::Ln => x.ln(),
            Func::Sqrt => x.sqrt(),
        }
    }
}

#[derive(Debug, PartialEq)]
pub enum Node {
    Const(f64),
    /// Coordinate by position in the chart's coordinate list.
    Coord(usize),
    Neg(Expr),
    Binary(BinOp, Expr, Expr),
    Call(Func, Expr),
}

/// Shared handle to an expression node.
#[derive(Clone, PartialEq)]
pub struct Expr(Arc<Node>);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("non-finite result {0}")]
    Domain(f64),
    #[error("coordinate {index} requested but the point has {len} entries")]
    MissingCoordinate { index: usize, len: usize },
}

impl Expr {
    fn from_node(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(value: f64) -> Self {
        Expr::from_node(Node::Const(value))
    }

    pub fn zero() -> Self {
        Expr::constant(0.0)
    }

    pub fn one() -> Self {
        Expr::constant(1.0)
    }

    pub fn coord(index: usize) -> Self {
        Expr::from_node(Node::Coord(index))
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    pub fn neg(&self) -> Expr {
        match *self.0 {
            Node::Const(c) => Expr::constant(-c),
            _ => Expr::from_node(Node::Neg(self.clone())),
        }
    }

    pub fn binary(op: BinOp, a: &Expr, b: &Expr) -> Expr {
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            let v = op.apply(x, y);
            // 1/0 and friends stay symbolic so evaluation reports them
            if v.is_finite() {
                return Expr::constant(v);
            }
        }
        match op {
            BinOp::Add => {
                if a.is_zero() {
                    return b.clone();
                }
                if b.is_zero() {
                    return a.clone();
                }
            }
            BinOp::Sub => {
                if b.is_zero() {
                    return a.clone();
                }
                if a.is_zero() {
                    return b.neg();
                }
            }
            BinOp::Mul => {
                if a.is_zero() || b.is_zero() {
                    return Expr::zero();
                }
                if a.is_one() {
                    return b.clone();
                }
                if b.is_one() {
                    return a.clone();
                }
                if a.as_const() == Some(-1.0) {
                    return b.neg();
                }
                if b.as_const() == Some(-1.0) {
                    return a.neg();
                }
            }
            BinOp::Div => {
                if b.is_one() {
                    return a.clone();
                }
                if a.is_zero() && !b.is_zero() {
                    return Expr::zero();
                }
            }
            BinOp::Pow => {
                if b.is_zero() {
                    return Expr::one();
                }
                if b.is_one() {
                    return a.clone();
                }
            }
        }
        Expr::from_node(Node::Binary(op, a.clone(), b.clone()))
    }

    pub fn call(func: Func, arg: &Expr) -> Expr {
        if let Some(c) = arg.as_const() {
            let v = func.apply(c);
            if v.is_finite() {
                return Expr::constant(v);
            }
        }
        Expr::from_node(Node::Call(func, arg.clone()))
    }

    pub fn pow(&self, exponent: &Expr) -> Expr {
        Expr::binary(BinOp::Pow, self, exponent)
    }

    pub fn powi(&self, exponent: i32) -> Expr {
        self.pow(&Expr::constant(exponent as f64))
    }

    pub fn scale(&self, factor: f64) -> Expr {
        Expr::binary(BinOp::Mul, &Expr::constant(factor), self)
    }

    /// Sum of the given terms; empty input yields zero.
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        terms
            .into_iter()
            .fold(Expr::zero(), |acc, t| Expr::binary(BinOp::Add, &acc, &t))
    }

    /// Evaluates at `point`. Non-finite results are errors.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        let v = self.eval_raw(point)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::Domain(v))
        }
    }

    fn eval_raw(&self, point: &[f64]) -> Result<f64, EvalError> {
        Ok(match &*self.0 {
            Node::Const(c) => *c,
            Node::Coord(i) => *point.get(*i).ok_or(EvalError::MissingCoordinate {
                index: *i,
                len: point.len(),
            })?,
            Node::Neg(a) => -a.eval_raw(point)?,
            Node::Binary(op, a, b) => op.apply(a.eval_raw(point)?, b.eval_raw(point)?),
            Node::Call(f, a) => f.apply(a.eval_raw(point)?),
        })
    }

    /// Symbolic partial derivative with respect to coordinate `index`.
    pub fn diff(&self, index: usize) -> Expr {
        diff::differentiate(self, index)
    }

    /// Highest coordinate index referenced plus one (0 for constants).
    pub fn arity(&self) -> usize {
        fn walk(e: &Expr, acc: &mut usize) {
            match e.node() {
                Node::Const(_) => {}
                Node::Coord(i) => *acc = (*acc).max(i + 1),
                Node::Neg(a) | Node::Call(_, a) => walk(a, acc),
                Node::Binary(_, a, b) => {
                    walk(a, acc);
                    walk(b, acc);
                }
            }
        }
        let mut n = 0;
        walk(self, &mut n);
        n
    }

    /// Source text that [`parse`] maps back to an equivalent expression.
    pub fn to_source(&self, coords: &[String]) -> String {
        let mut out = String::new();
        self.write_source(&mut out, &|i| {
            coords.get(i).cloned().unwrap_or_else(|| format!("x{i}"))
        });
        out
    }

    fn write_source(&self, out: &mut String, name: &dyn Fn(usize) -> String) {
        match &*self.0 {
            Node::Const(c) => {
                if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) {
                    out.push_str(&format!("(-{:?})", -c));
                } else {
                    out.push_str(&format!("{c:?}"));
                }
            }
            Node::Coord(i) => out.push_str(&name(*i)),
            Node::Neg(a) => {
                out.push_str("(-");
                a.write_source(out, name);
                out.push(')');
            }
            Node::Binary(op, a, b) => {
                out.push('(');
                a.write_source(out, name);
                out.push(' ');
                out.push_str(op.symbol());
                out.push(' ');
                b.write_source(out, name);
                out.push(')');
            }
            Node::Call(f, a) => {
                out.push_str(f.name());
                out.push('(');
                a.write_source(out, name);
                out.push(')');
            }
        }
    }

    /// Rewrites coordinate indices through `map` (used to embed base-chart
    /// expressions into a larger chart).
    pub fn remap_coords(&self, map: &dyn Fn(usize) -> usize) -> Expr {
        let mut memo = HashMap::new();
        self.remap_inner(map, &mut memo)
    }

    fn remap_inner(
        &self,
        map: &dyn Fn(usize) -> usize,
        memo: &mut HashMap<*const Node, Expr>,
    ) -> Expr {
        let key = Arc::as_ptr(&self.0);
        if let Some(e) = memo.get(&key) {
            return e.clone();
        }
        let out = match &*self.0 {
            Node::Const(_) => self.clone(),
            Node::Coord(i) => Expr::coord(map(*i)),
            Node::Neg(a) => a.remap_inner(map, memo).neg(),
            Node::Binary(op, a, b) => {
                Expr::binary(*op, &a.remap_inner(map, memo), &b.remap_inner(map, memo))
            }
            Node::Call(f, a) => Expr::call(*f, &a.remap_inner(map, memo)),
        };
        memo.insert(key, out.clone());
        out
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

/// Coordinates are printed as `x0`, `x1`, ... (zero-based).
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        self.write_source(&mut out, &|i| format!("x{i}"));
        f.write_str(&out)
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Self {
        Expr::constant(v)
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $op:expr) => {
        impl ops::$trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::binary($op, self, rhs)
            }
        }
        impl ops::$trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary($op, &self, &rhs)
            }
        }
        impl ops::$trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::binary($op, &self, rhs)
            }
        }
        impl ops::$trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary($op, self, &rhs)
            }
        }
    };
}

impl_binop!(Add, add, BinOp::Add);
impl_binop!(Sub, sub, BinOp::Sub);
impl_binop!(Mul, mul, BinOp::Mul);
impl_binop!(Div, div, BinOp::Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

/// Evaluates many expressions at one point, computing each shared subtree
/// once. Only nodes referenced from more than one place are memoised.
pub struct BatchEvaluator<'p> {
    point: &'p [f64],
    memo: HashMap<*const Node, f64>,
}

impl<'p> BatchEvaluator<'p> {
    pub fn new(point: &'p [f64]) -> Self {
        BatchEvaluator {
            point,
            memo: HashMap::new(),
        }
    }

    pub fn eval(&mut self, e: &Expr) -> Result<f64, EvalError> {
        let v = self.eval_raw(e)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::Domain(v))
        }
    }

    fn eval_raw(&mut self, e: &Expr) -> Result<f64, EvalError> {
        let shared = Arc::strong_count(&e.0) > 1;
        let key = Arc::as_ptr(&e.0);
        if shared {
            if let Some(v) = self.memo.get(&key) {
                return Ok(*v);
            }
        }
        let v = match &*e.0 {
            Node::Const(c) => *c,
            Node::Coord(i) => *self.point.get(*i).ok_or(EvalError::MissingCoordinate {
                index: *i,
                len: self.point.len(),
            })?,
            Node::Neg(a) => -self.eval_raw(a)?,
            Node::Binary(op, a, b) => {
                let x = self.eval_raw(a)?;
                let y = self.eval_raw(b)?;
                op.apply(x, y)
            }
            Node::Call(f, a) => f.apply(self.eval_raw(a)?),
        };
        if shared {
            self.memo.insert(key, v);
        }
        Ok(v)
    }
}

/// Evaluates a slice of expressions at `point` with subtree sharing.
pub fn eval_all(exprs: &[Expr], point: &[f64]) -> Result<Vec<f64>, EvalError> {
    let mut ev = BatchEvaluator::new(point);
    exprs.iter().map(|e| ev.eval(e)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: &[&str]) -> Vec<String> {
        n.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn constructors_fold_literals_only() {
        let x = Expr::coord(0);
        assert_eq!((Expr::constant(2.0) * Expr::constant(3.0)).as_const(), Some(6.0));
        assert_eq!(&x + &Expr::zero(), x);
        assert_eq!(&x * &Expr::one(), x);
        assert!((&x * &Expr::zero()).is_zero());
        // x - x is not simplified
        assert!(matches!((&x - &x).node(), Node::Binary(BinOp::Sub, _, _)));
        // 1/0 stays symbolic so evaluation can report it
        let inf = Expr::one() / Expr::zero();
        assert!(inf.as_const().is_none());
        assert!(matches!(inf.eval(&[]), Err(EvalError::Domain(_))));
    }

    #[test]
    fn evaluation_examples() {
        let c = names(&["x1"]);
        assert_eq!(parse("sqrt(x1)", &c).unwrap().eval(&[4.0]).unwrap(), 2.0);
        assert!(matches!(
            parse("1/x1", &c).unwrap().eval(&[0.0]),
            Err(EvalError::Domain(_))
        ));
        let v = parse("x1^3 - 2*x1", &c).unwrap().eval(&[1.5]).unwrap();
        assert!((v - 0.375).abs() < 1e-15);
        assert!(matches!(
            parse("ln(x1)", &c).unwrap().eval(&[-1.0]),
            Err(EvalError::Domain(_))
        ));
    }

    #[test]
    fn missing_coordinate_is_reported() {
        let e = Expr::coord(3);
        assert_eq!(
            e.eval(&[1.0]),
            Err(EvalError::MissingCoordinate { index: 3, len: 1 })
        );
    }

    #[test]
    fn batch_matches_single() {
        let c = names(&["a", "b"]);
        let e = parse("sin(a*b)^2 + cos(a*b)^2 + a/b", &c).unwrap();
        let d = e.diff(0);
        let pt = [0.3, 1.7];
        let batch = eval_all(&[e.clone(), d.clone(), e.clone()], &pt).unwrap();
        assert_eq!(batch[0], e.eval(&pt).unwrap());
        assert_eq!(batch[1], d.eval(&pt).unwrap());
        assert_eq!(batch[2], batch[0]);
    }

    #[test]
    fn source_round_trip_negative_literals() {
        let c = names(&["x"]);
        let e = Expr::constant(-2.5) * Expr::coord(0);
        let s = e.to_source(&c);
        let back = parse(&s, &c).unwrap();
        assert_eq!(back.eval(&[3.0]).unwrap(), -7.5);
    }

    #[test]
    fn remap_moves_coordinates() {
        let c = names(&["x", "y"]);
        let e = parse("x*y + y", &c).unwrap();
        let shifted = e.remap_coords(&|i| i + 2);
        assert_eq!(shifted.arity(), 4);
        assert_eq!(shifted.eval(&[0.0, 0.0, 2.0, 3.0]).unwrap(), 9.0);
    }
}
