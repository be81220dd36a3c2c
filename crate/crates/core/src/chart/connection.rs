//! Connection coefficients, curvature and torsion.

use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{MetricField, Tensor};
use crate::error::{Error, Result};
use crate::expr::{eval_all, Expr};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConnectionKind {
    LeviCivita,
    Karaman,
    UserSupplied,
}

#[derive(Clone)]
enum Repr {
    Symbolic(Vec<Expr>),
    /// Levi-Civita coefficients assembled per point from metric jets; used
    /// where a symbolic inverse metric is too large.
    Pointwise {
        g: MetricField,
        dg: Vec<Expr>,
        ddg: Vec<Expr>,
    },
}

/// Linear connection `Γ^k_{ij}` on a chart.
#[derive(Clone)]
pub struct ConnectionField {
    n: usize,
    kind: ConnectionKind,
    symmetric: bool,
    repr: Repr,
    derivs: Arc<OnceLock<Vec<Expr>>>,
}

impl fmt::Debug for ConnectionField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConnectionField")
            .field("n", &self.n)
            .field("kind", &self.kind)
            .field("symmetric", &self.symmetric)
            .field("symbolic", &self.symbolic().is_some())
            .finish()
    }
}

impl ConnectionField {
    /// Coefficients indexed `[k][i][j]`, flattened.
    pub fn from_components(n: usize, comps: Vec<Expr>, kind: ConnectionKind) -> Result<Self> {
        if comps.len() != n * n * n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} connection coefficients, got {}",
                n * n * n,
                comps.len()
            )));
        }
        let mut symmetric = true;
        'outer: for k in 0..n {
            for i in 0..n {
                for j in (i + 1)..n {
                    if comps[(k * n + i) * n + j] != comps[(k * n + j) * n + i] {
                        symmetric = false;
                        break 'outer;
                    }
                }
            }
        }
        Ok(ConnectionField {
            n,
            kind,
            symmetric,
            repr: Repr::Symbolic(comps),
            derivs: Arc::default(),
        })
    }

    /// The flat connection `Γ = 0`.
    pub fn flat(n: usize) -> Self {
        ConnectionField::from_components(n, vec![Expr::zero(); n * n * n], ConnectionKind::UserSupplied)
            .expect("shape")
    }

    /// Levi-Civita connection evaluated per point (no symbolic inverse).
    pub fn levi_civita_pointwise(g: &MetricField) -> Self {
        let n = g.dim();
        let mut dg = Vec::with_capacity(n * n * n);
        for m in 0..n {
            for i in 0..n {
                for j in 0..n {
                    dg.push(g.get(i, j).diff(m));
                }
            }
        }
        let mut ddg = Vec::with_capacity(n * n * n * n);
        for a in 0..n {
            for m in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        ddg.push(dg[(m * n + i) * n + j].diff(a));
                    }
                }
            }
        }
        ConnectionField {
            n,
            kind: ConnectionKind::LeviCivita,
            symmetric: true,
            repr: Repr::Pointwise {
                g: g.clone(),
                dg,
                ddg,
            },
            derivs: Arc::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> ConnectionKind {
        self.kind
    }

    /// True when `Γ^k_{ij}` and `Γ^k_{ji}` are the same expression.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn symbolic(&self) -> Option<&[Expr]> {
        match &self.repr {
            Repr::Symbolic(c) => Some(c),
            Repr::Pointwise { .. } => None,
        }
    }

    pub fn component(&self, k: usize, i: usize, j: usize) -> Option<&Expr> {
        self.symbolic().map(|c| &c[(k * self.n + i) * self.n + j])
    }

    pub(crate) fn require_symbolic(&self) -> Result<&[Expr]> {
        self.symbolic().ok_or(Error::SymbolicConnectionRequired)
    }

    /// `self + difference`, where `difference` is a (1,2) tensor `[k][i][j]`.
    pub fn add_tensor(&self, difference: &[Expr], kind: ConnectionKind) -> Result<Self> {
        let base = self.require_symbolic()?;
        if difference.len() != base.len() {
            return Err(Error::DimensionMismatch("difference tensor size".into()));
        }
        let comps = base.iter().zip(difference).map(|(a, b)| a + b).collect();
        ConnectionField::from_components(self.n, comps, kind)
    }

    fn symbolic_derivs(&self, comps: &[Expr]) -> &[Expr] {
        self.derivs.get_or_init(|| {
            (0..self.n)
                .flat_map(|m| comps.iter().map(move |c| c.diff(m)))
                .collect()
        })
    }

    /// `Γ^k_{ij}` at the point, indexed `[k][i][j]`.
    pub fn values(&self, point: &[f64]) -> Result<Tensor> {
        let n = self.n;
        match &self.repr {
            Repr::Symbolic(c) => {
                let v = eval_all(c, point).map_err(|e| Error::eval(point, e))?;
                Ok(Tensor::from_vec(n, 3, v))
            }
            Repr::Pointwise { g, dg, .. } => {
                let (ginv, dgv) = metric_jet1(g, dg, point)?;
                Ok(levi_civita_from_jet(n, &ginv, &dgv))
            }
        }
    }

    /// `(Γ, ∂Γ)` with `∂Γ` indexed `[m][k][i][j]` for `∂_m Γ^k_{ij}`.
    pub fn jet(&self, point: &[f64]) -> Result<(Tensor, Tensor)> {
        let n = self.n;
        match &self.repr {
            Repr::Symbolic(c) => {
                let d = self.symbolic_derivs(c);
                let v = eval_all(c, point).map_err(|e| Error::eval(point, e))?;
                let dv = eval_all(d, point).map_err(|e| Error::eval(point, e))?;
                Ok((Tensor::from_vec(n, 3, v), Tensor::from_vec(n, 4, dv)))
            }
            Repr::Pointwise { g, dg, ddg } => {
                let (ginv, dgv) = metric_jet1(g, dg, point)?;
                let ddgv = eval_all(ddg, point).map_err(|e| Error::eval(point, e))?;
                let gamma = levi_civita_from_jet(n, &ginv, &dgv);
                // first-kind symbols and their derivatives
                let first = |l: usize, i: usize, j: usize| {
                    0.5 * (dgv[(i * n + j) * n + l] + dgv[(j * n + i) * n + l] - dgv[(l * n + i) * n + j])
                };
                let dfirst = |a: usize, l: usize, i: usize, j: usize| {
                    let dd = |m: usize, p: usize, q: usize| ddgv[((a * n + m) * n + p) * n + q];
                    0.5 * (dd(i, j, l) + dd(j, i, l) - dd(l, i, j))
                };
                let mut dgamma = Tensor::zeros(n, 4);
                for a in 0..n {
                    // ∂_a g^{kl} = -g^{kb} ∂_a g_{bc} g^{cl}
                    let dga = DMatrix::from_fn(n, n, |b, c| dgv[(a * n + b) * n + c]);
                    let dginv = -(&ginv * dga * &ginv);
                    for k in 0..n {
                        for i in 0..n {
                            for j in 0..n {
                                let mut s = 0.0;
                                for l in 0..n {
                                    s += dginv[(k, l)] * first(l, i, j) + ginv[(k, l)] * dfirst(a, l, i, j);
                                }
                                dgamma.set(&[a, k, i, j], s);
                            }
                        }
                    }
                }
                Ok((gamma, dgamma))
            }
        }
    }
}

fn metric_jet1(g: &MetricField, dg: &[Expr], point: &[f64]) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let gv = g.eval(point)?;
    let det = gv.determinant();
    let ginv = gv.try_inverse().ok_or(Error::SingularMetric {
        point: point.to_vec(),
        det,
    })?;
    let dgv = eval_all(dg, point).map_err(|e| Error::eval(point, e))?;
    Ok((ginv, dgv))
}

fn levi_civita_from_jet(n: usize, ginv: &DMatrix<f64>, dgv: &[f64]) -> Tensor {
    let mut t = Tensor::zeros(n, 3);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    let first = 0.5
                        * (dgv[(i * n + j) * n + l] + dgv[(j * n + i) * n + l] - dgv[(l * n + i) * n + j]);
                    s += ginv[(k, l)] * first;
                }
                t.set(&[k, i, j], s);
            }
        }
    }
    t
}

/// Levi-Civita connection of `g`.
///
/// For `n <= 4` the coefficients are symbolic, built from the adjugate
/// inverse; for `n = 5, 6` they are assembled per point.
pub fn christoffel(g: &MetricField, samples: &[Vec<f64>]) -> Result<ConnectionField> {
    g.check_nonsingular(samples)?;
    let n = g.dim();
    if n > 4 {
        return Ok(ConnectionField::levi_civita_pointwise(g));
    }
    let ginv = g.inverse()?;
    let dg = |m: usize, i: usize, j: usize| g.get(i, j).diff(m);
    // Γ_{lij}, shared between (i, j) and (j, i)
    let mut comps = vec![Expr::zero(); n * n * n];
    for i in 0..n {
        for j in i..n {
            let first: Vec<Expr> = (0..n)
                .map(|l| (&(&dg(i, j, l) + &dg(j, i, l)) - &dg(l, i, j)).scale(0.5))
                .collect();
            for k in 0..n {
                let v = Expr::sum((0..n).map(|l| ginv.get(k, l) * &first[l]));
                comps[(k * n + i) * n + j] = v.clone();
                comps[(k * n + j) * n + i] = v;
            }
        }
    }
    ConnectionField::from_components(n, comps, ConnectionKind::LeviCivita)
}

/// Curvature `R^l_{ijk}` from `Γ` and `∂Γ` at a point.
pub fn riemann_from_jet(gamma: &Tensor, dgamma: &Tensor) -> Tensor {
    let n = gamma.dim();
    let mut r = Tensor::zeros(n, 4);
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut v = dgamma.get(&[i, l, j, k]) - dgamma.get(&[j, l, i, k]);
                    for s in 0..n {
                        v += gamma.get(&[l, i, s]) * gamma.get(&[s, j, k])
                            - gamma.get(&[l, j, s]) * gamma.get(&[s, i, k]);
                    }
                    r.set(&[l, i, j, k], v);
                }
            }
        }
    }
    r
}

/// Curvature tensor field of a connection.
#[derive(Clone, Debug)]
pub struct CurvatureField {
    gamma: ConnectionField,
    exprs: Option<Vec<Expr>>,
}

impl CurvatureField {
    /// Symbolic components `[l][i][j][k]` when the connection is symbolic.
    pub fn symbolic(&self) -> Option<&[Expr]> {
        self.exprs.as_deref()
    }

    pub fn at(&self, point: &[f64]) -> Result<Tensor> {
        match &self.exprs {
            Some(e) => {
                let n = self.gamma.dim();
                let v = eval_all(e, point).map_err(|err| Error::eval(point, err))?;
                Ok(Tensor::from_vec(n, 4, v))
            }
            None => self.at_via_jet(point),
        }
    }

    /// Evaluates through numeric `Γ`, `∂Γ` regardless of representation.
    pub fn at_via_jet(&self, point: &[f64]) -> Result<Tensor> {
        let (g, dg) = self.gamma.jet(point)?;
        Ok(riemann_from_jet(&g, &dg))
    }
}

pub fn riemann(gamma: &ConnectionField) -> CurvatureField {
    let exprs = gamma.symbolic().map(|c| {
        let n = gamma.dim();
        let at = |k: usize, i: usize, j: usize| &c[(k * n + i) * n + j];
        let mut out = Vec::with_capacity(n.pow(4));
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut v = &at(l, j, k).diff(i) - &at(l, i, k).diff(j);
                        for s in 0..n {
                            v = &v + &(at(l, i, s) * at(s, j, k));
                            v = &v - &(at(l, j, s) * at(s, i, k));
                        }
                        out.push(v);
                    }
                }
            }
        }
        out
    });
    CurvatureField {
        gamma: gamma.clone(),
        exprs,
    }
}

/// Torsion `T^k_{ij} = Γ^k_{ij} − Γ^k_{ji}`.
#[derive(Clone, Debug)]
pub struct TorsionField {
    gamma: ConnectionField,
}

impl TorsionField {
    pub fn at(&self, point: &[f64]) -> Result<Tensor> {
        let g = self.gamma.values(point)?;
        Ok(torsion_from_values(&g))
    }
}

pub(crate) fn torsion_from_values(g: &Tensor) -> Tensor {
    let n = g.dim();
    let mut t = Tensor::zeros(n, 3);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                t.set(&[k, i, j], g.get(&[k, i, j]) - g.get(&[k, j, i]));
            }
        }
    }
    t
}

pub fn torsion(gamma: &ConnectionField) -> TorsionField {
    TorsionField {
        gamma: gamma.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{Chart, ExprMatrix};
    use crate::expr::parse;

    fn names() -> Vec<String> {
        vec!["x1".into(), "x2".into()]
    }

    fn metric(diag: [&str; 2]) -> MetricField {
        MetricField::diagonal(diag.iter().map(|s| parse(s, &names()).unwrap()).collect())
    }

    fn samples() -> Vec<Vec<f64>> {
        Chart::new(names(), vec![(0.4, 2.6), (-3.0, 3.0)], 11)
            .unwrap()
            .samples(20)
    }

    /// Central-difference Koszul formula with a numerically inverted metric.
    fn koszul_oracle(g: &MetricField, pt: &[f64]) -> Tensor {
        let n = g.dim();
        let h = 1e-5;
        let dg: Vec<DMatrix<f64>> = (0..n)
            .map(|m| {
                let mut a = pt.to_vec();
                let mut b = pt.to_vec();
                a[m] += h;
                b[m] -= h;
                (g.eval(&a).unwrap() - g.eval(&b).unwrap()) / (2.0 * h)
            })
            .collect();
        let ginv = g.eval(pt).unwrap().try_inverse().unwrap();
        let mut t = Tensor::zeros(n, 3);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let s: f64 = (0..n)
                        .map(|l| {
                            ginv[(k, l)] * 0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)])
                        })
                        .sum();
                    t.set(&[k, i, j], s);
                }
            }
        }
        t
    }

    #[test]
    fn identity_metric_is_flat() {
        let g = MetricField::identity(3);
        let s = vec![vec![0.1, 0.2, 0.3]];
        let gamma = christoffel(&g, &s).unwrap();
        assert!(gamma.symbolic().unwrap().iter().all(Expr::is_zero));
        assert_eq!(riemann(&gamma).at(&s[0]).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn polar_plane_symbols() {
        let g = metric(["1", "x1^2"]);
        let gamma = christoffel(&g, &samples()).unwrap();
        let curv = riemann(&gamma);
        for pt in samples() {
            let v = gamma.values(&pt).unwrap();
            assert!((v.get(&[0, 1, 1]) + pt[0]).abs() < 1e-14);
            assert!((v.get(&[1, 0, 1]) - 1.0 / pt[0]).abs() < 1e-14);
            assert!(v.max_abs_diff(&koszul_oracle(&g, &pt)) < 1e-8);
            assert!(curv.at(&pt).unwrap().max_abs() <= 1e-9);
        }
    }

    #[test]
    fn sphere_symbols_and_curvature() {
        let g = metric(["1", "sin(x1)^2"]);
        let gamma = christoffel(&g, &samples()).unwrap();
        let curv = riemann(&gamma);
        for pt in samples() {
            let (s, c) = (pt[0].sin(), pt[0].cos());
            let v = gamma.values(&pt).unwrap();
            assert!((v.get(&[0, 1, 1]) + s * c).abs() < 1e-14);
            assert!((v.get(&[1, 0, 1]) - c / s).abs() < 1e-13);
            assert!(v.max_abs_diff(&koszul_oracle(&g, &pt)) < 1e-8);
            let r = curv.at(&pt).unwrap();
            // R(∂1,∂2)∂2 = sin²x1 ∂1 for the round sphere in this convention
            assert!((r.get(&[0, 0, 1, 1]) - s * s).abs() < 1e-12);
            assert!((r.get(&[0, 1, 0, 1]) + s * s).abs() < 1e-12);
            assert!(r.max_abs_diff(&curv.at_via_jet(&pt).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn pointwise_route_agrees_with_symbolic() {
        let n3: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        let m = ExprMatrix::from_fn(3, 3, |i, j| {
            let src = [
                ["2 + a^2", "0.3*b", "0.1"],
                ["0.3*b", "1 + exp(c)", "a*b/4"],
                ["0.1", "a*b/4", "3 + sin(a)"],
            ][i][j];
            parse(src, &n3).unwrap()
        });
        let g = MetricField::from_upper(&m).unwrap();
        let pt = [0.3, -0.4, 0.2];
        let sym = christoffel(&g, &[pt.to_vec()]).unwrap();
        let pw = ConnectionField::levi_civita_pointwise(&g);
        let (a, da) = sym.jet(&pt).unwrap();
        let (b, db) = pw.jet(&pt).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-13);
        assert!(da.max_abs_diff(&db) < 1e-12);
        let ra = riemann(&sym).at(&pt).unwrap();
        let rb = riemann(&pw).at(&pt).unwrap();
        assert!(ra.max_abs_diff(&rb) < 1e-12);
    }

    #[test]
    fn five_dimensional_metric_uses_pointwise_route() {
        let n5: Vec<String> = (1..=5).map(|i| format!("x{i}")).collect();
        let g = MetricField::diagonal(
            (0..5)
                .map(|i| parse(&format!("1 + x{}^2", i + 1), &n5).unwrap())
                .collect(),
        );
        let pt = vec![0.1, 0.2, 0.3, 0.4, 0.5];
        let gamma = christoffel(&g, &[pt.clone()]).unwrap();
        assert!(gamma.symbolic().is_none());
        let v = gamma.values(&pt).unwrap();
        // Γ^i_{ii} = x_i / (1 + x_i²) for this diagonal metric
        for i in 0..5 {
            let x = pt[i];
            assert!((v.get(&[i, i, i]) - x / (1.0 + x * x)).abs() < 1e-14);
        }
        assert!(torsion(&gamma).at(&pt).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn user_torsion_example() {
        let n = 2;
        let mut comps = vec![Expr::zero(); 8];
        comps[(0 * n + 0) * n + 1] = Expr::one(); // Γ^1_{12} = 1
        let gamma = ConnectionField::from_components(n, comps, ConnectionKind::UserSupplied).unwrap();
        assert!(!gamma.is_symmetric());
        let t = torsion(&gamma).at(&[0.0, 0.0]).unwrap();
        assert_eq!(t.get(&[0, 0, 1]), 1.0);
        assert_eq!(t.get(&[0, 1, 0]), -1.0);
    }

    #[test]
    fn singular_metric_is_rejected() {
        let g = metric(["1", "sin(x1)^2"]);
        let err = christoffel(&g, &[vec![0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::SingularMetric { .. }));
    }
}
