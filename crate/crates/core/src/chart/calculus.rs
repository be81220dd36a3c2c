//! Covariant derivatives, Lie brackets and the Nijenhuis tensor.

use nalgebra::DMatrix;

use super::connection::torsion_from_values;
use super::{ConnectionField, EndoField, MetricField, OneFormField, Tensor, VectorField};
use crate::error::{Error, Result};
use crate::expr::{eval_all, Expr};

fn eval(exprs: &[Expr], point: &[f64]) -> Result<Vec<f64>> {
    eval_all(exprs, point).map_err(|e| Error::eval(point, e))
}

/// `(∇_k J)^i_j`, indexed `[k][i][j]`.
#[derive(Clone, Debug)]
pub struct EndoDerivative {
    gamma: ConnectionField,
    j: Vec<Expr>,
    dj: Vec<Expr>,
}

pub fn covariant_derivative_endo(gamma: &ConnectionField, j: &EndoField) -> EndoDerivative {
    let n = j.dim();
    let comps = j.matrix().entries().to_vec();
    let dj = (0..n).flat_map(|k| comps.iter().map(move |e| e.diff(k))).collect();
    EndoDerivative {
        gamma: gamma.clone(),
        j: comps,
        dj,
    }
}

impl EndoDerivative {
    pub fn at(&self, point: &[f64]) -> Result<Tensor> {
        let n = self.gamma.dim();
        let jv = eval(&self.j, point)?;
        let dj = eval(&self.dj, point)?;
        let g = self.gamma.values(point)?;
        Ok(endo_derivative_from_values(n, &jv, &dj, &g))
    }
}

pub(crate) fn endo_derivative_from_values(n: usize, jv: &[f64], dj: &[f64], g: &Tensor) -> Tensor {
    let mut t = Tensor::from_vec(n, 3, dj.to_vec());
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut v = 0.0;
                for s in 0..n {
                    v += g.get(&[i, k, s]) * jv[s * n + j] - g.get(&[s, k, j]) * jv[i * n + s];
                }
                t.add_at(&[k, i, j], v);
            }
        }
    }
    t
}

/// `(∇_k g)_{ij}`, indexed `[k][i][j]`.
#[derive(Clone, Debug)]
pub struct MetricDerivative {
    gamma: ConnectionField,
    g: MetricField,
    dg: Vec<Expr>,
}

pub fn covariant_derivative_metric(gamma: &ConnectionField, g: &MetricField) -> MetricDerivative {
    let n = g.dim();
    let mut dg = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                dg.push(g.get(i, j).diff(k));
            }
        }
    }
    MetricDerivative {
        gamma: gamma.clone(),
        g: g.clone(),
        dg,
    }
}

impl MetricDerivative {
    pub fn at(&self, point: &[f64]) -> Result<Tensor> {
        let n = self.g.dim();
        let gv = self.g.eval(point)?;
        let mut t = Tensor::from_vec(n, 3, eval(&self.dg, point)?);
        let c = self.gamma.values(point)?;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut v = 0.0;
                    for s in 0..n {
                        v += c.get(&[s, k, i]) * gv[(s, j)] + c.get(&[s, k, j]) * gv[(i, s)];
                    }
                    t.add_at(&[k, i, j], -v);
                }
            }
        }
        Ok(t)
    }
}

/// `(∇_k α)_i`, indexed `[k][i]`.
#[derive(Clone, Debug)]
pub struct OneFormDerivative {
    gamma: ConnectionField,
    alpha: Vec<Expr>,
    dalpha: Vec<Expr>,
}

pub fn covariant_derivative_oneform(gamma: &ConnectionField, alpha: &OneFormField) -> OneFormDerivative {
    let n = alpha.dim();
    let dalpha = (0..n)
        .flat_map(|k| alpha.comps.iter().map(move |a| a.diff(k)))
        .collect();
    OneFormDerivative {
        gamma: gamma.clone(),
        alpha: alpha.comps.clone(),
        dalpha,
    }
}

impl OneFormDerivative {
    pub fn at(&self, point: &[f64]) -> Result<Tensor> {
        let n = self.alpha.len();
        let a = eval(&self.alpha, point)?;
        let mut t = Tensor::from_vec(n, 2, eval(&self.dalpha, point)?);
        let c = self.gamma.values(point)?;
        for k in 0..n {
            for i in 0..n {
                let v: f64 = (0..n).map(|s| c.get(&[s, k, i]) * a[s]).sum();
                t.add_at(&[k, i], -v);
            }
        }
        Ok(t)
    }
}

/// `[X, Y]^i = X^k ∂_k Y^i − Y^k ∂_k X^i`.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> VectorField {
    VectorField::new(bracket(&x.comps, &y.comps))
}

pub(crate) fn bracket(x: &[Expr], y: &[Expr]) -> Vec<Expr> {
    let n = x.len();
    (0..n)
        .map(|i| {
            Expr::sum((0..n).flat_map(|k| {
                [&x[k] * &y[i].diff(k), (&y[k] * &x[i].diff(k)).neg()]
            }))
        })
        .collect()
}

/// `N^k_{ij}`, the Nijenhuis tensor on coordinate fields.
#[derive(Clone, Debug)]
pub struct NijenhuisField {
    n: usize,
    exprs: Vec<Expr>,
}

impl NijenhuisField {
    pub fn symbolic(&self) -> &[Expr] {
        &self.exprs
    }

    pub fn at(&self, point: &[f64]) -> Result<Tensor> {
        Ok(Tensor::from_vec(self.n, 3, eval(&self.exprs, point)?))
    }
}

/// `N(∂_i, ∂_j) = [J∂_i, J∂_j] − J[J∂_i, ∂_j] − J[∂_i, J∂_j] + J²[∂_i, ∂_j]`,
/// each bracket taken literally.
pub fn nijenhuis(j: &EndoField) -> NijenhuisField {
    let n = j.dim();
    let m = j.matrix();
    let j2 = m.mul(m);
    // columns J∂_i and coordinate fields, each differentiated once
    let cols: Vec<Jet> = (0..n).map(|i| Jet::new(m.column(i))).collect();
    let basis: Vec<Jet> = (0..n).map(|i| Jet::new(VectorField::coordinate(n, i).comps)).collect();
    let mut per_pair = vec![Vec::new(); n * n];
    for i in 0..n {
        for jj in 0..n {
            let a = cols[i].bracket(&cols[jj]);
            let b = m.mul_vec(&cols[i].bracket(&basis[jj]));
            let c = m.mul_vec(&basis[i].bracket(&cols[jj]));
            let d = j2.mul_vec(&basis[i].bracket(&basis[jj]));
            per_pair[i * n + jj] = (0..n).map(|k| &(&(&a[k] - &b[k]) - &c[k]) + &d[k]).collect();
        }
    }
    let mut exprs = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for i in 0..n {
            for jj in 0..n {
                exprs.push(per_pair[i * n + jj][k].clone());
            }
        }
    }
    NijenhuisField { n, exprs }
}

/// Vector field with its partials `d[k][i] = ∂_k X^i`.
struct Jet {
    v: Vec<Expr>,
    d: Vec<Vec<Expr>>,
}

impl Jet {
    fn new(v: Vec<Expr>) -> Self {
        let d = (0..v.len()).map(|k| v.iter().map(|e| e.diff(k)).collect()).collect();
        Jet { v, d }
    }

    fn bracket(&self, other: &Jet) -> Vec<Expr> {
        let n = self.v.len();
        (0..n)
            .map(|i| {
                Expr::sum((0..n).flat_map(|k| {
                    [&self.v[k] * &other.d[k][i], (&other.v[k] * &self.d[k][i]).neg()]
                }))
            })
            .collect()
    }
}

/// `T(X, Y)^k = T^k_{ab} X^a Y^b`.
pub fn apply_torsion(t: &Tensor, x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.dim();
    (0..n)
        .map(|k| {
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    s += t.get(&[k, a, b]) * x[a] * y[b];
                }
            }
            s
        })
        .collect()
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

/// `Φ(T)(X, Y) = −T(JX, JY) + J T(JX, Y) + J T(X, JY) − J² T(X, Y)`.
pub fn phi_of_tensor(t: &Tensor, j: &DMatrix<f64>, x: &[f64], y: &[f64]) -> Vec<f64> {
    let jx = mat_vec(j, x);
    let jy = mat_vec(j, y);
    let a = apply_torsion(t, &jx, &jy);
    let b = mat_vec(j, &apply_torsion(t, &jx, y));
    let c = mat_vec(j, &apply_torsion(t, x, &jy));
    let d = mat_vec(&(j * j), &apply_torsion(t, x, y));
    (0..x.len()).map(|k| -a[k] + b[k] + c[k] - d[k]).collect()
}

/// `(∇_V J)` as a matrix from `∇J[k][i][j]`.
pub fn directional_endo(nj: &Tensor, v: &[f64]) -> DMatrix<f64> {
    let n = nj.dim();
    DMatrix::from_fn(n, n, |i, j| (0..n).map(|k| v[k] * nj.get(&[k, i, j])).sum())
}

/// Right-hand side of the covariant expression for `N_J`:
/// `(∇_{JX}J)Y − (∇_{JY}J)X + J(∇_Y J)X − J(∇_X J)Y + Φ(T)(X, Y)`,
/// evaluated on coordinate fields and indexed `[k][i][j]`.
pub fn nijenhuis_covariant_rhs(j: &EndoField, gamma: &ConnectionField, point: &[f64]) -> Result<Tensor> {
    let n = j.dim();
    let jm = j.eval(point)?;
    let nj = covariant_derivative_endo(gamma, j).at(point)?;
    let t = torsion_from_values(&gamma.values(point)?);
    Ok(nijenhuis_rhs_from_values(&jm, &nj, &t, n))
}

pub(crate) fn nijenhuis_rhs_from_values(jm: &DMatrix<f64>, nj: &Tensor, t: &Tensor, n: usize) -> Tensor {
    let e = |i: usize| -> Vec<f64> { (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect() };
    let mut out = Tensor::zeros(n, 3);
    for i in 0..n {
        for jj in 0..n {
            let (x, y) = (e(i), e(jj));
            let jx = mat_vec(jm, &x);
            let jy = mat_vec(jm, &y);
            let a = mat_vec(&directional_endo(nj, &jx), &y);
            let b = mat_vec(&directional_endo(nj, &jy), &x);
            let c = mat_vec(jm, &mat_vec(&directional_endo(nj, &y), &x));
            let d = mat_vec(jm, &mat_vec(&directional_endo(nj, &x), &y));
            let p = phi_of_tensor(t, jm, &x, &y);
            for k in 0..n {
                out.set(&[k, i, jj], a[k] - b[k] + c[k] - d[k] + p[k]);
            }
        }
    }
    out
}
