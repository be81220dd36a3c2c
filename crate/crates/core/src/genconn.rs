//! Connection-level machinery on `TM ⊕ T*M`.
//!
//! Two evaluation routes are provided. Symbolic sections and structures
//! ([`GenSectionField`], [`GenEndoField`]) support brackets of arbitrary
//! sections. For checks over basis sections the structures are instead
//! carried as pointwise jets (value plus first partials), assembled from the
//! jets of `J` and `g`; every bracket still uses exact symbolic derivatives
//! of the input entries.

use nalgebra::{DMatrix, DVector};

use crate::chart::{
    covariant_derivative_endo, covariant_derivative_metric, nijenhuis, ConnectionField, ConnectionKind,
    EndoDerivative, EndoField, ExprMatrix, MetricDerivative, MetricField, NijenhuisField, OneFormField, Tensor,
};
use crate::error::{Error, Result};
use crate::expr::{eval_all, Expr};
use crate::genbundle::inverse_metric;
use crate::metallic::MetallicParams;

// ---------------------------------------------------------------------------
// symbolic sections

/// `X + α` with expression components.
#[derive(Clone, Debug, PartialEq)]
pub struct GenSectionField {
    pub x: Vec<Expr>,
    pub alpha: Vec<Expr>,
}

impl GenSectionField {
    pub fn new(x: Vec<Expr>, alpha: Vec<Expr>) -> Self {
        assert_eq!(x.len(), alpha.len());
        GenSectionField { x, alpha }
    }

    pub fn zero(n: usize) -> Self {
        GenSectionField::new(vec![Expr::zero(); n], vec![Expr::zero(); n])
    }

    /// Basis section number `a` of `(∂_1..∂_n, dx^1..dx^n)`.
    pub fn basis(n: usize, a: usize) -> Self {
        let mut s = GenSectionField::zero(n);
        if a < n {
            s.x[a] = Expr::one();
        } else {
            s.alpha[a - n] = Expr::one();
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    fn stacked(&self) -> Vec<Expr> {
        self.x.iter().chain(&self.alpha).cloned().collect()
    }

    fn from_stacked(v: Vec<Expr>) -> Self {
        let n = v.len() / 2;
        let mut x = v;
        let alpha = x.split_off(n);
        GenSectionField { x, alpha }
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>> {
        eval_all(&self.stacked(), point).map_err(|e| Error::eval(point, e))
    }
}

/// Symbolic endomorphism of `TM ⊕ T*M`.
#[derive(Clone, Debug, PartialEq)]
pub struct GenEndoField {
    m: ExprMatrix,
}

impl GenEndoField {
    pub fn new(m: ExprMatrix) -> Self {
        assert!(m.nrows() == m.ncols() && m.nrows() % 2 == 0);
        GenEndoField { m }
    }

    pub fn matrix(&self) -> &ExprMatrix {
        &self.m
    }

    /// `diag(J, Jᵀ)`.
    pub fn jm(j: &EndoField) -> Self {
        let n = j.dim();
        let z = ExprMatrix::zeros(n, n);
        GenEndoField::new(ExprMatrix::from_blocks(j.matrix(), &z, &z, &j.matrix().transpose()))
    }

    /// `[[J, (I − J²)g⁻¹], [g, −Jᵀ]]`; needs a symbolic inverse (n ≤ 4).
    pub fn jp(j: &EndoField, g: &MetricField) -> Result<Self> {
        GenEndoField::off_diagonal(j, g, -1.0)
    }

    /// `[[J, −(I + J²)g⁻¹], [g, −Jᵀ]]`; needs a symbolic inverse (n ≤ 4).
    pub fn jc(j: &EndoField, g: &MetricField) -> Result<Self> {
        GenEndoField::off_diagonal(j, g, 1.0)
    }

    fn off_diagonal(j: &EndoField, g: &MetricField, sign: f64) -> Result<Self> {
        let n = j.dim();
        let jm = j.matrix();
        let ginv = g.inverse()?;
        let b = ExprMatrix::identity(n)
            .add(&jm.mul(jm).scale(sign))
            .mul(&ginv)
            .scale(-sign);
        Ok(GenEndoField::new(ExprMatrix::from_blocks(
            jm,
            &b,
            &g.matrix(),
            &jm.transpose().scale(-1.0),
        )))
    }

    pub fn apply(&self, s: &GenSectionField) -> GenSectionField {
        GenSectionField::from_stacked(self.m.mul_vec(&s.stacked()))
    }
}

fn covariant_covector(gamma: &[Expr], n: usize, x: &[Expr], beta: &[Expr]) -> Vec<Expr> {
    // (∇_X β)_i = X^k (∂_k β_i − Γ^s_{ki} β_s)
    (0..n)
        .map(|i| {
            Expr::sum((0..n).map(|k| {
                let conn = Expr::sum((0..n).map(|s| &gamma[(s * n + k) * n + i] * &beta[s]));
                &x[k] * &(&beta[i].diff(k) - &conn)
            }))
        })
        .collect()
}

/// `[X + α, Y + β]_∇ = [X, Y] + ∇_X β − ∇_Y α`.
pub fn nabla_bracket(gamma: &ConnectionField, s: &GenSectionField, t: &GenSectionField) -> Result<GenSectionField> {
    let n = s.dim();
    let g = gamma.require_symbolic()?;
    let x = crate::chart::lie_bracket(
        &crate::chart::VectorField::new(s.x.clone()),
        &crate::chart::VectorField::new(t.x.clone()),
    )
    .comps;
    let a = covariant_covector(g, n, &s.x, &t.alpha);
    let b = covariant_covector(g, n, &t.x, &s.alpha);
    let alpha = a.iter().zip(&b).map(|(p, q)| p - q).collect();
    Ok(GenSectionField { x, alpha })
}

/// `N^∇_Ĵ(σ, τ) = [Ĵσ, Ĵτ]_∇ − Ĵ[Ĵσ, τ]_∇ − Ĵ[σ, Ĵτ]_∇ + Ĵ²[σ, τ]_∇`.
pub fn gen_nijenhuis(
    gamma: &ConnectionField,
    jhat: &GenEndoField,
    s: &GenSectionField,
    t: &GenSectionField,
) -> Result<GenSectionField> {
    let js = jhat.apply(s);
    let jt = jhat.apply(t);
    let a = nabla_bracket(gamma, &js, &jt)?;
    let b = jhat.apply(&nabla_bracket(gamma, &js, t)?);
    let c = jhat.apply(&nabla_bracket(gamma, s, &jt)?);
    let j2 = GenEndoField::new(jhat.m.mul(&jhat.m));
    let d = j2.apply(&nabla_bracket(gamma, s, t)?);
    let comb = |p: &[Expr], q: &[Expr], r: &[Expr], w: &[Expr]| -> Vec<Expr> {
        (0..p.len()).map(|i| &(&(&p[i] - &q[i]) - &r[i]) + &w[i]).collect()
    };
    Ok(GenSectionField {
        x: comb(&a.x, &b.x, &c.x, &d.x),
        alpha: comb(&a.alpha, &b.alpha, &c.alpha, &d.alpha),
    })
}

// ---------------------------------------------------------------------------
// pointwise jets

/// Which structure of `TM ⊕ T*M` to assemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GenKind {
    Jm,
    Jp,
    Jc,
    /// The metric `ĝ = diag(g, g⁻¹)`, a bilinear form rather than an endomorphism.
    GHat,
}

/// Symbolic partials of `J` and `g`, evaluated on demand.
#[derive(Clone, Debug)]
pub struct BaseJets {
    n: usize,
    j: EndoField,
    dj: Vec<ExprMatrix>,
    g: MetricField,
    dg: Vec<ExprMatrix>,
}

/// `J`, `g` and their first partials at a point.
#[derive(Clone, Debug)]
pub struct PointJets {
    pub j: DMatrix<f64>,
    pub dj: Vec<DMatrix<f64>>,
    pub g: DMatrix<f64>,
    pub ginv: DMatrix<f64>,
    pub dg: Vec<DMatrix<f64>>,
    pub dginv: Vec<DMatrix<f64>>,
}

impl BaseJets {
    pub fn new(j: &EndoField, g: &MetricField) -> Result<Self> {
        let n = j.dim();
        if g.dim() != n {
            return Err(Error::DimensionMismatch(format!("J is {n}x{n}, g is {0}x{0}", g.dim())));
        }
        let gm = g.matrix();
        Ok(BaseJets {
            n,
            dj: (0..n).map(|k| j.matrix().diff(k)).collect(),
            dg: (0..n).map(|k| gm.diff(k)).collect(),
            j: j.clone(),
            g: g.clone(),
        })
    }

    pub fn at(&self, point: &[f64]) -> Result<PointJets> {
        let g = self.g.eval(point)?;
        let ginv = inverse_metric(&g).map_err(|e| match e {
            Error::SingularMetric { det, .. } => Error::SingularMetric {
                point: point.to_vec(),
                det,
            },
            other => other,
        })?;
        let dg: Vec<DMatrix<f64>> = self.dg.iter().map(|m| m.eval_at(point)).collect::<Result<_>>()?;
        let dginv = dg.iter().map(|d| -(&ginv * d * &ginv)).collect();
        Ok(PointJets {
            j: self.j.eval(point)?,
            dj: self.dj.iter().map(|m| m.eval_at(point)).collect::<Result<_>>()?,
            g,
            ginv,
            dg,
            dginv,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

fn blocks(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    m.view_mut((0, n), (n, n)).copy_from(b);
    m.view_mut((n, 0), (n, n)).copy_from(c);
    m.view_mut((n, n), (n, n)).copy_from(d);
    m
}

/// A 2n×2n structure and its partials `∂_k` at a point.
#[derive(Clone, Debug)]
pub struct GenJet {
    pub m: DMatrix<f64>,
    pub dm: Vec<DMatrix<f64>>,
}

impl PointJets {
    pub fn structure(&self, kind: GenKind) -> GenJet {
        let n = self.j.nrows();
        let id = DMatrix::<f64>::identity(n, n);
        let z = DMatrix::<f64>::zeros(n, n);
        let j = &self.j;
        let j2 = j * j;
        match kind {
            GenKind::Jm => GenJet {
                m: blocks(j, &z, &z, &j.transpose()),
                dm: self.dj.iter().map(|d| blocks(d, &z, &z, &d.transpose())).collect(),
            },
            GenKind::Jp | GenKind::Jc => {
                let s = if kind == GenKind::Jp { -1.0 } else { 1.0 };
                // B = −s (I + s J²) g⁻¹
                let core = &id + &j2 * s;
                let b = -(&core * &self.ginv) * s;
                let dm = (0..n)
                    .map(|k| {
                        let dj2 = &self.dj[k] * j + j * &self.dj[k];
                        let db = -((&dj2 * &self.ginv) * s + &core * &self.dginv[k]) * s;
                        blocks(&self.dj[k], &db, &self.dg[k], &(-self.dj[k].transpose()))
                    })
                    .collect();
                GenJet {
                    m: blocks(j, &b, &self.g, &(-j.transpose())),
                    dm,
                }
            }
            GenKind::GHat => GenJet {
                m: blocks(&self.g, &z, &z, &self.ginv),
                dm: (0..n).map(|k| blocks(&self.dg[k], &z, &z, &self.dginv[k])).collect(),
            },
        }
    }
}

/// Section value with partials, used for basis-section brackets.
#[derive(Clone, Debug)]
struct SectionJet {
    v: DVector<f64>,
    dv: Vec<DVector<f64>>,
}

impl SectionJet {
    fn basis(n: usize, a: usize) -> Self {
        let mut v = DVector::zeros(2 * n);
        v[a] = 1.0;
        SectionJet {
            v,
            dv: vec![DVector::zeros(2 * n); n],
        }
    }

    fn apply(jet: &GenJet, s: &SectionJet) -> Self {
        SectionJet {
            v: &jet.m * &s.v,
            dv: (0..s.dv.len()).map(|k| &jet.dm[k] * &s.v + &jet.m * &s.dv[k]).collect(),
        }
    }
}

fn bracket_at(gamma: &Tensor, s: &SectionJet, t: &SectionJet) -> DVector<f64> {
    let n = gamma.dim();
    let mut out = DVector::zeros(2 * n);
    for i in 0..n {
        let mut v = 0.0;
        let mut c = 0.0;
        for k in 0..n {
            v += s.v[k] * t.dv[k][i] - t.v[k] * s.dv[k][i];
            let mut cb = t.dv[k][n + i];
            let mut ca = s.dv[k][n + i];
            for r in 0..n {
                cb -= gamma.get(&[r, k, i]) * t.v[n + r];
                ca -= gamma.get(&[r, k, i]) * s.v[n + r];
            }
            c += s.v[k] * cb - t.v[k] * ca;
        }
        out[i] = v;
        out[n + i] = c;
    }
    out
}

/// `N^∇_Ĵ` on all pairs of basis sections at a point, indexed `[c][a][b]`
/// (component `c` of `N(e_a, e_b)`), as a rank-3 tensor of size `2n`.
pub fn gen_nijenhuis_basis(gamma: &Tensor, jet: &GenJet) -> Tensor {
    let n = gamma.dim();
    let m = 2 * n;
    let basis: Vec<SectionJet> = (0..m).map(|a| SectionJet::basis(n, a)).collect();
    let images: Vec<SectionJet> = basis.iter().map(|b| SectionJet::apply(jet, b)).collect();
    let j2 = &jet.m * &jet.m;
    let mut out = Tensor::zeros(m, 3);
    for a in 0..m {
        for b in 0..m {
            let v = bracket_at(gamma, &images[a], &images[b]) - &jet.m * bracket_at(gamma, &images[a], &basis[b])
                - &jet.m * bracket_at(gamma, &basis[a], &images[b])
                + &j2 * bracket_at(gamma, &basis[a], &basis[b]);
            for c in 0..m {
                out.set(&[c, a, b], v[c]);
            }
        }
    }
    out
}

/// `A_k = diag(D_k, −D_kᵀ)` with `(D_k)^s_i = D^s_{ki}`.
fn dhat_matrix(d: &Tensor, k: usize) -> DMatrix<f64> {
    let n = d.dim();
    let dk = DMatrix::from_fn(n, n, |s, i| d.get(&[s, k, i]));
    let z = DMatrix::zeros(n, n);
    blocks(&dk, &z, &z, &(-dk.transpose()))
}

/// `D̂_{∂_k} Ĵ = ∂_k Ĵ + A_k Ĵ − Ĵ A_k` for each `k`.
pub fn dhat_endo(d: &Tensor, jet: &GenJet) -> Vec<DMatrix<f64>> {
    (0..d.dim())
        .map(|k| {
            let a = dhat_matrix(d, k);
            &jet.dm[k] + &a * &jet.m - &jet.m * &a
        })
        .collect()
}

/// `D̂_{∂_k} ĝ = ∂_k ĝ − A_kᵀ ĝ − ĝ A_k` for each `k`.
pub fn dhat_metric(d: &Tensor, jet: &GenJet) -> Vec<DMatrix<f64>> {
    (0..d.dim())
        .map(|k| {
            let a = dhat_matrix(d, k);
            &jet.dm[k] - a.transpose() * &jet.m - &jet.m * &a
        })
        .collect()
}

pub fn max_norm(ms: &[DMatrix<f64>]) -> f64 {
    ms.iter().fold(0.0, |acc, m| acc.max(m.amax()))
}

// ---------------------------------------------------------------------------
// torsion corrections and the Karaman connection

fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (m * DVector::from_row_slice(v)).iter().copied().collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Φ(T^∇)(X, Y)` at a point for the torsion of `gamma`.
pub fn phi_correction(gamma: &ConnectionField, j: &EndoField, x: &[f64], y: &[f64], point: &[f64]) -> Result<Vec<f64>> {
    let t = crate::chart::torsion(gamma).at(point)?;
    Ok(crate::chart::phi_of_tensor(&t, &j.eval(point)?, x, y))
}

/// `T^D(X, Y) = ω(Y)X − ω(X)Y + (1/q)(ω(JY)JX − ω(JX)JY)` at a point.
pub fn torsion_formula_d(
    j: &DMatrix<f64>,
    params: MetallicParams,
    omega: &[f64],
    x: &[f64],
    y: &[f64],
) -> Result<Vec<f64>> {
    if params.q == 0.0 {
        return Err(Error::ZeroQ);
    }
    let jx = mat_vec(j, x);
    let jy = mat_vec(j, y);
    let (oy, ox) = (dot(omega, y), dot(omega, x));
    let (ojy, ojx) = (dot(omega, &jy), dot(omega, &jx));
    Ok((0..x.len())
        .map(|k| oy * x[k] - ox * y[k] + (ojy * jx[k] - ojx * jy[k]) / params.q)
        .collect())
}

/// A semi-symmetric metric connection `D = ∇^g + F` built from a 1-form.
#[derive(Clone, Debug)]
pub struct KaramanData {
    pub omega: OneFormField,
    pub base: ConnectionField,
    /// `F^k_{ij}`, indexed `[k][i][j]`.
    pub f: Vec<Expr>,
    pub d: ConnectionField,
}

/// `F^k_{ij} = ω_j δ^k_i − (♯ω)^k g_{ij} + (1/q)(J*ω)_j J^k_i − (1/q)(♯J*ω)^k (gJ)_{ij}`.
pub fn karaman_connection(
    g: &MetricField,
    j: &EndoField,
    params: MetallicParams,
    omega: &OneFormField,
    samples: &[Vec<f64>],
) -> Result<KaramanData> {
    if params.q == 0.0 {
        return Err(Error::ZeroQ);
    }
    let n = g.dim();
    if j.dim() != n || omega.dim() != n {
        return Err(Error::DimensionMismatch("g, J and omega must share the dimension".into()));
    }
    let base = crate::chart::christoffel(g, samples)?;
    let ginv = g.inverse()?;
    let w = &omega.comps;
    let jm = j.matrix();
    let sharp = |v: &[Expr]| -> Vec<Expr> {
        (0..n).map(|k| Expr::sum((0..n).map(|l| ginv.get(k, l) * &v[l]))).collect()
    };
    let u = sharp(w);
    let jstar: Vec<Expr> = (0..n).map(|jj| Expr::sum((0..n).map(|s| &w[s] * jm.get(s, jj)))).collect();
    let wv = sharp(&jstar);
    let gj = g.matrix().mul(jm);
    let inv_q = 1.0 / params.q;
    let mut f = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for i in 0..n {
            for jj in 0..n {
                let mut terms = Vec::with_capacity(4);
                if k == i {
                    terms.push(w[jj].clone());
                }
                terms.push((&u[k] * g.get(i, jj)).neg());
                terms.push((&jstar[jj] * jm.get(k, i)).scale(inv_q));
                terms.push((&wv[k] * gj.get(i, jj)).scale(-inv_q));
                f.push(Expr::sum(terms));
            }
        }
    }
    let d = base.add_tensor(&f, ConnectionKind::Karaman)?;
    Ok(KaramanData {
        omega: omega.clone(),
        base,
        f,
        d,
    })
}

// ---------------------------------------------------------------------------
// integrability condition lists

/// Everything the condition lists read at one point.
#[derive(Clone, Debug)]
pub struct LocalData {
    pub g: DMatrix<f64>,
    pub ginv: DMatrix<f64>,
    pub j: DMatrix<f64>,
    /// `(∇_k J)^i_j`
    pub nabla_j: Tensor,
    /// `(∇_k g)_{ij}`
    pub nabla_g: Tensor,
    pub torsion: Tensor,
    /// `N_J` on coordinate fields, `[k][i][j]`
    pub nij: Tensor,
}

/// Precomputed symbolic pieces for [`LocalData`].
#[derive(Clone, Debug)]
pub struct ConditionContext {
    gamma: ConnectionField,
    j: EndoField,
    g: MetricField,
    dj: EndoDerivative,
    dg: MetricDerivative,
    nij: NijenhuisField,
}

impl ConditionContext {
    pub fn new(gamma: &ConnectionField, j: &EndoField, g: &MetricField) -> Self {
        ConditionContext {
            dj: covariant_derivative_endo(gamma, j),
            dg: covariant_derivative_metric(gamma, g),
            nij: nijenhuis(j),
            gamma: gamma.clone(),
            j: j.clone(),
            g: g.clone(),
        }
    }

    pub fn local(&self, point: &[f64]) -> Result<LocalData> {
        let g = self.g.eval(point)?;
        let ginv = inverse_metric(&g).map_err(|_| Error::SingularMetric {
            point: point.to_vec(),
            det: g.determinant(),
        })?;
        Ok(LocalData {
            j: self.j.eval(point)?,
            nabla_j: self.dj.at(point)?,
            nabla_g: self.dg.at(point)?,
            torsion: crate::chart::torsion(&self.gamma).at(point)?,
            nij: self.nij.at(point)?,
            g,
            ginv,
        })
    }
}

type Vector = Vec<f64>;

fn add(a: &[f64], b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sub(a: &[f64], b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn neg(a: &[f64]) -> Vector {
    a.iter().map(|x| -x).collect()
}

impl LocalData {
    fn n(&self) -> usize {
        self.j.nrows()
    }

    fn mv(&self, m: &DMatrix<f64>, v: &[f64]) -> Vector {
        mat_vec(m, v)
    }

    /// `∇_V J`
    fn dj(&self, v: &[f64]) -> DMatrix<f64> {
        crate::chart::directional_endo(&self.nabla_j, v)
    }

    /// `∇_V J² = (∇_V J) J + J (∇_V J)`
    fn dj2(&self, v: &[f64]) -> DMatrix<f64> {
        let d = self.dj(v);
        &d * &self.j + &self.j * &d
    }

    /// Covector `(∇_V g)(W, ·)`.
    fn dg(&self, v: &[f64], w: &[f64]) -> Vector {
        let n = self.n();
        (0..n)
            .map(|jj| {
                let mut s = 0.0;
                for k in 0..n {
                    for i in 0..n {
                        s += v[k] * w[i] * self.nabla_g.get(&[k, i, jj]);
                    }
                }
                s
            })
            .collect()
    }

    fn tor(&self, v: &[f64], w: &[f64]) -> Vector {
        crate::chart::apply_torsion(&self.torsion, v, w)
    }

    fn flat(&self, v: &[f64]) -> Vector {
        self.mv(&self.g, v)
    }

    /// `(d^∇ g)(V, W) = (∇_V g)(W) − (∇_W g)(V) + g(T(V, W))`.
    fn dng(&self, v: &[f64], w: &[f64]) -> Vector {
        add(&sub(&self.dg(v, w), &self.dg(w, v)), &self.flat(&self.tor(v, w)))
    }

    /// `(∇_V J*) β = (∇_V J)ᵀ β`.
    fn djstar(&self, v: &[f64], beta: &[f64]) -> Vector {
        self.mv(&self.dj(v).transpose(), beta)
    }

    fn nij(&self, i: usize, jj: usize) -> Vector {
        (0..self.n()).map(|k| self.nij.get(&[k, i, jj])).collect()
    }

    fn e(&self, i: usize) -> Vector {
        (0..self.n()).map(|k| if k == i { 1.0 } else { 0.0 }).collect()
    }

    /// `I + s J²`
    fn shifted(&self, s: f64) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::identity(n, n) + &self.j * &self.j * s
    }
}

/// Number of conditions in each displayed list.
pub const CONDITION_COUNT: usize = 6;

/// Evaluates one list on every pair of coordinate fields and returns the
/// max ∞-norm per condition. `s = −1` gives the product list, `s = +1` the
/// complex list.
fn conditions(l: &LocalData, s: f64) -> [f64; CONDITION_COUNT] {
    let n = l.n();
    let k_mat = l.shifted(s); // I ∓ J²
    let ksharp = &k_mat * &l.ginv;
    let mut worst = [0.0f64; CONDITION_COUNT];
    let jt = l.j.transpose();
    for i in 0..n {
        for jj in 0..n {
            let (x, y) = (l.e(i), l.e(jj));
            let jx = l.mv(&l.j, &x);
            let jy = l.mv(&l.j, &y);
            let kx = l.mv(&k_mat, &x);
            let ky = l.mv(&k_mat, &y);

            // N_J ∓ (I ∓ J²)♯(d^∇g)(X, Y)
            let c1 = add(&l.nij(i, jj), &l.mv(&ksharp, &l.dng(&x, &y)).iter().map(|v| s * v).collect::<Vec<_>>());

            let c2 = {
                let a = sub(&l.dg(&jx, &y), &l.dg(&jy, &x));
                let b = l.mv(&jt, &sub(&l.dg(&x, &y), &l.dg(&y, &x)));
                let c = l.flat(&sub(&l.mv(&l.dj(&y), &x), &l.mv(&l.dj(&x), &y)));
                let d = l.flat(&add(&l.tor(&x, &jy), &l.tor(&jx, &y)));
                add(&add(&a, &b), &add(&c, &d))
            };

            // (d^∇g)(KY, X) ± [(∇_X J*)g(JY) − (∇_{JX} J*)g(Y)]
            let c3 = {
                let a = l.dng(&ky, &x);
                let b = sub(&l.djstar(&x, &l.flat(&jy)), &l.djstar(&jx, &l.flat(&y)));
                add(&a, &b.iter().map(|v| s * v).collect::<Vec<_>>())
            };

            let c4 = sub(&l.djstar(&kx, &l.flat(&y)), &l.djstar(&ky, &l.flat(&x)));

            let c5 = {
                let a = sub(&l.mv(&l.dj2(&kx), &y), &l.mv(&l.dj2(&ky), &x));
                let t = l.tor(&kx, &ky);
                let b = l.mv(&ksharp, &sub(&l.dg(&kx, &y), &l.dg(&ky, &x)));
                // product list adds the torsion term, complex list subtracts it
                sub(&sub(&a, &t.iter().map(|v| s * v).collect::<Vec<_>>()), &b)
            };

            let c6 = {
                let common = add(
                    &neg(&l.mv(&l.dj2(&jx), &y)),
                    &sub(&l.mv(&(&l.j * l.dj2(&x)), &y), &l.mv(&(&l.j * &l.j * l.dj(&x)), &y)),
                );
                // ∓(∇_{KY}J)X ± (∇_X J)Y
                let mid = sub(&l.mv(&l.dj(&x), &y), &l.mv(&l.dj(&ky), &x));
                let g_term = l.mv(&ksharp, &sub(&l.dg(&jx, &y), &l.dg(&x, &jy)));
                let t_term = sub(&l.mv(&l.j, &l.tor(&x, &ky)), &l.tor(&jx, &ky));
                let tail = add(&neg(&g_term), &t_term);
                let sign = -s; // +1 for the product list
                add(
                    &common,
                    &add(&mid, &tail).iter().map(|v| sign * v).collect::<Vec<_>>(),
                )
            };

            for (slot, v) in worst.iter_mut().zip([c1, c2, c3, c4, c5, c6]) {
                *slot = slot.max(v.iter().fold(0.0, |m, x| m.max(x.abs())));
            }
        }
    }
    worst
}

/// Residuals of the six conditions for `Ĵ_p` to be `∇`-integrable.
pub fn jp_conditions(l: &LocalData) -> [f64; CONDITION_COUNT] {
    conditions(l, -1.0)
}

/// Residuals of the six conditions for `Ĵ_c` to be `∇`-integrable.
pub fn jc_conditions(l: &LocalData) -> [f64; CONDITION_COUNT] {
    conditions(l, 1.0)
}

/// The shorter lists that apply to the Levi-Civita connection of a locally
/// metallic pair: seven entries for `Ĵ_p`, six for `Ĵ_c`.
pub fn reduced_conditions(l: &LocalData, s: f64) -> Vec<f64> {
    let n = l.n();
    let k_mat = l.shifted(s);
    let mut worst = vec![0.0f64; if s < 0.0 { 7 } else { 6 }];
    let jt = l.j.transpose();
    let amax = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for i in 0..n {
        for jj in 0..n {
            let (x, y) = (l.e(i), l.e(jj));
            let jx = l.mv(&l.j, &x);
            let kx = l.mv(&k_mat, &x);
            let ky = l.mv(&k_mat, &y);
            let r1 = l.nij(i, jj);
            let r2 = sub(&l.mv(&l.dj(&y), &x), &l.mv(&l.dj(&x), &y));
            // (∇_X J*) J* − ∇_{JX} J* as an endomorphism of T*M
            let r3 = (l.dj(&x).transpose() * &jt - l.dj(&jx).transpose()).amax();
            let r4 = sub(&l.djstar(&kx, &l.flat(&y)), &l.djstar(&ky, &l.flat(&x)));
            let r5 = sub(&l.mv(&l.dj2(&kx), &y), &l.mv(&l.dj2(&ky), &x));
            let common = add(
                &neg(&l.mv(&l.dj2(&jx), &y)),
                &sub(&l.mv(&(&l.j * l.dj2(&x)), &y), &l.mv(&(&l.j * &l.j * l.dj(&x)), &y)),
            );
            let with = |shift: &DMatrix<f64>, sign: f64| {
                let sy = l.mv(shift, &y);
                let mid = sub(&l.mv(&l.dj(&sy), &x), &l.mv(&l.dj(&x), &y));
                add(&common, &mid.iter().map(|v| sign * v).collect::<Vec<_>>())
            };
            let minus = l.shifted(-1.0);
            let plus = l.shifted(1.0);
            let mut vals = vec![amax(&r1), amax(&r2), r3, amax(&r4), amax(&r5)];
            if s < 0.0 {
                // −(∇_{(I−J²)Y}J)X + (∇_X J)Y and +(∇_{(I+J²)Y}J)X − (∇_X J)Y
                vals.push(amax(&with(&minus, -1.0)));
                vals.push(amax(&with(&plus, 1.0)));
            } else {
                vals.push(amax(&with(&plus, 1.0)));
            }
            for (slot, v) in worst.iter_mut().zip(vals) {
                *slot = slot.max(v);
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{christoffel, Chart};
    use crate::expr::parse;

    const PHI: f64 = 1.618_033_988_749_895;

    fn names() -> Vec<String> {
        vec!["x1".into(), "x2".into()]
    }

    fn e(s: &str) -> Expr {
        parse(s, &names()).unwrap()
    }

    fn pts() -> Vec<Vec<f64>> {
        Chart::new(names(), vec![(0.5, 2.5), (-1.0, 1.0)], 9).unwrap().samples(12)
    }

    fn golden_j() -> EndoField {
        EndoField::constant(&DMatrix::from_diagonal(&DVector::from_vec(vec![PHI, 1.0 - PHI]))).unwrap()
    }

    fn sphere() -> MetricField {
        MetricField::diagonal(vec![e("1"), e("sin(x1)^2")])
    }

    #[test]
    fn bracket_examples() {
        let flat = ConnectionField::flat(2);
        let d1 = GenSectionField::basis(2, 0);
        let d2 = GenSectionField::basis(2, 1);
        let dx1 = GenSectionField::basis(2, 2);
        let b = nabla_bracket(&flat, &d1, &d2).unwrap();
        assert_eq!(b.eval(&[0.1, 0.2]).unwrap(), vec![0.0; 4]);
        let b = nabla_bracket(&flat, &dx1, &d2).unwrap();
        assert_eq!(b.eval(&[0.1, 0.2]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn bracket_antisymmetry() {
        let gamma = christoffel(&sphere(), &pts()).unwrap();
        let s = GenSectionField::new(vec![e("x1*x2"), e("cos(x2)")], vec![e("x2^2"), e("1 + x1")]);
        let t = GenSectionField::new(vec![e("exp(x2)"), e("x1")], vec![e("sin(x1)"), e("x1*x2^3")]);
        let st = nabla_bracket(&gamma, &s, &t).unwrap();
        let ts = nabla_bracket(&gamma, &t, &s).unwrap();
        for p in pts() {
            let a = st.eval(&p).unwrap();
            let b = ts.eval(&p).unwrap();
            assert!(a.iter().zip(&b).all(|(u, v)| (u + v).abs() < 1e-9));
        }
    }

    #[test]
    fn symbolic_and_jet_routes_agree() {
        let g = MetricField::diagonal(vec![e("1 + x2^2"), e("2 + sin(x1)")]);
        let j = EndoField::new(ExprMatrix::from_fn(2, 2, |i, k| {
            e([["x1", "x2"], ["x2*(1 + x2^2)/(2 + sin(x1))", "1 - x1"]][i][k])
        }))
        .unwrap();
        let gamma = christoffel(&g, &pts()).unwrap();
        let base = BaseJets::new(&j, &g).unwrap();
        for (kind, field) in [
            (GenKind::Jm, GenEndoField::jm(&j)),
            (GenKind::Jp, GenEndoField::jp(&j, &g).unwrap()),
            (GenKind::Jc, GenEndoField::jc(&j, &g).unwrap()),
        ] {
            let pairs: Vec<(usize, usize, GenSectionField)> = (0..4)
                .flat_map(|a| (0..4).map(move |b| (a, b)))
                .map(|(a, b)| {
                    let s = gen_nijenhuis(&gamma, &field, &GenSectionField::basis(2, a), &GenSectionField::basis(2, b))
                        .unwrap();
                    (a, b, s)
                })
                .collect();
            for p in pts().iter().take(4) {
                let jet = base.at(p).unwrap().structure(kind);
                assert!((jet.m.clone() - field.matrix().eval(p).unwrap()).amax() < 1e-13);
                let t = gen_nijenhuis_basis(&gamma.values(p).unwrap(), &jet);
                for (a, b, s) in &pairs {
                    let v = s.eval(p).unwrap();
                    for c in 0..4 {
                        assert!((t.get(&[c, *a, *b]) - v[c]).abs() < 1e-10, "{kind:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn jm_mixed_component_formula() {
        // N(X, β) = β((∇_{JX}J) − (∇_X J)J) for any connection
        let g = sphere();
        let gamma = christoffel(&g, &pts()).unwrap();
        let j = golden_j();
        let base = BaseJets::new(&j, &g).unwrap();
        let dj = covariant_derivative_endo(&gamma, &j);
        for p in pts() {
            let jet = base.at(&p).unwrap().structure(GenKind::Jm);
            let t = gen_nijenhuis_basis(&gamma.values(&p).unwrap(), &jet);
            let nj = dj.at(&p).unwrap();
            let jm = j.eval(&p).unwrap();
            for x in 0..2 {
                let xv: Vec<f64> = (0..2).map(|k| if k == x { 1.0 } else { 0.0 }).collect();
                let jx = mat_vec(&jm, &xv);
                let m = crate::chart::directional_endo(&nj, &jx) - crate::chart::directional_endo(&nj, &xv) * &jm;
                for b in 0..2 {
                    // covector component r of N(∂_x, dx^b) is (M)^b_r
                    for r in 0..2 {
                        assert!((t.get(&[2 + r, x, 2 + b]) - m[(b, r)]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn karaman_flat_examples() {
        let g = MetricField::identity(2);
        let j = golden_j();
        let omega = OneFormField::new(vec![Expr::one(), Expr::zero()]);
        let k = karaman_connection(&g, &j, MetallicParams::GOLDEN, &omega, &pts()).unwrap();
        let dg = covariant_derivative_metric(&k.d, &g);
        let dj = covariant_derivative_endo(&k.d, &j);
        let tor = crate::chart::torsion(&k.d);
        for p in pts() {
            assert!(dg.at(&p).unwrap().max_abs() < 1e-12);
            assert!(dj.at(&p).unwrap().max_abs() < 1e-12);
            let t = tor.at(&p).unwrap();
            let jm = j.eval(&p).unwrap();
            for a in 0..2 {
                for b in 0..2 {
                    let x: Vec<f64> = (0..2).map(|k| if k == a { 1.0 } else { 0.0 }).collect();
                    let y: Vec<f64> = (0..2).map(|k| if k == b { 1.0 } else { 0.0 }).collect();
                    let closed = torsion_formula_d(&jm, MetallicParams::GOLDEN, &[1.0, 0.0], &x, &y).unwrap();
                    for c in 0..2 {
                        assert!((t.get(&[c, a, b]) - closed[c]).abs() < 1e-12);
                    }
                }
            }
        }
        // T^D(∂_1, ∂_2) = −∂_2 − (1/q)σ(1−σ)∂_2, and σ(1−σ) = −q
        let v = torsion_formula_d(&j.eval(&[0.0, 0.0]).unwrap(), MetallicParams::GOLDEN, &[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0])
            .unwrap();
        assert!(v.iter().all(|c| c.abs() < 1e-15), "{v:?}");
    }

    #[test]
    fn karaman_zero_form_is_levi_civita() {
        let g = sphere();
        let k = karaman_connection(&g, &golden_j(), MetallicParams::GOLDEN, &OneFormField::zero(2), &pts()).unwrap();
        assert!(k.f.iter().all(Expr::is_zero));
        let p = [1.0, 0.3];
        assert_eq!(k.d.values(&p).unwrap(), k.base.values(&p).unwrap());
        assert!(matches!(
            karaman_connection(&g, &golden_j(), MetallicParams::new(1.0, 0.0), &OneFormField::zero(2), &pts()),
            Err(Error::ZeroQ)
        ));
    }

    #[test]
    fn phi_vanishes_for_identity_structure() {
        let mut comps = vec![Expr::zero(); 8];
        comps[1] = e("x1");
        comps[6] = e("x2^2");
        let gamma = ConnectionField::from_components(2, comps, ConnectionKind::UserSupplied).unwrap();
        let id = EndoField::identity(2);
        let v = phi_correction(&gamma, &id, &[1.0, 0.0], &[0.0, 1.0], &[0.7, 0.3]).unwrap();
        assert!(v.iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn conditions_vanish_for_parallel_structures() {
        for (g, j) in [
            (MetricField::identity(2), golden_j()),
            (sphere(), EndoField::identity(2).scale(PHI)),
        ] {
            let gamma = christoffel(&g, &pts()).unwrap();
            let ctx = ConditionContext::new(&gamma, &j, &g);
            for p in pts() {
                let l = ctx.local(&p).unwrap();
                assert!(jp_conditions(&l).iter().all(|r| *r < 1e-12));
                assert!(jc_conditions(&l).iter().all(|r| *r < 1e-12));
                assert!(reduced_conditions(&l, -1.0).iter().all(|r| *r < 1e-12));
            }
        }
    }

    #[test]
    fn dhat_tracks_dj() {
        let g = sphere();
        let j = golden_j();
        let gamma = christoffel(&g, &pts()).unwrap();
        let base = BaseJets::new(&j, &g).unwrap();
        let dj = covariant_derivative_endo(&gamma, &j);
        for p in pts() {
            let d = gamma.values(&p).unwrap();
            let pj = base.at(&p).unwrap();
            let r = max_norm(&dhat_endo(&d, &pj.structure(GenKind::Jm)));
            let expect = dj.at(&p).unwrap().max_abs();
            assert!((r - expect).abs() < 1e-12);
            assert!(max_norm(&dhat_metric(&d, &pj.structure(GenKind::GHat))) < 1e-12);
        }
    }
}
