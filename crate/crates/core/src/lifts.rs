//! Lifts of a metallic Riemannian pair to the tangent and cotangent bundles.
//!
//! The lifted chart has coordinates `(x¹..xⁿ, y¹..yⁿ)`; fibre coordinates sit
//! at indices `n..2n`, so base expressions are valid on it unchanged.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chart::sampling::halton_box;
use crate::chart::{
    covariant_derivative_endo, nijenhuis, riemann, Chart, ConnectionField, CurvatureField, EndoDerivative, EndoField,
    ExprMatrix, MetricField, NijenhuisField, Tensor,
};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::metallic::{compat_residual, MetallicParams};
use crate::report::CheckReport;

/// Default fibre box `[−1, 1]` per fibre coordinate.
pub const FIBRE_BOX: (f64, f64) = (-1.0, 1.0);
/// Fibre points drawn per base sample.
pub const FIBRE_PER_BASE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flavor {
    Tangent,
    Cotangent,
}

impl Flavor {
    pub fn label(self) -> &'static str {
        match self {
            Flavor::Tangent => "tangent",
            Flavor::Cotangent => "cotangent",
        }
    }
}

/// Base chart plus a bounded fibre box.
#[derive(Clone, Debug)]
pub struct LiftedChart {
    base: Chart,
    flavor: Flavor,
    fibre: Vec<(f64, f64)>,
}

impl LiftedChart {
    pub fn new(base: Chart, flavor: Flavor) -> Self {
        let fibre = vec![FIBRE_BOX; base.dim()];
        LiftedChart { base, flavor, fibre }
    }

    pub fn with_fibre_box(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Validation(vec![format!("fibre box [{lo}, {hi}] is empty or unbounded")]));
        }
        self.fibre = vec![(lo, hi); self.base.dim()];
        Ok(self)
    }

    pub fn base(&self) -> &Chart {
        &self.base
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn dim(&self) -> usize {
        2 * self.base.dim()
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = self.base.names().to_vec();
        for k in 1..=self.base.dim() {
            names.push(match self.flavor {
                Flavor::Tangent => format!("y{k}"),
                Flavor::Cotangent => format!("y_{k}"),
            });
        }
        names
    }

    /// `base_count` base samples, each paired with [`FIBRE_PER_BASE`] fibre points.
    pub fn samples(&self, base_count: usize) -> Vec<Vec<f64>> {
        lifted_samples(&self.base.samples(base_count), &self.fibre, self.base.seed())
    }
}

/// Pairs every base point with [`FIBRE_PER_BASE`] points of the fibre box.
pub fn lifted_samples(base: &[Vec<f64>], fibre: &[(f64, f64)], seed: u64) -> Vec<Vec<f64>> {
    let fib = halton_box(fibre, base.len() * FIBRE_PER_BASE, seed ^ 0x5eed_f1b3);
    base.iter()
        .flat_map(|x| std::iter::repeat(x).take(FIBRE_PER_BASE))
        .zip(fib)
        .map(|(x, y)| x.iter().copied().chain(y).collect())
        .collect()
}

fn fibre(n: usize, k: usize) -> Expr {
    Expr::coord(n + k)
}

/// Fibre part of the horizontal frame without its sign:
/// tangent `A_{li} = y^k Γ^l_{ik}`, cotangent `Z_{li} = y_k Γ^k_{il}`.
fn connection_term(gamma: &ConnectionField, flavor: Flavor) -> Result<ExprMatrix> {
    let n = gamma.dim();
    let c = gamma.require_symbolic()?;
    let at = |k: usize, i: usize, j: usize| &c[(k * n + i) * n + j];
    Ok(ExprMatrix::from_fn(n, n, |l, i| {
        Expr::sum((0..n).map(|k| match flavor {
            Flavor::Tangent => &fibre(n, k) * at(l, i, k),
            Flavor::Cotangent => &fibre(n, k) * at(k, i, l),
        }))
    }))
}

/// Signed fibre block `B` with `X_i^H = ∂_i + B_{li} ∂_{y^l}`.
fn horizontal_block(gamma: &ConnectionField, flavor: Flavor) -> Result<ExprMatrix> {
    let a = connection_term(gamma, flavor)?;
    Ok(match flavor {
        Flavor::Tangent => a.scale(-1.0),
        Flavor::Cotangent => a,
    })
}

/// Columns `X_i^H` as a `2n × n` matrix on the lifted chart.
pub fn horizontal_frame(gamma: &ConnectionField, flavor: Flavor) -> Result<ExprMatrix> {
    let n = gamma.dim();
    let b = horizontal_block(gamma, flavor)?;
    Ok(ExprMatrix::from_fn(2 * n, n, |r, i| {
        if r < n {
            if r == i {
                Expr::one()
            } else {
                Expr::zero()
            }
        } else {
            b.get(r - n, i).clone()
        }
    }))
}

/// Adapted frame `[X^H | ∂_y]` and its inverse.
fn adapted_frame(gamma: &ConnectionField, flavor: Flavor) -> Result<(ExprMatrix, ExprMatrix)> {
    let n = gamma.dim();
    let b = horizontal_block(gamma, flavor)?;
    let id = ExprMatrix::identity(n);
    let z = ExprMatrix::zeros(n, n);
    Ok((ExprMatrix::from_blocks(&id, &z, &b, &id), ExprMatrix::from_blocks(&id, &z, &b.scale(-1.0), &id)))
}

/// `Ψ = [[I, 0], [−A, g⁻¹]]`: columns are `Ψ(∂_i) = X_i^H`, `Ψ(dx^j) = g^{jk}∂_{y^k}`.
pub fn psi_matrix(g: &MetricField, gamma: &ConnectionField) -> Result<ExprMatrix> {
    let n = check_dims(g, gamma)?;
    let b = horizontal_block(gamma, Flavor::Tangent)?;
    Ok(ExprMatrix::from_blocks(&ExprMatrix::identity(n), &ExprMatrix::zeros(n, n), &b, &g.inverse()?))
}

/// `Ψ⁻¹ = [[I, 0], [gA, g]]`.
pub fn psi_inverse(g: &MetricField, gamma: &ConnectionField) -> Result<ExprMatrix> {
    let n = check_dims(g, gamma)?;
    let a = connection_term(gamma, Flavor::Tangent)?;
    let gm = g.matrix();
    Ok(ExprMatrix::from_blocks(&ExprMatrix::identity(n), &ExprMatrix::zeros(n, n), &gm.mul(&a), &gm))
}

/// `Φ = [[I, 0], [Z, I]]`: columns are `Φ(∂_i) = X_i^H`, `Φ(dx^j) = ∂_{y_j}`.
pub fn phi_matrix(gamma: &ConnectionField) -> Result<ExprMatrix> {
    Ok(adapted_frame(gamma, Flavor::Cotangent)?.0)
}

pub fn phi_inverse(gamma: &ConnectionField) -> Result<ExprMatrix> {
    Ok(adapted_frame(gamma, Flavor::Cotangent)?.1)
}

fn check_dims(g: &MetricField, gamma: &ConnectionField) -> Result<usize> {
    if g.dim() != gamma.dim() {
        return Err(Error::DimensionMismatch(format!(
            "metric is {}-dimensional, connection {}-dimensional",
            g.dim(),
            gamma.dim()
        )));
    }
    Ok(g.dim())
}

/// Lifted pair on the `2n` chart together with the base data it came from.
#[derive(Clone, Debug)]
pub struct Lift {
    flavor: Flavor,
    n: usize,
    morphism: ExprMatrix,
    morphism_inv: ExprMatrix,
    frame: ExprMatrix,
    frame_inv: ExprMatrix,
    j: EndoField,
    g: MetricField,
    base_j: EndoField,
    base_g: MetricField,
    gamma: ConnectionField,
    lifted_nij: OnceLock<NijenhuisField>,
}

/// Conjugates `Ĵ_m = diag(J, Jᵀ)` and pulls back `ĝ = diag(g, g⁻¹)` through
/// `Ψ` (tangent) or `Φ` (cotangent).
pub fn lift_structure(flavor: Flavor, g: &MetricField, j: &EndoField, gamma: &ConnectionField) -> Result<Lift> {
    let n = check_dims(g, gamma)?;
    if j.dim() != n {
        return Err(Error::DimensionMismatch(format!("J is {}-dimensional, metric {n}-dimensional", j.dim())));
    }
    let (morphism, morphism_inv) = match flavor {
        Flavor::Tangent => (psi_matrix(g, gamma)?, psi_inverse(g, gamma)?),
        Flavor::Cotangent => (phi_matrix(gamma)?, phi_inverse(gamma)?),
    };
    let (frame, frame_inv) = adapted_frame(gamma, flavor)?;
    let z = ExprMatrix::zeros(n, n);
    let jm = j.matrix();
    let j_hat = ExprMatrix::from_blocks(jm, &z, &z, &jm.transpose());
    let g_hat = ExprMatrix::from_blocks(&g.matrix(), &z, &z, &g.inverse()?);
    let lifted_j = morphism.mul(&j_hat).mul(&morphism_inv);
    let lifted_g = morphism_inv.transpose().mul(&g_hat).mul(&morphism_inv);
    Ok(Lift {
        flavor,
        n,
        morphism,
        morphism_inv,
        frame,
        frame_inv,
        j: EndoField::new(lifted_j)?,
        g: MetricField::from_upper(&lifted_g)?,
        base_j: j.clone(),
        base_g: g.clone(),
        gamma: gamma.clone(),
        lifted_nij: OnceLock::new(),
    })
}

impl Lift {
    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn base_dim(&self) -> usize {
        self.n
    }

    pub fn j(&self) -> &EndoField {
        &self.j
    }

    pub fn g(&self) -> &MetricField {
        &self.g
    }

    /// `Ψ` or `Φ`.
    pub fn morphism(&self) -> &ExprMatrix {
        &self.morphism
    }

    pub fn morphism_inverse(&self) -> &ExprMatrix {
        &self.morphism_inv
    }

    /// `[X^H | ∂_y]`.
    pub fn frame(&self) -> &ExprMatrix {
        &self.frame
    }

    /// Bracket-based Nijenhuis tensor of the lifted endomorphism, built on first use.
    pub fn nijenhuis(&self) -> &NijenhuisField {
        self.lifted_nij.get_or_init(|| nijenhuis(&self.j))
    }

    fn id(&self, what: &str) -> String {
        format!("lifts.{}.{}", self.flavor.label(), what)
    }

    /// Action of the lift on vertical coefficients: `J` on `TM`, `Jᵀ` on `T*M`.
    fn vertical_action(&self, jx: &DMatrix<f64>) -> DMatrix<f64> {
        match self.flavor {
            Flavor::Tangent => jx.clone(),
            Flavor::Cotangent => jx.transpose(),
        }
    }
}

/// Metallic equation and compatibility on the lifted chart.
pub fn check_lifted_structure(lift: &Lift, params: MetallicParams, samples: &[Vec<f64>], tol: f64) -> Vec<CheckReport> {
    let metallic = CheckReport::over_samples(
        lift.id("metallic"),
        "lifted J² = pJ + qI",
        tol,
        samples,
        |pt| Ok(params.residual(&lift.j.eval(pt)?)),
    );
    let compatible = CheckReport::over_samples(
        lift.id("compatible"),
        "lifted g(JX, Y) = g(X, JY)",
        tol,
        samples,
        |pt| Ok(compat_residual(&lift.g.eval(pt)?, &lift.j.eval(pt)?)),
    );
    vec![metallic, compatible]
}

/// Frame formulas against the conjugation construction.
pub fn check_frame_displays(lift: &Lift, samples: &[Vec<f64>], tol: f64) -> Vec<CheckReport> {
    let n = lift.n;
    let (h_anchor, v_anchor, c_anchor) = match lift.flavor {
        Flavor::Tangent => (
            "J(X_i^H) = J^k_i X_k^H",
            "J(∂/∂y^j) = J^k_j ∂/∂y^k",
            "J(X_i) = J^k_i X_k − y^l(J^k_i Γ^s_{kl} − J^s_r Γ^r_{il}) ∂/∂y^s",
        ),
        Flavor::Cotangent => (
            "J(X_i^H) = J^k_i X_k^H",
            "J(∂/∂y_j) = J^j_k ∂/∂y_k",
            "J(X_i) = J^k_i X_k + y_l(J^k_i Γ^l_{kr} − J^s_r Γ^l_{is}) ∂/∂y_r",
        ),
    };
    let horizontal = CheckReport::over_samples(lift.id("frame_horizontal"), h_anchor, tol, samples, |pt| {
        let lj = lift.j.eval(pt)?;
        let e = lift.frame.eval_at(pt)?;
        let jx = lift.base_j.eval(&pt[..n])?;
        let h = e.columns(0, n).into_owned();
        Ok((&lj * &h - &h * &jx).amax())
    });
    let vertical = CheckReport::over_samples(lift.id("frame_vertical"), v_anchor, tol, samples, |pt| {
        let lj = lift.j.eval(pt)?;
        let e = lift.frame.eval_at(pt)?;
        let jx = lift.base_j.eval(&pt[..n])?;
        let v = e.columns(n, n).into_owned();
        Ok((&lj * &v - &v * lift.vertical_action(&jx)).amax())
    });
    let coordinate = CheckReport::over_samples(lift.id("coordinate_display"), c_anchor, tol, samples, |pt| {
        let lj = lift.j.eval(pt)?;
        let x = &pt[..n];
        let y = &pt[n..];
        let jx = lift.base_j.eval(x)?;
        let gm = lift.gamma.values(x)?;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for k in 0..n {
                worst = worst.max((lj[(k, i)] - jx[(k, i)]).abs());
            }
            for s in 0..n {
                let mut v = 0.0;
                for l in 0..n {
                    for k in 0..n {
                        v += match lift.flavor {
                            Flavor::Tangent => {
                                -y[l] * (jx[(k, i)] * gm.get(&[s, k, l]) - jx[(s, k)] * gm.get(&[k, i, l]))
                            }
                            Flavor::Cotangent => {
                                y[l] * (jx[(k, i)] * gm.get(&[l, k, s]) - jx[(k, s)] * gm.get(&[l, i, k]))
                            }
                        };
                    }
                }
                worst = worst.max((lj[(n + s, i)] - v).abs());
            }
        }
        Ok(worst)
    });
    vec![horizontal, vertical, coordinate]
}

/// Metric components on the adapted frame and on the coordinate frame.
///
/// The tangent `g(X_i, X_j)` display is compared in two readings, both
/// informational: the index-consistent `g_{ij} + y^k y^h Γ^l_{ik} Γ^s_{jh} g_{ls}`
/// and the literal sum over every repeated or unused index.
pub fn lifted_metric_components(lift: &Lift, samples: &[Vec<f64>], tol: f64) -> Vec<CheckReport> {
    let n = lift.n;
    let frame_values = |pt: &[f64]| -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
        let lg = lift.g.eval(pt)?;
        let e = lift.frame.eval_at(pt)?;
        let gx = lift.base_g.eval(&pt[..n])?;
        Ok((e.transpose() * lg * e, gx.clone(), gx))
    };
    let fibre_label = match lift.flavor {
        Flavor::Tangent => "g(∂/∂y^i, ∂/∂y^j) = g_{ij}",
        Flavor::Cotangent => "g(∂/∂y_i, ∂/∂y_j) = g^{ij}",
    };
    let hh = CheckReport::over_samples(lift.id("metric_hh"), "g(X_i^H, X_j^H) = g_{ij}", tol, samples, |pt| {
        let (f, gx, _) = frame_values(pt)?;
        Ok((f.view((0, 0), (n, n)) - gx).amax())
    });
    let hv = CheckReport::over_samples(lift.id("metric_hv"), "g(X_i^H, vertical) = 0", tol, samples, |pt| {
        let (f, _, _) = frame_values(pt)?;
        Ok(f.view((0, n), (n, n)).amax())
    });
    let vv = CheckReport::over_samples(lift.id("metric_vv"), fibre_label, tol, samples, |pt| {
        let (f, gx, _) = frame_values(pt)?;
        let target = match lift.flavor {
            Flavor::Tangent => gx,
            Flavor::Cotangent => invert(&gx, pt)?,
        };
        Ok((f.view((n, n), (n, n)) - target).amax())
    });

    // coordinate-frame components straight from the pulled-back matrix
    let mixed_anchor = match lift.flavor {
        Flavor::Tangent => "g(X_i, ∂/∂y^j) = y^k Γ^l_{ik} g_{lj}",
        Flavor::Cotangent => "g(X_i, ∂/∂y_j) = −y_k Γ^k_{il} g^{lj}",
    };
    let mixed = CheckReport::over_samples(lift.id("metric_mixed"), mixed_anchor, tol, samples, |pt| {
        let lg = lift.g.eval(pt)?;
        let (x, y) = pt.split_at(n);
        let gx = lift.base_g.eval(x)?;
        let gm = lift.gamma.values(x)?;
        let gi = invert(&gx, pt)?;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let mut v = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        v += match lift.flavor {
                            Flavor::Tangent => y[k] * gm.get(&[l, i, k]) * gx[(l, j)],
                            Flavor::Cotangent => -y[k] * gm.get(&[k, i, l]) * gi[(l, j)],
                        };
                    }
                }
                worst = worst.max((lg[(i, n + j)] - v).abs());
            }
        }
        Ok(worst)
    });
    let base_block = |pt: &[f64], literal: bool| -> Result<f64> {
        let lg = lift.g.eval(pt)?;
        let (x, y) = pt.split_at(n);
        let gx = lift.base_g.eval(x)?;
        let gm = lift.gamma.values(x)?;
        let gi = invert(&gx, pt)?;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let mut v = gx[(i, j)];
                for k in 0..n {
                    for h in 0..n {
                        for l in 0..n {
                            for s in 0..n {
                                v += match (lift.flavor, literal) {
                                    (Flavor::Tangent, false) => {
                                        y[k] * y[h] * gm.get(&[l, i, k]) * gm.get(&[s, j, h]) * gx[(l, s)]
                                    }
                                    (Flavor::Tangent, true) => {
                                        y[k] * y[h] * gm.get(&[l, i, k]) * gm.get(&[s, j, h]) * gx[(h, k)]
                                    }
                                    // the cotangent display is index-consistent
                                    (Flavor::Cotangent, _) => {
                                        y[k] * y[h] * gm.get(&[k, i, l]) * gm.get(&[h, j, s]) * gi[(l, s)]
                                    }
                                };
                            }
                        }
                    }
                }
                worst = worst.max((lg[(i, j)] - v).abs());
            }
        }
        Ok(worst)
    };
    let mut out = vec![hh, hv, vv, mixed];
    match lift.flavor {
        Flavor::Tangent => {
            out.push(
                CheckReport::over_samples(
                    lift.id("metric_base_corrected"),
                    "g(X_i, X_j) = g_{ij} + y^k y^h Γ^l_{ik} Γ^s_{jh} g_{ls}",
                    tol,
                    samples,
                    |pt| base_block(pt, false),
                )
                .informational()
                .with_note("index-consistent reading of the printed display"),
            );
            out.push(
                CheckReport::over_samples(
                    lift.id("metric_base_literal"),
                    "g(X_i, X_j) = g_{ij} + y^k y^h Γ^l_{ik} Γ^s_{jh} g_{hk}",
                    tol,
                    samples,
                    |pt| base_block(pt, true),
                )
                .informational()
                .with_note("printed display summed literally over l, s"),
            );
        }
        Flavor::Cotangent => out.push(CheckReport::over_samples(
            lift.id("metric_base"),
            "g(X_i, X_j) = g_{ij} + y_k y_h Γ^k_{il} Γ^h_{jr} g^{lr}",
            tol,
            samples,
            |pt| base_block(pt, false),
        )),
    }
    out
}

fn invert(m: &DMatrix<f64>, pt: &[f64]) -> Result<DMatrix<f64>> {
    m.clone().try_inverse().ok_or_else(|| Error::SingularMetric {
        point: pt.to_vec(),
        det: m.determinant(),
    })
}

/// One index placement of the curvature tensor used when reading the
/// horizontal-horizontal display: `C^l_{abc} = sign · R^l_{π(a,b,c)}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CurvatureConvention {
    pub negate: bool,
    /// Cyclic shift of the lower indices: 0 `abc`, 1 `bca`, 2 `cab`.
    pub shift: u8,
}

impl CurvatureConvention {
    /// The distinct placements; odd permutations coincide with these up to
    /// sign through antisymmetry in the first two lower indices.
    pub fn all() -> [CurvatureConvention; 6] {
        let mut out = [CurvatureConvention { negate: false, shift: 0 }; 6];
        for (k, c) in out.iter_mut().enumerate() {
            *c = CurvatureConvention {
                negate: k % 2 == 1,
                shift: (k / 2) as u8,
            };
        }
        out
    }

    pub fn label(self) -> String {
        let idx = ["abc", "bca", "cab"][self.shift as usize];
        format!("{}R^l_{{{}}}", if self.negate { "-" } else { "" }, idx)
    }

    fn get(self, r: &Tensor, l: usize, a: usize, b: usize, c: usize) -> f64 {
        let v = match self.shift {
            0 => r.get(&[l, a, b, c]),
            1 => r.get(&[l, b, c, a]),
            _ => r.get(&[l, c, a, b]),
        };
        if self.negate {
            -v
        } else {
            v
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConventionResidual {
    pub convention: String,
    pub residual: f64,
    pub matches: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status", content = "conventions")]
pub enum Resolution {
    Unique(String),
    /// Several placements match, e.g. when the curvature terms cancel.
    Ambiguous(Vec<String>),
    None,
}

/// Brute-force lifted Nijenhuis tensor compared with the frame displays.
#[derive(Clone, Debug)]
pub struct NijenhuisComparison {
    pub checks: Vec<CheckReport>,
    pub conventions: Vec<ConventionResidual>,
    pub resolution: Resolution,
}

struct FramePoint {
    /// `N` on adapted frame pairs, result in adapted-frame coefficients,
    /// indexed `[c][a][b]` over `2n`.
    frame_n: Tensor,
    coord_max: f64,
    jx: DMatrix<f64>,
    nabla_j: Tensor,
    base_n: Tensor,
    curvature: Tensor,
}

fn frame_point(
    lift: &Lift,
    pt: &[f64],
    nabla: &EndoDerivative,
    curv: &CurvatureField,
    base_nij: &NijenhuisField,
) -> Result<FramePoint> {
    let n = lift.n;
    let m = 2 * n;
    let raw = lift.nijenhuis().at(pt)?;
    let e = lift.frame.eval_at(pt)?;
    let einv = lift.frame_inv.eval_at(pt)?;
    let mut frame_n = Tensor::zeros(m, 3);
    for a in 0..m {
        for b in 0..m {
            let v = DVector::from_fn(m, |d, _| {
                let mut s = 0.0;
                for p in 0..m {
                    for q in 0..m {
                        s += raw.get(&[d, p, q]) * e[(p, a)] * e[(q, b)];
                    }
                }
                s
            });
            let w = &einv * v;
            for c in 0..m {
                frame_n.set(&[c, a, b], w[c]);
            }
        }
    }
    let x = &pt[..n];
    Ok(FramePoint {
        frame_n,
        coord_max: raw.max_abs(),
        jx: lift.base_j.eval(x)?,
        nabla_j: nabla.at(x)?,
        base_n: base_nij.at(x)?,
        curvature: curv.at(x)?,
    })
}

/// Vertical part of the horizontal-horizontal display under a convention.
fn hh_display(lift: &Lift, fp: &FramePoint, y: &[f64], p: f64, q: f64, cv: CurvatureConvention, i: usize, j: usize) -> Vec<f64> {
    let n = lift.n;
    let jm = &fp.jx;
    let r = &fp.curvature;
    let c = |l, a, b, d| cv.get(r, l, a, b, d);
    (0..n)
        .map(|out| match lift.flavor {
            Flavor::Tangent => {
                let rr = out;
                let mut total = 0.0;
                for s in 0..n {
                    let mut t = q * c(rr, i, j, s);
                    for k in 0..n {
                        for h in 0..n {
                            t += jm[(k, i)] * jm[(h, j)] * c(rr, k, h, s);
                        }
                    }
                    for l in 0..n {
                        for k in 0..n {
                            t -= jm[(rr, l)] * jm[(k, i)] * c(l, k, j, s);
                            t -= jm[(k, j)] * jm[(rr, l)] * c(l, i, k, s);
                        }
                        t += p * jm[(rr, l)] * c(l, i, j, s);
                    }
                    total -= y[s] * t;
                }
                total
            }
            Flavor::Cotangent => {
                let s = out;
                let mut total = 0.0;
                for l in 0..n {
                    let mut t = q * c(l, i, j, s);
                    for k in 0..n {
                        for h in 0..n {
                            t += jm[(k, i)] * jm[(h, j)] * c(l, k, h, s);
                        }
                        for rr in 0..n {
                            t -= jm[(rr, s)] * jm[(k, i)] * c(l, k, j, rr);
                            t -= jm[(rr, s)] * jm[(k, j)] * c(l, i, k, rr);
                        }
                        t += p * jm[(k, s)] * c(l, i, j, k);
                    }
                    total += y[l] * t;
                }
                total
            }
        })
        .collect()
}

/// Expected vertical coefficients of `N(X_i^H, vertical_j)`.
/// `literal` selects the printed cotangent display; the tangent display
/// needs no alternative reading.
fn hv_display(lift: &Lift, fp: &FramePoint, i: usize, j: usize, literal: bool) -> Vec<f64> {
    let n = lift.n;
    let jm = &fp.jx;
    let nj = &fp.nabla_j;
    (0..n)
        .map(|out| {
            let mut v = 0.0;
            match lift.flavor {
                Flavor::Tangent => {
                    let k = out;
                    for a in 0..n {
                        v += jm[(a, i)] * nj.get(&[a, k, j]);
                        v -= jm[(k, a)] * nj.get(&[i, a, j]);
                    }
                }
                Flavor::Cotangent => {
                    let m = out;
                    for a in 0..n {
                        v += jm[(a, i)] * nj.get(&[a, j, m]);
                        v -= if literal {
                            jm[(j, a)] * nj.get(&[i, a, m])
                        } else {
                            nj.get(&[i, j, a]) * jm[(a, m)]
                        };
                    }
                }
            }
            v
        })
        .collect()
}

/// Computes `N` of the lifted endomorphism by brute force on the `2n` chart,
/// moves it to the adapted frame and compares the three frame displays.
pub fn lifted_nijenhuis(lift: &Lift, params: MetallicParams, samples: &[Vec<f64>], tol: f64) -> Result<NijenhuisComparison> {
    let n = lift.n;
    let nabla = covariant_derivative_endo(&lift.gamma, &lift.base_j);
    let curv = riemann(&lift.gamma);
    let base_nij = nijenhuis(&lift.base_j);
    let conventions = CurvatureConvention::all();

    let mut points = Vec::with_capacity(samples.len());
    for pt in samples {
        points.push((pt, frame_point(lift, pt, &nabla, &curv, &base_nij)?));
    }

    let mut vv = Worst::default();
    let mut hv = Worst::default();
    let mut hv_literal = Worst::default();
    let mut hh_h = Worst::default();
    let mut hh_conv = vec![Worst::default(); conventions.len()];
    let mut full = Worst::default();
    for (pt, fp) in &points {
        let y = &pt[n..];
        full.see(fp.coord_max, pt);
        let f = &fp.frame_n;
        for i in 0..n {
            for j in 0..n {
                let mut r = 0.0_f64;
                for c in 0..2 * n {
                    r = r.max(f.get(&[c, n + i, n + j]).abs());
                }
                vv.see(r, pt);

                let horiz = (0..n).map(|c| f.get(&[c, i, n + j]).abs()).fold(0.0, f64::max);
                let expect = hv_display(lift, fp, i, j, false);
                let r = (0..n).map(|c| (f.get(&[n + c, i, n + j]) - expect[c]).abs()).fold(horiz, f64::max);
                hv.see(r, pt);
                if lift.flavor == Flavor::Cotangent {
                    let expect = hv_display(lift, fp, i, j, true);
                    let r = (0..n).map(|c| (f.get(&[n + c, i, n + j]) - expect[c]).abs()).fold(horiz, f64::max);
                    hv_literal.see(r, pt);
                }

                let r = (0..n).map(|k| (f.get(&[k, i, j]) - fp.base_n.get(&[k, i, j])).abs()).fold(0.0, f64::max);
                hh_h.see(r, pt);
                for (w, cv) in hh_conv.iter_mut().zip(conventions) {
                    let d = hh_display(lift, fp, y, params.p, params.q, cv, i, j);
                    let r = (0..n).map(|c| (f.get(&[n + c, i, j]) - d[c]).abs()).fold(0.0, f64::max);
                    w.see(r, pt);
                }
            }
        }
    }

    let table: Vec<ConventionResidual> = conventions
        .iter()
        .zip(&hh_conv)
        .map(|(cv, w)| ConventionResidual {
            convention: cv.label(),
            residual: w.value,
            matches: w.value <= tol,
        })
        .collect();
    let matched: Vec<String> = table.iter().filter(|c| c.matches).map(|c| c.convention.clone()).collect();
    let resolution = match matched.len() {
        0 => Resolution::None,
        1 => Resolution::Unique(matched[0].clone()),
        _ => Resolution::Ambiguous(matched),
    };
    let best = hh_conv
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .cloned()
        .unwrap_or_default();

    let (vv_anchor, hv_anchor, hh_anchor) = match lift.flavor {
        Flavor::Tangent => (
            "N(∂/∂y^i, ∂/∂y^j) = 0",
            "N(X_i^H, ∂/∂y^j) = ((∇_{JX_i}J)X_j − J(∇_{X_i}J)X_j)^k ∂/∂y^k",
            "N(X_i^H, X_j^H) = N_J(X_i, X_j)^k X_k^H − y^s(J^k_iJ^h_jR^r_{khs} − J^r_lJ^k_iR^l_{kjs} − J^h_jJ^r_lR^l_{ihs} + pJ^r_lR^l_{ijs} + qR^r_{ijs}) ∂/∂y^r",
        ),
        Flavor::Cotangent => (
            "N(∂/∂y_i, ∂/∂y_j) = 0",
            "N(X_i^H, ∂/∂y_j) = ((∇_{JX_i}J) − (∇_{X_i}J)J)^j_k ∂/∂y_k",
            "N(X_i^H, X_j^H) = N_J(X_i, X_j)^k X_k^H + y_l(J^k_iJ^h_jR^l_{khs} − J^r_sJ^k_iR^l_{kjr} − J^r_sJ^k_jR^l_{ikr} + pJ^k_sR^l_{ijk} + qR^l_{ijs}) ∂/∂y_s",
        ),
    };
    let note = match &resolution {
        Resolution::Unique(c) => format!("curvature placement resolved to {c}"),
        Resolution::Ambiguous(cs) => format!("curvature placement ambiguous: {}", cs.join(", ")),
        Resolution::None => "no curvature placement matches".to_string(),
    };
    let mut hh = Worst::default();
    hh.see(hh_h.value, hh_h.at.as_deref().unwrap_or(&[]));
    if best.value > hh.value {
        hh = best;
    }
    let mut checks = vec![
        vv.report(lift.id("nijenhuis_vv"), vv_anchor, tol),
        hv.report(lift.id("nijenhuis_hv"), hv_anchor, tol),
    ];
    if lift.flavor == Flavor::Cotangent {
        checks.push(
            hv_literal
                .report(
                    lift.id("nijenhuis_hv_printed"),
                    "N(X_i^H, ∂/∂y_j) = ((∇_{JX_i}J)X_k − J(∇_{X_i}J)X_k)^j ∂/∂y_k",
                    tol,
                )
                .informational(),
        );
    }
    checks.push(hh.report(lift.id("nijenhuis_hh"), hh_anchor, tol).with_note(note));
    checks.push(
        full.report(lift.id("nijenhuis_zero"), "lifted N = 0", tol)
            .informational(),
    );
    Ok(NijenhuisComparison {
        checks,
        conventions: table,
        resolution,
    })
}

#[derive(Clone, Debug, Default)]
struct Worst {
    value: f64,
    at: Option<Vec<f64>>,
}

impl Worst {
    fn see(&mut self, r: f64, pt: &[f64]) {
        let r = if r.is_nan() { f64::INFINITY } else { r };
        if r > self.value || self.at.is_none() {
            if r >= self.value {
                self.value = r;
                self.at = Some(pt.to_vec());
            }
        }
    }

    fn report(&self, id: String, anchor: &str, tol: f64) -> CheckReport {
        let mut r = CheckReport::new(id, anchor, self.value, tol);
        if !r.passed {
            r.witness = self.at.clone();
        }
        r
    }
}

/// `J̄ ∘ (Ψ ∘ Φ⁻¹) = (Ψ ∘ Φ⁻¹) ∘ J̃` at tangent points `(x, y)` matched with
/// cotangent points `(x, g(x) y)`.
pub fn commutation_check(tangent: &Lift, cotangent: &Lift, samples: &[Vec<f64>], tol: f64) -> CheckReport {
    let anchor = "J̄ ∘ (Ψ ∘ Φ⁻¹) = (Ψ ∘ Φ⁻¹) ∘ J̃";
    if tangent.flavor != Flavor::Tangent || cotangent.flavor != Flavor::Cotangent || tangent.n != cotangent.n {
        let err = Error::DimensionMismatch("commutation needs a tangent and a cotangent lift of one base".into());
        return CheckReport::failed_with("commutation", anchor, tol, &err);
    }
    let n = tangent.n;
    CheckReport::over_samples("commutation", anchor, tol, samples, |pt| {
        let (x, y) = pt.split_at(n);
        let gx = tangent.base_g.eval(x)?;
        if gx.determinant().abs() < crate::chart::SINGULAR_DET {
            return Err(Error::SingularMetric {
                point: x.to_vec(),
                det: gx.determinant(),
            });
        }
        let flat = &gx * DVector::from_column_slice(y);
        let cpt: Vec<f64> = x.iter().copied().chain(flat.iter().copied()).collect();
        let m = tangent.morphism.eval_at(pt)? * cotangent.morphism_inv.eval_at(&cpt)?;
        let jt = tangent.j.eval(pt)?;
        let jc = cotangent.j.eval(&cpt)?;
        Ok((jt * &m - m * jc).amax())
    })
}
