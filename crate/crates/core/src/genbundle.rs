//! Pointwise algebra on `TM ⊕ T*M`.
//!
//! Sections are written in the block basis `(∂_1..∂_n, dx^1..dx^n)`; a
//! covector acts through the dual basis, so `J*` is the transpose `Jᵀ`,
//! `♭_g` is `g` and `♯_g` is `g⁻¹`.

use nalgebra::{DMatrix, DVector};

use crate::chart::SINGULAR_DET;
use crate::error::{Error, Result};
use crate::metallic::{compat_residual, MetallicParams};
use crate::report::CheckReport;

/// Eigenvalues with magnitude below this count as zero.
pub const ZERO_EIGEN: f64 = 1e-10;

/// `X + α` at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct GenVector {
    pub x: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl GenVector {
    pub fn new(x: Vec<f64>, alpha: Vec<f64>) -> Self {
        assert_eq!(x.len(), alpha.len(), "vector and covector parts differ in length");
        GenVector { x, alpha }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn stacked(&self) -> DVector<f64> {
        DVector::from_iterator(2 * self.dim(), self.x.iter().chain(&self.alpha).copied())
    }

    pub fn from_stacked(v: &DVector<f64>) -> Self {
        let n = v.len() / 2;
        GenVector {
            x: v.rows(0, n).iter().copied().collect(),
            alpha: v.rows(n, n).iter().copied().collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    /// `TM → TM`
    A,
    /// `T*M → TM`
    B,
    /// `TM → T*M`
    C,
    /// `T*M → T*M`
    D,
}

/// Endomorphism of `TM ⊕ T*M` at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct GenEndo {
    m: DMatrix<f64>,
}

impl GenEndo {
    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        assert!(m.is_square() && m.nrows() % 2 == 0, "generalized endomorphism must be 2n x 2n");
        GenEndo { m }
    }

    pub fn from_blocks(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>) -> Self {
        let n = a.nrows();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(a);
        m.view_mut((0, n), (n, n)).copy_from(b);
        m.view_mut((n, 0), (n, n)).copy_from(c);
        m.view_mut((n, n), (n, n)).copy_from(d);
        GenEndo { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn block(&self, which: Block) -> DMatrix<f64> {
        let n = self.dim();
        let (r, c) = match which {
            Block::A => (0, 0),
            Block::B => (0, n),
            Block::C => (n, 0),
            Block::D => (n, n),
        };
        self.m.view((r, c), (n, n)).into_owned()
    }

    pub fn apply(&self, v: &GenVector) -> GenVector {
        GenVector::from_stacked(&(&self.m * v.stacked()))
    }

    /// `‖Ĵ² − pĴ − qI‖_∞`.
    pub fn metallic_residual(&self, params: MetallicParams) -> f64 {
        params.residual(&self.m)
    }

    /// `‖Ĵ² − sI‖_∞`.
    pub fn square_residual(&self, s: f64) -> f64 {
        let k = self.m.nrows();
        (&self.m * &self.m - DMatrix::identity(k, k) * s).amax()
    }
}

/// `ĝ` at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct GenMetric {
    m: DMatrix<f64>,
}

impl GenMetric {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn apply(&self, s: &GenVector, t: &GenVector) -> f64 {
        s.stacked().dot(&(&self.m * t.stacked()))
    }

    /// `‖ĝĴ − (ĝĴ)ᵀ‖_∞`.
    pub fn symmetry_residual(&self, j: &GenEndo) -> f64 {
        let a = &self.m * j.matrix();
        (&a - a.transpose()).amax()
    }
}

/// `g⁻¹`, refusing nearly singular metrics.
pub fn inverse_metric(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let det = g.determinant();
    if det.abs() < SINGULAR_DET {
        return Err(Error::SingularMetric { point: Vec::new(), det });
    }
    g.clone().try_inverse().ok_or(Error::SingularMetric { point: Vec::new(), det })
}

/// `(♭X)_i = g_{ij} X^j`.
pub fn musical_flat(g: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (g * DVector::from_row_slice(x)).iter().copied().collect()
}

/// `(♯α)^i = g^{ij} α_j`.
pub fn musical_sharp(g: &DMatrix<f64>, alpha: &[f64]) -> Result<Vec<f64>> {
    let ginv = inverse_metric(g)?;
    Ok((ginv * DVector::from_row_slice(alpha)).iter().copied().collect())
}

/// `ĝ = diag(g, g⁻¹)`.
pub fn ghat_matrix(g: &DMatrix<f64>) -> Result<GenMetric> {
    let n = g.nrows();
    let ginv = inverse_metric(g)?;
    let z = DMatrix::zeros(n, n);
    Ok(GenMetric {
        m: GenEndo::from_blocks(g, &z, &z, &ginv).m,
    })
}

/// Matrix of `(σ, τ) = −½(α(Y) − β(X))`, i.e. `½[[0, I], [−I, 0]]`.
pub fn pairing_matrix(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(i, n + i)] = 0.5;
        m[(n + i, i)] = -0.5;
    }
    m
}

pub fn natural_pairing(s: &GenVector, t: &GenVector) -> f64 {
    let beta_x: f64 = t.alpha.iter().zip(&s.x).map(|(b, x)| b * x).sum();
    let alpha_y: f64 = s.alpha.iter().zip(&t.x).map(|(a, y)| a * y).sum();
    -0.5 * (alpha_y - beta_x)
}

fn require_compatible(j: &DMatrix<f64>, g: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    if j.shape() != g.shape() || !j.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "J is {}x{}, g is {}x{}",
            j.nrows(),
            j.ncols(),
            g.nrows(),
            g.ncols()
        )));
    }
    let residual = compat_residual(g, j);
    if !(residual <= tol) {
        return Err(Error::IncompatiblePair { residual });
    }
    inverse_metric(g)
}

/// `Ĵ_m = [[J, 0], [0, J*]]`.
pub fn build_jm(j: &DMatrix<f64>, g: &DMatrix<f64>, tol: f64) -> Result<GenEndo> {
    require_compatible(j, g, tol)?;
    let z = DMatrix::zeros(j.nrows(), j.nrows());
    Ok(GenEndo::from_blocks(j, &z, &z, &j.transpose()))
}

/// `Ĵ_p = [[J, (I − J²)♯_g], [♭_g, −J*]]`.
pub fn build_jp(j: &DMatrix<f64>, g: &DMatrix<f64>, tol: f64) -> Result<GenEndo> {
    let ginv = require_compatible(j, g, tol)?;
    let n = j.nrows();
    let b = (DMatrix::identity(n, n) - j * j) * &ginv;
    Ok(GenEndo::from_blocks(j, &b, g, &(-j.transpose())))
}

/// `Ĵ_c = [[J, −(I + J²)♯_g], [♭_g, −J*]]`.
pub fn build_jc(j: &DMatrix<f64>, g: &DMatrix<f64>, tol: f64) -> Result<GenEndo> {
    let ginv = require_compatible(j, g, tol)?;
    let n = j.nrows();
    let b = -(DMatrix::identity(n, n) + j * j) * &ginv;
    Ok(GenEndo::from_blocks(j, &b, g, &(-j.transpose())))
}

/// Structures induced by `F^±` and by `Ĵ_p`.
#[derive(Clone, Debug)]
pub struct DerivedFamily {
    pub f_hat_plus: GenEndo,
    pub f_hat_minus: GenEndo,
    /// `Ĵ^±_{+,m} = ±((2σ−p)/2) F̂^+ + (p/2) I`
    pub plus_m: [GenEndo; 2],
    /// `Ĵ^±_{−,m} = ±((2σ−p)/2) F̂^− + (p/2) I`
    pub minus_m: [GenEndo; 2],
    /// `Ĵ_m^± = ±((2σ−p)/2) Ĵ_p + (p/2) I`
    pub jm: [GenEndo; 2],
    /// `(2σ − p)/2`
    pub half_gap: f64,
}

pub fn derived_family(j: &DMatrix<f64>, g: &DMatrix<f64>, params: MetallicParams, tol: f64) -> Result<DerivedFamily> {
    let gap = params.root_gap()?;
    let n = j.nrows();
    let jp = build_jp(j, g, tol)?;
    let id = DMatrix::identity(n, n);
    let f_plus = (j * 2.0 - &id * params.p) / gap;
    let f_minus = -&f_plus;
    let z = DMatrix::zeros(n, n);
    let hat = |f: &DMatrix<f64>| GenEndo::from_blocks(f, &z, &z, &f.transpose());
    let f_hat_plus = hat(&f_plus);
    let f_hat_minus = hat(&f_minus);
    let a = gap / 2.0;
    let id2 = DMatrix::identity(2 * n, 2 * n);
    let affine = |s: f64, e: &GenEndo| GenEndo::from_matrix(e.matrix() * s + &id2 * (params.p / 2.0));
    Ok(DerivedFamily {
        plus_m: [affine(a, &f_hat_plus), affine(-a, &f_hat_plus)],
        minus_m: [affine(a, &f_hat_minus), affine(-a, &f_hat_minus)],
        jm: [affine(a, &jp), affine(-a, &jp)],
        f_hat_plus,
        f_hat_minus,
        half_gap: a,
    })
}

/// The form `G(σ, τ) = (σ, Ĵ_p τ)` at a point.
#[derive(Clone, Debug)]
pub struct NeutralMetric {
    /// Symmetrized matrix of `G`.
    pub matrix: DMatrix<f64>,
    /// `‖PĴ − (PĴ)ᵀ‖_∞` before symmetrization.
    pub asymmetry: f64,
    pub eigenvalues: Vec<f64>,
    /// `(n₊, n₋)`
    pub signature: (usize, usize),
}

pub fn neutral_metric_g(jp: &GenEndo) -> Result<NeutralMetric> {
    let n = jp.dim();
    let raw = pairing_matrix(n) * jp.matrix();
    let asymmetry = (&raw - raw.transpose()).amax();
    let matrix = (&raw + raw.transpose()) * 0.5;
    let mut eigenvalues: Vec<f64> = matrix.clone().symmetric_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let min_abs = eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if min_abs < ZERO_EIGEN {
        return Err(Error::DegenerateForm { min_abs });
    }
    let pos = eigenvalues.iter().filter(|v| **v > 0.0).count();
    Ok(NeutralMetric {
        signature: (pos, eigenvalues.len() - pos),
        matrix,
        asymmetry,
        eigenvalues,
    })
}

/// Inertia `(n₊, n₋, n₀)` of a symmetric matrix by symmetric Gauss–Lagrange
/// reduction (congruence only, no eigensolve).
pub fn congruence_inertia(m: &DMatrix<f64>, zero: f64) -> (usize, usize, usize) {
    let mut a = (m + m.transpose()) * 0.5;
    let (mut pos, mut neg, mut nul) = (0, 0, 0);
    while a.nrows() > 0 {
        let k = a.nrows();
        let scale = a.amax().max(1.0);
        let (piv, dmax) = (0..k)
            .map(|i| (i, a[(i, i)].abs()))
            .fold((0, -1.0), |best, c| if c.1 > best.1 { c } else { best });
        if dmax <= zero * scale {
            // all diagonals vanish: combine two coordinates to create one
            let mut off = None;
            for i in 0..k {
                for j in (i + 1)..k {
                    if a[(i, j)].abs() > zero * scale {
                        off = Some((i, j));
                    }
                }
            }
            match off {
                None => {
                    nul += k;
                    break;
                }
                Some((i, j)) => {
                    // e_i ← e_i + e_j on rows and columns
                    let row_j = a.row(j).into_owned();
                    let mut r = a.row_mut(i);
                    r += &row_j;
                    let col_j = a.column(j).into_owned();
                    let mut c = a.column_mut(i);
                    c += &col_j;
                    continue;
                }
            }
        }
        let d = a[(piv, piv)];
        if d > 0.0 {
            pos += 1;
        } else {
            neg += 1;
        }
        let col = a.column(piv).into_owned();
        let rest: Vec<usize> = (0..k).filter(|&i| i != piv).collect();
        a = DMatrix::from_fn(k - 1, k - 1, |r, c| {
            let (i, j) = (rest[r], rest[c]);
            a[(i, j)] - col[i] * col[j] / d
        });
    }
    (pos, neg, nul)
}

/// `Ĵᵀ P Ĵ = −P` plus non-degeneracy of `(·, Ĵ·)`.
pub fn check_anti_pseudo_calibrated(jp: &GenEndo, tol: f64) -> CheckReport {
    let n = jp.dim();
    let p = pairing_matrix(n);
    let m = jp.matrix();
    let residual = (m.transpose() * &p * m + &p).amax();
    let report = CheckReport::new(
        "genbundle.anti_pseudo_calibrated",
        "(J_p s, J_p t) = -(s, t) and (., J_p .) non-degenerate",
        residual,
        tol,
    );
    match neutral_metric_g(jp) {
        Ok(_) => report,
        Err(e) => CheckReport { passed: false, ..report }.with_note(e.to_string()),
    }
}

/// `Ĵᵀ P Ĵ = P` plus positive-definiteness of `(·, Ĵ·)`.
pub fn check_calibrated(jc: &GenEndo, tol: f64) -> CheckReport {
    let n = jc.dim();
    let p = pairing_matrix(n);
    let m = jc.matrix();
    let residual = (m.transpose() * &p * m - &p).amax();
    let form = &p * m;
    let sym = (&form + form.transpose()) * 0.5;
    let min_eig = sym.symmetric_eigenvalues().min();
    let report = CheckReport::new(
        "genbundle.calibrated",
        "(J_c s, J_c t) = (s, t) and (., J_c .) positive definite",
        residual,
        tol,
    );
    if min_eig > ZERO_EIGEN {
        report
    } else {
        CheckReport { passed: false, ..report }.with_note(format!("smallest eigenvalue of (., J .) is {min_eig:e}"))
    }
}

/// `f̂ = diag(Df, Df⁻ᵀ)`; reports `‖f̂ Ĵ_1 − Ĵ_2 f̂‖_∞`.
pub fn fhat_conjugation(df: &DMatrix<f64>, j1: &GenEndo, j2: &GenEndo, tol: f64) -> Result<CheckReport> {
    let n = j1.dim();
    if df.shape() != (n, n) || j2.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "Df is {}x{}, structures act on dimension {n} and {}",
            df.nrows(),
            df.ncols(),
            j2.dim()
        )));
    }
    let inv = df.clone().try_inverse().ok_or(Error::SingularJacobian)?;
    let z = DMatrix::zeros(n, n);
    let fhat = GenEndo::from_blocks(df, &z, &z, &inv.transpose());
    let r = (fhat.matrix() * j1.matrix() - j2.matrix() * fhat.matrix()).amax();
    Ok(CheckReport::new("genbundle.fhat", "f^ J_{1,m} = J_{2,m} f^", r, tol))
}
