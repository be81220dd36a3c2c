//! Tensor calculus on a single coordinate chart.
//!
//! Component conventions used throughout the crate:
//!
//! * endomorphisms `J^i_j` are stored with row `i` as the output slot;
//! * connection coefficients satisfy `∇_{∂_i} ∂_j = Γ^k_{ij} ∂_k` and are
//!   indexed `[k][i][j]`;
//! * curvature is `R^l_{ijk} = ∂_i Γ^l_{jk} − ∂_j Γ^l_{ik} + Γ^l_{is} Γ^s_{jk}
//!   − Γ^l_{js} Γ^s_{ik}`, indexed `[l][i][j][k]`, so that
//!   `R(∂_i, ∂_j) ∂_k = R^l_{ijk} ∂_l`.

mod calculus;
mod connection;
mod matrix;
pub(crate) mod sampling;
mod tensor;

use nalgebra::DMatrix;

pub use calculus::{
    apply_torsion, covariant_derivative_endo, covariant_derivative_metric,
    covariant_derivative_oneform, directional_endo, lie_bracket, nijenhuis, nijenhuis_covariant_rhs, phi_of_tensor, EndoDerivative, MetricDerivative,
    NijenhuisField, OneFormDerivative,
};
pub use connection::{
    christoffel, riemann, riemann_from_jet, torsion, ConnectionField, ConnectionKind,
    CurvatureField, TorsionField,
};
pub use matrix::ExprMatrix;
pub use sampling::Chart;
pub use tensor::Tensor;

use crate::error::{Error, Result};
use crate::expr::{eval_all, Expr};

/// Smallest eigenvalue accepted for a positive-definite metric.
pub const METRIC_EIGEN_FLOOR: f64 = 1e-10;
/// Determinant below which a metric counts as singular.
pub const SINGULAR_DET: f64 = 1e-12;

/// Riemannian metric components; only the upper triangle is stored, the
/// lower triangle shares the same expressions.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField {
    n: usize,
    upper: Vec<Expr>,
}

impl MetricField {
    /// Builds from a square matrix, reading the upper triangle.
    pub fn from_upper(m: &ExprMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "metric must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        let mut upper = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                upper.push(m.get(i, j).clone());
            }
        }
        Ok(MetricField { n, upper })
    }

    pub fn identity(n: usize) -> Self {
        MetricField::from_upper(&ExprMatrix::identity(n)).expect("square")
    }

    pub fn diagonal(entries: Vec<Expr>) -> Self {
        let n = entries.len();
        MetricField::from_upper(&ExprMatrix::from_fn(n, n, |i, j| {
            if i == j {
                entries[i].clone()
            } else {
                Expr::zero()
            }
        }))
        .expect("square")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn upper_index(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        a * self.n - a * (a + 1) / 2 + b
    }

    pub fn get(&self, i: usize, j: usize) -> &Expr {
        &self.upper[self.upper_index(i, j)]
    }

    pub fn matrix(&self) -> ExprMatrix {
        ExprMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j).clone())
    }

    pub fn eval(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        let vals = eval_all(&self.upper, point).map_err(|e| Error::eval(point, e))?;
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in i..self.n {
                let v = vals[self.upper_index(i, j)];
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }

    /// Symbolic inverse `g^{ij}` (n <= 4).
    pub fn inverse(&self) -> Result<ExprMatrix> {
        self.matrix().inverse_adjugate()
    }

    /// Errors with `SingularMetric` at the first sample whose determinant
    /// falls below [`SINGULAR_DET`].
    pub fn check_nonsingular(&self, samples: &[Vec<f64>]) -> Result<()> {
        for pt in samples {
            let det = self.eval(pt)?.determinant();
            if det.abs() < SINGULAR_DET {
                return Err(Error::SingularMetric {
                    point: pt.clone(),
                    det,
                });
            }
        }
        Ok(())
    }

    /// Smallest eigenvalue at the point.
    pub fn min_eigenvalue(&self, point: &[f64]) -> Result<f64> {
        let m = self.eval(point)?;
        Ok(m.symmetric_eigenvalues().min())
    }
}

/// (1,1)-tensor field `J^i_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct EndoField {
    m: ExprMatrix,
}

impl EndoField {
    pub fn new(m: ExprMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "endomorphism must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(EndoField { m })
    }

    pub fn identity(n: usize) -> Self {
        EndoField {
            m: ExprMatrix::identity(n),
        }
    }

    pub fn constant(m: &DMatrix<f64>) -> Result<Self> {
        EndoField::new(ExprMatrix::from_constant(m))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> &Expr {
        self.m.get(i, j)
    }

    pub fn matrix(&self) -> &ExprMatrix {
        &self.m
    }

    pub fn eval(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        self.m.eval_at(point)
    }

    pub fn compose(&self, other: &EndoField) -> EndoField {
        EndoField {
            m: self.m.mul(&other.m),
        }
    }

    pub fn apply(&self, v: &[Expr]) -> Vec<Expr> {
        self.m.mul_vec(v)
    }

    /// `a·self + b·I`.
    pub fn affine(&self, a: f64, b: f64) -> EndoField {
        let n = self.dim();
        EndoField {
            m: self.m.scale(a).add(&ExprMatrix::identity(n).scale(b)),
        }
    }

    pub fn scale(&self, a: f64) -> EndoField {
        EndoField { m: self.m.scale(a) }
    }
}

/// Covector field `ω_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct OneFormField {
    pub comps: Vec<Expr>,
}

impl OneFormField {
    pub fn new(comps: Vec<Expr>) -> Self {
        OneFormField { comps }
    }

    pub fn zero(n: usize) -> Self {
        OneFormField {
            comps: vec![Expr::zero(); n],
        }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>> {
        eval_all(&self.comps, point).map_err(|e| Error::eval(point, e))
    }
}

/// Vector field `X^i`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub comps: Vec<Expr>,
}

impl VectorField {
    pub fn new(comps: Vec<Expr>) -> Self {
        VectorField { comps }
    }

    /// Coordinate field `∂_i`.
    pub fn coordinate(n: usize, i: usize) -> Self {
        VectorField {
            comps: (0..n)
                .map(|k| if k == i { Expr::one() } else { Expr::zero() })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>> {
        eval_all(&self.comps, point).map_err(|e| Error::eval(point, e))
    }
}

/// Infinity norm of `a - b`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}
