use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::expr::{eval_all, EvalError, Expr};

/// Dense row-major matrix of expressions.
#[derive(Clone, Debug, PartialEq)]
pub struct ExprMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Expr>,
}

impl ExprMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Expr>) -> Self {
        assert_eq!(data.len(), rows * cols, "ExprMatrix shape mismatch");
        ExprMatrix { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Expr) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        ExprMatrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        ExprMatrix::from_fn(rows, cols, |_, _| Expr::zero())
    }

    pub fn identity(n: usize) -> Self {
        ExprMatrix::from_fn(n, n, |i, j| if i == j { Expr::one() } else { Expr::zero() })
    }

    pub fn from_constant(m: &DMatrix<f64>) -> Self {
        ExprMatrix::from_fn(m.nrows(), m.ncols(), |i, j| Expr::constant(m[(i, j)]))
    }

    /// `[[a, b], [c, d]]` assembled from four blocks.
    pub fn from_blocks(a: &ExprMatrix, b: &ExprMatrix, c: &ExprMatrix, d: &ExprMatrix) -> Self {
        assert_eq!(a.rows, b.rows);
        assert_eq!(c.rows, d.rows);
        assert_eq!(a.cols, c.cols);
        assert_eq!(b.cols, d.cols);
        let (r0, c0) = (a.rows, a.cols);
        ExprMatrix::from_fn(a.rows + c.rows, a.cols + b.cols, |i, j| match (i < r0, j < c0) {
            (true, true) => a.get(i, j).clone(),
            (true, false) => b.get(i, j - c0).clone(),
            (false, true) => c.get(i - r0, j).clone(),
            (false, false) => d.get(i - r0, j - c0).clone(),
        })
    }

    pub fn block(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Self {
        ExprMatrix::from_fn(rows, cols, |i, j| self.get(row0 + i, col0 + j).clone())
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Expr {
        &self.data[i * self.cols + j]
    }

    pub fn entries(&self) -> &[Expr] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<Expr> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn transpose(&self) -> Self {
        ExprMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn add(&self, other: &ExprMatrix) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        ExprMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j) + other.get(i, j))
    }

    pub fn sub(&self, other: &ExprMatrix) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        ExprMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j) - other.get(i, j))
    }

    pub fn scale(&self, factor: f64) -> Self {
        ExprMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).scale(factor))
    }

    pub fn scale_expr(&self, factor: &Expr) -> Self {
        ExprMatrix::from_fn(self.rows, self.cols, |i, j| factor * self.get(i, j))
    }

    pub fn mul(&self, other: &ExprMatrix) -> Self {
        assert_eq!(self.cols, other.rows, "ExprMatrix product shape mismatch");
        ExprMatrix::from_fn(self.rows, other.cols, |i, j| {
            Expr::sum((0..self.cols).map(|k| self.get(i, k) * other.get(k, j)))
        })
    }

    pub fn mul_vec(&self, v: &[Expr]) -> Vec<Expr> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| Expr::sum((0..self.cols).map(|k| self.get(i, k) * &v[k])))
            .collect()
    }

    pub fn diff(&self, coord: usize) -> Self {
        ExprMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).diff(coord))
    }

    pub fn remap_coords(&self, map: &dyn Fn(usize) -> usize) -> Self {
        ExprMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).remap_coords(map))
    }

    pub fn eval(&self, point: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let vals = eval_all(&self.data, point)?;
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &vals))
    }

    pub fn eval_at(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        self.eval(point).map_err(|e| Error::eval(point, e))
    }

    /// Symbolic determinant by cofactor expansion (square, n <= 4).
    pub fn determinant(&self) -> Result<Expr> {
        self.require_small_square("symbolic determinant")?;
        let idx: Vec<usize> = (0..self.rows).collect();
        Ok(self.minor_det(&idx, &idx))
    }

    fn minor_det(&self, rows: &[usize], cols: &[usize]) -> Expr {
        match rows.len() {
            0 => Expr::one(),
            1 => self.get(rows[0], cols[0]).clone(),
            2 => {
                &(self.get(rows[0], cols[0]) * self.get(rows[1], cols[1]))
                    - &(self.get(rows[0], cols[1]) * self.get(rows[1], cols[0]))
            }
            _ => {
                let sub_rows = &rows[1..];
                let mut acc = Expr::zero();
                for (pos, &c) in cols.iter().enumerate() {
                    let entry = self.get(rows[0], c);
                    if entry.is_zero() {
                        continue;
                    }
                    let sub_cols: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
                    let term = entry * &self.minor_det(sub_rows, &sub_cols);
                    acc = if pos % 2 == 0 { &acc + &term } else { &acc - &term };
                }
                acc
            }
        }
    }

    /// Symbolic inverse through the adjugate (square, n <= 4).
    pub fn inverse_adjugate(&self) -> Result<ExprMatrix> {
        self.require_small_square("symbolic inverse")?;
        let n = self.rows;
        let det = self.determinant()?;
        let inv_det = &Expr::one() / &det;
        let all: Vec<usize> = (0..n).collect();
        Ok(ExprMatrix::from_fn(n, n, |i, j| {
            // inverse(i, j) = cofactor(j, i) / det
            let rows: Vec<usize> = all.iter().copied().filter(|&r| r != j).collect();
            let cols: Vec<usize> = all.iter().copied().filter(|&c| c != i).collect();
            let minor = self.minor_det(&rows, &cols);
            let cof = if (i + j) % 2 == 0 { minor } else { minor.neg() };
            &cof * &inv_det
        }))
    }

    fn require_small_square(&self, what: &'static str) -> Result<()> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "{what} needs a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        if self.rows > 4 {
            return Err(Error::UnsupportedDimension {
                n: self.rows,
                reason: "symbolic inversion is limited to n <= 4",
            });
        }
        Ok(())
    }
}
