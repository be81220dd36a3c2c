//! Metallic structures `J² = pJ + qI` and their relatives.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chart::{christoffel, covariant_derivative_endo, EndoField, MetricField};
use crate::error::{Error, Result};
use crate::report::CheckReport;

/// Discriminants with `|Δ|` below this (relative to the parameter scale)
/// count as zero.
const DISCRIMINANT_EPS: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetallicParams {
    pub p: f64,
    pub q: f64,
}

impl MetallicParams {
    pub const GOLDEN: MetallicParams = MetallicParams { p: 1.0, q: 1.0 };
    pub const SILVER: MetallicParams = MetallicParams { p: 2.0, q: 1.0 };
    pub const COPPER: MetallicParams = MetallicParams { p: 1.0, q: 2.0 };

    pub fn new(p: f64, q: f64) -> Self {
        MetallicParams { p, q }
    }

    pub fn discriminant(&self) -> f64 {
        self.p * self.p + 4.0 * self.q
    }

    pub fn sigma(&self) -> Result<f64> {
        metallic_number(self.p, self.q)
    }

    /// `2σ − p = √Δ`; errors when it vanishes.
    pub fn root_gap(&self) -> Result<f64> {
        let d = self.discriminant();
        if d < 0.0 && !self.is_degenerate() {
            return Err(Error::ComplexDiscriminant(d));
        }
        if self.is_degenerate() {
            return Err(Error::DegenerateDiscriminant);
        }
        Ok(d.sqrt())
    }

    fn is_degenerate(&self) -> bool {
        let scale = self.p * self.p + 4.0 * self.q.abs();
        self.discriminant().abs() <= DISCRIMINANT_EPS * scale.max(1.0)
    }

    /// Residual `‖J² − pJ − qI‖_∞` of a matrix.
    pub fn residual(&self, j: &DMatrix<f64>) -> f64 {
        let n = j.nrows();
        (j * j - j * self.p - DMatrix::identity(n, n) * self.q).amax()
    }
}

/// Larger root of `x² − px − q`.
pub fn metallic_number(p: f64, q: f64) -> Result<f64> {
    let d = p * p + 4.0 * q;
    if d < 0.0 {
        return Err(Error::ComplexDiscriminant(d));
    }
    let s = d.sqrt();
    if p >= 0.0 {
        return Ok((p + s) / 2.0);
    }
    // avoid cancellation in p + √Δ: σ·σ' = −q with σ' = (p − √Δ)/2
    let small = (p - s) / 2.0;
    if small == 0.0 {
        Ok((p + s) / 2.0)
    } else {
        Ok(-q / small)
    }
}

/// A metallic structure with an optional compatible metric.
#[derive(Clone, Debug)]
pub struct MetallicStructure {
    pub params: MetallicParams,
    pub j: EndoField,
    pub g: Option<MetricField>,
}

pub fn check_metallic(j: &EndoField, params: MetallicParams, samples: &[Vec<f64>], tol: f64) -> CheckReport {
    CheckReport::over_samples("metallic.equation", "J^2 = pJ + qI", tol, samples, |pt| {
        Ok(params.residual(&j.eval(pt)?))
    })
}

/// Residual `‖gJ − (gJ)ᵀ‖_∞`.
pub fn compat_residual(g: &DMatrix<f64>, j: &DMatrix<f64>) -> f64 {
    let gj = g * j;
    (&gj - gj.transpose()).amax()
}

pub fn check_compatible(j: &EndoField, g: &MetricField, samples: &[Vec<f64>], tol: f64) -> CheckReport {
    CheckReport::over_samples("metallic.compatible", "g(JX, Y) = g(X, JY)", tol, samples, |pt| {
        Ok(compat_residual(&g.eval(pt)?, &j.eval(pt)?))
    })
}

/// `J = σP + (p − σ)(I − P)` from a `g`-symmetric projection `P`.
pub fn from_projection(
    proj: &EndoField,
    g: &MetricField,
    params: MetallicParams,
    samples: &[Vec<f64>],
    tol: f64,
) -> Result<MetallicStructure> {
    let sigma = params.sigma()?;
    for pt in samples {
        let pm = proj.eval(pt)?;
        let idem = (&pm * &pm - &pm).amax();
        let sym = compat_residual(&g.eval(pt)?, &pm);
        let residual = idem.max(sym);
        if !(residual <= tol) {
            return Err(Error::NotAProjection {
                residual,
                point: pt.clone(),
            });
        }
    }
    let other = params.p - sigma;
    let j = proj.affine(sigma - other, other);
    Ok(MetallicStructure {
        params,
        j,
        g: Some(g.clone()),
    })
}

/// `F^± = ±((2/(2σ−p)) J − (p/(2σ−p)) I)`.
pub fn product_from_metallic(j: &EndoField, params: MetallicParams) -> Result<(EndoField, EndoField)> {
    let gap = params.root_gap()?;
    let plus = j.affine(2.0 / gap, -params.p / gap);
    let minus = plus.scale(-1.0);
    Ok((plus, minus))
}

/// `J^± = ±((2σ−p)/2) F + (p/2) I`.
pub fn metallic_from_product(
    f: &EndoField,
    params: MetallicParams,
    samples: &[Vec<f64>],
    tol: f64,
) -> Result<(EndoField, EndoField)> {
    let gap = params.root_gap()?;
    for pt in samples {
        let fm = f.eval(pt)?;
        let n = fm.nrows();
        let residual = (&fm * &fm - DMatrix::identity(n, n)).amax();
        if !(residual <= tol) {
            return Err(Error::NotAProductStructure {
                residual,
                point: pt.clone(),
            });
        }
    }
    let plus = f.affine(gap / 2.0, params.p / 2.0);
    let minus = f.affine(-gap / 2.0, params.p / 2.0);
    Ok((plus, minus))
}

/// `max ‖∇J‖` for the Levi-Civita connection of `g`.
pub fn is_locally_metallic(j: &EndoField, g: &MetricField, samples: &[Vec<f64>], tol: f64) -> Result<CheckReport> {
    let gamma = christoffel(g, samples)?;
    let dj = covariant_derivative_endo(&gamma, j);
    Ok(CheckReport::over_samples(
        "metallic.locally_metallic",
        "nabla J = 0 (Levi-Civita)",
        tol,
        samples,
        |pt| Ok(dj.at(pt)?.max_abs()),
    ))
}

/// `J⁻¹ = (1/q) J − (p/q) I`.
pub fn inverse_metallic(j: &EndoField, params: MetallicParams) -> Result<EndoField> {
    if params.q == 0.0 {
        return Err(Error::ZeroQ);
    }
    Ok(j.affine(1.0 / params.q, -params.p / params.q))
}

/// `‖Df·J1 − J2·Df‖_∞` with `J1` at `a` (m×m), `J2` at `f(a)` (n×n) and
/// `Df` the n×m Jacobian.
pub fn check_metallic_map(
    j1: &DMatrix<f64>,
    j2: &DMatrix<f64>,
    df: &DMatrix<f64>,
    tol: f64,
) -> Result<CheckReport> {
    if !j1.is_square() || !j2.is_square() || df.nrows() != j2.nrows() || df.ncols() != j1.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "J1 {}x{}, J2 {}x{}, Df {}x{}",
            j1.nrows(),
            j1.ncols(),
            j2.nrows(),
            j2.ncols(),
            df.nrows(),
            df.ncols()
        )));
    }
    let r = (df * j1 - j2 * df).amax();
    Ok(CheckReport::new("metallic.map", "f_* J1 = J2 f_*", r, tol))
}

/// A random pointwise compatible pair.
#[derive(Clone, Debug)]
pub struct RandomPair {
    pub g: DMatrix<f64>,
    pub proj: DMatrix<f64>,
    pub j: DMatrix<f64>,
}

/// Draws `g = AᵀA + 0.1 I`, a random subspace of dimension `1..n−1`, its
/// `g`-orthogonal projection `P`, and `J = σP + (p−σ)(I−P)`.
pub fn random_compatible_pair<R: Rng + ?Sized>(n: usize, params: MetallicParams, rng: &mut R) -> Result<RandomPair> {
    let sigma = params.sigma()?;
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let g = a.transpose() * &a + DMatrix::identity(n, n) * 0.1;
    let k = if n > 1 { rng.gen_range(1..n) } else { 1 };
    let b = DMatrix::from_fn(n, k, |_, _| rng.gen_range(-1.0..1.0));
    let gram = b.transpose() * &g * &b;
    let gram_inv = gram.try_inverse().ok_or(Error::SingularJacobian)?;
    let proj = &b * gram_inv * b.transpose() * &g;
    let id = DMatrix::identity(n, n);
    let j = &proj * sigma + (&id - &proj) * (params.p - sigma);
    Ok(RandomPair { g, proj, j })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const PHI: f64 = 1.618_033_988_749_895;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(v))
    }

    fn pt() -> Vec<Vec<f64>> {
        vec![vec![0.0, 0.0]]
    }

    #[test]
    fn named_numbers() {
        assert!((metallic_number(1.0, 1.0).unwrap() - PHI).abs() < 1e-15);
        assert!((metallic_number(2.0, 1.0).unwrap() - (1.0 + 2f64.sqrt())).abs() < 1e-15);
        assert_eq!(metallic_number(1.0, 2.0).unwrap(), 2.0);
        assert!(matches!(metallic_number(0.0, -1.0), Err(Error::ComplexDiscriminant(_))));
    }

    #[test]
    fn root_identity_for_negative_p() {
        for (p, q) in [(-3.0, 0.5), (-1e4, 1e-3), (-2.0, 1.0), (0.0, 0.0)] {
            let s = metallic_number(p, q).unwrap();
            let r = s * s - p * s - q;
            assert!(r.abs() <= 4.0 * f64::EPSILON * (s * s).max(q.abs()).max(1.0), "{p} {q} {r}");
        }
    }

    #[test]
    fn check_metallic_examples() {
        let golden = EndoField::constant(&diag(&[PHI, 1.0 - PHI])).unwrap();
        assert!(check_metallic(&golden, MetallicParams::GOLDEN, &pt(), 1e-12).passed);
        let id = EndoField::identity(2);
        assert!(check_metallic(&id, MetallicParams::new(0.0, 1.0), &pt(), 1e-12).passed);
        let r = check_metallic(&id, MetallicParams::GOLDEN, &pt(), 1e-12);
        assert!(!r.passed);
        assert_eq!(r.residual, Some(1.0));
    }

    #[test]
    fn projection_examples() {
        let g = MetricField::identity(2);
        let p = EndoField::constant(&diag(&[1.0, 0.0])).unwrap();
        let s = from_projection(&p, &g, MetallicParams::GOLDEN, &pt(), 1e-12).unwrap();
        assert!((s.j.eval(&[0.0, 0.0]).unwrap() - diag(&[PHI, 1.0 - PHI])).amax() < 1e-15);
        let zero = EndoField::constant(&diag(&[0.0, 0.0])).unwrap();
        let s0 = from_projection(&zero, &g, MetallicParams::GOLDEN, &pt(), 1e-12).unwrap();
        assert!((s0.j.eval(&[0.0, 0.0]).unwrap() - diag(&[1.0 - PHI; 2])).amax() < 1e-15);
        let not = EndoField::constant(&diag(&[2.0, 0.0])).unwrap();
        assert!(matches!(
            from_projection(&not, &g, MetallicParams::GOLDEN, &pt(), 1e-12),
            Err(Error::NotAProjection { .. })
        ));
    }

    #[test]
    fn conversions() {
        let j = EndoField::constant(&diag(&[PHI, 1.0 - PHI])).unwrap();
        let (fp, fm) = product_from_metallic(&j, MetallicParams::GOLDEN).unwrap();
        assert!((fp.eval(&[0.0]).unwrap() - diag(&[1.0, -1.0])).amax() < 1e-15);
        assert!((fm.eval(&[0.0]).unwrap() + diag(&[1.0, -1.0])).amax() < 1e-15);
        let (jp, _) = metallic_from_product(&fp, MetallicParams::GOLDEN, &pt(), 1e-12).unwrap();
        assert!((jp.eval(&[0.0]).unwrap() - diag(&[PHI, 1.0 - PHI])).amax() < 1e-15);
        let (silver, _) =
            metallic_from_product(&EndoField::identity(2), MetallicParams::SILVER, &pt(), 1e-12).unwrap();
        assert!((silver.eval(&[0.0]).unwrap() - diag(&[1.0 + 2f64.sqrt(); 2])).amax() < 1e-15);
        assert!(matches!(
            product_from_metallic(&j, MetallicParams::new(2.0, -1.0)),
            Err(Error::DegenerateDiscriminant)
        ));
        let bad = EndoField::constant(&diag(&[1.0, 2.0])).unwrap();
        assert!(matches!(
            metallic_from_product(&bad, MetallicParams::GOLDEN, &pt(), 1e-12),
            Err(Error::NotAProductStructure { .. })
        ));
    }

    #[test]
    fn inverse_examples() {
        let j = EndoField::constant(&diag(&[PHI, 1.0 - PHI])).unwrap();
        let inv = inverse_metallic(&j, MetallicParams::GOLDEN).unwrap();
        assert!((inv.eval(&[0.0]).unwrap() - diag(&[PHI - 1.0, -PHI])).amax() < 1e-15);
        let copper = EndoField::constant(&diag(&[2.0, 2.0])).unwrap();
        let ci = inverse_metallic(&copper, MetallicParams::COPPER).unwrap();
        assert!((ci.eval(&[0.0]).unwrap() - diag(&[0.5, 0.5])).amax() < 1e-15);
        assert!(matches!(inverse_metallic(&j, MetallicParams::new(1.0, 0.0)), Err(Error::ZeroQ)));
    }

    #[test]
    fn map_examples() {
        let j = diag(&[PHI, 1.0 - PHI]);
        let id = DMatrix::identity(2, 2);
        assert!(check_metallic_map(&j, &j, &id, 1e-12).unwrap().passed);
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let rot = DMatrix::from_row_slice(2, 2, &[c, -c, c, c]);
        assert!(!check_metallic_map(&j, &j, &rot, 1e-12).unwrap().passed);
        let wide = DMatrix::zeros(2, 3);
        assert!(matches!(
            check_metallic_map(&j, &j, &wide, 1e-12),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn random_pairs_are_compatible() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 2..=4 {
            let pair = random_compatible_pair(n, MetallicParams::SILVER, &mut rng).unwrap();
            assert!(MetallicParams::SILVER.residual(&pair.j) < 1e-10);
            assert!(compat_residual(&pair.g, &pair.j) < 1e-10);
        }
    }
}
