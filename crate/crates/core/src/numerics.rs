//! Tolerance-aware dense complex linear algebra.
//!
//! Every positivity, rank and span decision in the crate goes through the
//! kernels here, and all of them take the same [`Tolerance`]: a value `v` is
//! treated as zero when `|v| <= abs_tol + rel_tol * scale`, where `scale` is
//! the magnitude of the data the decision is about.

use faer::Mat;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Mixed absolute/relative tolerance threaded through every operation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-9,
        }
    }
}

impl Tolerance {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Result<Self> {
        let ok = |t: f64| t.is_finite() && t >= 0.0;
        if !ok(abs_tol) || !ok(rel_tol) {
            return Err(Error::InvalidInput(format!(
                "tolerances must be finite and nonnegative (abs {abs_tol}, rel {rel_tol})"
            )));
        }
        Ok(Self { abs_tol, rel_tol })
    }

    /// Same value for the absolute and relative parts.
    pub fn uniform(tol: f64) -> Result<Self> {
        Self::new(tol, tol)
    }

    /// Largest magnitude still treated as zero for data of size `scale`.
    pub fn threshold(&self, scale: f64) -> f64 {
        self.abs_tol + self.rel_tol * scale.abs()
    }

    pub fn is_negligible(&self, value: f64, scale: f64) -> bool {
        value.abs() <= self.threshold(scale)
    }
}

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn real_matrix(rows: usize, cols: usize, entries: &[f64]) -> CMatrix {
    assert_eq!(entries.len(), rows * cols);
    CMatrix::from_row_iterator(rows, cols, entries.iter().map(|&x| c64(x, 0.0)))
}

pub fn matrix_unit(rows: usize, cols: usize, i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(rows, cols);
    m[(i, j)] = Complex64::ONE;
    m
}

pub fn basis_vector(dim: usize, i: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    v[i] = Complex64::ONE;
    v
}

pub fn ensure_finite(m: &CMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

pub fn ensure_square(m: &CMatrix) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        })
    }
}

pub fn ensure_shape(m: &CMatrix, rows: usize, cols: usize, what: &str) -> Result<()> {
    if m.shape() == (rows, cols) {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "{what}: expected {rows}x{cols}, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Largest singular value; zero for empty matrices.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    to_faer(m)
        .singular_values()
        .expect("SVD of a finite matrix converges")
        .into_iter()
        .fold(0.0, f64::max)
}

// Decompositions go through faer: nalgebra's complex SVD can lose accuracy
// badly when singular values nearly coincide.
fn to_faer(m: &CMatrix) -> Mat<Complex64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, Complex64>) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c64(0.5, 0.0)
}

/// Column-major flattening, used to compare and solve for matrices as vectors.
pub fn flatten(m: &CMatrix) -> CVector {
    CVector::from_iterator(m.len(), m.iter().cloned())
}

pub fn unflatten(v: &CVector, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_iterator(rows, cols, v.iter().cloned())
}

/// Places `columns` side by side; every column must have length `height`.
pub fn hstack(columns: &[CVector], height: usize) -> Result<CMatrix> {
    if let Some(bad) = columns.iter().find(|c| c.len() != height) {
        return Err(Error::ShapeMismatch(format!(
            "column of height {} in a family of height {height}",
            bad.len()
        )));
    }
    let mut m = CMatrix::zeros(height, columns.len());
    for (j, col) in columns.iter().enumerate() {
        m.set_column(j, col);
    }
    Ok(m)
}

/// Eigenvalues (ascending) and matching eigenvectors of a hermitian matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

/// Eigendecomposition of the hermitian part of `m`.
pub fn hermitian_eigen(m: &CMatrix) -> Spectrum {
    let n = m.nrows();
    if n == 0 {
        return Spectrum {
            values: vec![],
            vectors: CMatrix::zeros(0, 0),
        };
    }
    let eig = to_faer(&hermitian_part(m))
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("hermitian eigendecomposition of a finite matrix converges");
    let raw: Vec<f64> = eig.S().column_vector().iter().map(|z| z.re).collect();
    let basis = from_faer(eig.U());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]));
    let values = order.iter().map(|&i| raw[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &basis.column(src));
    }
    Spectrum { values, vectors }
}

/// Outcome of a positive-semidefiniteness decision.
#[derive(Debug, Clone)]
pub struct PsdReport {
    pub psd: bool,
    pub min_eigenvalue: f64,
    /// Unit eigenvector for `min_eigenvalue` (absent for 0x0 input).
    pub min_eigenvector: Option<CVector>,
    /// Scale the tolerance was measured against.
    pub scale: f64,
    pub threshold: f64,
}

fn check_hermitian(m: &CMatrix, tol: &Tolerance) -> Result<()> {
    let deviation = (m - m.adjoint()).norm();
    let allowed = tol.threshold(m.norm());
    if deviation > allowed {
        return Err(Error::NotHermitian { deviation, allowed });
    }
    Ok(())
}

fn psd_decision(h: &CMatrix, scale: f64, tol: &Tolerance) -> PsdReport {
    let spec = hermitian_eigen(h);
    let Some(&min) = spec.values.first() else {
        return PsdReport {
            psd: true,
            min_eigenvalue: 0.0,
            min_eigenvector: None,
            scale,
            threshold: tol.threshold(scale),
        };
    };
    let spectral = spec.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let scale = scale.max(spectral);
    let threshold = tol.threshold(scale);
    PsdReport {
        psd: min >= -threshold,
        min_eigenvalue: min,
        min_eigenvector: Some(spec.vectors.column(0).into_owned()),
        scale,
        threshold,
    }
}

/// Decides `M >= 0` by the smallest eigenvalue of `(M + M*)/2`.
pub fn is_psd(m: &CMatrix, tol: &Tolerance) -> Result<PsdReport> {
    ensure_square(m)?;
    ensure_finite(m)?;
    check_hermitian(m, tol)?;
    Ok(psd_decision(&hermitian_part(m), 0.0, tol))
}

/// Löwner comparison `A <= B`, i.e. `B - A >= 0`. The tolerance is measured
/// against the larger of the two operands, not against their difference.
pub fn loewner_gap(a: &CMatrix, b: &CMatrix, tol: &Tolerance) -> Result<PsdReport> {
    ensure_square(a)?;
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "loewner comparison of {}x{} with {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    ensure_finite(a)?;
    ensure_finite(b)?;
    check_hermitian(a, tol)?;
    check_hermitian(b, tol)?;
    let scale = spectral_norm(a).max(spectral_norm(b));
    Ok(psd_decision(&hermitian_part(&(b - a)), scale, tol))
}

pub fn loewner_leq(a: &CMatrix, b: &CMatrix, tol: &Tolerance) -> Result<bool> {
    Ok(loewner_gap(a, b, tol)?.psd)
}

/// Singular values and thin factors of `m` with the rank cutoff applied.
struct RankedSvd {
    u: CMatrix,
    sigma: Vec<f64>,
    v: CMatrix,
}

fn ranked_svd(m: &CMatrix, tol: &Tolerance) -> RankedSvd {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return RankedSvd {
            u: CMatrix::zeros(rows, 0),
            sigma: vec![],
            v: CMatrix::zeros(cols, 0),
        };
    }
    let svd = to_faer(m)
        .thin_svd()
        .expect("SVD of a finite matrix converges");
    let u = from_faer(svd.U());
    let v = from_faer(svd.V());
    let sigma: Vec<f64> = svd.S().column_vector().iter().map(|z| z.re).collect();
    let largest = sigma.iter().cloned().fold(0.0, f64::max);
    let cutoff = tol.threshold(largest);
    let keep: Vec<usize> = (0..sigma.len()).filter(|&i| sigma[i] > cutoff).collect();
    let mut ku = CMatrix::zeros(rows, keep.len());
    let mut kv = CMatrix::zeros(cols, keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        ku.set_column(dst, &u.column(src));
        kv.set_column(dst, &v.column(src));
    }
    RankedSvd {
        u: ku,
        sigma: keep.iter().map(|&i| sigma[i]).collect(),
        v: kv,
    }
}

/// Orthonormal basis (as columns) of the span of the columns of `m`.
pub fn range_onb(m: &CMatrix, tol: &Tolerance) -> CMatrix {
    ranked_svd(m, tol).u
}

/// Numerical rank with the relative singular-value cutoff.
pub fn rank(m: &CMatrix, tol: &Tolerance) -> usize {
    ranked_svd(m, tol).sigma.len()
}

/// Orthonormal basis of the span of `vectors`, all of length `height`.
/// An empty family yields a `height x 0` matrix.
pub fn column_span_onb(vectors: &[CVector], height: usize, tol: &Tolerance) -> Result<CMatrix> {
    let m = hstack(vectors, height)?;
    Ok(range_onb(&m, tol))
}

/// Orthonormal basis of `{c : m c = 0}`.
pub fn nullspace(m: &CMatrix, tol: &Tolerance) -> CMatrix {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return CMatrix::zeros(0, 0);
    }
    if rows == 0 || m.iter().all(|z| *z == Complex64::ZERO) {
        return CMatrix::identity(cols, cols);
    }
    let svd = to_faer(m).svd().expect("SVD of a finite matrix converges");
    let v = from_faer(svd.V());
    let sigma: Vec<f64> = svd.S().column_vector().iter().map(|z| z.re).collect();
    let largest = sigma.iter().cloned().fold(0.0, f64::max);
    let cutoff = tol.threshold(largest);
    // Columns of V beyond the number of singular values span part of the
    // kernel when there are fewer rows than columns.
    let kernel: Vec<usize> = (0..cols)
        .filter(|&i| sigma.get(i).is_none_or(|&s| s <= cutoff))
        .collect();
    let mut out = CMatrix::zeros(cols, kernel.len());
    for (dst, &src) in kernel.iter().enumerate() {
        out.set_column(dst, &v.column(src));
    }
    out
}

/// Moore-Penrose pseudo-inverse with the shared rank cutoff.
pub fn pseudo_inverse(m: &CMatrix, tol: &Tolerance) -> CMatrix {
    let RankedSvd { u, sigma, v } = ranked_svd(m, tol);
    let inv = CMatrix::from_diagonal(&CVector::from_iterator(
        sigma.len(),
        sigma.iter().map(|s| c64(1.0 / s, 0.0)),
    ));
    v * inv * u.adjoint()
}

/// Result of fitting an operator to input/output column pairs.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub operator: CMatrix,
    pub residual: f64,
}

/// Finds `S0` minimizing `sum_i |S0 a_i - b_i|^2`, vanishing on the
/// orthogonal complement of `span(a_i)`. Columns of `inputs` are the `a_i`,
/// columns of `targets` the `b_i`.
pub fn least_squares_operator(
    inputs: &CMatrix,
    targets: &CMatrix,
    tol: &Tolerance,
) -> Result<LeastSquares> {
    if inputs.ncols() != targets.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "{} input columns but {} target columns",
            inputs.ncols(),
            targets.ncols()
        )));
    }
    ensure_finite(inputs)?;
    ensure_finite(targets)?;
    let operator = targets * pseudo_inverse(inputs, tol);
    let residual = (&operator * inputs - targets).norm();
    Ok(LeastSquares { operator, residual })
}

/// Coordinates of `target` in the (not necessarily orthonormal) family
/// `columns`, plus the residual of the best fit.
pub fn solve_coordinates(columns: &CMatrix, target: &CVector, tol: &Tolerance) -> (CVector, f64) {
    let coords = pseudo_inverse(columns, tol) * target;
    let residual = (columns * &coords - target).norm();
    (coords, residual)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn identity_is_psd() {
        let r = is_psd(&CMatrix::identity(2, 2), &tol()).unwrap();
        assert!(r.psd);
        assert!((r.min_eigenvalue - 1.0).abs() < 1e-12);
    }

    #[test]
    fn indefinite_two_by_two() {
        let m = real_matrix(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let r = is_psd(&m, &tol()).unwrap();
        assert!(!r.psd);
        assert!((r.min_eigenvalue + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_is_psd() {
        let r = is_psd(&CMatrix::zeros(3, 3), &tol()).unwrap();
        assert!(r.psd);
        assert_eq!(r.min_eigenvalue, 0.0);
    }

    #[test]
    fn non_square_rejected() {
        assert!(matches!(
            is_psd(&CMatrix::zeros(2, 3), &tol()),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = real_matrix(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(is_psd(&m, &tol()), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn nan_rejected() {
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = c64(f64::NAN, 0.0);
        assert_eq!(is_psd(&m, &tol()).unwrap_err(), Error::NonFinite);
    }

    #[test]
    fn loewner_examples() {
        let i2 = CMatrix::identity(2, 2);
        assert!(loewner_leq(&i2, &(&i2 * c64(2.0, 0.0)), &tol()).unwrap());
        let four = real_matrix(1, 1, &[4.0]);
        let one = real_matrix(1, 1, &[1.0]);
        assert!(!loewner_leq(&four, &one, &tol()).unwrap());
        assert!(loewner_leq(&i2, &CMatrix::identity(3, 3), &tol()).is_err());
    }

    #[test]
    fn span_of_collinear_columns() {
        let a = CVector::from_vec(vec![c64(1.0, 0.0), c64(0.0, 0.0)]);
        let b = CVector::from_vec(vec![c64(2.0, 0.0), c64(0.0, 0.0)]);
        let q = column_span_onb(&[a, b], 2, &tol()).unwrap();
        assert_eq!(q.ncols(), 1);
        assert!((q[(0, 0)].norm() - 1.0).abs() < 1e-12);
        assert!(q[(1, 0)].norm() < 1e-12);
    }

    #[test]
    fn span_of_standard_basis() {
        let q = column_span_onb(&[basis_vector(2, 0), basis_vector(2, 1)], 2, &tol()).unwrap();
        assert_eq!(q.ncols(), 2);
        assert!((q.adjoint() * &q - CMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn span_below_tolerance_collapses() {
        let v = basis_vector(2, 0);
        let w = basis_vector(2, 1);
        let eps = 1e-12;
        let q = column_span_onb(&[v.clone(), &v + &w * c64(eps, 0.0)], 2, &tol()).unwrap();
        assert_eq!(q.ncols(), 1);
        let q = column_span_onb(&[v.clone(), &v + &w * c64(1e-6, 0.0)], 2, &tol()).unwrap();
        assert_eq!(q.ncols(), 2);
    }

    #[test]
    fn empty_span_is_zero_dimensional() {
        let q = column_span_onb(&[], 3, &tol()).unwrap();
        assert_eq!(q.shape(), (3, 0));
    }

    #[test]
    fn least_squares_identity() {
        let i2 = CMatrix::identity(2, 2);
        let ls = least_squares_operator(&i2, &i2, &tol()).unwrap();
        assert!((ls.operator - &i2).norm() < 1e-12);
        assert!(ls.residual < 1e-12);
    }

    #[test]
    fn least_squares_row_functional() {
        let a = real_matrix(2, 1, &[1.0, 0.0]);
        let b = real_matrix(1, 1, &[1.0]);
        let ls = least_squares_operator(&a, &b, &tol()).unwrap();
        assert!((ls.operator - real_matrix(1, 2, &[1.0, 0.0])).norm() < 1e-12);
        assert!(ls.residual < 1e-12);
    }

    #[test]
    fn least_squares_inconsistent() {
        let a = real_matrix(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let b = real_matrix(1, 2, &[0.0, 1.0]);
        let ls = least_squares_operator(&a, &b, &tol()).unwrap();
        assert!(ls.residual > 0.5);
    }

    #[test]
    fn nullspace_of_rank_one() {
        let m = real_matrix(1, 3, &[1.0, 1.0, 0.0]);
        let k = nullspace(&m, &tol());
        assert_eq!(k.ncols(), 2);
        assert!((&m * &k).norm() < 1e-12);
    }

    #[test]
    fn negative_tolerance_rejected() {
        assert!(Tolerance::new(-1.0, 0.0).is_err());
        assert!(Tolerance::new(0.0, f64::NAN).is_err());
    }

    #[test]
    fn range_survives_nearly_equal_singular_values() {
        use crate::fixtures::{fixture_rng, random_unitary};
        let mut rng = fixture_rng(49, 0);
        let u = random_unitary(&mut rng, 12);
        let v = random_unitary(&mut rng, 6);
        let mut s = CMatrix::zeros(12, 6);
        for (i, sigma) in [0.8494768205, 0.8494756270, 0.8145844774, 0.8145844774]
            .into_iter()
            .enumerate()
        {
            s[(i, i)] = c64(sigma, 0.0);
        }
        let m = u * s * v.adjoint();
        let onb = range_onb(&m, &tol());
        assert_eq!(onb.ncols(), 4);
        assert!((&onb * onb.adjoint() * &m - &m).norm() < 1e-12);
        assert!((spectral_norm(&m) - 0.8494768205).abs() < 1e-12);
    }
}
