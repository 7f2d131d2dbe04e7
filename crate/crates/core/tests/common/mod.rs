//! Reference computations for the integration tests. They use nalgebra
//! directly and share no code path with the library's decision kernels.

#![allow(dead_code, clippy::needless_range_loop)]

use nalgebra::{Cholesky, DMatrix, SymmetricEigen, QR};
use num_complex::Complex64;
use semiphi::{CMatrix, CVector, CpMap, ModuleMap};

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Smallest eigenvalue of the hermitian part.
pub fn min_eig(m: &CMatrix) -> f64 {
    let h = (m + m.adjoint()) * c(0.5);
    SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Operator norm as the square root of the top eigenvalue of `M* M`.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = m.adjoint() * m;
    let top = SymmetricEigen::new(gram).eigenvalues.iter().copied().fold(0.0, f64::max);
    top.sqrt()
}

/// PSD test by Cholesky of `H + δI`: succeeds for every PSD `H` and fails
/// once an eigenvalue drops below `-δ` by a clear margin. Runs on the real
/// form `[[Re H, -Im H], [Im H, Re H]]`, since a complex factorization
/// takes square roots of negative pivots without complaint.
pub fn psd_by_cholesky(m: &CMatrix, delta: f64) -> bool {
    let n = m.nrows();
    let h = (m + m.adjoint()) * c(0.5);
    let real = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = h[(i % n, j % n)];
        let diag = if i == j { delta } else { 0.0 };
        diag + match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    Cholesky::new(real).is_some()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    CMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

fn vec_of(m: &CMatrix) -> CVector {
    CVector::from_iterator(m.len(), m.iter().copied())
}

/// Orthonormal basis (Frobenius) of the span, by Gram-Schmidt with one
/// round of re-orthogonalization.
pub fn frobenius_onb(basis: &[CMatrix]) -> Vec<CMatrix> {
    let mut out: Vec<CMatrix> = Vec::new();
    for b in basis {
        let mut v = b.clone();
        for _ in 0..2 {
            for u in &out {
                let coeff = u.dotc(&v);
                v -= u * coeff;
            }
        }
        let norm = v.norm();
        if norm > 1e-10 * b.norm().max(1.0) {
            out.push(v / c(norm));
        }
    }
    out
}

/// Frobenius projection of `x` onto the span of `onb`.
pub fn project(onb: &[CMatrix], x: &CMatrix) -> CMatrix {
    onb.iter().fold(x * c(0.0), |acc, u| acc + u * u.dotc(x))
}

/// Coordinates of `x` in a linearly independent basis, by Householder QR;
/// also returns the residual.
pub fn coords_in(basis: &[CMatrix], x: &CMatrix) -> (CVector, f64) {
    let rows = x.len();
    let mut a = CMatrix::zeros(rows, basis.len());
    for (j, b) in basis.iter().enumerate() {
        a.set_column(j, &vec_of(b));
    }
    let target = vec_of(x);
    let qr = QR::new(a.clone());
    let rhs = qr.q().adjoint() * &target;
    let sol = qr.r().solve_upper_triangular(&rhs).expect("independent basis");
    let residual = (&a * &sol - &target).norm();
    (sol, residual)
}

/// Rank of a set of matrices: eigenvalues of their Gram matrix above
/// `cutoff * (1 + largest)`. For a Kraus family these are the nonzero Choi
/// eigenvalues.
pub fn span_rank(ms: &[CMatrix], cutoff: f64) -> usize {
    if ms.is_empty() {
        return 0;
    }
    let gram = CMatrix::from_fn(ms.len(), ms.len(), |i, j| ms[i].dotc(&ms[j]));
    let eig = SymmetricEigen::new(gram).eigenvalues;
    let top = eig.iter().copied().fold(0.0, f64::max);
    eig.iter().filter(|&&v| v > cutoff * (1.0 + top)).count()
}

/// `λ_min(φ_n(<x, x>) - <Φ_n(x), Φ_n(x)>) / scale` for `x ∈ M_n(E)` given by
/// coordinates `coords[i][j]` in the domain basis.
pub fn level_gap(map: &ModuleMap, phi: &CpMap, coords: &[Vec<CVector>]) -> f64 {
    let n = coords.len();
    let e = map.domain();
    let (p, q) = (e.row_dim(), e.col_dim());
    let (m, k) = (map.h1_dim(), map.h2_dim());
    let mut x = CMatrix::zeros(n * p, n * q);
    let mut fx = CMatrix::zeros(n * k, n * m);
    for i in 0..n {
        for j in 0..n {
            let cs = &coords[i][j];
            let mut block = CMatrix::zeros(p, q);
            let mut image = CMatrix::zeros(k, m);
            for (t, ct) in cs.iter().enumerate() {
                block += &e.basis()[t] * *ct;
                image += &map.values()[t] * *ct;
            }
            x.view_mut((i * p, j * q), (p, q)).copy_from(&block);
            fx.view_mut((i * k, j * m), (k, m)).copy_from(&image);
        }
    }
    let inner = x.adjoint() * &x;
    let mut phi_n = CMatrix::zeros(n * m, n * m);
    for i in 0..n {
        for j in 0..n {
            let block = inner.view((i * q, j * q), (q, q)).into_owned();
            phi_n
                .view_mut((i * m, j * m), (m, m))
                .copy_from(&phi.apply_matrix(&block));
        }
    }
    let lhs = fx.adjoint() * &fx;
    let scale = op_norm(&phi_n).max(op_norm(&lhs)).max(1.0);
    min_eig(&(phi_n - lhs)) / scale
}
