//! Linear maps from a [`BlockAlgebra`] into `M_m`, certified completely
//! positive through their Choi matrix, with Kraus and Stinespring forms.
//!
//! A map is stored by its values on the matrix units of its domain. On the
//! ambient `M_q` it acts as `a ↦ φ(pinch(a))`; the Choi matrix, Kraus
//! operators and dilation all describe that extension, whose restriction to
//! the algebra is the original map.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, BlockAlgebra};
use crate::error::{Error, Result};
use crate::numerics::{
    c64, ensure_finite, ensure_shape, hermitian_eigen, is_psd, kron, spectral_norm, CMatrix,
    Tolerance,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCpMap")]
pub struct CpMap {
    algebra: BlockAlgebra,
    target_dim: usize,
    #[serde(rename = "values_on_units", with = "crate::wire::matrices")]
    values: Vec<CMatrix>,
}

#[derive(Deserialize)]
struct RawCpMap {
    algebra: BlockAlgebra,
    target_dim: usize,
    #[serde(with = "crate::wire::matrices")]
    values_on_units: Vec<CMatrix>,
}

impl TryFrom<RawCpMap> for CpMap {
    type Error = Error;
    fn try_from(raw: RawCpMap) -> Result<Self> {
        CpMap::new(raw.algebra, raw.target_dim, raw.values_on_units)
    }
}

/// Choi-matrix verdict on complete positivity.
#[derive(Debug, Clone, Serialize)]
pub struct CpReport {
    pub completely_positive: bool,
    /// Smallest Choi eigenvalue.
    pub margin: f64,
    pub threshold: f64,
}

impl CpMap {
    /// `values[u]` is the image of the `u`-th matrix unit in the order of
    /// [`BlockAlgebra::matrix_units`].
    pub fn new(algebra: BlockAlgebra, target_dim: usize, values: Vec<CMatrix>) -> Result<Self> {
        if target_dim == 0 {
            return Err(Error::InvalidInput("target_dim must be positive".into()));
        }
        if values.len() != algebra.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for an algebra of dimension {}",
                values.len(),
                algebra.dim()
            )));
        }
        for (u, v) in values.iter().enumerate() {
            ensure_shape(v, target_dim, target_dim, &format!("value on unit {u}"))?;
            ensure_finite(v)?;
        }
        Ok(Self {
            algebra,
            target_dim,
            values,
        })
    }

    /// Tabulates `f` on the matrix units.
    pub fn from_fn(
        algebra: BlockAlgebra,
        target_dim: usize,
        f: impl Fn(&CMatrix) -> CMatrix,
    ) -> Result<Self> {
        let values = algebra
            .matrix_units()
            .into_iter()
            .map(|u| f(&algebra.unit_matrix(u)))
            .collect();
        Self::new(algebra, target_dim, values)
    }

    /// `a ↦ sum_t K_t a K_t*` for `m x q` operators `K_t`.
    pub fn from_kraus(algebra: BlockAlgebra, target_dim: usize, kraus: &[CMatrix]) -> Result<Self> {
        let q = algebra.ambient_dim();
        for (t, k) in kraus.iter().enumerate() {
            ensure_shape(k, target_dim, q, &format!("Kraus operator {t}"))?;
        }
        Self::from_fn(algebra, target_dim, |u| {
            kraus
                .iter()
                .fold(CMatrix::zeros(target_dim, target_dim), |acc, k| {
                    acc + k * u * k.adjoint()
                })
        })
    }

    /// Inclusion of the algebra into `M_q`.
    pub fn identity(algebra: BlockAlgebra) -> Self {
        let q = algebra.ambient_dim();
        Self::from_fn(algebra, q, |u| u.clone()).expect("consistent shapes")
    }

    pub fn zero(algebra: BlockAlgebra, target_dim: usize) -> Self {
        Self::from_fn(algebra, target_dim, |_| CMatrix::zeros(target_dim, target_dim))
            .expect("consistent shapes")
    }

    /// The trace functional into `M_1`.
    pub fn trace(algebra: BlockAlgebra) -> Self {
        Self::from_fn(algebra, 1, |u| CMatrix::from_element(1, 1, u.trace()))
            .expect("consistent shapes")
    }

    /// Transpose on `M_n`; positive but not completely positive for `n >= 2`.
    pub fn transpose(n: usize) -> Self {
        Self::from_fn(BlockAlgebra::full(n), n, |u| u.transpose()).expect("consistent shapes")
    }

    pub fn algebra(&self) -> &BlockAlgebra {
        &self.algebra
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn values(&self) -> &[CMatrix] {
        &self.values
    }

    /// `φ(pinch(m))` for any `q x q` matrix `m`.
    pub fn apply_matrix(&self, m: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.target_dim, self.target_dim);
        for (u, v) in self.algebra.matrix_units().into_iter().zip(&self.values) {
            let c = m[u];
            if c != Complex64::ZERO {
                out += v * c;
            }
        }
        out
    }

    pub fn apply(&self, a: &AlgebraElement) -> Result<CMatrix> {
        if a.algebra() != &self.algebra {
            return Err(Error::ShapeMismatch(
                "element belongs to a different algebra".into(),
            ));
        }
        Ok(self.apply_matrix(a.value()))
    }

    /// Applies the map to `m`, rejecting matrices outside the algebra.
    pub fn apply_checked(&self, m: &CMatrix, tol: &Tolerance) -> Result<CMatrix> {
        let a = self.algebra.element(m.clone(), tol)?;
        self.apply(&a)
    }

    /// The amplification `φ_n`: applies the map to each `q x q` block of an
    /// `nq x nq` matrix.
    pub fn apply_n(&self, n: usize, blocks: &CMatrix, tol: &Tolerance) -> Result<CMatrix> {
        let (q, m) = (self.algebra.ambient_dim(), self.target_dim);
        ensure_shape(blocks, n * q, n * q, "amplified argument")?;
        let mut out = CMatrix::zeros(n * m, n * m);
        for i in 0..n {
            for j in 0..n {
                let block = blocks.view((i * q, j * q), (q, q)).into_owned();
                let image = self.apply_checked(&block, tol)?;
                out.view_mut((i * m, j * m), (m, m)).copy_from(&image);
            }
        }
        Ok(out)
    }

    /// `outer ∘ inner`; the values of `inner` must lie in `outer`'s domain.
    pub fn compose(outer: &CpMap, inner: &CpMap, tol: &Tolerance) -> Result<CpMap> {
        if inner.target_dim != outer.algebra.ambient_dim() {
            return Err(Error::ShapeMismatch(format!(
                "cannot compose: inner target M_{} vs outer domain in M_{}",
                inner.target_dim,
                outer.algebra.ambient_dim()
            )));
        }
        let values = inner
            .values
            .iter()
            .map(|v| outer.apply_checked(v, tol))
            .collect::<Result<_>>()?;
        CpMap::new(inner.algebra.clone(), outer.target_dim, values)
    }

    pub fn is_unital(&self, tol: &Tolerance) -> bool {
        let image = self.apply_matrix(&self.algebra.identity());
        let eye = CMatrix::identity(self.target_dim, self.target_dim);
        tol.is_negligible((image - eye).norm(), 1.0)
    }

    /// Largest `|φ(E_ji) - φ(E_ij)*|` over matrix units.
    pub fn hermiticity_defect(&self) -> f64 {
        let units = self.algebra.matrix_units();
        let index = |u: (usize, usize)| units.iter().position(|&w| w == u).expect("unit exists");
        units
            .iter()
            .zip(&self.values)
            .map(|(&(i, j), v)| (&self.values[index((j, i))] - v.adjoint()).norm())
            .fold(0.0, f64::max)
    }

    fn scale(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `J = sum_ij E_ij ⊗ φ(pinch(E_ij))`, of size `qm x qm`.
    pub fn choi(&self, tol: &Tolerance) -> Result<CMatrix> {
        let defect = self.hermiticity_defect();
        let allowed = tol.threshold(self.scale());
        if defect > allowed {
            return Err(Error::NotHermitian {
                deviation: defect,
                allowed,
            });
        }
        let (q, m) = (self.algebra.ambient_dim(), self.target_dim);
        let mut j = CMatrix::zeros(q * m, q * m);
        for ((a, b), v) in self.algebra.matrix_units().into_iter().zip(&self.values) {
            j.view_mut((a * m, b * m), (m, m)).copy_from(v);
        }
        Ok(j)
    }

    pub fn is_completely_positive(&self, tol: &Tolerance) -> Result<CpReport> {
        let report = is_psd(&self.choi(tol)?, tol)?;
        Ok(CpReport {
            completely_positive: report.psd,
            margin: report.min_eigenvalue,
            threshold: report.threshold,
        })
    }

    /// Kraus operators (`m x q`) from the scaled Choi eigenvectors whose
    /// eigenvalues clear the cutoff. Only the reconstruction
    /// `φ(a) = sum K a K*` is meaningful; the operators themselves are not
    /// unique.
    pub fn kraus(&self, tol: &Tolerance) -> Result<Vec<CMatrix>> {
        let choi = self.choi(tol)?;
        let spec = hermitian_eigen(&choi);
        let largest = spec.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let cutoff = tol.threshold(largest);
        if let Some(&min) = spec.values.first() {
            if min < -cutoff {
                return Err(Error::NotCompletelyPositive(min));
            }
        }
        let (q, m) = (self.algebra.ambient_dim(), self.target_dim);
        let kraus: Vec<CMatrix> = spec
            .values
            .iter()
            .enumerate()
            .rev()
            .filter(|(_, &lambda)| lambda > cutoff)
            .map(|(idx, &lambda)| {
                let v = spec.vectors.column(idx) * c64(lambda.sqrt(), 0.0);
                CMatrix::from_fn(m, q, |a, i| v[i * m + a])
            })
            .collect();

        let worst = self.reconstruction_error(|u| {
            kraus.iter().fold(CMatrix::zeros(m, m), |acc, k| acc + k * u * k.adjoint())
        });
        if worst > tol.threshold(self.scale()).max(1e-8 * self.scale().max(1.0)) {
            return Err(Error::Certification(format!(
                "Kraus reconstruction error {worst:.3e}"
            )));
        }
        Ok(kraus)
    }

    /// Largest `|φ(u) - f(u)|` over matrix units of the domain.
    pub fn reconstruction_error(&self, f: impl Fn(&CMatrix) -> CMatrix) -> f64 {
        self.algebra
            .matrix_units()
            .into_iter()
            .zip(&self.values)
            .map(|(u, v)| (f(&self.algebra.unit_matrix(u)) - v).norm())
            .fold(0.0, f64::max)
    }

    /// Dilation `φ(a) = V* (a ⊗ I_r) V` built from the Kraus operators.
    pub fn stinespring(&self, tol: &Tolerance) -> Result<StinespringDilation> {
        let kraus = self.kraus(tol)?;
        let dilation = StinespringDilation::from_kraus(
            kraus,
            self.algebra.ambient_dim(),
            self.target_dim,
        );
        let worst = self.reconstruction_error(|u| dilation.compress(u));
        if worst > tol.threshold(self.scale()).max(1e-10 * self.scale().max(1.0)) {
            return Err(Error::Certification(format!(
                "Stinespring identity error {worst:.3e}"
            )));
        }
        Ok(dilation)
    }

    /// Operator norm of the largest value, used as a size scale.
    pub fn value_norm(&self) -> f64 {
        self.values.iter().map(spectral_norm).fold(0.0, f64::max)
    }
}

/// `φ(a) = V* ρ(a) V` with `ρ(a) = a ⊗ I_r` on `C^q ⊗ C^r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StinespringDilation {
    #[serde(with = "crate::wire::matrices")]
    pub kraus: Vec<CMatrix>,
    pub rank: usize,
    /// `(q r) x m`, with `V h = sum_t (K_t* h) ⊗ e_t`.
    #[serde(with = "crate::wire::matrix")]
    pub v: CMatrix,
    pub ambient_dim: usize,
    pub target_dim: usize,
}

impl StinespringDilation {
    pub fn from_kraus(kraus: Vec<CMatrix>, ambient_dim: usize, target_dim: usize) -> Self {
        let r = kraus.len();
        let mut v = CMatrix::zeros(ambient_dim * r, target_dim);
        for (t, k) in kraus.iter().enumerate() {
            let kt = k.adjoint();
            for i in 0..ambient_dim {
                for a in 0..target_dim {
                    v[(i * r + t, a)] = kt[(i, a)];
                }
            }
        }
        Self {
            kraus,
            rank: r,
            v,
            ambient_dim,
            target_dim,
        }
    }

    /// The representation `a ↦ a ⊗ I_r`; also `x ↦ x ⊗ I_r` on module elements.
    pub fn rho(&self, a: &CMatrix) -> CMatrix {
        kron(a, &CMatrix::identity(self.rank, self.rank))
    }

    /// `V* ρ(a) V`.
    pub fn compress(&self, a: &CMatrix) -> CMatrix {
        self.v.adjoint() * self.rho(a) * &self.v
    }
}
