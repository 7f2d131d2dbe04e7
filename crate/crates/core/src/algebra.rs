//! Finite-dimensional C*-algebras realized as block-diagonal subalgebras
//! `M_{n_1} ⊕ ... ⊕ M_{n_b}` of `M_q`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ensure_shape, is_psd, matrix_unit, CMatrix, Tolerance};

/// Block sizes of a block-diagonal algebra. Always unital with unit `I_q`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawAlgebra")]
pub struct BlockAlgebra {
    blocks: Vec<usize>,
}

#[derive(Deserialize)]
struct RawAlgebra {
    blocks: Vec<usize>,
}

impl TryFrom<RawAlgebra> for BlockAlgebra {
    type Error = Error;
    fn try_from(raw: RawAlgebra) -> Result<Self> {
        BlockAlgebra::new(raw.blocks)
    }
}

impl BlockAlgebra {
    pub fn new(blocks: Vec<usize>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidAlgebra("at least one block is required".into()));
        }
        if blocks.contains(&0) {
            return Err(Error::InvalidAlgebra("block sizes must be positive".into()));
        }
        Ok(Self { blocks })
    }

    /// The full matrix algebra `M_n`.
    pub fn full(n: usize) -> Self {
        Self::new(vec![n]).expect("n must be positive")
    }

    /// The diagonal algebra `C ⊕ ... ⊕ C` with `n` summands.
    pub fn diagonal(n: usize) -> Self {
        Self::new(vec![1; n]).expect("n must be positive")
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    /// `q`, the size of the ambient matrix algebra.
    pub fn ambient_dim(&self) -> usize {
        self.blocks.iter().sum()
    }

    /// Vector-space dimension `sum n_i^2`.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|n| n * n).sum()
    }

    pub fn block_offsets(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .scan(0, |acc, &n| {
                let start = *acc;
                *acc += n;
                Some(start)
            })
            .collect()
    }

    /// Index range `[start, end)` of block `b` in the ambient space.
    pub fn block_range(&self, b: usize) -> std::ops::Range<usize> {
        let start: usize = self.blocks[..b].iter().sum();
        start..start + self.blocks[b]
    }

    /// Block containing ambient index `i`.
    pub fn block_of(&self, i: usize) -> Option<usize> {
        let mut start = 0;
        for (b, &n) in self.blocks.iter().enumerate() {
            if i < start + n {
                return Some(b);
            }
            start += n;
        }
        None
    }

    pub fn same_block(&self, i: usize, j: usize) -> bool {
        matches!((self.block_of(i), self.block_of(j)), (Some(a), Some(b)) if a == b)
    }

    /// Matrix units `E_ij` of the algebra as ambient index pairs:
    /// block-major, then row-major within each block.
    pub fn matrix_units(&self) -> Vec<(usize, usize)> {
        let mut units = Vec::with_capacity(self.dim());
        for b in 0..self.blocks.len() {
            let range = self.block_range(b);
            for i in range.clone() {
                for j in range.clone() {
                    units.push((i, j));
                }
            }
        }
        units
    }

    pub fn unit_matrix(&self, (i, j): (usize, usize)) -> CMatrix {
        let q = self.ambient_dim();
        matrix_unit(q, q, i, j)
    }

    pub fn identity(&self) -> CMatrix {
        let q = self.ambient_dim();
        CMatrix::identity(q, q)
    }

    fn check_ambient(&self, m: &CMatrix) -> Result<()> {
        let q = self.ambient_dim();
        ensure_shape(m, q, q, "algebra element")
    }

    /// Frobenius norm of the entries outside the diagonal blocks.
    pub fn off_block_mass(&self, m: &CMatrix) -> Result<f64> {
        self.check_ambient(m)?;
        let mut sum = 0.0;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if !self.same_block(i, j) {
                    sum += m[(i, j)].norm_sqr();
                }
            }
        }
        Ok(sum.sqrt())
    }

    pub fn contains(&self, m: &CMatrix, tol: &Tolerance) -> Result<bool> {
        let mass = self.off_block_mass(m)?;
        Ok(tol.is_negligible(mass, m.norm()))
    }

    /// Zeroes the off-block entries, without shape checks.
    pub(crate) fn pinch_matrix(&self, m: &CMatrix) -> CMatrix {
        let mut out = m.clone();
        for i in 0..out.nrows() {
            for j in 0..out.ncols() {
                if !self.same_block(i, j) {
                    out[(i, j)] = Complex64::ZERO;
                }
            }
        }
        out
    }

    /// Conditional expectation of `M_q` onto the algebra.
    pub fn pinch(&self, m: &CMatrix) -> Result<AlgebraElement> {
        self.check_ambient(m)?;
        Ok(AlgebraElement {
            algebra: self.clone(),
            value: self.pinch_matrix(m),
        })
    }

    /// Wraps `m` as an element, rejecting matrices with off-block mass.
    pub fn element(&self, m: CMatrix, tol: &Tolerance) -> Result<AlgebraElement> {
        let mass = self.off_block_mass(&m)?;
        if !tol.is_negligible(mass, m.norm()) {
            return Err(Error::OutsideAlgebra(mass));
        }
        Ok(AlgebraElement {
            algebra: self.clone(),
            value: self.pinch_matrix(&m),
        })
    }

    /// Coefficients of `m` on [`Self::matrix_units`] (off-block entries ignored).
    pub fn unit_coordinates(&self, m: &CMatrix) -> Vec<Complex64> {
        self.matrix_units().into_iter().map(|u| m[u]).collect()
    }

    /// True when every block of `self` sits inside one block of `other`
    /// (same ambient space), i.e. `self` is a block-aligned subalgebra.
    pub fn is_subalgebra_of(&self, other: &BlockAlgebra) -> bool {
        self.ambient_dim() == other.ambient_dim()
            && (0..self.blocks.len()).all(|b| {
                let r = self.block_range(b);
                other.same_block(r.start, r.end - 1)
            })
    }
}

/// An element of a [`BlockAlgebra`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgebraElement {
    algebra: BlockAlgebra,
    #[serde(rename = "matrix", with = "crate::wire::matrix")]
    value: CMatrix,
}

impl AlgebraElement {
    pub fn algebra(&self) -> &BlockAlgebra {
        &self.algebra
    }

    pub fn value(&self) -> &CMatrix {
        &self.value
    }

    pub fn into_value(self) -> CMatrix {
        self.value
    }

    pub fn is_positive(&self, tol: &Tolerance) -> Result<bool> {
        Ok(is_psd(&self.value, tol)?.psd)
    }
}

/// `a >= 0` in the algebra.
pub fn is_positive_element(a: &AlgebraElement, tol: &Tolerance) -> Result<bool> {
    a.is_positive(tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::real_matrix;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn rejects_empty_and_zero_blocks() {
        assert!(BlockAlgebra::new(vec![]).is_err());
        assert!(BlockAlgebra::new(vec![2, 0]).is_err());
    }

    #[test]
    fn dimensions() {
        let a = BlockAlgebra::new(vec![2, 1]).unwrap();
        assert_eq!(a.ambient_dim(), 3);
        assert_eq!(a.dim(), 5);
        assert_eq!(a.matrix_units(), vec![(0, 0), (0, 1), (1, 0), (1, 1), (2, 2)]);
        assert_eq!(a.block_offsets(), vec![0, 2]);
    }

    #[test]
    fn containment_examples() {
        let d = BlockAlgebra::diagonal(2);
        assert!(d.contains(&real_matrix(2, 2, &[1.0, 0.0, 0.0, 4.0]), &tol()).unwrap());
        assert!(!d.contains(&real_matrix(2, 2, &[1.0, 2.0, 3.0, 4.0]), &tol()).unwrap());
        let full = BlockAlgebra::full(2);
        assert!(full.contains(&real_matrix(2, 2, &[1.0, 2.0, 3.0, 4.0]), &tol()).unwrap());
        assert!(d.contains(&CMatrix::zeros(3, 3), &tol()).is_err());
    }

    #[test]
    fn pinch_examples() {
        let m = real_matrix(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let d = BlockAlgebra::diagonal(2);
        assert_eq!(
            d.pinch(&m).unwrap().into_value(),
            real_matrix(2, 2, &[1.0, 0.0, 0.0, 4.0])
        );
        assert_eq!(BlockAlgebra::full(2).pinch(&m).unwrap().into_value(), m);
    }

    #[test]
    fn positivity_examples() {
        let d = BlockAlgebra::diagonal(2);
        let id = d.element(d.identity(), &tol()).unwrap();
        assert!(is_positive_element(&id, &tol()).unwrap());
        let neg = d
            .element(real_matrix(2, 2, &[1.0, 0.0, 0.0, -1.0]), &tol())
            .unwrap();
        assert!(!is_positive_element(&neg, &tol()).unwrap());
    }

    #[test]
    fn element_outside_algebra_rejected() {
        let d = BlockAlgebra::diagonal(2);
        assert!(matches!(
            d.element(real_matrix(2, 2, &[1.0, 1.0, 0.0, 1.0]), &tol()),
            Err(Error::OutsideAlgebra(_))
        ));
    }

    #[test]
    fn subalgebra_relation() {
        let fine = BlockAlgebra::new(vec![1, 1, 2]).unwrap();
        let coarse = BlockAlgebra::new(vec![2, 2]).unwrap();
        assert!(fine.is_subalgebra_of(&coarse));
        assert!(!coarse.is_subalgebra_of(&fine));
        assert!(!BlockAlgebra::new(vec![1, 2, 1]).unwrap().is_subalgebra_of(&coarse));
    }

    #[test]
    fn json_shape() {
        let a: BlockAlgebra = serde_json::from_str(r#"{"blocks":[2,1]}"#).unwrap();
        assert_eq!(a.blocks(), &[2, 1]);
        assert!(serde_json::from_str::<BlockAlgebra>(r#"{"blocks":[]}"#).is_err());
    }
}
