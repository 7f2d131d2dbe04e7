//! Hilbert C*-modules realized as spaces of `p x q` matrices over a
//! [`BlockAlgebra`] in `M_q`, with inner product `<x, y> = x* y` and right
//! action by matrix multiplication.

use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, BlockAlgebra};
use crate::error::{Error, Result};
use crate::numerics::{
    ensure_finite, ensure_shape, flatten, hstack, nullspace, range_onb, rank, solve_coordinates,
    unflatten, CMatrix, CVector, Tolerance,
};

/// A right Hilbert module given by an explicit basis of `p x q` matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModule")]
pub struct ConcreteModule {
    algebra: BlockAlgebra,
    row_dim: usize,
    #[serde(with = "crate::wire::matrices")]
    basis: Vec<CMatrix>,
}

#[derive(Deserialize)]
struct RawModule {
    algebra: BlockAlgebra,
    row_dim: usize,
    #[serde(with = "crate::wire::matrices")]
    basis: Vec<CMatrix>,
}

impl TryFrom<RawModule> for ConcreteModule {
    type Error = Error;
    fn try_from(raw: RawModule) -> Result<Self> {
        ConcreteModule::new(raw.algebra, raw.row_dim, raw.basis)
    }
}

impl ConcreteModule {
    /// Checks shapes only; use [`Self::validate`] for the module axioms.
    pub fn new(algebra: BlockAlgebra, row_dim: usize, basis: Vec<CMatrix>) -> Result<Self> {
        if row_dim == 0 {
            return Err(Error::InvalidInput("row_dim must be positive".into()));
        }
        let q = algebra.ambient_dim();
        for (i, b) in basis.iter().enumerate() {
            ensure_shape(b, row_dim, q, &format!("basis element {i}"))?;
            ensure_finite(b)?;
        }
        Ok(Self {
            algebra,
            row_dim,
            basis,
        })
    }

    /// The zero module (empty basis).
    pub fn zero(algebra: BlockAlgebra, row_dim: usize) -> Self {
        Self::new(algebra, row_dim, vec![]).expect("positive row_dim")
    }

    /// All `p x q` matrices, spanned by matrix units.
    pub fn full(algebra: BlockAlgebra, row_dim: usize) -> Self {
        let q = algebra.ambient_dim();
        let mut basis = Vec::with_capacity(row_dim * q);
        for i in 0..row_dim {
            for j in 0..q {
                basis.push(crate::numerics::matrix_unit(row_dim, q, i, j));
            }
        }
        Self::new(algebra, row_dim, basis).expect("shapes are consistent")
    }

    pub fn algebra(&self) -> &BlockAlgebra {
        &self.algebra
    }

    pub fn row_dim(&self) -> usize {
        self.row_dim
    }

    pub fn col_dim(&self) -> usize {
        self.algebra.ambient_dim()
    }

    pub fn basis(&self) -> &[CMatrix] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn is_zero(&self) -> bool {
        self.basis.is_empty()
    }

    /// Basis elements flattened into the columns of one matrix.
    pub fn basis_columns(&self) -> CMatrix {
        let cols: Vec<CVector> = self.basis.iter().map(flatten).collect();
        hstack(&cols, self.row_dim * self.col_dim()).expect("uniform shapes")
    }

    /// Coordinates of `x` in the basis. Fails when `x` is outside the span.
    pub fn coordinates(&self, x: &CMatrix, tol: &Tolerance) -> Result<CVector> {
        ensure_shape(x, self.row_dim, self.col_dim(), "module element")?;
        let (coords, residual) = solve_coordinates(&self.basis_columns(), &flatten(x), tol);
        if !tol.is_negligible(residual, x.norm()) {
            return Err(Error::NotInSpan(residual));
        }
        Ok(coords)
    }

    pub fn contains_matrix(&self, x: &CMatrix, tol: &Tolerance) -> bool {
        self.coordinates(x, tol).is_ok()
    }

    pub fn element(&self, x: CMatrix, tol: &Tolerance) -> Result<ModuleElement<'_>> {
        self.coordinates(&x, tol)?;
        Ok(ModuleElement {
            module: self,
            value: x,
        })
    }

    /// Linear combination `sum_i c_i basis_i`.
    pub fn combine(&self, coords: &CVector) -> CMatrix {
        let mut out = CMatrix::zeros(self.row_dim, self.col_dim());
        for (b, c) in self.basis.iter().zip(coords.iter()) {
            out += b * *c;
        }
        out
    }

    /// Frobenius-orthonormal basis of the same span.
    pub fn orthonormal_basis(&self, tol: &Tolerance) -> Vec<CMatrix> {
        let q = range_onb(&self.basis_columns(), tol);
        q.column_iter()
            .map(|c| unflatten(&c.into_owned(), self.row_dim, self.col_dim()))
            .collect()
    }

    /// Same module with a Frobenius-orthonormal basis.
    pub fn orthonormalized(&self, tol: &Tolerance) -> Self {
        Self {
            algebra: self.algebra.clone(),
            row_dim: self.row_dim,
            basis: self.orthonormal_basis(tol),
        }
    }

    /// Checks the module axioms and reports every violation found.
    pub fn validate(&self, tol: &Tolerance) -> ValidationReport {
        let mut report = ValidationReport::default();
        let cols = self.basis_columns();
        let r = rank(&cols, tol);
        if r < self.dim() {
            report.dependent_basis = Some(DependentBasis {
                rank: r,
                size: self.dim(),
            });
        }
        for (i, x) in self.basis.iter().enumerate() {
            for (j, y) in self.basis.iter().enumerate() {
                let ip = x.adjoint() * y;
                let mass = self.algebra.off_block_mass(&ip).expect("q x q");
                if !tol.is_negligible(mass, x.norm() * y.norm()) {
                    report.inner_product_escapes.push(PairViolation {
                        i,
                        j,
                        magnitude: mass,
                    });
                }
            }
        }
        for (i, x) in self.basis.iter().enumerate() {
            for unit in self.algebra.matrix_units() {
                let xa = x * self.algebra.unit_matrix(unit);
                let (_, residual) = solve_coordinates(&cols, &flatten(&xa), tol);
                if !tol.is_negligible(residual, x.norm()) {
                    report.action_not_closed.push(ActionViolation {
                        basis_index: i,
                        unit,
                        residual,
                    });
                }
            }
        }
        report
    }

    fn check_compatible(&self, other: &ConcreteModule, what: &str) -> Result<()> {
        if self.algebra != other.algebra || self.row_dim != other.row_dim {
            return Err(Error::ShapeMismatch(format!(
                "{what}: modules must share algebra and row dimension"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DependentBasis {
    pub rank: usize,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairViolation {
    pub i: usize,
    pub j: usize,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionViolation {
    pub basis_index: usize,
    pub unit: (usize, usize),
    pub residual: f64,
}

/// Axiom violations found by [`ConcreteModule::validate`].
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub dependent_basis: Option<DependentBasis>,
    pub inner_product_escapes: Vec<PairViolation>,
    pub action_not_closed: Vec<ActionViolation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.dependent_basis.is_none()
            && self.inner_product_escapes.is_empty()
            && self.action_not_closed.is_empty()
    }
}

pub fn validate_module(e: &ConcreteModule, tol: &Tolerance) -> ValidationReport {
    e.validate(tol)
}

/// A matrix known to lie in a particular module.
#[derive(Debug, Clone)]
pub struct ModuleElement<'m> {
    module: &'m ConcreteModule,
    value: CMatrix,
}

impl<'m> ModuleElement<'m> {
    pub fn module(&self) -> &'m ConcreteModule {
        self.module
    }

    pub fn value(&self) -> &CMatrix {
        &self.value
    }
}

/// `<x, y> = x* y`, checked to land in the algebra.
pub fn inner_product(
    x: &ModuleElement<'_>,
    y: &ModuleElement<'_>,
    tol: &Tolerance,
) -> Result<AlgebraElement> {
    if x.module != y.module {
        return Err(Error::ShapeMismatch(
            "inner product of elements from different modules".into(),
        ));
    }
    let ip = x.value.adjoint() * &y.value;
    x.module.algebra.element(ip, tol).map_err(|e| match e {
        Error::OutsideAlgebra(mass) => Error::ModuleIntegrity(format!(
            "inner product leaves the algebra (off-block mass {mass:.3e})"
        )),
        other => other,
    })
}

/// `F ⊆ E` as modules: `F` is valid and its span lies in `E`'s.
pub fn is_submodule(f: &ConcreteModule, e: &ConcreteModule, tol: &Tolerance) -> Result<bool> {
    f.check_compatible(e, "submodule test")?;
    if !f.validate(tol).is_valid() {
        return Ok(false);
    }
    Ok(f.basis.iter().all(|x| e.contains_matrix(x, tol)))
}

/// `F⊥ = {x ∈ E : <x, f> = 0 for all f ∈ F}`, with an orthonormal basis.
pub fn orthogonal_complement(
    f: &ConcreteModule,
    e: &ConcreteModule,
    tol: &Tolerance,
) -> Result<ConcreteModule> {
    if !is_submodule(f, e, tol)? {
        return Err(Error::Precondition(
            "orthogonal complement requires F to be a submodule of E".into(),
        ));
    }
    let q = e.col_dim();
    if e.is_zero() {
        return Ok(e.clone());
    }
    // Rows: the entries of f_j* e_k, linear in the coefficients of x.
    let mut system = CMatrix::zeros(f.dim() * q * q, e.dim());
    for (j, fj) in f.basis.iter().enumerate() {
        for (k, ek) in e.basis.iter().enumerate() {
            let block = flatten(&(fj.adjoint() * ek));
            system
                .view_mut((j * q * q, k), (q * q, 1))
                .copy_from(&block);
        }
    }
    let kernel = nullspace(&system, tol);
    let basis: Vec<CMatrix> = kernel
        .column_iter()
        .map(|c| e.combine(&c.into_owned()))
        .collect();
    let complement = ConcreteModule::new(e.algebra.clone(), e.row_dim, basis)?;
    Ok(complement.orthonormalized(tol))
}

/// Whether the inner products span all of the algebra.
pub fn is_full(e: &ConcreteModule, tol: &Tolerance) -> bool {
    if e.is_zero() {
        return false;
    }
    let products: Vec<CVector> = e
        .basis
        .iter()
        .flat_map(|x| e.basis.iter().map(move |y| flatten(&(x.adjoint() * y))))
        .collect();
    let q = e.col_dim();
    let m = hstack(&products, q * q).expect("q x q products");
    rank(&m, tol) == e.algebra.dim()
}

/// Internal direct sum `F ⊕ G` of two submodules with trivial intersection.
pub fn direct_sum(
    f: &ConcreteModule,
    g: &ConcreteModule,
    tol: &Tolerance,
) -> Result<ConcreteModule> {
    f.check_compatible(g, "internal direct sum")?;
    let basis: Vec<CMatrix> = f.basis.iter().chain(g.basis.iter()).cloned().collect();
    let sum = ConcreteModule::new(f.algebra.clone(), f.row_dim, basis)?;
    if rank(&sum.basis_columns(), tol) < sum.dim() {
        return Err(Error::NontrivialIntersection);
    }
    Ok(sum)
}

/// External direct sum: elements `[f; g]` stacked by rows.
pub fn external_direct_sum(f: &ConcreteModule, g: &ConcreteModule) -> Result<ConcreteModule> {
    if f.algebra != g.algebra {
        return Err(Error::ShapeMismatch(
            "external direct sum requires a common algebra".into(),
        ));
    }
    let (pf, pg, q) = (f.row_dim, g.row_dim, f.col_dim());
    let stack = |top: Option<&CMatrix>, bottom: Option<&CMatrix>| {
        let mut m = CMatrix::zeros(pf + pg, q);
        if let Some(t) = top {
            m.view_mut((0, 0), (pf, q)).copy_from(t);
        }
        if let Some(b) = bottom {
            m.view_mut((pf, 0), (pg, q)).copy_from(b);
        }
        m
    };
    let basis = f
        .basis
        .iter()
        .map(|x| stack(Some(x), None))
        .chain(g.basis.iter().map(|y| stack(None, Some(y))))
        .collect();
    ConcreteModule::new(f.algebra.clone(), pf + pg, basis)
}

/// Caller-declared embedding of `(E, A)` into `(F, B)`: each block of `A`
/// is assigned the block of `B` containing it, and module elements are
/// carried over by left multiplication with `row_map`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEmbedding {
    pub block_map: Vec<usize>,
    pub row_map: CMatrix,
}

impl PairEmbedding {
    /// Identity on rows (`p_E = p_F`).
    pub fn inclusion(block_map: Vec<usize>, row_dim: usize) -> Self {
        Self {
            block_map,
            row_map: CMatrix::identity(row_dim, row_dim),
        }
    }
}

/// `(E, A) ⊂ (F, B)`: `A` is a subalgebra of `B`, `E ⊆ F` under the
/// embedding, and inner products computed in `E` and in `F` agree.
pub fn is_contained_pair(
    e: &ConcreteModule,
    f: &ConcreteModule,
    embedding: &PairEmbedding,
    tol: &Tolerance,
) -> Result<bool> {
    let (a, b) = (e.algebra(), f.algebra());
    if a.ambient_dim() != b.ambient_dim() {
        return Err(Error::InvalidEmbedding(format!(
            "algebras act on different spaces ({} vs {})",
            a.ambient_dim(),
            b.ambient_dim()
        )));
    }
    if embedding.block_map.len() != a.blocks().len() {
        return Err(Error::InvalidEmbedding(format!(
            "block map has {} entries for {} blocks",
            embedding.block_map.len(),
            a.blocks().len()
        )));
    }
    for (i, &target) in embedding.block_map.iter().enumerate() {
        if target >= b.blocks().len() {
            return Err(Error::InvalidEmbedding(format!("block {i} mapped to missing block {target}")));
        }
        let src = a.block_range(i);
        let dst = b.block_range(target);
        if src.start < dst.start || src.end > dst.end {
            return Err(Error::InvalidEmbedding(format!(
                "block {i} ({src:?}) is not inside block {target} ({dst:?})"
            )));
        }
    }
    ensure_shape(&embedding.row_map, f.row_dim(), e.row_dim(), "row map")
        .map_err(|err| Error::InvalidEmbedding(err.to_string()))?;

    let image: Vec<CMatrix> = e.basis.iter().map(|x| &embedding.row_map * x).collect();
    if !image.iter().all(|x| f.contains_matrix(x, tol)) {
        return Ok(false);
    }
    for (x, ix) in e.basis.iter().zip(&image) {
        for (y, iy) in e.basis.iter().zip(&image) {
            let inner_e = x.adjoint() * y;
            let inner_f = ix.adjoint() * iy;
            let scale = inner_e.norm().max(inner_f.norm());
            if !tol.is_negligible((inner_e - inner_f).norm(), scale) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
