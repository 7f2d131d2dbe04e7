//! The operator system `S_A(E) = [[C I_p, E], [E*, A]] ⊆ M_{p+q}`, the block
//! map `[[λ, x], [y*, a]] ↦ [[λ, Φ(x)], [Φ(y)*, φ(a)]]`, and corner analysis.
//!
//! For a linear `Φ`, the block map is completely positive exactly when `Φ`
//! is completely semi-φ, so [`is_cp_system_map`] decides through the Gram
//! comparison and uses random positive elements of `M_n(S)` as a
//! falsification layer.

use serde::{Deserialize, Serialize};

use crate::algebra::BlockAlgebra;
use crate::cpmap::{CpMap, CpReport};
use crate::error::{Error, Result};
use crate::extension::{cert_threshold, construct, is_completely_semi_phi, ModuleMap, SemiPhiReport};
use crate::fixtures::{fixture_rng, random_matrix, FixtureRng};
use crate::modules::{is_contained_pair, ConcreteModule, PairEmbedding};
use crate::numerics::{
    c64, flatten, hermitian_eigen, pseudo_inverse, spectral_norm, CMatrix, CVector,
    Tolerance,
};

/// Row/column partition `(p | q)` of a block matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CornerLayout {
    pub p: usize,
    pub q: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Scalar,
    Corner,
    AdjointCorner,
    Diagonal,
}

impl CornerLayout {
    pub fn new(p: usize, q: usize) -> Self {
        Self { p, q }
    }

    pub fn size(&self) -> usize {
        self.p + self.q
    }

    /// Region of entry `(i, j)`; `None` outside the leading `(p+q)` window.
    pub fn part_of(&self, i: usize, j: usize) -> Option<Part> {
        let (p, n) = (self.p, self.size());
        if i >= n || j >= n {
            return None;
        }
        Some(match (i < p, j < p) {
            (true, true) => Part::Scalar,
            (true, false) => Part::Corner,
            (false, true) => Part::AdjointCorner,
            (false, false) => Part::Diagonal,
        })
    }
}

fn assemble(layout: CornerLayout, tl: &CMatrix, tr: &CMatrix, bl: &CMatrix, br: &CMatrix) -> CMatrix {
    let (p, q) = (layout.p, layout.q);
    let mut z = CMatrix::zeros(p + q, p + q);
    z.view_mut((0, 0), (p, p)).copy_from(tl);
    z.view_mut((0, p), (p, q)).copy_from(tr);
    z.view_mut((p, 0), (q, p)).copy_from(bl);
    z.view_mut((p, p), (q, q)).copy_from(br);
    z
}

/// `S_A(E)` as a subspace of `M_{p+q}` with a fixed basis: the scalar
/// `[[I_p, 0], [0, 0]]`, then `[[0, x], [0, 0]]` and `[[0, 0], [x*, 0]]` for
/// each basis element `x` of `E`, then the matrix units of `A`.
#[derive(Debug, Clone, Serialize)]
pub struct PaulsenSystem {
    module: ConcreteModule,
    layout: CornerLayout,
    #[serde(with = "crate::wire::matrices")]
    basis: Vec<CMatrix>,
    #[serde(skip)]
    columns: CMatrix,
    #[serde(skip)]
    solver: CMatrix,
}

impl PartialEq for PaulsenSystem {
    fn eq(&self, other: &Self) -> bool {
        self.module == other.module
    }
}

pub fn build_system(e: &ConcreteModule) -> PaulsenSystem {
    let layout = CornerLayout::new(e.row_dim(), e.col_dim());
    let (p, q) = (layout.p, layout.q);
    let zpp = CMatrix::zeros(p, p);
    let zpq = CMatrix::zeros(p, q);
    let zqp = CMatrix::zeros(q, p);
    let zqq = CMatrix::zeros(q, q);
    let mut basis = vec![assemble(layout, &CMatrix::identity(p, p), &zpq, &zqp, &zqq)];
    for x in e.basis() {
        basis.push(assemble(layout, &zpp, x, &zqp, &zqq));
    }
    for x in e.basis() {
        basis.push(assemble(layout, &zpp, &zpq, &x.adjoint(), &zqq));
    }
    let algebra = e.algebra();
    for u in algebra.matrix_units() {
        basis.push(assemble(layout, &zpp, &zpq, &zqp, &algebra.unit_matrix(u)));
    }
    let n = layout.size();
    let mut columns = CMatrix::zeros(n * n, basis.len());
    for (i, b) in basis.iter().enumerate() {
        columns.set_column(i, &flatten(b));
    }
    // The basis is independent by construction, so the pseudo-inverse is an
    // exact left inverse.
    let solver = pseudo_inverse(&columns, &Tolerance::default());
    PaulsenSystem {
        module: e.clone(),
        layout,
        basis,
        columns,
        solver,
    }
}

impl PaulsenSystem {
    pub fn module(&self) -> &ConcreteModule {
        &self.module
    }

    pub fn algebra(&self) -> &BlockAlgebra {
        self.module.algebra()
    }

    pub fn layout(&self) -> CornerLayout {
        self.layout
    }

    pub fn basis(&self) -> &[CMatrix] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.layout.size()
    }

    pub fn identity(&self) -> CMatrix {
        let n = self.ambient_dim();
        CMatrix::identity(n, n)
    }

    /// `[[λ I_p, x], [y*, a]]`.
    pub fn element(&self, lambda: f64, x: &CMatrix, y: &CMatrix, a: &CMatrix) -> CMatrix {
        let p = self.layout.p;
        assemble(
            self.layout,
            &(CMatrix::identity(p, p) * c64(lambda, 0.0)),
            x,
            &y.adjoint(),
            a,
        )
    }

    /// Coordinates of `z` in the system basis.
    pub fn coordinates(&self, z: &CMatrix, tol: &Tolerance) -> Result<CVector> {
        let n = self.ambient_dim();
        if z.shape() != (n, n) {
            return Err(Error::ShapeMismatch(format!(
                "expected a {n} x {n} matrix, got {} x {}",
                z.nrows(),
                z.ncols()
            )));
        }
        let target = flatten(z);
        let coords = &self.solver * &target;
        let residual = (&self.columns * &coords - &target).norm();
        if !tol.is_negligible(residual, target.norm()) {
            return Err(Error::NotInSpan(residual));
        }
        Ok(coords)
    }

    pub fn contains(&self, z: &CMatrix, tol: &Tolerance) -> bool {
        self.coordinates(z, tol).is_ok()
    }

    /// Random positive element of `M_n(S)` in interleaved block form (each
    /// of the `n x n` blocks is a `(p+q) x (p+q)` element of the system).
    ///
    /// Built as `[[Λ ⊗ I_p, X], [X*, X* (Λ^-1 ⊗ I_p) X + D]]`, with `Λ`
    /// positive definite, `X ∈ M_n(E)` and `D` a blockwise pinching of a
    /// positive matrix, which is positive by the Schur complement.
    pub fn random_positive(&self, n: usize, rng: &mut FixtureRng) -> CMatrix {
        let (p, q) = (self.layout.p, self.layout.q);
        let g = random_matrix(rng, n, n);
        let lambda = &g * g.adjoint() + CMatrix::identity(n, n) * c64(0.1, 0.0);
        let lambda_inv = lambda
            .clone()
            .try_inverse()
            .expect("positive definite matrices are invertible");
        let eye_p = CMatrix::identity(p, p);

        let mut x = CMatrix::zeros(n * p, n * q);
        for i in 0..n {
            for j in 0..n {
                let coords = random_matrix(rng, self.module.dim(), 1).column(0).into_owned();
                let block = self.module.combine(&coords);
                x.view_mut((i * p, j * q), (p, q)).copy_from(&block);
            }
        }
        let w = random_matrix(rng, n * q, n * q);
        let mut d = &w.adjoint() * &w;
        let algebra = self.algebra();
        for i in 0..n {
            for j in 0..n {
                let block = d.view((i * q, j * q), (q, q)).into_owned();
                let pinched = algebra.pinch(&block).expect("square block").into_value();
                d.view_mut((i * q, j * q), (q, q)).copy_from(&pinched);
            }
        }
        let top = crate::numerics::kron(&lambda, &eye_p);
        let bottom = x.adjoint() * crate::numerics::kron(&lambda_inv, &eye_p) * &x + d;
        let mut z = CMatrix::zeros(n * (p + q), n * (p + q));
        z.view_mut((0, 0), (n * p, n * p)).copy_from(&top);
        z.view_mut((0, n * p), (n * p, n * q)).copy_from(&x);
        z.view_mut((n * p, 0), (n * q, n * p)).copy_from(&x.adjoint());
        z.view_mut((n * p, n * p), (n * q, n * q)).copy_from(&bottom);
        interleave(n, self.layout, &z)
    }
}

/// Reorders a matrix written as `[[M_n(C^p) part, ...], [..., M_n(C^q) part]]`
/// into an `n x n` array of `(p+q) x (p+q)` blocks.
pub fn interleave(n: usize, layout: CornerLayout, z: &CMatrix) -> CMatrix {
    let (p, q) = (layout.p, layout.q);
    let s = p + q;
    let index = |k: usize| -> usize {
        if k < n * p {
            (k / p) * s + k % p
        } else {
            let k = k - n * p;
            (k / q) * s + p + k % q
        }
    };
    let mut out = CMatrix::zeros(n * s, n * s);
    for i in 0..n * s {
        for j in 0..n * s {
            out[(index(i), index(j))] = z[(i, j)];
        }
    }
    out
}

#[derive(Debug, Clone)]
struct CornerParts {
    map: ModuleMap,
    phi: CpMap,
}

/// A linear map between Paulsen systems, stored by its values on the
/// domain basis. Maps built by [`block_map`] also remember `(Φ, φ)`.
#[derive(Debug, Clone, Serialize)]
pub struct SystemMap {
    domain: PaulsenSystem,
    codomain: PaulsenSystem,
    #[serde(with = "crate::wire::matrices")]
    values: Vec<CMatrix>,
    unital: bool,
    #[serde(skip)]
    corner: Option<CornerParts>,
}

impl SystemMap {
    pub fn new(
        domain: PaulsenSystem,
        codomain: PaulsenSystem,
        values: Vec<CMatrix>,
        tol: &Tolerance,
    ) -> Result<Self> {
        if values.len() != domain.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a system of dimension {}",
                values.len(),
                domain.dim()
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if let Err(err) = codomain.coordinates(v, tol) {
                return Err(Error::RangeOutsideCodomain(format!(
                    "image of basis element {i}: {err}"
                )));
            }
        }
        let mut map = Self {
            domain,
            codomain,
            values,
            unital: false,
            corner: None,
        };
        let image = map.apply(&map.domain.identity(), tol)?;
        let target = map.codomain.identity();
        map.unital = tol.is_negligible((image - &target).norm(), target.norm());
        Ok(map)
    }

    pub fn domain(&self) -> &PaulsenSystem {
        &self.domain
    }

    pub fn codomain(&self) -> &PaulsenSystem {
        &self.codomain
    }

    pub fn values(&self) -> &[CMatrix] {
        &self.values
    }

    pub fn is_unital(&self) -> bool {
        self.unital
    }

    pub fn is_corner_structured(&self) -> bool {
        self.corner.is_some()
    }

    /// `(Φ, φ)` when the map came from [`block_map`].
    pub fn corner_parts(&self) -> Option<(&ModuleMap, &CpMap)> {
        self.corner.as_ref().map(|c| (&c.map, &c.phi))
    }

    pub fn apply(&self, z: &CMatrix, tol: &Tolerance) -> Result<CMatrix> {
        let coords = self.domain.coordinates(z, tol)?;
        let n = self.codomain.ambient_dim();
        let mut out = CMatrix::zeros(n, n);
        for (v, c) in self.values.iter().zip(coords.iter()) {
            out += v * *c;
        }
        Ok(out)
    }

    /// The amplification to `M_n(S)`, acting on each block.
    pub fn apply_n(&self, n: usize, z: &CMatrix, tol: &Tolerance) -> Result<CMatrix> {
        let (s, t) = (self.domain.ambient_dim(), self.codomain.ambient_dim());
        crate::numerics::ensure_shape(z, n * s, n * s, "amplified argument")?;
        let mut out = CMatrix::zeros(n * t, n * t);
        for i in 0..n {
            for j in 0..n {
                let block = z.view((i * s, j * s), (s, s)).into_owned();
                out.view_mut((i * t, j * t), (t, t))
                    .copy_from(&self.apply(&block, tol)?);
            }
        }
        Ok(out)
    }

    /// `outer ∘ inner`; `inner` must land in `outer`'s domain.
    pub fn compose(outer: &SystemMap, inner: &SystemMap, tol: &Tolerance) -> Result<SystemMap> {
        if inner.codomain != outer.domain {
            return Err(Error::ShapeMismatch(
                "inner codomain is not the outer domain".into(),
            ));
        }
        let values = inner
            .values
            .iter()
            .map(|v| outer.apply(v, tol))
            .collect::<Result<_>>()?;
        let mut composed = SystemMap::new(inner.domain.clone(), outer.codomain.clone(), values, tol)?;
        if let (Some(a), Some(b)) = (&outer.corner, &inner.corner) {
            composed.corner = Some(CornerParts {
                map: ModuleMap::compose(&a.map, &b.map, tol)?,
                phi: CpMap::compose(&a.phi, &b.phi, tol)?,
            });
        }
        Ok(composed)
    }

    /// Largest Frobenius distance between values on the shared basis.
    pub fn max_distance(&self, other: &SystemMap) -> Result<f64> {
        if self.values.len() != other.values.len()
            || self.codomain.ambient_dim() != other.codomain.ambient_dim()
        {
            return Err(Error::ShapeMismatch("system maps are not comparable".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn corner_report(&self, tol: &Tolerance) -> Result<CornerReport> {
        is_corner_preserving(
            self.domain.basis(),
            &self.values,
            self.domain.layout(),
            self.codomain.layout(),
            tol,
        )
    }
}

/// `[[λ, x], [y*, a]] ↦ [[λ, Φ(x)], [Φ(y)*, φ(a)]]` from `S_A(E)` into
/// `S_B(F)`. `codomain` is `F ⊆ M_{k x m}` over `B ⊆ M_m`; by default all of
/// `M_{k x m}` over `M_m`.
pub fn block_map(
    map: &ModuleMap,
    phi: &CpMap,
    codomain: Option<&ConcreteModule>,
    tol: &Tolerance,
) -> Result<SystemMap> {
    crate::extension::check_pair(map, phi)?;
    let (m, k) = (map.h1_dim(), map.h2_dim());
    let f = match codomain {
        Some(f) => f.clone(),
        None => ConcreteModule::full(BlockAlgebra::full(m), k),
    };
    if f.row_dim() != k || f.col_dim() != m {
        return Err(Error::ShapeMismatch(format!(
            "codomain module is {} x {}, map values are {k} x {m}",
            f.row_dim(),
            f.col_dim()
        )));
    }
    for (i, v) in map.values().iter().enumerate() {
        if !f.contains_matrix(v, tol) {
            return Err(Error::RangeOutsideCodomain(format!(
                "Φ of basis element {i} is not in the codomain module"
            )));
        }
    }
    for (i, v) in phi.values().iter().enumerate() {
        if !f.algebra().contains(v, tol)? {
            return Err(Error::RangeOutsideCodomain(format!(
                "φ of matrix unit {i} is not in the codomain algebra"
            )));
        }
    }
    let domain = build_system(map.domain());
    let target = build_system(&f);
    let e = map.domain();
    let zkm = CMatrix::zeros(k, m);
    let zmm = CMatrix::zeros(m, m);

    let mut values = vec![target.element(1.0, &zkm, &zkm, &zmm)];
    for v in map.values() {
        values.push(target.element(0.0, v, &zkm, &zmm));
    }
    for v in map.values() {
        values.push(target.element(0.0, &zkm, v, &zmm));
    }
    for v in phi.values() {
        values.push(target.element(0.0, &zkm, &zkm, v));
    }
    debug_assert_eq!(values.len(), 1 + 2 * e.dim() + e.algebra().dim());
    let mut sm = SystemMap::new(domain, target, values, tol)?;
    sm.corner = Some(CornerParts {
        map: map.clone(),
        phi: phi.clone(),
    });
    Ok(sm)
}

/// A positive element of `M_n(S)` whose image is not positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityWitness {
    pub level: usize,
    #[serde(with = "crate::wire::matrix")]
    pub input: CMatrix,
    #[serde(with = "crate::wire::matrix")]
    pub image: CMatrix,
    pub input_min_eigenvalue: f64,
    pub image_min_eigenvalue: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleReport {
    pub samples: usize,
    /// Worst `λ_min(image) / max(1, |image|)` seen.
    pub worst_relative_eigenvalue: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemCpReport {
    pub completely_positive: bool,
    pub semi_phi: SemiPhiReport,
    pub witness: Option<PositivityWitness>,
    pub sampling: SampleReport,
}

fn min_eigenvalue(m: &CMatrix) -> f64 {
    let h = (m + m.adjoint()) * c64(0.5, 0.0);
    hermitian_eigen(&h).values.first().copied().unwrap_or(0.0)
}

/// Applies `sm` at level `n` to `count` random positive elements and
/// records the worst relative eigenvalue of the images.
pub fn sample_positivity(
    sm: &SystemMap,
    n: usize,
    count: usize,
    rng: &mut FixtureRng,
    tol: &Tolerance,
) -> Result<SampleReport> {
    let mut worst = f64::INFINITY;
    for _ in 0..count {
        let z = sm.domain.random_positive(n, rng);
        let image = sm.apply_n(n, &z, tol)?;
        let scale = spectral_norm(&image).max(1.0);
        worst = worst.min(min_eigenvalue(&image) / scale);
    }
    Ok(SampleReport {
        samples: count,
        worst_relative_eigenvalue: if count == 0 { 0.0 } else { worst },
    })
}

/// `Z = [[I, X], [X*, X* X]]` at level `dim E`, with the basis of `E` as the
/// first row of `X`. `Z` is positive, and its image is positive exactly when
/// the Gram comparison holds.
pub fn canonical_witness(sm: &SystemMap, tol: &Tolerance) -> Result<PositivityWitness> {
    let e = sm.domain.module();
    let layout = sm.domain.layout();
    let (p, q, n) = (layout.p, layout.q, e.dim().max(1));
    let mut x = CMatrix::zeros(n * p, n * q);
    for (j, b) in e.basis().iter().enumerate() {
        x.view_mut((0, j * q), (p, q)).copy_from(b);
    }
    let mut z = CMatrix::zeros(n * (p + q), n * (p + q));
    z.view_mut((0, 0), (n * p, n * p)).fill_with_identity();
    z.view_mut((0, n * p), (n * p, n * q)).copy_from(&x);
    z.view_mut((n * p, 0), (n * q, n * p)).copy_from(&x.adjoint());
    z.view_mut((n * p, n * p), (n * q, n * q))
        .copy_from(&(x.adjoint() * &x));
    let input = interleave(n, layout, &z);
    let image = sm.apply_n(n, &input, tol)?;
    Ok(PositivityWitness {
        level: n,
        input_min_eigenvalue: min_eigenvalue(&input),
        image_min_eigenvalue: min_eigenvalue(&image),
        input,
        image,
    })
}

const INTERNAL_SAMPLES: usize = 5;
const SAMPLE_SEED: u64 = 0x5eed;

/// Complete positivity of a block map, decided by the semi-φ comparison.
/// A positive verdict is checked on random positive elements at levels
/// 1..=3; a negative one comes with the canonical witness.
pub fn is_cp_system_map(sm: &SystemMap, tol: &Tolerance) -> Result<SystemCpReport> {
    let parts = sm.corner.as_ref().ok_or(Error::NotCornerStructured)?;
    let semi_phi = is_completely_semi_phi(&parts.map, &parts.phi, tol)?;
    if semi_phi.holds {
        let mut rng = fixture_rng(SAMPLE_SEED, 0);
        let mut worst = f64::INFINITY;
        for n in 1..=3 {
            let report = sample_positivity(sm, n, INTERNAL_SAMPLES, &mut rng, tol)?;
            worst = worst.min(report.worst_relative_eigenvalue);
        }
        if worst < -cert_threshold(tol, 1.0) {
            return Err(Error::Certification(format!(
                "sampled positive element maps to λ_min/scale = {worst:.3e}"
            )));
        }
        Ok(SystemCpReport {
            completely_positive: true,
            semi_phi,
            witness: None,
            sampling: SampleReport {
                samples: 3 * INTERNAL_SAMPLES,
                worst_relative_eigenvalue: worst,
            },
        })
    } else {
        let witness = canonical_witness(sm, tol)?;
        let scale = spectral_norm(&witness.image).max(1.0);
        if witness.image_min_eigenvalue >= -tol.threshold(scale) {
            return Err(Error::Certification(format!(
                "canonical witness image is positive (λ_min = {:.3e})",
                witness.image_min_eigenvalue
            )));
        }
        Ok(SystemCpReport {
            completely_positive: false,
            semi_phi,
            sampling: SampleReport {
                samples: 0,
                worst_relative_eigenvalue: witness.image_min_eigenvalue / scale,
            },
            witness: Some(witness),
        })
    }
}

/// An image entry outside the part its source lies in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CornerViolation {
    pub basis_index: usize,
    pub source: Part,
    /// Largest offending entry of the image, 0-based.
    pub entry: (usize, usize),
    /// Part of the codomain layout containing that entry, if any.
    pub landed: Option<Part>,
    pub magnitude: f64,
}

impl CornerViolation {
    /// 1-based position of the offending entry in units of `h x h` blocks.
    pub fn block_position(&self, h: usize) -> (usize, usize) {
        (self.entry.0 / h + 1, self.entry.1 / h + 1)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CornerReport {
    pub preserving: bool,
    pub violations: Vec<CornerViolation>,
}

/// Checks that each structural part of the domain (scalar, corner,
/// adjoint corner, diagonal) maps into the same part of the codomain.
/// Entries outside the leading `(p+q)` window of a larger codomain count as
/// violations. Every basis element must lie in a single part.
pub fn is_corner_preserving(
    basis: &[CMatrix],
    images: &[CMatrix],
    layout_in: CornerLayout,
    layout_out: CornerLayout,
    tol: &Tolerance,
) -> Result<CornerReport> {
    if basis.len() != images.len() {
        return Err(Error::LayoutMismatch(format!(
            "{} basis elements but {} images",
            basis.len(),
            images.len()
        )));
    }
    let mut violations = Vec::new();
    for (idx, (b, img)) in basis.iter().zip(images).enumerate() {
        if b.shape() != (layout_in.size(), layout_in.size()) {
            return Err(Error::LayoutMismatch(format!(
                "basis element {idx} is {} x {}, layout needs {}",
                b.nrows(),
                b.ncols(),
                layout_in.size()
            )));
        }
        if img.nrows() != img.ncols() || img.nrows() < layout_out.size() {
            return Err(Error::LayoutMismatch(format!(
                "image {idx} is {} x {}, layout needs at least {}",
                img.nrows(),
                img.ncols(),
                layout_out.size()
            )));
        }
        let cutoff = tol.threshold(b.norm());
        let mut source = None;
        for i in 0..b.nrows() {
            for j in 0..b.ncols() {
                if b[(i, j)].norm() > cutoff {
                    let part = layout_in.part_of(i, j);
                    match source {
                        None => source = part,
                        Some(s) if part != Some(s) => {
                            return Err(Error::LayoutMismatch(format!(
                                "basis element {idx} straddles several parts"
                            )))
                        }
                        _ => {}
                    }
                }
            }
        }
        let Some(source) = source else { continue };
        let cutoff = tol.threshold(img.norm());
        let mut worst: Option<CornerViolation> = None;
        for i in 0..img.nrows() {
            for j in 0..img.ncols() {
                let magnitude = img[(i, j)].norm();
                let landed = layout_out.part_of(i, j);
                if magnitude > cutoff
                    && landed != Some(source)
                    && worst.as_ref().is_none_or(|w| magnitude > w.magnitude)
                {
                    worst = Some(CornerViolation {
                        basis_index: idx,
                        source,
                        entry: (i, j),
                        landed,
                        magnitude,
                    });
                }
            }
        }
        violations.extend(worst);
    }
    Ok(CornerReport {
        preserving: violations.is_empty(),
        violations,
    })
}

/// The map `[[T1, T2], [T3, T4]] ↦` the 4 x 4 block matrix with `T1` at
/// (1,1) and (3,3), `T2` at (1,4), `T3` at (4,1) and `T4` at (2,2) and
/// (4,4), on `h x h` blocks.
#[derive(Debug, Clone, Serialize)]
pub struct Example34 {
    pub h: usize,
    pub phi: CpMap,
    pub layout_in: CornerLayout,
    pub layout_out: CornerLayout,
    pub unital_defect: f64,
    pub cp: CpReport,
    pub corners: CornerReport,
}

pub fn example_3_4_map(h: usize, tol: &Tolerance) -> Result<Example34> {
    if h == 0 {
        return Err(Error::InvalidInput("h must be positive".into()));
    }
    let algebra = BlockAlgebra::full(2 * h);
    let phi = CpMap::from_fn(algebra.clone(), 4 * h, |t| {
        let block = |r: usize, c: usize| t.view((r * h, c * h), (h, h)).into_owned();
        let mut out = CMatrix::zeros(4 * h, 4 * h);
        let mut put = |r: usize, c: usize, m: &CMatrix| {
            let mut v = out.view_mut((r * h, c * h), (h, h));
            v += m;
        };
        put(0, 0, &block(0, 0));
        put(0, 3, &block(0, 1));
        put(1, 1, &block(1, 1));
        put(2, 2, &block(0, 0));
        put(3, 0, &block(1, 0));
        put(3, 3, &block(1, 1));
        out
    })?;
    let identity = phi.apply_matrix(&algebra.identity());
    let unital_defect = (identity - CMatrix::identity(4 * h, 4 * h)).norm();
    let cp = phi.is_completely_positive(tol)?;
    let layout_in = CornerLayout::new(h, h);
    let layout_out = CornerLayout::new(h, h);
    let basis: Vec<CMatrix> = algebra
        .matrix_units()
        .into_iter()
        .map(|u| algebra.unit_matrix(u))
        .collect();
    let corners = is_corner_preserving(&basis, phi.values(), layout_in, layout_out, tol)?;
    if !cp.completely_positive || !tol.is_negligible(unital_defect, 1.0) || corners.preserving {
        return Err(Error::Certification(
            "displayed map should be unital, CP and not corner-preserving".into(),
        ));
    }
    Ok(Example34 {
        h,
        phi,
        layout_in,
        layout_out,
        unital_defect,
        cp,
        corners,
    })
}

/// Extension of a morphism `(Φ, φ) : (G, C) → (M_{n x 1}, C)` to
/// `(Ψ, ψ) : (F, B) → (M_{n x 1}, C)` along `(G, C) ⊂ (F, B)`.
#[derive(Debug, Clone, Serialize)]
pub struct InjectivityExtension {
    /// `ψ = φ ∘ pinch_C` on `B`.
    pub psi: CpMap,
    pub big_psi: ModuleMap,
    /// `max |Ψ(ι g) - Φ(g)|` over the basis of `G`.
    pub restriction_error: f64,
    /// `max |ψ(u) - φ(u)|` over the matrix units of `C`.
    pub psi_extension_error: f64,
    pub semi_psi_margin: f64,
}

pub fn injectivity_demo(
    g: &ConcreteModule,
    f: &ConcreteModule,
    embedding: &PairEmbedding,
    map: &ModuleMap,
    phi: &CpMap,
    tol: &Tolerance,
) -> Result<InjectivityExtension> {
    if map.domain() != g {
        return Err(Error::ShapeMismatch("Φ is not defined on G".into()));
    }
    if !is_contained_pair(g, f, embedding, tol)? {
        return Err(Error::Precondition("(G, C) is not contained in (F, B)".into()));
    }
    let cp = phi.is_completely_positive(tol)?;
    if !cp.completely_positive {
        return Err(Error::NotCompletelyPositive(cp.margin));
    }
    let semi = is_completely_semi_phi(map, phi, tol)?;
    if !semi.holds {
        return Err(Error::NotSemiPhi(semi.margin));
    }

    let big = f.algebra();
    let psi = CpMap::from_fn(big.clone(), phi.target_dim(), |u| phi.apply_matrix(u))?;
    let small = g.algebra();
    let psi_extension_error = small
        .matrix_units()
        .into_iter()
        .zip(phi.values())
        .map(|(u, v)| (psi.apply_matrix(&small.unit_matrix(u)) - v).norm())
        .fold(0.0, f64::max);

    let carried: Vec<CMatrix> = g.basis().iter().map(|x| &embedding.row_map * x).collect();
    let carried_module = ConcreteModule::new(big.clone(), f.row_dim(), carried.clone())?;
    let carried_map = ModuleMap::new(
        carried_module,
        map.h1_dim(),
        map.h2_dim(),
        map.values().to_vec(),
    )?;
    let built = construct(&carried_map, f, &psi, tol)?;
    let big_psi = built.phi_prime;

    let mut restriction_error: f64 = 0.0;
    for (x, v) in carried.iter().zip(map.values()) {
        restriction_error = restriction_error.max((big_psi.apply(x, tol)? - v).norm());
    }
    let scale = map.value_scale().max(phi.value_norm()).max(1.0);
    if restriction_error > cert_threshold(tol, scale) || psi_extension_error > cert_threshold(tol, scale) {
        return Err(Error::Certification(format!(
            "extension misses the input: |Ψ - Φ| = {restriction_error:.3e}, |ψ - φ| = {psi_extension_error:.3e}"
        )));
    }
    let semi_psi = is_completely_semi_phi(&big_psi, &psi, tol)?;
    if !semi_psi.holds {
        return Err(Error::Certification(format!(
            "Ψ is not completely semi-ψ (margin {:.3e})",
            semi_psi.margin
        )));
    }
    Ok(InjectivityExtension {
        psi,
        big_psi,
        restriction_error,
        psi_extension_error,
        semi_psi_margin: semi_psi.margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{
        example_2_1, fixture_rng, random_injectivity_fixture, random_semi_phi_pair,
        scalar_multiplication, split_block_fixture,
    };
    use crate::numerics::{is_psd, real_matrix};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn scalar_system_is_all_of_m2() {
        let e = ConcreteModule::full(BlockAlgebra::full(1), 1);
        let s = build_system(&e);
        assert_eq!(s.dim(), 4);
        let z = real_matrix(2, 2, &[1.0, -2.0, 3.5, 0.25]);
        assert!(s.contains(&z, &tol()));
    }

    #[test]
    fn full_m2_system_has_dimension_13() {
        let e = ConcreteModule::full(BlockAlgebra::full(2), 2);
        let s = build_system(&e);
        assert_eq!(s.dim(), 13);
        assert_eq!(s.ambient_dim(), 4);
        assert!(s.contains(&s.identity(), &tol()));
        for b in s.basis() {
            assert!(s.contains(&b.adjoint(), &tol()));
        }
    }

    #[test]
    fn corner_example_layout() {
        let ex = example_2_1(2);
        let s = build_system(&ex.e);
        assert_eq!(s.layout(), CornerLayout::new(4, 2));
        // A matrix in the scalar corner that is not a multiple of I_p.
        let mut z = CMatrix::zeros(6, 6);
        z[(0, 0)] = c64(1.0, 0.0);
        assert!(!s.contains(&z, &tol()));
    }

    #[test]
    fn identity_block_map_is_identity() {
        let e = ConcreteModule::full(BlockAlgebra::full(2), 1);
        let map = ModuleMap::from_fn(e.clone(), 2, 1, |x| x.clone()).unwrap();
        let phi = CpMap::identity(BlockAlgebra::full(2));
        let sm = block_map(&map, &phi, Some(&e), &tol()).unwrap();
        for (b, v) in sm.domain().basis().iter().zip(sm.values()) {
            assert!((b - v).norm() < 1e-14);
        }
        assert!(sm.is_unital());
        assert!(sm.corner_report(&tol()).unwrap().preserving);
    }

    #[test]
    fn scalar_block_map_formula() {
        let (map, phi) = scalar_multiplication(3.0);
        let sm = block_map(&map, &phi, None, &tol()).unwrap();
        let z = real_matrix(2, 2, &[1.0, 2.0, 5.0, 7.0]);
        let image = sm.apply(&z, &tol()).unwrap();
        let expected = real_matrix(2, 2, &[1.0, 6.0, 15.0, 7.0]);
        assert!((image - expected).norm() < 1e-12);
    }

    #[test]
    fn doubling_maps_ones_to_non_psd() {
        let (map, phi) = scalar_multiplication(2.0);
        let sm = block_map(&map, &phi, None, &tol()).unwrap();
        let report = is_cp_system_map(&sm, &tol()).unwrap();
        assert!(!report.completely_positive);
        let w = report.witness.unwrap();
        assert!((w.input - real_matrix(2, 2, &[1.0, 1.0, 1.0, 1.0])).norm() < 1e-12);
        assert!((w.image - real_matrix(2, 2, &[1.0, 2.0, 2.0, 1.0])).norm() < 1e-12);
        assert!((w.image_min_eigenvalue + 1.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_identity_block_map_is_cp() {
        let (map, phi) = scalar_multiplication(1.0);
        let sm = block_map(&map, &phi, None, &tol()).unwrap();
        assert!(is_cp_system_map(&sm, &tol()).unwrap().completely_positive);
    }

    #[test]
    fn zero_extension_block_map_is_unital_and_structured() {
        let ex = example_2_1(2);
        let sm = block_map(&ex.map_on_e, &ex.phi, None, &tol()).unwrap();
        assert!(sm.is_unital());
        assert!(sm.corner_report(&tol()).unwrap().preserving);
    }

    #[test]
    fn phi_maps_give_cp_block_maps() {
        let ex = split_block_fixture(1);
        let sm = block_map(&ex.map_on_e, &ex.phi, None, &tol()).unwrap();
        let report = is_cp_system_map(&sm, &tol()).unwrap();
        assert!(report.completely_positive);
        assert!(report.sampling.worst_relative_eigenvalue > -1e-8);
    }

    #[test]
    fn range_outside_codomain_is_rejected() {
        let (map, phi) = scalar_multiplication(1.0);
        let zero = ConcreteModule::zero(BlockAlgebra::full(1), 1);
        assert!(matches!(
            block_map(&map, &phi, Some(&zero), &tol()),
            Err(Error::RangeOutsideCodomain(_))
        ));
    }

    #[test]
    fn generic_maps_are_not_decided() {
        let e = ConcreteModule::full(BlockAlgebra::full(1), 1);
        let s = build_system(&e);
        let sm = SystemMap::new(s.clone(), s.clone(), s.basis().to_vec(), &tol()).unwrap();
        assert!(matches!(
            is_cp_system_map(&sm, &tol()),
            Err(Error::NotCornerStructured)
        ));
    }

    #[test]
    fn random_positive_elements_are_positive() {
        let ex = split_block_fixture(2);
        let s = build_system(&ex.e);
        let mut rng = fixture_rng(3, 0);
        for n in 1..=3 {
            let z = s.random_positive(n, &mut rng);
            assert!(is_psd(&z, &tol()).unwrap().psd);
            for i in 0..n {
                for j in 0..n {
                    let block = z
                        .view((i * s.ambient_dim(), j * s.ambient_dim()), (s.ambient_dim(), s.ambient_dim()))
                        .into_owned();
                    assert!(s.contains(&block, &tol()));
                }
            }
        }
    }

    #[test]
    fn block_map_is_functorial() {
        let mut rng = fixture_rng(11, 0);
        let (m1, phi1) = random_semi_phi_pair(&mut rng, &tol());
        let (k, m) = (m1.h2_dim(), m1.h1_dim());
        let f1 = ConcreteModule::full(BlockAlgebra::full(m), k);
        let phi2 = crate::fixtures::random_cp_map(&mut rng, &BlockAlgebra::full(m), 2, 2);
        let m2 = ModuleMap::from_fn(f1.clone(), 2, 3, |x| {
            crate::fixtures::random_matrix(&mut fixture_rng(12, 0), 3, k) * x
                * crate::fixtures::random_matrix(&mut fixture_rng(13, 0), m, 2)
        });
        // The second map must be linear in x; fixed random factors keep it so.
        let m2 = m2.unwrap();
        let s1 = block_map(&m1, &phi1, Some(&f1), &tol()).unwrap();
        let s2 = block_map(&m2, &phi2, None, &tol()).unwrap();
        let composed = SystemMap::compose(&s2, &s1, &tol()).unwrap();
        let direct = block_map(
            &ModuleMap::compose(&m2, &m1, &tol()).unwrap(),
            &CpMap::compose(&phi2, &phi1, &tol()).unwrap(),
            None,
            &tol(),
        )
        .unwrap();
        assert!(composed.max_distance(&direct).unwrap() < 1e-10);
    }

    #[test]
    fn example_3_4_single_entry_corner() {
        let ex = example_3_4_map(1, &tol()).unwrap();
        let t2 = real_matrix(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let image = ex.phi.apply_matrix(&t2);
        let mut expected = CMatrix::zeros(4, 4);
        expected[(0, 3)] = c64(1.0, 0.0);
        assert!((image - expected).norm() < 1e-14);
        assert!(ex.unital_defect < 1e-12);
        assert!(ex.cp.margin >= -1e-10);
        let hit = ex
            .corners
            .violations
            .iter()
            .find(|v| v.source == Part::Corner)
            .unwrap();
        assert_eq!(hit.block_position(1), (1, 4));
        assert_eq!(hit.landed, None);
    }

    #[test]
    fn example_3_4_with_two_dimensional_blocks() {
        let ex = example_3_4_map(2, &tol()).unwrap();
        assert!(!ex.corners.preserving);
        assert!(ex
            .corners
            .violations
            .iter()
            .any(|v| v.source == Part::Corner && v.block_position(2) == (1, 4)));
    }

    #[test]
    fn identity_is_corner_preserving() {
        let basis: Vec<CMatrix> = BlockAlgebra::full(2)
            .matrix_units()
            .into_iter()
            .map(|u| BlockAlgebra::full(2).unit_matrix(u))
            .collect();
        let layout = CornerLayout::new(1, 1);
        let report = is_corner_preserving(&basis, &basis, layout, layout, &tol()).unwrap();
        assert!(report.preserving);
    }

    #[test]
    fn straddling_basis_is_a_layout_error() {
        let layout = CornerLayout::new(1, 1);
        let b = vec![CMatrix::identity(2, 2)];
        assert!(matches!(
            is_corner_preserving(&b, &b, layout, layout, &tol()),
            Err(Error::LayoutMismatch(_))
        ));
    }

    #[test]
    fn injectivity_with_g_equal_f_returns_the_input() {
        let ex = split_block_fixture(1);
        let embedding = PairEmbedding::inclusion(vec![0, 1], 2);
        // Target is a column module: restrict to one-dimensional φ.
        let out = injectivity_demo(&ex.e, &ex.e, &embedding, &ex.map_on_e, &ex.phi, &tol()).unwrap();
        assert!(out.big_psi.max_distance(&ex.map_on_e).unwrap() < 1e-10);
        assert_eq!(out.psi, ex.phi);
    }

    #[test]
    fn injectivity_on_random_pairs() {
        for (i, n) in [(0, 1), (1, 2), (2, 3)] {
            let mut rng = fixture_rng(21, i);
            let fx = random_injectivity_fixture(&mut rng, n, &tol());
            let out =
                injectivity_demo(&fx.g, &fx.f, &fx.embedding, &fx.map, &fx.phi, &tol()).unwrap();
            assert!(out.restriction_error <= 1e-8);
        }
    }

    #[test]
    fn interleave_moves_blocks() {
        let layout = CornerLayout::new(1, 1);
        let z = real_matrix(4, 4, &[
            1.0, 2.0, 3.0, 4.0, //
            5.0, 6.0, 7.0, 8.0, //
            9.0, 10.0, 11.0, 12.0, //
            13.0, 14.0, 15.0, 16.0,
        ]);
        let out = interleave(2, layout, &z);
        // Paulsen order (p0, p1, q0, q1) becomes (p0, q0, p1, q1).
        assert_eq!(out[(0, 1)], z[(0, 2)]);
        assert_eq!(out[(1, 2)], z[(2, 1)]);
    }

    #[test]
    fn sampling_rng_is_deterministic() {
        let ex = split_block_fixture(1);
        let s = build_system(&ex.e);
        let a = s.random_positive(2, &mut fixture_rng(1, 1));
        let b = s.random_positive(2, &mut fixture_rng(1, 1));
        assert_eq!(a, b);
    }
}
