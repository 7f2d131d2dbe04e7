//! Reproducible fixtures: the worked examples as concrete matrices, and
//! seeded random generators for modules, CP maps and module maps.

use nalgebra::{Complex, QR};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::algebra::BlockAlgebra;
use crate::cpmap::CpMap;
use crate::error::Result;
use crate::extension::{ksgns, ModuleMap};
use crate::modules::{ConcreteModule, PairEmbedding};
use crate::numerics::{c64, matrix_unit, spectral_norm, CMatrix, Tolerance};

pub type FixtureRng = ChaCha8Rng;

/// Independent stream `index` of the generator seeded by `seed`.
pub fn fixture_rng(seed: u64, index: u64) -> FixtureRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `f` on `count` fixtures in parallel; results come back in index
/// order and each fixture sees its own stream, so output is independent of
/// scheduling.
pub fn run_batch<T, F>(seed: u64, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut FixtureRng) -> T + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|i| f(i, &mut fixture_rng(seed, i as u64)))
        .collect()
}

/// A submodule problem: `F ⊆ E`, a CP map `φ` on the algebra and a map `Φ`
/// on `F`.
#[derive(Debug, Clone)]
pub struct ExtensionFixture {
    pub e: ConcreteModule,
    pub f: ConcreteModule,
    pub phi: CpMap,
    pub map: ModuleMap,
}

/// `E = {[T; S]} ⊂ M_{2n x n}` over `M_n`, `F = {[T; 0]}`, `φ = id`,
/// `Φ([T; 0]) = T`. `map_on_e` holds `Φ ⊕ 0`.
#[derive(Debug, Clone)]
pub struct Example21 {
    pub n: usize,
    pub e: ConcreteModule,
    pub f: ConcreteModule,
    pub phi: CpMap,
    pub map: ModuleMap,
    pub map_on_e: ModuleMap,
}

fn stacked(n: usize, top: Option<&CMatrix>, bottom: Option<&CMatrix>) -> CMatrix {
    let mut m = CMatrix::zeros(2 * n, n);
    if let Some(t) = top {
        m.view_mut((0, 0), (n, n)).copy_from(t);
    }
    if let Some(b) = bottom {
        m.view_mut((n, 0), (n, n)).copy_from(b);
    }
    m
}

pub fn example_2_1(n: usize) -> Example21 {
    let algebra = BlockAlgebra::full(n);
    let units: Vec<CMatrix> = algebra
        .matrix_units()
        .into_iter()
        .map(|u| algebra.unit_matrix(u))
        .collect();
    let f_basis: Vec<CMatrix> = units.iter().map(|u| stacked(n, Some(u), None)).collect();
    let g_basis: Vec<CMatrix> = units.iter().map(|u| stacked(n, None, Some(u))).collect();
    let e = ConcreteModule::new(
        algebra.clone(),
        2 * n,
        f_basis.iter().chain(&g_basis).cloned().collect(),
    )
    .expect("valid shapes");
    let f = ConcreteModule::new(algebra.clone(), 2 * n, f_basis).expect("valid shapes");
    let phi = CpMap::identity(algebra);
    let top = |x: &CMatrix| x.view((0, 0), (n, n)).into_owned();
    let map = ModuleMap::from_fn(f.clone(), n, n, top).expect("valid shapes");
    let map_on_e = ModuleMap::from_fn(e.clone(), n, n, top).expect("valid shapes");
    Example21 {
        n,
        e,
        f,
        phi,
        map,
        map_on_e,
    }
}

/// Two-block fixture where φ kills the second block: algebra `M_n ⊕ M_n`,
/// `E = {diag(T, S)}`, `F = {diag(T, 0)}`, `φ(diag(a, b)) = a`,
/// `Φ(diag(T, 0)) = T`. Here `Φ ⊕ 0 : diag(T, S) ↦ T` is a φ-map on `E`.
/// `map_on_e` holds `Φ ⊕ 0`.
pub fn split_block_fixture(n: usize) -> Example21 {
    let algebra = BlockAlgebra::new(vec![n, n]).expect("positive blocks");
    let units = algebra.matrix_units();
    let basis: Vec<CMatrix> = units.iter().map(|&u| algebra.unit_matrix(u)).collect();
    let f_basis: Vec<CMatrix> = units
        .iter()
        .zip(&basis)
        .filter(|((i, _), _)| *i < n)
        .map(|(_, b)| b.clone())
        .collect();
    let e = ConcreteModule::new(algebra.clone(), 2 * n, basis).expect("valid shapes");
    let f = ConcreteModule::new(algebra.clone(), 2 * n, f_basis).expect("valid shapes");
    let mut k = CMatrix::zeros(n, 2 * n);
    k.view_mut((0, 0), (n, n)).fill_with_identity();
    let phi = CpMap::from_kraus(algebra, n, &[k]).expect("valid Kraus operator");
    let top = |x: &CMatrix| x.view((0, 0), (n, n)).into_owned();
    let map = ModuleMap::from_fn(f.clone(), n, n, top).expect("valid shapes");
    let map_on_e = ModuleMap::from_fn(e.clone(), n, n, top).expect("valid shapes");
    Example21 {
        n,
        e,
        f,
        phi,
        map,
        map_on_e,
    }
}

/// `φ(a) = c̄ a c` on `C` with `Φ(x) = c x` on `E = C`.
pub fn scalar_multiplication(c: f64) -> (ModuleMap, CpMap) {
    let algebra = BlockAlgebra::full(1);
    let e = ConcreteModule::full(algebra.clone(), 1);
    let map = ModuleMap::from_fn(e, 1, 1, |x| x * c64(c, 0.0)).expect("valid shapes");
    (map, CpMap::identity(algebra))
}

pub fn random_matrix(rng: &mut FixtureRng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Haar-ish unitary from the QR factor of a Gaussian matrix.
pub fn random_unitary(rng: &mut FixtureRng, n: usize) -> CMatrix {
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    let g = random_matrix(rng, n, n);
    let qr = QR::new(g.clone());
    let (q, r) = (qr.q(), qr.r());
    // Fix the phases so the distribution does not depend on QR conventions.
    let mut out = q;
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex::ONE };
        let col = out.column(j) * phase;
        out.set_column(j, &col);
    }
    out
}

/// `rows x cols` matrix with orthonormal columns (`rows >= cols`).
pub fn random_isometry(rng: &mut FixtureRng, rows: usize, cols: usize) -> CMatrix {
    assert!(rows >= cols, "an isometry needs rows >= cols");
    random_unitary(rng, rows).columns(0, cols).into_owned()
}

/// Random matrix rescaled to operator norm exactly `norm`.
pub fn random_with_norm(rng: &mut FixtureRng, rows: usize, cols: usize, norm: f64) -> CMatrix {
    if rows == 0 || cols == 0 {
        return CMatrix::zeros(rows, cols);
    }
    let g = random_matrix(rng, rows, cols);
    let s = spectral_norm(&g);
    g * c64(norm / s, 0.0)
}

/// Random contraction with norm in `[0.2, 1]`.
pub fn random_contraction(rng: &mut FixtureRng, rows: usize, cols: usize) -> CMatrix {
    let norm = rng.random_range(0.2..=1.0);
    random_with_norm(rng, rows, cols, norm)
}

pub fn random_kraus(rng: &mut FixtureRng, count: usize, m: usize, q: usize) -> Vec<CMatrix> {
    (0..count).map(|_| random_matrix(rng, m, q)).collect()
}

pub fn random_cp_map(rng: &mut FixtureRng, algebra: &BlockAlgebra, m: usize, count: usize) -> CpMap {
    let kraus = random_kraus(rng, count, m, algebra.ambient_dim());
    CpMap::from_kraus(algebra.clone(), m, &kraus).expect("consistent Kraus shapes")
}

/// `φ(a) = sum K a K*` with every Kraus column inside the blocks listed in
/// `killed` set to zero, so φ annihilates those blocks.
pub fn random_cp_map_killing(
    rng: &mut FixtureRng,
    algebra: &BlockAlgebra,
    m: usize,
    count: usize,
    killed: &[usize],
) -> CpMap {
    let mut kraus = random_kraus(rng, count, m, algebra.ambient_dim());
    for &b in killed {
        for k in &mut kraus {
            for col in algebra.block_range(b) {
                k.column_mut(col).fill(Complex::ZERO);
            }
        }
    }
    CpMap::from_kraus(algebra.clone(), m, &kraus).expect("consistent Kraus shapes")
}

/// Module of block-diagonal rectangular matrices: block `b` of the algebra
/// contributes `rows[b] x n_b` matrices, stacked down the diagonal, then
/// everything is rotated by the unitary `rotation` on the left.
#[derive(Debug, Clone)]
pub struct BlockModuleLayout {
    pub algebra: BlockAlgebra,
    pub rows: Vec<usize>,
    pub rotation: CMatrix,
}

impl BlockModuleLayout {
    pub fn row_dim(&self) -> usize {
        self.rows.iter().sum()
    }

    fn row_offset(&self, b: usize) -> usize {
        self.rows[..b].iter().sum()
    }

    /// Submodule whose block-`b` rows range over the span of the columns of
    /// `row_spaces[b]` (each `rows[b] x s_b`).
    pub fn submodule(&self, row_spaces: &[CMatrix]) -> ConcreteModule {
        let p = self.row_dim();
        let q = self.algebra.ambient_dim();
        let mut basis = Vec::new();
        for (b, space) in row_spaces.iter().enumerate() {
            let offset = self.row_offset(b);
            for s in 0..space.ncols() {
                for col in self.algebra.block_range(b) {
                    let mut x = CMatrix::zeros(p, q);
                    for r in 0..self.rows[b] {
                        x[(offset + r, col)] = space[(r, s)];
                    }
                    basis.push(&self.rotation * x);
                }
            }
        }
        ConcreteModule::new(self.algebra.clone(), p, basis).expect("consistent shapes")
    }

    pub fn full(&self) -> ConcreteModule {
        let spaces: Vec<CMatrix> = self
            .rows
            .iter()
            .map(|&r| CMatrix::identity(r, r))
            .collect();
        self.submodule(&spaces)
    }
}

const SMALL_ALGEBRAS: &[&[usize]] = &[
    &[1],
    &[2],
    &[3],
    &[1, 1],
    &[2, 1],
    &[1, 2],
    &[1, 1, 1],
    &[2, 2],
    &[1, 1, 1, 1],
    &[3, 1],
];

pub fn random_algebra(rng: &mut FixtureRng, max_blocks_needed: usize) -> BlockAlgebra {
    let choices: Vec<&&[usize]> = SMALL_ALGEBRAS
        .iter()
        .filter(|b| b.len() >= max_blocks_needed)
        .collect();
    let pick = choices[rng.random_range(0..choices.len())];
    BlockAlgebra::new(pick.to_vec()).expect("positive blocks")
}

/// Random rows per block with `1 <= dim E <= max_dim`.
fn random_rows(rng: &mut FixtureRng, algebra: &BlockAlgebra, max_dim: usize) -> Vec<usize> {
    loop {
        let rows: Vec<usize> = algebra
            .blocks()
            .iter()
            .map(|_| rng.random_range(0..=2))
            .collect();
        let dim: usize = rows.iter().zip(algebra.blocks()).map(|(r, n)| r * n).sum();
        if (1..=max_dim).contains(&dim) {
            return rows;
        }
    }
}

fn random_layout(rng: &mut FixtureRng, algebra: BlockAlgebra, rows: Vec<usize>) -> BlockModuleLayout {
    let p: usize = rows.iter().sum();
    BlockModuleLayout {
        rotation: random_unitary(rng, p),
        algebra,
        rows,
    }
}

/// Random subspace of `C^n` of dimension `k`, as orthonormal columns.
pub fn random_subspace(rng: &mut FixtureRng, n: usize, k: usize) -> CMatrix {
    random_isometry(rng, n, k)
}

/// `Φ = C ∘ Φ_φ` with `Φ_φ` the KSGNS map of `φ` on `f` and `C` a given
/// operator on its range space.
pub fn map_through_ksgns(
    phi: &CpMap,
    f: &ConcreteModule,
    factor: impl FnOnce(usize) -> CMatrix,
    tol: &Tolerance,
) -> Result<ModuleMap> {
    let kc = ksgns(phi, f, tol)?;
    let c = factor(kc.space_dim());
    let values = kc.map.values().iter().map(|v| &c * v).collect();
    ModuleMap::new(f.clone(), phi.target_dim(), c.nrows(), values)
}

/// Random instance of the general extension problem: `q <= 4`,
/// `dim E <= 4`, `m, k <= 3`, and `Φ` a contraction of the KSGNS map on `F`
/// (hence completely semi-φ).
pub fn random_extension_fixture(rng: &mut FixtureRng, tol: &Tolerance) -> ExtensionFixture {
    let algebra = random_algebra(rng, 1);
    let rows = random_rows(rng, &algebra, 4);
    let layout = random_layout(rng, algebra.clone(), rows);
    let e = layout.full();
    let f = loop {
        let spaces: Vec<CMatrix> = layout
            .rows
            .iter()
            .map(|&r| {
                let s = rng.random_range(0..=r);
                random_subspace(rng, r, s)
            })
            .collect();
        let f = layout.submodule(&spaces);
        if !f.is_zero() {
            break f;
        }
    };
    let m = rng.random_range(1..=3);
    let kraus_count = rng.random_range(1..=3);
    let phi = random_cp_map(rng, &algebra, m, kraus_count);
    let k = rng.random_range(1..=3);
    let map = map_through_ksgns(&phi, &f, |d| random_contraction(rng, k, d), tol)
        .expect("random CP maps are CP");
    ExtensionFixture { e, f, phi, map }
}

/// Random problem with `φ(<F⊥, E>) = 0` and `Φ` a φ-map on `F`. With
/// `nondegenerate`, `Φ` is a unitary image of the KSGNS map; otherwise an
/// isometric image into a space one dimension larger.
pub fn random_vanishing_fixture(
    rng: &mut FixtureRng,
    nondegenerate: bool,
    tol: &Tolerance,
) -> ExtensionFixture {
    loop {
        let algebra = random_algebra(rng, 2);
        let nb = algebra.blocks().len();
        // At least one block keeps all of its rows in F and one does not.
        let partial: Vec<bool> = loop {
            let flags: Vec<bool> = (0..nb).map(|_| rng.random_bool(0.5)).collect();
            if flags.iter().any(|&x| x) && flags.iter().any(|&x| !x) {
                break flags;
            }
        };
        let rows: Vec<usize> = (0..nb).map(|_| rng.random_range(1..=2)).collect();
        let dim: usize = rows.iter().zip(algebra.blocks()).map(|(r, n)| r * n).sum();
        if dim > 8 {
            continue;
        }
        let layout = random_layout(rng, algebra.clone(), rows);
        let e = layout.full();
        let spaces: Vec<CMatrix> = layout
            .rows
            .iter()
            .zip(&partial)
            .map(|(&r, &is_partial)| {
                let s = if is_partial { rng.random_range(0..r) } else { r };
                random_subspace(rng, r, s)
            })
            .collect();
        let f = layout.submodule(&spaces);
        let killed: Vec<usize> = (0..nb).filter(|&b| partial[b]).collect();
        let m = rng.random_range(1..=3);
        let kraus_count = rng.random_range(1..=3);
        let phi = random_cp_map_killing(rng, &algebra, m, kraus_count, &killed);
        let extra = usize::from(!nondegenerate);
        let Ok(map) = map_through_ksgns(
            &phi,
            &f,
            |d| random_isometry(rng, d + extra, d),
            tol,
        ) else {
            continue;
        };
        if map.h2_dim() == 0 {
            continue;
        }
        return ExtensionFixture { e, f, phi, map };
    }
}

/// `(Φ, φ)` on a random module: satisfying pairs are contractions of the
/// KSGNS map, violating ones are stretched versions or arbitrary maps.
pub fn random_semi_phi_pair(rng: &mut FixtureRng, tol: &Tolerance) -> (ModuleMap, CpMap) {
    let algebra = random_algebra(rng, 1);
    let rows = random_rows(rng, &algebra, 4);
    let layout = random_layout(rng, algebra.clone(), rows);
    let e = layout.full();
    let m = rng.random_range(1..=3);
    let kraus_count = rng.random_range(1..=3);
    let phi = random_cp_map(rng, &algebra, m, kraus_count);
    let k = rng.random_range(1..=3);
    let map = match rng.random_range(0..3) {
        0 => map_through_ksgns(&phi, &e, |d| random_contraction(rng, k, d), tol),
        1 => {
            let stretch = rng.random_range(1.05..1.6);
            map_through_ksgns(&phi, &e, |d| random_with_norm(rng, k, d, stretch), tol)
        }
        _ => {
            let values = (0..e.dim()).map(|_| random_matrix(rng, k, m)).collect();
            ModuleMap::new(e.clone(), m, k, values)
        }
    }
    .expect("consistent shapes");
    (map, phi)
}

/// A containment `(G, C) ⊂ (F, B)` together with a morphism
/// `(Φ, φ) : (G, C) → (M_{n x 1}, C)`.
#[derive(Debug, Clone)]
pub struct InjectivityFixture {
    pub g: ConcreteModule,
    pub f: ConcreteModule,
    pub embedding: PairEmbedding,
    pub phi: CpMap,
    pub map: ModuleMap,
}

/// Splits `n` into a random composition.
fn random_composition(rng: &mut FixtureRng, n: usize) -> Vec<usize> {
    let mut parts = Vec::new();
    let mut left = n;
    while left > 0 {
        let take = rng.random_range(1..=left);
        parts.push(take);
        left -= take;
    }
    parts
}

pub fn random_injectivity_fixture(
    rng: &mut FixtureRng,
    target_rows: usize,
    tol: &Tolerance,
) -> InjectivityFixture {
    loop {
        let big = random_algebra(rng, 1);
        let rows: Vec<usize> = big.blocks().iter().map(|_| rng.random_range(1..=2)).collect();
        let layout = random_layout(rng, big.clone(), rows);
        let f = layout.full();

        // Refine each block of B into blocks of C.
        let mut small_blocks = Vec::new();
        let mut block_map = Vec::new();
        let mut owner = Vec::new();
        for (b, &nb) in big.blocks().iter().enumerate() {
            for part in random_composition(rng, nb) {
                small_blocks.push(part);
                block_map.push(b);
                owner.push(b);
            }
        }
        let small = BlockAlgebra::new(small_blocks).expect("positive blocks");

        // In each B-block, sub-blocks get mutually orthogonal row spaces.
        let p = layout.row_dim();
        let q = big.ambient_dim();
        let mut basis = Vec::new();
        let mut offset = 0;
        for (b, &pb) in layout.rows.iter().enumerate() {
            let frame = random_unitary(rng, pb);
            let mut used = 0;
            for (c, _) in owner.iter().enumerate().filter(|(_, &o)| o == b) {
                let available = pb - used;
                let take = rng.random_range(0..=available);
                for s in used..used + take {
                    for col in small.block_range(c) {
                        let mut x = CMatrix::zeros(p, q);
                        for r in 0..pb {
                            x[(offset + r, col)] = frame[(r, s)];
                        }
                        basis.push(&layout.rotation * x);
                    }
                }
                used += take;
            }
            offset += pb;
        }
        if basis.is_empty() {
            continue;
        }
        let g = ConcreteModule::new(small.clone(), p, basis).expect("consistent shapes");
        let kraus_count = rng.random_range(1..=2);
        let phi = random_cp_map(rng, &small, 1, kraus_count);
        let Ok(map) = map_through_ksgns(
            &phi,
            &g,
            |d| random_contraction(rng, target_rows, d),
            tol,
        ) else {
            continue;
        };
        return InjectivityFixture {
            g,
            f,
            embedding: PairEmbedding::inclusion(block_map, p),
            phi,
            map,
        };
    }
}

/// Elementary matrix helper re-exported for fixture construction.
pub fn unit(rows: usize, cols: usize, i: usize, j: usize) -> CMatrix {
    matrix_unit(rows, cols, i, j)
}
