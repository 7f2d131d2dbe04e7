use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ModuleMap;
use crate::cpmap::CpMap;
use crate::error::{Error, Result};
use crate::modules::{orthogonal_complement, ConcreteModule};
use crate::numerics::{loewner_gap, rank, spectral_norm, CMatrix, CVector, Tolerance};

pub(crate) fn check_pair(map: &ModuleMap, phi: &CpMap) -> Result<()> {
    if map.domain().algebra() != phi.algebra() {
        return Err(Error::ShapeMismatch(
            "module map and CP map are over different algebras".into(),
        ));
    }
    if map.h1_dim() != phi.target_dim() {
        return Err(Error::ShapeMismatch(format!(
            "module map acts on C^{} but phi lands in M_{}",
            map.h1_dim(),
            phi.target_dim()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorstPair {
    pub i: usize,
    pub j: usize,
    pub deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhiMapReport {
    pub holds: bool,
    /// Basis pair with the largest `|Φ(x_i)* Φ(x_j) - φ(<x_i, x_j>)|`.
    pub worst: Option<WorstPair>,
    /// Worst pair among those beyond tolerance.
    pub first_failure: Option<WorstPair>,
}

/// Definition of a φ-map, checked on basis pairs:
/// `Φ(x_i)* Φ(x_j) = φ(<x_i, x_j>)`.
pub fn is_phi_map(map: &ModuleMap, phi: &CpMap, tol: &Tolerance) -> Result<PhiMapReport> {
    check_pair(map, phi)?;
    let basis = map.domain().basis();
    let mut worst: Option<WorstPair> = None;
    let mut failure: Option<WorstPair> = None;
    for (i, xi) in basis.iter().enumerate() {
        for (j, xj) in basis.iter().enumerate() {
            let lhs = map.values()[i].adjoint() * &map.values()[j];
            let rhs = phi.apply_matrix(&(xi.adjoint() * xj));
            let deviation = (&lhs - &rhs).norm();
            let pair = WorstPair { i, j, deviation };
            if worst.is_none_or(|w| deviation > w.deviation) {
                worst = Some(pair);
            }
            if !tol.is_negligible(deviation, lhs.norm().max(rhs.norm()))
                && failure.is_none_or(|w| deviation > w.deviation)
            {
                failure = Some(pair);
            }
        }
    }
    Ok(PhiMapReport {
        holds: failure.is_none(),
        worst,
        first_failure: failure,
    })
}

/// `[Φ(E) C^m] = C^k`: the range vectors span the codomain.
pub fn is_nondegenerate(map: &ModuleMap, tol: &Tolerance) -> bool {
    rank(&map.range_columns(), tol) == map.h2_dim()
}

/// Both sides of the semi-φ inequality as Gram matrices on the family
/// `(x_k, e_l)`, index `k * m + l`.
#[derive(Debug, Clone, Serialize)]
pub struct GramPair {
    /// `<e_l, φ(<x_k, x_k'>) e_l'>`
    #[serde(with = "crate::wire::matrix")]
    pub g_phi: CMatrix,
    /// `<Φ(x_k) e_l, Φ(x_k') e_l'>`
    #[serde(with = "crate::wire::matrix")]
    pub g_map: CMatrix,
}

pub fn gram_pair(map: &ModuleMap, phi: &CpMap) -> Result<GramPair> {
    check_pair(map, phi)?;
    let m = map.h1_dim();
    let basis = map.domain().basis();
    let n = basis.len() * m;
    let mut g_phi = CMatrix::zeros(n, n);
    let mut g_map = CMatrix::zeros(n, n);
    for (k, xk) in basis.iter().enumerate() {
        for (kk, xkk) in basis.iter().enumerate() {
            let phi_block = phi.apply_matrix(&(xk.adjoint() * xkk));
            let map_block = map.values()[k].adjoint() * &map.values()[kk];
            g_phi.view_mut((k * m, kk * m), (m, m)).copy_from(&phi_block);
            g_map.view_mut((k * m, kk * m), (m, m)).copy_from(&map_block);
        }
    }
    Ok(GramPair { g_phi, g_map })
}

#[derive(Debug, Clone, Serialize)]
pub struct SemiPhiReport {
    pub holds: bool,
    /// Smallest eigenvalue of `g_phi - g_map`.
    pub margin: f64,
    pub threshold: f64,
    pub gram: GramPair,
    #[serde(skip)]
    pub(crate) min_direction: Option<CVector>,
}

/// Completely semi-φ test. For linear `Φ`, every matrix-level instance of
/// `<Φ_n(x), Φ_n(x)> <= φ_n(<x, x>)` reduces to the quadratic forms on
/// `E ⊗ C^m`, so the single comparison `g_map <= g_phi` decides all levels.
pub fn is_completely_semi_phi(
    map: &ModuleMap,
    phi: &CpMap,
    tol: &Tolerance,
) -> Result<SemiPhiReport> {
    let gram = gram_pair(map, phi)?;
    let gap = loewner_gap(&gram.g_map, &gram.g_phi, tol)?;
    Ok(SemiPhiReport {
        holds: gap.psd,
        margin: gap.min_eigenvalue,
        threshold: gap.threshold,
        gram,
        min_direction: gap.min_eigenvector,
    })
}

/// A family `(x_k, h_k)` on which `|sum Φ(x_k) h_k|^2` exceeds
/// `sum_ij <h_i, φ(<x_i, x_j>) h_j>`; `x_k` runs over the domain basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiPhiWitness {
    #[serde(with = "crate::wire::vectors")]
    pub vectors: Vec<CVector>,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

impl SemiPhiWitness {
    /// Recomputes both sides directly from `Φ` and `φ`; returns `(lhs, rhs)`.
    pub fn evaluate(&self, map: &ModuleMap, phi: &CpMap) -> Result<(f64, f64)> {
        check_pair(map, phi)?;
        let basis = map.domain().basis();
        if self.vectors.len() != basis.len()
            || self.vectors.iter().any(|h| h.len() != map.h1_dim())
        {
            return Err(Error::ShapeMismatch("witness does not fit the map".into()));
        }
        let image = map
            .values()
            .iter()
            .zip(&self.vectors)
            .fold(CVector::zeros(map.h2_dim()), |acc, (v, h)| acc + v * h);
        let lhs = image.norm_squared();
        let mut rhs = Complex64::ZERO;
        for (xi, hi) in basis.iter().zip(&self.vectors) {
            for (xj, hj) in basis.iter().zip(&self.vectors) {
                rhs += hi.dotc(&(phi.apply_matrix(&(xi.adjoint() * xj)) * hj));
            }
        }
        Ok((lhs, rhs.re))
    }

    /// Re-evaluated `lhs - rhs`.
    pub fn reevaluate_gap(&self, map: &ModuleMap, phi: &CpMap) -> Result<f64> {
        let (lhs, rhs) = self.evaluate(map, phi)?;
        Ok(lhs - rhs)
    }
}

/// Builds a refutation of the semi-φ inequality from the most negative
/// direction of `g_phi - g_map`, re-evaluated before it is returned.
pub fn semiphi_witness(map: &ModuleMap, phi: &CpMap, tol: &Tolerance) -> Result<SemiPhiWitness> {
    let report = is_completely_semi_phi(map, phi, tol)?;
    if report.holds {
        return Err(Error::NoViolation);
    }
    let c = report
        .min_direction
        .expect("a failing comparison has a nonempty spectrum");
    let m = map.h1_dim();
    let vectors: Vec<CVector> = (0..map.domain().dim())
        .map(|k| c.rows(k * m, m).into_owned())
        .collect();
    let mut witness = SemiPhiWitness {
        vectors,
        lhs: 0.0,
        rhs: 0.0,
        gap: 0.0,
    };
    let (lhs, rhs) = witness.evaluate(map, phi)?;
    witness.lhs = lhs;
    witness.rhs = rhs;
    witness.gap = lhs - rhs;
    if witness.gap <= report.threshold {
        return Err(Error::Certification(format!(
            "witness gap {:.3e} does not clear the threshold {:.3e}",
            witness.gap, report.threshold
        )));
    }
    Ok(witness)
}

#[derive(Debug, Clone, Serialize)]
pub struct ObstructionReport {
    pub vanishes: bool,
    /// `max |φ(<g, e>)|` over orthonormal bases of `F⊥` and `E`.
    pub norm: f64,
    pub threshold: f64,
    /// `(index in F⊥ basis, index in E basis)` attaining the norm.
    pub worst_pair: Option<(usize, usize)>,
    pub complement: ConcreteModule,
}

/// Measures `φ(<F⊥, E>)`, which must vanish for a non-degenerate φ-map on
/// `F` to have a φ-map extension to `E`.
pub fn phi_extension_obstruction(
    phi: &CpMap,
    f: &ConcreteModule,
    e: &ConcreteModule,
    tol: &Tolerance,
) -> Result<ObstructionReport> {
    if e.algebra() != phi.algebra() {
        return Err(Error::ShapeMismatch(
            "phi is defined on a different algebra than E".into(),
        ));
    }
    let complement = orthogonal_complement(f, e, tol)?;
    let e_onb = e.orthonormal_basis(tol);
    let mut norm = 0.0;
    let mut worst_pair = None;
    for (gi, g) in complement.basis().iter().enumerate() {
        for (ei, x) in e_onb.iter().enumerate() {
            let value = spectral_norm(&phi.apply_matrix(&(g.adjoint() * x)));
            if value > norm {
                norm = value;
                worst_pair = Some((gi, ei));
            }
        }
    }
    let threshold = tol.threshold(phi.value_norm());
    Ok(ObstructionReport {
        vanishes: norm <= threshold,
        norm,
        threshold,
        worst_pair,
        complement,
    })
}
