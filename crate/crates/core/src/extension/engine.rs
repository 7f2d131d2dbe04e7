//! Extension of a completely semi-φ-map from a submodule `F` to `E`.
//!
//! With `Φ_φ` the KSGNS map of φ on `E`, the semi-φ inequality on `F` says
//! `|sum Φ(f_i) h_i| <= |sum Φ_φ(f_i) h_i|`, so there is a contraction `S0`
//! from `[Φ_φ(F) H1]` to `H2` with `S0 Φ_φ(f) = Φ(f)`. Composing with the
//! projection `P` onto that subspace gives `S = S0 P` and the extension
//! `Φ'(x) = S Φ_φ(x)` on all of `E`.

use serde::Serialize;

use super::ksgns::{ksgns, KsgnsConstruction};
use super::predicates::{
    check_pair, is_completely_semi_phi, is_nondegenerate, is_phi_map, phi_extension_obstruction,
};
use super::ModuleMap;
use crate::cpmap::{CpMap, StinespringDilation};
use crate::error::{Error, Result};
use crate::modules::{is_submodule, ConcreteModule};
use crate::numerics::{
    least_squares_operator, range_onb, solve_coordinates, spectral_norm, CMatrix, Tolerance,
};

/// Relative floor for the engine's self-certification checks.
const CERT_REL: f64 = 1e-8;

pub(crate) fn cert_threshold(tol: &Tolerance, scale: f64) -> f64 {
    tol.threshold(scale).max(CERT_REL * scale.max(1.0))
}

/// Verification flags attached to every extension.
#[derive(Debug, Clone, Serialize)]
pub struct ExtensionReport {
    /// `max |Φ'(f) - Φ(f)|` over the basis of `F`.
    pub restriction_error: f64,
    pub least_squares_residual: f64,
    pub s0_norm: f64,
    pub semi_phi_holds: bool,
    pub semi_phi_margin: f64,
    pub input_is_phi_map: bool,
    pub obstruction_norm: f64,
    pub obstruction_vanishes: bool,
    /// `max |Φ'(g)|` over the basis of `F⊥`, when the input is a φ-map and
    /// the obstruction vanishes.
    pub complement_image_norm: Option<f64>,
    /// Largest defect of `Φ'(x)*Φ'(y) = φ(<x,y>)` and its adjoint identity,
    /// `x ∈ E`, `y ∈ F ⊕ F⊥`, under the same conditions.
    pub phi_identity_defect: Option<f64>,
    pub empty_submodule: bool,
    pub zero_phi: bool,
}

/// Output of [`extend_semi_phi`]: the extension and every intermediate
/// operator of the construction.
#[derive(Debug, Clone, Serialize)]
pub struct ExtensionResult {
    /// The map being extended, on `F`.
    pub input: ModuleMap,
    /// `Φ'` on `E`.
    pub phi_prime: ModuleMap,
    /// `Φ_φ` on `E`.
    pub ksgns_map: ModuleMap,
    #[serde(with = "crate::wire::matrix")]
    pub subspace_onb: CMatrix,
    /// Projection onto `[Φ_φ(F) H1]` inside `H_φ`.
    #[serde(with = "crate::wire::matrix")]
    pub projection: CMatrix,
    #[serde(with = "crate::wire::matrix")]
    pub s0: CMatrix,
    #[serde(with = "crate::wire::matrix")]
    pub s: CMatrix,
    pub dilation: StinespringDilation,
    /// `F⊥` inside `E`.
    pub complement: ConcreteModule,
    pub report: ExtensionReport,
}

/// The construction without the submodule precondition: `map` may be
/// defined on any subspace of `E` on which it satisfies the semi-φ
/// inequality.
pub(crate) struct Construction {
    pub ksgns: KsgnsConstruction,
    pub projection: CMatrix,
    pub s0: CMatrix,
    pub s: CMatrix,
    pub phi_prime: ModuleMap,
    pub residual: f64,
    pub s0_norm: f64,
}

pub(crate) fn construct(
    map: &ModuleMap,
    e: &ConcreteModule,
    phi: &CpMap,
    tol: &Tolerance,
) -> Result<Construction> {
    check_pair(map, phi)?;
    if let Some(i) = map
        .domain()
        .basis()
        .iter()
        .position(|x| !e.contains_matrix(x, tol))
    {
        return Err(Error::Precondition(format!(
            "basis element {i} of the domain is not in E"
        )));
    }
    let kc = ksgns(phi, e, tol)?;
    let (m, k, d) = (phi.target_dim(), map.h2_dim(), kc.space_dim());

    let sub = map.domain().basis();
    let mut inputs = CMatrix::zeros(d, sub.len() * m);
    for (i, x) in sub.iter().enumerate() {
        inputs
            .view_mut((0, i * m), (d, m))
            .copy_from(&kc.evaluate(x));
    }
    let targets = map.range_columns();
    let ls = least_squares_operator(&inputs, &targets, tol)?;
    if ls.residual > cert_threshold(tol, targets.norm()) {
        return Err(Error::Inconsistent(ls.residual));
    }
    let s0_norm = spectral_norm(&ls.operator);
    if s0_norm > 1.0 + 10.0 * (tol.abs_tol + tol.rel_tol) {
        return Err(Error::NotContractive(s0_norm));
    }
    let onb = range_onb(&inputs, tol);
    let projection = &onb * onb.adjoint();
    let s = &ls.operator * &projection;
    let values = kc.map.values().iter().map(|v| &s * v).collect();
    let phi_prime = ModuleMap::new(e.clone(), m, k, values)?;
    Ok(Construction {
        ksgns: kc,
        projection,
        s0: ls.operator,
        s,
        phi_prime,
        residual: ls.residual,
        s0_norm,
    })
}

/// Extends a completely semi-φ-map `map : F → B(H1, H2)` to `E ⊇ F`, and
/// certifies the result. When `map` is a φ-map and `φ(<F⊥, E>) = 0`, also
/// certifies that `Φ'` kills `F⊥` and satisfies the φ-map identities
/// against `F ⊕ F⊥`.
pub fn extend_semi_phi(
    map: &ModuleMap,
    e: &ConcreteModule,
    phi: &CpMap,
    tol: &Tolerance,
) -> Result<ExtensionResult> {
    let f = map.domain();
    check_pair(map, phi)?;
    if e.algebra() != f.algebra() || e.row_dim() != f.row_dim() {
        return Err(Error::ShapeMismatch("F and E are not comparable".into()));
    }
    if !is_submodule(f, e, tol)? {
        return Err(Error::Precondition("F is not a submodule of E".into()));
    }
    let semi = is_completely_semi_phi(map, phi, tol)?;
    if !semi.holds {
        return Err(Error::NotSemiPhi(semi.margin));
    }

    let c = construct(map, e, phi, tol)?;
    let phi_prime = &c.phi_prime;

    let mut restriction_error: f64 = 0.0;
    for (x, v) in f.basis().iter().zip(map.values()) {
        restriction_error = restriction_error.max((phi_prime.apply(x, tol)? - v).norm());
    }
    let scale = map.value_scale().max(1.0);
    if restriction_error > cert_threshold(tol, scale) {
        return Err(Error::Certification(format!(
            "extension does not restrict to the input (error {restriction_error:.3e})"
        )));
    }

    let semi_prime = is_completely_semi_phi(phi_prime, phi, tol)?;
    if !semi_prime.holds {
        return Err(Error::Certification(format!(
            "extension is not completely semi-phi (margin {:.3e})",
            semi_prime.margin
        )));
    }

    let input_is_phi_map = is_phi_map(map, phi, tol)?.holds;
    let obstruction = phi_extension_obstruction(phi, f, e, tol)?;
    let complement = obstruction.complement.clone();

    let (mut complement_image_norm, mut phi_identity_defect) = (None, None);
    if input_is_phi_map && obstruction.vanishes {
        let mut kill: f64 = 0.0;
        for g in complement.basis() {
            kill = kill.max(phi_prime.apply(g, tol)?.norm());
        }
        let mut defect: f64 = 0.0;
        let ys: Vec<&CMatrix> = f.basis().iter().chain(complement.basis()).collect();
        for x in e.basis() {
            let px = phi_prime.apply(x, tol)?;
            for y in &ys {
                let py = phi_prime.apply(y, tol)?;
                let forward = px.adjoint() * &py - phi.apply_matrix(&(x.adjoint() * *y));
                let backward = py.adjoint() * &px - phi.apply_matrix(&(y.adjoint() * x));
                defect = defect.max(forward.norm()).max(backward.norm());
            }
        }
        let part_scale = phi.value_norm().max(scale);
        if kill > cert_threshold(tol, part_scale) || defect > cert_threshold(tol, part_scale) {
            return Err(Error::Certification(format!(
                "phi-map parts fail: |Φ'(F⊥)| = {kill:.3e}, identity defect {defect:.3e}"
            )));
        }
        complement_image_norm = Some(kill);
        phi_identity_defect = Some(defect);
    }

    let report = ExtensionReport {
        restriction_error,
        least_squares_residual: c.residual,
        s0_norm: c.s0_norm,
        semi_phi_holds: semi_prime.holds,
        semi_phi_margin: semi_prime.margin,
        input_is_phi_map,
        obstruction_norm: obstruction.norm,
        obstruction_vanishes: obstruction.vanishes,
        complement_image_norm,
        phi_identity_defect,
        empty_submodule: f.is_zero(),
        zero_phi: phi.value_norm() == 0.0,
    };
    Ok(ExtensionResult {
        input: map.clone(),
        phi_prime: c.phi_prime,
        ksgns_map: c.ksgns.map,
        subspace_onb: c.ksgns.subspace,
        projection: c.projection,
        s0: c.s0,
        s: c.s,
        dilation: c.ksgns.dilation,
        complement,
        report,
    })
}

/// Uniqueness of φ-map extensions: a φ-map `gamma` on `E` restricting to a
/// non-degenerate φ-map on `F` must coincide with the engine's `Φ'`.
/// Unverified preconditions are errors, not `false`.
pub fn compare_extensions(
    gamma: &ModuleMap,
    result: &ExtensionResult,
    phi: &CpMap,
    tol: &Tolerance,
) -> Result<bool> {
    let e = result.phi_prime.domain();
    if gamma.domain() != e
        || gamma.h1_dim() != result.phi_prime.h1_dim()
        || gamma.h2_dim() != result.phi_prime.h2_dim()
    {
        return Err(Error::ShapeMismatch(
            "gamma is not defined on the same module and spaces as the extension".into(),
        ));
    }
    let input = &result.input;
    let scale = input.value_scale().max(gamma.value_scale()).max(1.0);
    let restricted = gamma.restrict(input.domain(), tol)?;
    let restriction = restricted.max_distance(input)?;
    if restriction > cert_threshold(tol, scale) {
        return Err(Error::Precondition(format!(
            "gamma does not restrict to the original map on F (error {restriction:.3e})"
        )));
    }
    if !is_nondegenerate(input, tol) {
        return Err(Error::Precondition(
            "the original map is degenerate; uniqueness does not apply".into(),
        ));
    }
    let check = is_phi_map(gamma, phi, tol)?;
    if !check.holds {
        return Err(Error::Precondition(format!(
            "gamma is not a phi-map (worst basis pair {:?})",
            check.first_failure
        )));
    }
    Ok(gamma.max_distance(&result.phi_prime)? <= cert_threshold(tol, scale))
}

/// `Φ ⊕ 0` along `E = F ⊕ F⊥`, the unique φ-map extension when
/// `φ(<F⊥, E>) = 0`. Refuses when the obstruction is nonzero.
pub fn canonical_compacts_extension(
    map: &ModuleMap,
    e: &ConcreteModule,
    phi: &CpMap,
    tol: &Tolerance,
) -> Result<ModuleMap> {
    let f = map.domain();
    check_pair(map, phi)?;
    let obstruction = phi_extension_obstruction(phi, f, e, tol)?;
    if !obstruction.vanishes {
        return Err(Error::ObstructionNonzero(obstruction.norm));
    }
    let input_check = is_phi_map(map, phi, tol)?;
    if !input_check.holds {
        return Err(Error::Precondition(format!(
            "the map on F is not a phi-map (worst basis pair {:?})",
            input_check.first_failure
        )));
    }
    let complement = &obstruction.complement;
    let joint = ConcreteModule::new(
        e.algebra().clone(),
        e.row_dim(),
        f.basis().iter().chain(complement.basis()).cloned().collect(),
    )?;
    let columns = joint.basis_columns();
    let mut values = Vec::with_capacity(e.dim());
    for x in e.basis() {
        let (coords, residual) = solve_coordinates(&columns, &crate::numerics::flatten(x), tol);
        if !tol.is_negligible(residual, x.norm()) {
            return Err(Error::Certification(format!(
                "E is not F ⊕ F⊥ (residual {residual:.3e})"
            )));
        }
        values.push(map.combine(&coords.rows(0, f.dim()).into_owned()));
    }
    let canonical = ModuleMap::new(e.clone(), map.h1_dim(), map.h2_dim(), values)?;

    let check = is_phi_map(&canonical, phi, tol)?;
    if !check.holds {
        return Err(Error::Certification(format!(
            "Φ ⊕ 0 is not a phi-map (worst basis pair {:?})",
            check.first_failure
        )));
    }
    let engine = extend_semi_phi(map, e, phi, tol)?;
    let distance = canonical.max_distance(&engine.phi_prime)?;
    if distance > cert_threshold(tol, map.value_scale().max(1.0)) {
        return Err(Error::Certification(format!(
            "Φ ⊕ 0 differs from the engine's extension by {distance:.3e}"
        )));
    }
    Ok(canonical)
}
