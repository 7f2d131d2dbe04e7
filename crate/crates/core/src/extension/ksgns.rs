use serde::Serialize;

use super::predicates::is_phi_map;
use super::ModuleMap;
use crate::cpmap::{CpMap, StinespringDilation};
use crate::error::{Error, Result};
use crate::modules::ConcreteModule;
use crate::numerics::{range_onb, CMatrix, Tolerance};

/// The universal φ-map `Φ_φ(x) = Q* (x ⊗ I_r) V`, where `V` comes from a
/// Stinespring dilation of φ and the columns of `Q` span
/// `{(x ⊗ I_r) V h}` inside `C^p ⊗ C^r`.
#[derive(Debug, Clone, Serialize)]
pub struct KsgnsConstruction {
    pub map: ModuleMap,
    #[serde(with = "crate::wire::matrix")]
    pub subspace: CMatrix,
    pub dilation: StinespringDilation,
}

impl KsgnsConstruction {
    /// `(x ⊗ I_r) V`, the Stinespring-side operator `Ψ_ρ(x) V`.
    pub fn lifted(&self, x: &CMatrix) -> CMatrix {
        self.dilation.rho(x) * &self.dilation.v
    }

    /// `Φ_φ(x)` for any `p x q` matrix in the span of the module.
    pub fn evaluate(&self, x: &CMatrix) -> CMatrix {
        self.subspace.adjoint() * self.lifted(x)
    }

    /// Dimension of the subspace realizing `H_φ`.
    pub fn space_dim(&self) -> usize {
        self.subspace.ncols()
    }
}

pub fn ksgns(phi: &CpMap, e: &ConcreteModule, tol: &Tolerance) -> Result<KsgnsConstruction> {
    if e.algebra() != phi.algebra() {
        return Err(Error::ShapeMismatch(
            "phi is defined on a different algebra than E".into(),
        ));
    }
    let dilation = phi.stinespring(tol)?;
    let (p, r, m) = (e.row_dim(), dilation.rank, phi.target_dim());

    let mut spanning = CMatrix::zeros(p * r, e.dim() * m);
    for (i, x) in e.basis().iter().enumerate() {
        let lifted = dilation.rho(x) * &dilation.v;
        spanning.view_mut((0, i * m), (p * r, m)).copy_from(&lifted);
    }
    let subspace = range_onb(&spanning, tol);
    let d = subspace.ncols();

    let values = e
        .basis()
        .iter()
        .map(|x| subspace.adjoint() * dilation.rho(x) * &dilation.v)
        .collect();
    let map = ModuleMap::new(e.clone(), m, d, values)?;

    let check = is_phi_map(&map, phi, tol)?;
    if !check.holds {
        return Err(Error::Certification(format!(
            "KSGNS map fails the phi-map identity: {:?}",
            check.first_failure
        )));
    }
    Ok(KsgnsConstruction {
        map,
        subspace,
        dilation,
    })
}
