//! φ-maps, completely semi-φ-maps and their extension from a submodule.

mod engine;
mod ksgns;
mod map;
mod predicates;

pub use engine::{
    canonical_compacts_extension, compare_extensions, extend_semi_phi, ExtensionReport,
    ExtensionResult,
};
pub(crate) use engine::{cert_threshold, construct};
pub(crate) use predicates::check_pair;
pub use ksgns::{ksgns, KsgnsConstruction};
pub use map::ModuleMap;
pub use predicates::{
    gram_pair, is_completely_semi_phi, is_nondegenerate, is_phi_map, phi_extension_obstruction,
    semiphi_witness, GramPair, ObstructionReport, PhiMapReport, SemiPhiReport, SemiPhiWitness,
    WorstPair,
};

#[cfg(test)]
mod tests;
