//! Finite-dimensional toolkit for Hilbert C*-modules and completely
//! positive maps.
//!
//! A Hilbert module is realized as a space `E` of `p x q` matrices over a
//! block-diagonal algebra `A ⊆ M_q`, with inner product `<x, y> = x* y`.
//! Maps out of `E` take values in `B(C^m, C^k)`. On top of that sit:
//!
//! * Choi/Kraus/Stinespring machinery for completely positive maps ([`cpmap`]);
//! * phi-map and completely semi-phi-map predicates, the KSGNS map, and the
//!   extension engine that extends a completely semi-phi-map from a
//!   submodule to the whole module ([`extension`]);
//! * the operator system `[[C I, E], [E*, A]]` and its block maps ([`paulsen`]).

pub mod algebra;
pub mod cpmap;
pub mod error;
pub mod extension;
pub mod fixtures;
pub mod modules;
pub mod numerics;
pub mod paulsen;
pub mod problem;
pub mod wire;

pub use algebra::{AlgebraElement, BlockAlgebra};
pub use cpmap::{CpMap, StinespringDilation};
pub use error::{Error, Result};
pub use extension::{ExtensionResult, ModuleMap};
pub use modules::ConcreteModule;
pub use numerics::{CMatrix, CVector, Tolerance};
pub use paulsen::{PaulsenSystem, SystemMap};
