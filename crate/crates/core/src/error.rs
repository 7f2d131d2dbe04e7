use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not hermitian: deviation {deviation:.3e} exceeds {allowed:.3e}")]
    NotHermitian { deviation: f64, allowed: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix contains a non-finite entry")]
    NonFinite,

    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),

    #[error("matrix lies outside the algebra (off-block mass {0:.3e})")]
    OutsideAlgebra(f64),

    #[error("module integrity violated: {0}")]
    ModuleIntegrity(String),

    #[error("matrix is not in the span of the module basis (residual {0:.3e})")]
    NotInSpan(f64),

    #[error("internal direct sum requires trivial intersection")]
    NontrivialIntersection,

    #[error("map is not completely positive (Choi minimum eigenvalue {0:.3e})")]
    NotCompletelyPositive(f64),

    #[error("map is not completely semi-phi on its domain (Gram margin {0:.3e})")]
    NotSemiPhi(f64),

    #[error("least-squares system is inconsistent (residual {0:.3e})")]
    Inconsistent(f64),

    #[error("S0 is not contractive (operator norm {0:.12})")]
    NotContractive(f64),

    #[error("certification failed: {0}")]
    Certification(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error(
        "phi-extension obstruction is nonzero (norm {0:.3e}); \
         phi does not vanish on <F-perp, E>, so no phi-map extension exists"
    )]
    ObstructionNonzero(f64),

    #[error("no witness: the pair satisfies the completely semi-phi inequality")]
    NoViolation,

    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),

    #[error("range is not contained in the declared codomain: {0}")]
    RangeOutsideCodomain(String),

    #[error("system map is not corner-structured")]
    NotCornerStructured,

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
