//! Coherent configurations and association schemes on the non-tangent
//! lines of a nonsingular conic in PG(2,q).
//!
//! The group PGL(2,q), embedded in PGL(3,q) as the stabilizer of the conic
//! `{(ξ, ξ², 1)} ∪ {(0,1,0)}`, acts on the q² non-tangent lines of the
//! conic. This crate builds the coherent configuration afforded by that
//! action by two independent routes (orbit closure under generators and a
//! direct cross-ratio labelling), restricts it to the hyperbolic and
//! elliptic association schemes, computes intersection parameters both by
//! counting and by closed form, and constructs the fusion schemes and
//! strongly regular graphs that exist over fields of even square order.
//!
//! Modules mirror the layers of the construction:
//!
//! - [`gf`]: table-driven arithmetic for the small fields GF(p^n) and the
//!   quadratic towers F_q ⊂ F_{q²}, with trace classes and coset sets.
//! - [`projconic`]: PG(2,q) points and lines, the conic, line type
//!   classification and line–conic intersection over F_{q²}.
//! - [`crossratio`]: the cross-ratio on PG(1,·), the pair-collapsing map
//!   `f`, and the modified cross-ratio of two lines (point route and
//!   coordinate route).
//! - [`group_action`]: PGL(2,q) enumeration, its action on lines, and the
//!   two configuration builders.
//! - [`coherent`]: configuration axioms, intersection tensors, closed
//!   forms, spectra, pseudocyclicity, and the cyclotomic reference scheme.
//! - [`fusion`]: Frobenius fusion, the five-relation fusion over F_{q²}
//!   (q even) with its closed-form tables, the further merges, and the
//!   strongly regular graphs.
//! - [`report`]: serializable parameter reports and check runners.
//! - [`cache`]: binary cache files for built configurations.

pub mod cache;
pub mod coherent;
pub mod crossratio;
pub mod fusion;
pub mod gf;
pub mod group_action;
pub mod projconic;
pub mod report;

pub use coherent::{CoherentConfiguration, ParamTensor, RelLabel, RelationInfo, SpectralData};
pub use gf::{Fe, Gf, ProjElem, TraceClasses};
pub use group_action::LineConfiguration;
pub use projconic::{Line, LineType, PlaneGeometry, Point};

/// Errors shared by every layer of the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u32),
    #[error("polynomial 0x{0:x} is reducible (factor 0x{1:x})")]
    ReduciblePoly(u64, u64),
    #[error("unsupported field: {0}")]
    UnsupportedField(String),
    #[error("degenerate quadratic: all coefficients zero")]
    DegenerateQuadratic,
    #[error("zero coordinate triple")]
    ZeroTriple,
    #[error("tangent line where a non-tangent line is required")]
    TangentLine,
    #[error("cross-ratio undefined: three or more arguments equal")]
    CrossRatioDegenerate,
    #[error("equal lines where distinct lines are required")]
    EqualLines,
    #[error("group enumeration bound exceeded: q = {0} > {1}")]
    GroupBound(u32, u32),
    #[error("invalid relation label for this configuration: {0}")]
    InvalidLabel(String),
    #[error("restriction to the requested fibre is not symmetric")]
    NotSymmetric,
    #[error("cyclotomy: {0}")]
    Cyclotomy(String),
    #[error("fusion: {0}")]
    Fusion(String),
    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
