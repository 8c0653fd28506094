use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix determinant must be positive, got {0}")]
    NonPositiveDeterminant(f64),
    #[error("point is not in the upper half-plane (imaginary part {0})")]
    NotInUpperHalfPlane(f64),
    #[error("derivative evaluated at the pole x = {0}")]
    Pole(f64),
    #[error("the identity element has no axis")]
    IdentityElement,

    #[error("disk {index}: {reason}")]
    InvalidDisk { index: i32, reason: String },
    #[error("disks {first} and {second} overlap (gap {gap})")]
    OverlappingDisks { first: i32, second: i32, gap: f64 },
    #[error("disk indices must be exactly ±1..±q: {0}")]
    IndexSet(String),
    #[error("generator for index {index} does not pair its disks (defect {defect:e})")]
    GeneratorMismatch { index: i32, defect: f64 },
    #[error("letter {0} is not an index of this factor")]
    UnknownLetter(i32),
    #[error("word is not reduced at position {position}")]
    NonReducedWord { position: usize },
    #[error("word evaluates to a non-hyperbolic element")]
    NonHyperbolic,
    #[error("branch pole inside interval [{lo}, {hi}]")]
    PoleInInterval { lo: f64, hi: f64 },

    #[error("rank mismatch: expected {expected} components, got {got}")]
    RankMismatch { expected: usize, got: usize },
    #[error("component {factor} lies outside all disks")]
    OutsideAllDisks { factor: usize },
    #[error("component {factor} is not in the depth-{depth} limit-set cover")]
    NotInCover { factor: usize, depth: usize },
    #[error("coding terminated at step {step} in factor {factor}")]
    CodeTerminated { step: usize, factor: usize },

    #[error("geodesic is tangent to circle {letter} (discriminant {discriminant:e})")]
    TangentCrossing { letter: i32, discriminant: f64 },
    #[error("no future intersection in factor {factor} before the horizon")]
    NoFutureIntersection { factor: usize },
    #[error("geodesic endpoints coincide")]
    DegenerateGeodesic,
    #[error("factor {factor}: returned chamber is not in the cross section")]
    CrossSection { factor: usize },
    #[error("periodic flat left its closed geodesic (expected letter {expected}, crossed {got})")]
    AnchorLost { expected: i32, got: i32 },

    #[error("inverse branch {letter} maps node {node} outside the interpolation interval")]
    BranchEscapes { letter: i32, node: f64 },
    #[error("iteration did not converge: {0}")]
    NonConvergence(String),
    #[error("root is not bracketed on [{lo}, {hi}]")]
    Bracketing { lo: f64, hi: f64 },
    #[error("problem size {size} exceeds the limit {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for failures of an iterative numerical method, as opposed to
    /// invalid input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence(_)
                | Error::Bracketing { .. }
                | Error::TangentCrossing { .. }
                | Error::NoFutureIntersection { .. }
                | Error::CrossSection { .. }
                | Error::AnchorLost { .. }
                | Error::CodeTerminated { .. }
                | Error::BranchEscapes { .. }
        )
    }
}
