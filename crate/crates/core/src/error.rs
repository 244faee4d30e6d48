use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Variants fall into three families: malformed input (`DimensionMismatch`,
/// `NonFinite`, `Parse`, ...), numerical contract violations raised when a
/// computation cannot certify its own result, and theorem-level signals such
/// as [`Error::ThetaDependence`] that indicate a bug rather than bad input.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian: ||A - A*|| = {defect:e} exceeds tolerance (||A|| = {scale:e})")]
    NonHermitianInput { defect: f64, scale: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is numerically singular: smallest singular value {sigma_min:e}, largest {sigma_max:e}")]
    NumericallySingular { sigma_min: f64, sigma_max: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {min_eigenvalue:e} below -tol*||A|| = {threshold:e}")]
    NotPositiveSemidefinite { min_eigenvalue: f64, threshold: f64 },

    #[error("eigenvalue iteration failed to converge for a {0}x{0} matrix")]
    EigenFailure(usize),

    #[error("lambda = {lambda} lies in the spectrum (distance {distance:e})")]
    LambdaInSpectrum { lambda: f64, distance: f64 },

    #[error("coupling s = {s} is resonant: smallest singular value of 1 + sTJ is {sigma_min:e}")]
    ResonantParameter { s: Complex64, sigma_min: f64 },

    #[error("base coupling {s_base} is itself a resonance point")]
    BasePointResonant { s_base: f64 },

    #[error("resonance group at {point} does not separate at y = {y:e}: expected {expected} members within radius {radius:e}, found {found}")]
    ClusterSeparationFailure {
        point: f64,
        y: f64,
        radius: f64,
        expected: usize,
        found: usize,
    },

    #[error("resonance index at {point} changed between y = {y:e} and y/2: ({first_plus},{first_minus}) vs ({second_plus},{second_minus})")]
    UnstableIndex {
        point: f64,
        y: f64,
        first_plus: usize,
        first_minus: usize,
        second_plus: usize,
        second_minus: usize,
    },

    #[error("resonance point {point} is within {distance:e} of window endpoint {endpoint}")]
    ResonantEndpoint { endpoint: f64, point: f64, distance: f64 },

    #[error("multiplicity of resonance point {point}: eigenvalue count {cluster} but contour winding {winding}")]
    MultiplicityMismatch { point: f64, cluster: usize, winding: i64 },

    #[error("an eigenvalue of H_s sits at lambda at the window endpoint s = {s}")]
    CrossingAtEndpoint { s: f64 },

    #[error("sample at t = {t} is not unitary: ||S*S - I|| = {defect:e}")]
    NotUnitary { t: f64, defect: f64 },

    #[error("eigenvalue matching did not settle below the step bound near t = {t} (max move {max_move:e})")]
    MatchingAmbiguous { t: f64, max_move: f64 },

    #[error("theta = {theta} is outside the admissible range (margin {margin})")]
    ThetaOutOfRange { theta: f64, margin: f64 },

    #[error("track {track} has an endpoint phase {phase} on the target angle {theta}")]
    PhaseOnTarget { track: usize, phase: f64, theta: f64 },

    #[error("phase jump {jump:e} across the excised gap at s = {s} exceeds the step bound")]
    GapTooWide { s: f64, jump: f64 },

    #[error("singular mu-invariant depends on theta: {values:?}")]
    ThetaDependence { values: Vec<(f64, i64)> },

    #[error("determinant vanishes on the contour near s = {s}")]
    ZeroOnContour { s: Complex64 },

    #[error("adaptive refinement exhausted near parameter {t}")]
    RefinementExhausted { t: f64 },

    #[error(
        "a resonance or anti-resonance point lies too close to the contour near s = {s} (singular value {sigma_min:e})"
    )]
    CriticalPointNearContour { s: Complex64, sigma_min: f64 },

    #[error("a resonance point collides with an anti-resonance point at y = {y:e}")]
    CollisionDetected { y: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable name of the variant, used in JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonHermitianInput { .. } => "NonHermitianInput",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::NonFinite(_) => "NonFinite",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::NumericallySingular { .. } => "NumericallySingular",
            Error::NotPositiveSemidefinite { .. } => "NotPositiveSemidefinite",
            Error::EigenFailure(_) => "EigenFailure",
            Error::LambdaInSpectrum { .. } => "LambdaInSpectrum",
            Error::ResonantParameter { .. } => "ResonantParameter",
            Error::BasePointResonant { .. } => "BasePointResonant",
            Error::ClusterSeparationFailure { .. } => "ClusterSeparationFailure",
            Error::UnstableIndex { .. } => "UnstableIndex",
            Error::ResonantEndpoint { .. } => "ResonantEndpoint",
            Error::MultiplicityMismatch { .. } => "MultiplicityMismatch",
            Error::CrossingAtEndpoint { .. } => "CrossingAtEndpoint",
            Error::NotUnitary { .. } => "NotUnitary",
            Error::MatchingAmbiguous { .. } => "MatchingAmbiguous",
            Error::ThetaOutOfRange { .. } => "ThetaOutOfRange",
            Error::PhaseOnTarget { .. } => "PhaseOnTarget",
            Error::GapTooWide { .. } => "GapTooWide",
            Error::ThetaDependence { .. } => "ThetaDependence",
            Error::ZeroOnContour { .. } => "ZeroOnContour",
            Error::RefinementExhausted { .. } => "RefinementExhausted",
            Error::CriticalPointNearContour { .. } => "CriticalPointNearContour",
            Error::CollisionDetected { .. } => "CollisionDetected",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Parse(_) => "Parse",
            Error::Io(_) => "Io",
        }
    }

    /// Whether the error stems from how the library was called (bad file,
    /// bad flag value) rather than from a numerical contract.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch(_)
                | Error::NonFinite(_)
                | Error::InvalidArgument(_)
                | Error::NonHermitianInput { .. }
                | Error::ThetaOutOfRange { .. }
                | Error::InvalidConfig(_)
                | Error::Parse(_)
                | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
