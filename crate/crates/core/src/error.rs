use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("site {0} is missing from the wavefunction")]
    MissingSite(i64),

    #[error("branches are degenerate at q = {q}: eigenvector is not unique")]
    DegenerateBranch { q: f64 },

    #[error("channel polynomial vanishes identically (degenerate parameters)")]
    DegenerateParameters,

    #[error("energy {energy} lies within {distance:.3e} of a band edge")]
    BandEdge { energy: f64, distance: f64 },

    #[error("expected 3 channel roots, found {found}")]
    ChannelCount { found: usize },

    #[error("numerical conditioning failure: {0}")]
    Conditioning(String),

    #[error("no branch label matches root lambda = {re} + {im}i")]
    Labeling { re: f64, im: f64 },

    #[error("group velocity mismatch: Hellmann-Feynman {analytic}, finite difference {numeric}")]
    VelocityMismatch { analytic: f64, numeric: f64 },

    #[error("relative momentum q = {0} outside (0, pi)")]
    MomentumOutOfRange(f64),

    #[error("matching system inconsistent: residual {residual:.3e} exceeds {threshold:.3e}")]
    MatchingFailure { residual: f64, threshold: f64 },

    #[error("solution certificate failed: {0}")]
    Certificate(String),

    #[error("bound state null space has dimension {0}, expected 1")]
    DegenerateBoundState(usize),

    #[error("energy {0} is not inside an open gap")]
    NotInGap(f64),

    #[error("ring size {0} too small (need N >= 3)")]
    RingTooSmall(usize),

    #[error("translation symmetry broken: |[H, T]| = {0:.3e}")]
    TranslationBroken(f64),

    #[error("no in-gap exact-diagonalization eigenvalue near {0}")]
    OracleMismatch(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
