use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// `is_numerical` separates failures of the mathematics (gap closings,
/// eigensolver trouble) from invalid inputs, which the CLI maps to different
/// exit codes.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown walk variant `{0}`")]
    UnknownVariant(String),
    #[error("loss probability must lie in [0, 1], got {0}")]
    InvalidLoss(f64),
    #[error("coin angles must be finite, got ({0}, {1})")]
    InvalidCoin(f64, f64),
    #[error("operator word contains {0} loss operators; at most one is allowed")]
    MultipleLoss(usize),

    #[error("momentum-space analysis needs a homogeneous sequence")]
    Inhomogeneous,
    #[error("gap closed: |Re n| = {norm:e} at k = {k}")]
    GapClosed { k: f64, norm: f64 },
    #[error("winding did not converge to an integer: {value} after grid {grid}")]
    NonIntegerWinding { value: f64, grid: usize },
    #[error("h vector leaves the chiral plane: |h1| = {h1:e} at k = {k}")]
    ChiralAxisViolation { k: f64, h1: f64 },
    #[error("gamma = (1-p)^(-1/4) is undefined at p = {0}")]
    GammaUndefined(f64),
    #[error("n0 has imaginary part {im:e} at k = {k}")]
    ComplexN0 { k: f64, im: f64 },
    #[error("degenerate Floquet eigenvalues; eigenvectors are ill-conditioned")]
    DegenerateSpectrum,
    #[error("not a pseudo-unitary point: |lambda| = ({0}, {1})")]
    NotPseudoUnitary(f64, f64),
    #[error("operation requires the unitary limit p = 0, got p = {0}")]
    NotUnitaryLimit(f64),

    #[error("survival probability is zero at step {0}")]
    ZeroSurvival(usize),
    #[error("step {requested} exceeds trajectory length {len}")]
    StepOutOfRange { requested: usize, len: usize },

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("eigensolver failure: {0}")]
    EigensolverFailure(String),

    #[error("invalid disorder specification: {0}")]
    InvalidDisorder(String),
}

impl Error {
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::GapClosed { .. }
                | Error::NonIntegerWinding { .. }
                | Error::ChiralAxisViolation { .. }
                | Error::ComplexN0 { .. }
                | Error::DegenerateSpectrum
                | Error::ZeroSurvival(_)
                | Error::EigensolverFailure(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
