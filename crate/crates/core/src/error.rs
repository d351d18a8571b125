use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("state weight W must be self-adjoint positive definite")]
    InvalidWeight,
    #[error("sI - A is singular to working precision at s = {0}")]
    SingularResolvent(Complex64),
    #[error("node is not square (p = {p}, m = {m})")]
    NotSquare { p: usize, m: usize },
    #[error("i*omega with omega = {0} lies in the spectrum of A")]
    OmegaInSpectrum(f64),
    #[error("colocation condition B*(iwI + A*)^-1 = C(iwI - A)^-1 fails (residual {0:e})")]
    AssViolated(f64),
    #[error("A is not essentially skew-adjoint and dissipative")]
    NotEsad,
    #[error("observation operator is not the adjoint of the control operator (residual {0:e})")]
    NotColocated(f64),
    #[error("A is not self-adjoint and dissipative")]
    NotSelfAdjointDissipative,
    #[error("matrix is not self-adjoint")]
    NotSelfAdjoint,
    #[error("grid point {0} is not in the open right half-plane intersected with the resolvent set")]
    GridPointInSpectrum(Complex64),
    #[error("Cayley parameter alpha = {0} lies in the spectrum of A")]
    AlphaInSpectrum(Complex64),
    #[error("Cayley parameter alpha = {0} must have positive real part")]
    AlphaNotRightHalfPlane(Complex64),
    #[error("-1 is an eigenvalue of A_d; no continuous-time generator exists")]
    MinusOneEigenvalue,
    #[error("Laguerre parameter must have positive real part")]
    NonPositiveAlpha,
    #[error("node is not impedance passive")]
    NotImpedancePassive,
    #[error("I + kD is singular")]
    SingularIPlusKD,
    #[error("I - KD is singular; feedback is not admissible")]
    SingularIMinusKD,
    #[error("kappa = {kappa} outside the open interval (0, {kappa0})")]
    KappaOutOfRange { kappa: f64, kappa0: f64 },
    #[error("the shifted node Sigma_E is not impedance passive")]
    NotAlmostPassive,
    #[error("A does not generate a contraction semigroup")]
    NotContraction,
    #[error("lambda = {0} lies in the open-loop spectrum")]
    LambdaInOpenLoopSpectrum(Complex64),
    #[error("stiffness operator A0 is singular or not positive definite")]
    SingularA0,
    #[error("damping operator M is singular")]
    SingularM,
    #[error("invalid plant: {0}")]
    InvalidPlant(String),
    #[error("root finding failed for beam mode {0}")]
    RootFindingFailure(usize),
    #[error("simulation produced a non-finite state at t = {0}")]
    NonFiniteState(f64),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
