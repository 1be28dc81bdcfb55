use thiserror::Error;

/// Errors raised by the spectral toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("stiffness coefficients must be nonzero (p1 = {p1}, p2 = {p2})")]
    ZeroStiffness { p1: f64, p2: f64 },

    #[error("{side} boundary condition has both coefficients equal to zero")]
    DegenerateBoundary { side: &'static str },

    #[error("perturbation is not bounded on the closed domain: {0}")]
    UnboundedPerturbation(String),

    #[error("grid too coarse: need at least {needed} points per piece, got {got}")]
    GridTooCoarse { needed: usize, got: usize },

    #[error("domain correction system is numerically singular (condition number {condition:.3e})")]
    SingularCorrection { condition: f64 },

    #[error("operation requires a local perturbation; integral kernels are handled by the matrix engine")]
    NonlocalPerturbation,

    #[error("empty search window [{lo}, {hi}]")]
    WindowEmpty { lo: f64, hi: f64 },

    #[error("characteristic determinant vanishes too close to the contour near {near}")]
    BoundaryTooCloseToZero { near: num_complex::Complex64 },

    #[error("argument principle produced a non-integer winding number {winding:.4}")]
    PhaseInconsistent { winding: f64 },

    #[error("iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("condition matrix nullspace has dimension {dimension} but the eigenvalue is simple")]
    DegenerateNullspace { dimension: usize },

    #[error("grid with {n} cells per interval is too coarse (minimum {min})")]
    TooCoarse { n: usize, min: usize },

    #[error("dense eigensolver failed to converge")]
    EigenNoConvergence,

    #[error("condition block is numerically singular and cannot be eliminated")]
    EliminationSingular,

    #[error("spectral parameter is too close to the spectrum (distance estimate {distance:.3e})")]
    NearSingular { distance: f64 },

    #[error("unsupported Sobolev order {0}; supported orders are 0, 1, 2")]
    UnsupportedOrder(usize),

    #[error("need at least {needed} eigenvalues, got {got}")]
    TooFewEigenvalues { needed: usize, got: usize },

    #[error("spectrum only reaches |lambda| = {covered:.6e}, below the requested radius {requested:.6e}")]
    SpectrumTooShort { covered: f64, requested: f64 },

    #[error("projection contour passes through or encloses another eigenvalue ({other})")]
    CircleHitsSpectrum { other: num_complex::Complex64 },

    #[error("contour quadrature did not converge (last change {change:.3e})")]
    QuadratureNotConverged { change: f64 },

    #[error("function does not satisfy the domain conditions (max |L_i| = {max_condition:.3e})")]
    NotInDomain { max_condition: f64 },

    #[error("could not find a real shift outside the spectrum of the unperturbed operator")]
    ZeroInSpectrum,

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
