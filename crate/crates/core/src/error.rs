use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid Hilbert space: {0}")]
    InvalidSpace(String),
    #[error("factor index {index} out of range for a space with {factors} factors")]
    FactorOutOfRange { index: usize, factors: usize },
    #[error("factor {0} has dimension 1; no lowering operator exists")]
    TrivialFactor(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("operators live on different spaces")]
    SpaceMismatch,
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("channel count mismatch: {left} vs {right}")]
    ChannelMismatch { left: usize, right: usize },
    #[error("Hamiltonian is not self-adjoint (residual {0:.3e})")]
    NotSelfAdjoint(f64),
    #[error("scattering matrix is not unitary (residual {0:.3e})")]
    NotUnitary(f64),
    #[error("scattering matrix is not static (entries must be scalar multiples of identity)")]
    NotStatic,
    #[error("Stratonovich generator is not self-adjoint (residual {0:.3e})")]
    GeneratorNotSelfAdjoint(f64),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("invalid noise moments: {0}")]
    InvalidNoise(String),
    #[error("not a Bogoliubov transformation: {0}")]
    NotBogoliubov(String),
    #[error("index {index} out of range (max {max})")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("generator is not dissipative: K + K* has eigenvalue {0:.3e} > 0")]
    NotDissipative(f64),
    #[error("invalid density operator: {0}")]
    InvalidDensity(String),
    #[error("trace drift {0:.3e} exceeds tolerance")]
    TraceDrift(f64),
    #[error("positivity violated: minimum eigenvalue {0:.3e}")]
    PositivityViolation(f64),
    #[error("steady state is not unique: kernel dimension {0}")]
    DegenerateKernel(usize),
    #[error("step size too large: h*|L| = {0:.3e} exceeds 0.1")]
    StepStability(f64),
    #[error("truncation leak: top-level population {population:.3e} on factor {factor}")]
    TruncationLeak { factor: usize, population: f64 },
    #[error("evaluation at a pole of the transfer function (s = {0})")]
    Pole(String),
    #[error("{0}")]
    Expr(#[from] crate::expr::ExprError),
    #[error("convergence failure: {0}")]
    NotConverging(String),
}
