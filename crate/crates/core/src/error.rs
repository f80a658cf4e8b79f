use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("mass required to compute the zero-point amplitude")]
    MassRequired,

    #[error("invalid parameter `{key}`: {reason}")]
    Parameter { key: String, reason: String },

    #[error("shape mismatch: expected {expected}x{expected}, got {got}x{got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error(
        "integration step underflow at t = {time:e} s; problem is stiff \
         (max channel weight x t_final = {stiffness_ratio:e})"
    )]
    StepUnderflow { time: f64, stiffness_ratio: f64 },

    #[error("non-unique steady state (null space of the generator is degenerate)")]
    NonUniqueSteadyState,

    #[error("truncation reached: phonon number hit the cap n_cap = {n_cap}")]
    TruncationReached { n_cap: usize },

    #[error("population growth is not linear in the fit window (R^2 = {r_squared:.6}); use a shorter window")]
    NonlinearWindow { r_squared: f64 },

    #[error("mode fields are sampled on different grids")]
    GridMismatch,

    #[error("degenerate modes (omega_j = omega_i = {omega:e} rad/s): use the two-mode supermode treatment")]
    DegenerateModes { omega: f64 },

    #[error("zero denominator: {0}")]
    ZeroDenominator(String),

    #[error("interface at x = {position:e} m is not aligned to a grid point")]
    InterfaceMisaligned { position: f64 },

    #[error("non-degenerate optical modes (omega_1 != omega_2): use the two-mode (a_1, a_2) Hamiltonian")]
    NonDegenerate,

    #[error("singular: {0}")]
    Singular(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
