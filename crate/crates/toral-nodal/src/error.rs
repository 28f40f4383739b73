//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Crate-wide error enumeration.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric or structural argument failed validation.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Shell enumeration visited more candidates than the configured budget.
    #[error("resource limit exceeded: visited {visited} candidates (budget {budget})")]
    ResourceLimit { visited: u64, budget: u64 },

    /// A frequency was claimed to lie on a shell but does not.
    #[error("frequency {0:?} is not on the shell of squared radius {1}")]
    OffShell(Vec<i64>, i64),

    /// A patch was built for a direction that does not match -xi0/|xi0|.
    #[error("patch direction does not match the frame (angular gap {0:.3e})")]
    MismatchedFrame(f64),

    /// Every sampled Hessian quadratic form vanished; the graph is flat.
    #[error("surface is flat: no admissible directions exist")]
    FlatSurface,

    /// Direction sampling produced no cap of the requested minimal angle.
    #[error("no admissible cap of angle >= {0} found")]
    CapNotFound(f64),

    /// Newton iteration for the patch coordinate failed to converge.
    #[error("Newton failed to converge at node t={t}, xhat={xhat:?} (|h|={residual:.3e})")]
    NewtonDivergence { t: f64, xhat: Vec<f64>, residual: f64 },

    /// The bump support intersects the discretized stationary locus.
    #[error("bump support overlaps the stationary set ({0} offending nodes)")]
    BumpOverlapsStationarySet(usize),

    /// Sampled Gauss-map images collided for distinct parameters.
    #[error("Gauss map is not injective on the sampled patch (min angular gap {0:.3e})")]
    GaussMapNotInjective(f64),

    /// A decay fit was requested with fewer than three distinct separations.
    #[error("degenerate fit: only {0} distinct separations")]
    DegenerateFit(usize),

    /// A certificate leaf contained more than two frequencies.
    #[error("base case failure: leaf with {0} frequencies (a line meets a sphere in at most 2 points)")]
    BaseCaseFailure(usize),

    /// Cap propagation was started with parameters violating the smallness condition.
    #[error("precondition violated: delta0={delta0} but measured epsilon={epsilon}")]
    PreconditionViolated { delta0: f64, epsilon: f64 },

    /// Line-fit input where all samples coincide.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A matrix was too ill-conditioned to invert reliably.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// Serialization / deserialization failure.
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
