use thiserror::Error;

/// Every failure the library can report.
///
/// Variants are grouped by the stage that raises them; [`Error::exit_code`]
/// maps them onto the CLI's exit codes.
#[derive(Debug, Error)]
pub enum Error {
    // group construction
    #[error("group closure exceeded {max_order} elements")]
    NonClosure { max_order: usize },
    #[error("generator {index} is singular (|det| = {det:e})")]
    SingularGenerator { index: usize, det: f64 },
    #[error("matrix set is not closed under multiplication")]
    NotAGroup,
    #[error("element {index} is not orthogonal (deviation {deviation:e}); orthogonalize the group first")]
    NotOrthogonal { index: usize, deviation: f64 },
    #[error("class-sum eigenspaces could not be separated after {attempts} attempts")]
    DegenerateSplit { attempts: usize },
    #[error("unknown character index {0}")]
    UnknownCharacter(usize),
    #[error("unknown group '{0}'")]
    UnknownGroup(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    // models
    #[error("unknown model '{0}'")]
    UnknownModel(String),
    #[error("bad model parameters: {0}")]
    BadParams(String),
    #[error("Hamiltonian is not invariant under the group: residual {residual:e} > {tol:e}")]
    InvarianceViolation { residual: f64, tol: f64 },
    #[error("energy window not confined within radius {search_radius}")]
    NotConfined { search_radius: f64 },

    // quantum side
    #[error("bad grid size: {0}")]
    BadSize(String),
    #[error("box half-width {half_width} too small: confinement radius {radius} exceeds {fraction} of it")]
    BoxTooSmall { half_width: f64, radius: f64, fraction: f64 },
    #[error("eigensolver did not converge: {0}")]
    ConvergenceFailure(String),
    #[error("sector leak: cluster at E = {energy} has non-integer projector trace {trace} for character {chi}")]
    SectorLeak { energy: f64, chi: usize, trace: f64 },
    #[error("bad window: {0}")]
    BadWindow(String),
    #[error("cutoff support [{support_lo}, {support_hi}] exceeds the computed eigenvalue window [{window_lo}, {window_hi}]")]
    WindowOverflow { support_lo: f64, support_hi: f64, window_lo: f64, window_hi: f64 },

    // classical side
    #[error("trajectory escaped radius {radius} at t = {time}")]
    Escape { time: f64, radius: f64 },
    #[error("integration failed: {0}")]
    StepFailure(String),
    #[error("Newton did not converge from seed (residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("Newton matrix rank {rank} below {expected}")]
    DegenerateJacobian { rank: usize, expected: usize },
    #[error("eigenvalue-1 generalized eigenspace has dimension {dimension} > 2")]
    NondegeneracyViolation { dimension: usize },
    #[error("index rounding residual {residual} exceeds {tol}")]
    PhaseAmbiguity { residual: f64, tol: f64 },

    // assembly
    #[error("Monte Carlo standard error {std_err:e} exceeds {limit:e}")]
    MCVariance { std_err: f64, limit: f64 },
    #[error("regime violation: {0}")]
    RegimeViolation(String),
    #[error("degenerate orbit at t0 = {t0} contributes to the sum")]
    DegenerateOrbit { t0: f64 },
    #[error("orbit coverage: {0}")]
    MissingOrbitCoverage(String),
    #[error("group does not act freely on the energy shell (element {element} fixes a point)")]
    NonFreeAction { element: usize },
    #[error("reduced and per-element assemblies disagree: {reduced} vs {direct}")]
    ClassificationMismatch { reduced: String, direct: String },

    // harness
    #[error("configuration error: {0}")]
    Config(String),
    #[error("artifact hash mismatch: expected {expected}, found {found}")]
    HashMismatch { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// 2 = configuration, 3 = numerical failure, 4 = regime/coverage violation.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            UnknownGroup(_) | UnknownModel(_) | BadParams(_) | BadSize(_) | BadWindow(_)
            | Config(_) | HashMismatch { .. } | UnknownCharacter(_) | DimensionMismatch { .. }
            | Io(_) => 2,
            RegimeViolation(_) | MissingOrbitCoverage(_) | WindowOverflow { .. }
            | NonFreeAction { .. } => 4,
            _ => 3,
        }
    }
}
