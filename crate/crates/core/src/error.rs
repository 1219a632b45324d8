use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sample count {0} must be odd (2M+1 uniform nodes)")]
    EvenSampleCount(usize),

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("coefficient vector has length {got}, expected 2*{order}+1")]
    CoefficientLength { order: usize, got: usize },

    #[error("function is not positive: value {value:e} at node {index} (theta = {theta:.6})")]
    NotPositive {
        index: usize,
        theta: f64,
        value: f64,
    },

    #[error("function is not real-valued (Hermitian defect {0:e})")]
    NotReal(f64),

    #[error("Mobius parameter must satisfy |w| < 1, got |w| = {0}")]
    MobiusOutsideDisk(f64),

    #[error("deformation parameter must satisfy |tau| < 1/2, got {0}")]
    TauOutOfRange(f64),

    #[error("weight violates the perimeter normalization: residual {0:e}")]
    NotNormalized(f64),

    #[error("matrix is not Hermitian: defect {0:e}")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite: eigenvalue {0:e}")]
    NotPositiveSemidefinite(f64),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("the Riemann zeta function has a pole at x = 1")]
    ZetaPole,

    #[error("derivative order {0} is not supported (expected 0, 1 or 2)")]
    DerivativeOrder(u32),

    #[error(
        "tail estimate {tail:e} exceeds tolerance for value {value:e} at s = {s}; raise N above {trunc}"
    )]
    TailTooLarge {
        s: f64,
        value: f64,
        tail: f64,
        trunc: usize,
    },

    #[error("sign change bracket not found: g({lo}) = {g_lo:e}, g({hi}) = {g_hi:e}")]
    BracketFailure {
        lo: f64,
        hi: f64,
        g_lo: f64,
        g_hi: f64,
    },

    #[error("weight is numerically conformal to the constant 1 (gap {0:e}); s_a is undefined")]
    ConformallyTrivial(f64),

    #[error("no threshold s_a found below s = {0}")]
    ThresholdNotFound(f64),

    #[error("deformation direction has nonzero mean {0:e}")]
    NonzeroMean(f64),

    #[error("indices must differ (p = m = {0})")]
    EqualIndices(u64),

    #[error("counterexample search exhausted r <= {0}")]
    SearchExhausted(u64),

    #[error(
        "quadratic regime violated at r = {r}: spectral {spectral:e} vs predicted {predicted:e}"
    )]
    QuadraticRegime {
        r: u64,
        spectral: f64,
        predicted: f64,
    },

    #[error("step size collapsed to {dt:e} at tau = {tau}")]
    StepCollapse { tau: f64, dt: f64 },

    #[error("trace tail {tail:e} above tolerance for value {value:e}")]
    TraceTail { value: f64, tail: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for rejections caused by numerical tolerances rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::TailTooLarge { .. }
                | Error::BracketFailure { .. }
                | Error::ThresholdNotFound(_)
                | Error::SearchExhausted(_)
                | Error::QuadraticRegime { .. }
                | Error::StepCollapse { .. }
                | Error::TraceTail { .. }
                | Error::NotPositiveSemidefinite(_)
                | Error::ConformallyTrivial(_)
        )
    }
}
