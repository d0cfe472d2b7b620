use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("plan of {requested} measurements does not fit {ports} ports")]
    PlanTooLarge { requested: usize, ports: usize },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("port {0} is already measured")]
    IndexAlreadyMeasured(usize),

    #[error("port index {index} out of range for {ports} ports")]
    IndexOutOfRange { index: usize, ports: usize },

    #[error("duplicate port index {0}")]
    DuplicateIndex(usize),

    #[error("non-positive posterior denominator {value:e} at port {port}; raise the kernel jitter")]
    NonPositiveDenominator { port: usize, value: f64 },

    #[error("observation is bound to plan {observed}, not {expected}")]
    PlanMismatch { expected: String, observed: String },

    #[error("noise power {observed} does not match the design-time value {design}")]
    NoisePowerMismatch { design: f64, observed: f64 },

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("truth channel has zero norm")]
    ZeroNormTruth,

    #[error("no records to plot")]
    EmptyRecords,

    #[error("configuration: {0}")]
    Config(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{context}: {source}")]
    Trial {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn with_context(self, context: impl Into<String>) -> Self {
        Error::Trial {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
