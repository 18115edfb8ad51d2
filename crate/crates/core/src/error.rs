use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: duplicate record id `{id}`")]
    DuplicateId { line: usize, id: String },

    #[error("address has no tokens")]
    EmptyAddress,

    #[error("invalid rule set: {0}")]
    InvalidRules(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("support mismatch: observed has {observed} cells, predicted has {predicted}")]
    SupportMismatch { observed: usize, predicted: usize },

    #[error("prediction assigns zero probability to observed cell {cell}; enable smoothing")]
    Divergent { cell: usize },

    #[error("empty contingency cube (n = 0)")]
    EmptyCube,

    #[error("transmission formulas disagree by {diff:e} bits")]
    FormulaDisagreement { diff: f64 },

    #[error("{}inconsistent hit counts: {cell} {detail}", year.map(|y| format!("year {y}: ")).unwrap_or_default())]
    InconsistentCounts {
        year: Option<i32>,
        cell: &'static str,
        detail: String,
    },

    #[error("unknown slice `{name}`; known slices: {}", known.join(", "))]
    UnknownSlice { name: String, known: Vec<String> },

    #[error("years must be strictly increasing ({previous} then {next})")]
    YearOrder { previous: i32, next: i32 },

    #[error("need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("year {0} not present in series")]
    MissingYear(i32),

    #[error("year {0} has zero total count")]
    ZeroTotal(i32),

    #[error("unknown category `{0}`")]
    UnknownCategory(String),

    #[error("every extrapolated count is zero")]
    ZeroExtrapolation,

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
