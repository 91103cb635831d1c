use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown level {value:?} for variable {variable}")]
    UnknownLevel { variable: String, value: String },
    #[error("non-finite value in field {0}")]
    NonFiniteValue(String),
    #[error("post-encroachment time must be positive, got {0}")]
    NonPositivePet(f64),
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("stratified split would leave class {class} with no rows in one part")]
    DegenerateSplit { class: u8 },
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("no intercept in [{lo}, {hi}] reaches base rate {base_rate}")]
    NoRoot { lo: f64, hi: f64, base_rate: f64 },
    #[error("impurity of an empty node")]
    EmptyNode,
    #[error("only one class present in the labels")]
    SingleClass,
    #[error("minority class has {have} rows, need more than k = {k}")]
    TooFewMinority { have: usize, k: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("length mismatch: {0} labels vs {1} scores")]
    LengthMismatch(usize, usize),
    #[error("complete or quasi-complete separation: coefficients diverge")]
    Separation,
    #[error("information matrix is singular")]
    SingularInformation,
    #[error("need at least as many rows as parameters ({rows} rows, {params} parameters)")]
    TooFewRows { rows: usize, params: usize },
    #[error("no positive labels")]
    NoPositives,
    #[error("need at least {k} rows of each class, have {positives} positive / {negatives} negative")]
    TooFewPerClass { k: usize, positives: usize, negatives: usize },
    #[error("budget {budget} is smaller than the initial design size {n_init} (minimum 2)")]
    BudgetTooSmall { budget: usize, n_init: usize },
    #[error("invalid search space: {0}")]
    InvalidSearchSpace(String),
    #[error("exact Shapley enumeration supports at most {max} features, got {got}")]
    TooManyFeatures { max: usize, got: usize },
    #[error("background set is empty")]
    EmptyBackground,
    #[error("tree node {0} has no training cover")]
    MissingCover(usize),
    #[error("data has no confirmed_conflict labels")]
    UnlabeledData,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown CSV columns: {}", .0.join(", "))]
    UnknownColumns(Vec<String>),
    #[error("missing CSV columns: {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("CSV line {line}: {message}")]
    CsvRecord { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
