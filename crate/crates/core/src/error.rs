use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("evaluation failed at x = {x:?}: {reason}")]
    Evaluation { x: Vec<f64>, reason: String },

    #[error("decision vector out of bounds at index {index}: {value} not in [{lower}, {upper}]")]
    OutOfBounds {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid problem definition: {0}")]
    InvalidProblem(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("problem `{0}` has no analytic constrained Pareto front")]
    NoAnalyticFront(String),

    #[error("grid enumeration of {requested} points exceeds the budget of {budget}")]
    BudgetExceeded { requested: u128, budget: u128 },

    #[error("population is empty")]
    EmptyPopulation,

    #[error("{operator} needs a mating pool of at least {required}, got {actual}")]
    PoolTooSmall {
        operator: &'static str,
        required: usize,
        actual: usize,
    },

    #[error("replay holds {available} records, {requested} requested")]
    InsufficientRecords { requested: usize, available: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
