use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular linear system")]
    SingularSystem,

    #[error("value is undefined under reduction mod p (p divides a denominator)")]
    UndefinedUnderPhi,

    #[error("division by zero")]
    DivisionByZero,

    #[error("{0} is not a prime congruent to 3 mod 4")]
    NotFieldPrime(String),

    #[error("no prime found in range after {attempts} attempts")]
    PrimeSearchExhausted { attempts: usize },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: coordinate {value} is not {bound}-rational")]
    PrecisionViolation {
        line: usize,
        value: String,
        bound: String,
    },

    #[error("label {label}: header declares {declared} records, stream has {found}")]
    CountMismatch {
        label: char,
        declared: usize,
        found: usize,
    },

    #[error("value outside the indexed domain: {0}")]
    DomainViolation(String),

    #[error("pass budget of {budget} exceeded")]
    PassBudgetExceeded { budget: usize },

    #[error("no nonzero values to choose from")]
    EmptySet,

    #[error("sample budget of {budget} exceeded")]
    SamplerExhausted { budget: usize },

    #[error("reference frame is degenerate")]
    DegenerateFrame,

    #[error("frame map is not a proper orthogonal matrix")]
    NotOrthogonal,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("could not generate an instance within precision bounds after {0} attempts")]
    GenerationExhausted(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
