use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("unknown field `{0}`")]
    UnknownField(String),

    #[error("undefined recursion variable `{0}`")]
    UndefinedVariable(String),

    #[error("unguarded recursion: variable `{variable}` occurs in head position in the definition of `{definition}`")]
    Unguarded { definition: String, variable: String },

    #[error("state budget exhausted after {explored} states")]
    StateBudget { explored: usize },

    #[error("word budget exhausted (limit {limit})")]
    WordBudget { limit: usize },

    #[error(
        "term offers a bare communication step `{0}`; apply the restriction \
         operator (delta) over the program's channels first"
    )]
    ResidualComm(String),

    #[error("act not in the declared alphabet: {0}")]
    ActOutsideAlphabet(String),

    #[error("reachable label outside the declared alphabet: {0}")]
    LabelOutsideAlphabet(String),

    #[error("property expansion budget exceeded: |A|^M = {0} words")]
    PropBudget(u64),

    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("{0}")]
    Invalid(String),
}
