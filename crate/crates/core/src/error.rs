use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid group definition: {0}")]
    InvalidGroup(String),

    #[error("undeclared generator in word `{0}`")]
    UndeclaredGenerator(String),

    #[error("letter {letter} is outside the alphabet of size {degree}")]
    LetterOutOfRange { letter: usize, degree: usize },

    #[error("restriction closure exceeded the state cap of {cap} states")]
    StateCapExceeded { cap: usize },

    #[error("nucleus fixpoint not reached within {rounds} rounds")]
    NotContractingWithinBound { rounds: usize },

    #[error("level {level} has {vertices} vertices, above the budget of {budget}")]
    LevelTooLarge { level: usize, vertices: u128, budget: usize },

    #[error("vertices lie on different levels ({0} and {1})")]
    DifferentLevels(usize, usize),

    #[error("cannot push down {k} levels from a vertex at level {level}")]
    KTooLarge { k: usize, level: usize },

    #[error("hull needs level at least {needed}, base set is at level {level}")]
    LevelTooSmall { needed: usize, level: usize },

    #[error("F^{k} does not map the source set onto the target set")]
    NotAnIterate { k: usize },

    #[error("ray equivalence undecided within depth {0}")]
    UndecidedEquivalence(usize),

    #[error("local degree did not stabilize on levels {from}..={to}")]
    NotStabilized { from: usize, to: usize },

    #[error("inradius is zero at sample resolution")]
    ZeroInradius,

    #[error("unknown builtin group `{0}`")]
    UnknownName(String),

    #[error("invalid ray literal `{0}`")]
    InvalidRay(String),

    #[error("horizontal set must be nonempty and lie on one level")]
    InvalidHorizontalSet,

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
