use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes shared by the factor algebra and the solver pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Some factor or domain lost its last supported entry.
    #[error("unsatisfiable: {0}")]
    Unsatisfiable(String),

    /// A product (or clause encoding) would have produced more entries than the budget allows.
    #[error("table blow-up: {attempted} entries attempted, budget is {budget}")]
    TableBlowUp { attempted: u64, budget: u64 },

    /// Propagation did not reach support stability within its message budget.
    /// `pending` lists `(from, to, deviation)` for every directed edge still queued.
    #[error("propagation exceeded its budget of {budget} messages ({} edges still pending)", pending.len())]
    IterationBudget {
        budget: usize,
        pending: Vec<(usize, usize, u64)>,
    },

    #[error("time limit exceeded")]
    Timeout,

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),
}

impl Error {
    pub(crate) fn unsat(reason: impl Into<String>) -> Self {
        Error::Unsatisfiable(reason.into())
    }

    pub(crate) fn contract(reason: impl Into<String>) -> Self {
        Error::Contract(reason.into())
    }
}
