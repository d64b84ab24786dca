use alloc::string::String;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("truncation loss {tail:.3e} exceeds tolerance {tolerance:.3e}; increase K")]
    TruncationLoss { tail: f64, tolerance: f64 },
    #[error("target is not in span(Q): residual {residual:.3e}")]
    NotInSpan { residual: f64 },
    #[error("control profiles do not span {{1, cos x, sin x, cos 2x, sin 2x}}")]
    SpanningCondition,
    #[error("map is not an orientation-preserving diffeomorphism: min P' = {min_derivative:.3e}")]
    NonDiffeo { min_derivative: f64 },
    #[error("field is not positive: lower bound {lower_bound:.3e}")]
    NotPositive { lower_bound: f64 },
    #[error("certificate depth {depth} exceeds budget {budget}")]
    DepthBudget { depth: usize, budget: usize },
    #[error("budget exhausted; best achieved error {best_error:.3e}")]
    BudgetExceeded { best_error: f64 },
    #[error("dense oracle refused K = {k} (limit {limit})")]
    CostGuard { k: usize, limit: usize },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("norm mismatch: |‖ψ0‖ − ‖target‖| = {gap:.3e}")]
    NormMismatch { gap: f64 },
}
