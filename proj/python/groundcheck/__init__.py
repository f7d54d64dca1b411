"""Visual-grounding reliability signals for sequence decoders."""

from groundcheck._core import (
    ConvergenceError,
    Error,
    IsotonicModel,
    NumericError,
    ParseError,
    ValidationError,
    __version__,
    attention_usage,
    auroc,
    average_precision,
    chair,
    counterfactual_signals,
    fit_isotonic,
    fit_logistic,
    generate,
    hidden_angle,
    mediation_gap_exact,
    mediation_gap_mc,
    pearson,
    pool,
    quantile_scale,
    run_cli,
    score_trace_line,
    spearman,
    validate_trace_line,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
