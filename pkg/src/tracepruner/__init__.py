"""Prune redundant parallel chain-of-thought traces online.

Truncates concurrently generated reasoning traces, clusters them greedily by
predicted final-answer equivalence, resumes only a budgeted subset to
completion, and majority-votes the result.  The offline side builds labeled
trace-pair datasets, trains a lightweight feature judge with focal loss and
oversampling, and evaluates judges with AUROC / TNR@FNR / token-reduction
metrics.
"""

from .model import (
    Cluster,
    IllegalTransition,
    PruneConfig,
    Segment,
    Trace,
    TracePair,
    TraceState,
    transition,
)

__all__ = [
    "Cluster",
    "IllegalTransition",
    "PruneConfig",
    "Segment",
    "Trace",
    "TracePair",
    "TraceState",
    "transition",
]

__version__ = "0.1.0"
