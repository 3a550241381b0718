from .evaluate import Evaluator, Extension, evaluate
from .grammar import (
    START,
    ExpansionCounts,
    Grammar,
    Label,
    enumerate_programs,
    expansion_counts,
    log_prior,
    sample_program,
)
from .syntax import (
    AllRotations,
    Attach,
    AttachFixed,
    Has,
    Map,
    PrimSet,
    Rotate,
    Var,
    parse_program,
    print_program,
)
