"""Optimum sample allocation in stratified sampling under lower and upper bounds."""

from .allocore import (
    Allocation,
    BoxProblem,
    Kind,
    LowerProblem,
    Partition,
    SolveTrace,
    UpperProblem,
    candidate,
    objective,
    set_function_s,
    stsi_coefficients,
    variance_of_estimator,
)
from .fpia import bisection_solve, fpia_solve
from .recursive import lrna, naive_rna_box, rna, rna_with_domain, rnabox, rnabox_twin
from .verify import audit_trace, check_box_optimality, check_upper_optimality, oracle_enumerate

__version__ = "0.1.0"
