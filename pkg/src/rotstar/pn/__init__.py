"""Post-Newtonian correction of a rigidly rotating polytrope."""
from .background import Background, newtonian_background
from .metric import MetricBundle, assemble_metric, to_static_frame, to_corotating_frame
from .solver import PnState, SolveConfig, SolveReport, inner_solve, k_prime_gradient, norms, outer_solve

__all__ = [
    "Background", "newtonian_background", "MetricBundle", "assemble_metric", "to_static_frame",
    "to_corotating_frame", "PnState", "SolveConfig", "SolveReport", "inner_solve", "k_prime_gradient",
    "norms", "outer_solve",
]
