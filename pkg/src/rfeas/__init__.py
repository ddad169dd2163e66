"""Feasibility-region analysis with R-function composition.

Process constraints g_j(x) <= 0 are folded into a single implicit function
whose sign classifies feasibility; on top of that sit open- and closed-loop
feasibility functions, worst-case search, and region exploration (volume,
bounding boxes, boundaries, heatmaps), plus a problem-file DSL and a CLI.
"""

from .dsl import (
    AlphaOutOfRangeError,
    DslError,
    DuplicateVariableError,
    MissingBoundsError,
    Problem,
    ProblemSyntaxError,
    UnknownVariableError,
    UnreferencedVariableWarning,
    VariableSpec,
    emit_problem,
    parse_expr,
    parse_problem,
)
from .expr import (
    DivisionByZeroError,
    DomainError,
    Env,
    Expr,
    ExprError,
    NonFiniteResultError,
    UnboundVariableError,
    const,
    eval_arrays,
    eval_expr,
    sqrt,
    substitute,
    to_text,
    var,
    vmax,
    vmin,
)
from .problems import builtin_names, builtin_source, get_builtin
from .region import (
    Boundary2D,
    BoundingBox,
    Classification,
    DimensionMismatchError,
    GridField,
    NoConvergenceError,
    NoFeasibleSamplesError,
    SampleEvalError,
    VolumeEstimate,
    boundary_2d,
    box_of,
    classify,
    grid_field,
    mc_bbox,
    mc_volume,
    opt_bbox,
)
from .rfuncs import (
    HasControlVariablesError,
    NonFiniteInputError,
    PsiEval,
    RegionExpr,
    build_region,
    conj_expr,
    disj_expr,
    eval_region,
    psi_open,
    r_conj,
    r_disj,
    r_neg,
)
from .solver import (
    CriticalResult,
    NoControlVariablesError,
    ProjectedRegion,
    SolverOptions,
    SweepResult,
    SweepRow,
    critical_search,
    psi_closed,
    sweep,
)

__version__ = "0.1.0"
