"""Peer-to-peer energy sharing on DC microgrids.

Centralized optimal dispatch, the bidding game that reaches the same
optimum through prices alone, and the absorbable region of renewable
outputs for which either scheme stays feasible.
"""

from .centralized import DispatchSolution, check_a1, solve_centralized
from .cli import MisreportSweepResult, misreport_sweep, run_cli
from .errors import (
    CaseFormatError,
    DegenerateCutError,
    DimensionError,
    DisconnectedGridError,
    GridShareError,
    IndefiniteMatrixError,
    InfeasibleError,
    InvariantError,
    NumericalError,
    SingularMatrixError,
)
from .flexibility import (
    DualBox,
    Halfspace,
    Region,
    compute_region,
    enumerate_vertices,
    feasibility_value,
    max_violation,
    membership,
    monte_carlo_check,
)
from .model import (
    Case,
    GridSpec,
    LineSpec,
    MarketParams,
    Scenario,
    UserSpec,
    aggregate_net_fixed,
    dump_case,
    load_case,
    write_case,
)
from .network import (
    ConstraintSystem,
    CouplingSystem,
    Ptdf,
    assemble_constraints,
    assemble_coupling,
    compute_ptdf,
)
from .sharing import (
    Bid,
    BidTrace,
    EquilibriumResult,
    PriceVector,
    best_response,
    check_c1,
    clear_market,
    run_sharing,
    verify_gne,
)
from .solvers import (
    LpProblem,
    LpSolution,
    QpProblem,
    QpSolution,
    solve_linear_system,
    solve_lp,
    solve_qp,
)
from .tolerances import DEFAULT as DEFAULT_TOLERANCES
from .tolerances import Tolerances

__version__ = "0.1.0"
