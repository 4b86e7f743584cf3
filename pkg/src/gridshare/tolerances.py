"""Central numeric tolerance configuration.

Every solver and geometric routine in the package reads its tolerances
from a single :class:`Tolerances` record, so tests can pin them and the
command line can override the feasibility classification threshold via
the ``GRIDSHARE_TOL`` environment variable.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

__all__ = ["Tolerances", "DEFAULT", "from_env"]


@dataclass(frozen=True)
class Tolerances:
    """Numeric tolerances shared across the package.

    Scale-dependent tolerances are stored as dimensionless factors; the
    consuming routine multiplies by ``1 + scale`` of the relevant data
    (right-hand side, cost vector, ...).
    """

    # linear algebra
    linear_residual: float = 1e-9

    # LP (bounded-variable simplex)
    lp_pivot: float = 1e-9          # reduced-cost threshold to enter
    lp_ratio: float = 1e-10         # denominator threshold in ratio test
    lp_feasibility: float = 1e-8    # factor on 1 + |rhs|_inf
    lp_gap: float = 1e-7            # factor on 1 + |objective|
    lp_degenerate_limit: int = 1000  # degenerate pivots before Bland's rule

    # QP (primal active set)
    qp_stationarity: float = 1e-7   # factor on 1 + |cost|_inf
    qp_complementarity: float = 1e-7
    qp_drop: float = 1e-9           # most-negative multiplier to drop
    qp_step: float = 1e-11          # |p| below this counts as stationary

    # feasibility / region geometry
    feasibility: float = 1e-7       # factor on 1 + |c|_inf for "value is zero"
    vertex_feasibility: float = 1e-7
    vertex_dedupe: float = 1e-7
    cut_duplicate: float = 1e-7
    membership: float = 1e-9
    boundary_band: float = 1e-6     # Monte-Carlo facet exclusion distance

    # result-record invariants
    balance: float = 1e-8


DEFAULT = Tolerances()


def from_env(base: Tolerances = DEFAULT) -> Tolerances:
    """Return ``base`` with the feasibility threshold overridden by the
    ``GRIDSHARE_TOL`` environment variable, when set."""
    raw = os.environ.get("GRIDSHARE_TOL")
    if raw is None:
        return base
    try:
        value = float(raw)
    except ValueError as exc:
        raise ValueError(f"GRIDSHARE_TOL is not a number: {raw!r}") from exc
    if value <= 0:
        raise ValueError(f"GRIDSHARE_TOL must be positive, got {value}")
    return replace(base, feasibility=value)
