"""Centralized optimal dispatch with per-user price extraction.

Minimizes total user disutility subject to power balance, elastic-demand
boxes and line flow limits.  Per-user prices come out of the QP duals as
locational marginal prices: the balance dual plus the congestion
contribution of each user's bus, so ``lam_k = -f_k'(d_k)`` at interior
optima.  Negative prices are legitimate (renewable surplus).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flexibility import feasibility_threshold, feasibility_value
from .model import GridSpec, Scenario, UserSpec
from .network import assemble_constraints, assemble_coupling
from .solvers import QpProblem, solve_qp
from .tolerances import DEFAULT, Tolerances

__all__ = ["DispatchSolution", "solve_centralized", "check_a1"]


@dataclass(frozen=True)
class DispatchSolution:
    """Optimal demands, per-user prices (duals of the net-demand definition),
    line flows and total disutility; or ``status='infeasible'``."""

    status: str                     # 'optimal' | 'infeasible'
    d: np.ndarray | None
    lam: np.ndarray | None
    line_flows: np.ndarray | None
    total_disutility: float | None
    infeasibility: float = 0.0


def solve_centralized(grid: GridSpec, users: tuple[UserSpec, ...],
                      scenario: Scenario, tol: Tolerances = DEFAULT) -> DispatchSolution:
    """Solve the dispatch QP; infeasibility is a reported status, not an error.

    Feasibility is decided by the slack-LP value first (region probes hit
    infeasible scenarios on purpose), then the strictly convex QP runs from
    the LP's feasible point.
    """
    users = tuple(users)
    csys = assemble_constraints(grid, users, tol)
    w = csys.w_vector(scenario)
    feas = feasibility_value(csys, w, tol)
    if feas.value > feasibility_threshold(csys, tol):
        return DispatchSolution("infeasible", None, None, None, None,
                                infeasibility=feas.value)

    n = len(users)
    alpha1 = np.array([u.alpha1 for u in users])
    alpha2 = np.array([u.alpha2 for u in users])
    df = np.array([u.fixed_demand for u in users])
    lo = np.array([u.elastic_lo for u in users])
    hi = np.array([u.elastic_hi for u in users])

    rhs = csys.c - csys.b_mat @ w
    flow_plus = csys.rows_labelled("flow+")
    flow_minus = csys.rows_labelled("flow-")
    a_in = np.vstack([csys.a_mat[flow_plus], csys.a_mat[flow_minus]])
    b_in = np.concatenate([rhs[flow_plus], rhs[flow_minus]])

    prob = QpProblem(
        h_mat=np.diag(2.0 * alpha1),
        g=alpha2,
        a_eq=np.ones((1, n)),
        b_eq=np.array([float(w.sum() - df.sum())]),
        a_in=a_in,
        b_in=b_in,
        lower=lo,
        upper=hi,
    )
    start = np.clip(feas.d, lo, hi)
    sol = solve_qp(prob, x0=start, tol=tol)
    if sol.status != "optimal":
        # scenario sits within LP tolerance of the boundary but the exact
        # constraint set is empty
        return DispatchSolution("infeasible", None, None, None, None,
                                infeasibility=max(feas.value, sol.infeasibility))

    coupling = assemble_coupling(grid, users, tol)
    n_lines = coupling.pi.shape[0]
    mu_plus = sol.ineq_duals[:n_lines]
    mu_minus = sol.ineq_duals[n_lines:]
    nu = float(sol.eq_duals[0])
    lam = nu - coupling.pi.T @ (mu_plus - mu_minus)

    scen_map = scenario.w if isinstance(scenario, Scenario) else dict(scenario)
    w_by_user = np.array([scen_map.get(u.id, 0.0) for u in users])
    q = df + sol.x - w_by_user
    flows = coupling.flows(q)
    total = float(np.sum(alpha1 * sol.x ** 2 + alpha2 * sol.x))
    _validate_dispatch(sol.x, q, flows, lo, hi, coupling.limits, tol)
    return DispatchSolution("optimal", sol.x, lam, flows, total)


def _validate_dispatch(d, q, flows, lo, hi, limits, tol: Tolerances):
    if abs(float(np.sum(q))) > tol.balance * (1.0 + float(np.sum(np.abs(q)))):
        raise AssertionError("dispatch balance residual out of tolerance")
    if np.any(d < lo - 1e-9) or np.any(d > hi + 1e-9):
        raise AssertionError("dispatch leaves an elastic box")
    if flows.size and np.any(np.abs(flows) > limits + 1e-8 * (1 + np.max(limits))):
        raise AssertionError("dispatch exceeds a line limit")


def check_a1(csys, scenario, tol: Tolerances = DEFAULT) -> bool:
    """True iff the dispatch feasible set for this scenario is nonempty."""
    feas = feasibility_value(csys, scenario, tol)
    return feas.value <= feasibility_threshold(csys, tol)
