"""Dense LP and strictly convex QP solvers with exact dual extraction.

The LP solver is a bounded-variable primal simplex (revised form, dense
LU refactorization each pivot) with a crash basis, an artificial-variable
phase 1, and a Bland's-rule fallback after a run of degenerate pivots.
The QP solver is a primal active-set method started from a phase-1 LP
vertex.  Both are deterministic: all tie-breaking picks the lowest index.

Dual sign convention
--------------------
Row duals are marginals, d(objective)/d(rhs), in the problem's own
sense.  For a minimization with a ``<=`` row the dual is nonpositive.
QP multipliers follow the Lagrangian

    L = 0.5 x'Hx + g'x + nu'(A_eq x - b_eq) + mu'(A_in x - b_in)

so stationarity reads ``Hx + g + A_eq' nu + A_in' mu = 0`` with
``mu >= 0`` on ``<=`` rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import (
    IndefiniteMatrixError,
    InfeasibleError,
    NumericalError,
    SingularMatrixError,
)
from .tolerances import DEFAULT, Tolerances

__all__ = [
    "LpProblem",
    "LpSolution",
    "QpProblem",
    "QpSolution",
    "solve_lp",
    "solve_qp",
    "solve_linear_system",
]

_SENSES = ("<=", "=", ">=")

# nonbasic column states
_AT_LOWER, _AT_UPPER, _FREE, _BASIC = 0, 1, 2, 3


def solve_linear_system(a_mat, rhs, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Solve a dense square system ``a_mat @ x = rhs``.

    Raises :class:`SingularMatrixError` (with a rank estimate) for
    rank-deficient matrices and :class:`NumericalError` (with a condition
    estimate) when the residual exceeds ``tol.linear_residual``.
    """
    a = np.asarray(a_mat, dtype=float)
    b = np.asarray(rhs, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise ValueError("rhs length does not match matrix size")
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        rank = np.linalg.matrix_rank(a)
        raise SingularMatrixError(
            f"singular matrix: rank {rank} < {a.shape[0]}"
        ) from exc
    residual = np.max(np.abs(a @ x - b)) if b.size else 0.0
    scale = 1.0 + (np.max(np.abs(b)) if b.size else 0.0)
    if residual > tol.linear_residual * scale:
        rank = np.linalg.matrix_rank(a)
        if rank < a.shape[0]:
            raise SingularMatrixError(
                f"singular matrix: rank {rank} < {a.shape[0]}"
            )
        raise NumericalError(
            f"linear solve residual {residual:.3e} exceeds tolerance; "
            f"condition estimate {np.linalg.cond(a):.3e}"
        )
    return x


@dataclass
class LpProblem:
    """Linear program ``min/max c'x  s.t.  A x (<=,=,>=) rhs,  lower <= x <= upper``."""

    c: np.ndarray
    a_mat: np.ndarray
    senses: tuple[str, ...]
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    sense: str = "min"

    def __post_init__(self):
        self.c = np.atleast_1d(np.asarray(self.c, dtype=float))
        n = self.c.shape[0]
        self.a_mat = np.asarray(self.a_mat, dtype=float).reshape(-1, n)
        self.rhs = np.atleast_1d(np.asarray(self.rhs, dtype=float))
        self.senses = tuple(self.senses)
        self.lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        m = self.a_mat.shape[0]
        if self.rhs.shape[0] != m or len(self.senses) != m:
            raise ValueError("row count mismatch between a_mat, senses and rhs")
        if self.lower.shape[0] != n or self.upper.shape[0] != n:
            raise ValueError("bound arrays must match the variable count")
        for s in self.senses:
            if s not in _SENSES:
                raise ValueError(f"unknown row sense {s!r}")
        if np.any(self.lower > self.upper):
            j = int(np.argmax(self.lower > self.upper))
            raise ValueError(f"lower bound exceeds upper bound at index {j}")
        if self.sense not in ("min", "max"):
            raise ValueError(f"objective sense must be 'min' or 'max', got {self.sense!r}")

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    @property
    def n_rows(self) -> int:
        return self.a_mat.shape[0]


@dataclass
class LpSolution:
    """Result of :func:`solve_lp`.

    ``dual`` holds one marginal per row; ``dual_objective`` includes the
    reduced-cost contribution of variables sitting at finite bounds, so
    ``objective == dual_objective`` at optimality (strong duality).
    """

    status: str                       # 'optimal' | 'infeasible' | 'unbounded'
    x: np.ndarray | None
    dual: np.ndarray | None
    reduced_costs: np.ndarray | None
    objective: float | None
    dual_objective: float | None
    iterations: int
    infeasibility: float = 0.0        # phase-1 optimum when infeasible


class _Simplex:
    """Bounded-variable primal simplex on ``min c'x, A_ext x = rhs``."""

    def __init__(self, a_ext, rhs, lower, upper, tol: Tolerances):
        self.a = a_ext
        self.b = rhs
        self.lb = lower
        self.ub = upper
        self.tol = tol
        self.m, self.ncols = a_ext.shape
        self.state = np.empty(self.ncols, dtype=np.int8)
        for j in range(self.ncols):
            if np.isfinite(self.lb[j]):
                self.state[j] = _AT_LOWER
            elif np.isfinite(self.ub[j]):
                self.state[j] = _AT_UPPER
            else:
                self.state[j] = _FREE
        self.basis = np.empty(self.m, dtype=np.int64)
        self.iterations = 0
        self.degenerate = 0
        self.scale = 1.0 + (np.max(np.abs(rhs)) if rhs.size else 0.0)

    # -- basic quantities ------------------------------------------------

    def nonbasic_values(self) -> np.ndarray:
        vals = np.zeros(self.ncols)
        at_lo = self.state == _AT_LOWER
        at_up = self.state == _AT_UPPER
        vals[at_lo] = self.lb[at_lo]
        vals[at_up] = self.ub[at_up]
        return vals

    def solve_basis(self):
        bcols = self.a[:, self.basis]
        try:
            self.lu = lu_factor(bcols)
        except Exception as exc:  # LinAlgError from singular basis
            raise NumericalError(
                f"singular simplex basis; condition estimate "
                f"{np.linalg.cond(bcols):.3e}"
            ) from exc

    def point(self) -> np.ndarray:
        x = self.nonbasic_values()
        x[self.basis] = 0.0
        resid = self.b - self.a @ x
        x[self.basis] = lu_solve(self.lu, resid)
        return x

    def duals(self, c: np.ndarray) -> np.ndarray:
        return lu_solve(self.lu, c[self.basis], trans=1)

    # -- pivoting --------------------------------------------------------

    def entering(self, rc: np.ndarray, bland: bool):
        movable = (self.ub - self.lb) > 0
        elig_lo = (self.state == _AT_LOWER) & movable & (rc < -self.tol.lp_pivot)
        elig_up = (self.state == _AT_UPPER) & movable & (rc > self.tol.lp_pivot)
        elig_fr = (self.state == _FREE) & (np.abs(rc) > self.tol.lp_pivot)
        eligible = np.where(elig_lo | elig_up | elig_fr)[0]
        if eligible.size == 0:
            return None
        if bland:
            return int(eligible[0])
        return int(eligible[np.argmax(np.abs(rc[eligible]))])

    def step(self, c: np.ndarray) -> str:
        """One pivot of ``min c'x``; returns 'optimal', 'unbounded' or 'pivot'."""
        self.solve_basis()
        x = self.point()
        y = self.duals(c)
        rc = c - self.a.T @ y
        bland = self.degenerate > self.tol.lp_degenerate_limit
        q = self.entering(rc, bland)
        if q is None:
            self._x, self._y, self._rc = x, y, rc
            return "optimal"
        # move against the reduced-cost gradient
        delta = 1.0 if rc[q] < 0 else -1.0
        # moving x_q by delta*t changes basics by -t*delta*d
        d = lu_solve(self.lu, self.a[:, q])
        xb = x[self.basis]
        lb_b = self.lb[self.basis]
        ub_b = self.ub[self.basis]
        dd = delta * d
        t_best = np.inf
        leave_pos = -1
        leave_to = _AT_LOWER
        with np.errstate(divide="ignore", invalid="ignore"):
            hit_lo = dd > self.tol.lp_ratio
            t_lo = np.where(hit_lo, (xb - lb_b) / np.where(hit_lo, dd, 1.0), np.inf)
            t_lo[~np.isfinite(lb_b)] = np.inf
            hit_up = dd < -self.tol.lp_ratio
            t_up = np.where(hit_up, (xb - ub_b) / np.where(hit_up, dd, 1.0), np.inf)
            t_up[~np.isfinite(ub_b)] = np.inf
        t_lo = np.maximum(t_lo, 0.0)
        t_up = np.maximum(t_up, 0.0)
        i_lo = int(np.argmin(t_lo)) if self.m else 0
        i_up = int(np.argmin(t_up)) if self.m else 0
        if self.m and t_lo[i_lo] < t_best:
            t_best, leave_pos, leave_to = t_lo[i_lo], i_lo, _AT_LOWER
        if self.m and t_up[i_up] < t_best:
            t_best, leave_pos, leave_to = t_up[i_up], i_up, _AT_UPPER
        t_flip = self.ub[q] - self.lb[q] if (
            np.isfinite(self.lb[q]) and np.isfinite(self.ub[q])
        ) else np.inf
        if t_flip <= t_best:
            if not np.isfinite(t_flip):
                return "unbounded"
            # bound flip, basis unchanged
            self.state[q] = _AT_UPPER if self.state[q] == _AT_LOWER else _AT_LOWER
            if t_flip < self.tol.lp_ratio:
                self.degenerate += 1
            self.iterations += 1
            return "pivot"
        if not np.isfinite(t_best):
            return "unbounded"
        if t_best < self.tol.lp_ratio:
            self.degenerate += 1
        else:
            self.degenerate = 0
        leaving = self.basis[leave_pos]
        self.basis[leave_pos] = q
        self.state[q] = _BASIC
        self.state[leaving] = leave_to
        self.iterations += 1
        return "pivot"

    def run(self, c: np.ndarray, max_iters: int) -> str:
        for _ in range(max_iters):
            outcome = self.step(c)
            if outcome != "pivot":
                return outcome
        raise NumericalError(
            f"simplex exceeded {max_iters} pivots "
            f"({self.degenerate} consecutive degenerate)"
        )


def solve_lp(problem: LpProblem, tol: Tolerances = DEFAULT,
             max_iters: int | None = None) -> LpSolution:
    """Solve a bounded-variable LP; see :class:`LpSolution` for conventions."""
    n, m = problem.n_vars, problem.n_rows
    sign = 1.0 if problem.sense == "min" else -1.0
    c_struct = sign * problem.c
    if max_iters is None:
        max_iters = 10000 + 100 * (n + m)

    if m == 0:
        return _solve_boxed(problem, c_struct, sign)

    # standard form: [A | I] (x, s) = rhs with slack bounds by row sense
    slack_lb = np.zeros(m)
    slack_ub = np.zeros(m)
    for i, s in enumerate(problem.senses):
        if s == "<=":
            slack_lb[i], slack_ub[i] = 0.0, np.inf
        elif s == "=":
            slack_lb[i], slack_ub[i] = 0.0, 0.0
        else:
            slack_lb[i], slack_ub[i] = -np.inf, 0.0

    a_ext = np.hstack([problem.a_mat, np.eye(m)])
    lb = np.concatenate([problem.lower, slack_lb])
    ub = np.concatenate([problem.upper, slack_ub])
    c_ext = np.concatenate([c_struct, np.zeros(m)])

    # crash basis: slack if its bounds admit the row deficit, else a
    # singleton structural column, else an artificial
    x0 = np.where(np.isfinite(lb[:n]), lb[:n],
                  np.where(np.isfinite(ub[:n]), ub[:n], 0.0))
    deficit = problem.rhs - problem.a_mat @ x0
    col_nnz = np.count_nonzero(problem.a_mat, axis=0)
    art_cols: list[np.ndarray] = []
    art_rows: list[int] = []
    basis = np.empty(m, dtype=np.int64)
    used = np.zeros(n, dtype=bool)
    for i in range(m):
        if slack_lb[i] - 1e-12 <= deficit[i] <= slack_ub[i] + 1e-12:
            basis[i] = n + i
            continue
        placed = False
        for j in np.nonzero(problem.a_mat[i])[0]:
            if used[j] or col_nnz[j] != 1:
                continue
            v = x0[j] + deficit[i] / problem.a_mat[i, j]
            if lb[j] - 1e-12 <= v <= ub[j] + 1e-12:
                basis[i] = j
                used[j] = True
                placed = True
                break
        if not placed:
            col = np.zeros(m)
            col[i] = 1.0 if deficit[i] >= 0 else -1.0
            art_cols.append(col)
            art_rows.append(i)
            basis[i] = n + m + len(art_cols) - 1

    n_art = len(art_cols)
    if n_art:
        a_ext = np.hstack([a_ext, np.column_stack(art_cols)])
        lb = np.concatenate([lb, np.zeros(n_art)])
        ub = np.concatenate([ub, np.full(n_art, np.inf)])
        c_ext = np.concatenate([c_ext, np.zeros(n_art)])

    sx = _Simplex(a_ext, problem.rhs, lb, ub, tol)
    sx.basis = basis
    sx.state[basis] = _BASIC

    if n_art:
        c_ph1 = np.zeros_like(c_ext)
        c_ph1[n + m:] = 1.0
        outcome = sx.run(c_ph1, max_iters)
        if outcome != "optimal":
            raise NumericalError("phase-1 LP reported unbounded; inconsistent state")
        ph1_obj = float(c_ph1 @ sx._x)
        if ph1_obj > tol.lp_feasibility * sx.scale:
            return LpSolution("infeasible", None, None, None, None, None,
                              sx.iterations, infeasibility=ph1_obj)
        _evict_artificials(sx, n + m)
        # freeze artificials at zero for phase 2
        sx.lb[n + m:] = 0.0
        sx.ub[n + m:] = 0.0

    outcome = sx.run(c_ext, max_iters - sx.iterations)
    if outcome == "unbounded":
        return LpSolution("unbounded", None, None, None, None, None, sx.iterations)

    x_full, y, rc_full = sx._x, sx._y, sx._rc
    x = x_full[:n]
    rc = rc_full[:n]
    _check_lp_feasibility(problem, x, tol)
    objective = float(problem.c @ x)
    at_bound = (sx.state[:n] != _BASIC) & np.isfinite(x)
    dual_internal = float(y @ problem.rhs) + float(rc[at_bound] @ x[at_bound])
    dual = sign * y
    gap = abs(sign * objective - dual_internal)
    if gap > tol.lp_gap * (1.0 + abs(objective)):
        raise NumericalError(
            f"LP duality gap {gap:.3e} exceeds tolerance; condition estimate "
            f"{np.linalg.cond(a_ext[:, sx.basis]):.3e}"
        )
    return LpSolution("optimal", x, dual, sign * rc, objective,
                      sign * dual_internal, sx.iterations)


def _solve_boxed(problem: LpProblem, c_min: np.ndarray, sign: float) -> LpSolution:
    """LP with no rows: each variable goes to the bound its cost prefers."""
    x = np.zeros(problem.n_vars)
    for j, cj in enumerate(c_min):
        if cj > 0:
            if not np.isfinite(problem.lower[j]):
                return LpSolution("unbounded", None, None, None, None, None, 0)
            x[j] = problem.lower[j]
        elif cj < 0:
            if not np.isfinite(problem.upper[j]):
                return LpSolution("unbounded", None, None, None, None, None, 0)
            x[j] = problem.upper[j]
        else:
            if np.isfinite(problem.lower[j]):
                x[j] = problem.lower[j]
            elif np.isfinite(problem.upper[j]):
                x[j] = problem.upper[j]
    objective = float(problem.c @ x)
    rc = problem.c.copy()
    return LpSolution("optimal", x, np.zeros(0), rc, objective, objective, 0)


def _evict_artificials(sx: _Simplex, first_art: int) -> None:
    """Pivot basic artificials (at value zero) out of the basis when possible."""
    for pos in range(sx.m):
        col = sx.basis[pos]
        if col < first_art:
            continue
        sx.solve_basis()
        e = np.zeros(sx.m)
        e[pos] = 1.0
        brow = lu_solve(sx.lu, e, trans=1)
        entries = brow @ sx.a[:, :first_art]
        candidates = np.where(
            (np.abs(entries) > 1e-9) & (sx.state[:first_art] != _BASIC)
        )[0]
        if candidates.size == 0:
            continue  # redundant row: artificial stays basic, frozen at zero
        q = int(candidates[0])
        sx.basis[pos] = q
        sx.state[q] = _BASIC
        sx.state[col] = _AT_LOWER


def _check_lp_feasibility(problem: LpProblem, x: np.ndarray, tol: Tolerances):
    act = problem.a_mat @ x
    scale = 1.0 + (np.max(np.abs(problem.rhs)) if problem.rhs.size else 0.0)
    worst = 0.0
    for i, s in enumerate(problem.senses):
        r = act[i] - problem.rhs[i]
        if s == "<=":
            worst = max(worst, r)
        elif s == ">=":
            worst = max(worst, -r)
        else:
            worst = max(worst, abs(r))
    lo = np.max(problem.lower - x) if x.size else 0.0
    hi = np.max(x - problem.upper) if x.size else 0.0
    worst = max(worst, lo, hi)
    if worst > tol.lp_feasibility * scale:
        raise NumericalError(
            f"LP primal residual {worst:.3e} exceeds tolerance "
            f"{tol.lp_feasibility * scale:.3e}"
        )


# ---------------------------------------------------------------------------
# quadratic programming
# ---------------------------------------------------------------------------

@dataclass
class QpProblem:
    """Strictly convex QP
    ``min 0.5 x'Hx + g'x  s.t.  A_eq x = b_eq,  A_in x <= b_in,  lower <= x <= upper``.
    """

    h_mat: np.ndarray
    g: np.ndarray
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    a_in: np.ndarray | None = None
    b_in: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.g = np.atleast_1d(np.asarray(self.g, dtype=float))
        n = self.g.shape[0]
        self.h_mat = np.asarray(self.h_mat, dtype=float).reshape(n, n)
        self.a_eq = _rows_or_empty(self.a_eq, n)
        self.b_eq = _vec_or_empty(self.b_eq, self.a_eq.shape[0])
        self.a_in = _rows_or_empty(self.a_in, n)
        self.b_in = _vec_or_empty(self.b_in, self.a_in.shape[0])
        self.lower = (np.full(n, -np.inf) if self.lower is None
                      else np.asarray(self.lower, dtype=float).reshape(n))
        self.upper = (np.full(n, np.inf) if self.upper is None
                      else np.asarray(self.upper, dtype=float).reshape(n))
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def n_vars(self) -> int:
        return self.g.shape[0]


def _rows_or_empty(a, n):
    if a is None:
        return np.zeros((0, n))
    return np.asarray(a, dtype=float).reshape(-1, n)


def _vec_or_empty(b, m):
    if b is None:
        b = np.zeros(0)
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if b.shape[0] != m:
        raise ValueError("constraint rhs length mismatch")
    return b


@dataclass
class QpSolution:
    status: str                   # 'optimal' | 'infeasible'
    x: np.ndarray | None
    eq_duals: np.ndarray | None
    ineq_duals: np.ndarray | None
    lower_duals: np.ndarray | None
    upper_duals: np.ndarray | None
    objective: float | None
    iterations: int
    infeasibility: float = 0.0

    def kkt_residuals(self, problem: QpProblem) -> dict[str, float]:
        """Stationarity / complementarity / dual-sign residuals at the solution."""
        x = self.x
        grad = problem.h_mat @ x + problem.g
        if problem.a_eq.shape[0]:
            grad = grad + problem.a_eq.T @ self.eq_duals
        if problem.a_in.shape[0]:
            grad = grad + problem.a_in.T @ self.ineq_duals
        grad = grad - self.lower_duals + self.upper_duals
        slack = problem.b_in - problem.a_in @ x if problem.a_in.shape[0] else np.zeros(0)
        comp = np.max(np.abs(self.ineq_duals * slack)) if slack.size else 0.0
        lo_gap = x - problem.lower
        hi_gap = problem.upper - x
        comp_lo = self.lower_duals * np.where(np.isfinite(lo_gap), lo_gap, 0.0)
        comp_hi = self.upper_duals * np.where(np.isfinite(hi_gap), hi_gap, 0.0)
        comp = max(comp,
                   np.max(np.abs(comp_lo)) if comp_lo.size else 0.0,
                   np.max(np.abs(comp_hi)) if comp_hi.size else 0.0)
        neg = 0.0
        if self.ineq_duals is not None and self.ineq_duals.size:
            neg = max(neg, -float(np.min(self.ineq_duals)))
        if self.lower_duals.size:
            neg = max(neg, -float(np.min(self.lower_duals)))
        if self.upper_duals.size:
            neg = max(neg, -float(np.min(self.upper_duals)))
        return {
            "stationarity": float(np.max(np.abs(grad))) if grad.size else 0.0,
            "complementarity": float(comp),
            "dual_negativity": float(neg),
        }


def solve_qp(problem: QpProblem, x0: np.ndarray | None = None,
             tol: Tolerances = DEFAULT, max_iters: int | None = None) -> QpSolution:
    """Primal active-set solve of a strictly convex QP.

    ``x0`` may supply a feasible warm start; otherwise a phase-1 LP finds
    one.  An empty feasible set yields ``status='infeasible'`` with the
    phase-1 infeasibility value recorded.
    """
    n = problem.n_vars
    try:
        np.linalg.cholesky(problem.h_mat)
    except np.linalg.LinAlgError as exc:
        raise IndefiniteMatrixError(
            "quadratic matrix is not positive definite"
        ) from exc

    # fold variable bounds into the inequality rows
    rows = [problem.a_in]
    rhs = [problem.b_in]
    lo_idx = np.where(np.isfinite(problem.lower))[0]
    up_idx = np.where(np.isfinite(problem.upper))[0]
    if lo_idx.size:
        e = np.zeros((lo_idx.size, n))
        e[np.arange(lo_idx.size), lo_idx] = -1.0
        rows.append(e)
        rhs.append(-problem.lower[lo_idx])
    if up_idx.size:
        e = np.zeros((up_idx.size, n))
        e[np.arange(up_idx.size), up_idx] = 1.0
        rows.append(e)
        rhs.append(problem.upper[up_idx])
    c_in = np.vstack(rows)
    d_in = np.concatenate(rhs)
    n_in = problem.a_in.shape[0]

    x, infeas = _qp_start(problem, c_in, d_in, x0, tol)
    if x is None:
        return QpSolution("infeasible", None, None, None, None, None, None, 0,
                          infeasibility=infeas)

    if max_iters is None:
        max_iters = 100 + 50 * (n + c_in.shape[0])

    a_eq = problem.a_eq
    working: list[int] = []
    iterations = 0
    cost_scale = 1.0 + (np.max(np.abs(problem.g)) if problem.g.size else 0.0)
    while iterations < max_iters:
        iterations += 1
        g_rows = np.vstack([a_eq, c_in[working]]) if working else a_eq
        k = g_rows.shape[0]
        kkt = np.zeros((n + k, n + k))
        kkt[:n, :n] = problem.h_mat
        if k:
            kkt[:n, n:] = g_rows.T
            kkt[n:, :n] = g_rows
        rhs_kkt = np.concatenate([-(problem.h_mat @ x + problem.g), np.zeros(k)])
        try:
            sol = np.linalg.solve(kkt, rhs_kkt)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                "singular KKT system (dependent working-set rows?)"
            ) from exc
        p = sol[:n]
        step_size = np.max(np.abs(p)) if p.size else 0.0
        if step_size <= tol.qp_step * (1.0 + np.max(np.abs(x))):
            duals = sol[n:]
            n_eq = a_eq.shape[0]
            mu_w = duals[n_eq:]
            if mu_w.size == 0 or np.min(mu_w) >= -tol.qp_drop * cost_scale:
                return _qp_finish(problem, x, duals[:n_eq], working, mu_w,
                                  n_in, lo_idx, up_idx, iterations, tol)
            drop = int(np.argmin(mu_w))
            working.pop(drop)
            continue
        # step length to the nearest blocking non-working row
        cp = c_in @ p
        slack = d_in - c_in @ x
        alpha = 1.0
        block = -1
        for i in range(c_in.shape[0]):
            if i in working or cp[i] <= tol.lp_ratio:
                continue
            a_i = max(slack[i], 0.0) / cp[i]
            if a_i < alpha - 1e-15:
                alpha, block = a_i, i
        x = x + alpha * p
        if block >= 0:
            working.append(block)
    raise NumericalError(f"active-set QP exceeded {max_iters} iterations")


def _qp_phase1(problem: QpProblem, tol: Tolerances) -> LpSolution:
    n = problem.n_vars
    a = np.vstack([problem.a_eq, problem.a_in])
    senses = ("=",) * problem.a_eq.shape[0] + ("<=",) * problem.a_in.shape[0]
    rhs = np.concatenate([problem.b_eq, problem.b_in])
    lp = LpProblem(np.zeros(n), a, senses, rhs, problem.lower, problem.upper)
    return solve_lp(lp, tol)


def _qp_start(problem, c_in, d_in, x0, tol: Tolerances):
    """Return (feasible start, 0.0) or (None, phase-1 infeasibility value)."""
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float).reshape(problem.n_vars)
        eq_res = (np.max(np.abs(problem.a_eq @ x0 - problem.b_eq))
                  if problem.a_eq.shape[0] else 0.0)
        in_res = (np.max(c_in @ x0 - d_in) if c_in.shape[0] else 0.0)
        if eq_res <= 1e-10 and in_res <= 1e-10:
            return x0, 0.0
    lp = _qp_phase1(problem, tol)
    if lp.status != "optimal":
        return None, lp.infeasibility
    return lp.x.copy(), 0.0


def _qp_finish(problem, x, eq_duals, working, mu_w, n_in, lo_idx, up_idx,
               iterations, tol: Tolerances):
    ineq = np.zeros(n_in)
    lower = np.zeros(problem.n_vars)
    upper = np.zeros(problem.n_vars)
    n_lo = lo_idx.size
    for w, mu in zip(working, mu_w):
        mu = max(float(mu), 0.0)  # clip droppable roundoff negatives
        if w < n_in:
            ineq[w] = mu
        elif w < n_in + n_lo:
            lower[lo_idx[w - n_in]] = mu
        else:
            upper[up_idx[w - n_in - n_lo]] = mu
    objective = float(0.5 * x @ problem.h_mat @ x + problem.g @ x)
    sol = QpSolution("optimal", x, eq_duals, ineq, lower, upper,
                     objective, iterations)
    res = sol.kkt_residuals(problem)
    cost_scale = 1.0 + (np.max(np.abs(problem.g)) if problem.g.size else 0.0)
    if res["stationarity"] > tol.qp_stationarity * cost_scale:
        raise NumericalError(
            f"QP stationarity residual {res['stationarity']:.3e} exceeds tolerance"
        )
    return sol
