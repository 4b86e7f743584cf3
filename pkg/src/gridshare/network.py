"""DC power-flow distribution factors and polyhedral constraint assembly.

The dispatch feasible set (power balance, per-user elastic boxes, line
flow limits) is assembled into the compact form ``{d | A d + B w <= c}``
with the balance equality encoded as a pair of opposing inequality rows,
so every row is one-sided.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvariantError, SingularMatrixError
from .model import GridSpec, Scenario, UserSpec
from .solvers import solve_linear_system
from .tolerances import DEFAULT, Tolerances

__all__ = [
    "Ptdf",
    "ConstraintSystem",
    "CouplingSystem",
    "compute_ptdf",
    "assemble_constraints",
    "assemble_coupling",
]


@dataclass(frozen=True)
class Ptdf:
    """Line-flow distribution factors: ``flow = matrix @ injections`` for any
    balanced bus-injection vector.  The slack-bus column is identically zero.
    """

    matrix: np.ndarray          # |lines| x |buses|
    buses: tuple[int, ...]
    slack_bus: int

    def __post_init__(self):
        self.matrix.setflags(write=False)

    @property
    def bus_index(self) -> dict[int, int]:
        return {b: i for i, b in enumerate(self.buses)}

    def flows(self, injections: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(injections, dtype=float)


def compute_ptdf(grid: GridSpec, tol: Tolerances = DEFAULT) -> Ptdf:
    """Distribution factors of ``grid`` relative to its slack bus.

    Builds the susceptance Laplacian, inverts its slack-reduced block, and
    forms ``ptdf[l, n] = b_l * (X[from_l, n] - X[to_l, n])``.
    """
    buses = grid.buses
    nb = len(buses)
    idx = {b: i for i, b in enumerate(buses)}
    lap = np.zeros((nb, nb))
    for ln in grid.lines:
        i, j = idx[ln.from_bus], idx[ln.to_bus]
        lap[i, i] += ln.susceptance
        lap[j, j] += ln.susceptance
        lap[i, j] -= ln.susceptance
        lap[j, i] -= ln.susceptance
    s = idx[grid.slack_bus]
    keep = [i for i in range(nb) if i != s]
    red = lap[np.ix_(keep, keep)]
    try:
        x_red = solve_linear_system(red, np.eye(len(keep)), tol) if keep else np.zeros((0, 0))
    except SingularMatrixError as exc:
        raise SingularMatrixError(
            "reduced susceptance matrix is singular (grid disconnected or "
            "degenerate susceptances)") from exc
    x_full = np.zeros((nb, nb))
    x_full[np.ix_(keep, keep)] = x_red
    matrix = np.zeros((len(grid.lines), nb))
    for l, ln in enumerate(grid.lines):
        i, j = idx[ln.from_bus], idx[ln.to_bus]
        matrix[l] = ln.susceptance * (x_full[i] - x_full[j])
    return Ptdf(matrix, buses, grid.slack_bus)


def _user_factors(ptdf: Ptdf, users: tuple[UserSpec, ...]) -> np.ndarray:
    """Per-user distribution factors: column k is the ptdf column of the bus
    housing user k (a prosumer's output and demand act at the same bus)."""
    idx = ptdf.bus_index
    try:
        cols = [idx[u.bus] for u in users]
    except KeyError as exc:
        raise InvariantError(f"user bus {exc.args[0]} not present in grid") from exc
    return ptdf.matrix[:, cols] if len(users) else ptdf.matrix[:, :0]


@dataclass(frozen=True)
class ConstraintSystem:
    """All dispatch constraints in the compact form ``A d + B w <= c``.

    Row order: balance+, balance-, then per user box-lo / box-hi, then per
    line flow+ / flow-, so ``m = 2 + 2*n_users + 2*n_lines``.
    """

    a_mat: np.ndarray            # m x n_d
    b_mat: np.ndarray            # m x n_w
    c: np.ndarray                # m
    row_labels: tuple[str, ...]
    d_index: dict[int, int]      # user id -> d column
    w_index: dict[int, int]      # prosumer id -> w column

    def __post_init__(self):
        for arr in (self.a_mat, self.b_mat, self.c):
            arr.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return self.a_mat.shape[0]

    @property
    def n_d(self) -> int:
        return self.a_mat.shape[1]

    @property
    def n_w(self) -> int:
        return self.b_mat.shape[1]

    def w_vector(self, scenario) -> np.ndarray:
        """Order a scenario (mapping or :class:`Scenario`) into the w columns."""
        if isinstance(scenario, Scenario):
            scenario = scenario.w
        if isinstance(scenario, np.ndarray) or isinstance(scenario, (list, tuple)):
            w = np.asarray(scenario, dtype=float)
            if w.shape != (self.n_w,):
                raise InvariantError(
                    f"scenario vector has shape {w.shape}, expected ({self.n_w},)")
            return w
        w = np.zeros(self.n_w)
        for pid, col in self.w_index.items():
            if pid not in scenario:
                raise InvariantError(f"scenario: missing entry for prosumer {pid}")
            w[col] = scenario[pid]
        return w

    def rhs(self, scenario) -> np.ndarray:
        """``c - B w`` for the given scenario."""
        return self.c - self.b_mat @ self.w_vector(scenario)

    def rows_labelled(self, prefix: str) -> np.ndarray:
        return np.array([lbl.startswith(prefix) for lbl in self.row_labels])


def assemble_constraints(grid: GridSpec, users: tuple[UserSpec, ...],
                         tol: Tolerances = DEFAULT) -> ConstraintSystem:
    """Assemble balance, box and flow-limit rows for ``users`` on ``grid``.

    Fixed demands are folded into ``c`` (and the prosumer outputs into
    ``B``), so membership of ``(d, w)`` in the system is exactly dispatch
    feasibility.
    """
    users = tuple(users)
    n = len(users)
    prosumer_cols = [k for k, u in enumerate(users) if u.is_prosumer]
    nw = len(prosumer_cols)
    ptdf = compute_ptdf(grid, tol)
    pi_user = _user_factors(ptdf, users)          # L x n
    pi_pros = pi_user[:, prosumer_cols] if nw else pi_user[:, :0]
    df = np.array([u.fixed_demand for u in users])

    n_lines = len(grid.lines)
    m = 2 + 2 * n + 2 * n_lines
    a = np.zeros((m, n))
    b = np.zeros((m, nw))
    c = np.zeros(m)
    labels: list[str] = []

    # power balance as two opposing rows
    a[0, :] = 1.0
    b[0, :] = -1.0
    c[0] = -df.sum()
    labels.append("balance+")
    a[1, :] = -1.0
    b[1, :] = 1.0
    c[1] = df.sum()
    labels.append("balance-")

    row = 2
    for k, u in enumerate(users):
        a[row, k] = -1.0
        c[row] = -u.elastic_lo
        labels.append(f"box-lo:{u.id}")
        a[row + 1, k] = 1.0
        c[row + 1] = u.elastic_hi
        labels.append(f"box-hi:{u.id}")
        row += 2

    for l, ln in enumerate(grid.lines):
        shift = float(pi_user[l] @ df)
        a[row, :] = -pi_user[l]
        b[row, :] = pi_pros[l]
        c[row] = ln.flow_limit + shift
        labels.append(f"flow+:{l}:{ln.from_bus}-{ln.to_bus}")
        a[row + 1, :] = pi_user[l]
        b[row + 1, :] = -pi_pros[l]
        c[row + 1] = ln.flow_limit - shift
        labels.append(f"flow-:{l}:{ln.from_bus}-{ln.to_bus}")
        row += 2

    d_index = {u.id: k for k, u in enumerate(users)}
    w_index = {users[k].id: j for j, k in enumerate(prosumer_cols)}
    return ConstraintSystem(a, b, c, tuple(labels), d_index, w_index)


@dataclass(frozen=True)
class CouplingSystem:
    """The coupling constraints seen by the market operator, expressed on the
    per-user net-demand vector q: ``sum(q) = 0`` and ``-F <= -Pi q <= F``.

    Only network data enters here; user boxes and fixed demands stay private.
    """

    pi: np.ndarray               # |lines| x n_users
    limits: np.ndarray           # |lines|
    n_users: int

    def __post_init__(self):
        self.pi.setflags(write=False)
        self.limits.setflags(write=False)

    def flows(self, q: np.ndarray) -> np.ndarray:
        """Line flows carried by net demands q (generation positive at the
        producing bus's users)."""
        return -self.pi @ np.asarray(q, dtype=float)

    def feasible(self, q: np.ndarray, tol: float = 1e-9) -> bool:
        if abs(float(np.sum(q))) > tol:
            return False
        f = self.flows(q)
        return bool(np.all(np.abs(f) <= self.limits + tol))


def assemble_coupling(grid: GridSpec, users: tuple[UserSpec, ...],
                      tol: Tolerances = DEFAULT) -> CouplingSystem:
    ptdf = compute_ptdf(grid, tol)
    pi_user = _user_factors(ptdf, tuple(users))
    limits = np.array([ln.flow_limit for ln in grid.lines])
    return CouplingSystem(pi_user, limits, len(users))
