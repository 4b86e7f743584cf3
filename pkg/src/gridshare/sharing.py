"""The energy-sharing market: bids, price clearing, and the equilibrium loop.

Users repeatedly best-respond to the operator's prices; the operator
clears the market by minimizing the sum of squared prices (equivalent to
price variance at fixed total bids) plus a proximal term that damps price
fluctuation between rounds.  The loop stops when the bid vector moves
less than ``eps`` in the max norm.  Divergence is a reported outcome,
never an exception: small sensitivities oscillate by design.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .centralized import DispatchSolution
from .errors import InfeasibleError
from .model import GridSpec, MarketParams, Scenario, UserSpec, aggregate_net_fixed
from .network import CouplingSystem, assemble_coupling
from .solvers import QpProblem, solve_qp
from .tolerances import DEFAULT, Tolerances

__all__ = [
    "Bid",
    "PriceVector",
    "IterationRecord",
    "BidTrace",
    "EquilibriumResult",
    "C1Report",
    "GneReport",
    "best_response",
    "clear_market",
    "run_sharing",
    "check_c1",
    "verify_gne",
]


@dataclass(frozen=True)
class Bid:
    """A user's scalar bid; the transacted quantity is ``q = -a*lam + b``."""

    user_id: int
    b: float


@dataclass(frozen=True)
class PriceVector:
    """Per-user prices returned by one market clearing."""

    lam: np.ndarray

    def quantities(self, bids: np.ndarray, a: float) -> np.ndarray:
        return bids - a * self.lam


@dataclass(frozen=True)
class IterationRecord:
    n: int
    b: np.ndarray
    lam: np.ndarray
    d: np.ndarray
    residual: float


@dataclass
class BidTrace:
    records: list[IterationRecord] = field(default_factory=list)

    def append(self, rec: IterationRecord) -> None:
        self.records.append(rec)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


@dataclass(frozen=True)
class EquilibriumResult:
    """Converged (or last) state of the bidding loop, with the full trace."""

    d: np.ndarray
    b: np.ndarray
    lam: np.ndarray
    q: np.ndarray
    converged: bool
    iterations: int
    trace: BidTrace


def best_response(user: UserSpec, lam_k: float, scenario: Scenario,
                  a: float) -> tuple[float, float]:
    """A user's optimal demand and bid at a given price.

    The demand minimizes ``f(d) + lam*d`` over the elastic box (closed
    form for quadratic disutility); the bid then restores the user's net
    demand: ``b = d + D + a*lam`` with D the net fixed demand.
    """
    d = float(np.clip(-(user.alpha2 + lam_k) / (2.0 * user.alpha1),
                      user.elastic_lo, user.elastic_hi))
    big_d = aggregate_net_fixed(user, scenario)
    return d, d + big_d + a * lam_k


def clear_market(bids, coupling: CouplingSystem, a: float,
                 lambda_prev: np.ndarray | None = None,
                 tol: Tolerances = DEFAULT) -> PriceVector:
    """Operator's price update given all bids.

    Minimizes ``sum(lam^2)`` plus, when ``lambda_prev`` is given, the
    proximal term ``sum((lam - lambda_prev)^2)``, subject to the cleared
    quantities ``q = b - a*lam`` balancing to zero and respecting line
    limits.  Without binding network rows and without the proximal term
    the optimum is the uniform price ``sum(b) / (a N)``.
    """
    b = _bid_vector(bids, coupling.n_users)
    n = coupling.n_users
    if lambda_prev is None:
        h = 2.0 * np.eye(n)
        g = np.zeros(n)
        x0 = None
    else:
        lambda_prev = np.asarray(lambda_prev, dtype=float).reshape(n)
        h = 4.0 * np.eye(n)
        g = -2.0 * lambda_prev
        x0 = lambda_prev + (b.sum() / a - lambda_prev.sum()) / n

    a_eq = np.full((1, n), a)
    b_eq = np.array([float(b.sum())])
    if coupling.pi.shape[0]:
        pi_b = coupling.pi @ b
        a_in = np.vstack([a * coupling.pi, -a * coupling.pi])
        b_in = np.concatenate([coupling.limits + pi_b, coupling.limits - pi_b])
    else:
        a_in, b_in = None, None
    sol = solve_qp(QpProblem(h, g, a_eq=a_eq, b_eq=b_eq, a_in=a_in, b_in=b_in),
                   x0=x0, tol=tol)
    if sol.status != "optimal":
        raise InfeasibleError(
            "market clearing has no feasible price vector for these bids")
    lam = sol.x
    q = b - a * lam
    if abs(float(q.sum())) > tol.balance * (1.0 + float(np.abs(q).sum())):
        raise InfeasibleError("cleared quantities do not balance")
    return PriceVector(lam)


def _bid_vector(bids, n: int) -> np.ndarray:
    if isinstance(bids, np.ndarray):
        return bids.astype(float).reshape(n)
    seq = list(bids)
    if seq and isinstance(seq[0], Bid):
        return np.array([bid.b for bid in seq], dtype=float).reshape(n)
    return np.asarray(seq, dtype=float).reshape(n)


def run_sharing(grid: GridSpec, users: tuple[UserSpec, ...], scenario: Scenario,
                params: MarketParams, tol: Tolerances = DEFAULT) -> EquilibriumResult:
    """Run the bidding loop from all-zero bids and prices.

    Each round the operator clears prices (with the proximal term against
    the previous round's prices), then every user best-responds at once.
    Stops at ``max_norm(b_new - b) <= eps`` or after ``max_iters`` rounds
    with ``converged=False``.
    """
    users = tuple(users)
    n = len(users)
    a = params.a
    coupling = assemble_coupling(grid, users, tol)
    alpha1 = np.array([u.alpha1 for u in users])
    alpha2 = np.array([u.alpha2 for u in users])
    lo = np.array([u.elastic_lo for u in users])
    hi = np.array([u.elastic_hi for u in users])
    big_d = np.array([aggregate_net_fixed(u, scenario) for u in users])

    b = np.zeros(n)
    lam = np.zeros(n)
    d = np.zeros(n)
    trace = BidTrace()
    converged = False
    iterations = 0
    for it in range(1, params.max_iters + 1):
        iterations = it
        lam = clear_market(b, coupling, a, lambda_prev=lam, tol=tol).lam
        d = np.clip(-(alpha2 + lam) / (2.0 * alpha1), lo, hi)
        b_new = d + big_d + a * lam
        residual = float(np.max(np.abs(b_new - b))) if n else 0.0
        trace.append(IterationRecord(it, b_new.copy(), lam.copy(), d.copy(), residual))
        b = b_new
        if residual <= params.eps:
            converged = True
            break
    return EquilibriumResult(d, b, lam, b - a * lam, converged, iterations, trace)


@dataclass(frozen=True)
class C1Report:
    """Sufficient-condition check for convergence of the bidding loop:
    holds iff ``1/a < min_k 2*alpha1_k`` (margin is the difference)."""

    holds: bool
    margin: float


def check_c1(users, a: float) -> C1Report:
    min_curvature = min(2.0 * u.alpha1 for u in users)
    margin = min_curvature - 1.0 / a
    return C1Report(margin > 0, margin)


@dataclass(frozen=True)
class GneReport:
    passed: bool
    failures: tuple[str, ...]
    metrics: dict[str, float]


def verify_gne(eq: EquilibriumResult, ref: DispatchSolution, grid: GridSpec,
               users: tuple[UserSpec, ...], scenario: Scenario, a: float,
               tol_d: float = 1e-5, tol_lam: float | None = None,
               vi_samples: int = 40, seed: int = 0,
               tol: Tolerances = DEFAULT) -> GneReport:
    """Check that a bidding equilibrium is the centralized optimum.

    Verifies (i) demands match, (ii) prices match the dispatch duals,
    (iii) every bid equals net demand plus ``a`` times the price, and
    (iv) the two stationarity inequalities behind the equilibrium: user
    objectives cannot improve inside their boxes, and the cleared net
    demands support the prices over the coupling set (checked on sampled
    deviations).
    """
    if tol_lam is None:
        tol_lam = tol_d
    users = tuple(users)
    failures: list[str] = []
    metrics: dict[str, float] = {}

    d_err = float(np.max(np.abs(eq.d - ref.d)))
    metrics["d_max_err"] = d_err
    if d_err > tol_d:
        failures.append(f"demand mismatch {d_err:.3e} > {tol_d:.1e}")

    lam_err = float(np.max(np.abs(eq.lam - ref.lam)))
    metrics["lam_max_err"] = lam_err
    if lam_err > tol_lam:
        failures.append(f"price mismatch {lam_err:.3e} > {tol_lam:.1e}")

    big_d = np.array([aggregate_net_fixed(u, scenario) for u in users])
    bid_err = float(np.max(np.abs(eq.b - (eq.d + big_d + a * eq.lam))))
    metrics["bid_identity_err"] = bid_err
    if bid_err > 1e-9:
        failures.append(f"bid identity violated by {bid_err:.3e}")

    rng = np.random.default_rng(seed)
    vi_user = 0.0
    for k, u in enumerate(users):
        span = u.elastic_hi - u.elastic_lo
        devs = u.elastic_lo + span * rng.random(8)
        devs = np.append(devs, (u.elastic_lo, u.elastic_hi))
        for dd in devs:
            gap = (u.disutility(dd) - u.disutility(eq.d[k])
                   + (dd - eq.d[k]) * eq.lam[k])
            vi_user = min(vi_user, gap)
    metrics["user_vi_min"] = vi_user
    if vi_user < -tol_d:
        failures.append(f"a user could improve by {-vi_user:.3e}")

    coupling = assemble_coupling(grid, users, tol)
    vi_oper = 0.0
    for _ in range(vi_samples):
        zeta = rng.standard_normal(len(users))
        zeta -= zeta.mean()
        norm = np.linalg.norm(zeta)
        if norm < 1e-12:
            continue
        zeta /= norm
        step = _max_step_in_coupling(coupling, eq.q, zeta)
        if step <= 0:
            continue
        p = eq.q + min(step, 1.0) * rng.random() * zeta
        gap = float((p - eq.q) @ (eq.q - eq.b))
        vi_oper = min(vi_oper, gap)
    metrics["operator_vi_min"] = vi_oper
    if vi_oper < -tol_d:
        failures.append(f"the clearing could improve by {-vi_oper:.3e}")

    return GneReport(not failures, tuple(failures), metrics)


def _max_step_in_coupling(coupling: CouplingSystem, q: np.ndarray,
                          zeta: np.ndarray) -> float:
    """Largest t with q + t*zeta still inside the flow limits (zeta balanced)."""
    if coupling.pi.shape[0] == 0:
        return 1.0
    flow_q = coupling.flows(q)
    flow_z = coupling.flows(zeta)
    # componentwise: -F <= flow_q + t*flow_z <= F
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.where(flow_z > 1e-12, (coupling.limits - flow_q) / flow_z, np.inf)
        dn = np.where(flow_z < -1e-12, (-coupling.limits - flow_q) / flow_z, np.inf)
    t = float(min(np.min(up), np.min(dn), 1.0))
    return max(t, 0.0)
