"""Absorbable-region computation: which renewable outputs admit a feasible
dispatch at all.

``feasibility_value`` measures the constraint violation of a renewable
output w by the LP ``min 1'z  s.t.  A d - z <= c - B w, z >= 0``; the
output is absorbable iff the value is zero.  Its dual ranges over the
fixed box ``U = {u | A'u = 0, -1 <= u <= 0}``, whose vertices carve the
region out of an initial box one cutting plane at a time: a violated
vertex w yields the maximizer u*, and ``u*'(c - B w) <= 0`` is a valid
inequality for every absorbable w that cuts the violator off.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DegenerateCutError, DimensionError, NumericalError
from .network import ConstraintSystem
from .solvers import LpProblem, solve_lp
from .tolerances import DEFAULT, Tolerances

__all__ = [
    "FeasibilityResult",
    "ViolationResult",
    "DualBox",
    "Halfspace",
    "CutRecord",
    "Region",
    "feasibility_value",
    "max_violation",
    "enumerate_vertices",
    "compute_region",
    "membership",
    "monte_carlo_check",
    "feasibility_threshold",
]


def feasibility_threshold(csys: ConstraintSystem, tol: Tolerances = DEFAULT) -> float:
    """Violation level below which a dispatch problem counts as feasible."""
    scale = 1.0 + (np.max(np.abs(csys.c)) if csys.c.size else 0.0)
    return tol.feasibility * scale


@dataclass(frozen=True)
class FeasibilityResult:
    """Optimal value of the slack LP, its row duals, and the d that attains it."""

    value: float
    dual: np.ndarray
    d: np.ndarray


def feasibility_value(csys: ConstraintSystem, w, tol: Tolerances = DEFAULT) -> FeasibilityResult:
    """Minimal total slack needed to satisfy ``A d + B w <= c``.

    Always-feasible LP: zero value means the dispatch set is nonempty; the
    dual vector lies in the box ``U``.
    """
    w_vec = csys.w_vector(w)
    m, n = csys.n_rows, csys.n_d
    a_lp = np.hstack([csys.a_mat, -np.eye(m)])
    c_lp = np.concatenate([np.zeros(n), np.ones(m)])
    lower = np.concatenate([np.full(n, -np.inf), np.zeros(m)])
    upper = np.full(n + m, np.inf)
    sol = solve_lp(LpProblem(c_lp, a_lp, ("<=",) * m, csys.c - csys.b_mat @ w_vec,
                             lower, upper), tol)
    if sol.status != "optimal":
        raise NumericalError(f"slack LP unexpectedly {sol.status}")
    return FeasibilityResult(max(sol.objective, 0.0), sol.dual, sol.x[:n])


@dataclass(frozen=True)
class DualBox:
    """The dual feasible set ``U = {u | A'u = 0, -1 <= u <= 0}``.

    Contains the origin and is bounded, so violation maximization over it
    is always attained.
    """

    a_mat: np.ndarray

    @classmethod
    def from_constraints(cls, csys: ConstraintSystem) -> "DualBox":
        return cls(csys.a_mat)

    @property
    def n_rows(self) -> int:
        return self.a_mat.shape[0]

    def contains(self, u: np.ndarray, tol: float = 1e-8) -> bool:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n_rows,):
            return False
        if np.any(u < -1 - tol) or np.any(u > tol):
            return False
        resid = self.a_mat.T @ u
        return bool(np.max(np.abs(resid)) <= tol) if resid.size else True


@dataclass(frozen=True)
class ViolationResult:
    r: float
    u_star: np.ndarray


def max_violation(box: DualBox, csys: ConstraintSystem, w,
                  tol: Tolerances = DEFAULT) -> ViolationResult:
    """``max u'(c - B w)`` over the dual box; zero iff w is absorbable.

    Strong duality makes this equal to :func:`feasibility_value`.
    """
    w_vec = csys.w_vector(w)
    m, n = box.a_mat.shape
    obj = csys.c - csys.b_mat @ w_vec
    sol = solve_lp(LpProblem(obj, box.a_mat.T, ("=",) * n, np.zeros(n),
                             np.full(m, -1.0), np.zeros(m), sense="max"), tol)
    if sol.status != "optimal":
        raise NumericalError(f"violation LP unexpectedly {sol.status}")
    return ViolationResult(max(sol.objective, 0.0), sol.x)


# ---------------------------------------------------------------------------
# region geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Halfspace:
    """``normal . w <= offset`` with a unit-length normal."""

    normal: np.ndarray
    offset: float

    def violation(self, w: np.ndarray) -> float:
        return float(self.normal @ w - self.offset)


@dataclass(frozen=True)
class CutRecord:
    iteration: int
    u_max: np.ndarray
    vertex: np.ndarray
    r_max: float


@dataclass(frozen=True)
class Region:
    """Halfspace and vertex description of the absorbable region inside the
    initial box, with the cutting-plane log."""

    dim: int
    halfspaces: tuple[Halfspace, ...]
    vertices: np.ndarray
    cut_log: tuple[CutRecord, ...]
    init_lo: np.ndarray
    init_hi: np.ndarray
    complete: bool


def membership(region: Region, w, tol: Tolerances = DEFAULT) -> bool:
    """Halfspace test: w belongs to the region within ``tol.membership``."""
    w = np.asarray(w, dtype=float)
    if w.shape != (region.dim,):
        raise DimensionError(f"point has shape {w.shape}, region dim {region.dim}")
    return all(h.violation(w) <= tol.membership for h in region.halfspaces)


def enumerate_vertices(halfspaces, dim: int, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Exact vertex set of a bounded intersection of halfspaces, dim <= 3.

    Solves every dim-subset of boundary hyperplanes, keeps feasible
    intersections, and deduplicates; result rows are lexicographically
    sorted.
    """
    if dim > 3:
        raise DimensionError(f"vertex enumeration supports dim <= 3, got {dim}")
    hs = list(halfspaces)
    pts: list[np.ndarray] = []
    for combo in combinations(range(len(hs)), dim):
        a = np.array([hs[i].normal for i in combo])
        b = np.array([hs[i].offset for i in combo])
        try:
            v = np.linalg.solve(a, b)
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.isfinite(v)):
            continue
        if all(h.violation(v) <= tol.vertex_feasibility for h in hs):
            pts.append(v)
    if not pts:
        return np.zeros((0, dim))
    arr = np.array(pts)
    arr = arr[np.lexsort(arr.T[::-1])]
    keep: list[np.ndarray] = []
    for v in arr:
        if not any(np.max(np.abs(v - k)) <= tol.vertex_dedupe for k in keep):
            keep.append(v)
    return np.array(keep)


def _box_halfspaces(w_max: np.ndarray) -> list[Halfspace]:
    dim = w_max.shape[0]
    hs = []
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = -1.0
        hs.append(Halfspace(e, 0.0))
        e = np.zeros(dim)
        e[i] = 1.0
        hs.append(Halfspace(e, float(w_max[i])))
    return hs


def compute_region(csys: ConstraintSystem, w_max, max_cuts: int = 500,
                   tol: Tolerances = DEFAULT) -> Region:
    """Carve the absorbable region out of the box ``[0, w_max]^dim``.

    Each pass tests every current vertex with :func:`max_violation`
    (violation tracker reset per pass); the worst violated vertex donates
    the cutting plane ``u*'(c - B w) <= 0``.  Terminates when all vertices
    pass within the feasibility threshold, or returns a partial region
    flagged ``complete=False`` after ``max_cuts`` cuts.
    """
    dim = csys.n_w
    if dim == 0:
        raise DimensionError("constraint system has no renewable columns")
    if dim > 3:
        raise DimensionError(f"region computation supports dim <= 3, got {dim}")
    w_max = np.asarray(w_max, dtype=float).reshape(dim)
    if np.any(w_max <= 0):
        raise DimensionError("w_max entries must be positive")

    box = DualBox.from_constraints(csys)
    feas_tol = feasibility_threshold(csys, tol)
    halfspaces = _box_halfspaces(w_max)
    cut_log: list[CutRecord] = []
    complete = False
    vertices = np.zeros((0, dim))
    for _ in range(max_cuts + 1):
        vertices = enumerate_vertices(halfspaces, dim, tol)
        if vertices.shape[0] == 0:
            # every candidate vertex was cut away: nothing in the box is feasible
            complete = True
            break
        r_max = 0.0
        u_max = None
        v_max = None
        for v in vertices:                       # reset per pass; first max wins
            res = max_violation(box, csys, v, tol)
            if res.r > r_max:
                r_max, u_max, v_max = res.r, res.u_star, v
        if r_max <= feas_tol:
            complete = True
            break
        if len(cut_log) >= max_cuts:
            break
        normal_raw = -(csys.b_mat.T @ u_max)
        offset_raw = -float(csys.c @ u_max)
        norm = float(np.linalg.norm(normal_raw))
        if norm <= 1e-12 * (1.0 + abs(offset_raw)):
            raise DegenerateCutError(
                "cutting plane has a numerically zero normal; no output in "
                "the box is feasible")
        cut = Halfspace(normal_raw / norm, offset_raw / norm)
        for h in halfspaces:
            if (np.max(np.abs(cut.normal - h.normal)) <= tol.cut_duplicate
                    and abs(cut.offset - h.offset) <= tol.cut_duplicate):
                raise DegenerateCutError(
                    "new cutting plane duplicates an existing halfspace; "
                    "check tolerance configuration")
        if cut.violation(v_max) <= 0:
            raise DegenerateCutError(
                "cutting plane fails to remove its violating vertex; "
                "check tolerance configuration")
        halfspaces.append(cut)
        cut_log.append(CutRecord(len(cut_log), u_max, v_max, r_max))
    return Region(dim, tuple(halfspaces), vertices, tuple(cut_log),
                  np.zeros(dim), w_max, complete)


@dataclass(frozen=True)
class McReport:
    n_samples: int
    n_excluded: int
    agreements: int
    mismatches: tuple[dict, ...]


def monte_carlo_check(csys: ConstraintSystem, region: Region, n: int, seed: int,
                      jobs: int = 0, tol: Tolerances = DEFAULT) -> McReport:
    """Compare region membership against the feasibility LP on ``n`` uniform
    samples of the initial box.

    Points within ``tol.boundary_band`` of any facet are excluded (LP
    round-off dominates there).  Sample k draws from a child seed of
    ``seed``, so reports are reproducible and independent of ``jobs``.
    """
    feas_tol = feasibility_threshold(csys, tol)
    children = np.random.SeedSequence(seed).spawn(n)
    span = region.init_hi - region.init_lo

    def classify(k: int):
        rng = np.random.default_rng(children[k])
        w = region.init_lo + rng.random(region.dim) * span
        dist = min(abs(h.violation(w)) for h in region.halfspaces)
        if dist <= tol.boundary_band:
            return ("excluded", k, w)
        member = membership(region, w, tol)
        feasible = feasibility_value(csys, w, tol).value <= feas_tol
        if member != feasible:
            return ("mismatch", k, w, member, feasible)
        return ("agree", k, w)

    if jobs and jobs > 0:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(classify, range(n)))
    else:
        results = [classify(k) for k in range(n)]

    excluded = sum(1 for r in results if r[0] == "excluded")
    agreements = sum(1 for r in results if r[0] == "agree")
    mismatches = tuple(
        {"sample": r[1], "w": r[2], "member": r[3], "feasible": r[4]}
        for r in results if r[0] == "mismatch"
    )
    return McReport(n, excluded, agreements, mismatches)
