"""Domain types, validation, and case-file ingestion.

A *case* bundles the grid topology, the user population (consumers and
prosumers with quadratic disutilities and elastic-demand boxes), a
renewable-output scenario, and the sharing-market parameters.  All types
are immutable after construction and validate their invariants eagerly.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .errors import CaseFormatError, DisconnectedGridError, InvariantError

__all__ = [
    "LineSpec",
    "GridSpec",
    "UserSpec",
    "Scenario",
    "MarketParams",
    "Case",
    "load_case",
    "dump_case",
    "write_case",
    "aggregate_net_fixed",
]

CONSUMER = "consumer"
PROSUMER = "prosumer"


@dataclass(frozen=True)
class LineSpec:
    """A network line with DC susceptance and a symmetric flow limit (kW)."""

    from_bus: int
    to_bus: int
    susceptance: float
    flow_limit: float

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise InvariantError(
                f"line {self.from_bus}-{self.to_bus}: from_bus equals to_bus")
        if not self.susceptance > 0:
            raise InvariantError(
                f"line {self.from_bus}-{self.to_bus}: susceptance must be > 0")
        if not self.flow_limit > 0:
            raise InvariantError(
                f"line {self.from_bus}-{self.to_bus}: flow_limit must be > 0")


@dataclass(frozen=True)
class GridSpec:
    """Bus set, line list and the slack bus used as the flow-factor reference."""

    buses: tuple[int, ...]
    lines: tuple[LineSpec, ...]
    slack_bus: int

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "lines", tuple(self.lines))
        if len(set(self.buses)) != len(self.buses):
            raise InvariantError("grid.buses: bus ids must be unique")
        if self.slack_bus not in self.buses:
            raise InvariantError(
                f"grid.slack_bus: {self.slack_bus} is not a listed bus")
        bus_set = set(self.buses)
        for ln in self.lines:
            if ln.from_bus not in bus_set or ln.to_bus not in bus_set:
                raise InvariantError(
                    f"line {ln.from_bus}-{ln.to_bus}: endpoint not a listed bus")
        if not _connected(self.buses, self.lines):
            raise DisconnectedGridError(
                "grid.lines: the line graph does not connect all buses")


def _connected(buses, lines) -> bool:
    if len(buses) <= 1:
        return True
    adj: dict[int, list[int]] = {b: [] for b in buses}
    for ln in lines:
        adj[ln.from_bus].append(ln.to_bus)
        adj[ln.to_bus].append(ln.from_bus)
    seen = {buses[0]}
    queue = deque([buses[0]])
    while queue:
        b = queue.popleft()
        for nb in adj[b]:
            if nb not in seen:
                seen.add(nb)
                queue.append(nb)
    return len(seen) == len(buses)


@dataclass(frozen=True)
class UserSpec:
    """A consumer or prosumer with disutility ``alpha1*d^2 + alpha2*d`` and
    elastic demand restricted to ``[elastic_lo, elastic_hi]`` (kW)."""

    id: int
    bus: int
    kind: str
    fixed_demand: float
    elastic_lo: float
    elastic_hi: float
    alpha1: float
    alpha2: float

    def __post_init__(self):
        if self.kind not in (CONSUMER, PROSUMER):
            raise InvariantError(f"user {self.id}: kind must be "
                                 f"'{CONSUMER}' or '{PROSUMER}'")
        if not self.alpha1 > 0:
            raise InvariantError(f"user {self.id}: alpha1 must be > 0")
        if self.elastic_lo > self.elastic_hi:
            raise InvariantError(
                f"user {self.id}: elastic_lo exceeds elastic_hi")
        if self.fixed_demand < 0:
            raise InvariantError(f"user {self.id}: fixed_demand must be >= 0")

    @property
    def is_prosumer(self) -> bool:
        return self.kind == PROSUMER

    def disutility(self, d: float) -> float:
        return self.alpha1 * d * d + self.alpha2 * d


@dataclass(frozen=True)
class Scenario:
    """Renewable output per prosumer id (kW, nonnegative)."""

    w: Mapping[int, float]

    def __post_init__(self):
        object.__setattr__(self, "w", dict(self.w))
        for pid, val in self.w.items():
            if val < 0:
                raise InvariantError(f"scenario[{pid}]: output must be >= 0")


@dataclass(frozen=True)
class MarketParams:
    """Sharing-market sensitivity (kW/$), bid convergence tolerance (kW),
    and the iteration cap of the bidding loop."""

    a: float
    eps: float
    max_iters: int

    def __post_init__(self):
        if not self.a > 0:
            raise InvariantError("market.a: sensitivity must be > 0")
        if not self.eps > 0:
            raise InvariantError("market.eps: tolerance must be > 0")
        if self.max_iters < 1:
            raise InvariantError("market.max_iters: must be a positive integer")


@dataclass(frozen=True)
class Case:
    """A fully validated grid + users + scenario + market bundle."""

    grid: GridSpec
    users: tuple[UserSpec, ...]
    scenario: Scenario
    market: MarketParams

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        ids = [u.id for u in self.users]
        if len(set(ids)) != len(ids):
            raise InvariantError("users: ids must be unique")
        bus_set = set(self.grid.buses)
        for u in self.users:
            if u.bus not in bus_set:
                raise InvariantError(f"user {u.id}: bus {u.bus} not in grid")
        prosumers = {u.id for u in self.users if u.is_prosumer}
        extra = set(self.scenario.w) - prosumers
        if extra:
            raise InvariantError(
                f"scenario: keys {sorted(extra)} are not prosumer ids")
        missing = prosumers - set(self.scenario.w)
        if missing:
            raise InvariantError(
                f"scenario: missing entries for prosumers {sorted(missing)}")

    @property
    def prosumers(self) -> tuple[UserSpec, ...]:
        return tuple(u for u in self.users if u.is_prosumer)


def aggregate_net_fixed(user: UserSpec, scenario: Scenario) -> float:
    """Net fixed demand of a user: ``fixed_demand`` for consumers,
    ``fixed_demand - w`` for prosumers (kW).

    The user's net demand is then ``d + aggregate_net_fixed(user, scenario)``.
    """
    if not user.is_prosumer:
        return user.fixed_demand
    if user.id not in scenario.w:
        raise InvariantError(f"scenario: no output entry for prosumer {user.id}")
    return user.fixed_demand - scenario.w[user.id]


# ---------------------------------------------------------------------------
# JSON case files
# ---------------------------------------------------------------------------

def load_case(path) -> Case:
    """Parse and validate a JSON case file; see the package README for the
    schema.  Raises :class:`CaseFormatError` on parse/shape problems and
    :class:`InvariantError` on domain-invariant violations."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseFormatError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: "
            f"{exc.msg}") from exc
    if not isinstance(raw, dict):
        raise CaseFormatError(f"{path}: top level must be a JSON object")

    grid_raw = _require(raw, "grid", dict)
    lines = tuple(
        LineSpec(_require(ln, "from", int, f"grid.lines[{i}]"),
                 _require(ln, "to", int, f"grid.lines[{i}]"),
                 _number(ln, "susceptance", f"grid.lines[{i}]"),
                 _number(ln, "flow_limit", f"grid.lines[{i}]"))
        for i, ln in enumerate(_require(grid_raw, "lines", list, "grid"))
    )
    grid = GridSpec(tuple(_require(grid_raw, "buses", list, "grid")),
                    lines,
                    _require(grid_raw, "slack_bus", int, "grid"))

    users = []
    for i, u in enumerate(_require(raw, "users", list)):
        ctx = f"users[{i}]"
        users.append(UserSpec(
            _require(u, "id", int, ctx),
            _require(u, "bus", int, ctx),
            _require(u, "kind", str, ctx),
            _number(u, "fixed_demand", ctx),
            _number(u, "elastic_lo", ctx),
            _number(u, "elastic_hi", ctx),
            _number(u, "alpha1", ctx),
            _number(u, "alpha2", ctx),
        ))

    scen_raw = _require(raw, "scenario", dict)
    scenario = {}
    for key, val in scen_raw.items():
        try:
            pid = int(key)
        except ValueError:
            raise CaseFormatError(
                f"scenario: key {key!r} is not an integer prosumer id") from None
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise CaseFormatError(f"scenario[{key}]: value must be a number")
        scenario[pid] = float(val)

    market_raw = _require(raw, "market", dict)
    market = MarketParams(_number(market_raw, "a", "market"),
                          _number(market_raw, "eps", "market"),
                          _require(market_raw, "max_iters", int, "market"))

    return Case(grid, tuple(users), Scenario(scenario), market)


def dump_case(case: Case) -> dict:
    """Inverse of :func:`load_case`: a JSON-serializable dict that round-trips."""
    return {
        "grid": {
            "buses": list(case.grid.buses),
            "slack_bus": case.grid.slack_bus,
            "lines": [
                {"from": ln.from_bus, "to": ln.to_bus,
                 "susceptance": ln.susceptance, "flow_limit": ln.flow_limit}
                for ln in case.grid.lines
            ],
        },
        "users": [
            {"id": u.id, "bus": u.bus, "kind": u.kind,
             "fixed_demand": u.fixed_demand,
             "elastic_lo": u.elastic_lo, "elastic_hi": u.elastic_hi,
             "alpha1": u.alpha1, "alpha2": u.alpha2}
            for u in case.users
        ],
        "scenario": {str(pid): w for pid, w in case.scenario.w.items()},
        "market": {"a": case.market.a, "eps": case.market.eps,
                   "max_iters": case.market.max_iters},
    }


def write_case(case: Case, path) -> None:
    Path(path).write_text(json.dumps(dump_case(case), indent=1, sort_keys=True),
                          encoding="utf-8")


def _require(obj, key, typ, ctx=""):
    where = f"{ctx}.{key}" if ctx else key
    if not isinstance(obj, dict) or key not in obj:
        raise CaseFormatError(f"missing field {where}")
    val = obj[key]
    if typ is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise CaseFormatError(f"{where}: expected an integer")
    elif not isinstance(val, typ):
        raise CaseFormatError(f"{where}: expected {typ.__name__}")
    return val


def _number(obj, key, ctx=""):
    where = f"{ctx}.{key}" if ctx else key
    if not isinstance(obj, dict) or key not in obj:
        raise CaseFormatError(f"missing field {where}")
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise CaseFormatError(f"{where}: expected a number")
    return float(val)
