"""Ready-made study cases and a randomized feasible-case generator.

``two_group_case`` is the two-bus benchmark with 100 identical prosumers
per group; identical users are represented individually so equilibrium
symmetry is observable rather than assumed.  ``random_feasible_case``
builds cases that are feasible by construction: it plants an interior
demand point, balances the renewable outputs against it, and sets line
limits at a random margin above the planted point's flows.
"""

from __future__ import annotations

import numpy as np

from .model import Case, GridSpec, LineSpec, MarketParams, Scenario, UserSpec
from .network import compute_ptdf

__all__ = [
    "two_group_case",
    "two_user_case",
    "uncongested_sweep_case",
    "random_feasible_case",
]


def two_group_case(a: float = 1.0, eps: float = 1e-8, max_iters: int = 5000,
                   flow_limit: float = 10.0) -> Case:
    """Two prosumer groups (100 users each) joined by a single line.

    Group 1 at bus 1: alpha = (0.30, 0.42), w = 1.25, fixed 1.00, box [0.2, 0.5].
    Group 2 at bus 2: alpha = (0.60, 0.72), w = 1.75, fixed 1.30, box [0.1, 0.6].
    """
    grid = GridSpec((1, 2), (LineSpec(1, 2, 1.0, flow_limit),), 1)
    users = []
    scenario = {}
    for i in range(100):
        uid = i + 1
        users.append(UserSpec(uid, 1, "prosumer", 1.00, 0.2, 0.5, 0.30, 0.42))
        scenario[uid] = 1.25
    for i in range(100):
        uid = i + 101
        users.append(UserSpec(uid, 2, "prosumer", 1.30, 0.1, 0.6, 0.60, 0.72))
        scenario[uid] = 1.75
    return Case(grid, tuple(users), Scenario(scenario),
                MarketParams(a, eps, max_iters))


def two_user_case(flow_limit: float = 0.1, a: float = 2.0, eps: float = 1e-10,
                  max_iters: int = 5000, w1: float = 1.25, w2: float = 1.75) -> Case:
    """Per-user aggregate of the two-group benchmark: one prosumer per group,
    line limit scaled accordingly (10 kW / 100 users)."""
    grid = GridSpec((1, 2), (LineSpec(1, 2, 1.0, flow_limit),), 1)
    users = (
        UserSpec(1, 1, "prosumer", 1.00, 0.2, 0.5, 0.30, 0.42),
        UserSpec(2, 2, "prosumer", 1.30, 0.1, 0.6, 0.60, 0.72),
    )
    return Case(grid, users, Scenario({1: w1, 2: w2}),
                MarketParams(a, eps, max_iters))


def uncongested_sweep_case(a: float = 2.0, eps: float = 1e-10,
                           max_iters: int = 5000) -> Case:
    """Single-bus case for misreport sweeps whose equilibrium price is
    positive, so the target user's best response stays clamped at its lower
    box edge for any positive reporting scale."""
    grid = GridSpec((1,), (), 1)
    users = (
        UserSpec(1, 1, "consumer", 0.5, 0.3, 0.8, 0.5, 0.1),   # sweep target
        UserSpec(2, 1, "consumer", 1.0, 0.0, 2.0, 0.5, -2.0),
        UserSpec(3, 1, "consumer", 1.0, 0.0, 2.0, 0.5, -2.0),
        UserSpec(4, 1, "prosumer", 0.0, 0.0, 0.0, 1.0, 0.0),
    )
    return Case(grid, users, Scenario({4: 5.8}), MarketParams(a, eps, max_iters))


def random_feasible_case(rng: np.random.Generator,
                         n_buses: int | None = None,
                         n_users: int | None = None,
                         n_prosumers: int | None = None,
                         a_factor: float = 1.6,
                         congestion: tuple[float, float] = (1.1, 1.8),
                         eps: float = 1e-9,
                         max_iters: int = 5000) -> Case:
    """A random connected grid with a feasible dispatch problem.

    ``a_factor > 1`` places the market sensitivity above the convergence
    threshold ``1 / (2 min alpha1)`` by that factor.  ``n_prosumers`` pins
    the prosumer count (region studies need a fixed output dimension).
    """
    nb = int(n_buses if n_buses is not None else rng.integers(3, 9))
    nu = int(n_users if n_users is not None else rng.integers(4, 21))
    buses = tuple(range(1, nb + 1))

    # spanning tree plus a few extra edges
    edges: list[tuple[int, int, float]] = []
    seen = set()
    for i in range(2, nb + 1):
        j = int(rng.integers(1, i))
        edges.append((j, i, float(rng.uniform(0.5, 2.0))))
        seen.add((j, i))
    for _ in range(int(rng.integers(0, nb // 2 + 1))):
        i = int(rng.integers(1, nb + 1))
        j = int(rng.integers(1, nb + 1))
        key = (min(i, j), max(i, j))
        if i != j and key not in seen:
            seen.add(key)
            edges.append((key[0], key[1], float(rng.uniform(0.5, 2.0))))

    if n_prosumers is None:
        kinds = [bool(rng.random() < 0.5) for _ in range(nu)]
        if not any(kinds):
            kinds[int(rng.integers(0, nu))] = True
    else:
        if not 1 <= n_prosumers <= nu:
            raise ValueError("n_prosumers must be between 1 and n_users")
        chosen = rng.choice(nu, size=n_prosumers, replace=False)
        kinds = [k in set(chosen.tolist()) for k in range(nu)]

    users = []
    d_hat = np.empty(nu)
    for k in range(nu):
        lo = float(rng.uniform(0.0, 0.5))
        hi = lo + float(rng.uniform(0.2, 1.0))
        d_hat[k] = lo + (hi - lo) * float(rng.uniform(0.25, 0.75))
        users.append(UserSpec(
            id=k + 1,
            bus=int(rng.integers(1, nb + 1)),
            kind="prosumer" if kinds[k] else "consumer",
            fixed_demand=float(rng.uniform(0.0, 2.0)),
            elastic_lo=lo,
            elastic_hi=hi,
            alpha1=float(rng.uniform(0.1, 2.0)),
            alpha2=float(rng.uniform(-0.5, 1.0)),
        ))

    prosumer_ids = [u.id for u in users if u.is_prosumer]
    total_w = sum(u.fixed_demand for u in users) + float(d_hat.sum())
    weights = rng.uniform(0.5, 1.5, len(prosumer_ids))
    w_vals = total_w * weights / weights.sum()
    scenario = {pid: float(wv) for pid, wv in zip(prosumer_ids, w_vals)}

    # flows at the planted point fix the line limits with a random margin
    probe = GridSpec(buses, tuple(LineSpec(i, j, s, 1.0) for i, j, s in edges), 1)
    ptdf = compute_ptdf(probe)
    idx = ptdf.bus_index
    inj = np.zeros(nb)
    for k, u in enumerate(users):
        w_k = scenario.get(u.id, 0.0)
        inj[idx[u.bus]] += w_k - u.fixed_demand - d_hat[k]
    flows = ptdf.matrix @ inj
    lines = tuple(
        LineSpec(i, j, s,
                 max(abs(flows[l]) * float(rng.uniform(*congestion)), 0.2))
        for l, (i, j, s) in enumerate(edges)
    )
    grid = GridSpec(buses, lines, 1)

    min_alpha1 = min(u.alpha1 for u in users)
    a = a_factor / (2.0 * min_alpha1)
    return Case(grid, tuple(users), Scenario(scenario),
                MarketParams(a, eps, max_iters))
