"""Feasibility LP, dual box, vertex enumeration, region algorithm."""

import numpy as np
import pytest

from gridshare.cases import random_feasible_case, two_group_case, two_user_case
from gridshare.centralized import solve_centralized
from gridshare.errors import DimensionError
from gridshare.flexibility import (
    DualBox,
    Halfspace,
    compute_region,
    enumerate_vertices,
    feasibility_threshold,
    feasibility_value,
    max_violation,
    membership,
    monte_carlo_check,
)
from gridshare.model import GridSpec, LineSpec, Scenario, UserSpec
from gridshare.network import assemble_constraints
from gridshare.sharing import run_sharing, verify_gne


def test_feasibility_zero_at_benchmark():
    case = two_group_case()
    csys = assemble_constraints(case.grid, case.users)
    res = feasibility_value(csys, case.scenario)
    assert res.value <= feasibility_threshold(csys)
    box = DualBox.from_constraints(csys)
    assert box.contains(res.dual)


def test_feasibility_unit_imbalance():
    # one consumer with 1 kW fixed demand, no elastic range, no source
    grid = GridSpec((1,), (), 1)
    users = (UserSpec(1, 1, "consumer", 1.0, 0.0, 0.0, 0.5, 0.1),)
    csys = assemble_constraints(grid, users)
    res = feasibility_value(csys, {})
    assert res.value == pytest.approx(1.0, abs=1e-9)
    assert DualBox.from_constraints(csys).contains(res.dual)


def test_duality_link_random_pairs():
    rng = np.random.default_rng(10)
    for _ in range(30):
        case = random_feasible_case(rng, n_buses=3, n_users=5)
        csys = assemble_constraints(case.grid, case.users)
        box = DualBox.from_constraints(csys)
        w = csys.w_vector(case.scenario)
        w_probe = w * rng.uniform(0.0, 2.5)
        primal = feasibility_value(csys, w_probe)
        dual = max_violation(box, csys, w_probe)
        assert abs(primal.value - dual.r) <= 1e-6 * (1 + primal.value)
        assert box.contains(dual.u_star)


def test_max_violation_zero_when_rhs_nonnegative():
    # c - Bw componentwise >= 0 makes u'(c-Bw) <= 0 for every u <= 0
    case = two_user_case()
    csys = assemble_constraints(case.grid, case.users)
    w = csys.w_vector(case.scenario)
    rhs = csys.c - csys.b_mat @ w
    if np.all(rhs >= 0):
        res = max_violation(DualBox.from_constraints(csys), csys, w)
        assert res.r <= 1e-7


def test_dualbox_contains_origin():
    case = two_user_case()
    csys = assemble_constraints(case.grid, case.users)
    box = DualBox.from_constraints(csys)
    assert box.contains(np.zeros(csys.n_rows))
    assert not box.contains(np.full(csys.n_rows, 0.5))


def _square(side=1.0):
    return [
        Halfspace(np.array([-1.0, 0.0]), 0.0),
        Halfspace(np.array([1.0, 0.0]), side),
        Halfspace(np.array([0.0, -1.0]), 0.0),
        Halfspace(np.array([0.0, 1.0]), side),
    ]


def test_vertices_unit_square():
    verts = enumerate_vertices(_square(), 2)
    expect = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    assert verts.shape == (4, 2)
    assert np.allclose(verts, expect)


def test_vertices_square_with_cut():
    cut = Halfspace(np.array([1.0, 1.0]) / np.sqrt(2), 1.5 / np.sqrt(2))
    hs = _square() + [cut]
    verts = enumerate_vertices(hs, 2)
    # brute-force oracle: all pairwise boundary intersections kept if feasible
    pts = []
    for i in range(len(hs)):
        for j in range(i + 1, len(hs)):
            a = np.array([hs[i].normal, hs[j].normal])
            b = np.array([hs[i].offset, hs[j].offset])
            if abs(np.linalg.det(a)) < 1e-12:
                continue
            v = np.linalg.solve(a, b)
            if all(h.violation(v) <= 1e-9 for h in hs):
                pts.append(tuple(np.round(v, 9)))
    assert verts.shape[0] == len(set(pts)) == 5


def test_vertices_unit_cube():
    hs = []
    for i in range(3):
        e = np.zeros(3)
        e[i] = -1.0
        hs.append(Halfspace(e.copy(), 0.0))
        e2 = np.zeros(3)
        e2[i] = 1.0
        hs.append(Halfspace(e2, 1.0))
    verts = enumerate_vertices(hs, 3)
    assert verts.shape == (8, 3)


def test_vertices_dimension_cap():
    with pytest.raises(DimensionError):
        enumerate_vertices([], 4)


def test_region_two_prosumer_monte_carlo_exact():
    case = two_user_case(flow_limit=0.1)
    csys = assemble_constraints(case.grid, case.users)
    region = compute_region(csys, [3.0, 3.0])
    assert region.complete
    report = monte_carlo_check(csys, region, 1000, seed=7)
    assert report.mismatches == ()
    assert report.agreements + report.n_excluded == 1000


def test_region_benchmark_point_interior():
    case = two_user_case(flow_limit=0.1)
    csys = assemble_constraints(case.grid, case.users)
    region = compute_region(csys, [3.0, 3.0])
    w = np.array([1.25, 1.75])
    assert membership(region, w)
    # strictly interior: clear of every facet
    assert all(h.violation(w) < -1e-3 for h in region.halfspaces)


def test_region_slab_closed_form():
    # no network rows: the region is the balance slab cut by the box
    grid = GridSpec((1,), (), 1)
    users = (
        UserSpec(1, 1, "prosumer", 1.0, 0.0, 0.5, 0.4, 0.1),
        UserSpec(2, 1, "prosumer", 0.5, 0.2, 0.6, 0.7, -0.2),
    )
    csys = assemble_constraints(grid, users)
    region = compute_region(csys, [2.0, 2.0])
    assert region.complete
    lo_sum = 1.5 + 0.2
    hi_sum = 1.5 + 1.1
    for w1 in np.linspace(0.05, 1.95, 20):
        for w2 in np.linspace(0.05, 1.95, 20):
            w = np.array([w1, w2])
            slab = lo_sum <= w1 + w2 <= hi_sum
            if min(abs(w1 + w2 - lo_sum), abs(w1 + w2 - hi_sum)) < 1e-4:
                continue
            assert membership(region, w) == slab, w


def test_region_vertices_on_benchmark_boundary_feasible():
    case = two_user_case(flow_limit=0.1)
    csys = assemble_constraints(case.grid, case.users)
    region = compute_region(csys, [3.0, 3.0])
    thr = feasibility_threshold(csys)
    for v in region.vertices:
        assert feasibility_value(csys, v).value <= max(thr, 1e-6)


def test_region_monotone_in_line_limits():
    case = two_user_case(flow_limit=0.1)
    csys = assemble_constraints(case.grid, case.users)
    region = compute_region(csys, [3.0, 3.0])

    wide = two_user_case(flow_limit=0.2)
    csys2 = assemble_constraints(wide.grid, wide.users)
    region2 = compute_region(csys2, [3.0, 3.0])
    for v in region.vertices:
        assert all(h.violation(v) <= 1e-6 for h in region2.halfspaces)


def test_region_cut_log_progress():
    case = two_user_case(flow_limit=0.1)
    csys = assemble_constraints(case.grid, case.users)
    region = compute_region(csys, [3.0, 3.0])
    assert len(region.cut_log) >= 1
    for rec in region.cut_log:
        assert rec.r_max > feasibility_threshold(csys)
        # the recorded vertex is sliced off by the recorded certificate
        normal = -(csys.b_mat.T @ rec.u_max)
        offset = -float(csys.c @ rec.u_max)
        assert float(normal @ rec.vertex) > offset


def test_monte_carlo_detects_shifted_facet():
    case = two_user_case(flow_limit=0.1)
    csys = assemble_constraints(case.grid, case.users)
    region = compute_region(csys, [3.0, 3.0])
    # pull one cut inward by 0.1: previously-feasible points now test outside
    cut_idx = next(i for i, h in enumerate(region.halfspaces)
                   if i >= 4)  # first non-box facet
    hs = list(region.halfspaces)
    hs[cut_idx] = Halfspace(hs[cut_idx].normal, hs[cut_idx].offset - 0.1)
    from dataclasses import replace

    bad = replace(region, halfspaces=tuple(hs))
    report = monte_carlo_check(csys, bad, 1000, seed=7)
    assert len(report.mismatches) > 0


def test_monte_carlo_reproducible():
    case = two_user_case(flow_limit=0.1)
    csys = assemble_constraints(case.grid, case.users)
    region = compute_region(csys, [3.0, 3.0])
    r1 = monte_carlo_check(csys, region, 300, seed=11)
    r2 = monte_carlo_check(csys, region, 300, seed=11)
    assert r1 == r2
    r3 = monte_carlo_check(csys, region, 300, seed=11, jobs=4)
    assert r3.agreements == r1.agreements
    assert r3.n_excluded == r1.n_excluded


def test_membership_examples():
    case = two_user_case(flow_limit=0.1)
    csys = assemble_constraints(case.grid, case.users)
    region = compute_region(csys, [3.0, 3.0])
    for v in region.vertices:
        assert membership(region, v, ) or min(
            h.violation(v) for h in region.halfspaces) <= 1e-7
    centroid = region.vertices.mean(axis=0)
    assert membership(region, centroid)
    facet = region.halfspaces[0]
    outside = region.vertices[0] + 1.0 * facet.normal
    assert not membership(region, outside)
    with pytest.raises(DimensionError):
        membership(region, np.zeros(3))


def test_equivalence_of_region_game_and_dispatch():
    # sampled renewable outputs: region membership, equilibrium existence and
    # dispatch feasibility coincide
    case = two_user_case(flow_limit=0.1, a=2.0, eps=1e-10)
    csys = assemble_constraints(case.grid, case.users)
    region = compute_region(csys, [3.0, 3.0])
    rng = np.random.default_rng(99)
    n_members = 0
    samples = [rng.uniform(0.0, 3.0, 2) for _ in range(30)]
    # the box is mostly infeasible; add draws near a known interior point so
    # both sides of the equivalence get exercised
    samples += [np.array([1.25, 1.75]) + rng.uniform(-0.3, 0.3, 2)
                for _ in range(15)]
    for w in samples:
        w = np.clip(w, 0.0, 3.0)
        if min(abs(h.violation(w)) for h in region.halfspaces) < 1e-6:
            continue
        member = membership(region, w)
        scen = Scenario({1: w[0], 2: w[1]})
        ref = solve_centralized(case.grid, case.users, scen)
        assert (ref.status == "optimal") == member
        if member:
            n_members += 1
            eq = run_sharing(case.grid, case.users, scen, case.market)
            assert eq.converged
            rep = verify_gne(eq, ref, case.grid, case.users, scen,
                             case.market.a, tol_d=1e-5, tol_lam=1e-4)
            assert rep.passed, rep.failures
    assert n_members >= 5
