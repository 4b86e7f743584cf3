"""Case model: invariants, ingestion errors, round-trip."""

import json

import numpy as np
import pytest

from gridshare.errors import CaseFormatError, DisconnectedGridError, InvariantError
from gridshare.model import (
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
from gridshare.cases import two_group_case


def test_two_group_case_shape():
    case = two_group_case()
    assert len(case.users) == 200
    assert len(case.grid.lines) == 1
    assert case.grid.lines[0].flow_limit == 10.0
    assert all(u.is_prosumer for u in case.users)
    g1 = [u for u in case.users if u.alpha1 == 0.30]
    g2 = [u for u in case.users if u.alpha1 == 0.60]
    assert len(g1) == len(g2) == 100
    assert {case.scenario.w[u.id] for u in g1} == {1.25}
    assert {case.scenario.w[u.id] for u in g2} == {1.75}


def test_round_trip(tmp_path):
    case = two_group_case()
    path = tmp_path / "case.json"
    write_case(case, path)
    loaded = load_case(path)
    assert loaded == case
    # and the serialized form itself is stable
    assert dump_case(loaded) == dump_case(case)


def test_load_rejects_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"grid": [,]}')
    with pytest.raises(CaseFormatError, match="line 1"):
        load_case(path)


def test_load_names_missing_field(tmp_path):
    raw = dump_case(two_group_case())
    del raw["users"][0]["alpha1"]
    path = tmp_path / "case.json"
    path.write_text(json.dumps(raw))
    with pytest.raises(CaseFormatError, match=r"users\[0\].alpha1"):
        load_case(path)


def test_alpha1_zero_rejected(tmp_path):
    raw = dump_case(two_group_case())
    raw["users"][3]["alpha1"] = 0.0
    path = tmp_path / "case.json"
    path.write_text(json.dumps(raw))
    with pytest.raises(InvariantError, match="alpha1"):
        load_case(path)


def test_slack_bus_membership(tmp_path):
    raw = dump_case(two_group_case())
    raw["grid"]["slack_bus"] = 99
    path = tmp_path / "case.json"
    path.write_text(json.dumps(raw))
    with pytest.raises(InvariantError, match="slack_bus"):
        load_case(path)


def test_disconnected_grid_rejected():
    with pytest.raises(DisconnectedGridError):
        GridSpec((1, 2, 3), (LineSpec(1, 2, 1.0, 5.0),), 1)


def test_duplicate_bus_ids_rejected():
    with pytest.raises(InvariantError, match="unique"):
        GridSpec((1, 2, 2), (LineSpec(1, 2, 1.0, 5.0),), 1)


def test_line_invariants():
    with pytest.raises(InvariantError, match="from_bus equals to_bus"):
        LineSpec(2, 2, 1.0, 5.0)
    with pytest.raises(InvariantError, match="flow_limit"):
        LineSpec(1, 2, 1.0, 0.0)
    with pytest.raises(InvariantError, match="susceptance"):
        LineSpec(1, 2, -1.0, 5.0)


def test_user_invariants():
    with pytest.raises(InvariantError, match="elastic_lo"):
        UserSpec(1, 1, "consumer", 0.0, 1.0, 0.5, 0.3, 0.0)
    with pytest.raises(InvariantError, match="kind"):
        UserSpec(1, 1, "windmill", 0.0, 0.0, 0.5, 0.3, 0.0)
    with pytest.raises(InvariantError, match="fixed_demand"):
        UserSpec(1, 1, "consumer", -1.0, 0.0, 0.5, 0.3, 0.0)


def test_scenario_keys_must_be_prosumers():
    grid = GridSpec((1,), (), 1)
    users = (UserSpec(1, 1, "consumer", 1.0, 0.0, 1.0, 0.5, 0.1),)
    market = MarketParams(1.0, 1e-6, 100)
    with pytest.raises(InvariantError, match="not prosumer ids"):
        Case(grid, users, Scenario({1: 1.0}), market)


def test_every_prosumer_needs_an_entry():
    grid = GridSpec((1,), (), 1)
    users = (UserSpec(1, 1, "prosumer", 1.0, 0.0, 1.0, 0.5, 0.1),)
    market = MarketParams(1.0, 1e-6, 100)
    with pytest.raises(InvariantError, match="missing entries"):
        Case(grid, users, Scenario({}), market)


def test_negative_output_rejected():
    with pytest.raises(InvariantError, match=">= 0"):
        Scenario({1: -0.5})


def test_market_params_invariants():
    with pytest.raises(InvariantError, match="market.a"):
        MarketParams(0.0, 1e-6, 10)
    with pytest.raises(InvariantError, match="market.eps"):
        MarketParams(1.0, 0.0, 10)
    with pytest.raises(InvariantError, match="max_iters"):
        MarketParams(1.0, 1e-6, 0)


def test_aggregate_net_fixed_examples():
    scen = Scenario({7: 1.25, 8: 1.75})
    p1 = UserSpec(7, 1, "prosumer", 1.00, 0.2, 0.5, 0.30, 0.42)
    p2 = UserSpec(8, 1, "prosumer", 1.30, 0.1, 0.6, 0.60, 0.72)
    cons = UserSpec(9, 1, "consumer", 2.0, 0.0, 1.0, 0.5, 0.1)
    assert aggregate_net_fixed(p1, scen) == pytest.approx(-0.25)
    assert aggregate_net_fixed(p2, scen) == pytest.approx(-0.45)
    assert aggregate_net_fixed(cons, scen) == 2.0


def test_aggregate_net_fixed_missing_entry():
    p = UserSpec(7, 1, "prosumer", 1.0, 0.2, 0.5, 0.3, 0.4)
    with pytest.raises(InvariantError, match="prosumer 7"):
        aggregate_net_fixed(p, Scenario({}))
