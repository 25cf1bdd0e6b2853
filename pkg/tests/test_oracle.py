from fractions import Fraction as F

import pytest
from hypothesis import given, settings

from vmauction.model import DimensionError, Instance, SizeError, validate_outcome
from vmauction.oracle import (
    opt_additive,
    opt_matching_indivisible,
    opt_single_item,
    opt_unit_demand,
)

from reference import brute_matching, brute_unit_demand, grid_single_item, linprog_additive
from strategies import instances

THREE = Instance.from_rows([(3, 8, 1), (2, 5, 1), (10, 2, 1)])


class TestSingleItem:
    def test_knapsack_example(self):
        sol = opt_single_item(THREE)
        assert [r[0] for r in sol.outcome.allocation] == [F(3, 8), F(2, 5), F(9, 40)]
        assert sol.objective == F(109, 20)

    def test_matches_grid_search(self):
        # every share of the optimum lies on the 1/40 grid, so the grid search reaches it
        assert grid_single_item(THREE, F(1, 40)) == F(109, 20)

    def test_one_agent_takes_all(self):
        assert opt_single_item(Instance.from_rows([(10**6, 4, 2)])).objective == 2

    def test_empty_subset(self):
        assert opt_single_item(THREE, []).objective == 0

    def test_needs_one_item(self):
        with pytest.raises(DimensionError):
            opt_single_item(Instance.from_rows([(1, (1, 1), 1)]))


class TestUnitDemand:
    def test_budget_cap(self):
        sol = opt_unit_demand(Instance.from_rows([(4, (8, 2), 1)]))
        assert sol.objective == 4 and sol.outcome.allocation[0] == (F(1, 2), 0)

    def test_two_agents_one_item(self):
        assert opt_unit_demand(Instance.from_rows([(3, 8, 1), (2, 5, 1)])).objective == 5

    def test_zero_values(self):
        assert opt_unit_demand(Instance.from_rows([(3, (0, 0), 1)] * 3)).objective == 0

    def test_guard(self):
        with pytest.raises(SizeError):
            opt_unit_demand(Instance.from_rows([(1, (1,) * 4, 1)] * 11))


class TestAdditive:
    def test_full_allocation(self):
        sol = opt_additive(Instance.from_rows([(8, (6, 2), 1)]))
        assert sol.objective == 8 and sol.outcome.allocation[0] == (1, 1)

    def test_shared_item(self):
        sol = opt_additive(Instance.from_rows([(1, 6, 1), (10, 2, 1)]))
        assert sol.objective == F(8, 3)
        assert [r[0] for r in sol.outcome.allocation] == [F(1, 6), F(5, 6)]

    def test_matches_grid_on_shared_item(self):
        assert grid_single_item(Instance.from_rows([(1, 6, 1), (10, 2, 1)]), F(1, 60)) == F(8, 3)

    def test_zero(self):
        assert opt_additive(Instance.from_rows([(5, (0, 0), 1)])).objective == 0


class TestMatching:
    def test_two_by_two(self):
        inst = Instance.from_rows([(100, (5, 2), 1), (100, (3, 4), 1)], divisible=False)
        sol = opt_matching_indivisible(inst)
        assert sol.objective == 9 and sol.outcome.allocation == ((1, 0), (0, 1))

    def test_single_pair(self):
        assert opt_matching_indivisible(Instance.from_rows([(7, 9, 1)], divisible=False)).objective == 7

    def test_all_zero(self):
        assert opt_matching_indivisible(Instance.from_rows([(3, (0, 0), 1)] * 2, divisible=False)).objective == 0

    def test_hungarian_branch_matches_dp(self):
        # 11 x 11 forces the augmenting-path solver; compare against the DP on the transpose-free 10-column prefix
        rows = [(F(10), tuple(F((i * 7 + j * 3) % 11) for j in range(11)), 1) for i in range(11)]
        inst = Instance.from_rows(rows, divisible=False)
        big = opt_matching_indivisible(inst).objective
        # a permutation matrix with weight 10 in each row exists: (i*7 + j*3) % 11 == 10 has a solution j per i
        assert big == 110


@settings(max_examples=60, deadline=None)
@given(instances(n_max=4, m=1))
def test_single_item_equals_lp(inst):
    assert opt_single_item(inst).objective == opt_additive(inst).objective


@settings(max_examples=60, deadline=None)
@given(instances(n_max=4, m_max=3))
def test_additive_matches_scipy_and_bounds(inst):
    sol = opt_additive(inst)
    assert abs(float(sol.objective) - linprog_additive(inst)) < 1e-7
    assert sol.objective <= sum(a.budget for a in inst.agents)
    assert sol.objective <= sum(a.weight(j) for a in inst.agents for j in range(inst.m))
    assert validate_outcome(inst, sol.outcome) == []


@settings(max_examples=60, deadline=None)
@given(instances(n_max=4, m_max=3))
def test_unit_demand_matches_enumeration(inst):
    sol = opt_unit_demand(inst)
    assert sol.objective == brute_unit_demand(inst)
    assert all(sum(1 for x in row if x > 0) <= 1 for row in sol.outcome.allocation)
    assert validate_outcome(inst, sol.outcome) == []
    assert sol.objective >= opt_matching_indivisible(inst).objective


@settings(max_examples=60, deadline=None)
@given(instances(n_max=5, m_max=4, divisible=False))
def test_matching_matches_enumeration(inst):
    sol = opt_matching_indivisible(inst)
    assert sol.objective == brute_matching(inst)
    assert validate_outcome(inst, sol.outcome) == []


@settings(max_examples=40, deadline=None)
@given(instances(n_max=4, m_max=3, n_min=2))
def test_removing_an_agent_never_helps(inst):
    for i in range(inst.n):
        smaller = inst.without_agent(i)
        assert opt_additive(smaller).objective <= opt_additive(inst).objective
        assert opt_unit_demand(smaller).objective <= opt_unit_demand(inst).objective
        assert opt_matching_indivisible(smaller).objective <= opt_matching_indivisible(inst).objective
        if inst.m == 1:
            assert opt_single_item(smaller).objective <= opt_single_item(inst).objective
