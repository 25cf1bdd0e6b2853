from fractions import Fraction as F

import pytest
from hypothesis import given, settings

from vmauction.audit import (
    DeviationGrid,
    concentration_check,
    exact_expected_revenue,
    heavy_light_split,
    misreports,
    ratio_report,
    structural_checks,
    truthfulness_audit,
)
from vmauction.mechanisms import ConfigurationError, MECHANISMS, enumerate_coins, run_mechanism
from vmauction.model import (
    FULLY_PRIVATE,
    CoinRealization,
    Instance,
    PrivacyModel,
    SizeError,
    revenue,
    validate_outcome,
)

from strategies import instances

# agent 2 would rather have item 1; misreporting tau puts her on it in the sampling branch of the
# auxiliary mechanism, which keeps the item the greedy run gave her
CANARY = Instance.from_rows([(12, (20, 0), 1), (1, (10, 1), 1), (1, (0, 0), 1)])


class TestMisreports:
    def test_public_fields_untouched(self):
        a = Instance.from_rows([(2, (1, 3), 1)]).agents[0]
        reps = misreports(a, PrivacyModel(False, False, True), DeviationGrid())
        assert len(reps) == 6
        assert all(r.budget == a.budget and r.values == a.values for _, r in reps)

    def test_fully_private_counts(self):
        a = Instance.from_rows([(2, (1, 3), 1)]).agents[0]
        reps = misreports(a, FULLY_PRIVATE, DeviationGrid())
        # budget 6, uniform values 6, per-item values 12, tau 6
        assert len(reps) == 30

    def test_joint_grid(self):
        a = Instance.from_rows([(2, 1, 1)]).agents[0]
        assert len(misreports(a, FULLY_PRIVATE, DeviationGrid(joint=True))) == 7 ** 3 - 1

    def test_rejects_nonpositive_factor(self):
        with pytest.raises(ValueError):
            DeviationGrid(tau_factors=(F(0),))


class TestTruthfulness:
    def test_first_price_example(self):
        v = truthfulness_audit("single-fp", Instance.from_rows([(5, 10, 1), (3, 12, 2)]))
        assert v.deviations == () and v.passed

    def test_auxiliary_canary(self):
        v = truthfulness_audit("ud-alg4", CANARY)
        assert v.deviations and v.passed
        assert any(d.agent == 1 and d.misreport == "tau*1/4" and d.coins == "sampling:S=1" and d.gain == "9"
                   for d in v.deviations)

    def test_tau_private_additive(self):
        v = truthfulness_audit("add-alg7", Instance.from_rows([(8, (6, 2), 1), (4, (4, 4), 2)]),
                               params={"epsilon": F(1)})
        assert v.privacy == "tau" and v.deviations == ()

    def test_greedy_matching_tie_counterexample(self):
        # equal budget-capped willingness-to-pay on item 2: the secondary key is the reported value,
        # so agent 2 inflates it, wins the tie and gets value 6 instead of 2 within both constraints
        inst = Instance.from_rows([(3, (4, 6, 4), 1), (3, (0, 6, 2), F(1, 2))], divisible=False)
        v = truthfulness_audit("ud-alg2", inst)
        assert any(d.agent == 1 and d.misreport == "value[2]*2" and d.gain == "4" for d in v.deviations)
        assert not v.passed

    def test_deterministic_and_parallel_agree(self):
        inst = Instance.from_rows([(3, (4, 2), 1), (2, (5, 1), 2), (4, (1, 3), 1)])
        a = truthfulness_audit("ud-alg4", inst)
        b = truthfulness_audit("ud-alg4", inst, workers=2)
        assert a == b and a.to_dict() == b.to_dict()

    def test_sampled_coins_for_large_n(self):
        inst = Instance.from_rows([(1, 2, 1)] * 13)
        with pytest.raises(SizeError):
            truthfulness_audit("single-alg1", inst)
        v = truthfulness_audit("single-alg1", inst, grid=DeviationGrid((F(2),), (F(2),), (F(2),)), sample_size=3)
        assert v.sampled and v.coin_outcomes == 4


class TestExpectation:
    def test_deterministic_mechanism(self):
        inst = Instance.from_rows([(3, 8, 1), (2, 5, 1), (10, 2, 1)])
        assert exact_expected_revenue("single-alg6", inst, {"epsilon": F(1)}) == F(7, 2)

    def test_size_guard(self):
        with pytest.raises(SizeError):
            exact_expected_revenue("single-alg1", Instance.from_rows([(1, 1, 1)] * 13))

    @settings(max_examples=25, deadline=None)
    @given(instances(n_max=4, m_max=2))
    def test_mixture_equals_branch_sum(self, inst):
        for mech in ("ud-alg4", "ud-alg5"):
            q = MECHANISMS[mech].indivisible_prob
            indiv = revenue(run_mechanism(mech, inst, CoinRealization.indivisible(inst.n)))
            sampling = sum(revenue(run_mechanism(mech, inst, c)) for _, c in enumerate_coins(mech, inst.n)
                           if c.procedure_choice.value == "sampling") / 2 ** inst.n
            assert exact_expected_revenue(mech, inst) == q * indiv + (1 - q) * sampling

    def test_probabilities_sum_to_one(self):
        for mech in MECHANISMS:
            assert sum(p for p, _ in enumerate_coins(mech, 3)) == 1


class TestRatioReport:
    def test_public_budget_example(self):
        rep = ratio_report("single-alg6", Instance.from_rows([(3, 8, 1), (2, 5, 1), (10, 2, 1)]),
                           params={"epsilon": F(1)})
        assert (rep.ratio, rep.bound, rep.passed) == (F(70, 109), F(1, 6), True)

    def test_greedy_matching_example(self):
        rep = ratio_report("ud-alg2", Instance.from_rows([(5, (10, 2), 1), (10, (6, 8), 2)], divisible=False))
        assert (rep.ratio, rep.bound, rep.passed) == (1, F(1, 2), True)

    def test_zero_opt(self):
        rep = ratio_report("ud-alg3", Instance.from_rows([(3, (0, 0), 1)]))
        assert rep.ratio is None and rep.passed and rep.row()["ratio"] == "opt=0"

    def test_mismatched_oracle(self):
        with pytest.raises(ConfigurationError):
            ratio_report("ud-alg2", Instance.from_rows([(1, 1, 1)]), oracle="additive")

    def test_large_market_flag(self):
        rep = ratio_report("add-large-market", Instance.from_rows([(1, (1, 1), 1)] * 2))
        assert "large_market=false" in rep.flags

    def test_pass_recomputable(self):
        rep = ratio_report("ud-alg5", Instance.from_rows([(4, (8, 2), 1), (2, (6, 5), 1)]))
        row = rep.row()
        assert (row["pass"] == "true") == (F(row["revenue"]) >= F(row["bound"]) * F(row["opt"]))


class TestStructural:
    def test_clip_example(self):
        rep = structural_checks(Instance.from_rows([(3, (10, 4), 1), (100, (8, 6), 1)]))
        assert rep.subsets == 4 and rep.passed

    def test_single_agent(self):
        assert structural_checks(Instance.from_rows([(3, 5, 1)])).passed

    def test_size_guard(self):
        with pytest.raises(SizeError):
            structural_checks(Instance.from_rows([(1, 1, 1)] * 11))

    def test_heavy_light(self):
        split = heavy_light_split(Instance.from_rows([(3, (10, 4), 1), (100, (8, 6), 1)]))
        assert split.heavy_items == (0,) and split.light_revenue == 0


class TestConcentration:
    def test_forty_identical_agents(self):
        res = concentration_check(Instance.from_rows([(1, 40, 1)] * 40))
        assert res.exact and res.status == "ok"
        # P(14 <= Binomial(40, 1/2) <= 26)
        from math import comb
        assert res.probability == F(sum(comb(40, k) for k in range(14, 27)), 2 ** 40)

    def test_monte_carlo_is_seeded(self):
        inst = Instance.from_rows([(1, 40, 1)] * 40)
        a = concentration_check(inst, trials=2000, seed=5, force_monte_carlo=True)
        b = concentration_check(inst, trials=2000, seed=5, force_monte_carlo=True)
        assert a == b and a.interval[0] >= 0.75 and not a.exact

    def test_precondition(self):
        assert concentration_check(Instance.from_rows([(1, 12, 1)] * 12)).status == "precondition unmet"
        assert concentration_check(Instance.from_rows([(1, 1, 1)])).status == "precondition unmet"


@settings(max_examples=25, deadline=None)
@given(instances(n_max=3, m_max=2))
def test_every_mechanism_feasible_on_every_coin(inst):
    params = {"epsilon": F(1, 2)}
    for mech, info in MECHANISMS.items():
        if mech.startswith("single") and inst.m != 1:
            continue
        target = inst if mech not in ("single-fp", "ud-alg2") else Instance(inst.agents, divisible=False)
        for _, coins in enumerate_coins(mech, inst.n):
            assert validate_outcome(target, run_mechanism(mech, target, coins, params)) == []
