"""Empirical verification: deviation search, exact expectations, ratio reports,
structural lemma checks and the sampling concentration estimate.

A deviation search covers a finite grid. A profitable misreport it finds is
a real counterexample. An empty result is evidence only; it proves nothing.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .additive import (
    BuyerKind,
    additive_partial_trace,
    large_market_holds,
    lx_random_sampling,
    split_budgets,
    sub_budget_greedy,
)
from .mechanisms import (
    EXACT_ENUMERATION_MAX_N,
    ConfigurationError,
    enumerate_coins,
    get_mechanism,
    guarantee,
    run_mechanism,
)
from .model import (
    MINUS_INFINITY,
    AgentProfile,
    Branch,
    CoinRealization,
    Instance,
    PrivacyModel,
    SizeError,
    ZERO,
    fmt,
    revenue,
    utility,
    validate_outcome,
)
from .oracle import opt_additive, opt_matching_indivisible, opt_single_item, opt_unit_demand
from .single import run_public_budget
from .unitdemand import DEFAULT_CLIP, greedy_clip

__all__ = [
    "DEFAULT_FACTORS",
    "DeviationGrid",
    "Deviation",
    "AuditVerdict",
    "RatioReport",
    "StructuralReport",
    "ConcentrationResult",
    "HeavyLightSplit",
    "misreports",
    "audit_coins",
    "truthfulness_audit",
    "exact_expected_revenue",
    "compute_opt",
    "ratio_report",
    "structural_checks",
    "concentration_check",
    "public_budget_lemma_checks",
    "additive_tau_lemma_checks",
    "heavy_light_split",
    "LemmaReport",
    "additive_composition_terms",
    "buyer_kind_comparison",
    "feasibility_violations",
]

DEFAULT_FACTORS = tuple(Fraction(x) for x in ("1/4", "1/2", "2/3", "1", "3/2", "2", "4"))
STRUCTURAL_MAX_N = 10
CONCENTRATION_EXACT_LIMIT = 1 << 24   # bit budget of the generating polynomial
HEAVY_BETA = Fraction(1, 144)


# ---------------------------------------------------------------------------
# truthfulness


@dataclass(frozen=True)
class DeviationGrid:
    tau_factors: tuple[Fraction, ...] = DEFAULT_FACTORS
    budget_factors: tuple[Fraction, ...] = DEFAULT_FACTORS
    value_factors: tuple[Fraction, ...] = DEFAULT_FACTORS
    joint: bool = False
    per_item_values: bool = True   # also scale one item's value at a time

    def __post_init__(self) -> None:
        for fs in (self.tau_factors, self.budget_factors, self.value_factors):
            if any(Fraction(f) <= 0 for f in fs):
                raise ValueError("misreport factors must be positive")


@dataclass(frozen=True, order=True)
class Deviation:
    agent: int
    misreport: str
    coins: str
    gain: str            # true-utility gain, "inf" when the truthful utility is minus infinity

    def to_dict(self) -> dict:
        return {"agent": self.agent + 1, "misreport": self.misreport, "coins": self.coins, "gain": self.gain}


@dataclass(frozen=True)
class AuditVerdict:
    mechanism: str
    privacy: str
    deviations: tuple[Deviation, ...]
    expected_truthful: bool
    misreports_tried: int
    coin_outcomes: int
    sampled: bool = False

    @property
    def passed(self) -> bool:
        """Truthful mechanisms must show no deviation; non-truthful ones must show one."""
        return not self.deviations if self.expected_truthful else bool(self.deviations)

    def to_dict(self) -> dict:
        return {
            "mechanism": self.mechanism,
            "privacy": self.privacy,
            "expected_truthful": self.expected_truthful,
            "passed": self.passed,
            "misreports_tried": self.misreports_tried,
            "coin_outcomes": self.coin_outcomes,
            "sampled_coins": self.sampled,
            "note": "finite misreport grid: an empty list is evidence, not proof",
            "deviations": [d.to_dict() for d in self.deviations],
        }


def misreports(agent: AgentProfile, privacy: PrivacyModel, grid: DeviationGrid) -> list[tuple[str, AgentProfile]]:
    """Labelled misreports of the private fields of ``agent`` (the truth excluded)."""
    budget_opts = [("", Fraction(1))]
    tau_opts = [("", Fraction(1))]
    value_opts: list[tuple[str, Optional[int], Fraction]] = [("", None, Fraction(1))]
    if privacy.budget_private:
        budget_opts += [(f"budget*{fmt(f)}", f) for f in grid.budget_factors if f != 1]
    if privacy.tau_private:
        tau_opts += [(f"tau*{fmt(f)}", f) for f in grid.tau_factors if f != 1]
    if privacy.values_private:
        value_opts += [(f"values*{fmt(f)}", None, f) for f in grid.value_factors if f != 1]
        if grid.per_item_values and len(agent.values) > 1:
            value_opts += [(f"value[{j + 1}]*{fmt(f)}", j, f)
                           for j in range(len(agent.values)) for f in grid.value_factors if f != 1]

    def make(b, v, t) -> tuple[str, AgentProfile]:
        label = ",".join(x for x in (b[0], v[0], t[0]) if x)
        if v[1] is None:
            values = tuple(x * v[2] for x in agent.values)
        else:
            values = tuple(x * v[2] if j == v[1] else x for j, x in enumerate(agent.values))
        return label, AgentProfile(agent.budget * b[1], values, agent.tau * t[1])

    out = []
    if grid.joint:
        for b, v, t in itertools.product(budget_opts, value_opts, tau_opts):
            if b[0] or v[0] or t[0]:
                out.append(make(b, v, t))
    else:
        out += [make(b, value_opts[0], tau_opts[0]) for b in budget_opts[1:]]
        out += [make(budget_opts[0], v, tau_opts[0]) for v in value_opts[1:]]
        out += [make(budget_opts[0], value_opts[0], t) for t in tau_opts[1:]]
    # drop reports identical to the truth (e.g. scaling a zero value)
    return [(lab, p) for lab, p in out if p != agent]


def audit_coins(mech_id: str, n: int, sample_size: Optional[int] = None,
                seed: int = 0) -> tuple[list[CoinRealization], bool]:
    """Coin outcomes to audit over: all of them when ``n`` allows, else a seeded sample."""
    info = get_mechanism(mech_id)
    if not info.randomized:
        return [CoinRealization.indivisible(n)], False
    if n <= EXACT_ENUMERATION_MAX_N and sample_size is None:
        return [c for _, c in enumerate_coins(mech_id, n)], False
    if sample_size is None:
        raise SizeError(f"n = {n} > {EXACT_ENUMERATION_MAX_N}: pass a sample size to audit sampled coins")
    rng = np.random.Generator(np.random.PCG64(seed))
    coins = []
    if info.indivisible_prob > 0:
        coins.append(CoinRealization.indivisible(n))
    for _ in range(sample_size):
        bits = rng.integers(0, 2, size=n)
        coins.append(CoinRealization(Branch.SAMPLING, tuple(bool(b) for b in bits), seed))
    return coins, True


def _audit_agent(args) -> list[Deviation]:
    mech_id, instance, i, reports, coins, params = args
    truth = instance.agents[i]
    found = []
    for c in coins:
        honest = run_mechanism(mech_id, instance, c, params)
        u0 = utility(truth, honest.allocation[i], honest.payments[i])
        for label, fake in reports:
            out = run_mechanism(mech_id, instance.with_agent(i, fake), c, params)
            u1 = utility(truth, out.allocation[i], out.payments[i])
            if u1 > u0:
                gain = "inf" if u0 is MINUS_INFINITY else fmt(u1 - u0)
                found.append(Deviation(i, label, c.describe(), gain))
    return found


def truthfulness_audit(mech_id: str, instance: Instance, privacy: Optional[PrivacyModel] = None,
                       grid: Optional[DeviationGrid] = None, coins: Optional[Sequence[CoinRealization]] = None,
                       params: Optional[Mapping[str, Any]] = None, workers: int = 1,
                       sample_size: Optional[int] = None, seed: int = 0) -> AuditVerdict:
    """Search for profitable misreports under coupled coins.

    For every agent, misreport of a private field and coin outcome, the
    mechanism is rerun on the misreported instance with the same coins and
    the result is scored with the agent's true profile.
    """
    info = get_mechanism(mech_id)
    privacy = privacy or info.privacy
    if not (privacy.budget_private or privacy.values_private or privacy.tau_private):
        raise ConfigurationError("privacy model has no private field to misreport")
    grid = grid or DeviationGrid()
    params = dict(params or {})
    sampled = False
    if coins is None:
        coins, sampled = audit_coins(mech_id, instance.n, sample_size, seed)
    coins = list(coins)
    jobs = []
    tried = 0
    for i, a in enumerate(instance.agents):
        reps = misreports(a, privacy, grid)
        tried += len(reps)
        jobs.append((mech_id, instance, i, reps, coins, params))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_audit_agent, jobs))
    else:
        results = [_audit_agent(j) for j in jobs]
    devs = tuple(sorted(d for r in results for d in r))
    return AuditVerdict(mech_id, privacy.label(), devs, info.expected_truthful, tried, len(coins), sampled)


# ---------------------------------------------------------------------------
# expectations and ratios


def exact_expected_revenue(mech_id: str, instance: Instance, params: Optional[Mapping[str, Any]] = None) -> Fraction:
    """Revenue averaged over the branch coin and all ``2^n`` memberships."""
    if get_mechanism(mech_id).randomized and instance.n > EXACT_ENUMERATION_MAX_N:
        raise SizeError(f"n = {instance.n} > {EXACT_ENUMERATION_MAX_N}: exact expectation refused")
    total = ZERO
    for prob, c in enumerate_coins(mech_id, instance.n):
        total += prob * revenue(run_mechanism(mech_id, instance, c, params))
    return total


_ORACLES = {
    "single": lambda inst: opt_single_item(inst).objective,
    "matching": lambda inst: opt_matching_indivisible(inst).objective,
    "unit-demand": lambda inst: opt_unit_demand(inst).objective,
    "additive": lambda inst: opt_additive(inst).objective,
}

# oracles that measure the same benchmark class as a mechanism's registered one
_COMPATIBLE = {
    "single": {"single", "additive", "unit-demand"},
    "matching": {"matching"},
    "unit-demand": {"unit-demand"},
    "additive": {"additive"},
}


def compute_opt(oracle: str, instance: Instance) -> Fraction:
    try:
        return _ORACLES[oracle](instance)
    except KeyError:
        raise ConfigurationError(f"unknown oracle {oracle!r}") from None


@dataclass(frozen=True)
class RatioReport:
    instance_id: str
    mechanism: str
    revenue: Fraction
    opt: Fraction
    ratio: Optional[Fraction]    # None when opt == 0
    bound: Fraction
    passed: bool
    flags: tuple[str, ...] = field(default=())

    def row(self) -> dict[str, str]:
        return {
            "instance": self.instance_id,
            "mechanism": self.mechanism,
            "revenue": fmt(self.revenue),
            "opt": fmt(self.opt),
            "ratio": "opt=0" if self.ratio is None else fmt(self.ratio),
            "bound": fmt(self.bound),
            "pass": "true" if self.passed else "false",
            "assumption_flags": ";".join(self.flags),
        }


def ratio_report(mech_id: str, instance: Instance, oracle: Optional[str] = None,
                 params: Optional[Mapping[str, Any]] = None, instance_id: str = "") -> RatioReport:
    info = get_mechanism(mech_id)
    oracle = oracle or info.oracle
    if oracle not in _COMPATIBLE[info.oracle]:
        raise ConfigurationError(f"oracle {oracle!r} does not match the benchmark of {mech_id}")
    params = dict(params or {})
    rev = exact_expected_revenue(mech_id, instance, params)
    opt = compute_opt(oracle, instance)
    bound = guarantee(mech_id, instance, params)
    flags = list(info.flags)
    if mech_id == "add-large-market":
        c = params.get("large_market_c") or 64
        flags.append(f"large_market={'true' if large_market_holds(instance, Fraction(c), opt) else 'false'}")
    if opt == 0:
        return RatioReport(instance_id, mech_id, rev, opt, None, bound, True, tuple(flags))
    return RatioReport(instance_id, mech_id, rev, opt, rev / opt, bound, rev >= bound * opt, tuple(flags))


# ---------------------------------------------------------------------------
# structural lemmas of greedy clipping


@dataclass
class StructuralReport:
    subsets: int = 0
    payment_failures: list[str] = field(default_factory=list)
    item_revenue_failures: list[str] = field(default_factory=list)
    trace_failures: list[str] = field(default_factory=list)
    average_lhs: Fraction = ZERO     # E_S[sum_j W_j(x^S)]
    average_rhs: Fraction = ZERO     # (1/4) sum_j W_j(x)

    @property
    def average_ok(self) -> bool:
        return self.average_lhs >= self.average_rhs

    @property
    def passed(self) -> bool:
        return not (self.payment_failures or self.item_revenue_failures or self.trace_failures) and self.average_ok

    def to_dict(self) -> dict:
        return {
            "subsets": self.subsets,
            "passed": self.passed,
            "payment_monotonicity_failures": self.payment_failures,
            "item_revenue_monotonicity_failures": self.item_revenue_failures,
            "remaining_fraction_trace_failures": self.trace_failures,
            "average_item_revenue": fmt(self.average_lhs),
            "quarter_full_item_revenue": fmt(self.average_rhs),
        }


def _members(mask: int, n: int) -> list[int]:
    return [i for i in range(n) if mask >> i & 1]


def structural_checks(instance: Instance, clip: Fraction = DEFAULT_CLIP) -> StructuralReport:
    """Check the subsampling lemmas of greedy clipping on every agent subset.

    Per subset ``S``: each member keeps at least half her payment, each
    item's revenue at most doubles, and at matched iterations the clipped
    remaining fraction on the full run never exceeds that of the ``S`` run.
    Averaged over subsets the total item revenue is at least a quarter of
    the full run's.
    """
    n = instance.n
    if n > STRUCTURAL_MAX_N:
        raise SizeError(f"n = {n} > {STRUCTURAL_MAX_N}: subset enumeration refused")
    half = Fraction(1, 2)
    full_out, full = greedy_clip(instance, None, clip)
    rep = StructuralReport()
    total = ZERO
    for mask in range(1 << n):
        S = _members(mask, n)
        out, tr = greedy_clip(instance, S, clip)
        rep.subsets += 1
        total += sum(tr.item_revenue, ZERO)
        tag = "S=" + ",".join(str(i + 1) for i in S)
        for i in S:
            if 2 * out.payments[i] < full_out.payments[i]:
                rep.payment_failures.append(f"{tag} agent {i + 1}")
        for j in range(instance.m):
            if tr.item_revenue[j] > 2 * full.item_revenue[j]:
                rep.item_revenue_failures.append(f"{tag} item {j + 1}")
        for i in S:
            k, k2 = full.bought_item(i), tr.bought_item(i)
            if k is None or k2 is None:
                continue
            after_full = full.steps[full.step_index(i, k)].remaining_after
            after_sub = tr.steps[tr.step_index(i, k2)].remaining_after
            for j in range(instance.m):
                if max(after_full[j], half) > max(after_sub[j], half):
                    rep.trace_failures.append(f"{tag} agent {i + 1} item {j + 1}")
    rep.average_lhs = total / (1 << n)
    rep.average_rhs = sum(full.item_revenue, ZERO) / 4
    return rep


@dataclass(frozen=True)
class HeavyLightSplit:
    beta: Fraction
    heavy_items: tuple[int, ...]
    heavy_revenue: Fraction
    light_revenue: Fraction


def heavy_light_split(instance: Instance, beta: Fraction = HEAVY_BETA, clip: Fraction = DEFAULT_CLIP) -> HeavyLightSplit:
    """Items whose greedy revenue ``W_j`` is at least ``beta`` times the total are heavy."""
    _, tr = greedy_clip(instance, None, clip)
    total = sum(tr.item_revenue, ZERO)
    heavy = tuple(j for j, w in enumerate(tr.item_revenue) if total > 0 and w >= beta * total)
    hv = sum((tr.item_revenue[j] for j in heavy), ZERO)
    return HeavyLightSplit(Fraction(beta), heavy, hv, total - hv)


# ---------------------------------------------------------------------------
# lemma checks for the public-budget and tau-private mechanisms


@dataclass
class LemmaReport:
    checks: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def public_budget_lemma_checks(instance: Instance, epsilon: Fraction,
                               factors: Sequence[Fraction] = DEFAULT_FACTORS) -> LemmaReport:
    """Allocation monotonicity and overreport punishment of the public-budget auction.

    Each agent's reported weight ``v/tau`` is scaled by every factor. A lower
    report must not raise her share; a higher report that raises her share
    must break her true RoS constraint.
    """
    epsilon = Fraction(epsilon)
    weights = [a.weight(0) for a in instance.agents]
    budgets = [a.budget for a in instance.agents]
    x, p, _ = run_public_budget(weights, budgets, epsilon)
    rep = LemmaReport()
    for i, a in enumerate(instance.agents):
        v = a.values[0]
        for f in factors:
            f = Fraction(f)
            if f == 1:
                continue
            w2 = list(weights)
            w2[i] = weights[i] * f
            x2, p2, _ = run_public_budget(w2, budgets, epsilon)
            rep.checks += 1
            if f < 1 and x2[i] > x[i]:
                rep.failures.append(f"agent {i + 1} factor {fmt(f)}: underreport raised allocation")
            if f > 1 and x2[i] > x[i] and not v * x2[i] < a.tau * p2[i]:
                rep.failures.append(f"agent {i + 1} factor {fmt(f)}: overreport not punished")
    return rep


def additive_tau_lemma_checks(instance: Instance, epsilon: Fraction,
                              factors: Sequence[Fraction] = DEFAULT_FACTORS) -> LemmaReport:
    """Delivered value is non-increasing in reported tau, and gains from a lower tau break RoS."""
    epsilon = Fraction(epsilon)
    rep = LemmaReport()
    for i, a in enumerate(instance.agents):
        reports = sorted({Fraction(f) for f in factors} | {Fraction(1)})
        delivered = {}
        pays = {}
        for f in reports:
            out = additive_partial_trace(instance.with_agent(i, a.replace(tau=a.tau * f)), epsilon).outcome
            delivered[f] = sum((x * v for x, v in zip(out.allocation[i], a.values)), ZERO)
            pays[f] = out.payments[i]
        for lo, hi in zip(reports, reports[1:]):
            rep.checks += 1
            if delivered[hi] > delivered[lo]:
                rep.failures.append(f"agent {i + 1}: value rose from tau*{fmt(lo)} to tau*{fmt(hi)}")
        for f in reports:
            if f < 1 and delivered[f] > delivered[Fraction(1)]:
                rep.checks += 1
                if not a.tau * pays[f] > delivered[f]:
                    rep.failures.append(f"agent {i + 1} tau*{fmt(f)}: gain without RoS violation")
    return rep


# ---------------------------------------------------------------------------
# concentration of the sample's optimal payments


@dataclass(frozen=True)
class ConcentrationResult:
    status: str                       # "ok", "fail" or "precondition unmet"
    n: int
    opt: Fraction
    exact: bool
    probability: Optional[Fraction]   # exact value, when enumerated
    estimate: Optional[float] = None  # Monte Carlo estimate
    interval: Optional[tuple[float, float]] = None
    trials: int = 0
    seed: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "n": self.n,
            "opt": fmt(self.opt),
            "exact": self.exact,
            "probability": None if self.probability is None else fmt(self.probability),
            "estimate": self.estimate,
            "interval": None if self.interval is None else list(self.interval),
            "trials": self.trials,
            "seed": self.seed,
            "threshold": "3/4",
        }


def _optimal_payments(instance: Instance) -> tuple[list[Fraction], Fraction]:
    sol = opt_single_item(instance) if instance.m == 1 else opt_additive(instance)
    return list(sol.outcome.payments), sol.objective


def _wilson(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def _window_count(weights: list[int], lo: int, hi: int) -> int:
    """Number of subsets whose weight lies in ``[lo, hi]``.

    The subset-sum counts are the coefficients of ``prod_i (1 + x^{a_i})``,
    packed into one big integer with ``n + 1`` bits per coefficient.
    """
    n = len(weights)
    bits = n + 1
    poly = 1
    for a in weights:
        poly += poly << (a * bits)
    mask = (1 << bits) - 1
    chunk = poly >> (lo * bits)
    count = 0
    for _ in range(lo, hi + 1):
        count += chunk & mask
        chunk >>= bits
    return count


def concentration_check(instance: Instance, trials: int = 10000, seed: int = 0,
                        force_monte_carlo: bool = False) -> ConcentrationResult:
    """Probability that a fair-coin sample's optimal payments fall in ``[OPT/3, 2 OPT/3]``.

    Runs only when every optimal payment is below ``OPT/36``. The count is
    exact when the scaled subset-sum polynomial fits the bit budget, and a
    seeded PCG64 Monte Carlo estimate with a Wilson interval otherwise.
    """
    pay, opt = _optimal_payments(instance)
    n = instance.n
    if opt == 0 or any(36 * p >= opt for p in pay):
        return ConcentrationResult("precondition unmet", n, opt, False, None)
    scale = math.lcm(*(p.denominator for p in pay), opt.denominator)
    a = [int(p * scale) for p in pay]
    lo = math.ceil(opt * scale / 3)
    hi = math.floor(2 * opt * scale / 3)
    threshold = Fraction(3, 4)
    if not force_monte_carlo and (sum(a) + 1) * (n + 1) <= CONCENTRATION_EXACT_LIMIT:
        prob = Fraction(_window_count(a, lo, hi), 1 << n)
        return ConcentrationResult("ok" if prob >= threshold else "fail", n, opt, True, prob)
    rng = np.random.Generator(np.random.PCG64(seed))
    draws = rng.integers(0, 2, size=(trials, n), dtype=np.int8)
    hits = 0
    for row in draws:
        s = sum(ai for ai, bit in zip(a, row) if bit)
        hits += lo <= s <= hi
    est = hits / trials
    ci = _wilson(hits, trials)
    return ConcentrationResult("ok" if ci[0] >= 0.75 else "fail", n, opt, False, None, est, ci, trials, seed)


def additive_composition_terms(instance: Instance, epsilon: Fraction) -> dict[str, Fraction]:
    """The quantities compared by the partial-privacy additive bounds."""
    tr = additive_partial_trace(instance, Fraction(epsilon))
    return {
        "revenue": revenue(tr.outcome),
        "z_times_payment": tr.z_times_payment(),
        "sub_budget_greedy": revenue(sub_budget_greedy(instance, split_budgets(instance))),
    }


def buyer_kind_comparison(instance: Instance, coins: CoinRealization) -> tuple[bool, bool]:
    """(sold fraction per item, total revenue) under value maximizers dominate quasi-linear buyers."""
    vm = lx_random_sampling(instance, coins, BuyerKind.VALUE_MAXIMIZER)
    ql = lx_random_sampling(instance, coins, BuyerKind.QUASI_LINEAR)
    sold_ok = all(vm.item_sold(j) >= ql.item_sold(j) for j in range(instance.m))
    return sold_ok, revenue(vm) >= revenue(ql)


def feasibility_violations(mech_id: str, instance: Instance, coins: CoinRealization,
                           params: Optional[Mapping[str, Any]] = None) -> list:
    return validate_outcome(instance, run_mechanism(mech_id, instance, coins, params))
