"""Mechanisms for additive agents.

Two families live here. The partially private mechanism splits each budget
across items, runs the public-budget auction per item, clips the marginal
buyer, and lets every agent keep one uniform bundle. The large-market
mechanism is the random-sampling posted-price scheme over weights
``v_ij / tau_i``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .model import (
    AgentProfile,
    CoinRealization,
    DimensionError,
    Instance,
    Outcome,
    ParameterError,
    ZERO,
)
from .oracle import opt_additive
from .single import PublicBudgetState, run_public_budget

__all__ = [
    "SubBudgetMatrix",
    "BundleSelection",
    "ItemSubAuction",
    "PartialTrace",
    "BuyerKind",
    "LxState",
    "LX_PRICE_SHARE",
    "DEFAULT_LARGE_MARKET_C",
    "split_budgets",
    "bundle_select",
    "additive_partial",
    "additive_partial_trace",
    "sub_budget_greedy",
    "lx_greedy",
    "posted_price_purchase",
    "lx_random_sampling",
    "additive_large_market",
    "large_market_holds",
]

LX_PRICE_SHARE = Fraction(1, 6)
DEFAULT_LARGE_MARKET_C = Fraction(64)
CLIP_BAR = Fraction(1, 2)


@dataclass(frozen=True)
class SubBudgetMatrix:
    b: tuple[tuple[Fraction, ...], ...]

    def column(self, j: int) -> list[Fraction]:
        return [row[j] for row in self.b]


def split_budgets(instance: Instance) -> SubBudgetMatrix:
    """``B_ij = B_i * v_ij / sum_j' v_ij'``; agents valuing nothing get zeros."""
    rows = []
    for a in instance.agents:
        total = sum(a.values, ZERO)
        if total == 0:
            rows.append((ZERO,) * instance.m)
        else:
            rows.append(tuple(a.budget * v / total for v in a.values))
    return SubBudgetMatrix(tuple(rows))


@dataclass(frozen=True)
class BundleSelection:
    thresholds: tuple[frozenset[int], ...]   # T(j) = {j' : z_j' >= z_j}
    utilities: tuple[Fraction, ...]          # U(j) = z_j * sum of v over T(j)
    chosen: int                              # h: first index maximizing U
    allocation: tuple[Fraction, ...]
    payment: Fraction


def bundle_select(values: Sequence[Fraction], tau: Fraction, z: Sequence[Fraction],
                  budget: Fraction) -> BundleSelection:
    m = len(values)
    if len(z) != m:
        raise DimensionError("z row and value row differ in length")
    T = tuple(frozenset(jj for jj in range(m) if z[jj] >= z[j]) for j in range(m))
    U = tuple(z[j] * sum((values[jj] for jj in T[j]), ZERO) for j in range(m))
    h = max(range(m), key=lambda j: (U[j], -j))
    if U[h] == 0:
        return BundleSelection(T, U, h, (ZERO,) * m, ZERO)
    x = tuple(z[h] if j in T[h] else ZERO for j in range(m))
    return BundleSelection(T, U, h, x, min(budget, U[h] / tau))


@dataclass(frozen=True)
class ItemSubAuction:
    item: int
    state: PublicBudgetState
    z: tuple[Fraction, ...]            # after clipping
    payments: tuple[Fraction, ...]     # p_i(z_j), after clipping
    clipped_agent: Optional[int]       # the (k+1)-th agent whose share was zeroed, if any


@dataclass(frozen=True)
class PartialTrace:
    sub_budgets: SubBudgetMatrix
    items: tuple[ItemSubAuction, ...]
    bundles: tuple[BundleSelection, ...]
    outcome: Outcome

    def z_times_payment(self) -> Fraction:
        """``sum_ij z_ij * p_i(z_j)`` over the clipped sub-auction results."""
        return sum((zi * pi for it in self.items for zi, pi in zip(it.z, it.payments)), ZERO)

    def sub_payments(self) -> Fraction:
        return sum((pi for it in self.items for pi in it.payments), ZERO)


def additive_partial_trace(instance: Instance, epsilon: Fraction) -> PartialTrace:
    epsilon = Fraction(epsilon)
    if epsilon <= 0:
        raise ParameterError("epsilon must be positive")
    n, m = instance.n, instance.m
    sub = split_budgets(instance)
    items = []
    for j in range(m):
        weights = [a.weight(j) for a in instance.agents]
        z, p, st = run_public_budget(weights, sub.column(j), epsilon)
        a = st.marginal_agent
        clipped = None
        if a is not None and z[a] < CLIP_BAR:
            z[a], p[a] = ZERO, ZERO
            clipped = a
        items.append(ItemSubAuction(j, st, tuple(z), tuple(p), clipped))
    bundles = []
    for i, ag in enumerate(instance.agents):
        bundles.append(bundle_select(ag.values, ag.tau, [items[j].z[i] for j in range(m)], ag.budget))
    out = Outcome.build([b.allocation for b in bundles], [b.payment for b in bundles])
    return PartialTrace(sub, tuple(items), tuple(bundles), out)


def additive_partial(instance: Instance, epsilon: Fraction) -> Outcome:
    """Truthful mechanism when budgets and values are public and only tau is private."""
    return additive_partial_trace(instance, epsilon).outcome


def sub_budget_greedy(instance: Instance, sub_budgets: SubBudgetMatrix) -> Outcome:
    """Greedy by weight where pair (i, j) may spend only its sub-budget ``B_ij``."""
    n, m = instance.n, instance.m
    pairs = sorted(((i, j) for i in range(n) for j in range(m)),
                   key=lambda ij: (-instance.agents[ij[0]].weight(ij[1]), ij[0], ij[1]))
    R = [Fraction(1)] * m
    alloc = [[ZERO] * m for _ in range(n)]
    for i, j in pairs:
        w = instance.agents[i].weight(j)
        if w == 0:
            continue
        x = min(R[j], sub_budgets.b[i][j] / w)
        alloc[i][j] = x
        R[j] -= x
    pay = [sum((alloc[i][j] * instance.agents[i].weight(j) for j in range(m)), ZERO) for i in range(n)]
    return Outcome.build(alloc, pay)


# ---------------------------------------------------------------------------
# large market: greedy + random sampling posted prices


@dataclass
class LxState:
    residual_budgets: list[Fraction]
    supplies: list[Fraction]
    allocation: list[list[Fraction]]


def lx_greedy(weights: Sequence[Sequence[Fraction]], budgets: Sequence[Fraction]) -> list[list[Fraction]]:
    """Water-filling greedy over positive weights in decreasing order."""
    n = len(weights)
    m = len(weights[0]) if n else 0
    if len(budgets) != n:
        raise DimensionError("one budget per weight row")
    st = LxState([Fraction(b) for b in budgets], [Fraction(1)] * m, [[ZERO] * m for _ in range(n)])
    pairs = sorted(((i, j) for i in range(n) for j in range(m) if weights[i][j] > 0),
                   key=lambda ij: (-weights[ij[0]][ij[1]], ij[0], ij[1]))
    C, s, x = st.residual_budgets, st.supplies, st.allocation
    for i, j in pairs:
        w = weights[i][j]
        if C[i] > w * s[j]:
            x[i][j] = s[j]
            C[i] -= w * s[j]
            s[j] = ZERO
        else:
            x[i][j] = C[i] / w
            s[j] -= C[i] / w
            C[i] = ZERO
    return x


class BuyerKind(enum.Enum):
    VALUE_MAXIMIZER = "value"
    QUASI_LINEAR = "ql"


def posted_price_purchase(agent: AgentProfile, prices: Sequence[Fraction], supplies: Sequence[Fraction],
                          kind: BuyerKind) -> tuple[list[Fraction], Fraction]:
    """What one agent buys at fixed per-unit prices.

    Items are visited by ``v_j / (tau * r_j)`` descending, free items first.
    A quasi-linear buyer stops at the first item with ratio below one. A value
    maximizer keeps buying the largest fraction of each item that leaves both
    the budget and the aggregate RoS constraint satisfied. Items of zero value
    are never bought.
    """
    m = len(agent.values)
    if len(prices) != m or len(supplies) != m:
        raise DimensionError("prices and supplies need one entry per item")
    tau, B = agent.tau, agent.budget

    def key(j):
        if prices[j] == 0:
            return (0, ZERO, j)
        return (1, -agent.values[j] / (tau * prices[j]), j)

    order = [j for j in sorted(range(m), key=key) if agent.values[j] > 0 and supplies[j] > 0]
    f = [ZERO] * m
    spend, value = ZERO, ZERO
    for j in order:
        r, v, s = prices[j], agent.values[j], supplies[j]
        if r == 0:
            take = s
        else:
            ratio_ok = v >= tau * r
            if kind is BuyerKind.QUASI_LINEAR and not ratio_ok:
                break
            take = min(s, (B - spend) / r)
            if not ratio_ok:
                take = min(take, (value - tau * spend) / (tau * r - v))
        if take <= 0:
            if kind is BuyerKind.QUASI_LINEAR or (r != 0 and spend >= B):
                break
            continue
        f[j] = take
        spend += take * r
        value += take * v
    return f, spend


def lx_random_sampling(instance: Instance, coins: CoinRealization, kind: BuyerKind = BuyerKind.VALUE_MAXIMIZER,
                       share: Fraction = LX_PRICE_SHARE) -> Outcome:
    """Prices from the greedy run on the sample; the rest buy in index order."""
    n, m = instance.n, instance.m
    if len(coins.sample_membership) != n:
        raise DimensionError("coin membership vector does not match n")
    T = coins.sample
    weights = [[a.weight(j) if i in T else ZERO for j in range(m)] for i, a in enumerate(instance.agents)]
    budgets = [a.budget if i in T else ZERO for i, a in enumerate(instance.agents)]
    xT = lx_greedy(weights, budgets)
    prices = [share * sum((xT[i][j] * weights[i][j] for i in range(n)), ZERO) for j in range(m)]
    supplies = [Fraction(1)] * m
    alloc = [[ZERO] * m for _ in range(n)]
    pay = [ZERO] * n
    for i in coins.rest:
        f, spend = posted_price_purchase(instance.agents[i], prices, supplies, kind)
        for j in range(m):
            supplies[j] -= f[j]
        alloc[i] = f
        pay[i] = spend
    return Outcome.build(alloc, pay)


def large_market_holds(instance: Instance, c: Fraction = DEFAULT_LARGE_MARKET_C,
                       opt: Optional[Fraction] = None) -> bool:
    """Whether every budget is at most ``OPT / (m * c)``."""
    if opt is None:
        opt = opt_additive(instance).objective
    cap = opt / (instance.m * Fraction(c))
    return all(a.budget <= cap for a in instance.agents)


def additive_large_market(instance: Instance, coins: CoinRealization) -> Outcome:
    """Random sampling on the reduced instance with weights ``v_ij / tau_i``.

    The reduction keeps budgets and uses the weights directly, so this is the
    value-maximizer run of :func:`lx_random_sampling`. Its guarantee needs
    :func:`large_market_holds`.
    """
    return lx_random_sampling(instance, coins, BuyerKind.VALUE_MAXIMIZER)
