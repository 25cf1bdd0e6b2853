"""Mechanisms for unit-demand agents over several items.

Pair orders break ties by ``(agent, item)`` ascending. ``greedy_clip`` is an
allocator used to price items; it is not truthful on its own.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

from .model import Branch, CoinRealization, DimensionError, Instance, Outcome, ZERO

__all__ = [
    "ALG4_INDIVISIBLE_PROB",
    "ALG5_INDIVISIBLE_PROB",
    "RESERVE_SHARE",
    "DEFAULT_CLIP",
    "PairKey",
    "PairOrder",
    "TraceStep",
    "GreedyTrace",
    "ReservePrices",
    "pair_order",
    "greedy_matching_indivisible",
    "greedy_clip",
    "reserve_prices",
    "unit_demand_aux",
    "unit_demand_final",
]

ALG4_INDIVISIBLE_PROB = Fraction(45, 47)
ALG5_INDIVISIBLE_PROB = Fraction(45, 53)
RESERVE_SHARE = Fraction(1, 12)
DEFAULT_CLIP = Fraction(1, 2)


class PairKey(enum.Enum):
    LEX_MIN_WTP_THEN_VALUE = "lex-wtp-value"
    WEIGHT_DESCENDING = "weight"


@dataclass(frozen=True)
class PairOrder:
    pairs: tuple[tuple[int, int], ...]
    key_kind: PairKey


def pair_order(instance: Instance, key_kind: PairKey) -> PairOrder:
    pairs = [(i, j) for i in range(instance.n) for j in range(instance.m)]
    ag = instance.agents
    if key_kind is PairKey.LEX_MIN_WTP_THEN_VALUE:
        def key(ij):
            i, j = ij
            return (-min(ag[i].budget, ag[i].weight(j)), -ag[i].values[j], i, j)
    else:
        def key(ij):
            i, j = ij
            return (-ag[i].weight(j), i, j)
    return PairOrder(tuple(sorted(pairs, key=key)), key_kind)


def greedy_matching_indivisible(instance: Instance) -> Outcome:
    """Greedy matching by ``(min{B_i, v_ij/tau_i}, v_ij)``, charging the first component."""
    n, m = instance.n, instance.m
    alloc = [[ZERO] * m for _ in range(n)]
    pay = [ZERO] * n
    agent_done, item_done = set(), set()
    for i, j in pair_order(instance, PairKey.LEX_MIN_WTP_THEN_VALUE).pairs:
        if i in agent_done or j in item_done:
            continue
        a = instance.agents[i]
        alloc[i][j] = Fraction(1)
        pay[i] = min(a.budget, a.weight(j))
        agent_done.add(i)
        item_done.add(j)
    return Outcome.build(alloc, pay)


@dataclass(frozen=True)
class TraceStep:
    agent: int
    item: int
    remaining_before: Fraction      # R_j of this pair's item at the start of the iteration
    assigned: Fraction
    payment: Fraction
    remaining_after: tuple[Fraction, ...]   # every item's remaining fraction at the end


@dataclass(frozen=True)
class GreedyTrace:
    steps: tuple[TraceStep, ...]
    remaining: tuple[Fraction, ...]
    item_revenue: tuple[Fraction, ...]   # W_j: payments of agents holding part of item j

    def bought_item(self, agent: int) -> Optional[int]:
        for s in self.steps:
            if s.agent == agent and s.assigned > 0:
                return s.item
        return None

    def step_index(self, agent: int, item: int) -> int:
        for t, s in enumerate(self.steps):
            if s.agent == agent and s.item == item:
                return t
        raise KeyError((agent, item))


def greedy_clip(instance: Instance, subset: Optional[Iterable[int]] = None,
                clip: Fraction = DEFAULT_CLIP) -> tuple[Outcome, GreedyTrace]:
    """Greedy matching with item supply clipping.

    Pairs are scanned by ``w_ij = v_ij / tau_i`` descending. An agent outside
    ``subset`` (or with ``w_ij == 0``) contributes an empty iteration. Agent
    ``i`` takes ``min{R_j, B_i/w_ij}`` of item ``j`` only if she holds nothing
    yet and more than ``clip`` of the item remains.
    """
    n, m = instance.n, instance.m
    members = set(range(n)) if subset is None else set(subset)
    if any(not 0 <= i < n for i in members):
        raise DimensionError("subset index out of range")
    R = [Fraction(1)] * m
    alloc = [[ZERO] * m for _ in range(n)]
    pay = [ZERO] * n
    bought: set[int] = set()
    steps = []
    for i, j in pair_order(instance, PairKey.WEIGHT_DESCENDING).pairs:
        a = instance.agents[i]
        w = a.weight(j)
        before = R[j]
        x = ZERO
        if i in members and w > 0 and i not in bought and R[j] > clip:
            x = min(R[j], a.budget / w)
            if x > 0:
                alloc[i][j] = x
                pay[i] = w * x
                R[j] -= x
                bought.add(i)
        steps.append(TraceStep(i, j, before, x, w * x, tuple(R)))
    W = tuple(sum((pay[i] for i in range(n) if alloc[i][j] > 0), ZERO) for j in range(m))
    return Outcome.build(alloc, pay), GreedyTrace(tuple(steps), tuple(R), W)


@dataclass(frozen=True)
class ReservePrices:
    r: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        if any(x < 0 for x in self.r):
            raise ValueError("reserve prices must be nonnegative")


def reserve_prices(instance: Instance, sample: Iterable[int], share: Fraction = RESERVE_SHARE,
                   clip: Fraction = DEFAULT_CLIP) -> ReservePrices:
    _, trace = greedy_clip(instance, sample, clip)
    return ReservePrices(tuple(share * w for w in trace.item_revenue))


def _check_coins(instance: Instance, coins: CoinRealization) -> None:
    if len(coins.sample_membership) != instance.n:
        raise DimensionError("coin membership vector does not match n")


def unit_demand_aux(instance: Instance, coins: CoinRealization, clip: Fraction = DEFAULT_CLIP,
                    share: Fraction = RESERVE_SHARE) -> Outcome:
    """Analysis-only comparator (not truthful).

    Each remaining agent may only buy the item she was given by the greedy
    allocator run on all agents, at that item's reserve price.
    """
    _check_coins(instance, coins)
    if coins.procedure_choice is Branch.INDIVISIBLE:
        return greedy_matching_indivisible(instance)
    n, m = instance.n, instance.m
    _, z_trace = greedy_clip(instance, None, clip)
    r = reserve_prices(instance, coins.sample, share, clip).r
    R = [Fraction(1)] * m
    alloc = [[ZERO] * m for _ in range(n)]
    pay = [ZERO] * n
    for i in coins.rest:
        k = z_trace.bought_item(i)
        if k is None:
            continue
        a = instance.agents[i]
        if r[k] <= a.weight(k):
            x = R[k] if r[k] == 0 else min(R[k], a.budget / r[k])
            alloc[i][k] = x
            pay[i] = r[k] * x
            R[k] -= x
    return Outcome.build(alloc, pay)


def unit_demand_final(instance: Instance, coins: CoinRealization, clip: Fraction = DEFAULT_CLIP,
                      share: Fraction = RESERVE_SHARE) -> Outcome:
    """Truthful unit-demand mechanism under fixed coins.

    In the sampling branch each remaining agent, in ascending index order,
    picks among items whose reserve she can afford the one with the largest
    obtainable value and pays her willingness-to-pay for what she gets.
    """
    _check_coins(instance, coins)
    if coins.procedure_choice is Branch.INDIVISIBLE:
        return greedy_matching_indivisible(instance)
    n, m = instance.n, instance.m
    r = reserve_prices(instance, coins.sample, share, clip).r
    R = [Fraction(1)] * m
    alloc = [[ZERO] * m for _ in range(n)]
    pay = [ZERO] * n
    for i in coins.rest:
        a = instance.agents[i]
        best, best_profit, best_x = None, ZERO, ZERO
        for j in range(m):
            if r[j] > a.weight(j):
                continue
            x = R[j] if r[j] == 0 else min(a.budget / r[j], R[j])
            profit = a.values[j] * x
            if profit > best_profit:
                best, best_profit, best_x = j, profit, x
        if best is None:
            continue
        alloc[i][best] = best_x
        pay[i] = min(a.weight(best) * best_x, a.budget)
        R[best] -= best_x
    return Outcome.build(alloc, pay)
