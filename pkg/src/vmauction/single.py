"""Single-item mechanisms.

* :func:`first_price_indivisible` sells the whole item to the highest
  willingness-to-pay and charges exactly that.
* :func:`single_fully_private` mixes that with a random-sampling posted price.
* :func:`single_public_budget` is a uniform-price auction over rounded
  weights for the setting where budgets are public.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .model import (
    Branch,
    CoinRealization,
    DimensionError,
    Instance,
    Outcome,
    ParameterError,
    ZERO,
)
from .oracle import opt_single_item

__all__ = [
    "ALG1_INDIVISIBLE_PROB",
    "PublicBudgetState",
    "first_price_indivisible",
    "single_fully_private",
    "single_public_budget",
    "public_budget_state",
    "floor_power",
    "ceil_power",
]

ALG1_INDIVISIBLE_PROB = Fraction(9, 13)
RESERVE_SHARE = Fraction(1, 4)


def _require_single(instance: Instance) -> None:
    if instance.m != 1:
        raise DimensionError(f"single-item mechanism needs m == 1, got m = {instance.m}")


def _outcome(n: int, x: dict[int, Fraction], p: dict[int, Fraction]) -> Outcome:
    return Outcome.build([[x.get(i, ZERO)] for i in range(n)], [p.get(i, ZERO) for i in range(n)])


def first_price_indivisible(instance: Instance) -> Outcome:
    _require_single(instance)
    wtp = [min(a.budget, a.weight(0)) for a in instance.agents]
    k = max(range(instance.n), key=lambda i: (wtp[i], -i))
    return _outcome(instance.n, {k: Fraction(1)}, {k: wtp[k]})


def single_fully_private(instance: Instance, coins: CoinRealization,
                         reserve_share: Fraction = RESERVE_SHARE) -> Outcome:
    """One run of the mixed mechanism under fixed coins.

    The indivisible branch is the first-price sale. The sampling branch sets a
    reserve of ``reserve_share`` times the optimal revenue from the sample and
    sells to the remaining agents in ascending index order.
    """
    _require_single(instance)
    if len(coins.sample_membership) != instance.n:
        raise DimensionError("coin membership vector does not match n")
    if coins.procedure_choice is Branch.INDIVISIBLE:
        return first_price_indivisible(instance)

    r = reserve_share * opt_single_item(instance, coins.sample).objective
    remaining = Fraction(1)
    x: dict[int, Fraction] = {}
    p: dict[int, Fraction] = {}
    for i in coins.rest:
        a = instance.agents[i]
        if remaining == 0:
            break
        if r <= a.weight(0):
            take = remaining if r == 0 else min(a.budget / r, remaining)
            x[i], p[i] = take, take * r
            remaining -= take
    return _outcome(instance.n, x, p)


# ---------------------------------------------------------------------------
# public-budget uniform price auction


def floor_power(value: Fraction, base: Fraction) -> Fraction:
    """Largest integer power of ``base`` (> 1) that is <= ``value`` (> 0)."""
    if value <= 0:
        raise ValueError("value must be positive")
    p = Fraction(1)
    if value >= 1:
        while p * base <= value:
            p *= base
    else:
        while p > value:
            p /= base
    return p


def ceil_power(value: Fraction, base: Fraction) -> Fraction:
    """Smallest integer power of ``base`` (> 1) that is >= ``value`` (> 0)."""
    p = floor_power(value, base)
    return p if p == value else p * base


@dataclass(frozen=True)
class PublicBudgetState:
    epsilon: Fraction
    order: tuple[int, ...]            # participating agents, rounded weight descending
    rounded_weights: tuple[Fraction, ...]   # aligned with ``order``
    prefix_budgets: tuple[Fraction, ...]    # B[0] = 0, B[k] = sum of the first k budgets
    k_star: int
    clearing_constant: Fraction | None  # C[k], set only when B[k] exceeds the next weight

    def next_weight(self) -> Fraction:
        """``w_{k+1}``, zero when every participant is in the top k."""
        k = self.k_star
        return self.rounded_weights[k] if k < len(self.order) else ZERO

    @property
    def clears_on_budget(self) -> bool:
        return self.prefix_budgets[self.k_star] > self.next_weight()

    @property
    def marginal_agent(self) -> int | None:
        """Agent at position k+1 of the order, if there is one."""
        k = self.k_star
        return self.order[k] if k < len(self.order) else None


def public_budget_state(weights: list[Fraction], budgets: list[Fraction], epsilon: Fraction) -> PublicBudgetState:
    """Rounding, ordering and the choice of k for the public-budget auction.

    ``weights[i]`` is ``v_i / tau_i``; agents with zero weight do not take part.
    """
    epsilon = Fraction(epsilon)
    if epsilon <= 0:
        raise ParameterError("epsilon must be positive")
    base = 1 + epsilon
    rounded = {i: floor_power(w, base) for i, w in enumerate(weights) if w > 0}
    order = tuple(sorted(rounded, key=lambda i: (-rounded[i], i)))
    rw = tuple(rounded[i] for i in order)
    prefix = [ZERO]
    for i in order:
        prefix.append(prefix[-1] + budgets[i])
    k = 0
    for kk in range(1, len(order) + 1):
        if prefix[kk] <= rw[kk - 1]:
            k = kk
    nxt = rw[k] if k < len(order) else ZERO
    clearing = ceil_power(prefix[k], base) if prefix[k] > nxt else None
    return PublicBudgetState(epsilon, order, rw, tuple(prefix), k, clearing)


def run_public_budget(weights: list[Fraction], budgets: list[Fraction],
                      epsilon: Fraction) -> tuple[list[Fraction], list[Fraction], PublicBudgetState]:
    """Allocation and payments of the public-budget auction on raw vectors."""
    st = public_budget_state(weights, budgets, epsilon)
    n = len(weights)
    base = 1 + st.epsilon
    x = [ZERO] * n
    p = [ZERO] * n
    k = st.k_star
    bk = st.prefix_budgets[k]
    top = st.order[:k]
    if st.clears_on_budget:
        for i in top:
            x[i] = budgets[i] / (base * bk)
            p[i] = x[i] * st.clearing_constant
    else:
        wn = st.next_weight()
        if wn == 0:
            # every participant is in the top k with zero total budget
            return x, p, st
        for pos, i in enumerate(top):
            x[i] = budgets[i] / (base * wn)
            unit = base * wn if st.rounded_weights[pos] > wn else wn
            p[i] = x[i] * unit
        a = st.order[k]
        x[a] = 1 / base - bk / (base * wn)
        p[a] = x[a] * wn
    return x, p, st


def single_public_budget(instance: Instance, epsilon: Fraction) -> Outcome:
    _require_single(instance)
    weights = [a.weight(0) for a in instance.agents]
    budgets = [a.budget for a in instance.agents]
    x, p, _ = run_public_budget(weights, budgets, Fraction(epsilon))
    return Outcome.build([[xi] for xi in x], p)
