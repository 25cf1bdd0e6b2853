"""Offline first-best benchmarks: ``max_x sum_i min{B_i, v_i(x)/tau_i}``.

One solver per valuation class. All of them are exact and meant for
desk-scale instances; they certify experiments, they do not scale.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

from .lp import solve_max
from .model import DimensionError, Instance, Outcome, SizeError, ZERO, revenue

__all__ = [
    "OptSolution",
    "opt_single_item",
    "opt_unit_demand",
    "opt_additive",
    "opt_matching_indivisible",
    "matching_weights",
    "UNIT_DEMAND_SEARCH_LIMIT",
]

UNIT_DEMAND_SEARCH_LIMIT = 10**7


@dataclass(frozen=True)
class OptSolution:
    outcome: Outcome
    objective: Fraction


def _solution(instance: Instance, alloc: list[list[Fraction]]) -> OptSolution:
    payments = []
    for a, row in zip(instance.agents, alloc):
        value = sum((x * v for x, v in zip(row, a.values)), ZERO)
        payments.append(min(a.budget, value / a.tau))
    out = Outcome.build(alloc, payments)
    return OptSolution(out, revenue(out))


def _greedy_item(instance: Instance, j: int, agents: Iterable[int]) -> dict[int, Fraction]:
    """Fractional knapsack on item ``j``: highest ``v_ij / tau_i`` first."""
    order = sorted(agents, key=lambda i: (-instance.agents[i].weight(j), i))
    remaining = Fraction(1)
    x: dict[int, Fraction] = {}
    for i in order:
        w = instance.agents[i].weight(j)
        if w == 0 or remaining == 0:
            break
        take = min(remaining, instance.agents[i].budget / w)
        if take > 0:
            x[i] = take
            remaining -= take
    return x


def opt_single_item(instance: Instance, subset: Optional[Iterable[int]] = None) -> OptSolution:
    """Optimal revenue from selling the single item to ``subset`` (default: everyone)."""
    if instance.m != 1:
        raise DimensionError(f"single-item oracle needs m == 1, got m = {instance.m}")
    agents = range(instance.n) if subset is None else sorted(set(subset))
    x = _greedy_item(instance, 0, agents)
    alloc = [[x.get(i, ZERO)] for i in range(instance.n)]
    return _solution(instance, alloc)


def opt_unit_demand(instance: Instance) -> OptSolution:
    """Best solution in which every agent holds fractions of at most one item.

    Searches over all ways of assigning agents to one item or none; given an
    assignment, every item is solved on its own by the fractional knapsack.
    """
    n, m = instance.n, instance.m
    if (m + 1) ** n > UNIT_DEMAND_SEARCH_LIMIT:
        raise SizeError(f"(m+1)^n = {(m + 1) ** n} exceeds {UNIT_DEMAND_SEARCH_LIMIT}; shrink the instance")
    full = (1 << n) - 1

    # value of item j when sold only to the agents in `mask`
    def item_value(j: int, mask: int) -> Fraction:
        members = [i for i in range(n) if mask >> i & 1]
        x = _greedy_item(instance, j, members)
        return sum((xi * instance.agents[i].weight(j) for i, xi in x.items()), ZERO)

    f = [[item_value(j, mask) for mask in range(full + 1)] for j in range(m)]

    # best[mask]: best revenue from the items seen so far using exactly the agents in mask
    best: dict[int, Fraction] = {0: ZERO}
    choice: list[dict[int, int]] = []
    for j in range(m):
        nxt: dict[int, Fraction] = {}
        pick: dict[int, int] = {}
        for used, val in best.items():
            free = full & ~used
            sub = free
            while True:
                total = val + f[j][sub]
                key = used | sub
                if key not in nxt or total > nxt[key]:
                    nxt[key] = total
                    pick[key] = sub
                if sub == 0:
                    break
                sub = (sub - 1) & free
        best = nxt
        choice.append(pick)

    mask = max(best, key=lambda k: (best[k], -k))
    groups = [0] * m
    for j in reversed(range(m)):
        groups[j] = choice[j][mask]
        mask &= ~groups[j]

    alloc = [[ZERO] * m for _ in range(n)]
    for j, g in enumerate(groups):
        x = _greedy_item(instance, j, [i for i in range(n) if g >> i & 1])
        for i, xi in x.items():
            alloc[i][j] = xi
    return _solution(instance, alloc)


def opt_additive(instance: Instance) -> OptSolution:
    """First-best for additive agents via an exact LP.

    Variables are ``x_ij`` and ``t_i`` with ``t_i <= B_i``,
    ``t_i <= sum_j x_ij v_ij / tau_i`` and unit supply per item.
    """
    n, m = instance.n, instance.m
    nx = n * m
    nv = nx + n
    A: list[list[Fraction]] = []
    b: list[Fraction] = []
    for i, a in enumerate(instance.agents):
        row = [ZERO] * nv
        row[nx + i] = Fraction(1)
        A.append(row)
        b.append(a.budget)
        row = [ZERO] * nv
        row[nx + i] = Fraction(1)
        for j in range(m):
            row[i * m + j] = -a.weight(j)
        A.append(row)
        b.append(ZERO)
    for j in range(m):
        row = [ZERO] * nv
        for i in range(n):
            row[i * m + j] = Fraction(1)
        A.append(row)
        b.append(Fraction(1))
    c = [ZERO] * nx + [Fraction(1)] * n
    x, obj = solve_max(c, A, b)

    alloc = [[x[i * m + j] for j in range(m)] for i in range(n)]
    # trim over-allocated rows so that each payment equals the delivered value / tau
    for i, a in enumerate(instance.agents):
        wtp = sum((alloc[i][j] * a.weight(j) for j in range(m)), ZERO)
        if wtp > a.budget:
            scale = a.budget / wtp
            alloc[i] = [v * scale for v in alloc[i]]
    sol = _solution(instance, alloc)
    assert sol.objective == obj
    return sol


def matching_weights(instance: Instance) -> list[list[Fraction]]:
    return [[min(a.budget, a.weight(j)) for j in range(instance.m)] for a in instance.agents]


def _matching_dp(w: list[list[Fraction]]) -> list[tuple[int, int]]:
    """Exhaustive max-weight matching by DP over subsets of columns."""
    rows, cols = len(w), len(w[0])
    best: dict[int, Fraction] = {0: ZERO}
    parents: list[dict[int, tuple[int, int]]] = []
    for r in range(rows):
        nxt: dict[int, Fraction] = {}
        par: dict[int, tuple[int, int]] = {}
        for used, val in best.items():
            if used not in nxt or val > nxt[used]:
                nxt[used], par[used] = val, (used, -1)
            for c in range(cols):
                if not used >> c & 1 and w[r][c] > 0:
                    key = used | 1 << c
                    total = val + w[r][c]
                    if key not in nxt or total > nxt[key]:
                        nxt[key], par[key] = total, (used, c)
        best = nxt
        parents.append(par)
    mask = max(best, key=lambda k: (best[k], -k))
    pairs = []
    for r in reversed(range(rows)):
        prev, c = parents[r][mask]
        if c >= 0:
            pairs.append((r, c))
        mask = prev
    return sorted(pairs)


def _matching_hungarian(w: list[list[Fraction]]) -> list[tuple[int, int]]:
    """Kuhn-Munkres with potentials on the square padding of ``w`` (maximization)."""
    rows, cols = len(w), len(w[0])
    size = max(rows, cols)
    top = max((v for row in w for v in row), default=ZERO)
    cost = [[top - (w[r][c] if r < rows and c < cols else ZERO) for c in range(size)] for r in range(size)]
    INF = None
    u = [ZERO] * (size + 1)
    v = [ZERO] * (size + 1)
    p = [0] * (size + 1)
    way = [0] * (size + 1)
    for r in range(1, size + 1):
        p[0] = r
        j0 = 0
        minv: list = [INF] * (size + 1)
        used = [False] * (size + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta, j1 = INF, 0
            for j in range(1, size + 1):
                if not used[j]:
                    cur = cost[i0 - 1][j - 1] - u[i0] - v[j]
                    if minv[j] is INF or cur < minv[j]:
                        minv[j], way[j] = cur, j0
                    if delta is INF or minv[j] < delta:
                        delta, j1 = minv[j], j
            for j in range(size + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    pairs = []
    for j in range(1, size + 1):
        r, c = p[j] - 1, j - 1
        if r < rows and c < cols and w[r][c] > 0:
            pairs.append((r, c))
    return sorted(pairs)


def opt_matching_indivisible(instance: Instance) -> OptSolution:
    """Maximum-weight matching with weights ``min{B_i, v_ij / tau_i}``."""
    w = matching_weights(instance)
    n, m = instance.n, instance.m
    if min(n, m) <= 10:
        if m <= n:
            pairs = _matching_dp(w)
        else:
            wt = [list(col) for col in zip(*w)]
            pairs = sorted((i, j) for j, i in _matching_dp(wt))
    else:
        pairs = _matching_hungarian(w)
    alloc = [[ZERO] * m for _ in range(n)]
    payments = [ZERO] * n
    for i, j in pairs:
        alloc[i][j] = Fraction(1)
        payments[i] = w[i][j]
    out = Outcome.build(alloc, payments)
    return OptSolution(out, revenue(out))

