"""Slow, independent reference solvers used only to cross-check the package."""
from __future__ import annotations

import itertools
from fractions import Fraction

from scipy.optimize import linprog


def wtp(agent, j):
    return min(agent.budget, agent.values[j] / agent.tau)


def grid_single_item(instance, step: Fraction):
    """Best revenue over all allocations whose shares are multiples of ``step``."""
    k = int(1 / step)
    best = Fraction(0)
    for shares in itertools.product(range(k + 1), repeat=instance.n):
        if sum(shares) > k:
            continue
        total = sum(min(a.budget, s * step * a.values[0] / a.tau) for a, s in zip(instance.agents, shares))
        best = max(best, total)
    return best


def linprog_additive(instance) -> float:
    """Float LP optimum of the additive first-best via scipy's HiGHS."""
    n, m = instance.n, instance.m
    nv = n * m + n
    c = [0.0] * (n * m) + [-1.0] * n
    A, b = [], []
    for i, a in enumerate(instance.agents):
        row = [0.0] * nv
        row[n * m + i] = 1.0
        for j in range(m):
            row[i * m + j] = -float(a.values[j] / a.tau)
        A.append(row)
        b.append(0.0)
    for j in range(m):
        row = [0.0] * nv
        for i in range(n):
            row[i * m + j] = 1.0
        A.append(row)
        b.append(1.0)
    bounds = [(0, None)] * (n * m) + [(0, float(a.budget)) for a in instance.agents]
    res = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs")
    assert res.status == 0
    return -res.fun


def brute_matching(instance) -> Fraction:
    """Max-weight matching by trying every injective map of agents to items or nothing."""
    n, m = instance.n, instance.m
    best = Fraction(0)
    for assign in itertools.product(range(-1, m), repeat=n):
        used = [j for j in assign if j >= 0]
        if len(used) != len(set(used)):
            continue
        best = max(best, sum((wtp(instance.agents[i], j) for i, j in enumerate(assign) if j >= 0), Fraction(0)))
    return best


def _knapsack(instance, j, members):
    remaining = Fraction(1)
    total = Fraction(0)
    for i in sorted(members, key=lambda i: -instance.agents[i].values[j] / instance.agents[i].tau):
        a = instance.agents[i]
        w = a.values[j] / a.tau
        if w == 0:
            break
        take = min(remaining, a.budget / w)
        total += take * w
        remaining -= take
    return total


def brute_unit_demand(instance) -> Fraction:
    """Enumerate every map of agents to one item or none; knapsack each item."""
    n, m = instance.n, instance.m
    best = Fraction(0)
    for assign in itertools.product(range(-1, m), repeat=n):
        total = sum(_knapsack(instance, j, [i for i in range(n) if assign[i] == j]) for j in range(m))
        best = max(best, total)
    return best
