"""Seeded instance generators.

Every rational is drawn on a fixed grid ``k / denominator`` inside its range,
using numpy's PCG64 generator, so a given GeneratorSpec (seed included)
always produces the same instance on every platform.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .additive import DEFAULT_LARGE_MARKET_C, lx_greedy
from .model import AgentProfile, Instance, ParameterError, ZERO, to_fraction
from .oracle import opt_additive

__all__ = ["GeneratorKind", "GeneratorSpec", "generate", "MAX_DENOMINATOR"]

MAX_DENOMINATOR = 1000
# exact LP for the large-market cap up to this many pairs, greedy revenue beyond
EXACT_CAP_PAIRS = 40


class GeneratorKind(enum.Enum):
    UNIFORM = "uniform"
    LARGE_MARKET = "large-market"
    HEAVY_HITTER = "heavy-hitter"
    SYMMETRIC = "symmetric"


def _interval(pair) -> tuple[Fraction, Fraction]:
    lo, hi = (to_fraction(x) for x in pair)
    return lo, hi


@dataclass(frozen=True)
class GeneratorSpec:
    kind: GeneratorKind = GeneratorKind.UNIFORM
    n: int = 3
    m: int = 1
    seed: int = 0
    value_range: tuple[Fraction, Fraction] = (Fraction(0), Fraction(10))
    budget_range: tuple[Fraction, Fraction] = (Fraction(1), Fraction(10))
    tau_range: tuple[Fraction, Fraction] = (Fraction(1, 2), Fraction(2))
    large_market_c: Fraction = DEFAULT_LARGE_MARKET_C
    divisible: bool = True
    denominator: int = 20

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", GeneratorKind(self.kind))
        for name in ("value_range", "budget_range", "tau_range"):
            object.__setattr__(self, name, _interval(getattr(self, name)))
        object.__setattr__(self, "large_market_c", to_fraction(self.large_market_c))
        if self.n < 1 or self.m < 1:
            raise ParameterError("n and m must be at least 1")
        if not 1 <= self.denominator <= MAX_DENOMINATOR:
            raise ParameterError(f"denominator must lie in [1, {MAX_DENOMINATOR}]")
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must fit in 64 unsigned bits")
        for name in ("value_range", "budget_range", "tau_range"):
            lo, hi = getattr(self, name)
            if lo < 0 or lo > hi:
                raise ParameterError(f"{name} must be a nonempty nonnegative interval, got [{lo}, {hi}]")
            if math.ceil(lo * self.denominator) > math.floor(hi * self.denominator):
                raise ParameterError(f"{name} holds no point of the 1/{self.denominator} grid")
        if math.floor(self.tau_range[1] * self.denominator) == 0:
            raise ParameterError("tau_range must contain a positive grid point")
        if self.large_market_c <= 0:
            raise ParameterError("large_market_c must be positive")


class _Draw:
    def __init__(self, seed: int, denominator: int) -> None:
        self.rng = np.random.Generator(np.random.PCG64(seed))
        self.d = denominator

    def rational(self, lo: Fraction, hi: Fraction, positive: bool = False) -> Fraction:
        a = math.ceil(lo * self.d)
        if positive:
            a = max(a, 1)
        b = math.floor(hi * self.d)
        return Fraction(int(self.rng.integers(a, b + 1)), self.d)

    def agent(self, spec: GeneratorSpec) -> AgentProfile:
        values = tuple(self.rational(*spec.value_range) for _ in range(spec.m))
        return AgentProfile(self.rational(*spec.budget_range), values, self.rational(*spec.tau_range, positive=True))


def _opt_estimate(instance: Instance) -> Fraction:
    if instance.n * instance.m <= EXACT_CAP_PAIRS:
        return opt_additive(instance).objective
    weights = [[a.weight(j) for j in range(instance.m)] for a in instance.agents]
    x = lx_greedy(weights, [a.budget for a in instance.agents])
    return sum((x[i][j] * weights[i][j] for i in range(instance.n) for j in range(instance.m)), ZERO)


def _cap_budgets(instance: Instance, c: Fraction, denominator: int) -> Instance:
    # budgets shrink the benchmark, so repeat until the cap is a fixed point
    for _ in range(64):
        cap = _opt_estimate(instance) / (instance.m * c)
        cap = Fraction(math.floor(cap * denominator), denominator)
        if all(a.budget <= cap for a in instance.agents):
            return instance
        instance = Instance(tuple(a.replace(budget=min(a.budget, cap)) for a in instance.agents), instance.divisible)
    return instance


def generate(spec: GeneratorSpec) -> Instance:
    draw = _Draw(spec.seed, spec.denominator)
    if spec.kind is GeneratorKind.SYMMETRIC:
        a = draw.agent(spec)
        return Instance((a,) * spec.n, spec.divisible)

    agents = [draw.agent(spec) for _ in range(spec.n)]
    if spec.kind is GeneratorKind.HEAVY_HITTER:
        heavy = int(draw.rng.integers(0, spec.n))
        others = sum((min(a.budget, sum(a.values, ZERO) / a.tau) for i, a in enumerate(agents) if i != heavy), ZERO)
        floor_ = math.ceil(others)
        extra = draw.rational(*spec.budget_range)
        values = tuple(floor_ + draw.rational(*spec.value_range) for _ in range(spec.m))
        agents[heavy] = AgentProfile(floor_ + extra, values, Fraction(1))
    inst = Instance(tuple(agents), spec.divisible)
    if spec.kind is GeneratorKind.LARGE_MARKET:
        inst = _cap_budgets(inst, spec.large_market_c, spec.denominator)
    return inst
