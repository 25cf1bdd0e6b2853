"""Registry of mechanisms by CLI id, with their randomization and guarantees."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterator, Mapping, Optional

from .additive import BuyerKind, additive_large_market, additive_partial, lx_random_sampling
from .model import (
    FULLY_PRIVATE,
    Branch,
    CoinRealization,
    Instance,
    Outcome,
    ParameterError,
    PrivacyModel,
    SizeError,
)
from .single import ALG1_INDIVISIBLE_PROB, first_price_indivisible, single_fully_private, single_public_budget
from .unitdemand import (
    ALG4_INDIVISIBLE_PROB,
    ALG5_INDIVISIBLE_PROB,
    DEFAULT_CLIP,
    greedy_clip,
    greedy_matching_indivisible,
    unit_demand_aux,
    unit_demand_final,
)

__all__ = [
    "ConfigurationError",
    "MechanismInfo",
    "MECHANISMS",
    "get_mechanism",
    "run_mechanism",
    "enumerate_coins",
    "guarantee",
    "clip_guarantee",
    "additive_partial_constant",
    "EXACT_ENUMERATION_MAX_N",
]

EXACT_ENUMERATION_MAX_N = 12


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class MechanismInfo:
    id: str
    title: str
    # probability of the indivisible branch; None for deterministic mechanisms
    indivisible_prob: Optional[Fraction]
    expected_truthful: bool
    privacy: PrivacyModel
    oracle: str          # "matching", "single", "unit-demand" or "additive"
    required: tuple[str, ...] = ()
    flags: tuple[str, ...] = field(default=())

    @property
    def randomized(self) -> bool:
        return self.indivisible_prob is not None


_TAU_ONLY = PrivacyModel(False, False, True)
_VALUES_TAU = PrivacyModel(False, True, True)

MECHANISMS: dict[str, MechanismInfo] = {m.id: m for m in [
    MechanismInfo("single-fp", "first price on willingness-to-pay", None, True, FULLY_PRIVATE, "matching"),
    MechanismInfo("single-alg1", "single item, fully private", ALG1_INDIVISIBLE_PROB, True, FULLY_PRIVATE, "single"),
    MechanismInfo("single-alg6", "single item, public budgets", None, True, _VALUES_TAU, "single",
                  required=("epsilon",)),
    MechanismInfo("ud-alg2", "greedy matching, indivisible", None, True, FULLY_PRIVATE, "matching"),
    MechanismInfo("ud-alg3", "greedy with supply clipping", None, False, FULLY_PRIVATE, "unit-demand",
                  flags=("allocator, not a mechanism",)),
    MechanismInfo("ud-alg4", "auxiliary unit-demand", ALG4_INDIVISIBLE_PROB, False, FULLY_PRIVATE, "unit-demand",
                  flags=("non-truthful",)),
    MechanismInfo("ud-alg5", "unit-demand, fully private", ALG5_INDIVISIBLE_PROB, True, FULLY_PRIVATE,
                  "unit-demand"),
    MechanismInfo("add-alg7", "additive, tau private", None, True, _TAU_ONLY, "additive", required=("epsilon",)),
    MechanismInfo("add-lx", "random sampling posted prices", Fraction(0), True, FULLY_PRIVATE, "additive"),
    MechanismInfo("add-large-market", "large-market additive", Fraction(0), True, FULLY_PRIVATE, "additive"),
]}


def get_mechanism(mech_id: str) -> MechanismInfo:
    try:
        return MECHANISMS[mech_id]
    except KeyError:
        raise ConfigurationError(f"unknown mechanism {mech_id!r}; choose from {', '.join(MECHANISMS)}") from None


def _param(params: Mapping[str, Any], name: str, default=None):
    v = params.get(name)
    return default if v is None else v


def run_mechanism(mech_id: str, instance: Instance, coins: Optional[CoinRealization] = None,
                  params: Optional[Mapping[str, Any]] = None) -> Outcome:
    info = get_mechanism(mech_id)
    params = params or {}
    for name in info.required:
        if params.get(name) is None:
            raise ParameterError(f"{mech_id} requires --{name}")
    if info.randomized and coins is None:
        raise ParameterError(f"{mech_id} is randomized; pass explicit coins")
    clip = Fraction(_param(params, "clip", DEFAULT_CLIP))
    if mech_id == "single-fp":
        return first_price_indivisible(instance)
    if mech_id == "single-alg1":
        return single_fully_private(instance, coins)
    if mech_id == "single-alg6":
        return single_public_budget(instance, Fraction(params["epsilon"]))
    if mech_id == "ud-alg2":
        return greedy_matching_indivisible(instance)
    if mech_id == "ud-alg3":
        return greedy_clip(instance, None, clip)[0]
    if mech_id == "ud-alg4":
        return unit_demand_aux(instance, coins, clip)
    if mech_id == "ud-alg5":
        return unit_demand_final(instance, coins, clip)
    if mech_id == "add-alg7":
        return additive_partial(instance, Fraction(params["epsilon"]))
    if mech_id == "add-lx":
        return lx_random_sampling(instance, coins, BuyerKind(_param(params, "buyer", "value")))
    if mech_id == "add-large-market":
        return additive_large_market(instance, coins)
    raise ConfigurationError(mech_id)


def enumerate_coins(mech_id: str, n: int) -> Iterator[tuple[Fraction, CoinRealization]]:
    """Every coin outcome with its probability.

    The indivisible branch ignores the partition, so it appears once.
    """
    info = get_mechanism(mech_id)
    if not info.randomized:
        yield Fraction(1), CoinRealization.indivisible(n)
        return
    if n > EXACT_ENUMERATION_MAX_N:
        raise SizeError(f"n = {n} > {EXACT_ENUMERATION_MAX_N}: exact coin enumeration refused")
    q = info.indivisible_prob
    if q > 0:
        yield q, CoinRealization.indivisible(n)
    weight = (1 - q) / 2**n
    if weight:
        for mask in range(2**n):
            yield weight, CoinRealization(Branch.SAMPLING, tuple(bool(mask >> i & 1) for i in range(n)))


def clip_guarantee(clip: Fraction) -> Fraction:
    """Ratio of greedy clipping with threshold ``clip``: ``1 / (2/c + 1/(1-c))``."""
    c = Fraction(clip)
    if not 0 < c < 1:
        raise ParameterError("clip must lie in (0, 1)")
    return 1 / (2 / c + 1 / (1 - c))


def additive_partial_constant(epsilon: Fraction) -> Fraction:
    """``min{1/2, 1/(1+eps)} / (2 (1+eps)(2+eps))``."""
    e = Fraction(epsilon)
    return min(Fraction(1, 2), 1 / (1 + e)) / (2 * (1 + e) * (2 + e))


def guarantee(mech_id: str, instance: Instance, params: Optional[Mapping[str, Any]] = None) -> Fraction:
    """Worst-case revenue / OPT promised for ``mech_id`` (0 when only asymptotic)."""
    params = params or {}
    if mech_id == "single-fp":
        return Fraction(1)
    if mech_id == "single-alg1":
        return Fraction(1, 52)
    if mech_id == "single-alg6":
        e = Fraction(params["epsilon"])
        return 1 / ((1 + e) * (2 + e))
    if mech_id == "ud-alg2":
        return Fraction(1, 2)
    if mech_id == "ud-alg3":
        return clip_guarantee(Fraction(_param(params, "clip", DEFAULT_CLIP)))
    if mech_id == "ud-alg4":
        return Fraction(1, 27072)
    if mech_id == "ud-alg5":
        return Fraction(1, 30528)
    if mech_id == "add-alg7":
        root = math.isqrt(instance.n)
        if root * root < instance.n:
            root += 1
        return additive_partial_constant(Fraction(params["epsilon"])) / (2 * root + 3)
    if mech_id in ("add-lx", "add-large-market"):
        return Fraction(0)
    raise ConfigurationError(mech_id)
