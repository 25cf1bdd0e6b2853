"""Core types for auctions among value maximizers.

Every quantity is an exact :class:`fractions.Fraction`. An agent has a budget,
a per-unit value for each item and a target return-on-spend ratio ``tau``; her
utility is the value she receives, provided her payment respects both the
budget and ``tau * payment <= value``, and minus infinity otherwise.
"""
from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import total_ordering
from pathlib import Path
from typing import Iterable, Sequence, Union

__all__ = [
    "DimensionError",
    "ParameterError",
    "SizeError",
    "InstanceFormatError",
    "MINUS_INFINITY",
    "MinusInfinity",
    "AgentProfile",
    "Instance",
    "Outcome",
    "PrivacyModel",
    "Branch",
    "CoinRealization",
    "Violation",
    "to_fraction",
    "willingness_to_pay",
    "utility",
    "validate_outcome",
    "revenue",
    "instance_from_dict",
    "instance_to_dict",
    "load_instance",
    "dump_instance",
    "outcome_to_dict",
    "fmt",
]

ZERO = Fraction(0)
ONE = Fraction(1)


class DimensionError(ValueError):
    """Vector or matrix lengths disagree with the instance."""


class ParameterError(ValueError):
    """A mechanism parameter is outside its admissible range."""


class SizeError(ValueError):
    """An exhaustive computation would exceed its search budget."""


class InstanceFormatError(ValueError):
    """Malformed instance file."""


@total_ordering
class MinusInfinity:
    """Utility of an agent whose budget or RoS constraint is violated.

    Compares strictly below every number and equal only to itself.
    """

    _instance: "MinusInfinity | None" = None

    def __new__(cls) -> "MinusInfinity":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __eq__(self, other: object) -> bool:
        return other is self

    def __lt__(self, other: object) -> bool:
        return other is not self

    def __hash__(self) -> int:
        return hash("MinusInfinity")

    def __repr__(self) -> str:
        return "-inf"

    def __reduce__(self):
        return (MinusInfinity, ())


MINUS_INFINITY = MinusInfinity()

Utility = Union[Fraction, MinusInfinity]

_RATIONAL_RE = re.compile(r"^\s*(\d+)(?:\s*/\s*(\d+))?\s*$")


def to_fraction(x: object) -> Fraction:
    """Convert ints, Fractions or ``"p/q"`` strings to a Fraction.

    Floats and decimal strings are refused because they are lossy.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise InstanceFormatError(f"not a rational: {x!r}")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        s = x.strip()
        neg = s.startswith("-")
        mt = _RATIONAL_RE.match(s[1:] if neg else s)
        if mt is None:
            raise InstanceFormatError(f"rational must look like 'p/q' or an integer, got {x!r}")
        num, den = int(mt.group(1)), int(mt.group(2) or 1)
        if den == 0:
            raise InstanceFormatError(f"zero denominator in {x!r}")
        return Fraction(-num if neg else num, den)
    raise InstanceFormatError(f"not a rational: {x!r} (floats are rejected)")


def fmt(x: Fraction) -> str:
    """Canonical text form of a rational: ``"3/8"`` or ``"2"``."""
    return str(Fraction(x))


@dataclass(frozen=True)
class AgentProfile:
    budget: Fraction
    values: tuple[Fraction, ...]
    tau: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "budget", to_fraction(self.budget))
        object.__setattr__(self, "values", tuple(to_fraction(v) for v in self.values))
        object.__setattr__(self, "tau", to_fraction(self.tau))
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if any(v < 0 for v in self.values):
            raise ValueError("values must be nonnegative")

    def weight(self, j: int) -> Fraction:
        """Value-to-target ratio ``v_j / tau`` for item ``j``."""
        return self.values[j] / self.tau

    def replace(self, budget=None, values=None, tau=None) -> "AgentProfile":
        return AgentProfile(
            self.budget if budget is None else budget,
            self.values if values is None else tuple(values),
            self.tau if tau is None else tau,
        )


@dataclass(frozen=True)
class Instance:
    agents: tuple[AgentProfile, ...]
    divisible: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "agents", tuple(self.agents))
        if not self.agents:
            raise ValueError("an instance needs at least one agent")
        m = len(self.agents[0].values)
        if m < 1:
            raise ValueError("an instance needs at least one item")
        for a in self.agents:
            if len(a.values) != m:
                raise DimensionError("all agents must report one value per item")

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def m(self) -> int:
        return len(self.agents[0].values)

    def with_agent(self, i: int, agent: AgentProfile) -> "Instance":
        agents = list(self.agents)
        agents[i] = agent
        return Instance(tuple(agents), self.divisible)

    def without_agent(self, i: int) -> "Instance":
        return Instance(self.agents[:i] + self.agents[i + 1:], self.divisible)

    @classmethod
    def from_rows(cls, rows: Iterable[tuple], divisible: bool = True) -> "Instance":
        """Build from ``(budget, values, tau)`` triples; scalar values mean one item."""
        agents = []
        for b, v, t in rows:
            if not isinstance(v, (list, tuple)):
                v = (v,)
            agents.append(AgentProfile(Fraction(b), tuple(Fraction(x) for x in v), Fraction(t)))
        return cls(tuple(agents), divisible)


@dataclass(frozen=True)
class Outcome:
    allocation: tuple[tuple[Fraction, ...], ...]
    payments: tuple[Fraction, ...]

    @classmethod
    def zeros(cls, n: int, m: int) -> "Outcome":
        return cls(tuple((ZERO,) * m for _ in range(n)), (ZERO,) * n)

    @classmethod
    def build(cls, allocation: Sequence[Sequence[Fraction]], payments: Sequence[Fraction]) -> "Outcome":
        return cls(tuple(tuple(Fraction(x) for x in row) for row in allocation),
                   tuple(Fraction(p) for p in payments))

    @property
    def revenue(self) -> Fraction:
        return revenue(self)

    def item_sold(self, j: int) -> Fraction:
        return sum((row[j] for row in self.allocation), ZERO)


@dataclass(frozen=True)
class PrivacyModel:
    budget_private: bool = True
    values_private: bool = True
    tau_private: bool = True

    def __post_init__(self) -> None:
        if not (self.budget_private or self.values_private or self.tau_private):
            raise ValueError("privacy model must keep at least one field private")

    def label(self) -> str:
        parts = [name for name, on in (("budget", self.budget_private),
                                       ("values", self.values_private),
                                       ("tau", self.tau_private)) if on]
        return "+".join(parts)


FULLY_PRIVATE = PrivacyModel(True, True, True)


class Branch(enum.Enum):
    INDIVISIBLE = "indivisible"
    SAMPLING = "sampling"


@dataclass(frozen=True)
class CoinRealization:
    """Every random choice a mechanism makes, fixed up front."""

    procedure_choice: Branch
    sample_membership: tuple[bool, ...]
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "sample_membership", tuple(bool(b) for b in self.sample_membership))
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    @classmethod
    def indivisible(cls, n: int) -> "CoinRealization":
        return cls(Branch.INDIVISIBLE, (False,) * n)

    @classmethod
    def sampling(cls, n: int, sample: Iterable[int]) -> "CoinRealization":
        s = set(sample)
        if any(not 0 <= i < n for i in s):
            raise DimensionError("sample index out of range")
        return cls(Branch.SAMPLING, tuple(i in s for i in range(n)))

    @property
    def sample(self) -> frozenset[int]:
        return frozenset(i for i, b in enumerate(self.sample_membership) if b)

    @property
    def rest(self) -> list[int]:
        return [i for i, b in enumerate(self.sample_membership) if not b]

    def describe(self) -> str:
        if self.procedure_choice is Branch.INDIVISIBLE:
            return "indivisible"
        return "sampling:S=" + ",".join(str(i + 1) for i in sorted(self.sample))


def _check_len(xs: Sequence, m: int, what: str) -> None:
    if len(xs) != m:
        raise DimensionError(f"{what} has length {len(xs)}, expected {m}")


def received_value(agent: AgentProfile, fractions: Sequence[Fraction]) -> Fraction:
    _check_len(fractions, len(agent.values), "fractions")
    return sum((x * v for x, v in zip(fractions, agent.values)), ZERO)


def willingness_to_pay(agent: AgentProfile, fractions: Sequence[Fraction]) -> Fraction:
    """``min{B, v(x)/tau}``: the most the agent can pay for ``fractions``."""
    return min(agent.budget, received_value(agent, fractions) / agent.tau)


def utility(agent: AgentProfile, fractions: Sequence[Fraction], payment: Fraction) -> Utility:
    value = received_value(agent, fractions)
    if payment <= agent.budget and payment * agent.tau <= value:
        return value
    return MINUS_INFINITY


@dataclass(frozen=True, order=True)
class Violation:
    kind: str  # "budget", "ros", "supply", "integrality", "range", "payment"
    index: tuple[int, ...]
    detail: str = field(compare=False, default="")


def validate_outcome(instance: Instance, outcome: Outcome) -> list[Violation]:
    """All budget, RoS, supply and integrality violations; empty means feasible."""
    n, m = instance.n, instance.m
    _check_len(outcome.allocation, n, "allocation")
    _check_len(outcome.payments, n, "payments")
    out: list[Violation] = []
    for i, (agent, row, p) in enumerate(zip(instance.agents, outcome.allocation, outcome.payments)):
        _check_len(row, m, f"allocation row {i}")
        for j, x in enumerate(row):
            if x < 0 or x > 1:
                out.append(Violation("range", (i, j), f"x={fmt(x)}"))
            elif not instance.divisible and x not in (0, 1):
                out.append(Violation("integrality", (i, j), f"x={fmt(x)}"))
        if p < 0:
            out.append(Violation("payment", (i,), f"p={fmt(p)}"))
        if p > agent.budget:
            out.append(Violation("budget", (i,), f"p={fmt(p)} > B={fmt(agent.budget)}"))
        value = received_value(agent, row)
        if p * agent.tau > value:
            out.append(Violation("ros", (i,), f"tau*p={fmt(p * agent.tau)} > v={fmt(value)}"))
    for j in range(m):
        sold = outcome.item_sold(j)
        if sold > 1:
            out.append(Violation("supply", (j,), f"sold={fmt(sold)}"))
    return sorted(out)


def revenue(outcome: Outcome) -> Fraction:
    return sum(outcome.payments, ZERO)


# ---------------------------------------------------------------------------
# serialization


def instance_to_dict(instance: Instance) -> dict:
    return {
        "n": instance.n,
        "m": instance.m,
        "divisible": instance.divisible,
        "agents": [
            {"budget": fmt(a.budget), "values": [fmt(v) for v in a.values], "tau": fmt(a.tau)}
            for a in instance.agents
        ],
    }


def instance_from_dict(d: dict) -> Instance:
    try:
        agents = tuple(
            AgentProfile(to_fraction(a["budget"]), tuple(to_fraction(v) for v in a["values"]),
                         to_fraction(a["tau"]))
            for a in d["agents"]
        )
        inst = Instance(agents, bool(d.get("divisible", True)))
    except (KeyError, TypeError) as exc:
        raise InstanceFormatError(f"malformed instance: {exc}") from exc
    except ValueError as exc:
        raise InstanceFormatError(str(exc)) from exc
    if "n" in d and d["n"] != inst.n:
        raise InstanceFormatError(f"n={d['n']} but {inst.n} agents listed")
    if "m" in d and d["m"] != inst.m:
        raise InstanceFormatError(f"m={d['m']} but agents list {inst.m} values")
    return inst


def dump_instance(instance: Instance, path: Union[str, Path, None] = None) -> str:
    text = json.dumps(instance_to_dict(instance), indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def load_instance(path: Union[str, Path]) -> Instance:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{path}: invalid JSON: {exc}") from exc
    return instance_from_dict(d)


def outcome_to_dict(outcome: Outcome) -> dict:
    return {
        "allocation": [[fmt(x) for x in row] for row in outcome.allocation],
        "payments": [fmt(p) for p in outcome.payments],
        "revenue": fmt(revenue(outcome)),
    }
