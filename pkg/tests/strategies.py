"""Hypothesis strategies for small exact instances."""
from fractions import Fraction

from hypothesis import strategies as st

from vmauction.model import AgentProfile, Instance

small = st.fractions(min_value=0, max_value=10, max_denominator=4)
positive = st.fractions(min_value=Fraction(1, 4), max_value=4, max_denominator=4)


@st.composite
def agents(draw, m):
    values = tuple(draw(small) for _ in range(m))
    return AgentProfile(draw(small), values, draw(positive))


@st.composite
def instances(draw, n_max=4, m_max=3, m=None, n_min=1, divisible=True):
    items = m if m is not None else draw(st.integers(1, m_max))
    n = draw(st.integers(n_min, n_max))
    return Instance(tuple(draw(agents(items)) for _ in range(n)), divisible)


epsilons = st.sampled_from([Fraction(1), Fraction(1, 2), Fraction(1, 10), Fraction(3)])
