"""Truthful revenue-maximizing auctions for budget and RoS constrained value maximizers."""
from .model import (
    FULLY_PRIVATE,
    MINUS_INFINITY,
    AgentProfile,
    Branch,
    CoinRealization,
    Instance,
    Outcome,
    PrivacyModel,
    load_instance,
    dump_instance,
    revenue,
    utility,
    validate_outcome,
    willingness_to_pay,
)
from .mechanisms import MECHANISMS, run_mechanism

__version__ = "0.1.0"
