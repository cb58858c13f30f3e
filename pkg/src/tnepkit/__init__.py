"""Transmission network expansion planning toolkit.

Static and multi-year expansion planning on AC and DC network models,
with N-1 security screening, voltage-stability limits and reactive
source sizing, optimized by a bee-colony metaheuristic.
"""

__version__ = "0.1.0"

from .netmodel import (
    Bus,
    Case,
    Corridor,
    CostBreakdown,
    DynamicPlan,
    ExpansionPlan,
    Generator,
    HorizonConfig,
    ReactiveCandidate,
    discounted_cost,
    line_cost,
    reactive_cost,
    total_cost,
)

__all__ = [
    "Bus",
    "Case",
    "Corridor",
    "CostBreakdown",
    "DynamicPlan",
    "ExpansionPlan",
    "Generator",
    "HorizonConfig",
    "ReactiveCandidate",
    "discounted_cost",
    "line_cost",
    "reactive_cost",
    "total_cost",
]
