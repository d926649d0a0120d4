"""Model-selection aggregation by mirror averaging."""

from .simplex import (
    DualState,
    LossVector,
    aggregate,
    fresh_state,
    mirror_average,
    mirror_map,
    potential,
    step,
    uniform_weights,
    weights_closed_form,
)

__version__ = "0.1.0"

__all__ = [
    "DualState",
    "LossVector",
    "aggregate",
    "fresh_state",
    "mirror_average",
    "mirror_map",
    "potential",
    "step",
    "uniform_weights",
    "weights_closed_form",
]
