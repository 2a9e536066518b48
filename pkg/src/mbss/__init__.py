"""Modelling, control design and simulation of a magnetic ball suspension."""

from .design import (CareSolution, GainSet, lqr_gain, observer_gain,
                     place_poles, placement, solve_care)
from .lti import StateSpace, is_controllable, is_observable, linearize
from .plant import PlantParams, dynamics, equilibrium

__all__ = [
    "CareSolution", "GainSet", "PlantParams", "StateSpace", "dynamics",
    "equilibrium", "is_controllable", "is_observable", "linearize",
    "lqr_gain", "observer_gain", "place_poles", "placement", "solve_care",
]
