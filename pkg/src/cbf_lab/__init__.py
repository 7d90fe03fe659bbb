"""Dynamical analysis of CBF safety filters on planar LTI systems."""

from cbf_lab.errors import CbfLabError
from cbf_lab.model import Circle, Ellipse, Scenario, load_scenario, validate_scenario

__all__ = [
    "CbfLabError",
    "Circle",
    "Ellipse",
    "Scenario",
    "load_scenario",
    "validate_scenario",
]

__version__ = "0.1.0"
