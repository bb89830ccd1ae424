"""Optimal release schedules for mosquito population replacement and
elimination (sterile-male and Wolbachia releases)."""

from .control import ControlGrid, TimeGrid, project_admissible, total_release
from .dynamics import integrate, simulate
from .model import SitParams, WolParams, check_assumptions, equilibria
from .optimizer import ControlProblem, pmp_diagnostics, solve

__version__ = "0.1.0"

__all__ = [
    "ControlGrid",
    "ControlProblem",
    "SitParams",
    "TimeGrid",
    "WolParams",
    "check_assumptions",
    "equilibria",
    "integrate",
    "pmp_diagnostics",
    "project_admissible",
    "simulate",
    "solve",
    "total_release",
]
