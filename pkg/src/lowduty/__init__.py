"""Analytical and simulated performance of IEEE 802.15.4 slotted CSMA/CA under low duty cycle."""
from .config import EnergyProfile, MacScenario, ScenarioError, TimingDerivation, derive_timing
from .fixed_point import ConvergenceError, FixedPointSolution, SolverOptions, solve
from .metrics import PerformanceReport, report
from .simulator import SimScenario, SimStats, simulate

__all__ = [
    "ConvergenceError",
    "EnergyProfile",
    "FixedPointSolution",
    "MacScenario",
    "PerformanceReport",
    "ScenarioError",
    "SimScenario",
    "SimStats",
    "SolverOptions",
    "TimingDerivation",
    "derive_timing",
    "report",
    "simulate",
    "solve",
]
