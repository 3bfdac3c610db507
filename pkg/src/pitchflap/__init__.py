"""Delayed-feedback stability analysis of helicopter pitch-flap dynamics."""

__version__ = "0.1.0"

from .rotor_model import (
    ControlGains,
    DelaySystem,
    RegionLabel,
    RotorParams,
    build_delay_system,
    build_matrices,
    build_uncontrolled,
    classify_uncontrolled,
    divergence_boundary,
    flutter_boundary,
)
from .quasipoly import QuasiPolynomial, eval_qp, eval_s_derivative, extract_pq
from .ctcr import crossing_delays, crossing_frequencies, root_tendency, stability_table
from .rootfinder import Region, count_roots, find_roots, rightmost_root
from .dde_sim import growth_rate, simulate
from .optimizer import optimal_delay, optimize_joint, sweep_gain_surface

__all__ = [
    "ControlGains", "DelaySystem", "RegionLabel", "RotorParams", "build_delay_system",
    "build_matrices", "build_uncontrolled", "classify_uncontrolled", "divergence_boundary",
    "flutter_boundary", "QuasiPolynomial", "eval_qp", "eval_s_derivative", "extract_pq",
    "crossing_delays", "crossing_frequencies", "root_tendency", "stability_table",
    "Region", "count_roots", "find_roots", "rightmost_root", "growth_rate", "simulate",
    "optimal_delay", "optimize_joint", "sweep_gain_surface",
]
