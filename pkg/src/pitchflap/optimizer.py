"""Spectral-abscissa tuning of the delayed feedback.

"Optimal" throughout means the smallest real part of the rightmost
characteristic root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .ctcr import stability_table_for
from .quasipoly import extract_pq
from .rootfinder import DEFAULT_REGION, DEFAULT_STEP, Region, RightmostResult, rightmost_root
from .rotor_model import ControlGains, RotorParams, build_delay_system

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class OptimizationError(RuntimeError):
    pass


def rightmost_for(params: RotorParams, a: float, b: float, tau: float,
                  scan: Region = DEFAULT_REGION, grid_step: float = DEFAULT_STEP) -> RightmostResult:
    qp = extract_pq(build_delay_system(params, ControlGains(a, b), tau))
    return rightmost_root(qp, scan=scan, grid_step=grid_step)


def abscissa(params: RotorParams, a: float, b: float, tau: float, **kwargs) -> float:
    """Certified spectral abscissa, or ``nan`` when certification fails."""
    r = rightmost_for(params, a, b, tau, **kwargs)
    return r.abscissa if r.certified else float("nan")


@dataclass
class DelayOptimum:
    tau: float
    abscissa: float
    interval: tuple[float, float]
    evaluations: int
    method: str
    root: complex | None = None


def _golden(f, lo: float, hi: float, tol: float):
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def _is_unimodal(values: np.ndarray) -> bool:
    k = int(np.argmin(values))
    left = np.diff(values[: k + 1])
    right = np.diff(values[k:])
    return bool(np.all(left <= 0) and np.all(right >= 0))


def optimal_delay(params: RotorParams, gains: ControlGains, interval: tuple[float, float] | None = None,
                  tol: float = 1e-4, n_probe: int = 9, grid_step: float = DEFAULT_STEP) -> DelayOptimum:
    """Delay in a stable interval that minimises the spectral abscissa.

    Without ``interval`` the first stable delay interval below ``2 pi`` is
    used. Golden-section search runs when coarse probes look unimodal;
    otherwise a 200-point scan followed by local golden refinement.
    """
    if interval is None:
        table = stability_table_for(params, gains, 2.0 * math.pi)
        if not table.stable_intervals:
            raise OptimizationError("no stable delay interval: nothing to search")
        interval = table.stable_intervals[0]
    lo, hi = map(float, interval)
    if not hi > lo:
        raise OptimizationError(f"empty interval {interval}")

    cache: dict[float, float] = {}

    def f(tau: float) -> float:
        if tau not in cache:
            v = abscissa(params, gains.a, gains.b, tau, grid_step=grid_step)
            cache[tau] = v if math.isfinite(v) else math.inf
        return cache[tau]

    probes = np.linspace(lo, hi, n_probe + 2)[1:-1]
    vals = np.array([f(float(t)) for t in probes])
    if _is_unimodal(vals):
        k = int(np.argmin(vals))
        a = probes[k - 1] if k > 0 else lo
        b = probes[k + 1] if k + 1 < len(probes) else hi
        method = "golden"
    else:
        dense = np.linspace(lo, hi, 202)[1:-1]
        dvals = np.array([f(float(t)) for t in dense])
        k = int(np.argmin(dvals))
        a = dense[k - 1] if k > 0 else lo
        b = dense[k + 1] if k + 1 < len(dense) else hi
        method = "dense+golden"
    tau_star, val = _golden(f, float(a), float(b), tol)
    if not math.isfinite(val):
        raise OptimizationError("abscissa could not be certified near the optimum")
    root = rightmost_for(params, gains.a, gains.b, tau_star, grid_step=grid_step).root
    return DelayOptimum(float(tau_star), float(val), (lo, hi), len(cache), method, root)


@dataclass
class SweepGrid:
    a_values: np.ndarray
    b_values: np.ndarray
    tau: float
    values: np.ndarray  # shape (len(a), len(b)); nan where not certified
    certified: np.ndarray

    @property
    def argmin(self) -> tuple[float, float, float]:
        if not np.any(np.isfinite(self.values)):
            raise OptimizationError("no certified grid values")
        i, j = np.unravel_index(np.nanargmin(self.values), self.values.shape)
        return float(self.a_values[i]), float(self.b_values[j]), float(self.values[i, j])


def sweep_gain_surface(params: RotorParams, tau: float, a_range: tuple[float, float],
                       b_range: tuple[float, float], n_a: int = 41, n_b: int = 41,
                       grid_step: float = DEFAULT_STEP) -> SweepGrid:
    a_values = np.linspace(a_range[0], a_range[1], n_a)
    b_values = np.linspace(b_range[0], b_range[1], n_b)
    values = np.full((n_a, n_b), np.nan)
    cert = np.zeros((n_a, n_b), dtype=bool)
    for i, a in enumerate(a_values):
        for j, b in enumerate(b_values):
            r = rightmost_for(params, float(a), float(b), tau, grid_step=grid_step)
            cert[i, j] = r.certified
            if r.certified:
                values[i, j] = r.abscissa
    return SweepGrid(a_values, b_values, float(tau), values, cert)


@dataclass
class JointOptimum:
    a: float
    b: float
    tau: float
    abscissa: float
    initial_abscissa: float
    evaluations: int
    converged: bool
    notes: list[str] = field(default_factory=list)


def optimize_joint(params: RotorParams, init: tuple[float, float, float], budget: int = 300,
                   xtol: float = 1e-6, grid_step: float = DEFAULT_STEP) -> JointOptimum:
    """Nelder-Mead descent on ``abscissa(a, b, tau)``.

    Gains are scaled by their initial magnitude so all three coordinates move
    on comparable scales. The returned point is never worse than ``init``.
    """
    a0, b0, t0 = map(float, init)
    scale = np.array([abs(a0) or 1e-4, abs(b0) or 1e-4, abs(t0) or 0.1])
    cache: dict[tuple[float, float, float], float] = {}

    def f_phys(a: float, b: float, tau: float) -> float:
        key = (a, b, tau)
        if key not in cache:
            if tau < 0:
                cache[key] = math.inf
            else:
                v = abscissa(params, a, b, tau, grid_step=grid_step)
                cache[key] = v if math.isfinite(v) else math.inf
        return cache[key]

    f0 = f_phys(a0, b0, t0)
    if not math.isfinite(f0):
        raise OptimizationError("initial point has no certified abscissa")

    def f(z: np.ndarray) -> float:
        a, b, tau = z * scale
        return f_phys(float(a), float(b), float(tau))

    z0 = np.array([a0, b0, t0]) / scale
    simplex = np.vstack([z0] + [z0 + 0.05 * np.eye(3)[k] * np.sign(z0[k] or 1.0) for k in range(3)])
    res = minimize(f, z0, method="Nelder-Mead",
                   options={"maxfev": budget, "xatol": xtol, "fatol": 1e-10,
                            "initial_simplex": simplex})
    notes = []
    a, b, tau = (res.x * scale).tolist()
    best = f_phys(a, b, tau)
    if not best <= f0:
        a, b, tau, best = a0, b0, t0, f0
        notes.append("no improvement over the initial point")
    if not res.success:
        notes.append(str(res.message))
    return JointOptimum(a, b, tau, best, f0, len(cache), bool(res.success), notes)
