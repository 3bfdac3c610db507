"""Method-of-steps integration of ``x' = A x(psi) + A_d x(psi - tau)``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rotor_model import DelaySystem

DIVERGENCE_LIMIT = 1e12


class GrowthRateError(ValueError):
    pass


@dataclass
class TimeSeries:
    psi: np.ndarray
    states: np.ndarray  # shape (n, 4): theta, beta, theta_dot, beta_dot
    step: float
    tau: float
    diverged: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def norm(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    def rows(self):
        for p, x in zip(self.psi, self.states):
            yield (float(p), *map(float, x))


def aligned_step(tau: float, step: float) -> float:
    """Largest step <= ``step`` that divides ``tau`` exactly."""
    if tau <= 0:
        return step
    return tau / math.ceil(tau / step - 1e-12)


def _hermite(x0, x1, d0, d1, h, theta):
    t2 = theta * theta
    t3 = t2 * theta
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + theta
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    return h00 * x0 + h10 * h * d0 + h01 * x1 + h11 * h * d1


def simulate(sys: DelaySystem, x0, psi_end: float, step: float = 1e-3,
             history: str = "constant") -> TimeSeries:
    """Integrate with classical RK4 from ``psi = 0`` to ``psi_end``.

    The step is shrunk so that the delay spans an integer number of steps;
    delayed values at the half-step RK stages then come from cubic Hermite
    interpolation inside a single stored interval. ``history`` selects the
    initial function on ``[-tau, 0)``: ``"constant"`` (equal to ``x0``) or
    ``"zero"``.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    if history not in ("constant", "zero"):
        raise ValueError(f"unknown history {history!r}")
    x0 = np.asarray(x0, dtype=float).reshape(4)
    tau = sys.tau
    h = aligned_step(tau, step)
    n = int(math.floor(psi_end / h + 1e-9))
    A, Ad = sys.A, sys.A_d
    psi = h * np.arange(n + 1)
    X = np.zeros((n + 1, 4))
    X[0] = x0
    diverged = False

    if tau == 0.0:
        At = A + Ad
        for k in range(n):
            x = X[k]
            k1 = At @ x
            k2 = At @ (x + 0.5 * h * k1)
            k3 = At @ (x + 0.5 * h * k2)
            k4 = At @ (x + h * k3)
            X[k + 1] = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.abs(X[k + 1]) < DIVERGENCE_LIMIT):
                diverged = True
                n = k + 1
                break
    else:
        m = int(round(tau / h))
        hist = x0 if history == "constant" else np.zeros(4)
        # D[k] is the right derivative x'(psi_k+). The solution is C^1 except
        # at psi = 0, so D also serves as the left derivative at nodes k >= 1.
        D = np.zeros((n + 1, 4))
        for k in range(n):
            x = X[k]
            j = k - m  # delayed argument runs over [psi_j, psi_j+1]
            if j >= 0:
                xd0 = X[j]
            else:
                xd0 = hist
            k1 = A @ x + Ad @ xd0
            D[k] = k1
            if j >= 0:
                xdh = _hermite(X[j], X[j + 1], D[j], D[j + 1], h, 0.5)
                xd1 = X[j + 1]
            else:
                xdh = hist
                xd1 = X[0] if j == -1 else hist
            k2 = A @ (x + 0.5 * h * k1) + Ad @ xdh
            k3 = A @ (x + 0.5 * h * k2) + Ad @ xdh
            k4 = A @ (x + h * k3) + Ad @ xd1
            X[k + 1] = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.abs(X[k + 1]) < DIVERGENCE_LIMIT):
                diverged = True
                n = k + 1
                break

    return TimeSeries(
        psi=psi[: n + 1], states=X[: n + 1], step=h, tau=tau, diverged=diverged,
        meta={"x0": x0.tolist(), "history": history, "psi_end": psi_end,
              "a": sys.gains.a, "b": sys.gains.b, "params": sys.params.to_dict()},
    )


def growth_rate(ts: TimeSeries, window: tuple[float, float]) -> float:
    """Exponential growth rate of ``||x||`` over ``window``.

    Fits a least-squares line to ``log ||x||`` at the local maxima of the norm
    (the envelope). Monotone stretches without interior maxima fall back to
    every sample in the window.
    """
    lo, hi = window
    mask = (ts.psi >= lo) & (ts.psi <= hi)
    if ts.diverged and ts.psi[-1] < hi:
        raise GrowthRateError("trajectory was truncated by the divergence guard inside the window")
    if np.count_nonzero(mask) < 3:
        raise GrowthRateError("window holds fewer than three samples")
    psi = ts.psi[mask]
    r = ts.norm[mask]
    if np.any(r == 0.0):
        raise GrowthRateError("trajectory vanishes inside the window")
    peaks = np.flatnonzero((r[1:-1] > r[:-2]) & (r[1:-1] >= r[2:])) + 1
    if len(peaks) >= 3:
        psi, r = psi[peaks], r[peaks]
    slope, _ = np.polyfit(psi, np.log(r), 1)
    return float(slope)
