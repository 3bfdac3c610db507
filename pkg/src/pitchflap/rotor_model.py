"""Pitch-flap dynamics of a hovering rotor blade.

All quantities are azimuth-normalised: the independent variable is the
azimuth angle psi, frequencies are fractions of the shaft speed and delays
are measured in radians of azimuth. The state vector is
``x = [theta, beta, theta_dot, beta_dot]``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

#: Real parts inside this band are treated as lying on the imaginary axis.
EIG_TOL = 1e-9


@dataclass(frozen=True)
class RotorParams:
    """Physical constants of the blade model.

    Defaults are the fixed rotor values used in the pitch-flap literature
    (r_g = 4.1 m, c_h = 0.527 m, gamma = 6.95, lambda1 = 1.1) together with
    the flutter-unstable operating point sigma = 0.08, nu1^2 = 10.8.
    """

    r_g: float = 4.1
    c_h: float = 0.527
    gamma: float = 6.95
    lambda1: float = 1.1
    sigma: float = 0.08
    nu1_sq: float = 10.8
    act_gain: float = 3777.0

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"{f.name} must be a finite real number, got {value!r}")
        for name in ("r_g", "c_h", "gamma", "lambda1"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.nu1_sq < 0:
            raise ValueError("nu1_sq must be non-negative")

    @property
    def coupling(self) -> float:
        """The pitch-flap inertia coupling ``12 r_g sigma / c_h``."""
        return 12.0 * self.r_g * self.sigma / self.c_h

    def replace(self, **changes: float) -> "RotorParams":
        data = asdict(self)
        data.update(changes)
        return RotorParams(**data)

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class ControlGains:
    """Position (``a``) and rate (``b``) gains of the delayed flap feedback."""

    a: float = 6.75e-4
    b: float = 0.6e-4

    def __post_init__(self) -> None:
        for name in ("a", "b"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"gain {name} must be finite, got {value!r}")

    @property
    def is_zero(self) -> bool:
        return self.a == 0.0 and self.b == 0.0


@dataclass(frozen=True)
class StructuralMatrices:
    M: np.ndarray
    C: np.ndarray
    K: np.ndarray

    @property
    def M_inv(self) -> np.ndarray:
        # M = [[1, m], [0, 1]] has unit determinant, so its inverse is exact.
        return np.array([[1.0, -self.M[0, 1]], [0.0, 1.0]])


@dataclass(frozen=True)
class DelaySystem:
    """Closed loop ``x'(psi) = A x(psi) + A_d x(psi - tau)``."""

    A: np.ndarray
    A_d: np.ndarray
    tau: float
    gains: ControlGains
    params: RotorParams
    E: np.ndarray = field(repr=False)
    F: np.ndarray = field(repr=False)

    @property
    def A_total(self) -> np.ndarray:
        """Delay-free matrix ``A + A_d`` (equal to the uncontrolled ``A_u``)."""
        return self.A + self.A_d

    def with_tau(self, tau: float) -> "DelaySystem":
        return build_delay_system(self.params, self.gains, tau)


class RegionLabel(str, enum.Enum):
    STABLE = "Stable"
    DIVERGENCE_ONLY = "DivergenceOnly"
    FLUTTER_ONLY = "FlutterOnly"
    BOTH = "Both"


@dataclass(frozen=True)
class Classification:
    label: RegionLabel
    n_divergent: int
    n_flutter_pairs: int
    marginal: bool
    eigenvalues: tuple[complex, ...]


def build_matrices(params: RotorParams) -> StructuralMatrices:
    m = params.coupling
    g8 = params.gamma / 8.0
    M = np.array([[1.0, -m], [0.0, 1.0]])
    C = np.array([[g8, 0.0], [0.0, g8]])
    K = np.array([[params.nu1_sq, -m], [-g8, params.lambda1**2]])
    return StructuralMatrices(M, C, K)


def _companion(lower_k: np.ndarray, lower_c: np.ndarray) -> np.ndarray:
    A = np.zeros((4, 4))
    A[0, 2] = A[1, 3] = 1.0
    A[2:, :2] = lower_k
    A[2:, 2:] = lower_c
    return A


def build_uncontrolled(params: RotorParams) -> np.ndarray:
    """State matrix ``A_u = [[0, I], [-M^-1 K, -M^-1 C]]``."""
    mats = build_matrices(params)
    Mi = mats.M_inv
    return _companion(-Mi @ mats.K, -Mi @ mats.C)


def build_delay_system(params: RotorParams, gains: ControlGains, tau: float) -> DelaySystem:
    """Closed loop under ``u = a (beta - beta_tau) + b (beta' - beta'_tau)``.

    The actuation enters the pitch equation through ``act_gain * nu1^2``, so
    the feedback matrices ``E`` and ``F`` each carry one non-zero entry and the
    delayed matrix ``A_d`` has rank at most one.
    """
    if not math.isfinite(tau) or tau < 0:
        raise ValueError(f"delay must be a finite non-negative number, got {tau!r}")
    mats = build_matrices(params)
    Mi = mats.M_inv
    k = params.act_gain * params.nu1_sq
    E = np.zeros((2, 2))
    F = np.zeros((2, 2))
    E[0, 1] = k * gains.a
    F[0, 1] = k * gains.b
    A = _companion(-Mi @ mats.K + E, -Mi @ mats.C + F)
    A_d = np.zeros((4, 4))
    A_d[2:, :2] = -E
    A_d[2:, 2:] = -F
    return DelaySystem(A=A, A_d=A_d, tau=float(tau), gains=gains, params=params, E=E, F=F)


def divergence_boundary(sigma: float, params: RotorParams) -> float:
    """Torsional stiffness ``nu1^2`` at which ``det K`` vanishes for ``sigma``."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    return 3.0 * params.gamma * params.r_g * sigma / (2.0 * params.c_h * params.lambda1**2)


def flutter_boundary(omega_f: float, params: RotorParams) -> tuple[float, float]:
    """Point ``(nu1^2, sigma)`` where ``A_u`` has eigenvalues ``+-j omega_f``.

    Raises
    ------
    ValueError
        If ``omega_f`` is not positive or sits on the pole ``omega_f = 1``.
    """
    if not omega_f > 0:
        raise ValueError("crossing frequency must be positive")
    w2 = omega_f * omega_f
    if abs(w2 - 1.0) < 1e-12:
        raise ValueError("flutter boundary has a pole at omega_f = 1")
    l2 = params.lambda1**2
    g = params.gamma
    nu1_sq = 2.0 * w2 - l2
    num = params.c_h * (g * g * w2 + 64.0 * w2 * w2 - 128.0 * w2 * l2 + 64.0 * l2 * l2)
    sigma = num / (96.0 * params.r_g * g * (w2 - 1.0))
    return nu1_sq, sigma


def classify_eigenvalues(eigs: np.ndarray, tol: float = EIG_TOL) -> tuple[int, int, bool]:
    """Count unstable real roots and unstable complex pairs of a real matrix."""
    n_real = 0
    n_pairs2 = 0
    marginal = False
    for lam in eigs:
        if abs(lam.real) <= tol:
            marginal = True
            continue
        if lam.real < 0:
            continue
        if abs(lam.imag) <= tol * (1.0 + abs(lam)):
            n_real += 1
        else:
            n_pairs2 += 1
    return n_real, n_pairs2 // 2, marginal


def classify_uncontrolled(params: RotorParams) -> Classification:
    eigs = np.linalg.eigvals(build_uncontrolled(params))
    n_div, n_flut, marginal = classify_eigenvalues(eigs)
    if n_div and n_flut:
        label = RegionLabel.BOTH
    elif n_div:
        label = RegionLabel.DIVERGENCE_ONLY
    elif n_flut:
        label = RegionLabel.FLUTTER_ONLY
    else:
        label = RegionLabel.STABLE
    ordered = tuple(sorted((complex(e) for e in eigs), key=lambda z: (z.real, z.imag)))
    return Classification(label, n_div, n_flut, marginal, ordered)


def flutter_residual(omega_f: float, nu1_sq: float, sigma: float, params: RotorParams) -> float:
    """Distance from ``j omega_f`` to the nearest eigenvalue of ``A_u``.

    ``sigma`` may be negative here: the check is about the algebraic locus,
    not physical admissibility.
    """
    m = 12.0 * params.r_g * sigma / params.c_h
    g8 = params.gamma / 8.0
    K = np.array([[nu1_sq, -m], [-g8, params.lambda1**2]])
    Mi = np.array([[1.0, m], [0.0, 1.0]])
    A_u = _companion(-Mi @ K, -Mi @ np.diag([g8, g8]))
    eigs = np.linalg.eigvals(A_u)
    return float(np.min(np.abs(eigs - 1j * omega_f)))


@dataclass
class BoundaryChart:
    divergence: list[tuple[float, float]]
    flutter: list[tuple[float, float, float]]
    skipped: list[float]

    def divergence_rows(self) -> list[dict[str, float]]:
        return [{"sigma": s, "nu1_sq": n} for s, n in self.divergence]

    def flutter_rows(self) -> list[dict[str, float]]:
        return [{"omega_f": w, "nu1_sq": n, "sigma": s} for w, n, s in self.flutter]


def boundary_chart(
    sigma_range: tuple[float, float] | None,
    omega_f_range: tuple[float, float] | None,
    n_points: int,
    params: RotorParams | None = None,
) -> BoundaryChart:
    """Tabulate the divergence line and the flutter curve.

    Flutter points at the ``omega_f = 1`` pole are skipped, as are points with
    negative ``sigma`` or ``nu1^2`` (outside the physical parameter plane).
    """
    params = params or RotorParams()
    div: list[tuple[float, float]] = []
    flut: list[tuple[float, float, float]] = []
    skipped: list[float] = []
    if n_points <= 0:
        return BoundaryChart(div, flut, skipped)
    if sigma_range is not None:
        for s in np.linspace(sigma_range[0], sigma_range[1], n_points):
            div.append((float(s), divergence_boundary(float(s), params)))
    if omega_f_range is not None:
        for w in np.linspace(omega_f_range[0], omega_f_range[1], n_points):
            w = float(w)
            try:
                nu, s = flutter_boundary(w, params)
            except ValueError:
                skipped.append(w)
                continue
            if nu < 0 or s < 0:
                skipped.append(w)
                continue
            flut.append((w, nu, s))
    return BoundaryChart(div, flut, skipped)
