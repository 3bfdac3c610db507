"""Cluster treatment of characteristic roots for one delay.

Imaginary-axis roots ``s = j omega_c`` of ``P(s) + Q(s) e^{-tau s}`` can only
occur at finitely many frequencies, each one recurring at delays spaced by
``2 pi / omega_c``. The direction in which a root crosses (its root tendency)
is the same for every member of such a family, so the number of unstable
roots as a function of the delay follows from a finite table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .quasipoly import (
    QuasiPolynomial,
    char_det,
    eval_s_derivative,
    extract_pq,
)
from .rotor_model import (
    EIG_TOL,
    ControlGains,
    DelaySystem,
    RotorParams,
    build_delay_system,
)

ETA_MIN = 1e-9
REAL_TOL = 1e-9
DOUBLE_ROOT_RTOL = 1e-6
RT_TOL = 1e-10
CROSSING_RTOL = 1e-8
TIE_TOL = 1e-9


class CrossingError(ValueError):
    pass


@dataclass(frozen=True)
class EtaRoots:
    coeffs: np.ndarray  # ascending, monic quartic in eta = omega^2
    roots: np.ndarray
    omegas: list[float]
    degenerate: bool


@dataclass(frozen=True)
class Crossing:
    omega_c: float
    tau_core: float
    rt: int
    delays: tuple[float, ...] = ()
    residuals: tuple[float, ...] = ()
    degenerate: bool = False

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega_c


@dataclass(frozen=True)
class Breakpoint:
    tau: float
    omega_c: float
    k: int
    rt: int
    nu_after: int


@dataclass
class StabilityTable:
    nu_zero: int
    tau_max: float
    breakpoints: list[Breakpoint]
    crossings: list[Crossing]
    certified: bool = True
    notes: list[str] = field(default_factory=list)

    def nu_at(self, tau: float) -> int:
        """Unstable-root count at a delay that is not itself a breakpoint."""
        nu = self.nu_zero
        for bp in self.breakpoints:
            if bp.tau < tau:
                nu = bp.nu_after
            else:
                break
        return nu

    def intervals(self) -> list[tuple[float, float, int]]:
        """Consecutive ``(tau_lo, tau_hi, nu)`` pieces covering ``[0, tau_max]``."""
        out = []
        lo, nu = 0.0, self.nu_zero
        for bp in self.breakpoints:
            if bp.tau > lo:
                out.append((lo, bp.tau, nu))
            lo, nu = bp.tau, bp.nu_after
        if self.tau_max > lo:
            out.append((lo, self.tau_max, nu))
        return out

    @property
    def stable_intervals(self) -> list[tuple[float, float]]:
        merged: list[tuple[float, float]] = []
        for lo, hi, nu in self.intervals():
            if nu != 0:
                continue
            if merged and merged[-1][1] == lo:
                merged[-1] = (merged[-1][0], hi)
            else:
                merged.append((lo, hi))
        return merged


def _square(c: np.ndarray) -> np.ndarray:
    return np.convolve(c, c)


def eta_polynomial(qp: QuasiPolynomial) -> np.ndarray:
    """Ascending coefficients of ``|P(j w)|^2 - |Q(j w)|^2`` in ``eta = w^2``.

    With ``P(j w) = Pe(eta) + j w Po(eta)`` the magnitude is
    ``Pe^2 + eta Po^2``; the same split is applied to ``Q``.
    """

    def parts(c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        even = np.array([c[k] * (-1) ** (k // 2) for k in range(0, len(c), 2)])
        odd = np.array([c[k] * (-1) ** (k // 2) for k in range(1, len(c), 2)])
        return even, odd

    def mag2(c: np.ndarray) -> np.ndarray:
        even, odd = parts(c)
        out = np.zeros(5)
        e2 = _square(even)
        out[: len(e2)] += e2
        if len(odd):
            o2 = _square(odd)
            out[1 : 1 + len(o2)] += o2
        return out

    return mag2(qp.p) - mag2(qp.q)


def _companion_roots(coeffs: np.ndarray) -> np.ndarray:
    """Roots of a monic polynomial (ascending coefficients) via its companion matrix."""
    n = len(coeffs) - 1
    C = np.zeros((n, n))
    C[1:, :-1] = np.eye(n - 1)
    C[:, -1] = -coeffs[:-1] / coeffs[-1]
    return np.linalg.eigvals(C)


def eta_roots(qp: QuasiPolynomial) -> EtaRoots:
    coeffs = eta_polynomial(qp)
    if not qp.has_delay_term:
        # |P(jw)|^2 = 0 only on the imaginary-axis roots of P; the eta-quartic
        # then has double roots, so read them off P directly.
        proots = _companion_roots(qp.p)
        on_axis = [abs(r.imag) for r in proots
                   if abs(r.real) <= REAL_TOL * (1.0 + abs(r)) and r.imag > ETA_MIN]
        omegas = sorted(set(round(w, 12) for w in on_axis), reverse=True)
        return EtaRoots(coeffs, np.array([w * w for w in omegas]), omegas, False)
    roots = _companion_roots(coeffs)
    real = sorted(
        r.real for r in roots if abs(r.imag) < REAL_TOL * (1.0 + abs(r))
    )
    admissible = [r for r in real if r > ETA_MIN]
    span = max((abs(r) for r in roots), default=0.0)
    degenerate = False
    for i in range(len(roots)):
        for j in range(i + 1, len(roots)):
            if abs(roots[i] - roots[j]) < DOUBLE_ROOT_RTOL * max(span, 1e-300):
                degenerate = True
    omegas = sorted((math.sqrt(r) for r in admissible), reverse=True)
    return EtaRoots(coeffs, roots, omegas, degenerate)


def crossing_frequencies(qp: QuasiPolynomial) -> list[float]:
    """Positive frequencies at which a root can sit on the imaginary axis.

    Sorted in descending order; at most four.
    """
    return eta_roots(qp).omegas


def constant_term_c0(qp: QuasiPolynomial) -> float:
    """Constant term ``P(0)^2 - Q(0)^2`` of the eta-quartic."""
    return float(qp.p[0] ** 2 - qp.q[0] ** 2)


def c0_closed_form(params: RotorParams, a: float) -> float:
    """Closed form of ``c0`` from the factorisation ``(P0 - Q0)(P0 + Q0)``.

    ``P0 + Q0 = det K`` and ``P0 = det K - kappa`` with
    ``kappa = act_gain gamma nu1^2 a / 8``.
    """
    l2 = params.lambda1**2
    g = params.gamma
    grs = g * params.r_g * params.sigma / params.c_h
    nu2 = params.nu1_sq
    k1 = params.act_gain / 4.0  # 944.25 for the default actuator
    k2 = 3.0 * params.act_gain / 8.0  # 1416.375
    return l2 * (l2 - k1 * g * a) * nu2**2 + grs * (-3.0 * l2 + k2 * g * a) * nu2 + 2.25 * grs**2


def c0_alternate_form(params: RotorParams, a: float) -> float:
    """The alternative closed form with ``+3 lambda1^2 - 1416 gamma a`` in the middle term."""
    l2 = params.lambda1**2
    g = params.gamma
    grs = g * params.r_g * params.sigma / params.c_h
    nu2 = params.nu1_sq
    return l2 * (l2 - 944.0 * g * a) * nu2**2 + grs * (3.0 * l2 - 1416.0 * g * a) * nu2 + 2.25 * grs**2


def c0_report(params: RotorParams, gains: ControlGains) -> dict[str, float]:
    qp = extract_pq(build_delay_system(params, gains, 0.0))
    c0 = constant_term_c0(qp)
    factored = c0_closed_form(params, gains.a)
    alternate = c0_alternate_form(params, gains.a)
    return {
        "c0": c0,
        "c0_factored_closed_form": factored,
        "c0_alternate_closed_form": alternate,
        "diff_factored": c0 - factored,
        "diff_alternate": c0 - alternate,
        "P0": float(qp.p[0]),
        "Q0": float(qp.q[0]),
    }


def crossing_delays(omega_c: float, qp: QuasiPolynomial, tau_max: float = 0.0) -> Crossing:
    """Delays at which ``j omega_c`` is a root, up to ``tau_max``.

    The core delay is folded into ``[0, 2 pi / omega_c)``; the root tendency
    is filled in as well.
    """
    if not omega_c > 0:
        raise CrossingError("crossing frequency must be positive")
    s = 1j * omega_c
    Pv = complex(qp.P(s))
    Qv = complex(qp.Q(s))
    if abs(Qv) <= 1e-12:
        raise CrossingError(f"Q(j{omega_c:g}) vanishes: no delay-induced crossing")
    period = 2.0 * math.pi / omega_c
    tau_core = ((np.angle(Qv) - np.angle(Pv) + math.pi) / omega_c) % period
    if tau_core >= period:  # fmod rounding
        tau_core -= period
    delays = [tau_core]
    while delays[-1] + period <= tau_max:
        delays.append(tau_core + len(delays) * period)
    scale = max(abs(Pv), 1e-300)
    residuals = []
    for tau in delays:
        r = abs(Pv + Qv * np.exp(-s * tau)) / scale
        if r >= CROSSING_RTOL:
            raise CrossingError(
                f"crossing check failed at omega={omega_c:g}, tau={tau:g}: residual {r:.3g}"
            )
        residuals.append(float(r))
    rt = root_tendency(omega_c, tau_core, qp)
    return Crossing(
        omega_c=float(omega_c),
        tau_core=float(tau_core),
        rt=rt,
        delays=tuple(float(t) for t in delays),
        residuals=tuple(residuals),
        degenerate=(rt == 0),
    )


def root_sensitivity(omega_c: float, tau: float, qp: QuasiPolynomial) -> complex:
    """``ds/dtau`` at the imaginary root ``j omega_c`` for delay ``tau``."""
    s = 1j * omega_c
    q_tau = qp.with_tau(tau)
    denom = eval_s_derivative(q_tau, s)
    if abs(denom) < 1e-14 * (1.0 + abs(qp.dP(s))):
        raise CrossingError(f"non-simple root at j{omega_c:g}, tau={tau:g}")
    return complex(s * qp.Q(s) * np.exp(-s * tau) / denom)


def root_tendency(omega_c: float, tau_c: float, qp: QuasiPolynomial) -> int:
    re = root_sensitivity(omega_c, tau_c, qp).real
    if abs(re) < RT_TOL:
        return 0
    return 1 if re > 0 else -1


def unstable_count(matrix: np.ndarray, tol: float = EIG_TOL) -> int:
    return int(np.sum(np.linalg.eigvals(matrix).real > tol))


def stability_table(sys: DelaySystem, tau_max: float) -> StabilityTable:
    """Unstable-root count versus delay on ``[0, tau_max]``."""
    if not tau_max > 0:
        raise ValueError("tau_max must be positive")
    qp = extract_pq(sys)
    nu0 = unstable_count(sys.A_total)
    notes: list[str] = []
    certified = True
    crossings: list[Crossing] = []
    if qp.has_delay_term:
        er = eta_roots(qp)
        if er.degenerate:
            certified = False
            notes.append("eta-quartic has a near-double root")
        for w in er.omegas:
            c = crossing_delays(w, qp, tau_max)
            if c.degenerate:
                certified = False
                notes.append(f"tangential crossing at omega={w:.6g}")
            crossings.append(c)
        if any(abs(p) <= EIG_TOL for p in np.linalg.eigvals(sys.A_total).real):
            certified = False
            notes.append("delay-free system has a root on the imaginary axis")
        c0 = constant_term_c0(qp)
        if abs(c0) <= 1e-12 * (qp.p[0] ** 2 + 1.0):
            certified = False
            notes.append("c0 vanishes: a root may cross at the origin")

    events = []
    for c in crossings:
        for k, tau in enumerate(c.delays):
            if tau <= tau_max:
                events.append((tau, -c.omega_c, k, c))
    events.sort(key=lambda e: (e[0], e[1]))
    for e0, e1 in zip(events, events[1:]):
        if e1[0] - e0[0] < TIE_TOL:
            certified = False
            notes.append(f"simultaneous crossings near tau={e0[0]:.9g}")

    breakpoints = []
    nu = nu0
    for tau, _, k, c in events:
        nu += 2 * c.rt
        if nu < 0:
            certified = False
            notes.append(f"negative unstable count after tau={tau:.6g}")
        breakpoints.append(Breakpoint(tau=tau, omega_c=c.omega_c, k=k, rt=c.rt, nu_after=nu))
    return StabilityTable(nu0, float(tau_max), breakpoints, crossings, certified, notes)


def stability_table_for(params: RotorParams, gains: ControlGains, tau_max: float) -> StabilityTable:
    return stability_table(build_delay_system(params, gains, 0.0), tau_max)


@dataclass
class OriginCheck:
    sigma: np.ndarray
    nu1_sq: np.ndarray
    a: np.ndarray
    c0: np.ndarray  # shape (len(sigma), len(nu1_sq), len(a))
    c0_det: np.ndarray
    eta_zero_root: np.ndarray
    zero_mask: np.ndarray
    sign_changes: list[dict]
    equivalence_holds: bool


def _c0_by_determinant(params: RotorParams, gains: ControlGains) -> float:
    """``c0`` from determinants at the origin only, independent of the interpolation."""
    sys = build_delay_system(params, gains, 0.0)
    p0 = char_det(sys.A, sys.A_d, 0.0, 0.0).real
    pq0 = char_det(sys.A, sys.A_d, 0.0, 1.0).real
    q0 = pq0 - p0
    return p0 * p0 - q0 * q0


def divergence_origin_check(
    sigmas,
    nu1_sqs,
    a_values,
    params: RotorParams | None = None,
    b: float = 0.0,
    zero_tol: float = 1e-10,
) -> OriginCheck:
    """Evaluate ``c0`` on a grid and locate its zero set.

    An eta-quartic root at zero (a crossing through the origin) exists
    exactly when ``c0`` vanishes; that equivalence is checked pointwise.
    Sign changes between neighbouring grid points along ``nu1^2`` are listed
    as bracketed zero-level crossings.
    """
    params = params or RotorParams()
    sigmas = np.asarray(sigmas, dtype=float)
    nu1_sqs = np.asarray(nu1_sqs, dtype=float)
    a_values = np.asarray(a_values, dtype=float)
    shape = (len(sigmas), len(nu1_sqs), len(a_values))
    c0 = np.zeros(shape)
    c0_det = np.zeros(shape)
    eta0 = np.zeros(shape, dtype=bool)
    zero = np.zeros(shape, dtype=bool)
    holds = True
    for i, s in enumerate(sigmas):
        for j, n in enumerate(nu1_sqs):
            p = params.replace(sigma=float(s), nu1_sq=float(n))
            for k, a in enumerate(a_values):
                g = ControlGains(float(a), b)
                qp = extract_pq(build_delay_system(p, g, 0.0))
                c = constant_term_c0(qp)
                scale = qp.p[0] ** 2 + qp.q[0] ** 2 + 1.0
                c0[i, j, k] = c
                c0_det[i, j, k] = _c0_by_determinant(p, g)
                zero[i, j, k] = abs(c) <= zero_tol * scale
                roots = _companion_roots(eta_polynomial(qp))
                eta0[i, j, k] = bool(np.min(np.abs(roots)) <= 1e-6 * (1.0 + np.max(np.abs(roots))))
                if zero[i, j, k] and not eta0[i, j, k]:
                    holds = False
                if eta0[i, j, k] and abs(c) > 1e-4 * scale:
                    holds = False
    changes = []
    for i in range(shape[0]):
        for k in range(shape[2]):
            for j in range(shape[1] - 1):
                if c0[i, j, k] * c0[i, j + 1, k] < 0:
                    changes.append(
                        {"sigma": float(sigmas[i]), "a": float(a_values[k]),
                         "nu1_sq_lo": float(nu1_sqs[j]), "nu1_sq_hi": float(nu1_sqs[j + 1])}
                    )
    return OriginCheck(sigmas, nu1_sqs, a_values, c0, c0_det, eta0, zero, changes, holds)
