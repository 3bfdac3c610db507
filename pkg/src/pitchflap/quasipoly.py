"""Characteristic quasipolynomial ``P(s) + Q(s) exp(-tau s)``.

Coefficient vectors are stored in ascending powers of ``s``:
``p[k]`` multiplies ``s**k``.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .rotor_model import DelaySystem

_NODES = np.arange(-2.0, 3.0)  # five distinct small integers
_AFFINE_RTOL = 1e-9


class RankError(ValueError):
    """The delayed matrix is not rank one, so ``det`` is not affine in ``e^{-tau s}``."""


def _horner(c: np.ndarray, s):
    acc = 0.0 * s
    for coef in c[::-1]:
        acc = acc * s + coef
    return acc


def _derivative(c: np.ndarray) -> np.ndarray:
    if len(c) <= 1:
        return np.zeros(1)
    return c[1:] * np.arange(1, len(c))


@dataclass(frozen=True)
class QuasiPolynomial:
    p: np.ndarray
    q: np.ndarray
    tau: float

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if p.shape != (5,):
            raise ValueError("p must hold 5 ascending coefficients")
        if q.ndim != 1 or len(q) > 4:
            raise ValueError("q must have degree at most 3")
        q = np.concatenate([q, np.zeros(4 - len(q))])
        if p[4] != 1.0:
            raise ValueError("p must be monic")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
            raise ValueError("coefficients must be finite")
        if not (np.isfinite(self.tau) and self.tau >= 0):
            raise ValueError("tau must be finite and non-negative")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "dp", _derivative(p))
        object.__setattr__(self, "dq", _derivative(q))

    @property
    def has_delay_term(self) -> bool:
        return bool(np.any(self.q != 0.0))

    def with_tau(self, tau: float) -> "QuasiPolynomial":
        return QuasiPolynomial(self.p, self.q, tau)

    def P(self, s):
        return _horner(self.p, s)

    def Q(self, s):
        return _horner(self.q, s)

    def dP(self, s):
        return _horner(self.dp, s)

    def dQ(self, s):
        return _horner(self.dq, s)

    def __call__(self, s):
        return eval_qp(self, s)

    def to_dict(self) -> dict:
        return {"p": self.p.tolist(), "q": self.q.tolist(), "tau": self.tau,
                "order": "ascending powers of s"}

    @classmethod
    def from_dict(cls, data: dict) -> "QuasiPolynomial":
        return cls(np.array(data["p"]), np.array(data["q"]), data["tau"])


def eval_qp(qp: QuasiPolynomial, s):
    """``P(s) + Q(s) exp(-tau s)``; accepts scalars or numpy arrays."""
    if np.isscalar(s):
        return complex(qp.P(s) + qp.Q(s) * cmath.exp(-qp.tau * s))
    s = np.asarray(s, dtype=complex)
    return qp.P(s) + qp.Q(s) * np.exp(-qp.tau * s)


def eval_s_derivative(qp: QuasiPolynomial, s):
    """``P'(s) + (Q'(s) - tau Q(s)) exp(-tau s)``."""
    if np.isscalar(s):
        z = cmath.exp(-qp.tau * s)
        return complex(qp.dP(s) + (qp.dQ(s) - qp.tau * qp.Q(s)) * z)
    s = np.asarray(s, dtype=complex)
    return qp.dP(s) + (qp.dQ(s) - qp.tau * qp.Q(s)) * np.exp(-qp.tau * s)


def char_det(A: np.ndarray, A_d: np.ndarray, s: complex, z: complex) -> complex:
    """Direct ``det(s I - A - z A_d)``."""
    n = A.shape[0]
    return complex(np.linalg.det(s * np.eye(n) - A - z * A_d))


def pq_from_matrices(A: np.ndarray, A_d: np.ndarray, tau: float = 0.0) -> QuasiPolynomial:
    """Interpolate ``P`` and ``Q`` from determinant samples.

    ``det(sI - A - z A_d) = P(s) + z Q(s)`` holds identically when ``A_d`` has
    rank at most one. Both polynomials are recovered from the determinant at
    ``z = 0`` and ``z = 1`` on five integer nodes; the affinity in ``z`` is then
    checked at ``z = 2``.
    """
    A = np.asarray(A, dtype=float)
    A_d = np.asarray(A_d, dtype=float)
    if A.shape != (4, 4) or A_d.shape != (4, 4):
        raise ValueError("expected 4x4 matrices")
    V = np.vander(_NODES, 5, increasing=True)
    d0 = np.array([char_det(A, A_d, s, 0.0).real for s in _NODES])
    d1 = np.array([char_det(A, A_d, s, 1.0).real for s in _NODES])
    d2 = np.array([char_det(A, A_d, s, 2.0).real for s in _NODES])
    p = np.linalg.solve(V, d0)
    q_full = np.linalg.solve(V, d1 - d0)

    scale = np.max(np.abs(np.concatenate([d0, d1, d2]))) + 1.0
    affine_err = np.max(np.abs(d2 - (d0 + 2.0 * (d1 - d0))))
    if affine_err > _AFFINE_RTOL * scale:
        raise RankError(f"determinant is not affine in the delay term (residual {affine_err:.3g})")
    if abs(p[4] - 1.0) > 1e-9 or abs(q_full[4]) > 1e-9 * scale:
        raise RankError("interpolated degrees inconsistent with a rank-one delay term")
    p[4] = 1.0
    return QuasiPolynomial(p, q_full[:4], tau)


def extract_pq(sys: DelaySystem) -> QuasiPolynomial:
    return pq_from_matrices(sys.A, sys.A_d, sys.tau)
