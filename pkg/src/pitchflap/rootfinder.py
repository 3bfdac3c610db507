"""Characteristic roots of a quasipolynomial inside a rectangle.

Roots are located where the zero-level curves of ``Re f`` and ``Im f``
intersect on a sampling grid, then polished with damped Newton steps. The
argument principle supplies an independent root count used to certify that
nothing was missed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .quasipoly import QuasiPolynomial, eval_qp, eval_s_derivative

NEWTON_MAX_ITER = 50
NEWTON_TOL = 1e-12
ACCEPT_TOL = 1e-9
DEDUP_TOL = 1e-6
MULTIPLE_TOL = 1e-4
EDGE_CAP = 2**16
BOUNDARY_PERTURB = 1e-6


class BoundaryRootError(RuntimeError):
    """A root lies on (or numerically at) the contour used for counting."""


@dataclass(frozen=True)
class Region:
    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self) -> None:
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError(f"degenerate region {self}")

    @property
    def width(self) -> float:
        return self.re_max - self.re_min

    @property
    def height(self) -> float:
        return self.im_max - self.im_min

    def contains(self, s: complex, tol: float = 0.0) -> bool:
        return (self.re_min - tol <= s.real <= self.re_max + tol
                and self.im_min - tol <= s.imag <= self.im_max + tol)

    def expanded(self, d: float) -> "Region":
        return Region(self.re_min - d, self.re_max + d, self.im_min - d, self.im_max + d)

    def mirrored(self) -> "Region":
        """Smallest region symmetric about the real axis containing this one."""
        h = max(abs(self.im_min), abs(self.im_max))
        return Region(self.re_min, self.re_max, -h, h)

    def as_list(self) -> list[float]:
        return [self.re_min, self.re_max, self.im_min, self.im_max]


#: Search window for the rotor problem; wide enough to hold the real
#: unstable root that sits right of the narrower classical window.
DEFAULT_REGION = Region(-2.0, 1.5, 0.0, 5.0)
DEFAULT_STEP = 0.01


@dataclass(frozen=True)
class Root:
    value: complex
    residual: float
    multiplicity: int = 1

    @property
    def re(self) -> float:
        return self.value.real

    @property
    def im(self) -> float:
        return self.value.imag


@dataclass
class RootSet:
    roots: list[Root]
    region: Region
    certified_count: int | None
    grid_step: float
    ambiguous_cells: int = 0
    failed_seeds: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.roots], dtype=complex)

    @property
    def found_count(self) -> int:
        return sum(r.multiplicity for r in self.roots)

    @property
    def certified(self) -> bool:
        return self.certified_count is not None and self.certified_count == self.found_count


def _scale(qp: QuasiPolynomial, s: complex) -> float:
    return 1.0 + abs(qp.P(s))


# ---------------------------------------------------------------- zero curves

@dataclass
class ZeroCurves:
    """Points where ``Re f`` / ``Im f`` change sign along grid edges."""

    re_points: np.ndarray
    im_points: np.ndarray


def _sample_grid(qp: QuasiPolynomial, region: Region, step: float):
    nx = max(int(math.ceil(region.width / step)), 1)
    ny = max(int(math.ceil(region.height / step)), 1)
    xs = np.linspace(region.re_min, region.re_max, nx + 1)
    ys = np.linspace(region.im_min, region.im_max, ny + 1)
    S = xs[None, :] + 1j * ys[:, None]
    F = eval_qp(qp, S)
    if region.im_min <= 0.0 <= region.im_max:
        # f is real on the real axis; drop rounding noise in Im f there.
        row = np.flatnonzero(ys == 0.0)
        F.imag[row, :] = 0.0
    return xs, ys, F


def _edge_points(V: np.ndarray, xs: np.ndarray, ys: np.ndarray):
    """Linear-interpolated sign changes of V on horizontal and vertical edges.

    Returns dicts keyed by edge index so a cell can look its edges up.
    """
    h = V[:, :-1] * V[:, 1:] < 0  # horizontal edge (j, i)-(j, i+1)
    v = V[:-1, :] * V[1:, :] < 0  # vertical edge (j, i)-(j+1, i)
    hp = {}
    for j, i in zip(*np.nonzero(h)):
        t = V[j, i] / (V[j, i] - V[j, i + 1])
        hp[(j, i)] = complex(xs[i] + t * (xs[i + 1] - xs[i]), ys[j])
    vp = {}
    for j, i in zip(*np.nonzero(v)):
        t = V[j, i] / (V[j, i] - V[j + 1, i])
        vp[(j, i)] = complex(xs[i], ys[j] + t * (ys[j + 1] - ys[j]))
    return hp, vp


def zero_curves(qp: QuasiPolynomial, region: Region, grid_step: float = DEFAULT_STEP) -> ZeroCurves:
    xs, ys, F = _sample_grid(qp, region, grid_step)
    out = []
    for V in (F.real, F.imag):
        hp, vp = _edge_points(V, xs, ys)
        pts = sorted(list(hp.values()) + list(vp.values()), key=lambda z: (z.real, z.imag))
        out.append(np.array(pts, dtype=complex))
    return ZeroCurves(out[0], out[1])


def _cell_change(V: np.ndarray) -> np.ndarray:
    c = np.stack([V[:-1, :-1], V[:-1, 1:], V[1:, :-1], V[1:, 1:]])
    return np.any(c > 0, axis=0) & np.any(c < 0, axis=0)


def _cell_crossings(pts_h, pts_v, j, i):
    out = []
    for key, table in (((j, i), pts_h), ((j + 1, i), pts_h), ((j, i), pts_v), ((j, i + 1), pts_v)):
        p = table.get(key)
        if p is not None:
            out.append(p)
    return out


def _segment_intersection(a0, a1, b0, b1):
    da, db = a1 - a0, b1 - b0
    den = da.real * db.imag - da.imag * db.real
    if den == 0.0:
        return None
    w = b0 - a0
    t = (w.real * db.imag - w.imag * db.real) / den
    return a0 + t * da


def _seeds(qp: QuasiPolynomial, region: Region, step: float) -> tuple[list[complex], int]:
    xs, ys, F = _sample_grid(qp, region, step)
    R, I = F.real, F.imag
    both = _cell_change(R) & _cell_change(I)
    cells = list(zip(*np.nonzero(both)))
    if not cells:
        return [], 0
    rh, rv = _edge_points(R, xs, ys)
    ih, iv = _edge_points(I, xs, ys)
    seeds = []
    ambiguous = 0
    for j, i in cells:
        center = complex(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1]))
        rc = _cell_crossings(rh, rv, j, i)
        ic = _cell_crossings(ih, iv, j, i)
        if len(rc) == 2 and len(ic) == 2:
            p = _segment_intersection(rc[0], rc[1], ic[0], ic[1])
            if p is not None and abs(p - center) <= 1.5 * step:
                seeds.append(p)
                continue
        else:
            ambiguous += 1
        seeds.append(center)
    return seeds, ambiguous


def _real_axis_seeds(qp: QuasiPolynomial, region: Region, step: float) -> list[complex]:
    """Bracketed real roots; f is real on the real axis so sign changes suffice."""
    if not (region.im_min <= 0.0 <= region.im_max):
        return []
    n = max(int(math.ceil(region.width / (0.25 * step))), 4)
    x = np.linspace(region.re_min, region.re_max, n + 1)
    fx = eval_qp(qp, x.astype(complex)).real
    seeds = []
    for k in np.flatnonzero(fx[:-1] * fx[1:] <= 0):
        lo, hi = x[k], x[k + 1]
        flo = fx[k]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            fm = eval_qp(qp, complex(mid)).real
            if fm == 0.0:
                lo = hi = mid
                break
            if (fm < 0) == (flo < 0):
                lo, flo = mid, fm
            else:
                hi = mid
        seeds.append(complex(0.5 * (lo + hi), 0.0))
    return seeds


def newton_refine(qp: QuasiPolynomial, s0: complex, region: Region | None = None,
                  max_iter: int = NEWTON_MAX_ITER) -> tuple[complex, bool]:
    """Damped Newton iteration; returns ``(root, converged)``."""
    s = complex(s0)
    fs = eval_qp(qp, s)
    for _ in range(max_iter):
        if abs(fs) < NEWTON_TOL * _scale(qp, s):
            return s, True
        d = eval_s_derivative(qp, s)
        if d == 0:
            return s, False
        step = fs / d
        lam = 1.0
        for _ in range(30):
            trial = s - lam * step
            ft = eval_qp(qp, trial)
            if abs(ft) < abs(fs):
                break
            lam *= 0.5
        else:
            return s, abs(fs) < ACCEPT_TOL * _scale(qp, s)
        s, fs = trial, ft
        if s.imag != 0.0 and abs(s.imag) < 1e-14 * (1.0 + abs(s)):
            s = complex(s.real, 0.0)
            fs = eval_qp(qp, s)
        if region is not None and not region.contains(s, tol=0.05 * max(region.width, region.height)):
            return s, False
    return s, abs(fs) < ACCEPT_TOL * _scale(qp, s)


def _cluster_box(s: complex) -> Region:
    h = 1e-3 * (1.0 + abs(s))
    return Region(s.real - h, s.real + h, s.imag - h, s.imag + h)


def _multiplicity(qp: QuasiPolynomial, s: complex) -> tuple[complex, int]:
    """Multiplicity of the root near ``s`` and a polished location.

    Plain Newton stalls about ``sqrt(eps)`` away from a multiple root, where
    ``|f'|`` is small but not tiny; a local argument-principle count decides,
    then ``m``-fold Newton steps restore quadratic convergence.
    """
    d = eval_s_derivative(qp, s)
    if abs(d) >= MULTIPLE_TOL * _scale(qp, s):
        return s, 1
    try:
        m = count_roots(qp, _cluster_box(s))
    except BoundaryRootError:
        return s, 1
    if m <= 1:
        return s, 1
    for _ in range(20):
        d = eval_s_derivative(qp, s)
        if d == 0:
            break
        step = m * eval_qp(qp, s) / d
        s = s - step
        if abs(step) < 1e-15 * (1.0 + abs(s)):
            break
    return s, m


def find_roots(qp: QuasiPolynomial, region: Region, grid_step: float = DEFAULT_STEP,
               certify: bool = True, refine: int = 2) -> RootSet:
    """Roots of ``qp`` in the closed rectangle ``region``.

    ``refine`` extra passes with half the grid step are made while the
    argument-principle count disagrees with the roots found.
    """
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")
    limit = min(region.width, region.height) / 10.0
    if grid_step > limit:
        raise ValueError(f"grid_step {grid_step} too coarse for region (max {limit:.3g})")

    count = None
    notes: list[str] = []
    if certify:
        try:
            count = count_roots(qp, region)
        except BoundaryRootError as exc:
            notes.append(str(exc))

    found: list[Root] = []
    step = grid_step
    ambiguous = failed = 0
    for attempt in range(refine + 1):
        seeds, ambiguous = _seeds(qp, region, step)
        seeds += _real_axis_seeds(qp, region, step)
        for seed in seeds:
            s, ok = newton_refine(qp, seed, region)
            if not ok:
                failed += 1
                continue
            if not region.contains(s, tol=1e-9 * (1.0 + abs(s))):
                continue
            if any(abs(s - r.value) < DEDUP_TOL or
                   (r.multiplicity > 1 and _cluster_box(r.value).contains(s)) for r in found):
                continue
            s, mult = _multiplicity(qp, s)
            if mult > 1 and any(_cluster_box(s).contains(r.value) for r in found):
                continue
            res = abs(eval_qp(qp, s))
            if res >= ACCEPT_TOL * _scale(qp, s):
                failed += 1
                continue
            found.append(Root(s, res, mult))
        if count is None or sum(r.multiplicity for r in found) >= count:
            break
        if attempt < refine:
            step *= 0.5
            notes.append(f"count mismatch; refining grid to {step:g}")
    found.sort(key=lambda r: (r.re, r.im))
    rs = RootSet(found, region, count, step, ambiguous, failed, notes)
    if certify and not rs.certified:
        rs.notes.append(f"found {rs.found_count} roots, argument principle gives {count}")
    return rs


# ----------------------------------------------------------- argument principle

def _edge_winding(qp: QuasiPolynomial, a: complex, b: complex) -> float:
    """Total argument change of f along the segment a -> b."""
    # resolve the delay term's oscillation with >= 16 samples per period
    n = 65 + int(math.ceil(16.0 * qp.tau * abs(b - a) / (2.0 * math.pi)))
    t = np.linspace(0.0, 1.0, n)
    f = eval_qp(qp, a + t * (b - a))
    while True:
        mags = np.abs(f)
        pts = a + t * (b - a)
        scale = 1.0 + np.abs(qp.P(pts))
        if np.any(mags < 1e-13 * scale):
            k = int(np.argmin(mags / scale))
            raise BoundaryRootError(f"root on contour near {complex(pts[k]):.6g}")
        dphi = np.angle(f[1:] / f[:-1])
        bad = np.abs(dphi) >= 0.5 * math.pi
        if not np.any(bad):
            return float(np.sum(dphi))
        if len(t) >= EDGE_CAP:
            raise BoundaryRootError(
                f"argument not resolved on edge {a:.6g} -> {b:.6g} with {len(t)} samples"
            )
        idx = np.flatnonzero(bad)
        tm = 0.5 * (t[idx] + t[idx + 1])
        fm = eval_qp(qp, a + tm * (b - a))
        t = np.insert(t, idx + 1, tm)
        f = np.insert(f, idx + 1, fm)


def _winding(qp: QuasiPolynomial, region: Region) -> int:
    c = [complex(region.re_min, region.im_min), complex(region.re_max, region.im_min),
         complex(region.re_max, region.im_max), complex(region.re_min, region.im_max)]
    total = sum(_edge_winding(qp, c[k], c[(k + 1) % 4]) for k in range(4))
    n = total / (2.0 * math.pi)
    if abs(n - round(n)) > 1e-3:
        raise BoundaryRootError(f"winding number {n:.6g} is not an integer")
    return int(round(n))


def count_roots_detail(qp: QuasiPolynomial, region: Region, tries: int = 4) -> tuple[int, Region]:
    """Argument-principle count; the contour is pushed outward by ``1e-6``
    (doubling per retry) if a root sits on it."""
    r = region
    d = BOUNDARY_PERTURB
    for _ in range(tries + 1):
        try:
            return _winding(qp, r), r
        except BoundaryRootError:
            r = region.expanded(d)
            d *= 2.0
    raise BoundaryRootError(f"could not clear roots from the contour of {region}")


def count_roots(qp: QuasiPolynomial, region: Region) -> int:
    """Number of roots (with multiplicity) in ``region``."""
    return count_roots_detail(qp, region)[0]


# ------------------------------------------------------------------- rightmost

def dominance_radius(qp: QuasiPolynomial, re_min: float) -> float:
    """Radius beyond which no root with real part >= ``re_min`` exists.

    For ``|s| = r`` above the positive root of
    ``r^4 - sum_k (|p_k| + w |q_k|) r^k`` with ``w = exp(-tau re_min)``,
    ``|P(s)| > |Q(s) exp(-tau s)|`` whenever ``Re s >= re_min``.
    """
    w = math.exp(-qp.tau * re_min)
    c = np.abs(qp.p[:4]) + w * np.abs(qp.q)
    coeffs = np.concatenate([[1.0], -c[::-1]])  # descending
    roots = np.roots(coeffs)
    pos = [r.real for r in roots if abs(r.imag) < 1e-9 * (1 + abs(r)) and r.real > 0]
    return max(pos) * (1.0 + 1e-9) if pos else 0.0


def count_unstable(qp: QuasiPolynomial, re_min: float = 0.0) -> int:
    """Roots with real part above ``re_min``, counted with multiplicity."""
    cap = dominance_radius(qp, re_min)
    if cap <= re_min:
        return 0
    h = cap * (1.0 + 1e-6) + 1e-6
    return count_roots(qp, Region(re_min, max(h, re_min + 1e-3), -h, h))


@dataclass
class RightmostResult:
    root: complex | None
    certified: bool
    roots: list[Root]
    cap: float
    notes: list[str] = field(default_factory=list)

    @property
    def abscissa(self) -> float:
        return self.root.real if self.root is not None else float("nan")


def rightmost_root(qp: QuasiPolynomial, scan: Region = DEFAULT_REGION,
                   grid_step: float = DEFAULT_STEP, max_widen: int = 6) -> RightmostResult:
    """Root with the largest real part, certified by an emptiness count.

    After scanning ``scan`` the rectangle right of the best candidate, capped
    by :func:`dominance_radius`, is checked with the argument principle. If it
    is not empty the search widens into it.
    """
    rs = find_roots(qp, scan, grid_step, certify=False)
    roots = list(rs.roots)
    notes: list[str] = []
    step = grid_step
    cap = 0.0
    for _ in range(max_widen + 1):
        best = max(roots, key=lambda r: (r.re, r.im)) if roots else None
        chi = best.re if best is not None else scan.re_min
        edge = chi + 1e-5 * (1.0 + abs(chi))
        cap = dominance_radius(qp, edge)
        if edge >= cap:
            return RightmostResult(best.value if best else None, True, roots, cap, notes)
        h = cap * (1.0 + 1e-6) + 1e-6
        box = Region(edge, max(h, edge + 1e-3), -h, h)
        try:
            n_right = count_roots(qp, box)
        except BoundaryRootError as exc:
            notes.append(str(exc))
            n_right = -1
        if n_right == 0:
            return RightmostResult(best.value if best else None, True, roots, cap, notes)
        # Something lies right of the candidate: search the upper half of the box.
        upper = Region(box.re_min, box.re_max, 0.0, h)
        wstep = min(max(step, max(upper.width, upper.height) / 800.0),
                    min(upper.width, upper.height) / 10.0)
        extra = find_roots(qp, upper, wstep, certify=False, refine=0)
        new = [r for r in extra.roots if r.re > chi and
               all(abs(r.value - o.value) >= DEDUP_TOL for o in roots)]
        new += [Root(r.value.conjugate(), r.residual, r.multiplicity) for r in new
                if abs(r.im) > 0]
        if not new:
            step *= 0.5
            notes.append(f"{n_right} root(s) right of {edge:.6g} not located; refining")
        roots.extend(new)
    best = max(roots, key=lambda r: (r.re, r.im)) if roots else None
    notes.append("rightmost root not certified")
    return RightmostResult(best.value if best else None, False, roots, cap, notes)


def spectral_abscissa(qp: QuasiPolynomial, **kwargs) -> float:
    return rightmost_root(qp, **kwargs).abscissa
