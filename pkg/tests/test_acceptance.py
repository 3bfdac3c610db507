"""Acceptance criteria, one test each.

Every test records a single PASS/FAIL line that is echoed in the terminal
summary, then asserts. Expected values are frozen reference data.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from conftest import ACCEPTANCE_LINES, TWO_PI
from pitchflap.ctcr import (
    c0_report,
    constant_term_c0,
    crossing_delays,
    crossing_frequencies,
    divergence_origin_check,
    root_tendency,
    stability_table,
)
from pitchflap.dde_sim import growth_rate, simulate
from pitchflap.optimizer import optimal_delay
from pitchflap.quasipoly import char_det, eval_qp, extract_pq
from pitchflap.rootfinder import Region, count_unstable, find_roots, rightmost_root
from pitchflap.rotor_model import (
    ControlGains,
    RotorParams,
    build_delay_system,
    build_matrices,
    build_uncontrolled,
    divergence_boundary,
    flutter_boundary,
    flutter_residual,
)

PARAMS = RotorParams(sigma=0.08, nu1_sq=10.8)
GAINS = ControlGains(6.75e-4, 0.6e-4)
X0 = [0.0, 0.01, 0.0, 0.0]

CROSSINGS_REF = [(1.0525, 0.3580, +1), (2.1949, 0.0852, -1), (3.0268, 1.519, +1)]
ROOTS_2PI_REF = [0.9927, 0.0595, -8e-4 + 1.0623j, -1.15e-2 + 2.0439j, 4.10e-2 + 2.8268j, -0.196 + 3.5967j]
TAU_STAR_REF = 0.2296
RIGHTMOST_STAR_REF = [-0.4368 + 1.2018j, -0.4368 + 1.9596j]
ABSCISSA_STAR_REF = -0.4368
TUNED_GAINS = ControlGains(7e-4, 1.03e-4)
TUNED_ROOT_REF = -0.4475 + 1.7690j


def record(n: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {title} -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _componentwise(z: complex, ref: complex) -> float:
    return max(abs(z.real - ref.real), abs(z.imag - ref.imag))


@pytest.fixture(scope="module")
def qp():
    return extract_pq(build_delay_system(PARAMS, GAINS, 0.0))


def test_criterion_1_crossing_table(qp):
    omegas = crossing_frequencies(qp)
    errs = []
    for w_ref, tau_ref, rt_ref in CROSSINGS_REF:
        w = min(omegas, key=lambda x: abs(x - w_ref))
        c = crossing_delays(w, qp)
        errs.append((abs(w - w_ref) <= 1e-3, abs(c.tau_core - tau_ref) <= 2e-3, c.rt == rt_ref))
    ok = len(omegas) == 3 and all(all(e) for e in errs)
    record(1, "crossing frequencies, core delays, root tendencies", ok,
           f"omega={[round(w, 4) for w in omegas]} checks={errs}")


def test_criterion_2_roots_at_two_pi(qp):
    rs = find_roots(qp.with_tau(TWO_PI), Region(-0.5, 1.2, 0.0, 4.0))
    misses = []
    for ref in ROOTS_2PI_REF:
        ref = complex(ref)
        z = min(rs.values, key=lambda v: _componentwise(v, ref))
        d = _componentwise(z, ref)
        if d > 5e-3:
            misses.append(f"{ref:.4g} -> {z:.5g} (off {d:.2e})")
    ok = rs.certified and len(rs.roots) == 6 and not misses
    record(2, "six roots at tau = 2 pi within 5e-3", ok,
           f"certified={rs.certified} n={len(rs.roots)} misses={misses or 'none'}")


@pytest.mark.parametrize("tau, nu_ref", [(TWO_PI, 4), (0.2, 0), (0.001, 2)])
def test_criterion_3_cross_method_counts(qp, tau, nu_ref):
    table = stability_table(build_delay_system(PARAMS, GAINS, 0.0), TWO_PI)
    nu_table = table.nu_at(tau)
    nu_roots = count_unstable(qp.with_tau(tau))
    ok = table.certified and nu_table == nu_roots == nu_ref
    record(3, f"NU({tau:.4g}) table vs argument principle", ok,
           f"table={nu_table} roots={nu_roots} expected={nu_ref}")


def test_criterion_4_optimal_delay():
    opt = optimal_delay(PARAMS, GAINS)
    r = rightmost_root(extract_pq(build_delay_system(PARAMS, GAINS, opt.tau)))
    near = [x.value for x in r.roots if x.value.imag > 0]
    dists = [min(_componentwise(z, ref) for z in near) for ref in RIGHTMOST_STAR_REF]
    ok = (abs(opt.tau - TAU_STAR_REF) <= 5e-3 and 0.0852 < opt.tau < 0.3580
          and r.certified and all(d <= 5e-3 for d in dists))
    record(4, "optimal delay and its rightmost roots", ok,
           f"tau*={opt.tau:.5f} abscissa={opt.abscissa:.5f} root offsets={[f'{d:.1e}' for d in dists]}")


def test_criterion_5_gain_spot_checks():
    base = rightmost_root(extract_pq(build_delay_system(PARAMS, GAINS, TAU_STAR_REF)))
    tuned = rightmost_root(extract_pq(build_delay_system(PARAMS, TUNED_GAINS, TAU_STAR_REF)))
    # the quoted root belongs to the rightmost cluster, whose members agree in real part to 5e-3
    d_root = min(_componentwise(x.value, TUNED_ROOT_REF) for x in tuned.roots)
    ok = (base.certified and tuned.certified
          and abs(base.abscissa - ABSCISSA_STAR_REF) <= 5e-3
          and abs(tuned.abscissa - TUNED_ROOT_REF.real) <= 5e-3
          and d_root <= 5e-3
          and tuned.abscissa < base.abscissa)
    record(5, "abscissa at reference and tuned gains", ok,
           f"base={base.abscissa:.5f} tuned={tuned.abscissa:.5f} root offset={d_root:.1e}")


@pytest.mark.parametrize("tau, window", [(TWO_PI, (15.0, 25.0)), (TAU_STAR_REF, (10.0, 40.0))])
def test_criterion_6_simulation_vs_spectrum(tau, window):
    ts = simulate(build_delay_system(PARAMS, GAINS, tau), X0, window[1], step=1e-3)
    rate = growth_rate(ts, window)
    r = rightmost_root(extract_pq(build_delay_system(PARAMS, GAINS, tau)))
    rel = abs(rate - r.abscissa) / abs(r.abscissa)
    ok = r.certified and rel <= 0.05
    record(6, f"growth rate vs abscissa at tau={tau:.4g}", ok,
           f"growth={rate:.5f} abscissa={r.abscissa:.5f} rel={rel:.2%}")


def test_criterion_7_boundaries():
    bad: list[str] = []

    @settings(max_examples=50, derandomize=True, deadline=None)
    @given(st.floats(0.0, 0.08))
    def divergence(sigma):
        p = PARAMS.replace(sigma=sigma, nu1_sq=divergence_boundary(sigma, PARAMS))
        det_k = np.linalg.det(build_matrices(p).K)
        lam = np.min(np.abs(np.linalg.eigvals(build_uncontrolled(p))))
        if not (abs(det_k) < 1e-12 and lam < 1e-8):
            bad.append(f"div sigma={sigma}: detK={det_k:.1e} |lam|={lam:.1e}")

    @settings(max_examples=50, derandomize=True, deadline=None)
    @given(st.floats(1.01, 2.15))
    def flutter(w):
        nu1_sq, sigma = flutter_boundary(w, PARAMS)
        res = flutter_residual(w, nu1_sq, sigma, PARAMS)
        if not res < 1e-8:
            bad.append(f"flutter w={w}: residual={res:.1e}")

    divergence()
    flutter()
    record(7, "boundary lines (50 + 50 sampled points)", not bad, f"violations={bad[:3] or 'none'}")


def test_criterion_8_oracles(qp):
    rng = np.random.default_rng(0)
    sys0 = build_delay_system(PARAMS, GAINS, 0.0)
    # extract_pq vs the determinant itself
    worst = 0.0
    for tau in (0.0, TAU_STAR_REF, TWO_PI):
        q = qp.with_tau(tau)
        for s in rng.uniform(-3, 3, 34) + 1j * rng.uniform(-5, 5, 34):
            d = char_det(sys0.A, sys0.A_d, s, np.exp(-tau * s))
            worst = max(worst, abs(eval_qp(q, s) - d) / max(abs(d), 1.0))
    pq_ok = worst <= 1e-10
    # tau = 0 roots vs eigenvalues of A + A_d
    eig = np.linalg.eigvals(sys0.A_total)
    rs = find_roots(qp, Region(-3.0, 3.0, -5.0, 5.0))
    eig_err = max(min(abs(e - z) for z in rs.values) for e in eig)
    eig_ok = rs.certified and len(rs.roots) == 4 and eig_err <= 1e-8
    # zero gains vs the matrix exponential
    ts = simulate(build_delay_system(PARAMS, ControlGains(0.0, 0.0), 1.0), X0, 20.0, step=1e-3)
    A = build_uncontrolled(PARAMS)
    sim_err = max(np.max(np.abs(x - expm(A * p) @ X0)) for p, x in zip(ts.psi[::250], ts.states[::250]))
    sim_ok = sim_err <= 1e-6
    # root tendency is the same for every delay in a family
    rt_ok = True
    for w in crossing_frequencies(qp):
        c = crossing_delays(w, qp, tau_max=c_max(w, qp))
        rts = {root_tendency(w, t, qp) for t in c.delays[:3]}
        rt_ok &= len(c.delays) >= 3 and rts == {c.rt}
    ok = pq_ok and eig_ok and sim_ok and rt_ok
    record(8, "oracle suites", ok,
           f"pq rel={worst:.1e} eig={eig_err:.1e} expm={sim_err:.1e} rt_invariant={rt_ok}")


def c_max(w: float, qp) -> float:
    return crossing_delays(w, qp).tau_core + 2.5 * TWO_PI / w


def test_criterion_9_c0_dual_evaluation():
    sigmas = np.linspace(0.0, 0.08, 10)
    nus = np.linspace(2.0, 16.0, 10)
    a_values = np.array([0.0, 6.75e-4, 1.0e-3])
    check = divergence_origin_check(sigmas, nus, a_values, params=PARAMS)
    worst = 0.0
    for i, s in enumerate(sigmas):
        for j, n in enumerate(nus):
            for k, a in enumerate(a_values):
                q = extract_pq(build_delay_system(PARAMS.replace(sigma=float(s), nu1_sq=float(n)),
                                                  ControlGains(float(a), 0.0), 0.0))
                scale = q.p[0] ** 2 + q.q[0] ** 2
                assert check.c0[i, j, k] == constant_term_c0(q)
                worst = max(worst, abs(check.c0[i, j, k] - check.c0_det[i, j, k]) / scale)
    rep = c0_report(PARAMS, GAINS)
    sign_doc = abs(rep["diff_factored"]) <= 1e-9 * abs(rep["c0"]) and abs(rep["diff_alternate"]) > 1.0
    ok = worst <= 1e-10 and sign_doc
    record(9, "c0 by interpolation vs determinant at the origin", ok,
           f"worst rel={worst:.1e} factored diff={rep['diff_factored']:.1e} "
           f"alternate-sign diff={rep['diff_alternate']:.3g}")
