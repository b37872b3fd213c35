"""Acceptance criteria, one test per criterion.

Each test prints a single PASS/FAIL line; tolerances are pinned in the
assertions.  Criteria with runtime bounds assert on wall time as well.
"""

import contextlib
import math
import time

import numpy as np
import pytest

from thinfilm.oscillator import (FOUR_PI2, TWO_PI, E0_closed_form,
                                 E_of_alpha, OscillatorParams, alpha_maps,
                                 period_area)
from thinfilm.states import (Constant, construct_droplet, construct_periodic)
from thinfilm.stability import (classify, tau1, variations, energy,
                                _periodic_derivative)
from thinfilm.levels import (F_of_alpha, F_prime_identity, J_interval_bound,
                             J_of_q, L_of_q, compare_constant_droplet,
                             compare_periodic_constant,
                             compare_periodic_droplet, crossings_report,
                             two_state_tango)
from thinfilm.pde import (PdeConfig, detect_limit, discrete_energy, evolve,
                          perturb)
from thinfilm.oscillator import Profile


@contextlib.contextmanager
def _criterion(number: int, label: str, budget: float | None = None):
    start = time.monotonic()
    try:
        yield
    except BaseException:
        print(f"FAIL criterion {number}: {label}")
        raise
    elapsed = time.monotonic() - start
    if budget is not None:
        assert elapsed < budget, (number, elapsed, budget)
    print(f"PASS criterion {number}: {label} ({elapsed:.1f} s)")


def test_criterion_1_limits():
    with _criterion(1, "P, A -> 2 pi and E -> 4 pi^2 as alpha -> 1",
                    budget=10.0):
        for q in (-3.0, -1.0, 0.0, 0.5, 1.5, 2.0, 2.5, 3.5):
            m = alpha_maps(0.9999, q, derivatives=False)
            assert abs(m.P - TWO_PI) < 1e-2, q
            assert abs(m.A - TWO_PI) < 1e-2, q
            assert abs(m.E - FOUR_PI2) < 5e-2, q


def test_criterion_2_q1_exactness():
    with _criterion(2, "q = 1: P = A = 2 pi and F = 0 to 1e-10"):
        for alpha in np.arange(0.1, 0.95, 0.1):
            m = alpha_maps(float(alpha), 1.0, derivatives=False)
            assert abs(m.P - TWO_PI) < 1e-10
            assert abs(m.A - TWO_PI) < 1e-10
            assert abs(F_of_alpha(float(alpha), 1.0)) < 1e-10


def test_criterion_3_beta_closed_form():
    with _criterion(3, "E0 closed form, J < 4 with peak 1.04, "
                       "interval bounds 3.17 / 1.73"):
        for q in (0.5, 1.0, 1.5, 2.0, 2.5):
            quad = E_of_alpha(0.0, q)
            assert abs(quad - E0_closed_form(q)) < 1e-6 * abs(quad), q
        qs = np.linspace(1.005, 1.75, 150)
        js = np.array([J_of_q(float(q)) for q in qs])
        assert np.all(js < 4.0)
        assert abs(js.max() - 1.04) < 0.05
        assert abs(J_interval_bound(1.0, 1.5) - 3.17) < 0.02
        assert abs(J_interval_bound(1.5, 1.75) - 1.73) < 0.02


def test_criterion_4_q0_constants():
    with _criterion(4, "q = 0: A(0), L(0) closed forms and L continuity"):
        a0 = period_area(0.0, 0.0).A
        assert abs(a0 - 2.0 * math.e ** 1.5 * math.sqrt(math.pi / 3)) < 1e-8
        assert L_of_q(0.0) == pytest.approx(4 * math.e ** 2 * math.pi / 3,
                                            rel=1e-12)
        # continuity at q = 0 via the symmetric two-sided limit, which
        # cancels the O(h) slope of the smooth curve
        h = 1e-4
        sym = 0.5 * (L_of_q(h) + L_of_q(-h))
        assert abs(sym - L_of_q(0.0)) < 1e-6


def test_criterion_5_crossings():
    with _criterion(5, "E0 = L at 1 and 1.775; E0 = 4 pi^2 at 1.768",
                    budget=30.0):
        rep = crossings_report()
        assert abs(rep["residuals"]["E0_minus_L_at_1"]) < 1e-8
        assert abs(rep["residuals"]["E0_minus_4pi2_at_1"]) < 1e-8
        assert abs(rep["E0_equals_L"][1] - 1.775) < 0.01
        assert abs(rep["E0_equals_4pi2"][1] - 1.768) < 0.01


def test_criterion_6_identity_suite():
    with _criterion(6, "map-derivative, F', second-variation and mu1 "
                       "identities"):
        # area-derivative residual against quadrature differencing
        for q, alpha in ((0.5, 0.4), (2.5, 0.4), (1.3, 0.7)):
            m = alpha_maps(alpha, q)
            h = 1e-6
            fd = (alpha_maps(alpha + h, q, derivatives=False).A
                  - alpha_maps(alpha - h, q, derivatives=False).A) / (2 * h)
            assert abs(m.dA - fd) < 1e-5 * max(1.0, abs(m.dA))
        # dF and dE anti-correlated at 50 random samples
        rng = np.random.default_rng(7)
        checked = 0
        while checked < 50:
            q = float(rng.uniform(-1.5, 2.8))
            alpha = float(rng.uniform(0.05, 0.95))
            if abs(q - 1.0) < 0.05:
                continue
            assert F_prime_identity(alpha, q) < 1e-5, (q, alpha)
            h = 1e-5
            dF = (F_of_alpha(alpha + h, q)
                  - F_of_alpha(alpha - h, q)) / (2 * h)
            dE = alpha_maps(alpha, q).dE
            if abs(dF) > 1e-10 and abs(dE) > 1e-8:
                assert dF * dE < 0, (q, alpha)
            checked += 1
        # second variation: formula vs divided differences of the energy
        p = OscillatorParams.from_q(1.5, 1.0)
        ss = construct_periodic(p, 6.31, 6.31, npoints=512)[0]
        xs = ss.profile.xs
        u_ys = np.cos(2 * math.pi * xs / 6.31)
        u_ys -= u_ys.mean()
        u = Profile(xs=xs, ys=u_ys, period_or_length=6.31,
                    meta={"grid": "periodic"})
        rep = variations(ss.profile, u, p)
        eps = 1e-4
        es = []
        for s in (-1, 0, 1):
            prof = Profile(xs=xs, ys=ss.profile.ys + s * eps * u_ys,
                           period_or_length=6.31, meta={"grid": "periodic"})
            es.append(energy(prof, p))
        d2_fd = (es[2] - 2 * es[1] + es[0]) / eps ** 2
        assert abs(d2_fd - rep.d2) < 1e-6 * max(abs(rep.d2), 1.0)
        # mu1 = X^2 tau1
        v = classify(Constant(params=p, hbar=1.0, X=5.0))
        assert abs(v.mu1 - 25.0 * v.tau1) < 1e-6 * max(abs(v.mu1), 1.0)


def test_criterion_7_stability_suite():
    with _criterion(7, "constant tau1 formula, witnesses for q = -3, 1.5, "
                       "2, and tiled states"):
        # tau1 of constants matches (2 pi / X)^2 - r(hbar) at O(N^-2)
        p3 = OscillatorParams.from_q(-3.0, 1.0)
        exact = (2 * math.pi / 6.0) ** 2 - p3.r(1.0)
        errs = [abs(tau1(Constant(params=p3, hbar=1.0, X=6.0).profile(N),
                         p3)[0] - exact) for N in (128, 256)]
        assert errs[0] < 1e-3 and errs[0] / errs[1] == pytest.approx(4.0,
                                                                     rel=0.2)
        # q = -3 periodic: EnergyUnstable with a d2 < 0 witness
        ss3 = construct_periodic(p3, 6.0, 6.0)[0]
        v3 = classify(ss3)
        assert v3.kind == "EnergyUnstable"
        assert any(variations(ss3.profile, w, p3).d2 < 0
                   for w in v3.witnesses)
        # q = 1.5 interior alpha: EnergyStable
        p15 = OscillatorParams.from_q(1.5, 1.0)
        ss15 = construct_periodic(p15, 6.31, 6.31)[0]
        assert classify(ss15).kind == "EnergyStable"
        # q = 2: the direction -h'' has d2 = 0 and d3 < 0
        p2 = OscillatorParams.from_q(2.0, 1.0)
        ss2 = construct_periodic(p2, 6.2, 6.2, npoints=512)[0]
        hpp = _periodic_derivative(_periodic_derivative(ss2.profile.ys, 6.2),
                                   6.2)
        w_ys = -hpp + hpp.mean()
        w = Profile(xs=ss2.profile.xs, ys=w_ys, period_or_length=6.2,
                    meta={"grid": "periodic"})
        rep2 = variations(ss2.profile, w, p2)
        assert abs(rep2.d2) < 1e-7 * abs(rep2.d3)
        assert rep2.d3 < 0
        # a period-X/2 state analyzed on the period X has tau1 < 0
        half = construct_periodic(p15, 3.155, 50.68)[0]
        vh = classify(half, at_period=2 * 3.155)
        assert vh.tau1 < 0
        assert vh.kind == "EnergyUnstable"


def test_criterion_8_level_theorems():
    with _criterion(8, "periodic-vs-constant signs, droplet orderings, "
                       "two-state tango"):
        cases = {(-3.0, 6.0): "higher", (0.5, 6.0): "higher",
                 (1.0, TWO_PI): "equal", (1.5, 6.31): "lower",
                 (2.0, 6.2): "higher", (2.5, 6.1): "higher"}
        for (q, X), expected in cases.items():
            p = OscillatorParams.from_q(q, 1.0)
            ss = construct_periodic(p, X, X)[0]
            rep = compare_periodic_constant(ss)
            assert rep.ordering == expected, (q, rep.ordering)
        for q, X in ((0.5, 6.0), (2.0, 6.2), (2.5, 6.1)):
            p = OscillatorParams.from_q(q, 1.0)
            ss = construct_periodic(p, X, X)[0]
            assert compare_periodic_droplet(ss).ordering == "lower", q
        tango = two_state_tango(OscillatorParams.from_q(1.768, 1.0),
                                6.2817, 6.2817)
        assert tango.energy_lower < tango.energy_upper
        assert tango.energy_upper > tango.energy_constant


def test_criterion_9_pde_properties():
    with _criterion(9, "mass, dissipation, fixed points, witness decay, "
                       "mountain-pass limits"):
        # mass conservation and energy dissipation on an unstable run
        p3 = OscillatorParams.from_q(-3.0, 1.0)
        ss3 = construct_periodic(p3, 6.0, 6.0, npoints=128)[0]
        t0 = time.monotonic()
        traj = evolve(perturb(ss3, "h''", -0.01),
                      PdeConfig(params=p3, N=128, X=6.0, dt=2e-3, t_end=3.0))
        assert time.monotonic() - t0 < 60.0
        assert np.max(np.abs(traj.mass - traj.mass[0])) < 1e-10
        e = traj.energy
        assert np.all(np.diff(e) <= 1e-9 * np.maximum(np.abs(e[:-1]), 1.0))
        # witness perturbation falls below the steady level and stays there
        e_ss = discrete_energy(ss3.profile.ys, p3, 6.0 / 128)
        below = e < e_ss
        assert below.any() and below[int(np.argmax(below)):].all()
        # constant data is a fixed point to round-off
        p15 = OscillatorParams.from_q(1.5, 1.0)
        cfix = evolve(Constant(params=p15, hbar=1.0, X=5.0).profile(128),
                      PdeConfig(params=p15, N=128, X=5.0, dt=5e-6,
                                t_end=5e-5))
        assert np.max(np.abs(cfix.final.ys - 1.0)) < 1e-14
        # mountain-pass: +eps relaxes to the constant, -eps dewets to the
        # droplet (over an annealed precursor layer)
        p25 = OscillatorParams.from_q(2.5, 1.0)
        X = 6.1
        saddle = construct_periodic(p25, X, X, npoints=128)[0]
        const = Constant(params=p25, hbar=1.0, X=X)
        droplet = construct_droplet(p25, X)
        for eps, precursor, target in ((0.01, None, Constant),
                                       (-0.01, 1e-3, type(droplet))):
            t0 = time.monotonic()
            run = evolve(perturb(saddle, "h''", eps),
                         PdeConfig(params=p25, N=128, X=X, dt=0.1,
                                   t_end=5e4, precursor=precursor))
            assert time.monotonic() - t0 < 60.0
            assert run.termination == "steady"
            verdict = detect_limit(run, [const, saddle, droplet])
            assert isinstance(verdict.candidate, target)
            assert verdict.distance < 1e-2, (eps, verdict.distance)


def test_criterion_10_route_agreement():
    with _criterion(10, "direct energies vs rescaled formulas across the "
                        "comparator battery"):
        battery = [(-3.0, 6.0), (0.5, 6.0), (1.5, 6.31), (2.0, 6.2),
                   (2.5, 6.1), (1.768, 6.2817)]
        for q, X in battery:
            p = OscillatorParams.from_q(q, 1.0)
            for ss in construct_periodic(p, X, X):
                rep = compare_periodic_constant(ss)
                d = rep.diagnostics
                scale = max(abs(d["direct"]), abs(d["formula"]), 1e-12)
                assert abs(d["direct"] - d["formula"]) < 1e-6 * scale, q
                if abs(d["direct"]) > 1e-9:
                    assert d["direct"] * d["formula"] > 0, q
        for q, X in ((2.5, 6.1), (2.5, 5.8), (0.5, 6.2)):
            rep = compare_constant_droplet(OscillatorParams.from_q(q, 1.0),
                                           1.0, X)
            d = rep.diagnostics
            # relative to the grid energies being compared
            scale = max(abs(d["e_droplet"]), abs(d["e_constant"]), 1e-12)
            assert abs(d["direct"] - d["formula"]) < 1e-6 * scale, (q, X)
            assert d["direct"] * d["formula"] > 0, (q, X)
