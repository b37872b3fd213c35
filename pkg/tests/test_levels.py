"""Relative energy levels: F, script-G, E0, L, J, and the comparators."""

import math

import numpy as np
import pytest

from thinfilm.oscillator import FOUR_PI2, OscillatorParams, alpha_maps
from thinfilm.states import construct_periodic
from thinfilm.levels import (E0_of_q, F_of_alpha, F_prime_identity, G_script,
                             G_script_prime, J_interval_bound, J_of_q,
                             L_of_q, compare_constant_droplet,
                             compare_periodic_constant,
                             compare_periodic_droplet, crossings_report,
                             levels_table_csv, maps_table_csv,
                             two_state_tango)


@pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9])
def test_F_vanishes_at_q1(alpha):
    assert abs(F_of_alpha(alpha, 1.0)) < 1e-10


@pytest.mark.parametrize("q,alpha", [(0.5, 0.3), (1.5, 0.6), (2.5, 0.4)])
def test_F_prime_identity(q, alpha):
    # relative residual of dF = -(1/2) P^-3 (A/P)^(-2q) I2 dE
    assert F_prime_identity(alpha, q) < 1e-5


def test_dF_dE_anticorrelated():
    rng = np.random.default_rng(42)
    h = 1e-5
    for _ in range(50):
        q = rng.uniform(-1.5, 2.8)
        if abs(q - 1.0) < 0.05:
            continue
        alpha = rng.uniform(0.05, 0.95)
        dF = (F_of_alpha(alpha + h, q) - F_of_alpha(alpha - h, q)) / (2 * h)
        dE = alpha_maps(alpha, q).dE
        if abs(dF) < 1e-10 or abs(dE) < 1e-8:
            continue
        assert dF * dE < 0, (q, alpha, dF, dE)


def test_E0_L_crossings():
    rep = crossings_report()
    assert rep["E0_equals_L"][0] == 1.0
    assert rep["E0_equals_L"][1] == pytest.approx(1.7748, abs=0.01)
    assert rep["E0_equals_4pi2"][1] == pytest.approx(1.768, abs=0.01)
    assert abs(rep["residuals"]["E0_minus_L_at_1"]) < 1e-8
    assert abs(rep["residuals"]["E0_minus_4pi2_at_1"]) < 1e-8


def test_L_frozen_values():
    assert L_of_q(0.0) == pytest.approx(4.0 * math.e ** 2 * math.pi / 3.0,
                                        rel=1e-10)
    assert L_of_q(0.0) == pytest.approx(30.951205809817846, rel=1e-10)
    assert L_of_q(1.0) == pytest.approx(FOUR_PI2, rel=1e-9)
    assert L_of_q(2.5) == pytest.approx(34.818224988092076, rel=1e-9)


def test_L_continuous_at_zero():
    # the q -> 0 limit from both sides matches the closed form; the
    # symmetric average cancels the O(h) slope
    h = 1e-4
    sym = 0.5 * (L_of_q(h) + L_of_q(-h))
    assert abs(sym - L_of_q(0.0)) < 1e-6


def test_J_bounded_and_peak():
    qs = np.linspace(1.01, 1.75, 75)
    js = np.array([J_of_q(q) for q in qs])
    assert np.all(js < 4.0)
    assert js.max() == pytest.approx(1.04, abs=0.05)
    assert J_interval_bound(1.0, 1.5) == pytest.approx(3.17, abs=0.02)
    assert J_interval_bound(1.5, 1.75) == pytest.approx(1.73, abs=0.02)
    assert J_interval_bound(1.0, 1.5) < 4.0


@pytest.mark.parametrize("q,alpha", [(0.5, 0.4), (2.5, 0.5)])
def test_G_script_prime_identity(q, alpha):
    h = 1e-5
    fd = (G_script(alpha + h, q) - G_script(alpha - h, q)) / (2 * h)
    assert G_script_prime(alpha, q) == pytest.approx(fd, rel=5e-4, abs=1e-8)


@pytest.mark.parametrize("q,X,expected", [
    (-3.0, 6.0, "higher"),
    (0.5, 6.0, "higher"),
    (1.5, 6.31, "lower"),
    (2.5, 6.1, "higher"),
])
def test_periodic_vs_constant_sign(q, X, expected):
    p = OscillatorParams.from_q(q, 1.0)
    ss = construct_periodic(p, X, X)[0]
    rep = compare_periodic_constant(ss)
    assert rep.ordering == expected
    # the rescaled formula route agrees with the direct grid energies
    diag = rep.diagnostics
    assert diag["direct"] == pytest.approx(diag["formula"], rel=1e-6,
                                           abs=1e-9)


def test_periodic_vs_constant_q1_equal():
    p = OscillatorParams.from_q(1.0, 1.0)
    ss = construct_periodic(p, 2 * math.pi, 2 * math.pi)[0]
    rep = compare_periodic_constant(ss)
    assert rep.ordering == "equal"
    assert rep.theorem == "equal-energy-family"


@pytest.mark.parametrize("q,X", [(0.5, 6.0), (2.0, 6.2), (2.5, 6.1)])
def test_droplet_below_periodic(q, X):
    p = OscillatorParams.from_q(q, 1.0)
    ss = construct_periodic(p, X, X)[0]
    rep = compare_periodic_droplet(ss)
    assert rep.ordering == "lower"  # droplet below the periodic state
    assert rep.diagnostics["G_script_0"] < rep.diagnostics["G_script_alpha"]


def test_no_droplet_below_q15_periodic():
    # rising-period-map regime: zero-angle droplet cannot exist
    p = OscillatorParams.from_q(1.5, 1.0)
    ss = construct_periodic(p, 6.31, 6.31)[0]
    rep = compare_periodic_droplet(ss)
    assert rep.ordering == "undetermined"


def test_constant_droplet_threshold():
    p = OscillatorParams.from_q(2.5, 1.0)
    # bond hbar^(q-1) X^2 above L: droplet below the constant
    rep = compare_constant_droplet(p, 1.0, 6.1)
    assert rep.ordering == "lower"
    assert rep.diagnostics["direct"] == pytest.approx(
        rep.diagnostics["formula"], rel=1e-6)
    # between E0 and L: droplet exists but sits above the constant
    rep2 = compare_constant_droplet(p, 1.0, 5.8)
    assert rep2.ordering == "higher"


def test_constant_droplet_nonexistence():
    p = OscillatorParams.from_q(2.5, 1.0)
    rep = compare_constant_droplet(p, 1.0, 5.0)
    assert rep.ordering == "undetermined"


def test_constant_droplet_supercritical():
    p = OscillatorParams.from_q(4.0, 1.0)
    from thinfilm.oscillator import period_area
    X = math.sqrt(period_area(0.0, 4.0).E) - 0.2
    rep = compare_constant_droplet(p, 1.0, X)
    assert rep.ordering == "higher"  # droplet above the constant
    assert rep.theorem == "supercritical-droplet-above-constant"


def test_two_state_tango():
    p = OscillatorParams.from_q(1.768, 1.0)
    rep = two_state_tango(p, 6.2817, 6.2817)
    assert rep.lower.alpha < rep.alpha_crit < rep.upper.alpha
    assert rep.energy_lower < rep.energy_constant < rep.energy_upper
    assert rep.verdict_lower.kind == "EnergyStable"
    assert rep.verdict_upper.kind == "EnergyUnstable"
    assert rep.diagnostics["delta_strictly_decreasing"]
    assert rep.diagnostics["alpha_P_power_strictly_increasing"]


def test_tables_are_stable_csv():
    t1 = maps_table_csv(1.75, [0.2, 0.5])
    t2 = maps_table_csv(1.75, [0.2, 0.5])
    assert t1 == t2
    assert t1.splitlines()[0] == "alpha,P,A,I2,E,dE,F"
    lv = levels_table_csv([0.5, 1.5])
    assert lv.splitlines()[0] == "q,E0,L,J"
    assert len(lv.splitlines()) == 3
