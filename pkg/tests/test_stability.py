"""Energy, variations, the first eigenvalue, and the classifier."""

import math

import numpy as np
import pytest

from thinfilm.oscillator import (FOUR_PI2, OscillatorParams, Profile,
                                 eval_H_prime)
from thinfilm.states import (Constant, construct_droplet, construct_periodic)
from thinfilm.stability import (classify, energy, even_restriction,
                                odd_perturbation_raises_energy, tau1,
                                variations)


def _grid_profile(fn, X, N=256):
    xs = np.arange(N) * (X / N)
    return Profile(xs=xs, ys=fn(xs), period_or_length=X,
                   meta={"grid": "periodic"})


def test_energy_of_constant_exact():
    p = OscillatorParams.from_q(1.5, 2.0)
    prof = Constant(params=p, hbar=1.3, X=5.0).profile(256)
    from thinfilm.oscillator import eval_H
    expect = -p.bond * float(eval_H(1.3, 1.5)) * 5.0
    assert energy(prof, p) == pytest.approx(expect, rel=1e-12)


def test_energy_rejects_negative_film():
    p = OscillatorParams.from_q(1.5, 1.0)
    prof = _grid_profile(lambda x: np.cos(x) - 2.0, 2 * math.pi)
    with pytest.raises(ValueError):
        energy(prof, p)


def test_variations_first_vanishes_at_steady_state():
    p = OscillatorParams.from_q(2.5, 1.0)
    ss = construct_periodic(p, 6.1, 6.1, npoints=512)[0]
    u = _grid_profile(lambda x: np.sin(2 * math.pi * x / 6.1), 6.1, 512)
    rep = variations(ss.profile, u, p)
    assert abs(rep.d1) < 1e-8


def test_variations_translation_mode_flat():
    # u = h' has zero second variation up to discretization
    p = OscillatorParams.from_q(2.5, 1.0)
    ss = construct_periodic(p, 6.1, 6.1, npoints=512)[0]
    from thinfilm.stability import _periodic_derivative
    hp = _periodic_derivative(ss.profile.ys, 6.1)
    u = Profile(xs=ss.profile.xs, ys=hp, period_or_length=6.1,
                meta={"grid": "periodic"})
    rep = variations(ss.profile, u, p)
    assert abs(rep.d2) < 1e-10 * max(1.0, float(np.max(hp ** 2)))


def test_variations_match_divided_differences():
    # d1..d3 against the energy of h + eps u for small eps
    p = OscillatorParams.from_q(1.5, 1.0)
    ss = construct_periodic(p, 6.31, 6.31, npoints=256)[0]
    u = _grid_profile(lambda x: np.cos(2 * math.pi * x / 6.31), 6.31)
    u = Profile(xs=u.xs, ys=u.ys - u.ys.mean(), period_or_length=6.31,
                meta={"grid": "periodic"})
    rep = variations(ss.profile, u, p)
    eps = 1e-3
    es = []
    for s in (-2, -1, 0, 1, 2):
        prof = Profile(xs=ss.profile.xs, ys=ss.profile.ys + s * eps * u.ys,
                       period_or_length=6.31, meta={"grid": "periodic"})
        es.append(energy(prof, p))
    d1 = (es[3] - es[1]) / (2 * eps)
    d2 = (es[3] - 2 * es[2] + es[1]) / eps ** 2
    assert d1 == pytest.approx(rep.d1, abs=1e-7)
    assert d2 == pytest.approx(rep.d2, rel=1e-4, abs=1e-7)


def test_tau1_constant_second_order():
    p = OscillatorParams.from_q(-3.0, 1.0)
    X = 6.0
    exact = (2 * math.pi / X) ** 2 - p.r(1.0)
    errs = []
    for N in (64, 128, 256):
        t, _ = tau1(Constant(params=p, hbar=1.0, X=X).profile(N), p)
        errs.append(abs(t - exact))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.15)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.15)


def test_tau1_eigenfunction_zero_mean():
    p = OscillatorParams.from_q(1.5, 1.0)
    ss = construct_periodic(p, 6.31, 6.31, npoints=256)[0]
    t, u = tau1(ss.profile, p)
    assert abs(float(np.mean(u.ys))) < 1e-10
    # non-constant steady states carry the translation mode, so tau1 <= 0
    assert t < 1e-6


def test_classify_constant_branches():
    # subcritical: strict local minimum
    p = OscillatorParams.from_q(1.5, 1.0)
    v = classify(Constant(params=p, hbar=1.0, X=5.0))
    assert v.kind == "LocalMinimum"
    assert v.theorem == "subcritical-constant"
    # supercritical: sinusoidal instability
    v2 = classify(Constant(params=p, hbar=1.0, X=8.0))
    assert v2.kind == "EnergyUnstable"
    assert v2.theorem == "linear-instability"
    assert v2.tau1 < 0
    assert len(v2.witnesses) >= 2


def test_classify_constant_threshold_tiebreak():
    # r(hbar) X^2 = 4 pi^2 exactly: the quartic term decides
    cases = ((2.5, "EnergyUnstable", "neutral-mode-convexity"),
             (1.5, "EnergyStable", "neutral-mode-concavity"))
    for q, kind, theorem in cases:
        p = OscillatorParams.from_q(q, 1.0)
        v = classify(Constant(params=p, hbar=1.0, X=2 * math.pi))
        assert v.kind == kind, (q, v.kind, v.theorem)
        assert v.theorem == theorem


def test_classify_q1_neutral_family():
    p = OscillatorParams.from_q(1.0, 1.0)
    ss = construct_periodic(p, 2 * math.pi, 2 * math.pi)[0]
    v = classify(ss)
    assert v.kind == "NeutralFamily"


def test_classify_q15_energy_stable():
    p = OscillatorParams.from_q(1.5, 1.0)
    ss = construct_periodic(p, 6.31, 6.31)[0]
    v = classify(ss)
    assert v.kind == "EnergyStable"
    assert v.theorem == "falling-period-map"


def test_classify_q2_cubic_witness():
    p = OscillatorParams.from_q(2.0, 1.0)
    roots = construct_periodic(p, 6.282, 6.282)
    ss = roots[0]
    v = classify(ss)
    assert v.kind == "EnergyUnstable"
    assert v.theorem == "cubic-bend"
    # the stored witness has d2 = 0 and d3 < 0
    w = v.witnesses[0]
    rep = variations(ss.profile, w, p)
    assert abs(rep.d2) < 1e-7 * abs(rep.d3)
    assert rep.d3 < 0


@pytest.mark.parametrize("q", [-3.0, 2.5])
def test_classify_outer_q_unstable_with_witness(q):
    p = OscillatorParams.from_q(q, 1.0)
    X = 6.0 if q < 0 else 6.1
    ss = construct_periodic(p, X, X)[0]
    v = classify(ss)
    assert v.kind == "EnergyUnstable"
    found = False
    for w in v.witnesses:
        rep = variations(ss.profile, w, p)
        if rep.d2 < 0:
            found = True
    assert found


def test_classify_tiled_state_linearly_unstable():
    # a period-X/2 state viewed on the full period has tau1 < 0
    p = OscillatorParams.from_q(1.5, 1.0)
    ss = construct_periodic(p, 3.155, 50.68)[0]
    v = classify(ss, at_period=2 * 3.155)
    assert v.kind == "EnergyUnstable"
    assert v.theorem == "linear-instability"
    assert v.tau1 < 0


def test_classify_droplet_undetermined():
    p = OscillatorParams.from_q(2.5, 1.0)
    v = classify(construct_droplet(p, 6.1))
    assert v.kind == "Undetermined"
    assert v.theorem == "outside-scope"


def test_mu1_scaling():
    p = OscillatorParams.from_q(1.5, 1.0)
    v = classify(Constant(params=p, hbar=1.0, X=5.0))
    assert v.mu1 == pytest.approx(25.0 * v.tau1, rel=1e-12)


def test_odd_perturbation_raises_energy():
    p = OscillatorParams.from_q(1.5, 1.0)
    ss = construct_periodic(p, 6.31, 6.31, npoints=256)[0]
    u = _grid_profile(lambda x: 0.05 * np.sin(2 * math.pi * x / 6.31), 6.31)
    assert odd_perturbation_raises_energy(ss, u)


def test_even_restriction_halves_domain():
    prof = _grid_profile(lambda x: np.cos(x), 2 * math.pi)
    half = even_restriction(prof)
    assert half.period_or_length == pytest.approx(math.pi)
    assert np.all(np.diff(half.xs) > 0)
