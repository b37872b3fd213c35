"""Relative energy levels of constant, periodic and droplet steady states.

Everything reduces to scalar functions of alpha and q: the rescaled energy
gap F(alpha) between a periodic state and the constant of the same mean,
the droplet comparator G_script(alpha), the droplet existence level
E0(q) = E(0), the constant-vs-droplet threshold L(q), and the ratio
J(q) = E0/(4 pi^2).  Each comparator evaluates its formula route and a
direct grid-energy route and requires them to agree.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import beta as beta_fn

from .oscillator import (
    FOUR_PI2,
    AlphaMaps,
    OscillatorParams,
    _H_centered,
    alpha_maps,
    eval_G,
    period_area,
    potential_integral,
)
from .states import Constant, Droplet, Periodic, construct_droplet, \
    droplet_exists
from .stability import energy

ROUTE_RTOL = 1e-6  # direct-grid vs formula agreement demanded of comparators


@dataclass
class LevelReport:
    pair: tuple
    delta_energy: float
    ordering: str  # lower | equal | higher | undetermined
    theorem: str
    diagnostics: dict = field(default_factory=dict)


def _ordering(delta: float, scale: float, rtol: float = 1e-8) -> str:
    """Sign of delta = E(first) - E(second) beyond tolerance."""
    if abs(delta) <= rtol * max(scale, 1e-300):
        return "equal"
    return "higher" if delta > 0 else "lower"


def _H_of(y: float, q: float) -> float:
    """H(y) with the canonical normalization (H(1) = -1/(q+1) etc.)."""
    base = 1.0 if abs(q + 1.0) < 1e-12 else -1.0 / (q + 1.0)
    return float(_H_centered(y, q)) + base


# ---------------------------------------------------------------------------
# F(alpha): periodic vs constant, rescaled


def F_of_alpha(alpha: float, q: float) -> float:
    """Rescaled energy gap between k_alpha and its mean.

    F = (A/P)^(-(q+1)) [ I2/P - H(alpha) + H(A/P) ]; the physical gap is
    E(h_ss) - E(mean) = B * mean^(q+1) * X * F(alpha).  Vanishes
    identically at q = 1 and as alpha -> 1.
    """
    if abs(q - 1.0) < 1e-12:
        return 0.0
    m = period_area(alpha, q)
    mean = m.A / m.P
    return mean ** (-(q + 1.0)) * (m.I2 / m.P - _H_of(alpha, q)
                                   + _H_of(mean, q))


def F_prime_identity(alpha: float, q: float,
                     step: float = 1e-4) -> float:
    """Relative residual of dF/dalpha = -[I2 (A/P)^(-2q) / (2 P^3)] dE/dalpha."""
    if abs(q - 1.0) < 1e-12:
        return 0.0
    h = min(step, 0.25 * min(alpha, 1.0 - alpha))
    dF = (F_of_alpha(alpha + h, q) - F_of_alpha(alpha - h, q)) / (2.0 * h)
    m = alpha_maps(alpha, q)
    rhs = -0.5 * m.P ** -3 * (m.A / m.P) ** (-2.0 * q) * m.I2 * m.dE
    scale = max(abs(dF), abs(rhs), 1e-30)
    return abs(dF - rhs) / scale


# ---------------------------------------------------------------------------
# scalar levels


def E0_of_q(q: float) -> float:
    """Droplet existence level E0(q) = E(0), for q > -1."""
    if q <= -1.0:
        raise ValueError("E0 requires q > -1")
    return period_area(0.0, q).E


def L_of_q(q: float) -> float:
    """Constant-vs-droplet energy threshold, q in (-1, 3)."""
    if not -1.0 < q < 3.0:
        raise ValueError("L(q) is defined for -1 < q < 3")
    A0 = period_area(0.0, q).A
    if abs(q) < 1e-12:
        return 4.0 * math.e ** 2 * math.pi / 3.0
    return A0 ** 2 * ((3.0 + q) / ((3.0 - q) * (q + 1.0))) ** ((3.0 - q) / q)


def J_of_q(q: float) -> float:
    """J = E0(q) / (4 pi^2) on (1, 1.75]; stays below 4."""
    if not 1.0 < q <= 1.75:
        raise ValueError("J(q) is used on (1, 1.75]")
    return E0_of_q(q) / FOUR_PI2


def J_interval_bound(q_lo: float, q_hi: float) -> float:
    """Monotonicity bound for J on (q_lo, q_hi].

    The Beta function decreases in both arguments, so on the interval
    J(q) <= (1/4 pi^2)(2/q_lo)(1+q_hi) B(1/2q_hi, 1/2)^(3-q_lo)
            B(3/2q_hi, 1/2)^(q_hi-1).
    """
    return (2.0 / q_lo) * (1.0 + q_hi) \
        * beta_fn(1.0 / (2.0 * q_hi), 0.5) ** (3.0 - q_lo) \
        * beta_fn(3.0 / (2.0 * q_hi), 0.5) ** (q_hi - 1.0) / FOUR_PI2


# ---------------------------------------------------------------------------
# G_script(alpha): periodic vs droplet


def G_script(alpha: float, q: float) -> float:
    """Droplet comparator: the droplet has lower energy than the periodic
    state iff G_script(0) < G_script(alpha) (q != 3)."""
    if abs(q - 3.0) < 1e-12:
        raise ValueError("comparator undefined at q = 3")
    m = period_area(alpha, q)
    integ = 0.5 * m.I2 - potential_integral(alpha, q,
                                            lambda k: eval_G(k, q))
    val = m.A ** ((q + 3.0) / (q - 3.0)) * integ
    if abs(q) < 1e-12:
        val += (2.0 / 3.0) * math.log(m.A)
    return val


def G_script_prime(alpha: float, q: float) -> float:
    """dG_script/dalpha = H(alpha) A^(6/(q-3)) (A/P)^(2-q) E' / (q-3)."""
    m = alpha_maps(alpha, q)
    return _H_of(alpha, q) * m.A ** (6.0 / (q - 3.0)) \
        * (m.A / m.P) ** (2.0 - q) * m.dE / (q - 3.0)


def _dE_positive_certified(q: float, lo: float = 0.005, hi: float = 0.995,
                           npts: int = 40) -> bool:
    return all(alpha_maps(a, q, derivatives=True).dE > 0
               for a in np.linspace(lo, hi, npts))


# ---------------------------------------------------------------------------
# comparators


def compare_periodic_constant(ss: Periodic, npoints: int = 512) -> LevelReport:
    """Energy of the periodic state against the constant of the same mean.

    Evaluates the difference twice: direct grid energies, and the scaling
    formula B mean^(q+1) X F(alpha); the routes must agree to 1e-6.
    """
    p = ss.params
    q = p.q
    mean = ss.mean
    const = Constant(p, hbar=mean, X=ss.X)
    e_per = energy(ss.profile, p)
    e_con = energy(const.profile(ss.profile.npoints), p)
    direct = e_per - e_con
    formula = p.bond * mean ** (q + 1.0) * ss.X * F_of_alpha(ss.alpha, q)
    scale = max(abs(e_per), abs(e_con), 1e-30)
    if abs(direct - formula) > ROUTE_RTOL * scale:
        raise RuntimeError(
            f"energy routes disagree: direct {direct:.3e} vs scaled "
            f"{formula:.3e}")
    order = _ordering(direct, scale)
    if abs(q - 1.0) < 1e-12:
        theorem = "equal-energy-family"
    elif q >= 2.0 or q < 1.0:
        theorem = "periodic-above-constant"
    else:
        theorem = "period-map-sign"
    return LevelReport(
        pair=("periodic", "constant"), delta_energy=direct, ordering=order,
        theorem=theorem,
        diagnostics={"F": F_of_alpha(ss.alpha, q), "direct": direct,
                     "formula": formula})


def compare_periodic_droplet(ss: Periodic, npoints: int = 513) -> LevelReport:
    """Energy of the zero-angle droplet of equal area against the periodic
    state, both on the period X with G-normalized potential.

    Valid when the rising-period-map hypothesis holds (q in (-1,1) u [2,3),
    or 1 < q < 2 with dE > 0 certified on a sampled grid); otherwise no
    droplet shorter than X exists and the report is undetermined.
    """
    p = ss.params
    q = p.q
    if not -1.0 < q < 3.0:
        raise ValueError("droplet comparison requires -1 < q < 3")
    rising = (q < 1.0) or (q >= 2.0) or _dE_positive_certified(q)
    if not rising:
        return LevelReport(
            pair=("droplet", "periodic"), delta_energy=float("nan"),
            ordering="undetermined", theorem="falling-period-map",
            diagnostics={"reason": "no zero-angle droplet; E' < 0"})
    drop = construct_droplet(p, ss.area, npoints=npoints)
    if drop.length > ss.X * (1.0 + 1e-9):
        return LevelReport(
            pair=("droplet", "periodic"), delta_energy=float("nan"),
            ordering="undetermined", theorem="droplet-too-long",
            diagnostics={"Xhat": drop.length, "X": ss.X})
    e_drop = energy(drop.profile, p, potential="G") \
        - p.bond * eval_G(0.0, q) * (ss.X - drop.length)
    e_per = energy(ss.profile, p, potential="G")
    delta = e_drop - e_per
    g0, ga = G_script(0.0, q), G_script(ss.alpha, q)
    gp = G_script_prime(ss.alpha, q)
    if not g0 < ga:
        raise RuntimeError("comparator monotonicity violated: "
                           f"G(0)={g0:.6e} >= G(alpha)={ga:.6e}")
    order = _ordering(delta, max(abs(e_drop), abs(e_per)))
    return LevelReport(
        pair=("droplet", "periodic"), delta_energy=delta, ordering=order,
        theorem="droplet-below-periodic",
        diagnostics={"G_script_0": g0, "G_script_alpha": ga,
                     "G_script_prime": gp, "Xhat": drop.length})


def constant_droplet_gap(params: OscillatorParams, hbar: float,
                         X: float) -> float:
    """Closed-form E(droplet) - E(constant) for -1 < q < 3."""
    q, B = params.q, params.bond
    value = B * hbar ** (q - 1.0) * X ** 2
    A0 = period_area(0.0, q).A
    if abs(q) < 1e-12:
        return (B * hbar * X / 3.0) * math.log(A0 ** 2 / math.e / value)
    return (B ** (3.0 / (3.0 - q)) * (hbar * X) ** ((3.0 + q) / (3.0 - q))
            / q) * ((q - 3.0) / (q + 3.0) * A0 ** (2.0 * q / (q - 3.0))
                    + value ** (q / (q - 3.0)) / (q + 1.0))


def compare_constant_droplet(params: OscillatorParams, hbar: float, X: float,
                             npoints: int = 1025) -> LevelReport:
    """Energy of the droplet of area hbar*X against the constant hbar on X.

    Existence first; then the threshold B hbar^(q-1) X^2 vs L(q) decides the
    sign, verified against direct grid energies and the closed-form gap.
    """
    q, B = params.q, params.bond
    ex = droplet_exists(params, hbar, X)
    if not ex.exists:
        return LevelReport(
            pair=("droplet", "constant"), delta_energy=float("nan"),
            ordering="undetermined", theorem="no-droplet",
            diagnostics={"reason": ex.reason, "threshold": ex.threshold,
                         "value": ex.value})
    if q >= 3.0:
        # the droplet exists but is not constructed here; the ordering is
        # unconditional in this regime
        return LevelReport(
            pair=("droplet", "constant"), delta_energy=float("nan"),
            ordering="higher",
            theorem="supercritical-droplet-above-constant",
            diagnostics={"threshold": ex.threshold, "value": ex.value})
    drop = construct_droplet(params, hbar * X, npoints=npoints)
    const = Constant(params, hbar=hbar, X=X)
    e_drop = energy(drop.profile, params, potential="G")
    e_con = energy(const.profile(npoints - 1), params, potential="G")
    direct = e_drop - e_con
    scale = max(abs(e_drop), abs(e_con), 1e-30)
    diagnostics: dict = {"direct": direct, "e_droplet": e_drop,
                         "e_constant": e_con,
                         "value": B * hbar ** (q - 1.0) * X ** 2}
    gap = constant_droplet_gap(params, hbar, X)
    L = L_of_q(q)
    diagnostics.update(formula=gap, L=L)
    if abs(direct - gap) > ROUTE_RTOL * scale:
        raise RuntimeError(
            f"energy routes disagree: direct {direct:.3e} vs formula "
            f"{gap:.3e}")
    order = _ordering(gap, scale)
    expected = "lower" if diagnostics["value"] > L else \
        ("higher" if diagnostics["value"] < L else "equal")
    if order != expected and order != "equal":
        raise RuntimeError("threshold and energies disagree on ordering")
    return LevelReport(pair=("droplet", "constant"), delta_energy=direct,
                       ordering=order, theorem="threshold-L",
                       diagnostics=diagnostics)


# ---------------------------------------------------------------------------
# crossings and the two-state regime


def crossings_report() -> dict:
    """Where E0(q), L(q) and the constant level 4 pi^2 intersect.

    E0 = L at q = 1 and q** ~ 1.775 (they also merge at the ends -1, 3);
    E0 = 4 pi^2 at q = 1 and q* ~ 1.768; L = 4 pi^2 at 1 and ~1.761.
    """
    def e0_minus_l(q):
        return E0_of_q(q) - L_of_q(q)

    def e0_minus_const(q):
        return E0_of_q(q) - FOUR_PI2

    def l_minus_const(q):
        return L_of_q(q) - FOUR_PI2

    q_dstar = brentq(e0_minus_l, 1.3, 2.2, xtol=1e-10)
    q_star = brentq(e0_minus_const, 1.3, 2.2, xtol=1e-10)
    q_l = brentq(l_minus_const, 1.3, 2.2, xtol=1e-10)
    return {
        "E0_equals_L": [1.0, q_dstar],
        "E0_equals_4pi2": [1.0, q_star],
        "L_equals_4pi2": [1.0, q_l],
        "residuals": {
            "E0_minus_L_at_1": e0_minus_l(1.0),
            "E0_minus_4pi2_at_1": e0_minus_const(1.0),
        },
    }


@dataclass
class TangoReport:
    lower: Periodic
    upper: Periodic
    alpha_crit: float
    verdict_lower: object
    verdict_upper: object
    energy_lower: float
    energy_upper: float
    energy_constant: float
    diagnostics: dict = field(default_factory=dict)


def two_state_tango(params: OscillatorParams, X: float, A_ss: float,
                    npoints: int = 256) -> TangoReport:
    """The two coexisting periodic states when E has an interior minimum.

    Requires 1 < q < 2 with the target level cutting both monotone branches
    of E.  The small-alpha root sits on the falling branch (dE < 0, energy
    stable) and is the lower-energy state; the large-alpha root is unstable
    and sits above the constant.  Also certifies the structural hypotheses:
    delta(alpha) = P^3 I2 / (2 A^2) strictly decreasing and
    alpha P^(2/(q-1)) strictly increasing.
    """
    from .states import construct_periodic

    q = params.q
    if not 1.0 < q < 2.0:
        raise ValueError("two coexisting states need 1 < q < 2")
    roots = construct_periodic(params, X, A_ss, npoints=npoints)
    if len(roots) != 2:
        raise ValueError(
            f"expected two coexisting states, found {len(roots)}: the "
            "target level does not cut both branches of E")
    lo_alpha, hi_alpha = roots
    res = minimize_scalar(lambda a: period_area(a, q).E,
                          bounds=(1e-6, 1.0 - 1e-6), method="bounded",
                          options={"xatol": 1e-10})
    alpha_crit = float(res.x)

    from .stability import classify
    v_lo = classify(lo_alpha)
    v_hi = classify(hi_alpha)
    e_lo = energy(lo_alpha.profile, params)
    e_hi = energy(hi_alpha.profile, params)
    const = Constant(params, hbar=A_ss / X, X=X)
    e_const = energy(const.profile(npoints), params)
    # the small-alpha root lies on the falling branch of E: stable and lower
    lower, upper = lo_alpha, hi_alpha
    e_lower, e_upper = e_lo, e_hi
    v_lower, v_upper = v_lo, v_hi
    grid = np.linspace(0.02, 0.98, 49)
    delta = np.array([0.5 * period_area(a, q).P ** 3
                      * period_area(a, q).A ** -2 * period_area(a, q).I2
                      for a in grid])
    mono = np.array([a * period_area(a, q).P ** (2.0 / (q - 1.0))
                     for a in grid])
    diag = {
        "delta_strictly_decreasing": bool(np.all(np.diff(delta) < 0)),
        "alpha_P_power_strictly_increasing": bool(np.all(np.diff(mono) > 0)),
        "min_height_ordering": float(np.min(lower.profile.ys))
        < float(np.min(upper.profile.ys)),
    }
    if not e_lower < e_upper:
        raise RuntimeError("energy ordering of the two states failed")
    if not e_upper > e_const:
        raise RuntimeError("upper state should sit above the constant")
    return TangoReport(lower=lower, upper=upper, alpha_crit=alpha_crit,
                       verdict_lower=v_lower, verdict_upper=v_upper,
                       energy_lower=e_lower, energy_upper=e_upper,
                       energy_constant=e_const, diagnostics=diag)


# ---------------------------------------------------------------------------
# CSV emitters


def maps_table_csv(q: float, alphas) -> str:
    """(alpha, P, A, I2, E, dE, F) rows for one q."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha", "P", "A", "I2", "E", "dE", "F"])
    for a in alphas:
        m = alpha_maps(float(a), q)
        w.writerow(["%.12g" % v for v in
                    (m.alpha, m.P, m.A, m.I2, m.E, m.dE,
                     F_of_alpha(float(a), q))])
    return buf.getvalue()


def levels_table_csv(qs) -> str:
    """(q, E0, L, J) rows; J blank outside (1, 1.75]."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["q", "E0", "L", "J"])
    for q in qs:
        q = float(q)
        e0 = E0_of_q(q) if q > -1.0 else float("nan")
        L = L_of_q(q) if -1.0 < q < 3.0 else float("nan")
        j = "%.12g" % J_of_q(q) if 1.0 < q <= 1.75 else ""
        w.writerow(["%.12g" % q, "%.12g" % e0, "%.12g" % L, j])
    return buf.getvalue()
