"""Physical steady states: constants, positive periodic states, droplets.

The canonical profile k_alpha rescales to a steady state of prescribed
period X and area A_ss whenever the invariance relation

    bond * X^(3-q) * A_ss^(q-1) = E(alpha)

holds.  This module performs that rescaling, solves the invariance relation
for alpha given (X, A_ss), builds zero-contact-angle droplets from k_0, and
serializes everything to JSON.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

from scipy.integrate import IntegrationWarning

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq, minimize_scalar

from .oscillator import (
    FOUR_PI2,
    TWO_PI,
    OscillatorParams,
    Profile,
    _branch,
    _H_diff,
    _integrate_k,
    beta_max,
    period_area,
)

INVARIANCE_TOL = 1e-8


@dataclass
class Constant:
    """Uniform film of height hbar on a domain of length X."""

    params: OscillatorParams
    hbar: float
    X: float

    @property
    def area(self) -> float:
        return self.hbar * self.X

    def profile(self, npoints: int = 256) -> Profile:
        xs = np.arange(npoints) * (self.X / npoints)
        return Profile(xs=xs, ys=np.full(npoints, self.hbar),
                       period_or_length=self.X,
                       meta={"kind": "constant", "grid": "periodic"})


@dataclass
class Periodic:
    """Positive periodic steady state, rescaled from k_alpha."""

    params: OscillatorParams
    alpha: float
    D: float
    X: float
    area: float
    profile: Profile
    degenerate_family: bool = False  # q = 1: amplitude is a free parameter

    @property
    def mean(self) -> float:
        return self.area / self.X


@dataclass
class Droplet:
    """Zero-contact-angle droplet: positive on (0, length), zero outside."""

    params: OscillatorParams
    length: float
    area: float
    profile: Profile


@dataclass
class DropletConfiguration:
    """Droplets with disjoint supports placed on a common domain."""

    droplets: list
    X: float

    def __post_init__(self):
        total = sum(d.length for d in self.droplets)
        if total > self.X * (1.0 + 1e-12):
            raise ValueError("droplet supports do not fit in the domain")

    @property
    def area(self) -> float:
        return sum(d.area for d in self.droplets)


def _rescale_profile(alpha: float, params: OscillatorParams, X: float,
                     A_ss: float, npoints: int) -> Profile:
    """h_ss(x) = (A_ss/A)(P/X) k_alpha(P x / X) on a uniform periodic grid."""
    m = period_area(alpha, params.q)
    sol = _integrate_k(alpha, params.q, m.P)
    xs = np.arange(npoints) * (X / npoints)
    ys = (A_ss / m.A) * (m.P / X) * sol.sol(m.P * xs / X)[0]
    return Profile(xs=xs, ys=ys, period_or_length=X,
                   meta={"kind": "periodic", "alpha": alpha, "q": params.q,
                         "grid": "periodic"})


def rescale_to_physical(alpha: float, params: OscillatorParams,
                        D: float | None = None,
                        X: float | None = None, A_ss: float | None = None,
                        npoints: int = 256) -> Periodic:
    """Rescale k_alpha to a physical steady state.

    Either the oscillator constant D or the pair (X, A_ss) must be given;
    in the latter case the pair must satisfy the invariance relation for
    this alpha.
    """
    q, B = params.q, params.bond
    m = period_area(alpha, q)
    if D is not None:
        if q != 0 and D <= 0:
            raise ValueError("D must be positive for q != 0")
        if _branch(q) == "log":
            scale_x = math.exp(-D / (2.0 * B)) * math.sqrt(B)
            amp = math.exp(D / B)
        else:
            scale_x = (B / D) ** (1.0 / (2.0 * q)) * math.sqrt(D)
            amp = (D / B) ** (1.0 / q)
        X = m.P / scale_x
        A_ss = amp * m.A / scale_x
    elif X is not None and A_ss is not None:
        target = B * X ** (3.0 - q) * A_ss ** (q - 1.0)
        resid = abs(target - m.E) / m.E
        if resid > INVARIANCE_TOL:
            raise ValueError(
                f"(alpha, X, area) violate the invariance relation: "
                f"relative residual {resid:.2e}")
        amp = (A_ss / m.A) * (m.P / X)
        if _branch(q) == "log":
            D = B * math.log(amp)
        else:
            D = B * amp ** q
    else:
        raise ValueError("provide either D or both X and A_ss")
    prof = _rescale_profile(alpha, params, X, A_ss, npoints)
    return Periodic(params=params, alpha=alpha, D=float(D), X=float(X),
                    area=float(A_ss), profile=prof)


def _alpha_range(q: float) -> tuple[float, float]:
    lo = 1e-6 if q > -1.0 else 1e-4
    return lo, 1.0 - 1e-6


def construct_periodic(params: OscillatorParams, X: float, A_ss: float,
                       npoints: int = 256) -> list[Periodic]:
    """All positive periodic steady states with period X and area A_ss.

    Solves E(alpha) = bond X^(3-q) A_ss^(q-1) on the monotone branches of E.
    Returns zero, one or two states (two only when E has an interior
    minimum, q in roughly (1.75, 1.794]).  At q = 1 the relation degenerates:
    E is identically 4 pi^2 and a representative of the continuum is
    returned with degenerate_family set.
    """
    q, B = params.q, params.bond
    target = B * X ** (3.0 - q) * A_ss ** (q - 1.0)
    if abs(q - 1.0) < 1e-12:
        if abs(target - FOUR_PI2) > 1e-8 * FOUR_PI2:
            return []
        st = rescale_to_physical(0.5, params, X=X, A_ss=A_ss, npoints=npoints)
        st.degenerate_family = True
        return [st]

    lo, hi = _alpha_range(q)

    def Ea(a):
        return period_area(a, q).E

    branches: list[tuple[float, float]] = []
    if 1.0 < q < 2.0:
        res = minimize_scalar(Ea, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-10})
        acrit = float(res.x)
        if Ea(acrit) < min(Ea(lo), Ea(hi)) - 1e-12 and lo + 1e-6 < acrit < hi - 1e-6:
            branches = [(lo, acrit), (acrit, hi)]
    if not branches:
        branches = [(lo, hi)]

    roots: list[float] = []
    for a0, a1 in branches:
        f0, f1 = Ea(a0) - target, Ea(a1) - target
        if f0 == 0.0:
            roots.append(a0)
        elif f0 * f1 < 0:
            roots.append(brentq(lambda a: Ea(a) - target, a0, a1,
                                xtol=1e-12, rtol=1e-10))
    out = []
    for a in sorted(set(round(r, 12) for r in roots)):
        out.append(rescale_to_physical(a, params, X=X, A_ss=A_ss,
                                       npoints=npoints))
    return out


# ---------------------------------------------------------------------------
# droplets


def droplet_profile_canonical(q: float, npoints: int = 257) -> Profile:
    """The zero-contact-angle canonical droplet k_0 on [0, P(0)].

    Built from the conserved quantity (k')^2/2 + H(k) = H(0): the arc from
    the edge to the interior maximum is parametrized by
    k = beta sin^2(theta), with x(theta) obtained by integrating the regular
    theta-integrand.  This avoids starting the ODE at the degenerate
    zero-height point, where the right side is singular for q < 0.
    """
    if q <= -1.0 or q >= 3.0:
        raise ValueError("zero-contact-angle droplets require -1 < q < 3")
    beta = beta_max(0.0, q)
    m = period_area(0.0, q)
    half = 0.5 * m.P

    def dxdtheta(theta, _):
        s, c = math.sin(theta), math.cos(theta)
        s2 = s * s
        if s2 <= 0.5:
            dH = _H_diff(0.0, beta * s2, q)
        else:
            dH = _H_diff(beta, -beta * c * c, q) + _H_diff(0.0, beta, q)
        if dH <= 0.0:
            dH = 1e-300
        return [2.0 * beta * s * c / math.sqrt(2.0 * dH)]

    # dx/dtheta has a singular derivative at theta = 0 (e.g. 1/sqrt(log) for
    # q = 0); cover the first sliver by adaptive quadrature and start the ODE
    # where the integrand is smooth
    theta0 = 1e-6
    with warnings.catch_warnings():
        # algebraic endpoint singularity for q < 0; accuracy is checked
        # against the period map below
        warnings.simplefilter("ignore", IntegrationWarning)
        x0, _ = quad(lambda t: dxdtheta(t, None)[0], 0.0, theta0,
                     epsabs=1e-14, epsrel=1e-12, limit=200)
    thetas = np.linspace(theta0, 0.5 * math.pi, 2049)
    sol = solve_ivp(dxdtheta, (theta0, 0.5 * math.pi), [x0], method="DOP853",
                    t_eval=thetas, rtol=1e-11, atol=1e-13)
    if not sol.success:
        raise RuntimeError(f"droplet arc integration failed: {sol.message}")
    x_of_theta = np.concatenate(([0.0], sol.y[0]))
    k_of_theta = np.concatenate(([0.0], beta * np.sin(thetas) ** 2))
    if abs(x_of_theta[-1] - half) > 1e-7 * half:
        raise RuntimeError("droplet half-length disagrees with the period map")
    # pin the arc end to the independently computed half period
    x_of_theta *= half / x_of_theta[-1]
    # x is strictly increasing in theta; interpolate k on the uniform grid
    spline = CubicSpline(x_of_theta, k_of_theta)
    n_half = npoints // 2
    xs = np.linspace(0.0, m.P, 2 * n_half + 1)
    ys = np.empty_like(xs)
    left = xs[: n_half + 1]
    ys[: n_half + 1] = spline(np.clip(left, 0.0, half))
    ys[n_half + 1:] = ys[n_half - 1:: -1]
    ys[0] = ys[-1] = 0.0
    ys = np.clip(ys, 0.0, None)
    return Profile(xs=xs, ys=ys, period_or_length=m.P,
                   meta={"kind": "droplet", "alpha": 0.0, "q": q,
                         "grid": "closed"})


def construct_droplet(params: OscillatorParams, A_ss: float,
                      npoints: int = 257) -> Droplet:
    """Zero-contact-angle droplet with area A_ss.

    Length: Xhat = [E(0) / (bond A_ss^(q-1))]^(1/(3-q)); the profile is k_0
    rescaled.  Refuses q within 1e-3 of 3, where the exponent blows up.
    """
    q, B = params.q, params.bond
    if not -1.0 < q < 3.0:
        raise ValueError("zero-contact-angle droplets require -1 < q < 3")
    if abs(3.0 - q) < 1e-3:
        raise ValueError("length exponent 1/(3-q) is ill-conditioned near q = 3")
    m0 = period_area(0.0, q)
    Xhat = (m0.E / (B * A_ss ** (q - 1.0))) ** (1.0 / (3.0 - q))
    canon = droplet_profile_canonical(q, npoints)
    xs = canon.xs * (Xhat / m0.P)
    ys = (A_ss / m0.A) * (m0.P / Xhat) * canon.ys
    prof = Profile(xs=xs, ys=ys, period_or_length=Xhat,
                   meta={"kind": "droplet", "q": q, "grid": "closed"})
    _check_zero_contact_angle(prof, q)
    return Droplet(params=params, length=float(Xhat), area=float(A_ss),
                   profile=prof)


def _check_zero_contact_angle(prof: Profile, q: float):
    """Edge slopes must vanish at the analytic rate.

    Near the contact point k ~ x^(2/(1-q)) for q < 1 and ~ x^2 for q >= 1
    (up to logarithms at q = 0), so the discrete one-sided slope relative to
    the max slope scales like dx^min(1, (q+1)/(1-q)).
    """
    dx = prof.dx
    slope_left = (-1.5 * prof.ys[0] + 2.0 * prof.ys[1] - 0.5 * prof.ys[2]) / dx
    slope_right = (1.5 * prof.ys[-1] - 2.0 * prof.ys[-2] + 0.5 * prof.ys[-3]) / dx
    smax = np.max(np.abs(np.diff(prof.ys))) / dx
    rel_dx = dx / prof.period_or_length
    expo = min(1.0, (q + 1.0) / (1.0 - q)) if q < 1.0 else 1.0
    tol = 20.0 * rel_dx ** expo
    if max(abs(slope_left), abs(slope_right)) > tol * max(smax, 1e-30):
        raise RuntimeError("droplet endpoints do not have zero contact angle")


@dataclass
class ExistenceVerdict:
    exists: bool
    reason: str
    threshold: float = float("nan")
    value: float = float("nan")


def droplet_exists(params: OscillatorParams, hbar: float, X: float) -> ExistenceVerdict:
    """Does a zero-contact-angle droplet of length <= X and area hbar*X exist?

    -1 < q < 3: iff bond hbar^(q-1) X^2 >= E(0); q = 3: iff equality;
    q > 3: iff <=.  q <= -1: never.
    """
    if hbar <= 0 or X <= 0:
        raise ValueError("hbar and X must be positive")
    q, B = params.q, params.bond
    if q <= -1.0:
        return ExistenceVerdict(False, "no zero-contact-angle droplet for q <= -1")
    value = B * hbar ** (q - 1.0) * X ** 2
    E0 = period_area(0.0, q).E
    if q < 3.0:
        ok = value >= E0 * (1.0 - 1e-12)
        rel = "meets" if ok else "falls below"
        return ExistenceVerdict(ok, f"{rel} the existence threshold E(0)",
                                threshold=E0, value=value)
    if q == 3.0:
        ok = abs(value - E0) <= 1e-9 * E0
        return ExistenceVerdict(ok, "q = 3 requires exact equality with E(0)",
                                threshold=E0, value=value)
    ok = value <= E0 * (1.0 + 1e-12)
    rel = "meets" if ok else "exceeds"
    return ExistenceVerdict(ok, f"{rel} the reversed threshold E(0) for q > 3",
                            threshold=E0, value=value)


# ---------------------------------------------------------------------------
# serialization


def state_to_dict(state) -> dict:
    p = state.params if not isinstance(state, DropletConfiguration) \
        else state.droplets[0].params
    base = {"q": p.q, "bond": p.bond, "n": p.n, "m": p.m}
    if isinstance(state, Constant):
        return {"kind": "constant", **base, "hbar": state.hbar, "X": state.X,
                "area": state.area}
    if isinstance(state, Periodic):
        return {"kind": "periodic", **base, "alpha": state.alpha,
                "D": state.D, "X": state.X, "area": state.area,
                "degenerate_family": state.degenerate_family,
                "profile": {"xs": state.profile.xs.tolist(),
                            "ys": state.profile.ys.tolist()}}
    if isinstance(state, Droplet):
        return {"kind": "droplet", **base, "X": state.length,
                "area": state.area,
                "profile": {"xs": state.profile.xs.tolist(),
                            "ys": state.profile.ys.tolist()}}
    if isinstance(state, DropletConfiguration):
        return {"kind": "droplet_configuration", "X": state.X,
                "area": state.area,
                "droplets": [state_to_dict(d) for d in state.droplets]}
    raise TypeError(f"not a steady state: {type(state)!r}")


def state_to_json(state, **kwargs) -> str:
    kwargs.setdefault("sort_keys", True)
    return json.dumps(state_to_dict(state), **kwargs)


def state_from_dict(d: dict):
    params = OscillatorParams(q=d["q"], bond=d["bond"], n=d["n"], m=d["m"])
    kind = d["kind"]
    if kind == "constant":
        return Constant(params=params, hbar=d["hbar"], X=d["X"])
    if kind == "periodic":
        return rescale_to_physical(d["alpha"], params, X=d["X"],
                                   A_ss=d["area"])
    if kind == "droplet":
        return construct_droplet(params, d["area"])
    raise ValueError(f"unknown steady state kind {kind!r}")
