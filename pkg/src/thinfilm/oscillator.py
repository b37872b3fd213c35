"""Canonical nonlinear oscillator for power-law thin-film steady states.

Non-constant steady states of h_t = -(h^n h_xxx)_x - B (h^m h_x)_x rescale
to solutions of the canonical oscillator

    k'' + (k^q - 1)/q = 0   (q != 0),      k'' + log k = 0   (q = 0),

with q = m - n + 1.  This module provides the oscillator potential H and its
companion G, the solution family k_alpha (minimum value alpha at x = 0), and
the maps alpha -> P (least period), A (area per period), I2 (integral of
(k')^2) and E = P^(3-q) A^(q-1), together with their alpha-derivatives.

P, A and I2 are computed two independent ways: by singularity-removing
quadrature (the primary route) and by high-order ODE integration (used for
profiles and as a cross-check).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import IntegrationWarning, quad, solve_ivp
from scipy.optimize import brentq
from scipy.special import beta as beta_fn

TWO_PI = 2.0 * math.pi
FOUR_PI2 = 4.0 * math.pi ** 2

# |q| below this routes to the logarithmic branch, |q+1| to the q = -1 branch
_Q_BRANCH_TOL = 1e-12


class QuadratureError(RuntimeError):
    """Quadrature failed to reach the requested tolerance."""


@dataclass(frozen=True)
class OscillatorParams:
    """Exponents and coefficient of the power-law evolution.

    q = m - n + 1 must hold exactly; bond is the coefficient B > 0 of the
    second-order term.
    """

    q: float
    bond: float
    n: float
    m: float

    def __post_init__(self):
        if not self.bond > 0:
            raise ValueError(f"bond must be positive, got {self.bond}")
        if abs(self.q - (self.m - self.n + 1.0)) > 1e-12:
            raise ValueError(
                f"inconsistent exponents: q={self.q} but m-n+1={self.m - self.n + 1.0}"
            )

    @classmethod
    def from_exponents(cls, n: float, m: float, bond: float = 1.0) -> "OscillatorParams":
        return cls(q=m - n + 1.0, bond=bond, n=n, m=m)

    @classmethod
    def from_q(cls, q: float, bond: float = 1.0, n: float = 1.0) -> "OscillatorParams":
        return cls(q=q, bond=bond, n=n, m=q + n - 1.0)

    def r(self, y):
        """Mobility ratio g/f = bond * y^(q-1)."""
        return self.bond * np.asarray(y, dtype=float) ** (self.q - 1.0)

    def r1(self, y):
        """First derivative of r."""
        y = np.asarray(y, dtype=float)
        return self.bond * (self.q - 1.0) * y ** (self.q - 2.0)

    def r2(self, y):
        """Second derivative of r."""
        y = np.asarray(y, dtype=float)
        return self.bond * (self.q - 1.0) * (self.q - 2.0) * y ** (self.q - 3.0)


@dataclass
class Profile:
    """Sampled steady-state profile on a uniform grid.

    Periodic profiles exclude the right endpoint (xs[i] = i*dx, dx = X/N);
    droplet profiles include both endpoints with ys = 0 there.
    """

    xs: np.ndarray
    ys: np.ndarray
    period_or_length: float
    meta: dict = field(default_factory=dict)

    @property
    def npoints(self) -> int:
        return len(self.xs)

    @property
    def is_periodic(self) -> bool:
        return self.meta.get("grid", "periodic") == "periodic"

    @property
    def dx(self) -> float:
        return float(self.xs[1] - self.xs[0])


@dataclass
class AlphaMaps:
    """Bifurcation data of k_alpha at one alpha."""

    alpha: float
    P: float
    A: float
    I2: float
    E: float
    dP: float = float("nan")
    dA: float = float("nan")
    dE: float = float("nan")


# ---------------------------------------------------------------------------
# potentials


def _branch(q: float) -> str:
    if abs(q) < _Q_BRANCH_TOL:
        return "log"
    if abs(q + 1.0) < _Q_BRANCH_TOL:
        return "qm1"
    return "power"


def eval_H(y, q: float):
    """Oscillator potential with H''(y) = y^(q-1) and H'(1) = 0."""
    y = np.asarray(y, dtype=float)
    br = _branch(q)
    if np.any(y < 0):
        raise ValueError("H requires y >= 0")
    if np.any(y == 0) and (br == "qm1" or q <= -1.0):
        raise ValueError(f"H(0) is singular for q = {q} <= -1")
    with np.errstate(divide="ignore", invalid="ignore"):
        if br == "log":
            out = np.where(y > 0, y * np.log(np.where(y > 0, y, 1.0)) - y, 0.0)
        elif br == "qm1":
            out = y - np.log(y)
        else:
            out = (y ** (q + 1.0) / (q + 1.0) - y) / q
            if np.any(y == 0):
                out = np.where(y == 0, 0.0, out)
    return out if out.ndim else float(out)


def eval_G(y, q: float):
    """Companion potential with G''(y) = y^(q-1) and G(0) = 0 for q > -1.

    G differs from H by a function linear in y, so energy differences of
    equal-area states are the same whichever potential is used.
    """
    y = np.asarray(y, dtype=float)
    br = _branch(q)
    if np.any(y < 0):
        raise ValueError("G requires y >= 0")
    if np.any(y == 0) and (br == "qm1" or q <= -1.0):
        raise ValueError(f"G(0) is singular for q = {q} <= -1")
    with np.errstate(divide="ignore", invalid="ignore"):
        if br == "log":
            out = np.where(y > 0, y * np.log(np.where(y > 0, y, 1.0)) - y, 0.0)
        elif br == "qm1":
            out = -np.log(y)
        else:
            out = y ** (q + 1.0) / (q * (q + 1.0))
            if np.any(y == 0):
                out = np.where(y == 0, 0.0, out)
    return out if out.ndim else float(out)


def eval_H_prime(y, q: float):
    """H'(y): (y^q - 1)/q, or log y at q = 0, or 1 - 1/y at q = -1."""
    y = np.asarray(y, dtype=float)
    br = _branch(q)
    if br == "log":
        out = np.log(y)
    elif br == "qm1":
        out = 1.0 - 1.0 / y
    else:
        out = (y ** q - 1.0) / q
    return out if out.ndim else float(out)


def _H_centered(y, q: float):
    """H(y) - H(1), computed without cancellation for y near 1.

    H(1) = -1/(q+1) for q != -1 and H(1) = 1 for q = -1.  The centered value
    is what the quadrature needs (only differences of H enter), and the
    expm1 form keeps full relative accuracy as alpha -> 1.
    """
    y = np.asarray(y, dtype=float)
    br = _branch(q)
    s = y - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        if br == "log":
            # y log y - y + 1 = (1+s) log1p(s) - s; below ~eps the subtraction
            # y - 1 rounds to -1 exactly, so use the direct form there
            safe = y > 1e-8
            direct = np.where(y > 0, y, 1.0)
            out = np.where(
                safe,
                (1.0 + s) * np.log1p(np.where(safe, s, 0.0)) - s,
                np.where(y > 0, direct * np.log(direct) - y + 1.0, 1.0))
        elif br == "qm1":
            out = s - np.log1p(s)
        else:
            # (y^(q+1) - 1)/(q+1) - (y - 1), all over q
            pw = np.expm1((q + 1.0) * np.log(np.where(y > 0, y, 1.0)))
            pw = np.where(y > 0, pw, -1.0)
            out = (pw / (q + 1.0) - (y - 1.0)) / q
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# turning point and quadrature maps


def beta_max(alpha: float, q: float) -> float:
    """Upper turning point beta > 1 with H(beta) = H(alpha).

    The oscillator conserves (k')^2/2 + H(k), so k_alpha oscillates between
    alpha and beta.  Requires q > -1 when alpha = 0.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0,1), got {alpha}")
    if alpha == 0.0 and q <= -1.0:
        raise ValueError("alpha = 0 requires q > -1")
    if alpha > 1.0 - 1e-14:
        return 1.0
    target = _H_centered(alpha, q)

    def g(b):
        return _H_centered(b, q) - target

    # H is decreasing then increasing with minimum at 1, so a unique beta > 1
    # exists; expand the bracket geometrically.
    lo = 1.0
    width = max(1.0 - alpha, 1e-9)
    hi = 1.0 + width
    for _ in range(200):
        if g(hi) >= 0.0:
            break
        width *= 2.0
        hi = 1.0 + width
    else:
        raise RuntimeError(f"no bracket for beta at alpha={alpha}, q={q}")
    return brentq(g, lo, hi, xtol=1e-15, rtol=1e-15)


def _H_diff(a: float, delta: float, q: float) -> float:
    """H(a) - H(a + delta), cancellation-free for small |delta|.

    The quadrature only ever needs differences of H between nearby points, and
    forming them from H values directly loses all precision as alpha -> 1.
    """
    if delta == 0.0:
        return 0.0
    b = a + delta
    br = _branch(q)
    if a == 0.0:
        # H(0) = 0 on every branch with q > -1; the difference from zero
        # height is exact, no cancellation even for subnormal delta
        if br == "log":
            return delta * (1.0 - math.log(delta)) if delta > 0 else 0.0
        return (delta / q) * (1.0 - delta ** q / (q + 1.0))
    if abs(delta) > 0.1 * a:
        return float(_H_centered(a, q) - _H_centered(b, q))
    if br == "log":
        # H = y log y - y
        return delta * (1.0 - math.log(a)) - b * math.log1p(delta / a)
    if br == "qm1":
        # H = y - log y
        return -delta + math.log1p(delta / a)
    # H = [y^(q+1)/(q+1) - y]/q
    pw = a ** (q + 1.0) * math.expm1((q + 1.0) * math.log1p(delta / a))
    return -(pw / (q + 1.0) - delta) / q


def _map_integral(alpha: float, q: float, fk, vanishing: bool = False) -> float:
    """2 * integral over [alpha, beta] of fk(k) / sqrt(2 (H(a)-H(k))) dk.

    With vanishing=True the integrand is fk(k) * sqrt(2 (H(a)-H(k))) instead
    (used for I2).  The substitution k = alpha + (beta-alpha) sin^2(theta)
    removes the inverse-square-root endpoint singularities analytically; the
    H difference is expanded from whichever turning point is closer.
    """
    beta = beta_max(alpha, q)
    span = beta - alpha
    if span <= 0:
        return 0.0
    # residual of the turning-point solve; folds into the beta-side branch so
    # both branches agree to rounding at the crossover
    resid = _H_diff(alpha, span, q)

    def integrand(theta):
        s = math.sin(theta)
        c = math.cos(theta)
        s2 = s * s
        if s2 <= 0.5:
            k = alpha + span * s2
            dH = _H_diff(alpha, span * s2, q)
        else:
            k = beta - span * c * c
            dH = _H_diff(beta, -span * c * c, q) + resid
        if dH <= 0.0:
            return 0.0
        root = math.sqrt(2.0 * dH)
        if vanishing:
            return 2.0 * span * s * c * fk(k) * root
        return 2.0 * span * s * c * fk(k) / root

    with warnings.catch_warnings():
        # the error estimate is checked explicitly below
        warnings.simplefilter("ignore", IntegrationWarning)
        val, err = quad(integrand, 0.0, 0.5 * math.pi, epsabs=1e-13,
                        epsrel=1e-11, limit=400)
    scale = max(abs(val), 1e-30)
    if err > 1e-8 * scale and err > 1e-10:
        raise QuadratureError(
            f"quadrature error {err:.2e} for alpha={alpha}, q={q}")
    return 2.0 * val


def period_area(alpha: float, q: float) -> AlphaMaps:
    """Least period P, area A and I2 = integral of (k_alpha')^2 over a period.

    q = 1 short-circuits to the exact values P = A = 2*pi, I2 = pi (1-alpha)^2
    (there k_alpha = 1 + (alpha-1) cos x).
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0,1), got {alpha}")
    if alpha == 0.0 and q <= -1.0:
        raise ValueError("alpha = 0 requires q > -1")
    if abs(q - 1.0) < _Q_BRANCH_TOL:
        P, A = TWO_PI, TWO_PI
        I2 = math.pi * (1.0 - alpha) ** 2
    else:
        P = _map_integral(alpha, q, lambda k: 1.0)
        A = _map_integral(alpha, q, lambda k: k)
        I2 = _map_integral(alpha, q, lambda k: 1.0, vanishing=True)
    E = P ** (3.0 - q) * A ** (q - 1.0)
    return AlphaMaps(alpha=alpha, P=P, A=A, I2=I2, E=E)


def potential_integral(alpha: float, q: float, fk) -> float:
    """Integral of fk(k_alpha(x)) dx over one period, by quadrature."""
    if abs(q - 1.0) < _Q_BRANCH_TOL:
        # k = 1 + (alpha-1) cos x
        xs = np.linspace(0.0, TWO_PI, 4097)
        ks = 1.0 + (alpha - 1.0) * np.cos(xs)
        vals = np.array([fk(k) for k in ks])
        return float(np.trapz(vals, xs))
    return _map_integral(alpha, q, fk)


def E_of_alpha(alpha: float, q: float) -> float:
    """The scale invariant E(alpha) = P^(3-q) A^(q-1)."""
    return period_area(alpha, q).E


def E0_closed_form(q: float) -> float:
    """Closed form of E(0) in terms of Beta functions, valid for q > 0.

    E(0) = (2/q)(1+q) B(1/2q, 1/2)^(3-q) B(3/2q, 1/2)^(q-1).
    """
    if q <= 0.0:
        raise ValueError("closed form requires q > 0; use E_of_alpha(0, q)")
    return (2.0 / q) * (1.0 + q) \
        * beta_fn(1.0 / (2.0 * q), 0.5) ** (3.0 - q) \
        * beta_fn(3.0 / (2.0 * q), 0.5) ** (q - 1.0)


# ---------------------------------------------------------------------------
# derivatives in alpha


def _fd_step(alpha: float, step: float | None) -> float:
    if step is not None:
        return step
    return max(1e-5, 1e-3 * min(alpha, 1.0 - alpha))


def alpha_derivatives(alpha: float, q: float, step: float | None = None,
                      check: bool = True) -> tuple[float, float, float]:
    """(dP/dalpha, dA/dalpha, dE/dalpha) by a centered 4-point stencil.

    For q != -1 the results are validated against the exact identities

        A' = -(q+1) H(alpha) P' - (q-1)/2 H'(alpha) P
        E' = -(A/P)^(q-2) { P'[(q-3)A + (q-1)(q+1) H(alpha) P]
                            + (q-1)^2/2 H'(alpha) P^2 }

    and a residual above 1e-5 relative raises (quadrature/step mismatch).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be interior to (0,1)")
    if abs(q - 1.0) < _Q_BRANCH_TOL:
        return 0.0, 0.0, 0.0
    h = _fd_step(alpha, step)
    h = min(h, 0.25 * min(alpha, 1.0 - alpha))
    ms = [period_area(alpha + j * h, q) for j in (-2, -1, 1, 2)]
    dP = (ms[0].P - 8.0 * ms[1].P + 8.0 * ms[2].P - ms[3].P) / (12.0 * h)
    dA = (ms[0].A - 8.0 * ms[1].A + 8.0 * ms[2].A - ms[3].A) / (12.0 * h)
    dE = (ms[0].E - 8.0 * ms[1].E + 8.0 * ms[2].E - ms[3].E) / (12.0 * h)
    if check and abs(q + 1.0) > _Q_BRANCH_TOL:
        m = period_area(alpha, q)
        Ha = eval_H(alpha, q)
        Hp = eval_H_prime(alpha, q)
        rhsA = -(q + 1.0) * Ha * dP - 0.5 * (q - 1.0) * Hp * m.P
        rhsE = -(m.A / m.P) ** (q - 2.0) * (
            dP * ((q - 3.0) * m.A + (q - 1.0) * (q + 1.0) * Ha * m.P)
            + 0.5 * (q - 1.0) ** 2 * Hp * m.P ** 2)
        scale = abs(Hp) * m.P + abs(dP) + 1.0
        if abs(dA - rhsA) > 1e-5 * max(abs(rhsA), scale * 1e-2):
            raise QuadratureError(
                f"A' identity residual {abs(dA - rhsA):.2e} at alpha={alpha}, q={q}")
        scaleE = max(abs(rhsE), m.E)
        if abs(dE - rhsE) > 1e-5 * scaleE:
            raise QuadratureError(
                f"E' identity residual {abs(dE - rhsE):.2e} at alpha={alpha}, q={q}")
    return dP, dA, dE


def alpha_maps(alpha: float, q: float, derivatives: bool = True) -> AlphaMaps:
    """Full bifurcation record at one alpha."""
    m = period_area(alpha, q)
    if derivatives and 0.0 < alpha < 1.0:
        m.dP, m.dA, m.dE = alpha_derivatives(alpha, q)
    return m


# ---------------------------------------------------------------------------
# ODE route: profiles and the shooting cross-check


def _oscillator_rhs(q: float):
    if abs(q) < _Q_BRANCH_TOL:
        def rhs(x, y):
            return [y[1], -math.log(y[0])]
    else:
        def rhs(x, y):
            return [y[1], -(y[0] ** q - 1.0) / q]
    return rhs


def _integrate_k(alpha: float, q: float, x_end: float):
    sol = solve_ivp(_oscillator_rhs(q), (0.0, x_end), [alpha, 0.0],
                    method="DOP853", rtol=1e-12, atol=1e-14,
                    dense_output=True)
    if not sol.success:
        raise RuntimeError(f"oscillator integration failed: {sol.message}")
    return sol


def period_ode(alpha: float, q: float) -> tuple[float, float]:
    """(P, A) measured by shooting: integrate from the minimum and detect the
    half period where k' returns to zero.  Independent of the quadrature
    route."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("shooting requires interior alpha")
    P_guess = period_area(alpha, q).P

    def kp(x, y):
        return y[1]
    kp.terminal = True
    kp.direction = -1

    sol = solve_ivp(_oscillator_rhs(q), (1e-12, 3.0 * P_guess), [alpha, 0.0],
                    method="DOP853", rtol=1e-12, atol=1e-14,
                    events=kp, dense_output=True)
    if not sol.success or len(sol.t_events[0]) == 0:
        raise RuntimeError("shooting failed to locate the half period")
    half = float(sol.t_events[0][0])
    P = 2.0 * half
    area_half, _ = quad(lambda x: float(sol.sol(x)[0]), 0.0, half,
                        epsabs=1e-12, epsrel=1e-12, limit=200)
    return P, 2.0 * area_half


def profile_k(alpha: float, q: float, npoints: int = 256) -> Profile:
    """Sample k_alpha on one least period from high-order ODE integration.

    The grid is uniform with the right endpoint excluded; the first sample is
    the minimum (k(0) = alpha, k'(0) = 0).  The ODE's measured period is
    required to match the quadrature period to 1e-8 relative.
    """
    if npoints < 16:
        raise ValueError("npoints must be >= 16")
    if not 0.0 < alpha < 1.0:
        raise ValueError("profile_k requires alpha in (0,1)")
    P = period_area(alpha, q).P
    P_sh, _ = period_ode(alpha, q)
    if abs(P_sh - P) > 1e-8 * P:
        raise RuntimeError(
            f"period mismatch: quadrature {P} vs shooting {P_sh}")
    sol = _integrate_k(alpha, q, P)
    xs = np.arange(npoints) * (P / npoints)
    ys = sol.sol(xs)[0]
    return Profile(xs=xs, ys=ys, period_or_length=P,
                   meta={"kind": "canonical", "alpha": alpha, "q": q,
                         "grid": "periodic"})


def kappa_direction(alpha: float, q: float, npoints: int = 256) -> Profile:
    """Zero-mean perturbation direction kappa_alpha on the unit period.

    K_alpha(x) = (P/A) k_alpha(P x) has period 1 and mean 1; kappa is its
    alpha-derivative, computed by a centered difference at fixed x.  It is
    even in x and has mean zero.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("kappa requires interior alpha")
    h = min(1e-4, 0.25 * min(alpha, 1.0 - alpha))
    xs = np.arange(npoints) / npoints

    def K(a):
        if abs(q - 1.0) < _Q_BRANCH_TOL:
            return 1.0 + (a - 1.0) * np.cos(TWO_PI * xs)
        m = period_area(a, q)
        sol = _integrate_k(a, q, m.P)
        return (m.P / m.A) * sol.sol(m.P * xs)[0]

    kap = (K(alpha + h) - K(alpha - h)) / (2.0 * h)
    kap -= kap.mean()
    return Profile(xs=xs, ys=kap, period_or_length=1.0,
                   meta={"kind": "kappa", "alpha": alpha, "q": q,
                         "grid": "periodic"})
