"""Energy functional, its variations, the constrained eigenvalue tau1,
and the stability classifier.

The energy is E(h) = int [ (h')^2/2 - B*Pot(h) ] dx with Pot the canonical
potential H (H'' = y^(q-1), so B*H'' equals the mobility ratio r = g/f) or
its companion G with G(0) = 0, used when droplets enter the comparison.

Stability is decided against zero-mean perturbations at fixed period:
tau1 < 0 means linear instability and hence energy instability; for power
laws the exponent q settles most of the remaining cases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.linalg import eigh, null_space

from .oscillator import (
    FOUR_PI2,
    OscillatorParams,
    Profile,
    alpha_maps,
    eval_G,
    eval_H,
    eval_H_prime,
    kappa_direction,
)
from .states import Constant, Droplet, Periodic

DE_ZERO_RTOL = 1e-6  # |dE| below this (relative to E) is treated as zero
THRESHOLD_RTOL = 1e-9  # equality tolerance for B hbar^(q-1) X^2 vs 4 pi^2


# ---------------------------------------------------------------------------
# discrete calculus on profiles


def _periodic_derivative(ys: np.ndarray, X: float) -> np.ndarray:
    """Spectral derivative on the right-endpoint-excluding periodic grid."""
    n = len(ys)
    k = 2.0j * math.pi * np.fft.fftfreq(n) * n / X
    if n % 2 == 0:
        k[n // 2] = 0.0  # drop the unpaired Nyquist mode
    return np.real(np.fft.ifft(k * np.fft.fft(ys)))


def _closed_derivative(ys: np.ndarray, dx: float) -> np.ndarray:
    """Fourth-order finite differences on a closed uniform grid."""
    out = np.empty_like(ys)
    out[2:-2] = (ys[:-4] - 8.0 * ys[1:-3] + 8.0 * ys[3:-1] - ys[4:]) / (12.0 * dx)
    fwd = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12.0 * dx)
    out[0] = fwd @ ys[:5]
    out[1] = fwd @ ys[1:6]
    out[-1] = -(fwd @ ys[-1:-6:-1])
    out[-2] = -(fwd @ ys[-2:-7:-1])
    return out


def _derivative(prof: Profile) -> np.ndarray:
    if prof.is_periodic:
        return _periodic_derivative(prof.ys, prof.period_or_length)
    return _closed_derivative(prof.ys, prof.dx)


def _integrate(values: np.ndarray, prof: Profile) -> float:
    if prof.is_periodic:
        return float(np.sum(values) * prof.dx)
    return float(simpson(values, dx=prof.dx))


def _require_same_grid(a: Profile, b: Profile):
    if a.npoints != b.npoints or abs(a.period_or_length - b.period_or_length) \
            > 1e-12 * a.period_or_length:
        raise ValueError("profiles must share one grid")


def energy(prof: Profile, params: OscillatorParams,
           potential: str = "H") -> float:
    """E(h) = int [ (h')^2/2 - B*Pot(h) ] dx over the profile's domain.

    potential="G" uses the companion potential with G(0) = 0, which makes a
    droplet's zero tail contribute nothing; required when q <= -1 profiles
    touch zero (they cannot, so that is a domain error).
    """
    q = params.q
    ys = prof.ys
    if np.any(ys < 0):
        raise ValueError("profile must be nonnegative")
    if np.any(ys == 0) and q <= -1.0:
        raise ValueError("zero film height requires q > -1")
    pot = eval_H(ys, q) if potential == "H" else eval_G(ys, q)
    hx = _derivative(prof)
    return _integrate(0.5 * hx ** 2 - params.bond * pot, prof)


@dataclass
class VariationReport:
    """First four derivatives of eps -> E(h + eps*u) at eps = 0."""

    d1: float
    d2: float
    d3: float
    d4: float
    direction_label: str = ""


def variations(h_ss: Profile, u: Profile,
               params: OscillatorParams) -> VariationReport:
    """Variations of the energy at h_ss in the zero-mean direction u.

    d1 = -int (h'' + B H'(h)) u        (vanishes at steady states)
    d2 = int (u')^2 - r(h) u^2         (the Rayleigh numerator)
    d3 = -int r'(h) u^3
    d4 = -int r''(h) u^4
    """
    _require_same_grid(h_ss, u)
    mean = abs(_integrate(u.ys, u)) / u.period_or_length
    scale = math.sqrt(_integrate(u.ys ** 2, u) / u.period_or_length)
    if mean > 1e-8 * max(scale, 1e-300):
        raise ValueError("direction u must have zero mean")
    h, v = h_ss.ys, u.ys
    hxx = _derivative(Profile(h_ss.xs, _derivative(h_ss),
                              h_ss.period_or_length, h_ss.meta))
    ux = _derivative(u)
    d1 = -_integrate((hxx + params.bond * eval_H_prime(h, params.q)) * v, h_ss)
    d2 = _integrate(ux ** 2 - params.r(h) * v ** 2, h_ss)
    d3 = -_integrate(params.r1(h) * v ** 3, h_ss)
    d4 = -_integrate(params.r2(h) * v ** 4, h_ss)
    return VariationReport(d1=d1, d2=d2, d3=d3, d4=d4,
                           direction_label=u.meta.get("label", ""))


# ---------------------------------------------------------------------------
# constrained Rayleigh eigenvalue


def tau1(h_ss: Profile, params: OscillatorParams) -> tuple[float, Profile]:
    """Smallest eigenvalue of u -> -u'' - r(h_ss)u on zero-mean periodic u.

    Second-order symmetric finite differences; the constant mode is deflated
    by restricting to an orthonormal basis of its complement, keeping the
    problem symmetric.  The eigenfunction is returned zero-mean with unit
    L2 norm.
    """
    if not h_ss.is_periodic:
        raise ValueError("tau1 is defined on periodic grids")
    n = h_ss.npoints
    if n < 64:
        raise ValueError("need at least 64 grid points")
    dx = h_ss.dx
    main = 2.0 / dx ** 2 - params.r(h_ss.ys)
    A = np.diag(main)
    off = -1.0 / dx ** 2
    idx = np.arange(n)
    A[idx, (idx + 1) % n] = off
    A[idx, (idx - 1) % n] = off
    Q = null_space(np.ones((1, n)))
    w, v = eigh(Q.T @ A @ Q)
    tau = float(w[0])
    u = Q @ v[:, 0]
    u -= u.mean()
    u /= math.sqrt(np.sum(u ** 2) * dx)
    eig = Profile(xs=h_ss.xs.copy(), ys=u,
                  period_or_length=h_ss.period_or_length,
                  meta={"grid": "periodic", "label": "tau1-eigenfunction"})
    return tau, eig


# ---------------------------------------------------------------------------
# classifier


@dataclass
class StabilityVerdict:
    kind: str  # EnergyUnstable | EnergyStable | NeutralFamily |
    #            LocalMinimum | Undetermined
    theorem: str
    tau1: float
    mu1: float
    witnesses: list = field(default_factory=list)  # Profiles, when unstable
    detail: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind, "theorem": self.theorem,
                "tau1": self.tau1, "mu1": self.mu1, "detail": self.detail,
                "witness_labels": [w.meta.get("label", "") for w
                                   in self.witnesses]}


def _zero_mean(ys: np.ndarray, dx: float) -> np.ndarray:
    out = ys - ys.mean()
    nrm = math.sqrt(np.sum(out ** 2) * dx)
    return out / nrm if nrm > 0 else out


def _witness(h_ss: Profile, ys: np.ndarray, label: str) -> Profile:
    return Profile(xs=h_ss.xs.copy(), ys=_zero_mean(ys, h_ss.dx),
                   period_or_length=h_ss.period_or_length,
                   meta={"grid": "periodic", "label": label})


def _classify_constant(ss: Constant, X: float) -> StabilityVerdict:
    p = ss.params
    value = p.r(ss.hbar) * X ** 2
    t1 = (2.0 * math.pi / X) ** 2 - float(p.r(ss.hbar))
    mu1 = X ** 2 * t1
    xs = np.arange(256) * (X / 256)
    trig = [
        Profile(xs, np.sin(2.0 * math.pi * xs / X) * math.sqrt(2.0 / X), X,
                {"grid": "periodic", "label": "sin(2 pi x / X)"}),
        Profile(xs, np.cos(2.0 * math.pi * xs / X) * math.sqrt(2.0 / X), X,
                {"grid": "periodic", "label": "cos(2 pi x / X)"}),
    ]
    gap = value - FOUR_PI2
    if abs(gap) <= THRESHOLD_RTOL * FOUR_PI2:
        r2 = float(p.r2(ss.hbar))
        if r2 > 0:
            return StabilityVerdict(
                kind="EnergyUnstable", theorem="neutral-mode-convexity",
                tau1=t1, mu1=mu1, witnesses=trig,
                detail="r(hbar) X^2 = 4 pi^2 with r'' > 0: the neutral "
                       "trigonometric modes lower the energy at third order")
        if r2 < 0:
            return StabilityVerdict(
                kind="EnergyStable", theorem="neutral-mode-concavity",
                tau1=t1, mu1=mu1,
                detail="r(hbar) X^2 = 4 pi^2 with r'' < 0")
        return StabilityVerdict(
            kind="Undetermined", theorem="neutral-mode-degenerate",
            tau1=t1, mu1=mu1,
            detail="r(hbar) X^2 = 4 pi^2 and r'' = 0")
    if gap > 0:
        return StabilityVerdict(
            kind="EnergyUnstable", theorem="linear-instability",
            tau1=t1, mu1=mu1, witnesses=trig,
            detail="r(hbar) X^2 > 4 pi^2 makes tau1 negative")
    return StabilityVerdict(
        kind="LocalMinimum", theorem="subcritical-constant",
        tau1=t1, mu1=mu1,
        detail="r(hbar) X^2 < 4 pi^2: strict local minimum among zero-mean "
               "perturbations, nonlinearly stable")


def _classify_periodic(ss: Periodic, X: float) -> StabilityVerdict:
    p = ss.params
    q = p.q
    prof = ss.profile
    if abs(X - ss.X) > 1e-12 * ss.X:
        # analysis period must carry the state; j copies on a longer period
        ratio = X / ss.X
        j = round(ratio)
        if abs(ratio - j) > 1e-9 or j < 1:
            raise ValueError("analysis period must be a multiple of the "
                             "state's period")
        ys = np.tile(prof.ys, j)
        xs = np.arange(len(ys)) * (X / len(ys))
        prof = Profile(xs, ys, X, {"grid": "periodic"})
    t1, eig = tau1(prof, p)
    mu1 = X ** 2 * t1
    hx = _periodic_derivative(prof.ys, X)
    hxx = _periodic_derivative(hx, X)
    # translation invariance pins the true tau1 at <= 0 (u = h' has zero
    # Rayleigh numerator), so the discrete value sits a discretization error
    # below zero even for stable states; only call instability beyond that
    scale = float(np.max(np.abs(p.r(prof.ys)))) + (2.0 * math.pi / X) ** 2
    if t1 < -50.0 * scale / prof.npoints ** 2:
        return StabilityVerdict(
            kind="EnergyUnstable", theorem="linear-instability",
            tau1=t1, mu1=mu1, witnesses=[eig],
            detail="tau1 < 0: linear instability implies energy instability")
    if abs(q - 1.0) < 1e-12:
        return StabilityVerdict(
            kind="NeutralFamily", theorem="amplitude-continuum",
            tau1=t1, mu1=mu1,
            detail="q = 1: the state sits in a continuum of equal-energy "
                   "steady states and is not asymptotically stable")
    if q < 1.0 or q > 2.0:
        wit = [_witness(prof, hx, "+h'"), _witness(prof, -hx, "-h'"),
               _witness(prof, hxx, "+h''"), _witness(prof, -hxx, "-h''")]
        return StabilityVerdict(
            kind="EnergyUnstable", theorem="translate-and-bend",
            tau1=t1, mu1=mu1, witnesses=wit,
            detail="q < 1 or q > 2: unstable in the directions +-h', +-h''")
    if abs(q - 2.0) < 1e-12:
        return StabilityVerdict(
            kind="EnergyUnstable", theorem="cubic-bend",
            tau1=t1, mu1=mu1, witnesses=[_witness(prof, -hxx, "-h''")],
            detail="q = 2: second variation vanishes along -h'' and the "
                   "third is negative")
    maps = alpha_maps(ss.alpha, q)
    if abs(maps.dE) < DE_ZERO_RTOL * abs(maps.E):
        return StabilityVerdict(
            kind="Undetermined", theorem="flat-period-map",
            tau1=t1, mu1=mu1,
            detail=f"1 < q < 2 with E'(alpha) = {maps.dE:.3e} within "
                   "tolerance of zero")
    if maps.dE > 0:
        kap = kappa_direction(ss.alpha, q, npoints=prof.npoints)
        wit = [_witness(prof, s * kap.ys, lbl)
               for s, lbl in ((1.0, "+kappa(x/X)"), (-1.0, "-kappa(x/X)"))]
        return StabilityVerdict(
            kind="EnergyUnstable", theorem="rising-period-map",
            tau1=t1, mu1=mu1, witnesses=wit,
            detail="1 < q < 2 with E'(alpha) > 0")
    return StabilityVerdict(
        kind="EnergyStable", theorem="falling-period-map",
        tau1=t1, mu1=mu1,
        detail="1 < q < 2 with E'(alpha) < 0")


def classify(ss, at_period: float | None = None) -> StabilityVerdict:
    """Stability verdict for a steady state analyzed at the given period."""
    if isinstance(ss, Constant):
        return _classify_constant(ss, at_period if at_period else ss.X)
    if isinstance(ss, Periodic):
        return _classify_periodic(ss, at_period if at_period else ss.X)
    if isinstance(ss, Droplet):
        return StabilityVerdict(
            kind="Undetermined", theorem="outside-scope",
            tau1=float("nan"), mu1=float("nan"),
            detail="no classification is made for droplet states")
    raise TypeError(f"not a steady state: {type(ss)!r}")


def odd_perturbation_raises_energy(ss: Periodic, u: Profile,
                                   rtol: float = 0.0) -> bool:
    """For 1 < q < 2, an odd zero-mean u with h_ss + u > 0 raises the energy.

    Verified by direct evaluation rather than assumed; requires r'' < 0,
    i.e. strong concavity of the mobility ratio.
    """
    q = ss.params.q
    if not 1.0 < q < 2.0:
        raise ValueError("the odd-perturbation result needs 1 < q < 2")
    _require_same_grid(ss.profile, u)
    odd_defect = np.max(np.abs(u.ys + np.roll(u.ys[::-1], 1)))
    if odd_defect > 1e-8 * max(np.max(np.abs(u.ys)), 1e-300):
        raise ValueError("u must be odd about x = 0")
    ys = ss.profile.ys + u.ys
    if np.any(ys <= 0):
        raise ValueError("perturbed profile must stay positive")
    pert = Profile(ss.profile.xs, ys, ss.X, {"grid": "periodic"})
    e0 = energy(ss.profile, ss.params)
    e1 = energy(pert, ss.params)
    return e1 > e0 + rtol * abs(e0)


def even_restriction(prof: Profile) -> Profile:
    """Half-domain restriction of an even periodic profile.

    Even zero-mean perturbations at period X correspond to no-flux
    boundary conditions on [0, X/2]; witnesses restricted this way remain
    admissible there.
    """
    sym_defect = np.max(np.abs(prof.ys - np.roll(prof.ys[::-1], 1)))
    if sym_defect > 1e-8 * max(np.max(np.abs(prof.ys)), 1e-300):
        raise ValueError("profile must be even about x = 0")
    n = prof.npoints // 2
    xs = prof.xs[: n + 1]
    return Profile(xs=xs.copy(), ys=prof.ys[: n + 1].copy(),
                   period_or_length=prof.period_or_length / 2.0,
                   meta={**prof.meta, "grid": "closed"})
