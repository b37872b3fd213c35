"""Time integration of h_t = -(h^n h_xxx)_x - B (h^m h_x)_x on a periodic
domain.

Conservative staggered finite differences: the flux
F = h^n h_xxx + B h^m h_x lives on cell midpoints and the update is
h^new = h - dt * D_-(F), so mass is conserved to round-off by telescoping.
The fourth-order part is linearly implicit with the mobility frozen at the
current state; the second-order part is theta-weighted.  Steps that raise
the discrete energy are rejected and retried with half the step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .oscillator import OscillatorParams, Profile, eval_H
from .states import Constant, Droplet, Periodic


@dataclass
class PdeConfig:
    params: OscillatorParams
    N: int
    X: float
    dt: float
    t_end: float
    theta: float = 1.0
    positivity_floor: float | None = None  # default 1e-6 * initial mean
    # relative precursor height: clamp the film at precursor*mean(initial)
    # instead of stopping at the floor, so touchdown continues as contact
    # line motion over an ultrathin wetting layer
    precursor: float | None = None
    snapshot_every: int = 200
    steady_tol: float = 1e-9  # ||h_t||_inf threshold, relative to max h
    steady_streak: int = 10
    max_rejects: int = 40

    def __post_init__(self):
        if self.N < 64 or self.N % 2:
            raise ValueError("N must be even and at least 64")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not 0.5 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0.5, 1]")
        if self.params.m >= self.params.n + 2.0:
            raise ValueError("m >= n + 2 lies in the finite-time blow-up "
                             "regime and is not integrated here")


@dataclass
class Trajectory:
    snapshots: list  # (t, Profile)
    t: np.ndarray
    mass: np.ndarray
    energy: np.ndarray
    min_h: np.ndarray
    dissipation_rate: np.ndarray
    termination: str  # t_end | steady | near_rupture
    config: PdeConfig

    @property
    def final(self) -> Profile:
        return self.snapshots[-1][1]


def discrete_energy(h: np.ndarray, params: OscillatorParams,
                    dx: float) -> float:
    """Midpoint-gradient energy paired with the staggered scheme."""
    grad = (np.roll(h, -1) - h) / dx
    return float(np.sum(0.5 * grad ** 2
                        - params.bond * eval_H(h, params.q)) * dx)


class _Stepper:
    """Assembles the linearly-implicit update for one grid."""

    def __init__(self, config: PdeConfig):
        self.config = config
        N, X = config.N, config.X
        self.dx = X / N
        e = np.ones(N)
        # midpoint first difference (result at i+1/2) and its adjoint D_-
        self.Dmid = sp.diags_array([-e, e], offsets=[0, 1],
                                   shape=(N, N), format="lil")
        self.Dmid[-1, 0] = 1.0
        self.Dmid = sp.csr_array(self.Dmid) / self.dx
        # third derivative at i+1/2: difference of node second differences
        D2 = sp.diags_array([e, -2.0 * e, e], offsets=[-1, 0, 1],
                            shape=(N, N), format="lil")
        D2[0, -1] = 1.0
        D2[-1, 0] = 1.0
        D2 = sp.csr_array(D2) / self.dx ** 2
        self.D3mid = self.Dmid @ D2
        self.Dminus = -self.Dmid.T  # divergence of midpoint fluxes
        self.I = sp.identity(N, format="csr")

    def matrices(self, h: np.ndarray):
        p = self.config.params
        hm = 0.5 * (h + np.roll(h, -1))
        a = sp.diags_array([hm ** p.n], offsets=[0])
        b = sp.diags_array([p.bond * hm ** p.m], offsets=[0])
        L4 = self.Dminus @ (a @ self.D3mid)
        L2 = self.Dminus @ (b @ self.Dmid)
        return L4, L2

    def step(self, h: np.ndarray, dt: float) -> np.ndarray:
        th = self.config.theta
        L4, L2 = self.matrices(h)
        lhs = sp.csc_matrix(self.I + dt * (L4 + th * L2))
        rhs = h - dt * (1.0 - th) * (L2 @ h)
        lu = splu(lhs)
        out = lu.solve(rhs)
        # one round of iterative refinement keeps fixed points fixed to
        # round-off despite the conditioning of the fourth-order block
        out += lu.solve(rhs - lhs @ out)
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("linear solve produced non-finite values")
        return out


def step(h: np.ndarray, config: PdeConfig, dt: float,
         stepper: _Stepper | None = None) -> np.ndarray:
    """One accepted linearly-implicit step (no energy control)."""
    if stepper is None:
        stepper = _Stepper(config)
    return stepper.step(h, dt)


def _clamp_to_precursor(h: np.ndarray, wet_layer: float):
    """Raise subthreshold nodes to the precursor height, paying for the
    added mass out of the bulk so the total is unchanged."""
    deficit = np.maximum(wet_layer - h, 0.0)
    added = float(np.sum(deficit))
    if added == 0.0:
        return h
    bulk = h > 10.0 * wet_layer
    if not np.any(bulk):
        return None  # nothing left to pay from; treat as a failed step
    h = np.maximum(h, wet_layer)
    h[bulk] -= added / int(np.count_nonzero(bulk))
    if np.any(h[bulk] <= wet_layer):
        return None
    return h


def evolve(initial: Profile, config: PdeConfig) -> Trajectory:
    """March to t_end, steadiness, or near-rupture, with energy control.

    A step is accepted only if the discrete energy does not increase beyond
    1e-9 relative slack; otherwise dt is halved and the step retried.  dt
    recovers geometrically toward its configured value after acceptances.
    """
    if initial.npoints != config.N or not initial.is_periodic:
        raise ValueError("initial data must live on the configured "
                         "periodic grid")
    h = initial.ys.astype(float).copy()
    if np.any(h <= 0):
        raise ValueError("initial data must be positive")
    p = config.params
    stepper = _Stepper(config)
    dx = stepper.dx
    floor = config.positivity_floor
    if floor is None:
        floor = 1e-6 * float(np.mean(h))
    wet_layer = None
    wet_current = None
    if config.precursor is not None:
        wet_layer = config.precursor * float(np.mean(h))
        # anneal: dewetting over a thick wetting layer is fast (mobility
        # ~ wet^n), so start thick and halve toward the target height each
        # time the film goes quasi-steady at the current level
        wet_current = min(16.0 * wet_layer, 0.05 * float(np.mean(h)))
        wet_current = max(wet_current, wet_layer)
        floor = -math.inf  # the precursor replaces the rupture stop

    t = 0.0
    dt = config.dt
    e_old = discrete_energy(h, p, dx)
    slack = 1e-9
    times = [t]
    mass0 = float(np.sum(h) * dx)
    masses = [mass0]
    energies = [e_old]
    minima = [float(np.min(h))]
    rates = [0.0]
    snapshots = [(t, Profile(initial.xs.copy(), h.copy(), config.X,
                             {"grid": "periodic"}))]
    termination = "t_end"
    streak = 0
    accepted = 0
    while t < config.t_end - 1e-15 * config.t_end:
        dt_try = min(dt, config.t_end - t)
        rejects = 0
        while True:
            try:
                h_new = stepper.step(h, dt_try)
            except FloatingPointError:
                h_new = None
            if wet_current is not None:
                # judge the step on the pre-clamp energy of the raised
                # profile: the conservative clamp pays mass out of the bulk
                # and adds a little energy every step, which must not feed
                # the rejection loop
                ok = h_new is not None and np.all(h_new > -10.0 * wet_current)
                if ok:
                    e_pre = discrete_energy(np.maximum(h_new, wet_current),
                                            p, dx)
                    ok = e_pre <= e_old + slack * max(abs(e_old), 1.0)
                if ok:
                    h_new = _clamp_to_precursor(h_new, wet_current)
                    ok = h_new is not None
                if ok:
                    e_new = discrete_energy(h_new, p, dx)
            else:
                ok = h_new is not None and np.all(h_new > 0)
                if ok:
                    e_new = discrete_energy(h_new, p, dx)
                    ok = e_new <= e_old + slack * max(abs(e_old), 1.0)
            if ok:
                break
            rejects += 1
            if rejects > config.max_rejects:
                raise RuntimeError(
                    "step size collapsed without an acceptable step")
            dt_try *= 0.5
        # the update telescopes exactly, so any mass error is linear-solve
        # round-off; project it out with a constant shift
        h_new += (mass0 / dx - float(np.sum(h_new))) / config.N
        rate = (e_new - e_old) / dt_try
        ht_norm = float(np.max(np.abs(h_new - h))) / dt_try
        h, e_old = h_new, e_new
        t += dt_try
        dt = min(config.dt, dt_try * 2.0)
        accepted += 1
        times.append(t)
        masses.append(float(np.sum(h) * dx))
        energies.append(e_new)
        minima.append(float(np.min(h)))
        rates.append(rate)
        if accepted % config.snapshot_every == 0:
            snapshots.append((t, Profile(initial.xs.copy(), h.copy(),
                                         config.X, {"grid": "periodic"})))
        if float(np.min(h)) <= floor:
            termination = "near_rupture"
            break
        stage_tol = config.steady_tol
        if wet_current is not None and wet_current > 1.0001 * wet_layer:
            stage_tol = max(config.steady_tol, 1e-7)
        if ht_norm < stage_tol * float(np.max(h)):
            streak += 1
            if streak >= config.steady_streak:
                if wet_current is not None and \
                        wet_current > 1.0001 * wet_layer:
                    wet_current = max(wet_layer, 0.5 * wet_current)
                    streak = 0
                    continue
                termination = "steady"
                break
        else:
            streak = 0
    if snapshots[-1][0] != t:
        snapshots.append((t, Profile(initial.xs.copy(), h.copy(), config.X,
                                     {"grid": "periodic"})))
    return Trajectory(snapshots=snapshots, t=np.array(times),
                      mass=np.array(masses), energy=np.array(energies),
                      min_h=np.array(minima),
                      dissipation_rate=np.array(rates),
                      termination=termination, config=config)


# ---------------------------------------------------------------------------
# perturbations


def _direction_vector(ss, direction, N: int, X: float) -> np.ndarray:
    from .stability import _periodic_derivative

    if isinstance(direction, Profile):
        if direction.npoints != N:
            raise ValueError("custom direction must match the grid")
        return direction.ys.astype(float).copy()
    if isinstance(ss, Constant):
        base = np.full(N, ss.hbar)
    else:
        base = ss.profile.ys
    xs = np.arange(N) * (X / N)
    if direction == "h'":
        return _periodic_derivative(base, X)
    if direction == "h''":
        hx = _periodic_derivative(base, X)
        return _periodic_derivative(hx, X)
    if direction == "kappa":
        from .oscillator import kappa_direction
        if not isinstance(ss, Periodic):
            raise ValueError("kappa direction needs a periodic state")
        return kappa_direction(ss.alpha, ss.params.q, npoints=N).ys.copy()
    if isinstance(direction, str) and direction.startswith("sin_"):
        k = int(direction[4:])
        return np.sin(2.0 * math.pi * k * xs / X)
    raise ValueError(f"unknown direction {direction!r}")


def perturb(ss, direction, eps: float, N: int | None = None) -> Profile:
    """h_ss + eps * u with u zero-mean and unit L2 norm on the grid."""
    if isinstance(ss, Constant):
        if N is None:
            N = 256
        base = np.full(N, ss.hbar)
        X = ss.X
        xs = np.arange(N) * (X / N)
    else:
        prof = ss.profile
        if N is not None and N != prof.npoints:
            raise ValueError("N must match the state's grid")
        base, X, xs = prof.ys.copy(), prof.period_or_length, prof.xs.copy()
        N = prof.npoints
    u = _direction_vector(ss, direction, N, X)
    u = u - u.mean()
    nrm = math.sqrt(float(np.sum(u ** 2)) * (X / N))
    if nrm == 0:
        raise ValueError("direction is constant; nothing to perturb with")
    u /= nrm
    ys = base + eps * u
    if np.any(ys <= 0):
        raise ValueError("perturbation drives the film nonpositive; "
                         "reduce |eps|")
    return Profile(xs=xs, ys=ys, period_or_length=X,
                   meta={"grid": "periodic",
                         "label": f"perturbed:{direction!r}:eps={eps}"})


# ---------------------------------------------------------------------------
# limit detection


def _candidate_on_grid(cand, xs: np.ndarray, X: float) -> np.ndarray:
    if isinstance(cand, Constant):
        return np.full(len(xs), cand.hbar)
    if isinstance(cand, Periodic):
        prof = cand.profile
        xp = np.concatenate([prof.xs, [prof.period_or_length]])
        yp = np.concatenate([prof.ys, [prof.ys[0]]])
        return np.interp(np.mod(xs, prof.period_or_length), xp, yp)
    if isinstance(cand, Droplet):
        prof = cand.profile
        return np.interp(np.mod(xs, X), prof.xs, prof.ys, left=0.0,
                         right=0.0)
    raise TypeError(f"not a steady state: {type(cand)!r}")


def _aligned_distance(h: np.ndarray, target: np.ndarray,
                      X: float) -> tuple[float, float]:
    """Min over circular translations of relative L2 distance, with the
    offset refined below the grid spacing by Fourier phase shifts."""
    n = len(h)
    fh, ft = np.fft.fft(h), np.fft.fft(target)
    corr = np.real(np.fft.ifft(fh * np.conj(ft)))
    i0 = int(np.argmax(corr))
    # quadratic refinement of the correlation peak
    cm, c0, cp = corr[(i0 - 1) % n], corr[i0], corr[(i0 + 1) % n]
    denom = cm - 2.0 * c0 + cp
    frac = 0.5 * (cm - cp) / denom if denom != 0 else 0.0
    shift = (i0 + frac) * (X / n)
    k = np.fft.fftfreq(n) * n
    shifted = np.real(np.fft.ifft(ft * np.exp(-2.0j * math.pi * k
                                              * (i0 + frac) / n)))
    scale = math.sqrt(float(np.sum(h ** 2)))
    dist = math.sqrt(float(np.sum((h - shifted) ** 2))) / max(scale, 1e-300)
    return dist, shift % X


@dataclass
class LimitVerdict:
    kind: str  # steady | rupture | inconclusive
    candidate: object = None
    distance: float = float("nan")
    offset: float = float("nan")
    detail: str = ""


def detect_limit(traj: Trajectory, candidates: list) -> LimitVerdict:
    """Nearest candidate to the final state, up to circular translation."""
    if traj.termination == "near_rupture":
        return LimitVerdict(kind="rupture",
                            detail="film reached the positivity floor; "
                                   "no smooth limit candidate applies")
    final = traj.final
    best = None
    for cand in candidates:
        target = _candidate_on_grid(cand, final.xs, traj.config.X)
        dist, offset = _aligned_distance(final.ys, target, traj.config.X)
        if best is None or dist < best[0]:
            best = (dist, offset, cand)
    if best is None:
        return LimitVerdict(kind="inconclusive", detail="no candidates given")
    kind = "steady" if traj.termination == "steady" else "inconclusive"
    return LimitVerdict(kind=kind, candidate=best[2], distance=best[0],
                        offset=best[1],
                        detail=f"trajectory terminated by {traj.termination}")
