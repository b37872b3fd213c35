"""Command-line front end: alpha maps, classification, energy levels,
droplet construction, the two-state tango, PDE runs, and level crossings.

Outputs are byte-stable for a fixed config and seed: CSV floats use %.12g,
JSON keys are sorted, and no timestamps are written.  When --out is given,
figures are rendered to PNG next to the data files.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .oscillator import FOUR_PI2, OscillatorParams, alpha_maps
from .states import (Constant, Droplet, Periodic, construct_droplet,
                     construct_periodic, droplet_exists, state_to_dict)
from .stability import classify, energy
from .levels import (E0_of_q, F_of_alpha, L_of_q, compare_constant_droplet,
                     compare_periodic_constant, compare_periodic_droplet,
                     crossings_report, levels_table_csv, maps_table_csv,
                     two_state_tango)
from .pde import PdeConfig, detect_limit, evolve, perturb


class ValidationError(ValueError):
    """Bad flag or config values; maps to exit code 2."""


def _floats(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ValidationError(f"expected comma-separated floats: {text!r}") \
            from exc


def _grid(text: str) -> np.ndarray:
    """Either 'lo:hi:count' or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValidationError(f"grid must be lo:hi:count, got {text!r}")
        try:
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ValidationError(f"bad grid spec {text!r}") from exc
        if count < 2 or not lo < hi:
            raise ValidationError(f"degenerate grid spec {text!r}")
        return np.linspace(lo, hi, count)
    return np.array(_floats(text))


def _params(args) -> OscillatorParams:
    if args.bond <= 0:
        raise ValidationError("bond number must be positive")
    if args.n is not None or args.m is not None:
        if args.n is None or args.m is None:
            raise ValidationError("give both --n and --m or neither")
        p = OscillatorParams.from_exponents(args.n, args.m, args.bond)
        if args.q is not None and abs(p.q - args.q) > 1e-12:
            raise ValidationError("--q disagrees with m - n + 1")
        return p
    if args.q is None:
        raise ValidationError("one of --q or --n/--m is required")
    return OscillatorParams.from_q(args.q, args.bond)


def _positive(value, name: str) -> float:
    if value is None or value <= 0:
        raise ValidationError(f"--{name} must be given and positive")
    return float(value)


def _out_dir(args) -> Path | None:
    if args.out is None:
        return None
    path = Path(args.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _emit_json(payload: dict, out: Path | None, name: str) -> None:
    payload = dict(payload)
    payload["tool_version"] = __version__
    text = json.dumps(payload, sort_keys=True, indent=2,
                      default=_json_default) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        (out / name).write_text(text)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (Constant, Periodic, Droplet)):
        return state_to_dict(obj)
    raise TypeError(f"not JSON-serializable: {type(obj)!r}")


def _profile_csv(prof) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "h"])
    for x, y in zip(prof.xs, prof.ys):
        w.writerow(["%.12g" % x, "%.12g" % y])
    return buf.getvalue()


def _figure():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _report_to_dict(rep) -> dict:
    return {"pair": list(rep.pair), "delta_energy": rep.delta_energy,
            "ordering": rep.ordering, "theorem": rep.theorem,
            "diagnostics": rep.diagnostics}


# ---------------------------------------------------------------------------
# subcommands


def cmd_maps(args) -> int:
    qs = _floats(args.q) if args.q else [1.75, 1.76, 1.768, 1.78, 1.79]
    alphas = _grid(args.alpha_grid)
    if np.any(alphas <= 0) or np.any(alphas >= 1):
        raise ValidationError("alpha grid must lie strictly inside (0, 1)")
    out = _out_dir(args)
    tables = {q: maps_table_csv(q, alphas) for q in qs}
    if out is None:
        for q in qs:
            sys.stdout.write(f"# q = {q:.12g}\n" + tables[q])
        return 0
    for q in qs:
        (out / f"maps_q{q:.12g}.csv").write_text(tables[q])
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6, 4))
    for q in qs:
        es = [alpha_maps(a, q, derivatives=False).E for a in alphas]
        ax.plot(alphas, es, label=f"q = {q:.12g}")
    ax.axhline(FOUR_PI2, color="k", lw=0.6, ls=":")
    ax.set_xlabel("alpha")
    ax.set_ylabel("E(alpha)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out / "maps_E.png", dpi=150)
    plt.close(fig)
    return 0


def cmd_classify(args) -> int:
    p = _params(args)
    X = _positive(args.X, "X")
    out = _out_dir(args)
    states = []
    if args.hbar is not None and args.area is None:
        states.append(Constant(params=p, hbar=_positive(args.hbar, "hbar"),
                               X=X))
    elif args.area is not None:
        states.extend(construct_periodic(p, X, _positive(args.area, "area"),
                                         npoints=args.N or 256))
    else:
        raise ValidationError("give --hbar (constant) or --area (periodic)")
    if not states:
        raise ValidationError("no periodic steady state at this "
                              "period/area; nothing to classify")
    results = []
    for ss in states:
        verdict = classify(ss)
        results.append({"state": state_to_dict(ss),
                        "verdict": verdict.to_dict()})
    _emit_json({"command": "classify", "results": results}, out,
               "classify.json")
    if out is not None:
        plt = _figure()
        fig, ax = plt.subplots(figsize=(6, 3))
        for ss, res in zip(states, results):
            prof = ss.profile(args.N or 256) if isinstance(ss, Constant) \
                else ss.profile
            ax.plot(prof.xs, prof.ys, label=res["verdict"]["kind"])
        ax.set_xlabel("x")
        ax.set_ylabel("h")
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(out / "classify.png", dpi=150)
        plt.close(fig)
    return 0


def cmd_levels(args) -> int:
    qs = _grid(args.q) if args.q else np.linspace(-0.9, 2.9, 39)
    out = _out_dir(args)
    table = levels_table_csv(qs)
    payload = {"command": "levels", "crossings": crossings_report()}
    if args.X is not None:
        if len(qs) != 1 and args.n is None:
            raise ValidationError("state comparisons need a single --q "
                                  "(or --n/--m), not a grid")
        args.q = float(qs[0]) if args.n is None else None
        p = _params(args)
        X = _positive(args.X, "X")
        reports = []
        if args.hbar is not None:
            reports.append(_report_to_dict(
                compare_constant_droplet(p, _positive(args.hbar, "hbar"), X)))
        if args.area is not None:
            for ss in construct_periodic(p, X,
                                         _positive(args.area, "area")):
                reports.append(_report_to_dict(compare_periodic_constant(ss)))
                reports.append(_report_to_dict(compare_periodic_droplet(ss)))
        payload["reports"] = reports
    if out is None:
        sys.stdout.write(table)
        _emit_json(payload, None, "levels.json")
        return 0
    (out / "levels.csv").write_text(table)
    _emit_json(payload, out, "levels.json")
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6, 4))
    dense = np.linspace(max(-0.9, float(qs.min())), min(2.9, float(qs.max())),
                        241)
    ax.plot(dense, [E0_of_q(q) for q in dense], label="E0(q)")
    ax.plot(dense, [L_of_q(q) for q in dense], label="L(q)")
    ax.axhline(FOUR_PI2, color="k", lw=0.6, ls=":", label="4 pi^2")
    ax.set_xlabel("q")
    ax.set_ylabel("level")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out / "levels.png", dpi=150)
    plt.close(fig)
    return 0


def cmd_droplet(args) -> int:
    p = _params(args)
    area = _positive(args.area, "area")
    out = _out_dir(args)
    drop = construct_droplet(p, area, npoints=args.N or 257)
    payload = {"command": "droplet", "state": state_to_dict(drop)}
    if args.hbar is not None and args.X is not None:
        verdict = droplet_exists(p, args.hbar, args.X)
        payload["existence"] = {"exists": verdict.exists,
                                "reason": verdict.reason,
                                "threshold": verdict.threshold,
                                "value": verdict.value}
        payload["versus_constant"] = _report_to_dict(
            compare_constant_droplet(p, args.hbar, args.X))
    _emit_json(payload, out, "droplet.json")
    if out is not None:
        (out / "droplet.csv").write_text(_profile_csv(drop.profile))
        plt = _figure()
        fig, ax = plt.subplots(figsize=(6, 3))
        ax.plot(drop.profile.xs, drop.profile.ys)
        ax.set_xlabel("x")
        ax.set_ylabel("h")
        fig.tight_layout()
        fig.savefig(out / "droplet.png", dpi=150)
        plt.close(fig)
    return 0


def cmd_tango(args) -> int:
    p = _params(args) if args.q is not None or args.n is not None \
        else OscillatorParams.from_q(1.768, args.bond)
    X = _positive(args.X, "X")
    area = _positive(args.area, "area")
    out = _out_dir(args)
    rep = two_state_tango(p, X, area, npoints=args.N or 256)
    payload = {
        "command": "tango",
        "alpha_lower": rep.lower.alpha,
        "alpha_upper": rep.upper.alpha,
        "alpha_crit": rep.alpha_crit,
        "energy_lower": rep.energy_lower,
        "energy_upper": rep.energy_upper,
        "energy_constant": rep.energy_constant,
        "verdict_lower": rep.verdict_lower.to_dict(),
        "verdict_upper": rep.verdict_upper.to_dict(),
        "diagnostics": rep.diagnostics,
    }
    _emit_json(payload, out, "tango.json")
    if out is not None:
        plt = _figure()
        fig, ax = plt.subplots(figsize=(6, 3))
        ax.plot(rep.lower.profile.xs, rep.lower.profile.ys,
                label=f"alpha = {rep.lower.alpha:.4f} (lower)")
        ax.plot(rep.upper.profile.xs, rep.upper.profile.ys,
                label=f"alpha = {rep.upper.alpha:.4f} (upper)")
        ax.axhline(area / X, color="k", lw=0.6, ls=":", label="constant")
        ax.set_xlabel("x")
        ax.set_ylabel("h")
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(out / "tango.png", dpi=150)
        plt.close(fig)
    return 0


def cmd_crossings(args) -> int:
    _emit_json({"command": "crossings", "crossings": crossings_report()},
               _out_dir(args), "crossings.json")
    return 0


def cmd_evolve(args) -> int:
    p = _params(args)
    X = _positive(args.X, "X")
    N = args.N or 128
    out = _out_dir(args)
    candidates = []
    if args.hbar is not None and args.area is None:
        base = Constant(params=p, hbar=_positive(args.hbar, "hbar"), X=X)
        hbar = base.hbar
    elif args.area is not None:
        roots = construct_periodic(p, X, _positive(args.area, "area"),
                                   npoints=N)
        if not roots:
            raise ValidationError("no periodic steady state at this "
                                  "period/area")
        base = roots[0]
        candidates.extend(roots)
        hbar = args.area / X
    else:
        raise ValidationError("give --hbar (constant) or --area (periodic)")
    candidates.append(Constant(params=p, hbar=hbar, X=X))
    exist = droplet_exists(p, hbar, X)
    if exist.exists and abs(3.0 - p.q) > 1e-3:
        candidates.append(construct_droplet(p, hbar * X, npoints=N + 1))

    config = PdeConfig(params=p, N=N, X=X, dt=args.dt, t_end=args.t_end,
                       theta=args.extra.get("theta", 1.0),
                       precursor=args.extra.get("precursor"),
                       positivity_floor=args.extra.get("positivity_floor"))
    h0 = perturb(base, args.direction, args.eps, N=N)
    traj = evolve(h0, config)
    verdict = detect_limit(traj, candidates)
    payload = {
        "command": "evolve",
        "seed": args.seed,
        "direction": args.direction,
        "eps": args.eps,
        "termination": traj.termination,
        "t_final": float(traj.t[-1]),
        "steps": int(len(traj.t) - 1),
        "mass_drift": float(np.max(np.abs(traj.mass - traj.mass[0]))),
        "energy_initial": float(traj.energy[0]),
        "energy_final": float(traj.energy[-1]),
        "limit": {"kind": verdict.kind,
                  "candidate": None if verdict.candidate is None
                  else state_to_dict(verdict.candidate),
                  "distance": verdict.distance,
                  "detail": verdict.detail},
    }
    _emit_json(payload, out, "evolve.json")
    if out is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "mass", "energy", "min_h", "dissipation_rate"])
        for row in zip(traj.t, traj.mass, traj.energy, traj.min_h,
                       traj.dissipation_rate):
            w.writerow(["%.12g" % v for v in row])
        (out / "series.csv").write_text(buf.getvalue())
        (out / "final.csv").write_text(_profile_csv(traj.final))
        plt = _figure()
        fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(9, 3.2))
        for t_snap, prof in traj.snapshots[:: max(1,
                                                  len(traj.snapshots) // 8)]:
            ax0.plot(prof.xs, prof.ys, lw=0.8, label=f"t = {t_snap:.3g}")
        ax0.plot(traj.final.xs, traj.final.ys, "k", lw=1.2)
        ax0.set_xlabel("x")
        ax0.set_ylabel("h")
        ax0.legend(fontsize=6)
        ax1.plot(traj.t, traj.energy)
        ax1.set_xlabel("t")
        ax1.set_ylabel("energy")
        fig.tight_layout()
        fig.savefig(out / "evolve.png", dpi=150)
        plt.close(fig)
    return 0


# ---------------------------------------------------------------------------
# argument plumbing


_COMMANDS = {
    "maps": cmd_maps,
    "classify": cmd_classify,
    "levels": cmd_levels,
    "droplet": cmd_droplet,
    "tango": cmd_tango,
    "evolve": cmd_evolve,
    "crossings": cmd_crossings,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thinfilm",
        description="Steady states, stability, energy levels and dynamics "
                    "of the thin-film equation "
                    "h_t = -(h^n h_xxx)_x - B (h^m h_x)_x.")
    parser.add_argument("--version", action="version",
                        version=f"thinfilm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        if name in ("maps", "levels"):
            sp.add_argument("--q", type=str, default=None,
                            help="comma list (maps) or grid lo:hi:count")
        else:
            sp.add_argument("--q", type=float, default=None)
        sp.add_argument("--bond", type=float, default=1.0)
        sp.add_argument("--n", type=float, default=None)
        sp.add_argument("--m", type=float, default=None)
        sp.add_argument("--X", type=float, default=None)
        sp.add_argument("--area", type=float, default=None)
        sp.add_argument("--hbar", type=float, default=None)
        sp.add_argument("--alpha-grid", type=str, default="0.02:0.98:49",
                        dest="alpha_grid")
        sp.add_argument("--N", type=int, default=None)
        sp.add_argument("--dt", type=float, default=0.05)
        sp.add_argument("--t-end", type=float, default=100.0, dest="t_end")
        sp.add_argument("--eps", type=float, default=0.01)
        sp.add_argument("--direction", type=str, default="h''")
        sp.add_argument("--out", type=str, default=None)
        sp.add_argument("--config", type=str, default=None)
        sp.add_argument("--seed", type=int, default=0)
    return parser


def _apply_config(args) -> None:
    """Config-file values fill flags still at their defaults; unknown keys
    land in args.extra for scheme options like theta or precursor."""
    args.extra = {}
    if args.config is None:
        return
    path = Path(args.config)
    if not path.is_file():
        raise ValidationError(f"config file not found: {args.config}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file is not valid JSON: {exc}") \
            from exc
    if not isinstance(data, dict):
        raise ValidationError("config file must hold a JSON object")
    defaults = _build_parser().parse_args([args.command])
    for key, value in data.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and attr not in ("command", "config", "extra"):
            if getattr(args, attr) == getattr(defaults, attr, None):
                setattr(args, attr, value)
        else:
            args.extra[attr] = value


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_config(args)
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
