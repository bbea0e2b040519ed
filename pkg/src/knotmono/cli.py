"""Command-line front end.

Every command accepts ``--config FILE`` (``key = value`` lines, ``#``
comments) and ``--out DIR``; explicit flags override the file, and keys the
command does not know are rejected.  Each run writes ``manifest.json`` next
to its report.  Exit codes: 0 all checks passed, 1 a check failed, 2 usage
or input error.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import backend


class UsageError(Exception):
    pass


# --------------------------------------------------------------- pipelines

def monopole_convergence(mass=4.0, samples=200, refine=3, h=0.02, seed=0, radius=(0.5, 3.0)):
    """FD Bogomolny residual of the closed-form 1-monopole at random points.

    Points sit at distances in radius / M from the centre, at least 0.5 rad
    away from the axis that carries the Dirac ray.  Returns a JSON-ready dict.
    """
    from .fiducial import MonopolePose, eval_monopole, monopole_phi_norm, point_residual

    rng = np.random.default_rng(seed)
    pose = MonopolePose(np.zeros(3), float(mass), axis=np.array([0.0, 0.0, 1.0]))
    pts = []
    while len(pts) < samples:
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        if abs(v[2]) > np.cos(0.5):
            continue
        pts.append(v * rng.uniform(*radius) / mass)
    x = np.array(pts)
    ev = lambda y: eval_monopole(pose, y)
    hs, res = [], []
    for k in range(refine):
        hk = h / mass * 2.0 ** -k
        r, _ = point_residual(ev, x, hk)
        hs.append(hk)
        res.append(float(np.abs(r).max()))
    orders = [float(np.log2(res[k] / res[k + 1])) for k in range(len(res) - 1)]
    _, phi = ev(x)
    phi_err = float(np.max(np.abs(np.linalg.norm(phi, axis=-1) - monopole_phi_norm(pose, x))))
    ok = bool(orders and all(1.8 <= o <= 2.2 for o in orders) and phi_err <= 1e-10)
    return {"h": hs, "sup_residual": res, "orders": orders, "phi_norm_error": phi_err, "ok": ok}


def unknot_setup(gamma=0.1, mass=4.0, delta=0.02, radius=1.0):
    from .fiducial import FiducialParams, LinkingForm
    from .knot import KnotCurve, Tube

    tube = Tube(KnotCurve.unknot(radius))
    return tube, FiducialParams(gamma, mass, delta), LinkingForm(tube, delta)


def glue_scan(n=1, mass=4.0, gamma=0.1, delta=0.02, R=5.0, ds=(0.0625, 0.125, 0.25, 0.5), mu=None,
              samples=20000, seed=0):
    """Admissibility and sup|V| over a scan of separations d."""
    from .gluing import admissibility_report, build_partition, glue, plan_placement

    tube, fp, lf = unknot_setup(gamma, mass, delta)
    mu = 1e-2 * mass ** 2 if mu is None else mu
    rows = []
    for d in ds:
        p = plan_placement(int(n), float(d), float(R), M=mass, curve=tube.curve)
        g = glue(p, build_partition(p), fp, lf)
        rep = admissibility_report(g, mu, seed=seed, n_samples=samples, tube=tube)
        rows.append({"d": float(d), **rep.as_dict()})
    sups = [r["sup_residual"] for r in rows]
    monotone = all(sups[k + 1] <= sups[k] for k in range(len(sups) - 1))
    return {"n": n, "M": mass, "gamma": gamma, "mu": mu, "rows": rows, "non_increasing": monotone,
            "ok": bool(monotone and any(r["ok"] for r in rows))}


def picard_box(d=0.25, h=2.0, half_width=14.0, mass=4.0, gamma=0.1, delta=0.02, R=5.0, tol=1e-6, n_max=30,
               eps=0.1):
    """Picard iteration on a Dirichlet box around the first monopole's transition region.

    Returns (summary dict, IterationTrace).
    """
    from .fields import CartesianGrid
    from .gluing import build_partition, glue, plan_placement
    from .picard import assemble_operator, picard_iterate

    tube, fp, lf = unknot_setup(gamma, mass, delta)
    p = plan_placement(1, float(d), float(R), M=mass, curve=tube.curve)
    g = glue(p, build_partition(p), fp, lf)
    a = p.poses[0].center / np.linalg.norm(p.poses[0].center)
    c = p.origin + half_width * a
    n = int(round(2 * half_width / h))
    n += n % 2
    # a fixed fractional offset keeps nodes off the symmetry planes
    grid = CartesianGrid(c - half_width + 0.5 * h * 0.37, h, (n, n, n))
    pts = grid.points()
    grid.rho = tube.distance(pts.reshape(-1, 3)).reshape(grid.shape)
    Psi = g.to_config(grid)
    V = np.moveaxis(g.residual(pts), (-2, -1), (0, 1))
    t0 = time.time()
    op = assemble_operator(Psi, fp, eps=eps)
    op.factorize()
    S, tr = picard_iterate(Psi, fp, None, n_max, tol, op, V)
    v = tr.column("V_norm")
    gn = tr.column("gauge_norm")
    ratios = tr.ratios()
    late = ratios[2:] if len(ratios) > 2 else np.zeros(0)
    out = {"grid": list(grid.shape), "h": h, "unknowns": int(op.block.shape[0]), "seconds": time.time() - t0,
           "V_initial": float(v[0]), "V_final": float(v[-1]), "gauge_final": float(gn[-1]),
           "reduction": float(v[-1] / v[0]), "ratios": ratios.tolist(),
           "max_ratio_after_2": float(late.max()) if late.size else 0.0}
    out["ok"] = bool(out["reduction"] <= tol and out["gauge_final"] <= tol * v[0]
                     and out["max_ratio_after_2"] <= 0.55)
    return out, tr


def monodromy_run(gamma=0.2, gamma_tilde=0.3, eps=0.1, t=4, depth=6, amp=0.003, points=4096, seed=0,
                  compare_depth=3):
    from .cover import (build_cover, decaying_perturbation, extract_monodromies, fiducial_comparison,
                        flat_connection, glue_gauges, local_gauges_synthetic, perturbation_norm)

    l = 2 * np.pi
    pert = decaying_perturbation(amp, eps, l) if amp else None
    conn = flat_connection(gamma, gamma_tilde, l, pert)
    cov = build_cover(eps, t, depth, l)
    rep = extract_monodromies(local_gauges_synthetic(conn, cov), cov)
    small = build_cover(eps, t, compare_depth, l)
    gs = local_gauges_synthetic(conn, small)
    rep_s = extract_monodromies(gs, small, strict=False)
    glued, grep = glue_gauges(gs, rep_s)
    cmp1 = fiducial_comparison(conn, glued, rep.gamma, rep.gamma_tilde, n_points=points, seed=seed)
    cmp2 = fiducial_comparison(conn, glued, rep.gamma, rep.gamma_tilde, n_points=2 * points, seed=seed)
    drift = abs(cmp2.ratio - cmp1.ratio) / abs(cmp2.ratio) if np.isfinite(cmp2.ratio) and cmp2.ratio else 0.0
    out = {"gamma": rep.gamma, "gamma_tilde": rep.gamma_tilde, "commutator": rep.commutator,
           "cauchy_theta": rep.cauchy_theta, "cauchy_s": rep.cauchy_s, "det_error": rep.det_error,
           "perturbation_norm": perturbation_norm(pert, eps, l) if pert else 0.0,
           "glue": grep.__dict__, "lhs": cmp2.lhs, "curvature_l2": cmp2.curvature, "ratio": cmp2.ratio,
           "ratio_coarse": cmp1.ratio, "ratio_drift": drift}
    finite = bool(np.isfinite(cmp2.ratio)) or cmp2.lhs < 1e-6
    out["ok"] = bool(abs(rep.gamma - gamma) <= 1e-3 and abs(rep.gamma_tilde - gamma_tilde) <= 1e-3
                     and rep.commutator <= 1e-6 and finite and drift <= 0.1)
    return out


# ---------------------------------------------------------------- commands

def _floats(text):
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _range(text):
    a, b = str(text).split(":")
    return int(a), int(b)


def _bool(text):
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


COMMANDS = {
    "verify-monopole": {"mass": (float, 4.0), "samples": (int, 200), "refine": (int, 3), "h": (float, 0.02),
                        "seed": (int, 0)},
    "glue": {"n": (int, 1), "mass": (float, 4.0), "gamma": (float, 0.1), "delta": (float, 0.02),
             "R": (float, 5.0), "d": (_floats, (0.0625, 0.125, 0.25, 0.5)), "mu": (float, None),
             "samples": (int, 20000), "seed": (int, 0)},
    "solve": {"d": (float, 0.25), "h": (float, 2.0), "half_width": (float, 14.0), "mass": (float, 4.0),
              "gamma": (float, 0.1), "delta": (float, 0.02), "R": (float, 5.0), "tol": (float, 1e-6),
              "n_max": (int, 30), "seed": (int, 0)},
    "modes": {"gamma": (float, 0.1), "m_range": (_range, (-10, 10)), "eps": (float, 0.1), "mass": (float, 2.0),
              "dagger": (_bool, False), "seed": (int, 0)},
    "check-inequalities": {"ids": (str, "ALL"), "gamma": (float, 0.1), "seeds": (int, 20), "seed": (int, 0),
                           "eps": (float, 0.1), "refine": (int, 1)},
    "monodromy": {"gamma": (float, 0.2), "gamma_tilde": (float, 0.3), "eps": (float, 0.1), "t": (int, 4),
                  "depth": (int, 6), "amp": (float, 0.003), "points": (int, 4096), "seed": (int, 0)},
}

EXPLICIT_IDS = ("ETA_PAIR", "RADIAL_HARDY_EXT", "WEIGHTED_SOBOLEV", "HARDY_BALL", "PERP_BOUND", "NORM_EQUIV")


def read_config(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {path}")
    out = {}
    for ln, raw in enumerate(p.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{ln}: expected 'key = value'")
        k, v = (x.strip() for x in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def resolve(command: str, file_opts: dict, flag_opts: dict) -> dict:
    spec = COMMANDS[command]
    unknown = sorted(set(file_opts) - set(spec))
    if unknown:
        raise UsageError(f"unknown keys for {command}: {', '.join(unknown)}")
    cfg = {}
    for key, (conv, default) in spec.items():
        if flag_opts.get(key) is not None:
            val = flag_opts[key]
        elif key in file_opts:
            val = file_opts[key]
        else:
            cfg[key] = default
            continue
        try:
            cfg[key] = conv(val) if not isinstance(val, (tuple, bool)) else val
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad value for {key}: {val!r} ({exc})") from None
    return cfg


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def execute(command: str, cfg: dict, out: Path) -> bool:
    """Run one command, write its artifacts into ``out`` and return the pass flag."""
    if command == "verify-monopole":
        rep = monopole_convergence(cfg["mass"], cfg["samples"], cfg["refine"], cfg["h"], cfg["seed"])
        _write_json(out / "monopole.json", rep)
        return rep["ok"]
    if command == "glue":
        rep = glue_scan(cfg["n"], cfg["mass"], cfg["gamma"], cfg["delta"], cfg["R"], cfg["d"], cfg["mu"],
                        cfg["samples"], cfg["seed"])
        _write_json(out / "glue.json", rep)
        return rep["ok"]
    if command == "solve":
        rep, trace = picard_box(cfg["d"], cfg["h"], cfg["half_width"], cfg["mass"], cfg["gamma"], cfg["delta"],
                                cfg["R"], cfg["tol"], cfg["n_max"])
        trace.to_csv(out / "picard_trace.csv")
        _write_json(out / "solve.json", rep)
        return rep["ok"]
    if command == "modes":
        from .modes import sweep

        rows = sweep(cfg["gamma"], cfg["m_range"], cfg["eps"], cfg["seed"], cfg["dagger"], cfg["mass"])
        _write_csv(out / "modes.csv", ["m", "k", "j", "lambda", "margin", "scale", "ok"], rows)
        return all(r[-1] for r in rows)
    if command == "check-inequalities":
        from .harness import audit

        ids = EXPLICIT_IDS if cfg["ids"].upper() == "ALL" else tuple(s.strip() for s in cfg["ids"].split(","))
        seeds = range(cfg["seed"], cfg["seed"] + cfg["seeds"])
        rows = []
        for id_ in ids:
            kw = {} if id_ in ("HARDY_BALL", "RADIAL_HARDY_EXT") else {"eps": cfg["eps"]}
            rows += audit(id_, cfg["gamma"], seeds, refine=cfg["refine"], **kw)
        _write_csv(out / "inequalities.csv", ["id", "seed", "margin", "scale", "ok", "constant"], rows)
        return all(r[4] for r in rows)
    if command == "monodromy":
        rep = monodromy_run(cfg["gamma"], cfg["gamma_tilde"], cfg["eps"], cfg["t"], cfg["depth"], cfg["amp"],
                            cfg["points"], cfg["seed"])
        _write_json(out / "monodromy.json", rep)
        return rep["ok"]
    raise UsageError(f"unknown command {command}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="knotmono", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, spec in COMMANDS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="key = value file")
        sp.add_argument("--out", default="knotmono_out", help="output directory")
        sp.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                        help="worker count (recorded; reductions run in fixed order)")
        for key in spec:
            sp.add_argument("--" + key.replace("_", "-"), dest=key, default=None)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 2
    try:
        file_opts = read_config(args.config) if args.config else {}
        flags = {k: getattr(args, k) for k in COMMANDS[args.command]}
        cfg = resolve(args.command, file_opts, flags)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        manifest = {"command": args.command, "config": cfg, "seed": cfg.get("seed", 0), "workers": args.workers,
                    "version": __version__, "backend": backend(), "config_file": args.config}
        _write_json(out / "manifest.json", manifest)
        ok = execute(args.command, cfg, out)
    except UsageError as exc:
        print(f"knotmono: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"knotmono {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"knotmono {args.command}: check failed: {exc}", file=sys.stderr)
        return 1
    print(f"knotmono {args.command}: {'PASS' if ok else 'FAIL'} ({out})")
    return 0 if ok else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
