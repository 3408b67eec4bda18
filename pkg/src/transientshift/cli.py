"""Batch command line: ``transientshift <subcommand> --model FILE [flags]``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Optional, Sequence

from .duality import Eigenfunction, poisson_ratio_limit, reverse_model, transience_duality_check
from .errors import BudgetExhausted, Diverging, ModelFileError, ShiftError
from .green_martin import boundary_atlas, default_test_set, green, martin_kernel
from .measures_dlr import conformality_residual, dlr_check_conditional, thermo_limit
from .modelfile import load, parse_point, parse_word
from .models import hitting_distribution
from .shift_core import RulePoint, point_in
from .transfer import SimpleFunction

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_DIVERGING = 3
EXIT_INCONCLUSIVE = 4


def fmt_point(x, g) -> str:
    if isinstance(x, RulePoint):
        return str(x)
    pre = ",".join(g.format_state(s) for s in x.prefix)
    cyc = ",".join(g.format_state(s) for s in x.cycle)
    return f"{pre}({cyc})" if pre else f"({cyc})"


def _function(args, model) -> SimpleFunction:
    word = parse_word(args.f, model.graph) if args.f else (model.origin,)
    return SimpleFunction.indicator(word)


def _point(args, model):
    if args.x:
        return parse_point(args.x, model.graph)
    return point_in((model.origin,), model.graph)


def cmd_green(args, mf) -> dict:
    model = mf.model
    f = _function(args, model)
    x = _point(args, model)
    gv = green(f, x, args.lam, model.potential, tol=args.tol, n_cap=args.n_cap)
    out = gv.to_json()
    out.update({"lo": gv.lo, "hi": gv.hi, "lambda": args.lam, "x": fmt_point(x, model.graph)})
    return out


def cmd_kernel(args, mf) -> dict:
    model = mf.model
    f = _function(args, model)
    if args.x:
        pts = {"x": [_point(args, model)]}
    else:
        pts = mf.orbits()
    out = {}
    for tag, xs in pts.items():
        rows = []
        for x in xs:
            k = martin_kernel(f, x, args.lam, model, rtol=args.tol, n_cap=args.n_cap)
            rows.append({"x": fmt_point(x, model.graph), "value": k.value, "lo": k.lo, "hi": k.hi})
        out[tag] = rows
    return {"lambda": args.lam, "kernels": out}


def _atlas(args, mf, reverse: bool = False):
    model = mf.model
    if reverse:
        model = reverse_model(model)
        orbits = {tag: model.orbit(tag, range(8, 15)) for tag in model.orbits}
    else:
        orbits = mf.orbits()
    test = default_test_set(model, depth=args.test_depth)
    return model, boundary_atlas(orbits, args.lam, model, test, args.eps, rtol=args.tol, n_cap=args.n_cap)


def cmd_atlas(args, mf) -> dict:
    model, atlas = _atlas(args, mf, args.reversed)
    out = atlas.to_json(model.graph.format_state)
    out["n_clusters"] = len(atlas.clusters)
    out["shift"] = "reversed" if args.reversed else "forward"
    return out


def cmd_thermo(args, mf) -> dict:
    model = mf.model
    f = _function(args, model)
    if args.scheme == "transient":
        tag = args.orbit or next(iter(model.orbits))
        if tag not in model.orbits:
            raise ModelFileError(f"model has no orbit {tag!r}", None, "orbit")
        x = model.orbits[tag]
    else:
        x = _point(args, model)
    seq = thermo_limit(args.scheme, x, f, args.N, model, args.lam, check_scheme=True, rtol=args.tol)
    return {"scheme": args.scheme, "values": seq.values, "lo": seq.lo, "hi": seq.hi,
            "oscillation": seq.oscillation(), "warning": seq.warning}


def cmd_dlr(args, mf) -> dict:
    model = mf.model
    p = model.potential
    g = model.graph
    if "ray_point" in model.params:
        points = [model.params["ray_point"]]
    else:
        points = [point_in((s,), g) for s in g.ball(model.origin, 1)]
    o = model.origin
    battery = [(o,)] + [(o, b) for b in g.out_edges(o)][:2]
    lams = sorted(set(args.lam_grid or [0.5, 1.0, 2.0, args.lam]))
    report = {}
    for name, mu in sorted(mf.measures.items()):
        dlr = [r for n in range(1, 5) for r in dlr_check_conditional(mu, p, n, points)]
        worst = max((r.residual for r in dlr if r.residual is not None), default=0.0)
        zero = sum(r.status == "zero-mass" for r in dlr)
        dlr_ok = worst < args.tol
        conf = {}
        for lam in lams:
            res = conformality_residual(mu, lam, p, battery)
            conf[str(lam)] = max(r.residual for r in res)
        conf_ok = any(v < args.tol for v in conf.values())
        report[name] = {
            "dlr": "PASS" if dlr_ok else "FAIL",
            "dlr_max_residual": worst,
            "dlr_zero_mass_classes": zero,
            "conformal": "PASS" if conf_ok else "FAIL",
            "conformal_max_residual_by_lambda": conf,
        }
    return {"measures": report}


def cmd_walk(args, mf) -> dict:
    model = mf.model
    if model.walk is None:
        raise ModelFileError("the walk subcommand needs a model with a random walk", None, "builder")
    _, atlas = _atlas(args, mf)
    rep = hitting_distribution(model.walk, model.walk.start, atlas, model, args.samples, args.horizon, args.seed)
    out = rep.to_json()
    out["n_clusters"] = len(atlas.clusters)
    return out


def cmd_duality(args, mf) -> dict:
    model = mf.model
    lams = args.lam_grid or [args.lam]
    checks = [transience_duality_check(model, lam, budget=args.n_cap).to_json() for lam in lams]
    out = {"transience": checks, "agree": all(c["agree"] for c in checks)}
    if args.ratio_samples and model.name == "biased_walk_z":
        p = model.params["p"]
        r = (1 - p) / p
        rev = reverse_model(model)
        h = Eigenfunction.from_table(lambda a: 1.0 + r ** a, 1.0)
        f = Eigenfunction.from_table(lambda a: r ** a, 1.0)
        traj = poisson_ratio_limit(f, h, point_in((0,), rev.graph), rev.potential, args.ratio_steps,
                                   args.ratio_samples, args.seed)
        near = [min(abs(v), abs(v - 1)) <= 1e-2 for v in traj.final]
        out["ratio_limit"] = {
            "samples": args.ratio_samples,
            "steps": args.ratio_steps,
            "fraction_near_0_or_1": sum(near) / len(near),
            "fraction_near_1": float(sum(abs(v - 1) <= 1e-2 for v in traj.final) / len(near)),
        }
        out["_files"] = {"ratio_trajectories.csv": trajectories_csv(traj.ratios)}
    return out


def trajectories_csv(ratios) -> str:
    """One row per step, one column per sampled trajectory."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step"] + [f"traj{k}" for k in range(ratios.shape[0])])
    for n in range(ratios.shape[1]):
        w.writerow([n] + [repr(float(v)) for v in ratios[:, n]])
    return buf.getvalue()


COMMANDS = {
    "green": cmd_green,
    "kernel": cmd_kernel,
    "atlas": cmd_atlas,
    "thermo": cmd_thermo,
    "dlr": cmd_dlr,
    "walk": cmd_walk,
    "duality": cmd_duality,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="transientshift", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, seed_required=False):
        sp.add_argument("--model", required=True, help="model file")
        sp.add_argument("--lambda", dest="lam", type=float, default=1.0, help="spectral parameter (default 1)")
        sp.add_argument("--tol", type=float, default=1e-10, help="tail tolerance for series certificates")
        sp.add_argument("--n-cap", type=int, default=20000, help="maximum number of series terms")
        sp.add_argument("--test-depth", type=int, default=2, help="longest test cylinder for profiles")
        sp.add_argument("--eps", type=float, default=1e-3, help="atlas resolution")
        sp.add_argument("--seed", type=int, required=seed_required, help="RNG seed for sampling commands")
        sp.add_argument("--out", help="write <subcommand>.json into this directory")
        sp.add_argument("--format", choices=("json", "table"), default="json")
        return sp

    sp = common(sub.add_parser("green", help="certified Green's function"))
    sp.add_argument("--f", help="cylinder word, comma separated (default: origin)")
    sp.add_argument("--x", help="point a,b(c,d) or a word completed by its anchor")

    sp = common(sub.add_parser("kernel", help="Martin kernel along orbits or at a point"))
    sp.add_argument("--f", help="cylinder word, comma separated (default: origin)")
    sp.add_argument("--x", help="single point instead of the file's orbits")

    sp = common(sub.add_parser("atlas", help="boundary atlas from escaping orbits"))
    sp.add_argument("--reversed", action="store_true", help="use the reversed shift")

    sp = common(sub.add_parser("thermo", help="thermodynamic-limit sequence"))
    sp.add_argument("--scheme", choices=("pos_recurrent", "null_recurrent", "transient"), required=True)
    sp.add_argument("--f", help="cylinder word, comma separated (default: origin)")
    sp.add_argument("--x", help="base point for the recurrent schemes")
    sp.add_argument("--orbit", help="orbit tag for the transient scheme")
    sp.add_argument("--N", type=int, default=30)

    sp = common(sub.add_parser("dlr", help="DLR and conformality report for the file's measures"))
    sp.add_argument("--lambda-grid", dest="lam_grid", type=float, nargs="+")

    sp = common(sub.add_parser("walk", help="hitting frequencies of the boundary clusters"), seed_required=True)
    sp.add_argument("--samples", type=int, default=10000)
    sp.add_argument("--horizon", type=int, default=40)

    sp = common(sub.add_parser("duality", help="transience duality and ratio limits"), seed_required=True)
    sp.add_argument("--lambda-grid", dest="lam_grid", type=float, nargs="+")
    sp.add_argument("--ratio-samples", type=int, default=0)
    sp.add_argument("--ratio-steps", type=int, default=200)
    return ap


def _table(obj, prefix: str = "") -> list:
    rows = []
    if isinstance(obj, dict):
        for k in sorted(obj):
            rows += _table(obj[k], f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list) and any(isinstance(v, (dict, list)) for v in obj):
        for i, v in enumerate(obj):
            rows += _table(v, f"{prefix}[{i}]")
    else:
        rows.append((prefix, obj))
    return rows


def render(result: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(result, sort_keys=True, indent=2, default=_json_default)
    rows = _table(result)
    width = max((len(k) for k, _ in rows), default=0)
    return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


def _json_default(obj):
    if hasattr(obj, "item"):
        return obj.item()
    if isinstance(obj, float) and math.isinf(obj):
        return str(obj)
    return str(obj)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        mf = load(args.model)
        result = COMMANDS[args.command](args, mf)
        code = EXIT_OK
    except Diverging as exc:
        result, code = {"error": "diverging", "message": str(exc), "partial": exc.partial}, EXIT_DIVERGING
    except BudgetExhausted as exc:
        result, code = {"error": "inconclusive", "message": str(exc), "partial": exc.partial}, EXIT_INCONCLUSIVE
    except (ModelFileError, ShiftError, ValueError, OSError) as exc:
        print(f"transientshift: {exc}", file=sys.stderr)
        return EXIT_INVALID
    extra = result.pop("_files", {})
    text = render(result, args.format)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        for fname, body in extra.items():
            with open(os.path.join(args.out, fname), "w", encoding="utf-8") as fh:
                fh.write(body)
        ext = "json" if args.format == "json" else "txt"
        with open(os.path.join(args.out, f"{args.command}.{ext}"), "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
