"""The ``noacim`` command line.

Every subcommand writes a JSON report (rationals as ``"p/q"`` strings with a
decimal rendering) into the output directory and embeds its fully resolved
configuration.  Exit codes: 0 verified, 2 verification failed (the report
holds the witness), 3 input error, 4 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import escape, linearize, pipeline, rokhlin, slicing
from .geometry import IntervalSet, as_scalar, scalar_str, set_from_json
from .maps import NAMED_MAPS, map_from_json

EXIT_OK, EXIT_FAILED, EXIT_INPUT, EXIT_CAP = 0, 2, 3, 4
OUT_ENV = "NOACIM_OUT"


class InputError(ValueError):
    pass


def rational(text: str):
    try:
        return as_scalar(text)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not an exact rational: {text!r}") from exc


def load_map(spec: str | None):
    if not spec:
        raise InputError("empty map spec (give a named map or a JSON file)")
    if spec in NAMED_MAPS:
        return NAMED_MAPS[spec]()
    name, _, arg = spec.partition(":")
    if arg and name in NAMED_MAPS:
        return NAMED_MAPS[name](arg)
    path = Path(spec)
    if not path.is_file():
        raise InputError(f"unknown map {spec!r}: not one of {sorted(NAMED_MAPS)} and not a file")
    with open(path) as fh:
        return map_from_json(json.load(fh))


def parse_intervals(text: str) -> IntervalSet:
    """``"a:b,c:d"`` with rational endpoints."""
    pairs = []
    for part in text.split(","):
        lo, sep, hi = part.partition(":")
        if not sep:
            raise InputError(f"bad interval {part!r} (expected lo:hi)")
        pairs.append((as_scalar(lo), as_scalar(hi)))
    return IntervalSet(pairs)


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or "noacim-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _resolved(args) -> dict:
    cfg = {}
    for key, value in vars(args).items():
        if key == "func":
            continue
        cfg[key] = scalar_str(value) if hasattr(value, "denominator") and not isinstance(value, int) else value
    return cfg


def _write(args, name: str, payload: dict) -> Path:
    payload = {"command": args.command, "config": _resolved(args), **payload}
    path = _out_dir(args) / name
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, default=str)
    return path


def _say(lines) -> None:
    for line in lines:
        print(line)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_tower(args) -> int:
    f = load_map(args.map)
    if args.l > args.n0:
        raise InputError("l must not exceed n0")
    cfg = rokhlin.TowerConfig(n0=args.n0, l=args.l, eps0=args.eps0, T=args.depth, N=args.N, cap=args.cap,
                              adaptive_depth=args.adaptive, max_U_components=args.max_components,
                              max_merges=args.max_merges)
    tower = rokhlin.build_tower(f, args.n0, args.l, args.eps0, args.depth, config=cfg)
    path = _write(args, "tower.json", {"map": f.name, "tower": tower.to_json()})
    _say(tower.ledger())
    print(f"report: {path}")
    return EXIT_OK if tower.valid else EXIT_FAILED


def cmd_slice_verify(args) -> int:
    if args.matrices:
        with open(args.matrices) as fh:
            L = slicing.parse_sequence(json.load(fh))
    else:
        rng = np.random.default_rng(args.seed)
        k = slicing.compute_k(args.eps, args.delta)
        L = slicing.random_sequence(rng, args.dim, args.length or k)
    plan = slicing.make_plan(L, args.eps, args.delta)
    ineq = plan.inequalities()
    verdicts = []
    for i in range(plan.k, plan.n + 1):
        verdicts.append(slicing.verify_shrink(plan.seq, plan, i=i, samples=args.samples, seed=args.seed))
    jac, ident = [], []
    for i in range(1, plan.n + 1):
        c = slicing.build_compressor(i, plan.seq, plan)
        jac.append(slicing.check_jacobian_near_id(c, samples=args.samples, d=plan.seq.d, seed=args.seed + i))
        ident.append(slicing.check_identity_outside(c, samples=max(1, args.samples // 10), d=plan.seq.d,
                                                    seed=args.seed + i))
    shrink_ok = all(v.passed and v.margin > 0 for v in verdicts)
    jac_ok = all(j["max_deviation"] < float(args.eps) for j in jac)
    id_ok = all(d["violations"] == 0 for d in ident)
    lines = [f"{name}: {'PASS' if ok else 'FAIL'}" for name, ok in ineq.items()]
    lines += [
        f"shrink for i in [{plan.k}, {plan.n}] (min margin {min((v.margin for v in verdicts), default=0):.4g}): "
        f"{'PASS' if shrink_ok else 'FAIL'}",
        f"jacobian within eps of identity: {'PASS' if jac_ok else 'FAIL'}",
        f"identity outside supports: {'PASS' if id_ok else 'FAIL'}",
    ]
    path = _write(args, "slicing.json", {
        "plan": plan.to_json(),
        "shrink": [v.to_json() for v in verdicts],
        "jacobian": jac,
        "identity": ident,
        "ledger": lines,
    })
    _say(lines)
    print(f"report: {path}")
    return EXIT_OK if shrink_ok and jac_ok and id_ok and all(ineq.values()) else EXIT_FAILED


def cmd_linearize(args) -> int:
    f = load_map(args.map)
    U = parse_intervals(args.U)
    lin = linearize.linearize_on(f, U, args.gamma, args.r0, delta=args.delta)
    local = linearize.check_locally_linear(lin.f_tilde, lin.V)
    ratio_ok = lin.ratio > 1 - args.gamma
    lines = [
        f"m(V)/m(U) = {float(lin.ratio):.6f} > 1 - gamma = {float(1 - args.gamma):.6f}: {'PASS' if ratio_ok else 'FAIL'}",
        f"locally linear on V: {'PASS' if local else 'FAIL'}",
        f"C1 bound f -> f~ = {float(lin.c1_bound):.6g}",
    ]
    path = _write(args, "linearize.json", {"linearization": lin.to_json(), "locally_linear": local, "ledger": lines})
    _say(lines)
    print(f"report: {path}")
    return EXIT_OK if ratio_ok and local else EXIT_FAILED


def cmd_escape(args) -> int:
    f = load_map(args.map)
    if args.certificate:
        with open(args.certificate) as fh:
            obj = json.load(fh)
        K = set_from_json(obj["K"]) if isinstance(obj["K"], dict) else IntervalSet(obj["K"])
        if not isinstance(K, IntervalSet):
            raise InputError("certificates are one-dimensional")
        cert = escape.EscapeCertificate(K, int(obj["N"]), as_scalar(obj.get("eps", args.eps)))
    else:
        cert = escape.search_certificate(f, args.eps, args.depth)
    out = _out_dir(args)
    payload: dict = {"map": f.name}
    if cert is None:
        lines = [f"no certificate found up to N = {args.depth} (inconclusive): FAIL"]
        passed = False
    else:
        verdict = escape.verify_certificate(f, cert, cap=args.cap)
        lines, passed = verdict.lines, verdict.passed
        payload["certificate"] = cert.to_json()
        payload["verdict"] = verdict.to_json()
    if args.grid:
        avg = escape.kb_average(f, args.steps, args.grid, seed=args.seed)
        escape.write_density_csv(avg, out / "density.csv")
        escape.write_profile_csv(avg, out / "profile.csv")
        payload["average"] = avg.to_json()
        payload["concentration_half"] = escape.concentration_statistic(avg, 0.5)
    payload["ledger"] = lines
    path = _write(args, "escape.json", payload)
    _say(lines)
    print(f"report: {path}")
    return EXIT_OK if passed else EXIT_FAILED


def cmd_pipeline(args) -> int:
    f = load_map(args.map)
    overrides = {}
    if args.config:
        with open(args.config) as fh:
            overrides = json.load(fh)
    cfg = pipeline.PipelineConfig(**{"eps": args.eps, "k": args.k, "n": args.n, "T": args.depth,
                                     "seed": args.seed, **overrides})
    report = pipeline.run(f, config=cfg)
    payload = {"map": f.name, "report": report.to_json()}
    out = _out_dir(args)
    if args.grid:
        t0 = time.perf_counter()
        before = escape.kb_average(f, args.steps, args.grid, seed=args.seed)
        after = escape.kb_average(report.g, args.steps, args.grid, seed=args.seed)
        escape.write_density_csv(before, out / "density_f.csv")
        escape.write_density_csv(after, out / "density_g.csv")
        escape.write_profile_csv(before, out / "profile_f.csv")
        escape.write_profile_csv(after, out / "profile_g.csv")
        payload["oracle"] = {
            "grid": args.grid,
            "concentration_half_f": escape.concentration_statistic(before, 0.5),
            "concentration_half_g": escape.concentration_statistic(after, 0.5),
            "seconds": round(time.perf_counter() - t0, 3),
        }
    if args.emit_map:
        with open(out / "g.json", "w") as fh:
            json.dump(report.g.to_json(), fh)
    path = _write(args, "pipeline.json", payload)
    _say(report.lines)
    print(f"report: {path}")
    return EXIT_OK if report.passed else EXIT_FAILED


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./noacim-out)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=None, help="cap on numerical library threads")
    common.add_argument("--cap", type=int, default=rokhlin.DEFAULT_CAP, help="component cap for exact sets")

    p = argparse.ArgumentParser(prog="noacim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("tower", parents=[common], help="build and verify a Rokhlin tower")
    t.add_argument("--map", default="doubling")
    t.add_argument("--n0", type=int, default=4)
    t.add_argument("--l", type=int, default=1)
    t.add_argument("--eps0", type=rational, default=as_scalar("1/10"))
    t.add_argument("--depth", type=int, default=20, help="truncation depth T")
    t.add_argument("--N", type=int, default=None, help="goodness order of the marker set (default n0)")
    t.add_argument("--adaptive", action="store_true", help="truncate the hitting-time split at the cap")
    t.add_argument("--max-components", type=int, default=None)
    t.add_argument("--max-merges", type=int, default=None)
    t.set_defaults(func=cmd_tower)

    s = sub.add_parser("slice-verify", parents=[common], help="verify compressors along a matrix sequence")
    s.add_argument("--matrices", default=None, help="JSON file with the matrices (random if omitted)")
    s.add_argument("--eps", type=rational, default=as_scalar("3/10"))
    s.add_argument("--delta", type=rational, default=as_scalar("2/5"))
    s.add_argument("--dim", type=int, default=2)
    s.add_argument("--length", type=int, default=None, help="length of a random sequence (default k)")
    s.add_argument("--samples", type=int, default=10_000)
    s.set_defaults(func=cmd_slice_verify)

    li = sub.add_parser("linearize", parents=[common], help="linearise a map on an open set")
    li.add_argument("--map", default="surrogate")
    li.add_argument("--U", default="0:1", help="open set as lo:hi,lo:hi")
    li.add_argument("--gamma", type=rational, default=as_scalar("1/5"))
    li.add_argument("--r0", type=rational, default=as_scalar("1/1000"))
    li.add_argument("--delta", type=rational, default=None)
    li.set_defaults(func=cmd_linearize)

    e = sub.add_parser("escape", parents=[common], help="verify or search an escape certificate")
    e.add_argument("--map", default="half")
    e.add_argument("--certificate", default=None, help="JSON with K, N, eps (search if omitted)")
    e.add_argument("--eps", type=rational, default=as_scalar("1/10"))
    e.add_argument("--depth", type=int, default=8, help="largest N tried by the search")
    e.add_argument("--grid", type=int, default=0, help="grid size G for the averaging oracle (0: skip)")
    e.add_argument("--steps", type=int, default=64, help="averaging length n")
    e.set_defaults(func=cmd_escape)

    pp = sub.add_parser("pipeline", parents=[common], help="run the full construction")
    pp.add_argument("--map", default="doubling")
    pp.add_argument("--eps", type=rational, default=as_scalar("1/10"))
    pp.add_argument("--k", type=int, default=1, help="number of compressions (omit with --k 0 for the calculus)")
    pp.add_argument("--n", type=int, default=None)
    pp.add_argument("--depth", type=int, default=None, help="tower truncation depth T")
    pp.add_argument("--config", default=None, help="JSON file of PipelineConfig overrides")
    pp.add_argument("--grid", type=int, default=0, help="grid size for before/after densities (0: skip)")
    pp.add_argument("--steps", type=int, default=64)
    pp.add_argument("--emit-map", action="store_true", help="also write the perturbed map g as JSON")
    pp.set_defaults(func=cmd_pipeline)
    return p


def _limit_threads(n: int | None) -> None:
    if n is None:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    _limit_threads(args.threads)
    if getattr(args, "k", None) == 0:
        args.k = None
    try:
        return args.func(args)
    except rokhlin.ResourceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_CAP
    except MemoryError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (InputError, ValueError, KeyError, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except rokhlin.ConstructionError as exc:
        print(f"construction failed: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
