"""Command-line entry point: ``nsmc <subcommand> [flags]``.

Exit status is 0 on success, 2 on a configuration error and 3 when a run
hits its sample budget before the stopping rule is met.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import density_bounds
from .config import parse_body, parse_density, parse_dims, parse_integrand
from .errors import ConfigError, DomainError, NSMCError
from .estimators import (estimate_integral, estimate_volume, estimate_volume_multivalued,
                         recentre_reference)
from .harness import (ExperimentSpec, csv_text, emit_csv, integral_oracle, prepare_body, run,
                      stopping_rule, theory_table, volume_oracle)
from .kernels import BACKEND
from .sampling import DirectionStream, worker_streams

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET = 0, 2, 3

# flag name -> ExperimentSpec field
_SPEC_FLAGS = {
    "body": "body", "density": "density", "integrand": "integrand", "dim": "dimensions",
    "tol": "tolerances", "trials": "trials", "stop": "stop", "consecutive": "consecutive",
    "samples": "samples", "seed": "seed", "workers": "workers", "recentre": "recentre",
    "jitter_frac": "jitter_frac",
}


def _common(p, stop_default):
    p.add_argument("--spec", type=Path, help="JSON experiment spec; flags override it")
    p.add_argument("--dim", help="dimension(s): 10, 10,20 or 10:100:10")
    p.add_argument("--body", help="e.g. cube:1.0, sphere:0.7, ellipsoid:0.5..1.0, shell:0.5,1")
    p.add_argument("--density", help="extent density, e.g. uniform:0,1 or beta:2,2")
    p.add_argument("--tol", help="relative tolerance(s), comma-separated")
    p.add_argument("--stop", choices=("fixed", "oracle", "se"),
                   help=f"stopping rule (default {stop_default})")
    p.add_argument("--consecutive", type=int, help="K for oracle stopping (default 1000)")
    p.add_argument("--samples", type=int,
                   help="N for fixed stopping, otherwise the sample budget")
    p.add_argument("--seed", type=int, help="experiment seed (default 0)")
    p.add_argument("--workers", type=int, help="sample workers per trial (default 1)")
    p.add_argument("--jitter-frac", type=float, dest="jitter_frac",
                   help="jitter ball diameter as a fraction of the body size")
    p.add_argument("--recentre", type=int, help="recentre with this many pairs per dimension")
    p.add_argument("--out", type=Path, help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), help="output format")


def build_parser():
    parser = argparse.ArgumentParser(prog="nsmc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("volume", help="estimate a volume")
    _common(p, "fixed")
    p = sub.add_parser("integrate", help="estimate an integral over a body")
    _common(p, "fixed")
    p.add_argument("--integrand", help="gaussian, polynomial[:c0,c1,..], xcoord, constant:c")
    p = sub.add_parser("bench", help="samples-vs-dimension sweep")
    _common(p, "oracle")
    p.add_argument("--integrand", help="sweep an integral instead of a volume")
    p.add_argument("--trials", type=int, help="trials per dimension and tolerance")

    p = sub.add_parser("center", help="recentre an off-centre reference point")
    p.add_argument("--dim", type=int, default=5)
    p.add_argument("--body", default="cube:1.0")
    p.add_argument("--offset", type=float, default=0.25,
                   help="initial offset of the reference along the first axis")
    p.add_argument("--pairs", type=int, help="antithetic pairs per pass (default 4n)")
    p.add_argument("--passes", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("oracle", help="print a closed-form value as JSON")
    p.add_argument("--dim", required=True)
    p.add_argument("--body")
    p.add_argument("--density")
    p.add_argument("--integrand")

    p = sub.add_parser("theory", help="predicted and worst-case sample counts")
    p.add_argument("--density", default="uniform:0,1")
    p.add_argument("--dim", default="10:100:10")
    p.add_argument("--tol", type=float, default=0.1)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", type=Path)
    return parser


def _load_spec(args, stop_default):
    data = {}
    if args.spec is not None:
        try:
            data = json.loads(args.spec.read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read spec {args.spec}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("spec file must hold a JSON object")
    for flag, key in _SPEC_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            data[key] = value
    # a body flag replaces a density from the file and vice versa
    if getattr(args, "body", None) is not None:
        data.pop("density", None)
    if getattr(args, "density", None) is not None:
        data.pop("body", None)
    data.setdefault("stop", stop_default)
    if data.get("integrand"):
        data.setdefault("target", "integral")
    return ExperimentSpec.from_dict(data)


def _write(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _dumps(obj):
    return json.dumps(obj, indent=2, default=_plain) + "\n"


def _plain(obj):
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _finite(x):
    return x if isinstance(x, float) and math.isfinite(x) else None


def _single_runs(spec, integral):
    """One estimate per dimension and tolerance (the first trial of a sweep)."""
    out = []
    for n in spec.dimensions:
        base = parse_body(spec.body_text, n)
        if integral:
            integrand, oracle_fn = parse_integrand(spec.integrand, n)
            oracle = integral_oracle(base, spec.integrand, oracle_fn)
        else:
            oracle = volume_oracle(base)
        body = prepare_body(spec, base, n, 0)
        for tol in (spec.tolerances if spec.stop != "fixed" else [None]):
            stop = stopping_rule(spec, tol, oracle)
            streams = worker_streams(spec.seed, n, spec.workers)
            t0 = time.perf_counter()
            if integral:
                est = estimate_integral(body, integrand, streams, stop)
            elif body.multivalued:
                est = estimate_volume_multivalued(body, streams, stop)
            else:
                est = estimate_volume(body, streams, stop)
            rec = {"dimension": n, "body": spec.body_text}
            if integral:
                rec["integrand"] = spec.integrand
            rec.update(est.as_record())
            rec["mean"] = _finite(rec["mean"])
            rec["tolerance"] = tol
            rec["oracle"] = oracle.as_dict() if oracle is not None else None
            if oracle is not None and oracle.sign and est.log_mean[1] == oracle.sign:
                rec["relative_error"] = abs(math.expm1(est.log_mean[0] - oracle.log_value))
            rec.update(seed=spec.seed, workers=spec.workers, backend=BACKEND,
                       wall_time=time.perf_counter() - t0)
            out.append(rec)
    return out


def cmd_estimate(args, integral):
    if integral and args.integrand is None and args.spec is None:
        args.integrand = "gaussian"
    spec = _load_spec(args, "fixed")
    if args.samples is None and spec.stop == "fixed" and args.spec is None:
        spec.samples = 100_000
    if integral and spec.target != "integral":
        raise ConfigError("integrate needs an integrand")
    records = _single_runs(spec, integral)
    if (args.format or "json") == "csv":
        _write("".join(f"{r['dimension']} {r['mean']!r}\n" for r in records), args.out)
    else:
        _write(_dumps(records if len(records) > 1 else records[0]), args.out)
    return EXIT_BUDGET if any(r["budget_exceeded"] for r in records) else EXIT_OK


def _tol_path(out, tol, many):
    if not many:
        return out
    return out.with_name(f"{out.stem}_tol{tol:g}{out.suffix}")


def cmd_bench(args):
    spec = _load_spec(args, "oracle")
    records, wall = run(spec)
    fmt = args.format or "csv"
    meta = {"spec": spec.to_dict(), "seed": spec.seed, "workers": spec.workers,
            "backend": BACKEND, "wall_time_seconds": wall}
    if fmt == "json":
        _write(_dumps({"version": __version__, **meta,
                       "records": [r.as_dict() for r in records]}), args.out)
    else:
        many = len(spec.tolerances) > 1
        for tol in spec.tolerances:
            part = [r for r in records if r.tolerance == tol]
            if args.out is None:
                if many:
                    sys.stdout.write(f"# tolerance {tol:g}\n")
                sys.stdout.write(csv_text(part))
            else:
                emit_csv(part, _tol_path(args.out, tol, many), meta)
    return EXIT_BUDGET if any(r.budget_exceeded for r in records) else EXIT_OK


def cmd_center(args):
    n = args.dim
    body = parse_body(args.body, n)
    start = body.center.copy()
    start[0] += args.offset
    body = body.with_reference(start)
    pairs = args.pairs or 4 * n
    stream = DirectionStream(args.seed, 0, n)
    final = recentre_reference(body, stream, pairs, args.passes)
    before = float(np.linalg.norm(start - body.center))
    after = float(np.linalg.norm(final - body.center))
    _write(_dumps({"dimension": n, "body": args.body, "pairs": pairs,
                   "passes": args.passes, "seed": args.seed,
                   "initial_offset": before, "final_offset": after,
                   "reduction": 1.0 - after / before if before else None,
                   "reference": final}), None)
    return EXIT_OK


def cmd_oracle(args):
    if (args.body is None) == (args.density is None):
        raise ConfigError("give exactly one of --body or --density")
    text = args.body or f"density:{args.density}"
    out = []
    for n in parse_dims(args.dim):
        body = parse_body(text, n)
        if args.integrand:
            oracle = integral_oracle(body, args.integrand, parse_integrand(args.integrand, n)[1])
        else:
            oracle = volume_oracle(body)
        if oracle is None:
            raise ConfigError(f"no closed form for {text}"
                              + (f" with {args.integrand}" if args.integrand else ""))
        out.append({"dimension": n, **oracle.as_dict()})
    _write(_dumps(out if len(out) > 1 else out[0]), None)
    return EXIT_OK


def cmd_theory(args):
    density = parse_density(args.density)
    rows = theory_table(density, args.dim, args.tol)
    if args.format == "json":
        _write(_dumps({"density": density.label,
                       "bounded": density_bounds(density) is not None, "rows": rows}),
               args.out)
    else:
        lines = ["# dimension predicted bound bound_valid\n"]
        for r in rows:
            bound = "nan" if r["bound"] is None else f"{r['bound']:.10g}"
            lines.append(f"{r['dimension']} {r['predicted']:.10g} {bound} "
                         f"{int(bool(r['bound_valid']))}\n")
        _write("".join(lines), args.out)
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "volume":
            return cmd_estimate(args, integral=False)
        if args.command == "integrate":
            return cmd_estimate(args, integral=True)
        if args.command == "bench":
            return cmd_bench(args)
        if args.command == "center":
            return cmd_center(args)
        if args.command == "oracle":
            return cmd_oracle(args)
        return cmd_theory(args)
    except (ConfigError, DomainError) as exc:
        print(f"nsmc: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NSMCError as exc:
        print(f"nsmc: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
