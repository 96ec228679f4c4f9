"""Samples-versus-dimension sweeps and their plain-text output.

A sweep runs, for every dimension and tolerance, a number of independent
trials of an estimator and records the trial-averaged sample count. Every
random draw is keyed by ``(seed, dimension, stream id)``, so the records
depend only on the spec, the seed and the worker count.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (density_bounds, log_unit_sphere_area, moment_ratio,
                       sample_count_bound)
from .config import (characteristic_length, parse_body, parse_density, parse_dims,
                     parse_floats, parse_integrand)
from .errors import ConfigError, DomainError
from .estimators import (StoppingRule, estimate_integral, estimate_volume,
                         estimate_volume_multivalued, recentre_reference)
from .geometry import Cube, DensityBody, Ellipsoid, SectorBody, Shell, Sphere
from .oracles import (OracleValue, area_sectors, log_partial_gaussian,
                      log_partial_polynomial, volume_cube, volume_density,
                      volume_ellipsoid, volume_shell, volume_sphere)
from .sampling import DirectionStream, uniform_in_ball, worker_streams

# stream ids at or above this are reserved for jitter and recentring draws
_AUX_STREAMS = 1 << 40

DEFAULT_TRIALS = {"density": 100, "integral": 1000, "body": 10}


@dataclass
class ExperimentSpec:
    """Everything needed to reproduce a sweep.

    ``body`` uses the flag grammar (``cube:1.0``); ``density`` is shorthand
    for a density-synthetic body. ``samples`` is the budget for ``oracle``
    and ``se`` stopping and the sample count for ``fixed``. ``recentre`` is
    the number of antithetic pairs per dimension, or None for no recentring.
    ``jitter_frac`` is the diameter of the jitter ball as a fraction of the
    body's characteristic length.
    """

    target: str = "volume"
    body: str | None = None
    density: str | None = None
    integrand: str | None = None
    dimensions: list = field(default_factory=lambda: [10])
    tolerances: list = field(default_factory=lambda: [0.1])
    trials: int | None = None
    stop: str = "oracle"
    consecutive: int = 1000
    samples: int = 10_000_000
    seed: int = 0
    workers: int = 1
    recentre: int | None = None
    jitter_frac: float = 0.0

    def __post_init__(self):
        if self.target not in ("volume", "integral"):
            raise ConfigError(f"target must be volume or integral, got {self.target!r}")
        if self.body is None and self.density is None:
            raise ConfigError("need a body or a density")
        if self.body is not None and self.density is not None:
            raise ConfigError("give either a body or a density, not both")
        if self.target == "integral" and not self.integrand:
            raise ConfigError("integral sweeps need an integrand")
        self.dimensions = parse_dims(self.dimensions)
        self.tolerances = parse_floats(self.tolerances)
        if not self.tolerances or min(self.tolerances) <= 0:
            raise ConfigError(f"tolerances must be positive, got {self.tolerances}")
        if self.trials is None:
            self.trials = self.default_trials()
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.stop not in ("fixed", "oracle", "se"):
            raise ConfigError(f"stop must be fixed, oracle or se, got {self.stop!r}")
        if self.samples < 1 or self.consecutive < 1 or self.workers < 1:
            raise ConfigError("samples, consecutive and workers must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.jitter_frac < 0:
            raise ConfigError("jitter fraction must be non-negative")
        if self.recentre is not None and self.recentre < 1:
            raise ConfigError("recentre needs at least one pair per dimension")

    def default_trials(self):
        if self.target == "integral":
            return DEFAULT_TRIALS["integral"]
        return DEFAULT_TRIALS["density" if self.density else "body"]

    @property
    def body_text(self):
        return f"density:{self.density}" if self.density else self.body

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown spec keys: {sorted(extra)}")
        return cls(**data)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class SweepRecord:
    dimension: int
    tolerance: float
    samples: float
    trials: int
    seed: int
    workers: int
    body: str
    integrand: str | None = None
    budget_exceeded: int = 0
    mean_relative_error: float = math.nan
    rms_relative_error: float = math.nan
    max_relative_error: float = math.nan
    trial_samples: tuple = ()

    def as_dict(self):
        out = asdict(self)
        out["trial_samples"] = list(self.trial_samples)
        return out


# -- oracle resolution ---------------------------------------------------------

def volume_oracle(body):
    """Closed-form volume of ``body``, or None when there is none."""
    if isinstance(body, Sphere):
        return volume_sphere(body.n, body.radius)
    if isinstance(body, Cube):
        return volume_cube(body.n, body.edge)
    if isinstance(body, Ellipsoid):
        return volume_ellipsoid(body.semi_axes)
    if isinstance(body, Shell):
        return volume_shell(body.n, body.r_in, body.r_out)
    if isinstance(body, SectorBody):
        return area_sectors(body.bounds, body.radii, body.notches)
    if isinstance(body, DensityBody):
        base = volume_density(body.n, body.density)
        return OracleValue(base.log_value + body.n * math.log(body.scale), base.formula_tag)
    return None


def integral_oracle(body, integrand_text, oracle_fn):
    """Closed-form integral over ``body``, or None.

    Domains with extents uniform on ``[0, r0]`` use the integrand's own
    closed form. A sphere centred on its reference uses the partial radial
    integral times ``s_n``; a constant integrand works on any body with a
    volume oracle.
    """
    name = integrand_text.split(":")[0].strip().lower()
    if isinstance(body, DensityBody):
        d = body.density
        if d.family == "uniform" and d.params[0] == 0:
            return oracle_fn(d.params[1] * body.scale)
    if name == "constant":
        vol = volume_oracle(body)
        if vol is None:
            return None
        args = integrand_text.partition(":")[2]
        c = parse_floats(args)[0] if args.strip() else 1.0
        if c == 0:
            return OracleValue(-math.inf, "constant-integrand", 0)
        return OracleValue(vol.log_value + math.log(abs(c)), "constant-integrand",
                           1 if c > 0 else -1)
    if isinstance(body, Sphere) and np.array_equal(body.reference, body.center):
        if name == "gaussian":
            return OracleValue(log_unit_sphere_area(body.n)
                               + log_partial_gaussian(body.n, body.radius), "gaussian-ball")
        if name == "polynomial":
            coeffs = [float(v) for v in integrand_text.partition(":")[2].split(",") if v.strip()]
            log_i, sign = (log_partial_polynomial(body.n, body.radius, coeffs) if coeffs
                           else log_partial_polynomial(body.n, body.radius))
            return OracleValue(log_unit_sphere_area(body.n) + log_i, "polynomial-ball", sign)
    return None


# -- trials --------------------------------------------------------------------

def _aux_rng(seed, n, trial):
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(n, _AUX_STREAMS + trial, 0, 2))
    return np.random.Generator(np.random.PCG64DXSM(ss))


def prepare_body(spec, body, n, trial):
    if spec.jitter_frac > 0:
        radius = 0.5 * spec.jitter_frac * characteristic_length(body)
        offset = uniform_in_ball(_aux_rng(spec.seed, n, trial), n, radius)
        body = body.with_reference(body.center + offset)
    if spec.recentre:
        stream = DirectionStream(spec.seed, _AUX_STREAMS + trial, n)
        body = body.with_reference(recentre_reference(body, stream, spec.recentre * n))
    return body


def stopping_rule(spec, tol, oracle):
    if spec.stop == "fixed":
        return StoppingRule.fixed(spec.samples)
    if spec.stop == "se":
        return StoppingRule.se_threshold(tol, spec.samples)
    if oracle is None:
        raise ConfigError("oracle-consecutive stopping needs a closed-form oracle for this "
                          "body and integrand")
    if oracle.sign == 0:
        raise ConfigError("the closed form is exactly zero, so a relative tolerance "
                          "cannot be met")
    return StoppingRule.oracle_consecutive(oracle, tol, spec.consecutive, spec.samples)


def _relative_error(est, oracle):
    if oracle is None or oracle.sign == 0:
        return math.nan
    log_m, sign = est.log_mean
    if sign != oracle.sign:
        return 1.0 + (math.exp(log_m - oracle.log_value) if sign else 0.0)
    return abs(math.expm1(log_m - oracle.log_value))


def _sweep(spec, run_one, oracle_for, integrand_tag):
    records = []
    for n in spec.dimensions:
        try:
            base = parse_body(spec.body_text, n)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        oracle = oracle_for(base, n)
        for tol in spec.tolerances:
            stop = stopping_rule(spec, tol, oracle)
            counts, errors, over = [], [], 0
            for trial in range(spec.trials):
                body = prepare_body(spec, base, n, trial)
                streams = worker_streams(spec.seed, n, spec.workers, trial * spec.workers)
                est = run_one(body, n, streams, stop)
                counts.append(est.stopped_at)
                errors.append(_relative_error(est, oracle))
                over += est.budget_exceeded
            err = np.asarray(errors)
            records.append(SweepRecord(
                dimension=n, tolerance=tol, samples=float(np.mean(counts)),
                trials=spec.trials, seed=spec.seed, workers=spec.workers,
                body=spec.body_text, integrand=integrand_tag, budget_exceeded=over,
                mean_relative_error=float(np.mean(err)),
                rms_relative_error=float(np.sqrt(np.mean(err**2))),
                max_relative_error=float(np.max(err)),
                trial_samples=tuple(int(c) for c in counts)))
    return records


def run_volume(spec):
    """Trial-averaged sample counts of volume estimation, per dimension and tolerance."""
    def run_one(body, n, streams, stop):
        if body.multivalued:
            return estimate_volume_multivalued(body, streams, stop)
        return estimate_volume(body, streams, stop)
    return _sweep(spec, run_one, lambda body, n: volume_oracle(body), None)


def run_integral(spec):
    """As :func:`run_volume`, for the integral of ``spec.integrand``."""
    cache = {}

    def integrand_for(n):
        if n not in cache:
            cache[n] = parse_integrand(spec.integrand, n)
        return cache[n]

    def oracle_for(body, n):
        return integral_oracle(body, spec.integrand, integrand_for(n)[1])

    def run_one(body, n, streams, stop):
        return estimate_integral(body, integrand_for(n)[0], streams, stop)
    return _sweep(spec, run_one, oracle_for, spec.integrand)


def run(spec):
    """Run a sweep and time it; returns ``(records, wall_seconds)``."""
    t0 = time.perf_counter()
    records = run_integral(spec) if spec.target == "integral" else run_volume(spec)
    return records, time.perf_counter() - t0


# -- output --------------------------------------------------------------------

def format_number(x):
    """Shortest plain rendering: ``512.0 -> "512"``, ``476.19... -> "476.190476"``."""
    return f"{x:.10g}"


def csv_text(records):
    ordered = sorted(records, key=lambda r: (r.dimension, r.tolerance))
    return "".join(f"{r.dimension} {format_number(r.samples)}\n" for r in ordered)


def emit_csv(records, path, metadata=None):
    """Write ``dimension samples`` lines sorted by dimension, plus a JSON sidecar.

    The sidecar ``<path>.json`` holds ``metadata`` (spec, seed, workers,
    timings) and the full records.
    """
    if not records:
        raise ValueError("no records to write")
    path = Path(path)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(csv_text(records))
    meta = {"version": __version__}
    meta.update(metadata or {})
    meta["records"] = [r.as_dict() for r in records]
    with open(sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, default=_json_default)
        fh.write("\n")
    return path


def sidecar_path(path):
    path = Path(path)
    return path.with_name(path.name + ".json")


def _json_default(obj):
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


# -- theory --------------------------------------------------------------------

def theory_table(density, dims, tol):
    """Predicted sample counts next to the worst-case bound, per dimension.

    ``predicted`` inverts the relative-error prediction at ``tol``;
    ``bound`` is the worst-case count for densities bounded away from zero
    (None when the density does not qualify).
    """
    if isinstance(density, str):
        density = parse_density(density)
    if not tol > 0:
        raise DomainError(f"tolerance must be positive, got {tol}")
    bounds = density_bounds(density)
    rows = []
    for n in parse_dims(dims):
        ratio = moment_ratio(density, n)
        row = {"dimension": n, "tolerance": tol, "moment_ratio": ratio,
               "predicted": ratio * ratio / (tol * tol),
               "bound": None, "bound_valid": None}
        if bounds is not None:
            b = sample_count_bound(bounds, n, tol)
            row["bound"], row["bound_valid"] = b.value, b.valid
        rows.append(row)
    return rows
