"""Mini-grammar for bodies, densities, integrands and dimension ranges.

Examples accepted on the command line::

    --body cube:1.0            --density uniform:0,1
    --body sphere:0.7          --density beta:2,2
    --body ellipsoid:0.5..1.0  --density polynomial:2
    --body shell:0.5,1         --integrand polynomial:-0.09375,0.6875,-1.5,1
    --body semicircles:1,2     --dim 10:100:10
"""

from __future__ import annotations

from .analysis import ExtentDensity
from .errors import ConfigError, DomainError
from .estimators import (RadialIntegrand, constant_integrand, gaussian_integrand,
                         polynomial_integrand, xcoord_integrand)
from .geometry import Cube, DensityBody, Ellipsoid, SectorBody, Shell, Sphere
from .oracles import (DEFAULT_POLYNOMIAL, integral_constant, integral_gaussian,
                      integral_polynomial, integral_xcoord)

BODY_KINDS = ("sphere", "cube", "ellipsoid", "shell", "semicircles", "star", "density")
INTEGRANDS = ("gaussian", "polynomial", "xcoord", "constant")


def _split(text):
    name, _, args = text.strip().partition(":")
    return name.strip().lower(), args.strip()


def parse_floats(text):
    """``"0.05,0.1"`` -> ``[0.05, 0.1]``."""
    if isinstance(text, (int, float)):
        return [float(text)]
    if not isinstance(text, str):
        return [float(v) for v in text]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


def parse_dims(text):
    """``"10"``, ``"10,20,30"`` or ``"lo:hi:step"`` (inclusive) -> list of ints."""
    if isinstance(text, int):
        dims = [text]
    elif not isinstance(text, str):
        dims = [int(v) for v in text]
    else:
        try:
            if ":" in text:
                parts = [int(v) for v in text.split(":")]
                if len(parts) == 2:
                    parts.append(1)
                lo, hi, step = parts
                if step < 1:
                    raise ConfigError(f"step must be positive in {text!r}")
                dims = list(range(lo, hi + 1, step))
            else:
                dims = [int(v) for v in text.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad dimension list {text!r}") from exc
    if not dims or min(dims) < 1:
        raise ConfigError(f"dimensions must be >= 1, got {dims}")
    return dims


def parse_density(text):
    """Build an :class:`ExtentDensity` from e.g. ``uniform:0,1`` or ``arcsine``."""
    name, args = _split(text)
    vals = parse_floats(args) if args else []
    try:
        if name == "uniform":
            return ExtentDensity.uniform(*(vals or [0.0, 1.0]))
        if name == "beta":
            return ExtentDensity.beta(*vals)
        if name == "arcsine":
            return ExtentDensity.arcsine()
        if name == "delta":
            return ExtentDensity.delta(*(vals or [1.0]))
        if name == "polynomial":
            return ExtentDensity.polynomial(*vals)
        if name in ("uquadratic", "u-quadratic"):
            return ExtentDensity.u_quadratic()
    except (TypeError, DomainError) as exc:
        raise ConfigError(f"bad density {text!r}: {exc}") from exc
    raise ConfigError(f"unknown density family {name!r}")


def parse_body(text, n):
    """Build a body in ``n`` dimensions from e.g. ``cube:1.0`` or ``density:beta:2,2``."""
    name, args = _split(text)
    try:
        if name == "density":
            return DensityBody(parse_density(args or "uniform:0,1"), n)
        vals = parse_floats(args) if args and ".." not in args else []
        if name == "sphere":
            return Sphere(n, *(vals or [1.0]))
        if name == "cube":
            return Cube(n, *(vals or [1.0]))
        if name == "ellipsoid":
            if ".." in args:
                lo, hi = (float(v) for v in args.split(".."))
                return Ellipsoid.spaced(n, lo, hi)
            if not vals:
                return Ellipsoid.spaced(n, 0.5, 1.0)
            if len(vals) != n:
                raise ConfigError(f"ellipsoid has {len(vals)} semi-axes but dimension is {n}")
            return Ellipsoid(vals)
        if name == "shell":
            return Shell(n, *(vals or [0.5, 1.0]))
        if name in ("semicircles", "star"):
            if n != 2:
                raise ConfigError(f"{name} body is planar; got dimension {n}")
            if name == "star":
                return SectorBody.notched_star()
            return SectorBody.semicircles(*(vals or [1.0, 2.0]))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad body {text!r}: {exc}") from exc
    raise ConfigError(f"unknown body kind {name!r}; expected one of {', '.join(BODY_KINDS)}")


def parse_integrand(text, n):
    """Return ``(RadialIntegrand, oracle_fn)``; ``oracle_fn(r0)`` is the closed form
    over a domain with extents uniform on ``[0, r0]``."""
    name, args = _split(text)
    vals = parse_floats(args) if args else []
    if name == "gaussian":
        return RadialIntegrand(gaussian_integrand(), n), lambda r0: integral_gaussian(n, r0)
    if name == "polynomial":
        coeffs = tuple(vals) if vals else DEFAULT_POLYNOMIAL
        return (RadialIntegrand(polynomial_integrand(coeffs), n),
                lambda r0: integral_polynomial(n, r0, coeffs))
    if name == "xcoord":
        return RadialIntegrand(xcoord_integrand(), n), lambda r0: integral_xcoord(n, r0)
    if name == "constant":
        c = vals[0] if vals else 1.0
        return (RadialIntegrand(constant_integrand(c), n),
                lambda r0: integral_constant(n, c, r0))
    raise ConfigError(f"unknown integrand {name!r}; expected one of {', '.join(INTEGRANDS)}")


def characteristic_length(body):
    """Length that reference jitter is measured against: edge, diameter or longest axis."""
    if isinstance(body, Cube):
        return body.edge
    if isinstance(body, Sphere):
        return 2.0 * body.radius
    if isinstance(body, Ellipsoid):
        return 2.0 * float(max(body.semi_axes))
    if isinstance(body, Shell):
        return 2.0 * body.r_out
    raise ConfigError(f"reference jitter is not defined for a {body.kind} body")
