"""Bodies, extent functions and membership-based extent construction.

An extent is the distance from a body's reference point to its boundary
along a unit direction. Bodies answer extent queries for a batch of
directions at once: ``directions`` is an ``(m, n)`` array of unit rows and
the result is an ``(m,)`` array. Bodies whose rays may cross the boundary
several times also answer :meth:`Body.crossings`, which returns every
crossing distance in ascending order, padded with NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .analysis import ExtentDensity
from .errors import ConfigError, DomainError, UnboundedBodyError

DEFAULT_BRACKET_CAP = 2.0**40
DEFAULT_TOL = 1e-9


def _point(x, n=None, name="point"):
    p = np.asarray(x, dtype=float)
    if p.ndim != 1 or not np.all(np.isfinite(p)):
        raise DomainError(f"{name} must be a finite 1-d vector, got {x!r}")
    if n is not None and p.size != n:
        raise DomainError(f"{name} has dimension {p.size}, expected {n}")
    return p


def _directions(s, n):
    s = np.asarray(s, dtype=float)
    single = s.ndim == 1
    s2 = np.atleast_2d(s)
    if s2.shape[1] != n:
        raise DomainError(f"direction has dimension {s2.shape[1]}, expected {n}")
    return s2, single


def _unwrap(values, single):
    return float(values[0]) if single else values


def _ball_roots(offset, radius, dirs):
    # roots of |offset + r s| = radius: r = -b +- sqrt(b^2 - c)
    b = dirs @ offset
    c = offset @ offset - radius * radius
    disc = b * b - c
    with np.errstate(invalid="ignore"):
        root = np.sqrt(disc)
    # larger-magnitude root first, the other from the product of roots
    far = np.where(b <= 0, -b + root, -b - root)
    with np.errstate(divide="ignore", invalid="ignore"):
        near = np.where(far != 0, c / far, 0.0)
    lo = np.minimum(near, far)
    hi = np.maximum(near, far)
    return lo, hi, disc


# -- analytic extent functions -------------------------------------------------

def extent_sphere(center, radius, reference, s):
    """Distance from ``reference`` to the sphere boundary along ``s``."""
    c = _point(center, name="center")
    p = _point(reference, c.size, "reference")
    if not radius > 0:
        raise DomainError(f"radius must be positive, got {radius}")
    d = p - c
    if not d @ d < radius * radius:
        raise DomainError("reference point is not strictly inside the sphere")
    dirs, single = _directions(s, c.size)
    b = dirs @ d
    c0 = d @ d - radius * radius  # < 0
    root = np.sqrt(b * b - c0)
    # positive root -b + root, evaluated without cancellation for b > 0
    r = np.where(b <= 0, root - b, -c0 / (b + root))
    return _unwrap(r, single)


def extent_cube(center, edge, reference, s):
    """Distance from ``reference`` to the faces of an axis-aligned cube along ``s``."""
    c = _point(center, name="center")
    p = _point(reference, c.size, "reference")
    if not edge > 0:
        raise DomainError(f"edge must be positive, got {edge}")
    d = p - c
    half = 0.5 * edge
    if not np.all(np.abs(d) < half):
        raise DomainError("reference point is not strictly inside the cube")
    dirs, single = _directions(s, c.size)
    return _unwrap(kernels.box_extents(d, np.full(c.size, half), dirs), single)


def extent_ellipsoid(semi_axes, reference, s, center=None):
    """Distance from ``reference`` to an axis-aligned ellipsoid boundary along ``s``."""
    a = _point(semi_axes, name="semi_axes")
    if not np.all(a > 0):
        raise DomainError(f"semi-axes must be positive, got {semi_axes}")
    c = np.zeros_like(a) if center is None else _point(center, a.size, "center")
    p = _point(reference, a.size, "reference") - c
    q = p / a
    c0 = q @ q - 1.0
    if not c0 < 0:
        raise DomainError("reference point is not strictly inside the ellipsoid")
    dirs, single = _directions(s, a.size)
    u = dirs / a
    A = np.einsum("ij,ij->i", u, u)
    B = u @ q
    root = np.sqrt(B * B - A * c0)
    r = np.where(B <= 0, (root - B) / A, -c0 / (B + root))
    return _unwrap(r, single)


def extent_from_membership(member, reference, s, tol=DEFAULT_TOL,
                           bracket_cap=DEFAULT_BRACKET_CAP):
    """Extent along ``s`` found by doubling then bisection on a membership test.

    ``member`` takes an ``(m, n)`` array of points and returns ``m`` booleans.
    Starting from a step of one length unit, the step doubles until a point
    tests outside; the last inside and first outside radii are then bisected
    until they are within ``tol``. For bodies that are not star-shaped about
    the reference this finds *a* crossing, not necessarily the first one.
    """
    if not tol > 0 or not bracket_cap > 0:
        raise DomainError("tol and bracket_cap must be positive")
    p = _point(reference, name="reference")
    if not bool(np.asarray(member(p[None, :]))[0]):
        raise DomainError("reference point is outside the body")
    dirs, single = _directions(s, p.size)
    m = dirs.shape[0]
    lo = np.zeros(m)
    hi = np.full(m, np.nan)
    step = min(1.0, bracket_cap)
    pending = np.arange(m)
    while pending.size:
        pts = p + step * dirs[pending]
        inside = np.asarray(member(pts), dtype=bool)
        hi[pending[~inside]] = step
        lo[pending[inside]] = step
        pending = pending[inside]
        if pending.size and step >= bracket_cap:
            raise UnboundedBodyError(
                f"no outside point within {bracket_cap} along {pending.size} direction(s)")
        step = min(2.0 * step, bracket_cap)
    width = tol  # final half-width is below tol / 2
    while True:
        active = np.nonzero(hi - lo > width)[0]
        if active.size == 0:
            break
        mid = 0.5 * (lo[active] + hi[active])
        inside = np.asarray(member(p + mid[:, None] * dirs[active]), dtype=bool)
        lo[active[inside]] = mid[inside]
        hi[active[~inside]] = mid[~inside]
    return _unwrap(0.5 * (lo + hi), single)


@dataclass(frozen=True)
class ExtentSample:
    """All boundary crossings along one direction, strictly ascending."""

    direction: np.ndarray
    extents: np.ndarray

    @property
    def count(self):
        return int(self.extents.size)


def extents_multivalued(body, s, rng=None):
    """Every boundary crossing along ``s`` from the body's reference point."""
    s = np.asarray(s, dtype=float)
    row = body.crossings(s[None, :], rng)[0]
    return ExtentSample(s, row[np.isfinite(row)])


def density_body_extent(density, rng):
    """One extent drawn from ``density``."""
    return float(density.sample(1, rng)[0])


# -- bodies --------------------------------------------------------------------

class Body:
    """A region that answers extent queries from a reference point.

    Subclasses set ``kind`` and implement :meth:`extents`; multi-valued
    bodies override :meth:`crossings`. Bodies are immutable.
    """

    kind = "abstract"
    multivalued = False
    needs_rng = False

    def __init__(self, n, reference):
        self.n = int(n)
        self.reference = _point(reference, self.n, "reference")
        self.reference.setflags(write=False)

    def extents(self, directions, rng=None):
        raise NotImplementedError

    def crossings(self, directions, rng=None):
        return self.extents(directions, rng)[:, None]

    def contains(self, points):
        raise NotImplementedError(f"{self.kind} body has no membership test")

    def with_reference(self, reference):
        raise DomainError(f"{self.kind} body has a fixed reference point")

    def scaled(self, a):
        raise NotImplementedError

    @property
    def center(self):
        """Nominal centre, when the body has one."""
        return np.zeros(self.n)

    def __repr__(self):
        return f"<{type(self).__name__} n={self.n} kind={self.kind}>"


class Sphere(Body):
    kind = "sphere"

    def __init__(self, n, radius=1.0, center=None, reference=None):
        if not radius > 0:
            raise DomainError(f"radius must be positive, got {radius}")
        self.radius = float(radius)
        self._center = np.zeros(n) if center is None else _point(center, n, "center")
        super().__init__(n, self._center if reference is None else reference)
        d = self.reference - self._center
        if not d @ d < self.radius**2:
            raise DomainError("reference point is not strictly inside the sphere")

    @property
    def center(self):
        return self._center.copy()

    def extents(self, directions, rng=None):
        return extent_sphere(self._center, self.radius, self.reference, directions)

    def contains(self, points):
        d = np.atleast_2d(points) - self._center
        return np.einsum("ij,ij->i", d, d) <= self.radius**2

    def with_reference(self, reference):
        return Sphere(self.n, self.radius, self._center, reference)

    def scaled(self, a):
        return Sphere(self.n, a * self.radius, a * self._center, a * self.reference)


class Cube(Body):
    kind = "cube"

    def __init__(self, n, edge=1.0, center=None, reference=None):
        if not edge > 0:
            raise DomainError(f"edge must be positive, got {edge}")
        self.edge = float(edge)
        self._center = np.zeros(n) if center is None else _point(center, n, "center")
        super().__init__(n, self._center if reference is None else reference)
        if not np.all(np.abs(self.reference - self._center) < 0.5 * self.edge):
            raise DomainError("reference point is not strictly inside the cube")
        self._half = np.full(self.n, 0.5 * self.edge)

    @property
    def center(self):
        return self._center.copy()

    def extents(self, directions, rng=None):
        dirs = np.atleast_2d(directions)
        return kernels.box_extents(self.reference - self._center, self._half, dirs)

    def contains(self, points):
        d = np.abs(np.atleast_2d(points) - self._center)
        return np.all(d <= 0.5 * self.edge, axis=1)

    def with_reference(self, reference):
        return Cube(self.n, self.edge, self._center, reference)

    def scaled(self, a):
        return Cube(self.n, a * self.edge, a * self._center, a * self.reference)


class Ellipsoid(Body):
    kind = "ellipsoid"

    def __init__(self, semi_axes, center=None, reference=None):
        self.semi_axes = _point(semi_axes, name="semi_axes")
        if not np.all(self.semi_axes > 0):
            raise DomainError(f"semi-axes must be positive, got {semi_axes}")
        n = self.semi_axes.size
        self._center = np.zeros(n) if center is None else _point(center, n, "center")
        super().__init__(n, self._center if reference is None else reference)
        q = (self.reference - self._center) / self.semi_axes
        if not q @ q < 1.0:
            raise DomainError("reference point is not strictly inside the ellipsoid")

    @classmethod
    def spaced(cls, n, lo=0.5, hi=1.0, **kw):
        """Semi-axes evenly spaced on ``[lo, hi]``."""
        axes = np.linspace(lo, hi, n) if n > 1 else np.array([hi])
        return cls(axes, **kw)

    @property
    def center(self):
        return self._center.copy()

    def extents(self, directions, rng=None):
        return extent_ellipsoid(self.semi_axes, self.reference, directions, self._center)

    def contains(self, points):
        q = (np.atleast_2d(points) - self._center) / self.semi_axes
        return np.einsum("ij,ij->i", q, q) <= 1.0

    def with_reference(self, reference):
        return Ellipsoid(self.semi_axes, self._center, reference)

    def scaled(self, a):
        return Ellipsoid(a * self.semi_axes, a * self._center, a * self.reference)


class DensityBody(Body):
    """A synthetic body whose extent along any direction is a fresh draw from a density.

    Directions are never repeated (with probability one), so drawing an
    independent extent per query reproduces the joint law of direction and
    extent for a body with this extent density.
    """

    kind = "density-synthetic"
    needs_rng = True

    def __init__(self, density, n, scale=1.0):
        if not isinstance(density, ExtentDensity):
            raise DomainError(f"expected an ExtentDensity, got {density!r}")
        if not scale > 0:
            raise DomainError(f"scale must be positive, got {scale}")
        self.density = density
        self.scale = float(scale)
        super().__init__(n, np.zeros(n))

    def extents(self, directions, rng=None):
        if rng is None:
            raise DomainError("density-synthetic bodies need a random stream")
        m = np.atleast_2d(directions).shape[0]
        return self.scale * self.density.sample(m, rng)

    def scaled(self, a):
        return DensityBody(self.density, self.n, a * self.scale)


def pointwise(predicate):
    """Adapt a single-point membership predicate to the batched convention."""
    def member(points):
        return np.fromiter((bool(predicate(x)) for x in np.atleast_2d(points)),
                           dtype=bool)
    return member


class MembershipBody(Body):
    """A body known only through a membership test.

    ``member`` must accept an ``(m, n)`` array of points and return ``m``
    booleans (wrap scalar predicates with :func:`pointwise`), and must be
    reentrant if the body is shared between workers.
    """

    kind = "membership-backed"

    def __init__(self, member, n, reference=None, tol=DEFAULT_TOL,
                 bracket_cap=DEFAULT_BRACKET_CAP):
        self.member = member
        self.tol = float(tol)
        self.bracket_cap = float(bracket_cap)
        super().__init__(n, np.zeros(n) if reference is None else reference)
        if not self.contains(self.reference[None, :])[0]:
            raise DomainError("reference point is outside the body")

    def extents(self, directions, rng=None):
        return extent_from_membership(self.member, self.reference,
                                      np.atleast_2d(directions), self.tol,
                                      self.bracket_cap)

    def contains(self, points):
        return np.asarray(self.member(np.atleast_2d(points)), dtype=bool)

    def with_reference(self, reference):
        return MembershipBody(self.member, self.n, reference, self.tol, self.bracket_cap)

    def scaled(self, a):
        member = self.member
        return MembershipBody(lambda x: member(np.asarray(x) / a), self.n,
                              a * self.reference, a * self.tol, a * self.bracket_cap)


class Shell(Body):
    """Spherical shell ``r_in <= |x - center| <= r_out``."""

    kind = "multi-valued shell"
    multivalued = True

    def __init__(self, n, r_in=0.5, r_out=1.0, center=None, reference=None):
        if not 0 < r_in < r_out:
            raise DomainError(f"need 0 < r_in < r_out, got {r_in}, {r_out}")
        self.r_in = float(r_in)
        self.r_out = float(r_out)
        self._center = np.zeros(n) if center is None else _point(center, n, "center")
        super().__init__(n, self._center if reference is None else reference)

    @property
    def center(self):
        return self._center.copy()

    def crossings(self, directions, rng=None):
        dirs = np.atleast_2d(directions)
        d = self.reference - self._center
        cols = []
        for radius in (self.r_in, self.r_out):
            lo, hi, disc = _ball_roots(d, radius, dirs)
            hit = disc > 0
            cols.append(np.where(hit & (lo > 0), lo, np.nan))
            cols.append(np.where(hit & (hi > 0), hi, np.nan))
        out = np.sort(np.column_stack(cols), axis=1)  # NaN sorts last
        return out

    def extents(self, directions, rng=None):
        raise DomainError("shell extents are multi-valued; use crossings()")

    def contains(self, points):
        d = np.atleast_2d(points) - self._center
        r2 = np.einsum("ij,ij->i", d, d)
        return (r2 >= self.r_in**2) & (r2 <= self.r_out**2)

    def with_reference(self, reference):
        return Shell(self.n, self.r_in, self.r_out, self._center, reference)

    def scaled(self, a):
        return Shell(self.n, a * self.r_in, a * self.r_out, a * self._center,
                     a * self.reference)


class SectorBody(Body):
    """Planar body of circular sectors about the origin, optionally notched.

    Sector ``k`` spans polar angles ``[bounds[k], bounds[k+1])`` with radius
    ``radii[k]``; ``bounds`` must cover exactly one turn. Each notch
    ``(theta0, theta1, r_lo, r_hi)`` removes the annular sector
    ``r_lo < r < r_hi`` over ``theta0 <= theta < theta1``, which makes rays in
    that angular range cross the boundary three times. The reference point
    is the origin.
    """

    kind = "composite-sector"

    def __init__(self, bounds, radii, notches=()):
        self.bounds = np.asarray(bounds, dtype=float)
        self.radii = np.asarray(radii, dtype=float)
        if self.bounds.size != self.radii.size + 1 or np.any(np.diff(self.bounds) <= 0):
            raise DomainError("bounds must increase and have one more entry than radii")
        if not math.isclose(self.bounds[-1] - self.bounds[0], 2 * math.pi):
            raise DomainError("sector bounds must cover exactly one turn")
        if not np.all(self.radii > 0):
            raise DomainError("sector radii must be positive")
        self.notches = tuple(tuple(float(v) for v in nt) for nt in notches)
        for t0, t1, lo, hi in self.notches:
            r = self._radius_at(np.array([t0, t1 - 1e-12]))
            if not (0 < lo < hi and t0 < t1 and np.all(hi < r) and r[0] == r[1]):
                raise DomainError(f"notch {(t0, t1, lo, hi)} must sit inside one sector")
        self.multivalued = bool(self.notches)
        super().__init__(2, np.zeros(2))

    @classmethod
    def semicircles(cls, r1, r2):
        """Left half-disc of radius ``r1`` joined to a right half-disc of radius ``r2``."""
        return cls([-0.5 * math.pi, 0.5 * math.pi, 1.5 * math.pi], [r2, r1])

    @classmethod
    def notched_star(cls, big=1.0, small=0.6, arms=3, notch=(0.3, 0.6)):
        """Alternating-radius star with an annular notch in its first big sector."""
        bounds = np.linspace(0.0, 2 * math.pi, 2 * arms + 1)
        radii = np.tile([big, small], arms)
        width = bounds[1] - bounds[0]
        t0 = bounds[0] + 0.25 * width
        return cls(bounds, radii, [(t0, t0 + 0.5 * width, notch[0], notch[1])])

    def _angle(self, xy):
        theta = np.arctan2(xy[:, 1], xy[:, 0])
        return self.bounds[0] + np.mod(theta - self.bounds[0], 2 * math.pi)

    def _radius_at(self, theta):
        k = np.searchsorted(self.bounds, theta, side="right") - 1
        return self.radii[np.clip(k, 0, self.radii.size - 1)]

    def extents(self, directions, rng=None):
        if self.multivalued:
            raise DomainError("notched body extents are multi-valued; use crossings()")
        return self._radius_at(self._angle(np.atleast_2d(directions)))

    def crossings(self, directions, rng=None):
        dirs = np.atleast_2d(directions)
        theta = self._angle(dirs)
        outer = self._radius_at(theta)
        if not self.notches:
            return outer[:, None]
        out = np.full((dirs.shape[0], 3), np.nan)
        out[:, 0] = outer
        for t0, t1, lo, hi in self.notches:
            hit = (theta >= t0) & (theta < t1)
            out[hit] = np.column_stack([np.full(hit.sum(), lo), np.full(hit.sum(), hi),
                                        outer[hit]])
        return out

    def contains(self, points):
        xy = np.atleast_2d(points)
        r = np.hypot(xy[:, 0], xy[:, 1])
        theta = self._angle(xy)
        inside = r <= self._radius_at(theta)
        for t0, t1, lo, hi in self.notches:
            inside &= ~((theta >= t0) & (theta < t1) & (r > lo) & (r < hi))
        return inside

    def scaled(self, a):
        return SectorBody(self.bounds, a * self.radii,
                          [(t0, t1, a * lo, a * hi) for t0, t1, lo, hi in self.notches])


def body_from_config(cfg):
    """Build a body from a dict such as ``{"kind": "cube", "dimension": 5, "edge": 1}``.

    Recognised kinds: ``sphere``, ``cube``, ``ellipsoid``, ``density-synthetic``,
    ``shell``, ``semicircles``, ``star`` and ``composite-sector``. An optional
    ``reference`` list moves the reference point.
    """
    cfg = dict(cfg)
    kind = cfg.pop("kind", None)
    n = cfg.pop("dimension", None)
    reference = cfg.pop("reference", None)
    try:
        if kind == "sphere":
            body = Sphere(n, cfg.get("radius", 1.0), cfg.get("center"))
        elif kind == "cube":
            body = Cube(n, cfg.get("edge", 1.0), cfg.get("center"))
        elif kind == "ellipsoid":
            if "semi_axes" in cfg:
                body = Ellipsoid(cfg["semi_axes"], cfg.get("center"))
            else:
                lo, hi = cfg.get("axes_range", (0.5, 1.0))
                body = Ellipsoid.spaced(n, lo, hi, center=cfg.get("center"))
        elif kind in ("density-synthetic", "density"):
            d = cfg["density"]
            density = d if isinstance(d, ExtentDensity) else ExtentDensity(
                d["family"], tuple(float(v) for v in d.get("params", ())))
            body = DensityBody(density, n, cfg.get("scale", 1.0))
        elif kind in ("shell", "multi-valued shell"):
            body = Shell(n, cfg.get("r_in", 0.5), cfg.get("r_out", 1.0), cfg.get("center"))
        elif kind == "semicircles":
            body = SectorBody.semicircles(cfg.get("r1", 1.0), cfg.get("r2", 2.0))
        elif kind == "star":
            body = SectorBody.notched_star()
        elif kind == "composite-sector":
            body = SectorBody(cfg["bounds"], cfg["radii"], cfg.get("notches", ()))
        else:
            raise ConfigError(f"unknown or unconfigurable body kind {kind!r}")
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad {kind} body config: {exc}") from exc
    if reference is not None:
        body = body.with_reference(reference)
    return body
