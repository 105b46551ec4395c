"""Tank and floating-body geometry, hydrostatics and graded triangulation.

The fluid domain is a finite two-dimensional tank bounded below by a bottom
profile (which may include vertical or sloped walls), above by the still
free surface ``z = 0`` on ``(x_L, x_l) U (x_r, x_R)`` and by the wetted part of
a floating body between the two contact points ``x_l`` and ``x_r``.

Boundary parts are tagged as

* ``Tag.DIRICHLET_FREE``  -- the free surface (Dirichlet data for the potential),
* ``Tag.NEUMANN_WETTED``  -- the wetted body curve,
* ``Tag.NEUMANN_BOTTOM``  -- bottom and tank walls.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import triangle
from shapely.geometry import LineString

from .errors import (
    DegenerateAngle,
    GeometryError,
    MeshGenerationFailure,
    NonClosedWettedCurve,
    SelfIntersectingCurve,
)

ANGLE_EPS = 1e-6
ARCHIMEDES_TOL = 1e-8
# vertices whose boundary turning angle exceeds this get graded like corners
_SHARP_TURN = np.deg2rad(10.0)


class Tag(enum.IntEnum):
    DIRICHLET_FREE = 1
    NEUMANN_WETTED = 2
    NEUMANN_BOTTOM = 3


# ---------------------------------------------------------------------------
# Domain description
# ---------------------------------------------------------------------------


def _bottom_polyline(bottom, x_L: float, x_R: float, n_samples: int = 201) -> np.ndarray:
    """Normalize a bottom description into a polyline from (x_L, 0) to (x_R, 0).

    ``bottom`` may be a positive depth, a callable ``b(x) <= 0`` or a sequence
    of ``(x, z)`` points.  Vertical walls are added where the profile does not
    reach the free surface at the tank ends.
    """
    if callable(bottom):
        xs = np.linspace(x_L, x_R, n_samples)
        pts = np.column_stack([xs, np.asarray(bottom(xs), dtype=float) * np.ones_like(xs)])
    elif np.ndim(bottom) == 0:
        depth = float(bottom)
        if depth <= 0:
            raise GeometryError(f"depth must be positive, got {depth}")
        pts = np.array([[x_L, -depth], [x_R, -depth]])
    else:
        pts = np.asarray(bottom, dtype=float).reshape(-1, 2)
    pts = pts.copy()
    if not np.allclose(pts[0], [x_L, 0.0]):
        pts = np.vstack([[x_L, 0.0], pts])
    if not np.allclose(pts[-1], [x_R, 0.0]):
        pts = np.vstack([pts, [x_R, 0.0]])
    pts[0] = [x_L, 0.0]
    pts[-1] = [x_R, 0.0]
    keep = np.r_[True, np.linalg.norm(np.diff(pts, axis=0), axis=1) > 0]
    return pts[keep]


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """Geometric and physical description of a tank with a floating body at rest.

    Parameters
    ----------
    x_L, x_l, x_r, x_R : float
        Tank ends and contact points, ``x_L < x_l < x_r < x_R``.
    bottom : array_like, float or callable
        Bottom profile; see :func:`_bottom_polyline`.  Stored as the polyline
        of the bottom boundary (walls included) from ``(x_L, 0)`` to ``(x_R, 0)``.
    wetted_curve : array_like, shape (n, 2)
        Polyline of the wetted body surface from ``(x_l, 0)`` to ``(x_r, 0)``.
    center_of_mass : tuple of float
        Equilibrium center of mass ``(x_G, z_G)``.
    rho, g, mass, inertia : float
        Fluid density, gravity, body mass and moment of inertia (per unit span).
    flat_length : float
        Minimal length required for the straight boundary pieces adjacent to
        each contact point.
    """

    x_L: float
    x_l: float
    x_r: float
    x_R: float
    bottom: np.ndarray
    wetted_curve: np.ndarray
    center_of_mass: tuple
    rho: float = 1.0
    g: float = 9.81
    mass: float = 1.0
    inertia: float = 1.0
    flat_length: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "bottom", _bottom_polyline(self.bottom, self.x_L, self.x_R))
        object.__setattr__(self, "wetted_curve", np.asarray(self.wetted_curve, dtype=float).reshape(-1, 2))
        object.__setattr__(self, "center_of_mass", tuple(float(c) for c in self.center_of_mass))

    @property
    def x_G(self) -> float:
        return self.center_of_mass[0]

    @property
    def z_G(self) -> float:
        return self.center_of_mass[1]

    @property
    def contact_x(self) -> np.ndarray:
        """Abscissae of the four contact points ``(x_L, x_l, x_r, x_R)``."""
        return np.array([self.x_L, self.x_l, self.x_r, self.x_R])

    def replace(self, **changes) -> "DomainSpec":
        """Return a copy with some fields changed."""
        kw = dict(
            x_L=self.x_L, x_l=self.x_l, x_r=self.x_r, x_R=self.x_R, bottom=self.bottom,
            wetted_curve=self.wetted_curve, center_of_mass=self.center_of_mass, rho=self.rho,
            g=self.g, mass=self.mass, inertia=self.inertia, flat_length=self.flat_length,
        )
        kw.update(changes)
        return DomainSpec(**kw)

    def translated(self, dx: float) -> "DomainSpec":
        """The same scenario shifted horizontally by ``dx``."""
        return self.replace(
            x_L=self.x_L + dx, x_l=self.x_l + dx, x_r=self.x_r + dx, x_R=self.x_R + dx,
            bottom=self.bottom + [dx, 0.0], wetted_curve=self.wetted_curve + [dx, 0.0],
            center_of_mass=(self.x_G + dx, self.z_G),
        )

    def boundary_pieces(self):
        """Counter-clockwise list of ``(polyline, Tag)`` around the fluid domain."""
        return [
            (self.bottom, Tag.NEUMANN_BOTTOM),
            (np.array([[self.x_R, 0.0], [self.x_r, 0.0]]), Tag.DIRICHLET_FREE),
            (self.wetted_curve[::-1], Tag.NEUMANN_WETTED),
            (np.array([[self.x_l, 0.0], [self.x_L, 0.0]]), Tag.DIRICHLET_FREE),
        ]

    def to_dict(self) -> dict:
        return {
            "domain": {
                "x_L": self.x_L, "x_l": self.x_l, "x_r": self.x_r, "x_R": self.x_R,
                "bottom": self.bottom.tolist(), "wetted_curve": self.wetted_curve.tolist(),
                "flat_length": self.flat_length,
            },
            "physics": {
                "rho": self.rho, "g": self.g, "mass": self.mass, "inertia": self.inertia,
                "center_of_mass": list(self.center_of_mass),
            },
        }

    @classmethod
    def from_dict(cls, cfg: dict) -> "DomainSpec":
        """Build from the ``domain`` and ``physics`` blocks of a scenario file."""
        d = cfg["domain"]
        p = cfg.get("physics", {})
        wetted = d["wetted_curve"]
        if isinstance(wetted, dict):
            wetted = _wetted_from_shape(wetted, float(d["x_l"]), float(d["x_r"]))
        bottom = d.get("bottom", 1.0)
        if isinstance(bottom, dict):
            bottom = float(bottom["depth"])
        spec = cls(
            x_L=float(d["x_L"]), x_l=float(d["x_l"]), x_r=float(d["x_r"]), x_R=float(d["x_R"]),
            bottom=bottom, wetted_curve=wetted,
            center_of_mass=p.get("center_of_mass", [0.5 * (float(d["x_l"]) + float(d["x_r"])), 0.0]),
            rho=float(p.get("rho", 1.0)), g=float(p.get("g", 9.81)), mass=float(p.get("mass", np.nan)),
            inertia=float(p.get("inertia", 1.0)), flat_length=float(d.get("flat_length", 0.0)),
        )
        if np.isnan(spec.mass):
            # default to the mass in Archimedes equilibrium
            spec = spec.replace(mass=spec.rho * hydrostatics(spec).area_w)
        return spec


def _wetted_from_shape(shape: dict, x_l: float, x_r: float) -> np.ndarray:
    kind = shape.get("type", "rectangle")
    if kind == "rectangle":
        d = float(shape["draft"])
        return np.array([[x_l, 0.0], [x_l, -d], [x_r, -d], [x_r, 0.0]])
    if kind == "wedge":
        # symmetric trapezoid; slope measured from the vertical
        d = float(shape["draft"])
        t = np.tan(np.deg2rad(float(shape["slope_deg"])))
        return np.array([[x_l, 0.0], [x_l + d * t, -d], [x_r - d * t, -d], [x_r, 0.0]])
    if kind == "semicircle":
        n = int(shape.get("n", 64))
        c = 0.5 * (x_l + x_r)
        r = 0.5 * (x_r - x_l)
        th = np.linspace(np.pi, 2 * np.pi, n + 1)
        pts = np.column_stack([c + r * np.cos(th), r * np.sin(th)])
        pts[0] = [x_l, 0.0]
        pts[-1] = [x_r, 0.0]
        return pts
    if kind == "polyline":
        return np.asarray(shape["points"], dtype=float)
    raise GeometryError(f"unknown wetted curve type {kind!r}")


def rectangular_scenario(x_L=0.0, x_l=4.0, x_r=6.0, x_R=10.0, depth=1.0, draft=0.5,
                         rho=1.0, g=9.81, z_G=0.0, inertia=0.4, mass=None) -> DomainSpec:
    """Reference configuration: flat tank with a rectangular body at equilibrium.

    All four contact angles are right angles.  The mass defaults to the
    displaced mass so that the body floats in equilibrium.
    """
    wetted = np.array([[x_l, 0.0], [x_l, -draft], [x_r, -draft], [x_r, 0.0]])
    if mass is None:
        mass = rho * (x_r - x_l) * draft
    return DomainSpec(x_L=x_L, x_l=x_l, x_r=x_r, x_R=x_R, bottom=depth, wetted_curve=wetted,
                      center_of_mass=(0.5 * (x_l + x_r), z_G), rho=rho, g=g, mass=mass,
                      inertia=inertia)


# ---------------------------------------------------------------------------
# Validation and hydrostatics
# ---------------------------------------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    value: object
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        def plain(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, (np.floating, np.bool_)):
                return v.item()
            return v
        return {"ok": self.ok,
                "checks": [{"name": c.name, "passed": bool(c.passed), "value": plain(c.value),
                            "detail": c.detail} for c in self.checks]}


@dataclass(frozen=True)
class Hydrostatics:
    area_w: float
    x_B: float
    z_B: float
    mass_residual: float
    center_residual: float

    @property
    def buoyancy_center(self):
        return (self.x_B, self.z_B)


def _check_endpoints(spec: DomainSpec):
    w = spec.wetted_curve
    if len(w) < 2:
        raise NonClosedWettedCurve("wetted curve needs at least two points")
    tol = 1e-12 * max(1.0, abs(spec.x_R - spec.x_L))
    if abs(w[0, 1]) > tol or abs(w[-1, 1]) > tol:
        raise NonClosedWettedCurve(
            f"wetted curve endpoints must lie on z = 0, got z = {w[0, 1]:.3g} and {w[-1, 1]:.3g}")
    if abs(w[0, 0] - spec.x_l) > tol or abs(w[-1, 0] - spec.x_r) > tol:
        raise NonClosedWettedCurve(
            f"wetted curve must run from x_l={spec.x_l} to x_r={spec.x_r}, "
            f"got {w[0, 0]} .. {w[-1, 0]}")


def hydrostatics(spec: DomainSpec) -> Hydrostatics:
    """Displaced area, center of buoyancy and Archimedes residuals.

    The displaced region is bounded by the wetted curve and the segment
    ``[x_l, x_r] x {0}``.
    """
    _check_endpoints(spec)
    w = spec.wetted_curve
    if not LineString(w).is_simple:
        raise SelfIntersectingCurve("wetted curve intersects itself")
    x, z = w[:, 0], w[:, 1]
    # polygon closed through the water line (last -> first point along z = 0)
    xn, zn = np.roll(x, -1), np.roll(z, -1)
    cross = x * zn - xn * z
    a = 0.5 * cross.sum()
    area = abs(a)
    if area == 0:
        raise GeometryError("wetted curve encloses no area")
    x_B = ((x + xn) * cross).sum() / (6 * a)
    z_B = ((z + zn) * cross).sum() / (6 * a)
    mass_res = abs(spec.rho * area - spec.mass) / spec.mass
    center_res = abs(x_B - spec.x_G) / (spec.x_r - spec.x_l)
    return Hydrostatics(area, x_B, z_B, mass_res, center_res)


def _unit(v):
    return v / np.linalg.norm(v)


def contact_angles(spec: DomainSpec) -> np.ndarray:
    """Fluid opening angles (radians) at the contact points ``x_L, x_l, x_r, x_R``.

    Measured inside the fluid between the free surface and the adjacent
    bottom, wall or body segment.
    """
    _check_endpoints(spec)
    b, w = spec.bottom, spec.wetted_curve
    two_pi = 2 * np.pi
    # (free-surface direction sign, direction of the other boundary piece)
    configs = [
        (+1, b[1] - b[0]),
        (-1, w[1] - w[0]),
        (+1, w[-2] - w[-1]),
        (-1, b[-2] - b[-1]),
    ]
    angles = []
    for sign, d in configs:
        t = _unit(d)
        a = np.arctan2(t[1], t[0])
        if sign > 0:
            ang = np.mod(-a, two_pi)
        else:
            ang = np.mod(a - np.pi, two_pi)
        # exact right angles for axis-aligned segments
        if t[0] == 0.0 and t[1] < 0:
            ang = np.pi / 2
        angles.append(ang)
    return np.array(angles)


def _flat_lengths(spec: DomainSpec) -> np.ndarray:
    b, w = spec.bottom, spec.wetted_curve
    seg = [b[1] - b[0], w[1] - w[0], w[-2] - w[-1], b[-2] - b[-1]]
    free = [spec.x_l - spec.x_L, spec.x_l - spec.x_L, spec.x_R - spec.x_r, spec.x_R - spec.x_r]
    return np.array([min(np.linalg.norm(s), f) for s, f in zip(seg, free)])


def validate_domain(spec: DomainSpec) -> ValidationReport:
    """Check the admissibility conditions of a scenario.

    Raises
    ------
    NonClosedWettedCurve
        If the wetted curve does not start and end on ``z = 0`` at the contact points.
    DegenerateAngle
        If a contact angle is not in ``(eps, pi - eps)``, ``eps = 1e-6``.
    """
    rep = ValidationReport()
    order = np.array([spec.x_L, spec.x_l, spec.x_r, spec.x_R])
    rep.checks.append(Check("ordering", bool(np.all(np.diff(order) > 0)), order.tolist(),
                            "x_L < x_l < x_r < x_R"))
    _check_endpoints(spec)
    interior = spec.wetted_curve[1:-1, 1]
    zmax = float(interior.max()) if interior.size else -np.inf
    rep.checks.append(Check("wetted_below_surface", zmax < 0, zmax,
                            "max z of interior wetted points"))
    bz = spec.bottom[1:-1, 1]
    zb = float(bz.max()) if bz.size else -np.inf
    rep.checks.append(Check("bottom_below_surface", zb < 0, zb, "max z of interior bottom points"))
    angles = contact_angles(spec)
    bad = (angles <= ANGLE_EPS) | (angles >= np.pi - ANGLE_EPS)
    if np.any(bad):
        raise DegenerateAngle(f"contact angles {angles} not in (0, pi)")
    rep.checks.append(Check("contact_angles", True, angles, "radians at x_L, x_l, x_r, x_R"))
    flat = _flat_lengths(spec)
    rep.checks.append(Check("flat_near_corner", bool(np.all(flat > max(spec.flat_length, 0.0))),
                            flat, f"straight length next to each contact point (required > {spec.flat_length})"))
    hs = hydrostatics(spec)
    rep.checks.append(Check("archimedes_mass", hs.mass_residual <= ARCHIMEDES_TOL, hs.mass_residual,
                            "|rho*area_w - mass| / mass"))
    rep.checks.append(Check("archimedes_center", hs.center_residual <= ARCHIMEDES_TOL,
                            hs.center_residual, "|x_B - x_G| / (x_r - x_l)"))
    return rep


# ---------------------------------------------------------------------------
# Meshes
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoundaryMesh:
    """Tagged boundary discretization.

    ``segments`` holds vertex indices (into the parent mesh vertices) of each
    boundary edge, ``tags`` one :class:`Tag` per edge, ``normals`` the unit
    outward normals and ``local_sizes`` the target size at each edge midpoint.
    """

    vertices: np.ndarray
    segments: np.ndarray
    tags: np.ndarray
    normals: np.ndarray
    corner_ids: np.ndarray
    local_sizes: np.ndarray

    @property
    def lengths(self) -> np.ndarray:
        p = self.vertices[self.segments]
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)

    def edges_with(self, tag) -> np.ndarray:
        return np.flatnonzero(self.tags == tag)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming P1 triangulation.

    ``dofs`` maps each vertex to a degree of freedom; it is the identity except
    for periodic meshes, where vertices on the seam share a dof.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary: BoundaryMesh
    dofs: np.ndarray
    h: float = np.nan
    q: float = np.nan
    layers: int = 0
    spec: DomainSpec | None = None
    periodic_length: float | None = None

    @property
    def n_dofs(self) -> int:
        return int(self.dofs.max()) + 1

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def min_angle(self) -> float:
        """Smallest interior angle (radians) over all triangles."""
        p = self.vertices[self.triangles]
        angs = []
        for i in range(3):
            a = p[:, (i + 1) % 3] - p[:, i]
            b = p[:, (i + 2) % 3] - p[:, i]
            c = (a * b).sum(1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            angs.append(np.arccos(np.clip(c, -1, 1)))
        return float(np.min(angs))

    def dof_coordinates(self) -> np.ndarray:
        """Coordinates of one representative vertex per dof."""
        xy = np.empty((self.n_dofs, 2))
        xy[self.dofs[::-1]] = self.vertices[::-1]
        return xy

    @classmethod
    def from_triangles(cls, vertices, triangles, tag_of: Callable, dofs=None, corner_ids=(),
                       size_of: Callable | None = None, **kw) -> "Mesh":
        """Build a mesh, detecting boundary edges and tagging them with ``tag_of(x, z)``."""
        vertices = np.asarray(vertices, dtype=float)
        triangles = np.asarray(triangles, dtype=np.int64)
        dofs = np.arange(len(vertices)) if dofs is None else np.asarray(dofs, dtype=np.int64)
        segs, third = _boundary_edges(triangles, dofs)
        mid = vertices[segs].mean(axis=1)
        tags = np.array([int(tag_of(x, z)) for x, z in mid], dtype=np.int64)
        normals = _outward_normals(vertices, segs, third)
        sizes = (np.array([size_of(x, z) for x, z in mid]) if size_of is not None
                 else np.linalg.norm(vertices[segs[:, 1]] - vertices[segs[:, 0]], axis=1))
        bm = BoundaryMesh(vertices, segs, tags, normals, np.asarray(corner_ids, dtype=np.int64), sizes)
        return cls(vertices, triangles, bm, dofs, **kw)


def _boundary_edges(triangles, dofs):
    """Edges that belong to exactly one triangle (in dof space), with the opposite vertex."""
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    opp = np.concatenate([triangles[:, 2], triangles[:, 0], triangles[:, 1]])
    key = np.sort(dofs[e], axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    on_b = counts[inv.ravel()] == 1
    return e[on_b], opp[on_b]


def _outward_normals(vertices, segs, third):
    p0, p1 = vertices[segs[:, 0]], vertices[segs[:, 1]]
    t = p1 - p0
    n = np.column_stack([t[:, 1], -t[:, 0]])
    n /= np.linalg.norm(n, axis=1)[:, None]
    inward = vertices[third] - p0
    flip = (n * inward).sum(1) > 0
    n[flip] *= -1
    return n


def _cross2(a, b):
    return a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]


def size_function(corners: np.ndarray, h: float, q: float, layers: int) -> Callable:
    """Geometric grading toward ``corners``: size ``h q**layers`` at a corner, ``h`` far away."""
    corners = np.asarray(corners, dtype=float).reshape(-1, 2)
    hmin = h * q ** layers
    slope = (1 - q) / q

    def s(p):
        p = np.atleast_2d(p)
        d = np.min(np.linalg.norm(p[:, None, :] - corners[None, :, :], axis=2), axis=1)
        return np.clip(slope * d, hmin, h)

    return s


def _discretize_segment(p0, p1, size) -> np.ndarray:
    """Points along [p0, p1] with spacing following ``size`` (endpoints included)."""
    L = np.linalg.norm(p1 - p0)
    base = np.linspace(0.0, 1.0, 4001)
    ends = np.geomspace(1e-9, 0.5, 400)
    t = np.unique(np.concatenate([base, ends, 1 - ends]))
    pts = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
    dens = 1.0 / size(pts)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(t) * L)])
    n = max(1, int(round(cum[-1])))
    levels = np.linspace(0.0, cum[-1], n + 1)
    ts = np.interp(levels, cum, t)
    ts[0], ts[-1] = 0.0, 1.0
    return p0[None, :] + ts[:, None] * (p1 - p0)[None, :]


def graded_corners(spec: DomainSpec) -> np.ndarray:
    """Contact points plus any sharp vertex of the boundary polygon."""
    pts = [np.array([x, 0.0]) for x in spec.contact_x]
    for poly, _ in spec.boundary_pieces():
        for i in range(1, len(poly) - 1):
            a = _unit(poly[i - 1] - poly[i])
            b = _unit(poly[i + 1] - poly[i])
            turn = np.pi - np.arccos(np.clip(a @ b, -1, 1))
            if turn > _SHARP_TURN:
                pts.append(poly[i].copy())
    return np.array(pts)


_SEAM = 99  # mesher marker of the symmetry line in a half-domain triangulation


def _cut_at(poly: np.ndarray, xc: float) -> np.ndarray:
    """Leading part of a polyline up to its first crossing of ``x = xc``."""
    out = [poly[0]]
    for a, b in zip(poly[:-1], poly[1:]):
        if (a[0] - xc) * (b[0] - xc) <= 0 and a[0] != b[0]:
            t = (xc - a[0]) / (b[0] - a[0])
            out.append(a + t * (b - a))
            return np.array(out)
        out.append(b)
    raise GeometryError(f"polyline does not cross x = {xc}")


def _is_mirror_symmetric(spec: DomainSpec, tol: float = 1e-12) -> bool:
    xc = 0.5 * (spec.x_L + spec.x_R)

    def same(poly):
        ref = poly[::-1].copy()
        ref[:, 0] = 2 * xc - ref[:, 0]
        return poly.shape == ref.shape and np.allclose(poly, ref, atol=tol)
    return (same(spec.bottom) and same(spec.wetted_curve)
            and abs(spec.x_l + spec.x_r - 2 * xc) < tol and abs(spec.x_G - xc) < tol)


def _half_pieces(spec: DomainSpec):
    """Boundary of the left half ``x <= (x_L + x_R)/2``, closed along the symmetry line."""
    xc = 0.5 * (spec.x_L + spec.x_R)
    bottom = _cut_at(spec.bottom, xc)
    wet = _cut_at(spec.wetted_curve, xc)
    return [
        (bottom, Tag.NEUMANN_BOTTOM),
        (np.array([bottom[-1], wet[-1]]), _SEAM),
        (wet[::-1], Tag.NEUMANN_WETTED),
        (np.array([[spec.x_l, 0.0], [spec.x_L, 0.0]]), Tag.DIRICHLET_FREE),
    ]


def _triangulate(pieces, size, h, min_angle, max_iter):
    """Quality triangulation of the polygon bounded by tagged polylines."""
    verts, vindex, segs, marks = [], {}, [], []

    def vid(p):
        key = (round(float(p[0]), 12), round(float(p[1]), 12))
        if key not in vindex:
            vindex[key] = len(verts)
            verts.append([float(p[0]), float(p[1])])
        return vindex[key]

    for poly, tag in pieces:
        for a, b in zip(poly[:-1], poly[1:]):
            pts = _discretize_segment(a, b, size)
            ids = [vid(p) for p in pts]
            for i, j in zip(ids[:-1], ids[1:]):
                segs.append([i, j])
                marks.append(int(tag))
    verts = np.array(verts)
    segs = np.array(segs)
    marks = np.array(marks)
    opts = f"pq{min_angle:g}"
    try:
        area0 = np.sqrt(3) / 4 * h ** 2
        tri = triangle.triangulate(dict(vertices=verts, segments=segs, segment_markers=marks),
                                   f"{opts}a{area0:.12g}")
        for _ in range(max_iter):
            p = tri["vertices"][tri["triangles"]]
            area = 0.5 * np.abs(_cross2(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]))
            target = np.sqrt(3) / 4 * size(p.mean(axis=1)) ** 2
            if np.all(area <= 1.25 * target):
                break
            tri["triangle_max_area"] = target
            tri = triangle.triangulate(tri, f"r{opts}a")
    except Exception as exc:  # the C mesher reports errors loosely
        raise MeshGenerationFailure(f"triangulation failed: {exc}") from exc
    if "triangles" not in tri or len(tri["triangles"]) == 0:
        raise MeshGenerationFailure("mesher returned no triangles")
    V = tri["vertices"]
    T = tri["triangles"].astype(np.int64)
    seg_out = tri["segments"].astype(np.int64)
    mark_out = tri["segment_markers"].ravel().astype(np.int64)
    lookup = {tuple(sorted(sg)): m for sg, m in zip(seg_out.tolist(), mark_out.tolist())}
    return V, T, lookup


def _mirror(V, T, lookup, xc):
    """Reflect a half mesh about ``x = xc`` and merge the seam vertices."""
    n = len(V)
    on_seam = np.abs(V[:, 0] - xc) <= 1e-12 * max(1.0, abs(xc))
    V = V.copy()
    V[on_seam, 0] = xc
    keep = ~on_seam
    new_ids = np.full(n, -1)
    new_ids[keep] = n + np.arange(keep.sum())
    image = np.where(on_seam, np.arange(n), new_ids)
    Vm = V[keep].copy()
    Vm[:, 0] = 2 * xc - Vm[:, 0]
    V2 = np.vstack([V, Vm])
    T2 = np.vstack([T, image[T][:, [0, 2, 1]]])
    lk = dict(lookup)
    for (a, b), m in lookup.items():
        if m != _SEAM:
            lk[tuple(sorted((int(image[a]), int(image[b]))))] = m
    return V2, T2, lk


def build_mesh(spec: DomainSpec, h: float, q: float = 0.5, layers: int = 6,
               min_angle: float = 28.0, max_iter: int = 20, symmetric: bool = False) -> Mesh:
    """Graded conforming triangulation of the fluid domain.

    Parameters
    ----------
    spec : DomainSpec
    h : float
        Target element size away from corners.
    q : float
        Grading ratio in (0, 1); sizes shrink by ``q`` per layer toward corners.
    layers : int
        Number of grading layers; corner-adjacent elements have size ``h q**layers``.
    min_angle : float
        Quality constraint (degrees) passed to the mesher.
    symmetric : bool
        Triangulate the left half and reflect it, so that the mesh is exactly
        mirror-symmetric about ``x = (x_L + x_R)/2``.  Requires a mirror-symmetric
        scenario with the body centred.

    Raises
    ------
    MeshGenerationFailure
    GeometryError
        If ``symmetric`` is requested for an asymmetric scenario.
    """
    if not (np.isfinite(h) and h > 0):
        raise MeshGenerationFailure(f"target size must be positive, got h={h}")
    if not (0 < q < 1):
        raise MeshGenerationFailure(f"grading ratio must lie in (0, 1), got q={q}")
    corners = graded_corners(spec)
    size = size_function(corners, h, q, layers)
    if symmetric:
        if not _is_mirror_symmetric(spec):
            raise GeometryError("symmetric mesh requested for an asymmetric scenario")
        xc = 0.5 * (spec.x_L + spec.x_R)
        V, T, lookup = _triangulate(_half_pieces(spec), size, h, min_angle, max_iter)
        V, T, lookup = _mirror(V, T, lookup, xc)
    else:
        V, T, lookup = _triangulate(spec.boundary_pieces(), size, h, min_angle, max_iter)

    p = V[T]
    signed = _cross2(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    T[signed < 0] = T[signed < 0][:, [0, 2, 1]]

    dofs = np.arange(len(V))
    bsegs, third = _boundary_edges(T, dofs)
    try:
        tags = np.array([lookup[tuple(sorted(sg))] for sg in bsegs.tolist()], dtype=np.int64)
    except KeyError as exc:
        raise MeshGenerationFailure("boundary edge without tag in mesher output") from exc
    if np.any(tags == _SEAM):
        raise MeshGenerationFailure("symmetry line left on the boundary after mirroring")
    normals = _outward_normals(V, bsegs, third)
    corner_ids = []
    for x in spec.contact_x:
        d = np.linalg.norm(V - [x, 0.0], axis=1)
        k = int(np.argmin(d))
        if d[k] > 1e-10:
            raise MeshGenerationFailure(f"contact point x={x} missing from mesh")
        corner_ids.append(k)
    sizes = size(V[bsegs].mean(axis=1))
    bm = BoundaryMesh(V, bsegs, tags, normals, np.array(corner_ids), sizes)
    return Mesh(V, T, bm, dofs, h=h, q=q, layers=layers, spec=spec)


def rectangle_mesh(x0: float, x1: float, z0: float, z1: float, nx: int, nz: int,
                   periodic: bool = False) -> Mesh:
    """Structured right-triangle mesh of a rectangle.

    The top side ``z = z1`` is tagged as free surface and the other sides as
    bottom.  With ``periodic=True`` the vertical sides are identified.
    """
    xs = np.linspace(x0, x1, nx + 1)
    zs = np.linspace(z0, z1, nz + 1)
    X, Z = np.meshgrid(xs, zs, indexing="xy")
    V = np.column_stack([X.ravel(), Z.ravel()])

    def idx(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(nz):
        for i in range(nx):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            tris.append([a, b, c])
            tris.append([a, c, d])
    T = np.array(tris)
    dofs = None
    if periodic:
        col = np.tile(np.arange(nx + 1), nz + 1)
        row = np.repeat(np.arange(nz + 1), nx + 1)
        dofs = row * nx + np.mod(col, nx)
    tz = 1e-9 * max(1.0, abs(z1 - z0))

    def tag_of(x, z):
        return Tag.DIRICHLET_FREE if abs(z - z1) < tz else Tag.NEUMANN_BOTTOM

    return Mesh.from_triangles(V, T, tag_of, dofs=dofs, h=max((x1 - x0) / nx, (z1 - z0) / nz),
                               periodic_length=(x1 - x0) if periodic else None)


def periodic_strip_mesh(length: float, depth: float, h: float) -> Mesh:
    """Flat periodic strip ``[0, length) x [-depth, 0]`` without a body."""
    nx = max(3, int(round(length / h)))
    nz = max(1, int(round(depth / h)))
    return rectangle_mesh(0.0, length, -depth, 0.0, nx, nz, periodic=True)
