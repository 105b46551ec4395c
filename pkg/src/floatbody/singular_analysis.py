"""Corner singular functions and the singular/regular split of harmonic extensions.

At a right-angle contact point the harmonic extension of Dirichlet data whose
odd derivatives do not vanish at the corner carries explicit log-type terms
``S_{2l+1}``.  In local coordinates ``(x, z)`` centred at the corner (fluid in
``z < 0``), with ``w = x + i z``,

    S_{2l+1} = 2 / (pi (2l+1)!) Im( w^{2l+1} (log w + i pi/2) ).

Each ``S_{2l+1}`` is harmonic, even in ``x`` (so it has zero flux across the
vertical wall) and has trace ``|x|^{2l+1} / (2l+1)!`` on ``z = 0``.  For
``l = 0`` this is ``S_1 = (1/pi)(z ln(x^2 + z^2) - 2 x arctan(x / z))``.

The similarity profiles ``G_{2l-1}`` (``d^{2l} G_{2l-1} = 2 G_{-1}`` with
vanishing data at 0) are also provided.  ``S_1`` coincides with
``z G_1(x/z) + (2/pi) z ln(-z)``; for ``l >= 1`` the same construction
``z^{2l+1} G_{2l+1}(x/z) + (2/pi) ln(-z) P_l(x, z)`` differs from the
harmonic ``S_{2l+1}`` by a non-harmonic polynomial (for ``l = 1`` it is
``-(5/(6 pi)) x^2 z``), so the complex closed form is used instead.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import factorial

import numpy as np
from scipy.integrate import quad

from .elliptic import ScalarField, StiffnessSystem, solve_mixed
from .errors import DomainError, FitWindowEmpty, NotRightAngle
from .function_spaces import GammaDFunction, _orders, _smooth_step, decompose_cc
from .geometry import Tag, contact_angles


def g_minus1(x):
    """``G_{-1}(x) = -(1/pi) / (1 + x^2)``."""
    x = np.asarray(x, dtype=float)
    return -1.0 / (np.pi * (1.0 + x ** 2))


def _g1(x):
    x = np.asarray(x, dtype=float)
    return -(2.0 / np.pi) * (x * np.arctan(x) - 0.5 * np.log1p(x ** 2))


def _g_quad(m, x):
    """``G_{2m+1}(x) = int_0^x (x - t)^{2m-1} / (2m-1)! G_1(t) dt`` for ``m >= 1``."""
    c = 1.0 / factorial(2 * m - 1)

    def one(xv):
        if xv == 0.0:
            return 0.0
        val, _ = quad(lambda t: (xv - t) ** (2 * m - 1) * _g1(t), 0.0, xv,
                      epsabs=0.0, epsrel=1e-12, limit=200)
        return c * val
    x = np.asarray(x, dtype=float)
    return np.vectorize(one, otypes=[float])(x)


def g_function(l: int, x):
    """``G_{2l-1}(x)``: ``l = 0`` is ``G_{-1}``, ``l = 1`` the closed form, ``l >= 2`` by quadrature."""
    if l < 0:
        raise ValueError("l must be >= 0")
    if l == 0:
        return g_minus1(x)
    if l == 1:
        return _g1(x)
    return _g_quad(l - 1, x)


def _check_z(z):
    z = np.asarray(z, dtype=float)
    if np.any(z >= 0):
        raise DomainError("singular functions are evaluated in the fluid, z < 0")
    return z


def s1_closed(x, z):
    """``S_1 = (1/pi) (z ln(x^2 + z^2) - 2 x arctan(x / z))`` for ``z < 0``.

    Raises
    ------
    DomainError
        If any ``z >= 0``.
    """
    z = _check_z(z)
    x = np.asarray(x, dtype=float)
    return (z * np.log(x ** 2 + z ** 2) - 2.0 * x * np.arctan(x / z)) / np.pi


def s1_gradient(x, z):
    """``(d_x S_1, d_z S_1)``."""
    z = _check_z(z)
    x = np.asarray(x, dtype=float)
    return -2.0 * np.arctan(x / z) / np.pi, (np.log(x ** 2 + z ** 2) + 2.0) / np.pi


def s_function(l: int, x, z):
    """``S_{2l+1}(x, z)`` for ``z < 0``.

    Raises
    ------
    DomainError
    """
    z = _check_z(z)
    x = np.asarray(x, dtype=float)
    if l < 0:
        raise ValueError("l must be >= 0")
    if l == 0:
        return s1_closed(x, z)
    n = 2 * l + 1
    w = x + 1j * z
    # log w + i pi/2 = ln|w| - i arctan(x/z) on the lower half plane
    lg = 0.5 * np.log(x ** 2 + z ** 2) - 1j * np.arctan(x / z)
    return 2.0 / (np.pi * factorial(n)) * np.imag(w ** n * lg)


def similarity_form(l: int, x, z):
    """``z^{2l+1} G_{2l+1}(x/z) + (2/pi) ln(-z) P_l(x, z)`` built from the profiles ``G``.

    Equal to :func:`s_function` for ``l = 0`` only; kept for comparison.
    """
    z = _check_z(z)
    x = np.asarray(x, dtype=float)
    scaled = z ** (2 * l + 1) * g_function(l + 1, x / z)
    poly = sum((-1) ** (l - k) * x ** (2 * k) * z ** (2 * (l - k) + 1)
               / (factorial(2 * k) * factorial(2 * (l - k) + 1)) for k in range(l + 1))
    return scaled - 2.0 * g_minus1(0.0) * np.log(-z) * poly


def s_function_trace(l: int, x):
    """Trace of ``S_{2l+1}`` on ``z = 0``: ``|x|^{2l+1} / (2l+1)!``."""
    x = np.asarray(x, dtype=float)
    return np.abs(x) ** (2 * l + 1) / factorial(2 * l + 1)


# ---------------------------------------------------------------------------
# Corner cut-offs and the singular part
# ---------------------------------------------------------------------------


def _corner_table(spec):
    return {"x_L": (spec.x_L, +1), "x_l": (spec.x_l, -1), "x_r": (spec.x_r, +1), "x_R": (spec.x_R, -1)}


def _draft(spec):
    return float(-np.min(spec.wetted_curve[:, 1]))


@dataclass
class SingularBasis:
    """Singular functions up to ``l_max`` and radial cut-offs ``Theta_c``.

    ``Theta_c(r) = 1`` for ``r <= r_theta / 2`` and decays smoothly to 0 at
    ``r = r_theta``.  The default radius is a quarter of the smaller of the
    distance to the nearest other corner and the body draft, capped at a
    quarter of the shortest free-surface component.
    """

    spec: object
    l_max: int = 1
    r_theta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.l_max < 0:
            raise ValueError("l_max must be >= 0")
        corners = _corner_table(self.spec)
        xs = np.array([v[0] for v in corners.values()])
        L = min(self.spec.x_l - self.spec.x_L, self.spec.x_R - self.spec.x_r)
        tank_depth = float(-np.min(self.spec.bottom[:, 1])) if hasattr(self.spec, "bottom") else np.inf
        for name, (xc, _) in corners.items():
            if name in self.r_theta:
                continue
            others = np.abs(xs - xc)
            dist = np.min(others[others > 0])
            vert = _draft(self.spec) if name in ("x_l", "x_r") else tank_depth
            self.r_theta[name] = 0.25 * min(dist, vert, L)

    def theta(self, name: str, x, z):
        xc, _ = _corner_table(self.spec)[name]
        r = np.hypot(np.asarray(x, dtype=float) - xc, np.asarray(z, dtype=float))
        R = self.r_theta[name]
        return _smooth_step((R - r) / (R / 2))

    def term(self, name: str, l: int, x, z):
        """``Theta_c S_{2l+1}(x - x_c, z)``; zero on ``z = 0`` handled through the trace."""
        if l > self.l_max:
            raise ValueError(f"l = {l} exceeds l_max = {self.l_max}")
        xc, _ = _corner_table(self.spec)[name]
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        th = self.theta(name, x, z)
        out = np.zeros(np.broadcast(x, z).shape)
        xb, zb = np.broadcast_arrays(x, z)
        act = th > 0
        wet = act & (zb < 0)
        out[wet] = s_function(l, xb[wet] - xc, zb[wet])
        top = act & (zb >= 0)
        out[top] = s_function_trace(l, xb[top] - xc)
        return th * out


def _check_right_angles(spec, names, tol=1e-8):
    ang = dict(zip(("x_L", "x_l", "x_r", "x_R"), contact_angles(spec)))
    for n in names:
        if abs(ang[n] - np.pi / 2) > tol:
            raise NotRightAngle(f"contact angle at {n} is {np.degrees(ang[n]):.4g} deg")


def trace_coefficients(psi: GammaDFunction, s: float, support: float | None = None) -> dict:
    """``{(corner, 2l+1): sigma(c) d^{2l+1} psi(x_c)}`` from one-sided differences."""
    return decompose_cc(psi, s, support)[1]


def singular_part(psi: GammaDFunction, s: float, basis: SingularBasis, sys: StiffnessSystem,
                  coefficients: dict | None = None, tol: float = 1e-10) -> ScalarField:
    """``sum_c sum_{2l+1 <= s} sigma(c) d^{2l+1} psi(x_c) Theta_c S_{2l+1}(x - x_c, z)`` on the mesh.

    Raises
    ------
    NotRightAngle
        If a corner with a non-zero coefficient does not meet the free surface at a right angle.
    """
    coeffs = trace_coefficients(psi, s) if coefficients is None else coefficients
    active = {k: v for k, v in coeffs.items() if abs(v) > tol}
    _check_right_angles(basis.spec, {k[0] for k in active})
    xy = sys.dof_xy
    vals = np.zeros(len(xy))
    for (name, order), c in active.items():
        vals += c * basis.term(name, (order - 1) // 2, xy[:, 0], xy[:, 1])
    return ScalarField(sys, vals, {})


# ---------------------------------------------------------------------------
# Numerical verification
# ---------------------------------------------------------------------------


def _triangle_gradients(sys: StiffnessSystem, u):
    mesh = sys.mesh
    xy = mesh.vertices
    tri = mesh.triangles
    uv = np.asarray(u)[mesh.dofs][tri]
    p = xy[tri]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    du1 = uv[:, 1] - uv[:, 0]
    du2 = uv[:, 2] - uv[:, 0]
    gx = (du1 * d2[:, 1] - du2 * d1[:, 1]) / det
    gz = (du2 * d1[:, 0] - du1 * d2[:, 0]) / det
    cen = p.mean(axis=1)
    return cen, np.column_stack([gx, gz]), 0.5 * np.abs(det)


def annulus_energies(sys: StiffnessSystem, u, xc: float, R: float, n_annuli: int = 5) -> np.ndarray:
    """``int_{A_k} |grad u - mean_{A_k} grad u|^2`` on annuli ``R 2^{-k-1} < r <= R 2^{-k}``."""
    cen, g, area = _triangle_gradients(sys, u)
    r = np.hypot(cen[:, 0] - xc, cen[:, 1])
    out = []
    for k in range(n_annuli):
        sel = (r <= R * 2.0 ** -k) & (r > R * 2.0 ** -(k + 1))
        if not np.any(sel):
            out.append(np.nan)
            continue
        w = area[sel]
        m = (g[sel] * w[:, None]).sum(axis=0) / w.sum()
        out.append(float(((g[sel] - m) ** 2).sum(axis=1) @ w))
    return np.array(out)


def _decay_rate(E, usable):
    k = np.arange(len(E))[usable]
    if len(k) < 2:
        return np.nan
    # E_k ~ (2^{-k})^p  ->  log2 E_k = -p k + c
    return float(-np.polyfit(k, np.log2(E[usable]), 1)[0])


def fit_s1_coefficient(field: ScalarField, xc: float, r_min: float, r_max: float) -> float:
    """Least-squares coefficient of ``S_1`` in ``{S_1, z, z^3 - 3 x^2 z}`` near the corner ``x_c``.

    Raises
    ------
    FitWindowEmpty
        If fewer than 6 fluid samples fall in ``r_min <= r <= r_max``.
    """
    xy = field.system.dof_xy
    xr = xy[:, 0] - xc
    z = xy[:, 1]
    r = np.hypot(xr, z)
    sel = (r >= r_min) & (r <= r_max) & (z < 0)
    if sel.sum() < 6:
        raise FitWindowEmpty(f"{int(sel.sum())} samples in the fit window")
    B = np.column_stack([s1_closed(xr[sel], z[sel]), z[sel], z[sel] ** 3 - 3 * xr[sel] ** 2 * z[sel]])
    return float(np.linalg.lstsq(B, field.values[sel], rcond=None)[0][0])


@dataclass
class DecompositionReport:
    h: list
    s1_coefficient: dict
    raw_energies: list
    regular_energies: list
    raw_rate: dict
    regular_rate: dict

    def to_json(self) -> str:
        def conv(o):
            if isinstance(o, np.ndarray):
                return o.tolist()
            return float(o)
        return json.dumps(self.__dict__, default=conv, indent=2)


def verify_decomposition(data, s: float, systems, basis_factory=SingularBasis,
                         corner: str = "x_r", n_annuli: int = 3, min_cells: int = 10,
                         fit_ratio: float = 1.0 / 16) -> DecompositionReport:
    """Refinement study of ``psi^h`` and ``psi^h - psi^h_sing`` at one corner.

    Parameters
    ----------
    data : callable
        Free-surface Dirichlet data ``psi(x)``; zero flux elsewhere.
    systems : sequence of StiffnessSystem
        At least one mesh; rates are reported per mesh.

    Notes
    -----
    The decay rate is the exponent ``p`` in ``E_k ~ rho_k^p`` for the
    gradient-variation energy on dyadic annuli of radius ``rho_k``, using
    annuli that contain at least ``min_cells`` triangles.  For a
    field whose gradient has a log singularity ``p`` is about 2; once the
    ``S_1`` term is removed the regular part gives ``p`` close to 4.
    """
    hs, coef, raw_E, reg_E, raw_p, reg_p = [], {}, [], [], {}, {}
    for sys in systems:
        spec = sys.mesh.spec
        basis = basis_factory(spec)
        xc = _corner_table(spec)[corner][0]
        R = basis.r_theta[corner]
        xD = sys.x_D
        psi_vals = data(xD)
        u = solve_mixed(sys, psi_vals)
        psi = GammaDFunction.from_dofs(xD, psi_vals, spec.x_l, spec.x_r)
        sing = singular_part(psi, s, basis, sys)
        reg = u.values - sing.values
        h = sys.mesh.h
        Rfit = R / 2
        radii = Rfit * 2.0 ** -np.arange(n_annuli)
        usable = _annulus_counts(sys, xc, Rfit, n_annuli) >= min_cells
        e_raw = annulus_energies(sys, u.values, xc, Rfit, n_annuli)
        e_reg = annulus_energies(sys, reg, xc, Rfit, n_annuli)
        hs.append(h)
        coef[h] = fit_s1_coefficient(u, xc, Rfit * fit_ratio, Rfit)
        raw_E.append(e_raw)
        reg_E.append(e_reg)
        raw_p[h] = _decay_rate(e_raw, usable & np.isfinite(e_raw))
        reg_p[h] = _decay_rate(e_reg, usable & np.isfinite(e_reg))
    return DecompositionReport(hs, coef, raw_E, reg_E, raw_p, reg_p)


def _annulus_counts(sys, xc, R, n_annuli):
    cen = sys.mesh.vertices[sys.mesh.triangles].mean(axis=1)
    r = np.hypot(cen[:, 0] - xc, cen[:, 1])
    return np.array([np.sum((r <= R * 2.0 ** -k) & (r > R * 2.0 ** -(k + 1))) for k in range(n_annuli)])
