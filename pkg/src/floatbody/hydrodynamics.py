"""Kirchhoff potentials, added mass, hydrostatic stiffness and free-surface traces.

Normal convention: on the wetted surface ``n`` is the unit normal pointing out
of the fluid (into the body).  With this choice ``kappa_j = n . v_j`` is the
outward flux density of the Kirchhoff problem for body mode ``j``, where
``v = ((1, 0), (0, 1), -r_perp)`` and ``r_perp = (-(z - z_G), x - x_G)``.
The potentials ``K_j`` themselves do not depend on the orientation chosen;
only the sign of the reported ``kappa`` does.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dn_operator import DnOperator
from .elliptic import ScalarField, StiffnessSystem, normal_trace, solve_mixed
from .errors import FitWindowEmpty
from .geometry import DomainSpec, Tag, hydrostatics


def kappa_values(x, z, nx, nz, center) -> np.ndarray:
    """``(n_x, n_z, -r_perp . n)`` at points with unit normals ``(nx, nz)``."""
    xG, zG = center
    x, z, nx, nz = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, z, nx, nz)))
    k3 = (z - zG) * nx - (x - xG) * nz
    return np.stack([nx, nz, k3], axis=-1)


@dataclass
class KappaTrace:
    """``kappa`` sampled at the midpoints of the wetted-curve segments."""

    midpoints: np.ndarray
    normals: np.ndarray
    values: np.ndarray


def kappa_trace(spec: DomainSpec) -> KappaTrace:
    """``kappa`` on each segment of ``spec.wetted_curve`` (normal pointing into the body)."""
    w = spec.wetted_curve
    t = np.diff(w, axis=0)
    t /= np.linalg.norm(t, axis=1)[:, None]
    n = np.column_stack([-t[:, 1], t[:, 0]])
    mid = 0.5 * (w[1:] + w[:-1])
    return KappaTrace(mid, n, kappa_values(mid[:, 0], mid[:, 1], n[:, 0], n[:, 1], spec.center_of_mass))


def kirchhoff_potentials(sys: StiffnessSystem, center) -> list:
    """Solve for ``K_1, K_2, K_3``.

    Each ``K_j`` vanishes on the free surface, has outward flux ``kappa_j`` on
    the wetted surface and zero flux on bottom and walls.
    """
    out = []
    for j in range(3):
        def flux(x, z, nx, nz, j=j):
            return kappa_values(x, z, nx, nz, center)[..., j]
        out.append(solve_mixed(sys, 0.0, {Tag.NEUMANN_WETTED: flux}))
    return out


def added_mass(K, rho: float) -> np.ndarray:
    """``Ma_ij = rho int grad K_i . grad K_j`` through the stiffness form."""
    A = K[0].system.A
    V = np.column_stack([k.values for k in K])
    Ma = rho * V.T @ (A @ V)
    return 0.5 * (Ma + Ma.T)


def green_closure(K, rho: float) -> np.ndarray:
    """``rho int_{wetted} kappa_i K_j`` evaluated from the Neumann loads."""
    V = np.column_stack([k.values for k in K])
    B = np.column_stack([k.load_by_tag[Tag.NEUMANN_WETTED] for k in K])
    return rho * B.T @ V


def _moments(spec: DomainSpec):
    xl, xr, xG = spec.x_l, spec.x_r, spec.x_G
    I1 = ((xr - xG) ** 2 - (xl - xG) ** 2) / 2
    I2 = ((xr - xG) ** 3 - (xl - xG) ** 3) / 3
    return I1, I2


def hydrostatic_matrix(spec: DomainSpec) -> np.ndarray:
    """Linearized hydrostatic restoring matrix ``C`` (order ``x``, ``z``, ``theta``)."""
    hs = hydrostatics(spec)
    I1, I2 = _moments(spec)
    rg = spec.rho * spec.g
    czz = rg * (spec.x_r - spec.x_l)
    czt = rg * I1
    ctt = rg * I2 + spec.mass * spec.g * (hs.z_B - spec.z_G)
    return np.array([[0.0, 0.0, 0.0], [0.0, czz, -czt], [0.0, -czt, ctt]])


@dataclass
class StabilityReport:
    criterion: float
    passed: bool
    z_MG: float | None


def metacenter(spec: DomainSpec) -> float:
    """``z_MG = z_B + (1/area_w) int (x - x_G)^2 dx`` over the water line."""
    hs = hydrostatics(spec)
    return hs.z_B + _moments(spec)[1] / hs.area_w


def stability_check(C, spec: DomainSpec | None = None) -> StabilityReport:
    """Static stability: ``c_zz c_tt - c_zt^2 > 0`` (strict)."""
    crit = C[1, 1] * C[2, 2] - C[1, 2] ** 2
    return StabilityReport(float(crit), bool(crit > 0 and C[1, 1] > 0),
                           metacenter(spec) if spec is not None else None)


@dataclass(eq=False)
class HydroSet:
    """Hydrodynamic coefficients of one scenario on one mesh."""

    spec: DomainSpec
    K: list
    dzK: np.ndarray
    Ma: np.ndarray
    C: np.ndarray
    kappa: KappaTrace
    green: np.ndarray

    @property
    def M_body(self) -> np.ndarray:
        return np.diag([self.spec.mass, self.spec.mass, self.spec.inertia])

    @property
    def Mtot(self) -> np.ndarray:
        return self.M_body + self.Ma

    def summary(self, op: DnOperator | None = None, h: float | None = None) -> dict:
        st = stability_check(self.C, self.spec)
        out = {"Ma": self.Ma.tolist(), "C": self.C.tolist(), "criterion": st.criterion,
               "stable": st.passed, "z_MG": st.z_MG}
        if op is not None:
            try:
                out["log_coefficients_dzK1"] = {
                    k: v[0] for k, v in singular_fit(self, op, j=0, h=h).items()}
            except FitWindowEmpty:
                pass
        return out


def dzK_trace(K, op: DnOperator | None = None) -> np.ndarray:
    """Nodal traces ``d_z K_j`` on the free-surface dofs, shape (3, n_D)."""
    return np.array([normal_trace(k, Tag.DIRICHLET_FREE).values for k in K])


def compute_hydro(spec: DomainSpec, sys: StiffnessSystem) -> HydroSet:
    """Kirchhoff potentials and all derived coefficients."""
    K = kirchhoff_potentials(sys, spec.center_of_mass)
    return HydroSet(spec, K, dzK_trace(K), added_mass(K, spec.rho), hydrostatic_matrix(spec),
                    kappa_trace(spec), green_closure(K, spec.rho))


def singular_fit(hydro: HydroSet, op: DnOperator, j: int = 0, h: float | None = None,
                 window=(5.0, 0.1), corners=("x_l", "x_r")) -> dict:
    """Least-squares fit ``d_z K_j ~ a ln|x - x_c| + b + c |x - x_c|`` near each contact point.

    The window is ``[window[0] h, window[1] |E|]`` measured from the corner,
    where ``|E|`` is the length of the adjacent free-surface component and
    ``h`` defaults to the corner element size ``mesh.h * mesh.q ** mesh.layers``
    of a graded mesh.  The linear term absorbs the smooth part of the trace,
    which otherwise leaks into ``a`` over a wide window.

    Returns
    -------
    dict
        ``{corner name: (a, b)}`` for the requested corners among
        ``"x_L", "x_l", "x_r", "x_R"``.

    Raises
    ------
    FitWindowEmpty
        If fewer than 4 samples fall in a window.
    """
    spec = hydro.spec
    if h is None:
        mesh = op.system.mesh
        h = mesh.h * mesh.q ** mesh.layers if np.isfinite(mesh.q) else mesh.h
    x = op.x
    f = hydro.dzK[j]
    out = {}
    comps = {"x_L": (spec.x_L, spec.x_l - spec.x_L, +1), "x_l": (spec.x_l, spec.x_l - spec.x_L, -1),
             "x_r": (spec.x_r, spec.x_R - spec.x_r, +1), "x_R": (spec.x_R, spec.x_R - spec.x_r, -1)}
    for name in corners:
        xc, length, side = comps[name]
        d = side * (x - xc)
        sel = (d >= window[0] * h) & (d <= window[1] * length)
        if sel.sum() < 4:
            raise FitWindowEmpty(f"fewer than 4 samples in the window near {name}")
        B = np.column_stack([np.log(d[sel]), np.ones(sel.sum()), d[sel]])
        a, b, _ = np.linalg.lstsq(B, f[sel], rcond=None)[0]
        out[name] = (float(a), float(b))
    return out
