"""P1 finite elements for the Laplace equation with mixed boundary conditions.

Dirichlet data live on the free-surface dofs, Neumann data (outward flux
density) on the wetted body and the bottom.  Normal traces on the free
surface are recovered variationally from the residual of the discrete
equations rather than by differentiating the field.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import IncompatibleFlux, SingularElement, SolverBreakdown
from .geometry import Mesh, Tag

_GAUSS = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
RESIDUAL_TOL = 1e-10


def _p1_gradients(mesh: Mesh):
    p = mesh.vertices[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    area = 0.5 * det
    scale = np.max(np.ptp(mesh.vertices, axis=0)) ** 2
    if np.any(np.abs(area) <= 1e-14 * scale):
        raise SingularElement(f"{np.sum(np.abs(area) <= 1e-14 * scale)} degenerate triangle(s)")
    # gradients of barycentric coordinates
    inv = np.empty((len(p), 2, 2))
    inv[:, 0, 0] = d2[:, 1] / det
    inv[:, 0, 1] = -d2[:, 0] / det
    inv[:, 1, 0] = -d1[:, 1] / det
    inv[:, 1, 1] = d1[:, 0] / det
    g1 = inv[:, 0]
    g2 = inv[:, 1]
    g0 = -g1 - g2
    grads = np.stack([g0, g1, g2], axis=1)
    return grads, np.abs(area)


def boundary_mass(mesh: Mesh, edges: np.ndarray, n: int) -> sp.csr_matrix:
    """Consistent P1 mass matrix of the given boundary edges (dof indexing, size n)."""
    seg = mesh.boundary.segments[edges]
    L = mesh.boundary.lengths[edges]
    d = mesh.dofs[seg]
    rows = np.concatenate([d[:, 0], d[:, 0], d[:, 1], d[:, 1]])
    cols = np.concatenate([d[:, 0], d[:, 1], d[:, 0], d[:, 1]])
    vals = np.concatenate([L / 3, L / 6, L / 6, L / 3])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


@dataclass(eq=False)
class StiffnessSystem:
    """Assembled stiffness matrix with its dof partition.

    Attributes
    ----------
    A : csr_matrix
        ``A[i, j] = int grad(phi_i) . grad(phi_j)``.
    dir_dofs : ndarray
        Free-surface dofs, sorted by abscissa.
    free_dofs : ndarray
        All remaining dofs.
    M_D : csr_matrix
        Boundary mass matrix on the free surface, indexed like ``dir_dofs``.
    """

    mesh: Mesh
    A: sp.csr_matrix
    dir_dofs: np.ndarray
    free_dofs: np.ndarray
    M_D: sp.csr_matrix
    vertex_area: np.ndarray

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @cached_property
    def dof_xy(self) -> np.ndarray:
        return self.mesh.dof_coordinates()

    @cached_property
    def x_D(self) -> np.ndarray:
        """Abscissae of the free-surface dofs."""
        return self.dof_xy[self.dir_dofs, 0]

    @cached_property
    def A_FF(self):
        return self.A[self.free_dofs][:, self.free_dofs].tocsc()

    @cached_property
    def A_FD(self):
        return self.A[self.free_dofs][:, self.dir_dofs].tocsc()

    @cached_property
    def lu_FF(self):
        try:
            return spla.splu(self.A_FF)
        except RuntimeError as exc:
            raise SolverBreakdown(f"factorization of the interior block failed: {exc}") from exc

    @cached_property
    def M_D_dense(self) -> np.ndarray:
        return self.M_D.toarray()

    @cached_property
    def M_D_cho(self):
        return sla.cho_factor(self.M_D_dense)

    def edges(self, tag) -> np.ndarray:
        return self.mesh.boundary.edges_with(tag)

    def tag_dofs(self, tag) -> np.ndarray:
        seg = self.mesh.boundary.segments[self.edges(tag)]
        return np.unique(self.mesh.dofs[seg])

    def load(self, flux, tags=(Tag.NEUMANN_WETTED, Tag.NEUMANN_BOTTOM)) -> dict:
        """Neumann load vectors ``b_i = int flux phi_i`` per boundary tag.

        ``flux`` may be ``None``, a scalar, a callable ``f(x, z, nx, nz)``, a
        mapping ``{tag: scalar or callable}`` or an array of per-edge values
        (indexed like ``mesh.boundary.segments``).
        """
        out = {}
        bm = self.mesh.boundary
        for tag in tags:
            tag = Tag(tag)
            data = flux.get(tag, flux.get(int(tag))) if isinstance(flux, Mapping) else flux
            b = np.zeros(self.n)
            if data is None:
                out[tag] = b
                continue
            e = self.edges(tag)
            if len(e) == 0:
                out[tag] = b
                continue
            seg = bm.segments[e]
            d = self.mesh.dofs[seg]
            p0 = self.mesh.vertices[seg[:, 0]]
            p1 = self.mesh.vertices[seg[:, 1]]
            L = bm.lengths[e]
            nrm = bm.normals[e]
            for xi in _GAUSS:
                if callable(data):
                    pt = (1 - xi) * p0 + xi * p1
                    f = np.asarray(data(pt[:, 0], pt[:, 1], nrm[:, 0], nrm[:, 1]), dtype=float)
                    f = np.broadcast_to(f, L.shape)
                elif np.ndim(data) == 0:
                    f = np.full(L.shape, float(data))
                else:
                    f = np.asarray(data, dtype=float)[e]
                w = 0.5 * L * f
                np.add.at(b, d[:, 0], w * (1 - xi))
                np.add.at(b, d[:, 1], w * xi)
            out[tag] = b
        return out


@dataclass(eq=False)
class ScalarField:
    """Nodal P1 field; ``load_by_tag`` records the Neumann loads used to compute it."""

    system: StiffnessSystem
    values: np.ndarray
    load_by_tag: dict = field(default_factory=dict)

    @property
    def mesh(self) -> Mesh:
        return self.system.mesh

    @property
    def at_vertices(self) -> np.ndarray:
        return self.values[self.mesh.dofs]

    @property
    def load(self) -> np.ndarray:
        b = np.zeros(self.system.n)
        for v in self.load_by_tag.values():
            b = b + v
        return b

    def energy(self) -> float:
        """Dirichlet energy ``int |grad u|^2``."""
        return float(self.values @ (self.system.A @ self.values))

    def to_csv(self, path):
        xy = self.mesh.vertices
        np.savetxt(path, np.column_stack([xy, self.at_vertices]), delimiter=",",
                   header="x,z,value", comments="")


def assemble(mesh: Mesh) -> StiffnessSystem:
    """Assemble the P1 stiffness matrix and free-surface mass matrix.

    Raises
    ------
    SingularElement
        If a triangle has zero area.
    """
    grads, area = _p1_gradients(mesh)
    K = np.einsum("tid,tjd->tij", grads, grads) * area[:, None, None]
    d = mesh.dofs[mesh.triangles]
    rows = np.repeat(d, 3, axis=1).ravel()
    cols = np.tile(d, (1, 3)).ravel()
    n = mesh.n_dofs
    A = sp.csr_matrix((K.ravel(), (rows, cols)), shape=(n, n))
    A = 0.5 * (A + A.T)
    A.sum_duplicates()
    edges = mesh.boundary.edges_with(Tag.DIRICHLET_FREE)
    dd = np.unique(mesh.dofs[mesh.boundary.segments[edges]])
    xy = mesh.dof_coordinates()
    dd = dd[np.lexsort((xy[dd, 1], xy[dd, 0]))]
    mask = np.ones(n, dtype=bool)
    mask[dd] = False
    free = np.flatnonzero(mask)
    M = boundary_mass(mesh, edges, n)
    M_D = M[dd][:, dd].tocsr()
    va = np.zeros(n)
    np.add.at(va, d.ravel(), np.repeat(area / 3, 3))
    return StiffnessSystem(mesh, A.tocsr(), dd, free, M_D, va)


def _check_residual(Amat, u, b, what):
    r = Amat @ u - b
    scale = max(np.linalg.norm(b), np.linalg.norm(Amat @ u), 1e-300)
    rel = np.linalg.norm(r) / scale if scale > 1e-300 else 0.0
    if not np.isfinite(rel) or rel > RESIDUAL_TOL:
        raise SolverBreakdown(f"{what}: relative residual {rel:.2e}")


def solve_mixed(sys: StiffnessSystem, dirichlet, neumann=None) -> ScalarField:
    """Mixed Dirichlet/Neumann Laplace problem.

    Parameters
    ----------
    sys : StiffnessSystem
    dirichlet : array_like or float or callable
        Values on ``sys.dir_dofs`` (or a callable of ``(x, z)``).
    neumann : optional
        Outward flux density on the Neumann boundary, see :meth:`StiffnessSystem.load`.

    Raises
    ------
    SolverBreakdown
    """
    xy = sys.dof_xy
    if callable(dirichlet):
        uD = np.asarray(dirichlet(xy[sys.dir_dofs, 0], xy[sys.dir_dofs, 1]), dtype=float)
    else:
        uD = np.broadcast_to(np.asarray(dirichlet, dtype=float), sys.dir_dofs.shape).copy()
    if not np.all(np.isfinite(uD)):
        raise SolverBreakdown("non-finite Dirichlet data")
    loads = sys.load(neumann)
    b = sum(loads.values())
    rhs = b[sys.free_dofs] - sys.A_FD @ uD
    uF = sys.lu_FF.solve(rhs)
    _check_residual(sys.A_FF, uF, rhs, "mixed problem")
    u = np.empty(sys.n)
    u[sys.dir_dofs] = uD
    u[sys.free_dofs] = uF
    return ScalarField(sys, u, loads)


def solve_neumann(sys: StiffnessSystem, flux, rtol: float = 1e-8) -> ScalarField:
    """Pure Neumann problem; returns the representative with zero area-weighted mean.

    ``flux`` is the outward flux density on the whole boundary, free surface included.

    Raises
    ------
    IncompatibleFlux
        If ``|int flux| > rtol * int |flux|``.
    """
    tags = (Tag.DIRICHLET_FREE, Tag.NEUMANN_WETTED, Tag.NEUMANN_BOTTOM)
    loads = sys.load(flux, tags)
    abs_loads = sys.load(_abs_flux(flux), tags)
    b = sum(loads.values())
    total = b.sum()
    mag = sum(v.sum() for v in abs_loads.values())
    if abs(total) > rtol * max(mag, 1e-300) and mag > 0:
        raise IncompatibleFlux(f"net flux {total:.3e} vs total magnitude {mag:.3e}")
    w = sys.vertex_area
    K = sp.bmat([[sys.A, w[:, None]], [w[None, :], None]], format="csc")
    rhs = np.concatenate([b - w * (total / w.sum()), [0.0]])
    sol = spla.spsolve(K, rhs)
    u = sol[:-1]
    _check_residual(K, sol, rhs, "Neumann problem")
    return ScalarField(sys, u, loads)


def _abs_flux(flux):
    if flux is None:
        return None
    if isinstance(flux, Mapping):
        return {k: _abs_flux(v) for k, v in flux.items()}
    if callable(flux):
        return lambda *a: np.abs(flux(*a))
    return np.abs(flux)


@dataclass
class BoundaryTrace:
    """Normal flux density on one tagged boundary part.

    ``values`` are nodal (P1, mass-matrix lifting of ``dual``), ``edge_values``
    the least-squares piecewise-constant density, ``dual`` the residual
    functional ``int flux phi_i``.
    """

    dofs: np.ndarray
    x: np.ndarray
    z: np.ndarray
    values: np.ndarray
    dual: np.ndarray
    edge_values: np.ndarray
    edges: np.ndarray

    def integral(self) -> float:
        return float(self.dual.sum())


def normal_trace(field: ScalarField, tag=Tag.DIRICHLET_FREE) -> BoundaryTrace:
    """Outward normal derivative of a discrete harmonic field on a boundary part.

    On the free surface the flux is the residual ``A u - b`` restricted to the
    Dirichlet dofs (variational lifting).  On Neumann parts it is the load
    that produced the field.
    """
    sys = field.system
    tag = Tag(tag)
    mesh = sys.mesh
    edges = sys.edges(tag)
    if tag == Tag.DIRICHLET_FREE:
        dofs = sys.dir_dofs
        r = sys.A @ field.values - field.load
        dual = r[dofs]
        vals = sla.cho_solve(sys.M_D_cho, dual)
    else:
        dofs = sys.tag_dofs(tag)
        b = field.load_by_tag.get(tag, np.zeros(sys.n))
        dual = b[dofs]
        M = boundary_mass(mesh, edges, sys.n)[dofs][:, dofs]
        vals = spla.spsolve(M.tocsc(), dual) if len(dofs) else dual
    # piecewise-constant least-squares density
    pos = np.full(sys.n, -1)
    pos[dofs] = np.arange(len(dofs))
    seg = mesh.dofs[mesh.boundary.segments[edges]]
    L = mesh.boundary.lengths[edges]
    B = np.zeros((len(dofs), len(edges)))
    B[pos[seg[:, 0]], np.arange(len(edges))] += 0.5 * L
    B[pos[seg[:, 1]], np.arange(len(edges))] += 0.5 * L
    ev = np.linalg.lstsq(B, dual, rcond=None)[0] if len(edges) else np.zeros(0)
    xy = sys.dof_xy[dofs]
    return BoundaryTrace(dofs, xy[:, 0], xy[:, 1], vals, dual, ev, edges)


def dump_coo(matrix, path):
    """Write a sparse matrix as ``i j value`` text lines."""
    m = sp.coo_matrix(matrix)
    np.savetxt(path, np.column_stack([m.row, m.col, m.data]), fmt=["%d", "%d", "%.17g"])
