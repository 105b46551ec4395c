"""Discrete Dirichlet-Neumann operator on the free surface.

The operator is the Schur complement ``S`` of the stiffness matrix onto the
free-surface dofs: for a vector ``psi`` of nodal values, ``S psi`` is the
residual functional of its discrete harmonic extension, so that
``G0 psi = M^{-1} S psi`` and ``psi . S psi = int |grad psi^h|^2``.
Fractional powers are taken in the ``M``-weighted spectral calculus of the
generalized problem ``S v = lambda M v``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .elliptic import StiffnessSystem
from .errors import SolverBreakdown


@dataclass(eq=False)
class DnOperator:
    """Discrete ``G0`` with its generalized eigendecomposition.

    Attributes
    ----------
    G : ndarray
        Symmetric matrix of the pairing ``<psi, G0 psi>`` (the Schur complement).
    M : ndarray
        Free-surface mass matrix.
    eigvals, eigvecs : ndarray
        ``G v = lambda M v`` with ``eigvecs.T @ M @ eigvecs = I``.
    """

    system: StiffnessSystem
    G: np.ndarray
    M: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray

    @property
    def n(self) -> int:
        return self.G.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.system.x_D

    @cached_property
    def _M_cho(self):
        return sla.cho_factor(self.M)

    @cached_property
    def matrix(self) -> np.ndarray:
        """Dense ``M^{-1} G``: the nodal action of ``G0``."""
        return sla.cho_solve(self._M_cho, self.G)

    @cached_property
    def clean_eigvals(self) -> np.ndarray:
        """Eigenvalues with roundoff-level entries (the constants) set to zero."""
        lam = np.clip(self.eigvals, 0.0, None)
        lam[lam <= 1e-10 * lam.max()] = 0.0
        return lam

    def apply(self, psi) -> np.ndarray:
        return sla.cho_solve(self._M_cho, self.G @ psi)

    def pairing(self, a, b) -> float:
        """``<a, G0 b>``."""
        return float(a @ (self.G @ b))

    def m_norm(self, f) -> float:
        return float(np.sqrt(max(f @ (self.M @ f), 0.0)))

    def coefficients(self, f) -> np.ndarray:
        """Coordinates of ``f`` in the ``M``-orthonormal eigenbasis."""
        return self.eigvecs.T @ (self.M @ f)

    def spectrum_csv(self, path):
        np.savetxt(path, np.column_stack([np.arange(self.n), self.eigvals]), delimiter=",",
                   header="index,lambda", comments="", fmt=["%d", "%.17g"])


def assemble_G0(sys: StiffnessSystem) -> DnOperator:
    """Schur complement of the stiffness matrix on the free-surface dofs.

    Raises
    ------
    SolverBreakdown
        If the interior solve fails.
    """
    A = sys.A
    D, F = sys.dir_dofs, sys.free_dofs
    A_DD = A[D][:, D].toarray()
    A_FD = sys.A_FD.toarray()
    Y = sys.lu_FF.solve(A_FD)
    if not np.all(np.isfinite(Y)):
        raise SolverBreakdown("non-finite interior solution in Schur complement")
    S = A_DD - A_FD.T @ Y
    S = 0.5 * (S + S.T)
    M = sys.M_D_dense
    try:
        lam, V = sla.eigh(S, M)
    except np.linalg.LinAlgError as exc:
        raise SolverBreakdown(f"generalized eigensolver failed: {exc}") from exc
    return DnOperator(sys, S, M, lam, V)


def g0_power(op: DnOperator, psi, p: float) -> np.ndarray:
    """Spectral power ``G0^p psi = sum lambda_i^p <psi, v_i>_M v_i``.

    Eigenvalues within roundoff of zero are treated as exact zeros, so that
    ``p = 0`` returns ``psi`` itself.
    """
    if p < 0:
        raise ValueError("negative powers are not defined on the kernel of G0")
    lam = op.clean_eigvals
    if p == 0:
        w = np.ones_like(lam)
    else:
        w = lam ** p
    c = op.coefficients(np.asarray(psi, dtype=float))
    return op.eigvecs @ (w * c)


def hcal_seminorms(op: DnOperator, f, n: int) -> np.ndarray:
    """``[||G0^{j/2} f||_M for j = 1..n]``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    lam = op.clean_eigvals
    c2 = op.coefficients(np.asarray(f, dtype=float)) ** 2
    return np.array([np.sqrt((lam ** j * c2).sum()) for j in range(1, n + 1)])
