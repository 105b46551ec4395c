"""Radiation kernel, exciting force and the Cummins integro-differential equation.

With the body frozen, the fluid evolves by ``d_t zeta = G psi``,
``d_t psi = -g zeta``.  The radiative fields start from ``(d_z K_j, 0)`` and
the kernel is ``K_ij(t) = int d_z K_i zeta^rad_j(t)``.  The body motion then
solves

    Mtot X'' + rho g int_0^t K(t - s) X'(s) ds + C X = F_exc,
    F_exc(t) = -rho g int zeta^exc(t) d_z K,

where ``zeta^exc`` is the frozen-body evolution of the incoming wave field.
All runs share one uniform time grid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import GridMismatch, SolverBreakdown
from .john_evolution import State, SystemOperator, simulate


class FluidPropagator:
    """Implicit midpoint stepping of the frozen-body fluid system (many columns at once)."""

    def __init__(self, opsys: SystemOperator, dt: float):
        n = opsys.n
        g = opsys.g
        B = np.zeros((2 * n, 2 * n))
        B[:n, n:] = -opsys.op.matrix
        B[n:, :n] = g * np.eye(n)
        I = np.eye(2 * n)
        self.n = n
        self.dt = dt
        self.B = B
        self._lu = sla.lu_factor(I + 0.5 * dt * B)
        self._rhs = I - 0.5 * dt * B

    def step(self, Y):
        out = sla.lu_solve(self._lu, self._rhs @ Y)
        if not np.all(np.isfinite(out)):
            raise SolverBreakdown("non-finite fluid state")
        return out

    def run(self, Y0, nsteps: int):
        """Return ``zeta`` at every step (shape ``(nsteps+1, n, k)``) and the final state."""
        Y = np.array(Y0, dtype=float, copy=True)
        if Y.ndim == 1:
            Y = Y[:, None]
        Z = np.empty((nsteps + 1, self.n, Y.shape[1]))
        Z[0] = Y[:self.n]
        for k in range(nsteps):
            Y = self.step(Y)
            Z[k + 1] = Y[:self.n]
        return Z, Y


@dataclass
class RadiativeFields:
    t: np.ndarray
    zeta: np.ndarray  # (nt, n, 3)
    energy: np.ndarray  # (nt, 3)


def _fluid_energy(opsys, Y):
    n = opsys.n
    z, p = Y[:n], Y[n:]
    return 0.5 * opsys.g * np.einsum("ik,ij,jk->k", z, opsys.op.M, z) + 0.5 * np.einsum(
        "ik,ij,jk->k", p, opsys.op.G, p)


def radiative_fields(opsys: SystemOperator, T: float, dt: float) -> RadiativeFields:
    """Frozen-body runs from ``(d_z K_j, 0)``, ``j = 1, 2, 3`` (unrestricted traces)."""
    nsteps = int(round(T / dt))
    n = opsys.n
    prop = FluidPropagator(opsys, dt)
    Y = np.zeros((2 * n, 3))
    Y[:n] = np.asarray(opsys.hydro.dzK).T
    Z = np.empty((nsteps + 1, n, 3))
    E = np.empty((nsteps + 1, 3))
    Z[0] = Y[:n]
    E[0] = _fluid_energy(opsys, Y)
    for k in range(nsteps):
        Y = prop.step(Y)
        Z[k + 1] = Y[:n]
        E[k + 1] = _fluid_energy(opsys, Y)
    return RadiativeFields(dt * np.arange(nsteps + 1), Z, E)


@dataclass
class KernelReport:
    symmetric_K0: float
    min_eig_K0: float
    t0: float
    max_asymmetry: float


@dataclass
class RadiationKernel:
    """``K(t_k)`` on a uniform grid; ``K[k][i, j] = int d_z K_i zeta^rad_j(t_k)``."""

    t: np.ndarray
    K: np.ndarray
    dzK0: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def positivity(self, active=(0, 1, 2), tol: float = 0.0) -> KernelReport:
        """Symmetry of ``K(0)``, its smallest eigenvalue and the first time the active block loses positivity."""
        idx = np.array(active)
        K0 = self.K[0]
        sym = float(np.linalg.norm(K0 - K0.T) / max(np.linalg.norm(K0), 1e-300))
        Ks = self.K[:, idx][:, :, idx]
        mins = np.array([np.linalg.eigvalsh(0.5 * (k + k.T)).min() for k in Ks])
        bad = np.flatnonzero(mins <= tol)
        t0 = float(self.t[bad[0] - 1]) if len(bad) and bad[0] > 0 else (
            float(self.t[-1]) if not len(bad) else 0.0)
        asym = float(np.max(np.abs(self.K - np.transpose(self.K, (0, 2, 1)))))
        return KernelReport(sym, float(np.linalg.eigvalsh(K0).min()), t0, asym)

    def to_csv(self, path):
        header = "t," + ",".join(f"K{i + 1}{j + 1}" for i in range(3) for j in range(3))
        np.savetxt(path, np.column_stack([self.t, self.K.reshape(len(self.t), 9)]), delimiter=",",
                   header=header, comments="", fmt="%.12g")


def kernel(opsys: SystemOperator, T: float, dt: float, fields: RadiativeFields | None = None) -> RadiationKernel:
    """Radiation kernel from the radiative runs."""
    rf = fields or radiative_fields(opsys, T, dt)
    dzK = np.asarray(opsys.hydro.dzK)
    M = opsys.op.M
    K = np.einsum("in,nm,kmj->kij", dzK, M, rf.zeta)
    return RadiationKernel(rf.t, K, dzK.copy())


def kernel_gram_form(opsys: SystemOperator, rf: RadiativeFields) -> np.ndarray:
    """``int zeta^rad(0) (x) zeta^rad(t)``; identical to :func:`kernel` by construction of the data."""
    M = opsys.op.M
    return np.einsum("ni,nm,kmj->kij", rf.zeta[0], M, rf.zeta)


@dataclass
class ExcitingForce:
    t: np.ndarray
    F: np.ndarray
    zeta: np.ndarray | None = None

    def to_csv(self, path):
        np.savetxt(path, np.column_stack([self.t, self.F]), delimiter=",", header="t,F1,F2,F3",
                   comments="", fmt="%.12g")


def exciting_force(opsys: SystemOperator, zeta_in, psi_in, T: float, dt: float,
                   keep_field: bool = False) -> ExcitingForce:
    """``F_exc(t) = -rho g int zeta^exc(t) d_z K`` from the frozen-body run."""
    nsteps = int(round(T / dt))
    prop = FluidPropagator(opsys, dt)
    Z, _ = prop.run(np.concatenate([zeta_in, psi_in]), nsteps)
    Z = Z[:, :, 0]
    dzK = np.asarray(opsys.hydro.dzK)
    F = -opsys.rho * opsys.g * (Z @ opsys.op.M) @ dzK.T
    return ExcitingForce(dt * np.arange(nsteps + 1), F, Z if keep_field else None)


@dataclass
class CumminsSolution:
    t: np.ndarray
    X: np.ndarray
    V: np.ndarray


def solve_cummins(Mtot, C, kern: RadiationKernel, F, X_in, V_in, T: float, dt: float,
                  rho: float = 1.0, g: float = 9.81, active=(0, 1, 2)) -> CumminsSolution:
    """Trapezoidal scheme for ``Mtot X'' + rho g (K * X') + C X = F``.

    Velocity update (implicit in ``V_{k+1}``)::

        Mtot (V_{k+1} - V_k) = dt/2 [ -rho g (c_k + c_{k+1}) - C (X_k + X_{k+1}) + F_k + F_{k+1} ]

    with ``c_k = dt sum'' K(t_k - t_m) V_m`` (trapezoidal convolution) and
    ``X_{k+1} = X_k + dt/2 (V_k + V_{k+1})``.

    Raises
    ------
    GridMismatch
        If the kernel or force grid does not match ``dt`` and ``T``.
    """
    nsteps = int(round(T / dt))
    if abs(kern.dt - dt) > 1e-12 * dt or len(kern.t) < nsteps + 1:
        raise GridMismatch("kernel grid does not match the time step / horizon")
    if F is None:
        Fv = np.zeros((nsteps + 1, 3))
    else:
        Fv = np.asarray(F.F if isinstance(F, ExcitingForce) else F, dtype=float)
        if len(Fv) < nsteps + 1:
            raise GridMismatch("force samples do not cover the time horizon")
    if isinstance(F, ExcitingForce) and abs((F.t[1] - F.t[0]) - dt) > 1e-12 * dt:
        raise GridMismatch("force grid does not match the time step")
    idx = np.array(sorted(active), dtype=int)
    P = np.zeros((3, 3))
    P[idx, idx] = 1.0
    Mtot = P @ np.asarray(Mtot) @ P
    C = P @ np.asarray(C) @ P
    Kk = np.einsum("ab,kbc,cd->kad", P, kern.K[:nsteps + 1], P)
    Fv = Fv[:nsteps + 1] @ P.T
    rg = rho * g
    sub = np.ix_(idx, idx)
    X = np.zeros((nsteps + 1, 3))
    V = np.zeros((nsteps + 1, 3))
    X[0] = P @ np.asarray(X_in, dtype=float)
    V[0] = P @ np.asarray(V_in, dtype=float)
    lhs = Mtot + 0.25 * dt ** 2 * rg * Kk[0] + 0.25 * dt ** 2 * C
    if len(idx):
        lhs_inv = np.zeros((3, 3))
        lhs_inv[sub] = np.linalg.inv(lhs[sub])
    else:
        lhs_inv = np.zeros((3, 3))
    conv_prev = np.zeros(3)  # c_0 = 0
    for k in range(nsteps):
        # known part of c_{k+1}: dt [K_{k+1} V_0 / 2 + sum_{m=1..k} K_{k+1-m} V_m]
        known = 0.5 * Kk[k + 1] @ V[0]
        if k >= 1:
            known = known + np.einsum("mij,mj->i", Kk[k:0:-1], V[1:k + 1])
        known *= dt
        rhs = (Mtot @ V[k] + 0.5 * dt * (-rg * (conv_prev + known) - C @ (2 * X[k] + 0.5 * dt * V[k])
                                         + Fv[k] + Fv[k + 1]))
        V[k + 1] = lhs_inv @ rhs
        X[k + 1] = X[k] + 0.5 * dt * (V[k] + V[k + 1])
        conv_prev = known + 0.5 * dt * Kk[0] @ V[k + 1]
    return CumminsSolution(dt * np.arange(nsteps + 1), X, V)


@dataclass
class CrossValidation:
    t: np.ndarray
    X_john: np.ndarray
    X_cummins: np.ndarray
    deviation: float
    relative_deviation: float


def cross_validate(opsys: SystemOperator, U_in: State, T: float, dt: float) -> CrossValidation:
    """Same initial data through the coupled system and through the Cummins equation."""
    U_in = opsys.project(U_in)
    traj = simulate(opsys, U_in, T, dt, stride=max(1, int(round(T / dt))))
    kern = kernel(opsys, T, dt)
    F = exciting_force(opsys, U_in.zeta, U_in.psi, T, dt)
    cs = solve_cummins(opsys.hydro.Mtot, opsys.hydro.C, kern, F, U_in.X, U_in.V, T, dt,
                       opsys.rho, opsys.g, active=tuple(opsys.active))
    dev = float(np.max(np.abs(traj.X - cs.X)))
    scale = float(np.max(np.abs(traj.X)))
    return CrossValidation(traj.t, traj.X, cs.X, dev, dev / scale if scale > 0 else dev)


def surface_reconstruction(opsys: SystemOperator, U_in: State, T: float, dt: float):
    """``max_t ||zeta(t) - zeta^exc(t) - int_0^t zeta^rad(t - s) X'(s) ds||_M``.

    The convolution uses the trapezoidal rule on the shared grid, so the
    residual is ``O(dt^2)``.
    """
    U_in = opsys.project(U_in)
    nsteps = int(round(T / dt))
    traj = simulate(opsys, U_in, T, dt, stride=1)
    rf = radiative_fields(opsys, T, dt)
    ex = exciting_force(opsys, U_in.zeta, U_in.psi, T, dt, keep_field=True)
    V = traj.V @ opsys.P.T
    res = 0.0
    for k in range(nsteps + 1):
        w = np.full(k + 1, dt)
        w[0] = w[-1] = 0.5 * dt
        if k == 0:
            w[:] = 0.0
        conv = np.einsum("m,mnj,mj->n", w, rf.zeta[k::-1], V[:k + 1])
        r = traj.snapshots[k].zeta - ex.zeta[k] - conv
        res = max(res, float(np.sqrt(r @ opsys.op.M @ r)))
    return res
