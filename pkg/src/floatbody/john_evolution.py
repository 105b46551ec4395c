"""Linear wave-body evolution ``d_t U + A U = F`` and its diagnostics.

The state is ``U = (zeta, X, psi, V)``: free-surface elevation and potential
at the free-surface dofs, body displacement ``X = (x, z, theta)`` and its
velocity.  With ``G = M^{-1} S`` the nodal Dirichlet-Neumann operator and
``l(zeta)_j = int zeta d_z K_j`` the equations read

    d_t zeta = G psi + sum_j V_j d_z K_j,      d_t psi = -g zeta,
    d_t X = V,                                 Mtot d_t V = -rho g l(zeta) - C X.

``A`` is skew-adjoint for the energy product

    <U1, U2> = g/2 zeta1.M zeta2 + 1/2 psi1.S psi2 + 1/(2 rho) (X1.C X2 + V1.Mtot V2),

so the implicit midpoint rule conserves ``H(U) = <U, U>`` exactly.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .dn_operator import DnOperator
from .errors import ConfigError, SolverBreakdown
from .hydrodynamics import HydroSet, stability_check

RESTRICTIONS = {"free": (0, 1, 2), "heave": (1,), "heave+pitch": (1, 2),
                "surge": (0,), "pitch": (2,), "none": ()}


@dataclass
class State:
    """``(zeta, X, psi, V)`` with ``zeta, psi`` at the free-surface dofs."""

    zeta: np.ndarray
    X: np.ndarray
    psi: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        self.zeta = np.asarray(self.zeta, dtype=float)
        self.psi = np.asarray(self.psi, dtype=float)
        self.X = np.asarray(self.X, dtype=float).reshape(3)
        self.V = np.asarray(self.V, dtype=float).reshape(3)
        if self.zeta.shape != self.psi.shape:
            raise ValueError("zeta and psi must have the same length")
        for a in (self.zeta, self.X, self.psi, self.V):
            if not np.all(np.isfinite(a)):
                raise ValueError("non-finite state entries")

    @property
    def n(self) -> int:
        return len(self.zeta)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.zeta, self.X, self.psi, self.V])

    @classmethod
    def from_vector(cls, u) -> "State":
        u = np.asarray(u, dtype=float)
        n = (len(u) - 6) // 2
        return cls(u[:n], u[n:n + 3], u[n + 3:2 * n + 3], u[2 * n + 3:])

    @classmethod
    def zeros(cls, n: int) -> "State":
        return cls(np.zeros(n), np.zeros(3), np.zeros(n), np.zeros(3))


class SystemOperator:
    """Discrete evolution operator for one scenario and one mesh.

    Parameters
    ----------
    op : DnOperator
    hydro : HydroSet
    restriction : str or sequence of int
        Active body dofs: ``"free"`` (all three), ``"heave"``, ``"heave+pitch"``,
        or explicit indices.  Inactive components of ``X`` and ``V`` are held at zero.
    allow_disequilibrium : bool
        Skip the stability warning.
    """

    def __init__(self, op: DnOperator, hydro: HydroSet, restriction="free",
                 allow_disequilibrium: bool = False):
        self.op = op
        self.hydro = hydro
        self.rho = float(hydro.spec.rho)
        self.g = float(hydro.spec.g)
        if isinstance(restriction, str):
            if restriction not in RESTRICTIONS:
                raise ConfigError(f"unknown restriction {restriction!r}")
            active = RESTRICTIONS[restriction]
        else:
            active = tuple(int(i) for i in restriction)
        self.restriction = restriction
        self.active = np.array(sorted(active), dtype=int)
        self.P = np.zeros((3, 3))
        self.P[self.active, self.active] = 1.0
        P = self.P
        self.dzK = P @ np.asarray(hydro.dzK)
        self.C = P @ hydro.C @ P
        self.Mtot = P @ hydro.Mtot @ P
        Ma = self.Mtot[np.ix_(self.active, self.active)]
        if len(self.active) and np.linalg.eigvalsh(Ma).min() <= 0:
            raise SolverBreakdown("total mass matrix is not positive definite")
        self.Mtot_inv = np.zeros((3, 3))
        if len(self.active):
            self.Mtot_inv[np.ix_(self.active, self.active)] = np.linalg.inv(Ma)
        if not allow_disequilibrium and len(self.active):
            C2 = hydro.C
            if 1 in self.active and 2 in self.active:
                ok = stability_check(C2).passed
            else:
                ok = all(C2[i, i] > 0 for i in self.active if i != 0)
            if not ok:
                warnings.warn("hydrostatic stability criterion not satisfied", RuntimeWarning,
                              stacklevel=2)
        self._lu = {}
        self._A = None

    @property
    def n(self) -> int:
        return self.op.n

    @property
    def size(self) -> int:
        return 2 * self.n + 6

    def zero_state(self) -> State:
        return State.zeros(self.n)

    def project(self, U: State) -> State:
        """Zero the inactive body components."""
        return State(U.zeta, self.P @ U.X, U.psi, self.P @ U.V)

    # -- products and the operator -----------------------------------------

    def weight_matrix(self) -> np.ndarray:
        """Symmetric matrix ``Q`` with ``<U1, U2> = u1 . Q u2``."""
        n = self.n
        Q = np.zeros((self.size, self.size))
        Q[:n, :n] = 0.5 * self.g * self.op.M
        Q[n:n + 3, n:n + 3] = self.C / (2 * self.rho)
        Q[n + 3:2 * n + 3, n + 3:2 * n + 3] = 0.5 * self.op.G
        Q[2 * n + 3:, 2 * n + 3:] = self.Mtot / (2 * self.rho)
        return Q

    @property
    def matrix(self) -> np.ndarray:
        """Dense ``A`` in the state layout ``[zeta, X, psi, V]``."""
        if self._A is None:
            n = self.n
            G = self.op.matrix
            A = np.zeros((self.size, self.size))
            iz, iX, ip, iV = slice(0, n), slice(n, n + 3), slice(n + 3, 2 * n + 3), slice(2 * n + 3, None)
            A[iz, ip] = -G
            A[iz, iV] = -self.dzK.T
            A[iX, iV] = -self.P
            A[ip, iz] = self.g * np.eye(n)
            A[iV, iz] = self.Mtot_inv @ (self.rho * self.g * self.dzK @ self.op.M)
            A[iV, iX] = self.Mtot_inv @ self.C
            self._A = A
        return self._A

    def lu(self, dt: float):
        key = float(dt)
        if key not in self._lu:
            I = np.eye(self.size)
            try:
                lu = sla.lu_factor(I + 0.5 * dt * self.matrix, check_finite=True)
            except (ValueError, np.linalg.LinAlgError) as exc:
                raise SolverBreakdown(f"midpoint matrix factorization failed: {exc}") from exc
            if np.any(np.abs(np.diag(lu[0])) < 1e-14):
                raise SolverBreakdown("singular midpoint matrix")
            self._lu[key] = lu
        return self._lu[key]

    def external_force(self, F_ext) -> np.ndarray:
        """State-space forcing for a body force/torque ``F_ext`` (V block ``Mtot^{-1} F_ext``)."""
        f = np.zeros(self.size)
        f[2 * self.n + 3:] = self.Mtot_inv @ np.asarray(F_ext, dtype=float)
        return f


def _vec(U):
    return U.to_vector() if isinstance(U, State) else np.asarray(U, dtype=float)


def x_inner(opsys: SystemOperator, U1, U2) -> float:
    """Energy semi-scalar product; ``x_inner(U, U)`` is the Hamiltonian."""
    u1, u2 = State.from_vector(_vec(U1)), State.from_vector(_vec(U2))
    op = opsys.op
    return float(0.5 * opsys.g * u1.zeta @ (op.M @ u2.zeta)
                 + 0.5 * u1.psi @ (op.G @ u2.psi)
                 + (u1.X @ (opsys.C @ u2.X) + u1.V @ (opsys.Mtot @ u2.V)) / (2 * opsys.rho))


def hamiltonian(opsys: SystemOperator, U) -> float:
    return x_inner(opsys, U, U)


def apply_A(opsys: SystemOperator, U):
    """``A U``; returns a :class:`State` if given one."""
    out = opsys.matrix @ _vec(U)
    return State.from_vector(out) if isinstance(U, State) else out


def _random_state(opsys, rng):
    u = rng.standard_normal(opsys.size)
    return opsys.project(State.from_vector(u)).to_vector()


def skewness_residual(opsys: SystemOperator, trials: int = 100, seed: int | None = 0) -> float:
    """``max |<A U1, U2> + <U1, A U2>| / (|U1| |U2|)`` over random pairs."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    Q = opsys.weight_matrix()
    A = opsys.matrix
    worst = 0.0
    for _ in range(trials):
        u1, u2 = _random_state(opsys, rng), _random_state(opsys, rng)
        r = abs((A @ u1) @ Q @ u2 + u1 @ Q @ (A @ u2))
        nrm = np.sqrt((u1 @ Q @ u1) * (u2 @ Q @ u2))
        worst = max(worst, r / nrm)
    return float(worst)


def _forcing_at(F, t, size):
    if F is None:
        return None
    f = F(t) if callable(F) else F
    f = _vec(f)
    if f.shape != (size,):
        raise ValueError(f"forcing has shape {f.shape}, expected {(size,)}")
    return f


def step_midpoint(opsys: SystemOperator, U, dt: float, F=None, t: float = 0.0):
    """One implicit midpoint step ``(I + dt/2 A) U' = (I - dt/2 A) U + dt F(t + dt/2)``.

    Raises
    ------
    SolverBreakdown
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    u = _vec(U)
    rhs = u - 0.5 * dt * (opsys.matrix @ u)
    f = _forcing_at(F, t + 0.5 * dt, opsys.size)
    if f is not None:
        rhs = rhs + dt * f
    out = sla.lu_solve(opsys.lu(dt), rhs)
    if not np.all(np.isfinite(out)):
        raise SolverBreakdown("non-finite state after midpoint step")
    return State.from_vector(out) if isinstance(U, State) else out


def step_rk4(opsys: SystemOperator, U, dt: float, F=None, t: float = 0.0):
    """Classical explicit RK4 step (for cross-checks; does not conserve energy exactly)."""
    A = opsys.matrix
    size = opsys.size

    def rhs(tt, u):
        f = _forcing_at(F, tt, size)
        out = -(A @ u)
        return out if f is None else out + f
    u = _vec(U)
    k1 = rhs(t, u)
    k2 = rhs(t + dt / 2, u + dt / 2 * k1)
    k3 = rhs(t + dt / 2, u + dt / 2 * k2)
    k4 = rhs(t + dt, u + dt * k3)
    out = u + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return State.from_vector(out) if isinstance(U, State) else out


def canonical_momentum(opsys: SystemOperator, U) -> np.ndarray:
    """Canonical momentum ``W = Mtot V - rho int psi d_z K``, which satisfies ``dW/dt = -C X``."""
    u = State.from_vector(_vec(U))
    return opsys.Mtot @ u.V - opsys.rho * opsys.dzK @ (opsys.op.M @ u.psi)


def regularity_series(opsys: SystemOperator, zeta, psi, n: int) -> float:
    """``sum_{j=1..n} ||G^{j/2} zeta|| + ||G^{(j+1)/2} psi||`` in the ``M`` norm."""
    if n < 1:
        raise ValueError("n must be >= 1")
    op = opsys.op
    lam = op.clean_eigvals
    cz = op.coefficients(zeta) ** 2
    cp = op.coefficients(psi) ** 2
    return float(sum(np.sqrt((lam ** j * cz).sum()) + np.sqrt((lam ** (j + 1) * cp).sum())
                     for j in range(1, n + 1)))


@dataclass
class Trajectory:
    """Time series of a simulation.

    ``X``, ``V``, ``energy`` and ``W`` are recorded at every step; full states
    only every ``stride`` steps (``snapshot_times``).
    """

    t: np.ndarray
    X: np.ndarray
    V: np.ndarray
    energy: np.ndarray
    W: np.ndarray
    snapshot_times: np.ndarray
    snapshots: list
    diagnostics: np.ndarray | None = None
    dt: float = np.nan
    meta: dict = field(default_factory=dict)

    def relative_energy_drift(self) -> float:
        e0 = self.energy[0]
        return float(np.max(np.abs(self.energy - e0)) / e0) if e0 > 0 else float(np.max(np.abs(self.energy)))

    def to_csv(self, path):
        cols = [self.t[:, None], self.X, self.V, self.energy[:, None]]
        header = "t,x,z,theta,vx,vz,vtheta,energy"
        if self.diagnostics is not None:
            cols.append(self.diagnostics[:, None])
            header += ",regularity"
        np.savetxt(path, np.hstack(cols), delimiter=",", header=header, comments="", fmt="%.12g")


def simulate(opsys: SystemOperator, U_in, T: float, dt: float, F=None, method: str = "midpoint",
             stride: int = 1, diagnostics: int | None = None) -> Trajectory:
    """Integrate ``d_t U + A U = F`` from ``U_in`` over ``[0, T]``.

    Parameters
    ----------
    F : callable or array, optional
        Forcing in the state layout, ``F(t)``.
    method : {"midpoint", "rk4"}
    stride : int
        Keep every ``stride``-th full state.
    diagnostics : int, optional
        Record :func:`regularity_series` of order ``diagnostics`` at every step.
    """
    if T <= 0 or dt <= 0:
        raise ValueError("T and dt must be positive")
    stepper = {"midpoint": step_midpoint, "rk4": step_rk4}.get(method)
    if stepper is None:
        raise ConfigError(f"unknown method {method!r}")
    nsteps = int(round(T / dt))
    u = opsys.project(State.from_vector(_vec(U_in))).to_vector()
    n = opsys.n
    Q = opsys.weight_matrix()
    ts = dt * np.arange(nsteps + 1)
    Xs = np.empty((nsteps + 1, 3))
    Vs = np.empty((nsteps + 1, 3))
    Es = np.empty(nsteps + 1)
    Ws = np.empty((nsteps + 1, 3))
    Ds = np.empty(nsteps + 1) if diagnostics else None
    snaps, snap_t = [], []

    def record(k, u):
        Xs[k] = u[n:n + 3]
        Vs[k] = u[2 * n + 3:]
        Es[k] = u @ Q @ u
        Ws[k] = canonical_momentum(opsys, u)
        if Ds is not None:
            Ds[k] = regularity_series(opsys, u[:n], u[n + 3:2 * n + 3], diagnostics)
        if k % stride == 0:
            snaps.append(State.from_vector(u.copy()))
            snap_t.append(ts[k])
    record(0, u)
    for k in range(nsteps):
        u = stepper(opsys, u, dt, F, ts[k])
        record(k + 1, u)
    return Trajectory(ts, Xs, Vs, Es, Ws, np.array(snap_t), snaps, Ds, dt,
                      {"method": method, "restriction": opsys.restriction})


def check_canonical(opsys: SystemOperator, traj: Trajectory) -> float:
    """``max |dW/dt + C X|`` with centred differences at interior times."""
    dW = (traj.W[2:] - traj.W[:-2]) / (2 * traj.dt)
    res = dW + traj.X[1:-1] @ opsys.C.T
    return float(np.max(np.abs(res)))


def regularity_diagnostics(opsys: SystemOperator, traj: Trajectory, n: int) -> np.ndarray:
    """:func:`regularity_series` at the snapshot times of ``traj``."""
    return np.array([regularity_series(opsys, s.zeta, s.psi, n) for s in traj.snapshots])
