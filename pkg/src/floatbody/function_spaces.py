"""Homogeneous semi-norms on the free surface, corner compatibility and extensions.

Functions on the free surface are sampled on its two connected components
``E_- = (x_L, x_l)`` and ``E_+ = (x_r, x_R)``.  Compatibility at a contact
point means vanishing odd derivatives there; the defect is captured by
the finite-dimensional span of the cut-off powers ``chi_[2l+1](x - x_c)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .errors import InsufficientResolution, NonzeroMeanFlux, UnsupportedOrder


# ---------------------------------------------------------------------------
# Samples
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoundaryFunction:
    """Samples ``values`` at increasing nodes ``x`` covering the interval ``[a, b]``."""

    x: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if x.shape != v.shape or x.ndim != 1 or len(x) < 2:
            raise ValueError("need at least two samples with matching shapes")
        if not np.all(np.diff(x) > 0):
            raise ValueError("nodes must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite samples")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", v)

    @property
    def a(self) -> float:
        return float(self.x[0])

    @property
    def b(self) -> float:
        return float(self.x[-1])

    @property
    def length(self) -> float:
        return self.b - self.a

    def mean(self) -> float:
        return float(np.trapezoid(self.values, self.x) / self.length)

    def with_values(self, v) -> "BoundaryFunction":
        return BoundaryFunction(self.x, v)

    @classmethod
    def from_callable(cls, f, a: float, b: float, n: int = 401) -> "BoundaryFunction":
        x = np.linspace(a, b, n)
        return cls(x, f(x))


@dataclass(frozen=True, eq=False)
class GammaDFunction:
    """A function on the two free-surface components (``minus`` left, ``plus`` right)."""

    minus: BoundaryFunction
    plus: BoundaryFunction

    @property
    def means(self):
        return self.minus.mean(), self.plus.mean()

    @property
    def corners(self):
        """``(name, x_c, component, sigma)`` for the four contact points."""
        return [("x_L", self.minus.a, "minus", +1), ("x_l", self.minus.b, "minus", -1),
                ("x_r", self.plus.a, "plus", +1), ("x_R", self.plus.b, "plus", -1)]

    def component(self, which: str) -> BoundaryFunction:
        return self.minus if which == "minus" else self.plus

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.minus.values, self.plus.values])

    def with_values(self, v) -> "GammaDFunction":
        n = len(self.minus.x)
        return GammaDFunction(self.minus.with_values(v[:n]), self.plus.with_values(v[n:]))

    def __add__(self, other):
        return self.with_values(self.to_vector() + other.to_vector())

    def __sub__(self, other):
        return self.with_values(self.to_vector() - other.to_vector())

    @classmethod
    def from_dofs(cls, x, values, x_l: float, x_r: float) -> "GammaDFunction":
        """Split free-surface dof values (sorted by ``x``) into the two components."""
        x = np.asarray(x, dtype=float)
        values = np.asarray(values, dtype=float)
        left = x <= x_l
        right = x >= x_r
        return cls(BoundaryFunction(x[left], values[left]), BoundaryFunction(x[right], values[right]))

    @classmethod
    def from_callable(cls, f, x_L, x_l, x_r, x_R, n: int = 401) -> "GammaDFunction":
        return cls(BoundaryFunction.from_callable(f, x_L, x_l, n),
                   BoundaryFunction.from_callable(f, x_r, x_R, n))


# ---------------------------------------------------------------------------
# Semi-norms
# ---------------------------------------------------------------------------


def _trap_weights(x):
    w = np.zeros_like(x)
    dx = np.diff(x)
    w[:-1] += dx / 2
    w[1:] += dx / 2
    return w


def _gagliardo(x, f, r):
    """Double-integral semi-norm of order ``0 < r < 1`` (diagonal excluded)."""
    w = _trap_weights(x)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    df = f[:, None] - f[None, :]
    kern = df ** 2 / np.abs(dx) ** (2 * r + 1)
    np.fill_diagonal(kern, 0.0)
    val = w @ kern @ w
    # contribution of the excluded diagonal cells, from the local slope
    fp = np.gradient(f, x, edge_order=2)
    val += np.sum(w * fp ** 2 * 2 * (w / 2) ** (2 - 2 * r) / (2 - 2 * r))
    return float(np.sqrt(max(val, 0.0)))


def _seminorm(x, f, r, top):
    if r < 0:
        raise UnsupportedOrder(f"order must be >= 0, got {r}")
    if r == 0:
        g = f - np.trapezoid(f, x) / (x[-1] - x[0]) if top else f
        return float(np.sqrt(np.trapezoid(g ** 2, x)))
    if r < 1:
        return _gagliardo(x, f, r)
    return _seminorm(x, np.gradient(f, x, edge_order=2), r - 1, False)


def seminorm_interval(f: BoundaryFunction, r: float) -> float:
    """Homogeneous semi-norm ``|f|_{H^r(I)}``.

    ``0 < r < 1`` uses the Gagliardo double integral on the sample grid;
    ``r >= 1`` is reduced to ``|f'|_{H^{r-1}}`` with finite-difference
    derivatives (the final integer step being an ``L^2`` norm).  ``r = 0`` is
    the ``L^2`` norm of ``f`` minus its mean.

    Raises
    ------
    UnsupportedOrder
        If ``r < 0``.
    """
    return _seminorm(f.x, f.values, float(r), True)


def seminorm_gammaD(f: GammaDFunction, s: float) -> float:
    """``|f_-|_{H^{s+1/2}} + |f_+|_{H^{s+1/2}} + |mean(f_+) - mean(f_-)|``."""
    if s < 0:
        raise UnsupportedOrder(f"s must be >= 0, got {s}")
    m_minus, m_plus = f.means
    return (seminorm_interval(f.minus, s + 0.5) + seminorm_interval(f.plus, s + 0.5)
            + abs(m_plus - m_minus))


# ---------------------------------------------------------------------------
# Cut-off functions
# ---------------------------------------------------------------------------


def _smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1 - t, 1.0)), 0.0)
    return a / (a + b)


def chi0(x, support: float):
    """Even plateau bump: 1 on ``|x| <= L/4``, smooth decay to 0 at ``|x| = L/2``."""
    L = float(support)
    ax = np.abs(np.asarray(x, dtype=float))
    return _smooth_step((L / 2 - ax) / (L / 4))


def chi_bump(l: int, support: float, x):
    """``chi_[2l+1](x) = |x|^{2l+1} chi0(x) / (2l+1)!``."""
    x = np.asarray(x, dtype=float)
    k = 2 * l + 1
    return np.abs(x) ** k * chi0(x, support) / factorial(k)


# ---------------------------------------------------------------------------
# Corner derivatives and compatibility
# ---------------------------------------------------------------------------


def _fd_weights(nodes, x0, k):
    """Weights of the derivative of order ``k`` at ``x0`` exact for polynomials of degree < len(nodes)."""
    n = len(nodes)
    t = (np.asarray(nodes) - x0)
    scale = np.max(np.abs(t))
    t = t / scale
    V = np.vander(t, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[k] = factorial(k)
    return np.linalg.solve(V, rhs) / scale ** k


def _n_stencil(max_order):
    # order 1 alone: 3 points (second order); otherwise exact up to degree max_order + 1
    return 3 if max_order <= 1 else max_order + 2


def corner_derivative(f: BoundaryFunction, end: str, k: int, n_points: int | None = None,
                      max_span: float | None = None) -> float:
    """One-sided estimate of ``d^k f`` at an end of the interval.

    Raises
    ------
    InsufficientResolution
        If there are too few samples or the stencil spans more than ``max_span``.
    """
    n = n_points or _n_stencil(k)
    if len(f.x) < n:
        raise InsufficientResolution(f"{len(f.x)} samples, stencil needs {n}")
    if end == "left":
        nodes, vals, x0 = f.x[:n], f.values[:n], f.a
    else:
        nodes, vals, x0 = f.x[-n:], f.values[-n:], f.b
    if max_span is not None and np.max(np.abs(nodes - x0)) > max_span:
        raise InsufficientResolution(
            f"stencil spans {np.max(np.abs(nodes - x0)):.3g} > {max_span:.3g}; refine the sampling")
    return float(_fd_weights(nodes, x0, k) @ vals)


def _orders(s):
    return [2 * l + 1 for l in range(int(np.floor((s - 1) / 2)) + 1)] if s >= 1 else []


def _is_odd_integer(s):
    return float(s).is_integer() and int(s) % 2 == 1


@dataclass
class CornerEntry:
    order: int
    alpha: float


@dataclass
class CompatibilityReport:
    """Per-corner odd-derivative traces and weighted-integrability trends."""

    s: float
    corners: dict = field(default_factory=dict)
    weighted: dict = field(default_factory=dict)
    weighted_minus_alpha: dict = field(default_factory=dict)
    cc: bool = True
    tr: bool = True

    def to_json(self) -> str:
        def conv(o):
            if isinstance(o, CornerEntry):
                return {"order": o.order, "alpha": o.alpha}
            if isinstance(o, np.ndarray):
                return o.tolist()
            if isinstance(o, (np.floating, np.bool_)):
                return o.item()
            raise TypeError(type(o))
        return json.dumps({"s": self.s, "corners": self.corners, "weighted": self.weighted,
                           "weighted_minus_alpha": self.weighted_minus_alpha,
                           "cc": self.cc, "tr": self.tr}, default=conv, indent=2)


def _weighted_trend(f: BoundaryFunction, end: str, s: int, alpha: float, radius: float):
    """``int |x - x_c|^{-1} |d^s f - alpha|^2`` over a corner window at 3 sample densities."""
    vals = []
    for step in (4, 2, 1):
        x = f.x[::step]
        v = f.values[::step]
        if len(x) < 5:
            raise InsufficientResolution("too few samples for the weighted indicator")
        d = v
        for _ in range(s):
            d = np.gradient(d, x, edge_order=2)
        xc = f.a if end == "left" else f.b
        dist = np.abs(x - xc)
        sel = (dist > 0) & (dist <= radius)
        g = (d[sel] - alpha) ** 2 / dist[sel]
        vals.append(abs(float(np.trapezoid(g, x[sel]))))
    inc1, inc2 = vals[1] - vals[0], vals[2] - vals[1]
    finite = bool(abs(inc2) <= 0.75 * abs(inc1) + 1e-3 * max(vals[-1], 1e-300) or abs(inc2) < 1e-12)
    return {"values": vals, "finite": finite}


def compatibility_check(f: GammaDFunction, s: float, atol: float = 1e-6,
                        support: float | None = None) -> CompatibilityReport:
    """Odd corner derivatives up to order ``s`` and, for odd integer ``s``, the weighted indicator.

    ``alpha`` values are one-sided finite-difference estimates; a derivative
    counts as zero when ``|alpha| <= atol * max(1, scale)``, where ``scale``
    is the sup of ``|f|``.

    Raises
    ------
    InsufficientResolution
    """
    rep = CompatibilityReport(s=float(s))
    orders = _orders(s)
    L = support or min(f.minus.length, f.plus.length)
    scale = max(1.0, float(np.max(np.abs(f.to_vector()))))
    n = _n_stencil(max(orders) if orders else 1)
    for name, xc, comp, sigma in f.corners:
        bf = f.component(comp)
        end = "left" if sigma > 0 else "right"
        entries = [CornerEntry(k, corner_derivative(bf, end, k, n)) for k in orders]
        rep.corners[name] = entries
        for e in entries:
            if e.order < s and abs(e.alpha) > atol * scale:
                rep.cc = False
        if _is_odd_integer(s):
            k = int(s)
            alpha = next(e.alpha for e in entries if e.order == k)
            w0 = _weighted_trend(bf, end, k, 0.0, L / 4)
            w1 = _weighted_trend(bf, end, k, alpha, L / 4)
            rep.weighted[name] = w0
            rep.weighted_minus_alpha[name] = w1
            if not w0["finite"]:
                rep.cc = False
            if not w1["finite"]:
                rep.tr = False
    if not _is_odd_integer(s):
        rep.tr = True  # traces are well defined below the borderline orders
    return rep


def decompose_cc(f: GammaDFunction, s: float, support: float | None = None):
    """Split ``f = f_cc + T f`` with ``T f`` in the span of the corner cut-off powers.

    Returns
    -------
    f_cc : GammaDFunction
    coefficients : dict
        ``{(corner, order): sigma(c) * d^order f(x_c)}``.
    """
    L = support or min(f.minus.length, f.plus.length)
    orders = _orders(s)
    coeffs = {}
    out = {"minus": f.minus.values.copy(), "plus": f.plus.values.copy()}
    if not orders:
        return f.with_values(f.to_vector()), coeffs
    n = _n_stencil(max(orders))
    Tf = {"minus": np.zeros_like(out["minus"]), "plus": np.zeros_like(out["plus"])}
    for name, xc, comp, sigma in f.corners:
        bf = f.component(comp)
        end = "left" if sigma > 0 else "right"
        for k in orders:
            alpha = corner_derivative(bf, end, k, n, max_span=L / 4)
            c = sigma * alpha
            coeffs[(name, k)] = c
            Tf[comp] += c * chi_bump((k - 1) // 2, L, bf.x - xc)
    fcc = GammaDFunction(f.minus.with_values(out["minus"] - Tf["minus"]),
                         f.plus.with_values(out["plus"] - Tf["plus"]))
    return fcc, coeffs


def corner_projection(f: GammaDFunction, s: float, support: float | None = None) -> GammaDFunction:
    """``T f`` itself (the part removed by :func:`decompose_cc`)."""
    fcc, _ = decompose_cc(f, s, support)
    return f - fcc


# ---------------------------------------------------------------------------
# Extensions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PeriodicSamples:
    """Uniform samples ``values[k] = f(x0 + k P / N)`` of a ``P``-periodic function."""

    x0: float
    period: float
    values: np.ndarray

    @property
    def x(self) -> np.ndarray:
        n = len(self.values)
        return self.x0 + self.period * np.arange(n) / n


def boussinesq_extend(f: BoundaryFunction, end: str = "left") -> PeriodicSamples:
    """Even reflection about one end, periodized with period ``2 |I|``.

    Non-uniform samples are first interpolated linearly onto a uniform grid
    with the same number of intervals.
    """
    n = len(f.x) - 1
    xu = np.linspace(f.a, f.b, n + 1)
    v = f.values if np.allclose(np.diff(f.x), f.length / n) else np.interp(xu, f.x, f.values)
    L = f.length
    if end == "left":
        # values at a + k h for k = -n .. n-1
        ext = np.concatenate([v[:0:-1], v[:-1]])
        return PeriodicSamples(f.a - L, 2 * L, ext)
    # reflect about b: values at b + k h for k = -n .. n-1, f^B(b + t) = f(b - t)
    ext = np.concatenate([v[:-1], v[:0:-1]])
    return PeriodicSamples(f.a, 2 * L, ext)


@dataclass(eq=False)
class PoissonField:
    """Harmonic function on a periodic strip, given by Fourier modes and a vertical multiplier."""

    fb: PeriodicSamples
    depth: float
    kind: str

    def __post_init__(self):
        n = len(self.fb.values)
        self._c = np.fft.rfft(self.fb.values) / n
        self._k = 2 * np.pi * np.arange(len(self._c)) / self.fb.period
        self._n = n

    def _mult(self, z, deriv=0):
        k = self._k[None, :]
        z = np.asarray(z, dtype=float)[:, None]
        H = self.depth
        if self.kind == "dirichlet":
            return k ** deriv * np.exp(k * z)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if deriv == 0:
                m = np.where(k > 0, (np.exp(k * z) - np.exp(-k * (z + 2 * H))) /
                             (k * (1 + np.exp(-2 * k * H))), 0.0)
            else:
                m = np.where(k > 0, (np.exp(k * z) + np.exp(-k * (z + 2 * H))) /
                             (1 + np.exp(-2 * k * H)), 0.0)
        return m

    def _eval(self, x, z, dz=0, dx=0):
        x = np.asarray(x, dtype=float)
        z = np.broadcast_to(np.asarray(z, dtype=float), x.shape)
        shp = x.shape
        xf, zf = x.ravel(), z.ravel()
        m = self._mult(zf, dz)
        phase = np.exp(1j * self._k[None, :] * (xf[:, None] - self.fb.x0))
        w = np.full(len(self._c), 2.0)
        w[0] = 1.0
        if self._n % 2 == 0:
            w[-1] = 1.0
        terms = (1j * self._k[None, :]) ** dx * m * phase * (w * self._c)[None, :]
        out = terms.sum(axis=1).real
        return out.reshape(shp)

    def __call__(self, x, z):
        return self._eval(x, z)

    def dz(self, x, z):
        return self._eval(x, z, dz=1)

    def dx(self, x, z):
        return self._eval(x, z, dx=1)


def poisson_extend_dirichlet(fb: PeriodicSamples, depth: float) -> PoissonField:
    """Harmonic extension ``sum c_n e^{|k_n| z} e^{i k_n x}`` of periodic boundary values."""
    if depth <= 0:
        raise ValueError("depth must be positive")
    return PoissonField(fb, depth, "dirichlet")


def poisson_extend_neumann(fb: PeriodicSamples, depth: float, rtol: float = 1e-10) -> PoissonField:
    """Harmonic field with ``d_z = fb`` at ``z = 0`` from the multiplier ``sinh((z + H)|k|) / (cosh(H|k|) |k|)``.

    The multiplier vanishes at ``z = -depth``, so the field itself (not its
    vertical derivative) is zero on the bottom line; at ``z = 0`` it equals
    ``tanh(H|k|)/|k|`` times the mode.  The zero mode must vanish.

    Raises
    ------
    NonzeroMeanFlux
    """
    if depth <= 0:
        raise ValueError("depth must be positive")
    m = float(np.mean(fb.values))
    if abs(m) > rtol * max(1.0, float(np.max(np.abs(fb.values)))):
        raise NonzeroMeanFlux(f"mean of Neumann data is {m:.3e}")
    return PoissonField(fb, depth, "neumann")
