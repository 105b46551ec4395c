"""Scenario-driven command line front end.

Subcommands ``validate | simulate | kernel | singular | crossval | plot``.
Exit codes: 0 success, 2 physics validation failure, 64 configuration
error, 70 solver failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dn_operator import assemble_G0
from .elliptic import assemble
from .errors import (
    ConfigError,
    FloatBodyError,
    GeometryError,
    MeshGenerationFailure,
    NotRightAngle,
    SingularElement,
    SolverBreakdown,
)
from .geometry import DomainSpec, build_mesh, validate_domain
from .hydrodynamics import compute_hydro, stability_check

log = logging.getLogger("floatbody")

EXIT_OK, EXIT_PHYSICS, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 64, 70
_RESTRICTION_ALIASES = {"free": "free", "heave": "heave", "heave-only": "heave",
                        "heave+pitch": "heave+pitch"}

# names available to initial-condition expressions
_EXPR_NAMES = {k: getattr(np, k) for k in (
    "sin", "cos", "tan", "exp", "log", "sqrt", "abs", "tanh", "cosh", "sinh", "arctan",
    "where", "pi", "minimum", "maximum", "clip", "heaviside")}


class PhysicsFailure(FloatBodyError):
    """A validation step failed (exit code 2)."""


@dataclass
class ScenarioConfig:
    """Parsed scenario file (see ``scenarios/*.json`` for examples)."""

    spec: DomainSpec
    mesh: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)
    initial: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    singular: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def h(self) -> float:
        return float(self.mesh.get("h", 0.1))

    @property
    def restriction(self) -> str:
        r = self.run.get("restriction", "free")
        if r not in _RESTRICTION_ALIASES:
            raise ConfigError(f"unknown restriction {r!r}")
        return _RESTRICTION_ALIASES[r]

    @classmethod
    def from_dict(cls, cfg: dict, base: Path | None = None) -> "ScenarioConfig":
        if not isinstance(cfg, dict) or "domain" not in cfg:
            raise ConfigError("scenario must be a JSON object with a 'domain' block")
        try:
            spec = DomainSpec.from_dict(cfg)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid domain/physics block: {exc}") from exc
        init = dict(cfg.get("initial", {}))
        for key in ("zeta", "psi"):
            v = init.get(key)
            if isinstance(v, dict) and "file" in v:
                p = Path(v["file"])
                if base is not None and not p.is_absolute():
                    p = base / p
                if not p.exists():
                    raise ConfigError(f"initial data file {p} does not exist")
                init[key] = {"samples": np.loadtxt(p, delimiter=",", ndmin=2).tolist()}
        return cls(spec, dict(cfg.get("mesh", {})), dict(cfg.get("run", {})), init,
                   dict(cfg.get("outputs", {})), dict(cfg.get("singular", {})), cfg)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        path = Path(path)
        try:
            cfg = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file {path} not found") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
        return cls.from_dict(cfg, path.parent)


def evaluate_profile(value, x) -> np.ndarray:
    """Initial-condition values at ``x`` from a number, an expression in ``x`` or samples."""
    x = np.asarray(x, dtype=float)
    if value is None:
        return np.zeros_like(x)
    if isinstance(value, (int, float)):
        return np.full_like(x, float(value))
    if isinstance(value, str):
        try:
            out = eval(value, {"__builtins__": {}}, {**_EXPR_NAMES, "x": x})  # noqa: S307
        except Exception as exc:  # expression errors are configuration errors
            raise ConfigError(f"cannot evaluate expression {value!r}: {exc}") from exc
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape).copy()
    if isinstance(value, dict) and "samples" in value:
        s = np.asarray(value["samples"], dtype=float)
        if s.ndim != 2 or s.shape[1] != 2:
            raise ConfigError("samples must be a list of [x, value] pairs")
        return np.interp(x, s[:, 0], s[:, 1])
    if isinstance(value, dict) and "expression" in value:
        return evaluate_profile(value["expression"], x)
    raise ConfigError(f"unsupported initial-condition entry {value!r}")


# ---------------------------------------------------------------------------
# Shared setup
# ---------------------------------------------------------------------------


@dataclass
class Setup:
    cfg: ScenarioConfig
    sys: object
    op: object
    hydro: object


def _setup(cfg: ScenarioConfig, h: float | None = None) -> Setup:
    h = h or cfg.h
    mesh = build_mesh(cfg.spec, h, q=float(cfg.mesh.get("q", 0.5)), layers=int(cfg.mesh.get("layers", 6)),
                      symmetric=bool(cfg.mesh.get("symmetric", False)))
    sys_ = assemble(mesh)
    op = assemble_G0(sys_)
    return Setup(cfg, sys_, op, compute_hydro(cfg.spec, sys_))


def _check_equilibrium(cfg: ScenarioConfig, allow: bool):
    rep = validate_domain(cfg.spec)
    if not rep.ok:
        failed = [c.name for c in rep.checks if not c.passed]
        eq_only = set(failed) <= {"archimedes_mass", "archimedes_center"}
        if not (allow and eq_only):
            raise PhysicsFailure(f"domain validation failed: {', '.join(failed)}")
    return rep


def _opsys(st: Setup, restriction: str, allow: bool):
    from .john_evolution import SystemOperator
    if restriction == "heave+pitch" and abs(st.cfg.spec.z_G) > 1e-12:
        warnings.warn("heave+pitch restriction assumes z_G = 0", RuntimeWarning, stacklevel=2)
    return SystemOperator(st.op, st.hydro, restriction, allow_disequilibrium=allow)


def _initial_state(st: Setup, opsys):
    from .john_evolution import State
    init = st.cfg.initial
    x = st.op.x
    return opsys.project(State(evaluate_profile(init.get("zeta"), x), init.get("X", [0, 0, 0]),
                               evaluate_profile(init.get("psi"), x), init.get("V", [0, 0, 0])))


def _outdir(args, cfg: ScenarioConfig) -> Path:
    out = Path(args.output or cfg.outputs.get("dir", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_params(args, cfg):
    T = args.t_end if args.t_end is not None else float(cfg.run.get("T", 10.0))
    dt = args.dt if args.dt is not None else float(cfg.run.get("dt", 0.01))
    if T <= 0 or dt <= 0:
        raise ConfigError("T and dt must be positive")
    return T, dt


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, default=_plain))


def _plain(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(type(o))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_validate(args, cfg: ScenarioConfig) -> int:
    from .john_evolution import SystemOperator, skewness_residual
    rep = validate_domain(cfg.spec)
    out = {"domain": rep.to_dict(), "ok": rep.ok}
    code = EXIT_OK
    if not rep.ok:
        failed = [c.name for c in rep.checks if not c.passed]
        out["failed"] = failed
        eq_only = set(failed) <= {"archimedes_mass", "archimedes_center"}
        if not (args.allow_disequilibrium and eq_only):
            code = EXIT_PHYSICS
    st = stability_check(compute_hydro_C(cfg), cfg.spec)
    out["stability"] = {"criterion": st.criterion, "passed": st.passed, "z_MG": st.z_MG,
                        "z_G": cfg.spec.z_G}
    if not st.passed:
        print("stability criterion failed", file=sys.stderr)
        code = EXIT_PHYSICS
    if code == EXIT_OK:
        s = _setup(cfg, args.mesh_h)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            opsys = SystemOperator(s.op, s.hydro, cfg.restriction, allow_disequilibrium=True)
        out["skewness_residual"] = skewness_residual(opsys, 100, seed=args.seed)
        out["mesh"] = {"h": s.sys.mesh.h, "vertices": s.sys.mesh.n_vertices,
                       "free_surface_dofs": s.op.n,
                       "min_angle_deg": float(np.degrees(s.sys.mesh.min_angle()))}
        out["hydro"] = s.hydro.summary(s.op)
    _write_json(_outdir(args, cfg) / "validate.json", out)
    print(f"validation {'passed' if code == EXIT_OK else 'failed'}")
    return code


def compute_hydro_C(cfg: ScenarioConfig):
    from .hydrodynamics import hydrostatic_matrix
    return hydrostatic_matrix(cfg.spec)


def _force_sampler(path, opsys):
    data = np.loadtxt(path, delimiter=",", ndmin=2, skiprows=1)
    if data.shape[1] != 4:
        raise ConfigError("force file needs columns t,F1,F2,F3")
    t = data[:, 0]

    def F(tt):
        return opsys.external_force([np.interp(tt, t, data[:, k]) for k in (1, 2, 3)])
    return F


def cmd_simulate(args, cfg: ScenarioConfig) -> int:
    from .john_evolution import simulate
    _check_equilibrium(cfg, args.allow_disequilibrium)
    T, dt = _run_params(args, cfg)
    st = _setup(cfg, args.mesh_h)
    opsys = _opsys(st, args.restriction or cfg.restriction, args.allow_disequilibrium)
    U0 = _initial_state(st, opsys)
    F = _force_sampler(args.force, opsys) if args.force else None
    stride = int(cfg.outputs.get("stride", max(1, int(round(T / dt)) // 100)))
    diag = int(cfg.run.get("diagnostics", 2))
    traj = simulate(opsys, U0, T, dt, F=F, method=cfg.run.get("integrator", "midpoint"),
                    stride=stride, diagnostics=diag)
    out = _outdir(args, cfg)
    traj.to_csv(out / "trajectory.csv")
    x = st.op.x
    np.savetxt(out / "zeta_snapshots.csv", np.column_stack([x] + [s.zeta for s in traj.snapshots]),
               delimiter=",", header="x," + ",".join(f"t={t:.6g}" for t in traj.snapshot_times),
               comments="", fmt="%.12g")
    np.savetxt(out / "psi_snapshots.csv", np.column_stack([x] + [s.psi for s in traj.snapshots]),
               delimiter=",", header="x," + ",".join(f"t={t:.6g}" for t in traj.snapshot_times),
               comments="", fmt="%.12g")
    _write_json(out / "simulate.json", {"energy_drift": traj.relative_energy_drift(),
                                        "steps": len(traj.t) - 1, "dt": dt, "T": T,
                                        "restriction": opsys.restriction})
    print(f"simulated {len(traj.t) - 1} steps, relative energy drift {traj.relative_energy_drift():.3e}")
    return EXIT_OK


def cmd_kernel(args, cfg: ScenarioConfig) -> int:
    from .cummins import exciting_force, kernel
    _check_equilibrium(cfg, args.allow_disequilibrium)
    T, dt = _run_params(args, cfg)
    st = _setup(cfg, args.mesh_h)
    opsys = _opsys(st, args.restriction or cfg.restriction, args.allow_disequilibrium)
    U0 = _initial_state(st, opsys)
    kern = kernel(opsys, T, dt)
    F = exciting_force(opsys, U0.zeta, U0.psi, T, dt)
    out = _outdir(args, cfg)
    kern.to_csv(out / "kernel.csv")
    F.to_csv(out / "exciting_force.csv")
    rep = kern.positivity(tuple(opsys.active))
    _write_json(out / "kernel_report.json", {
        "K0_symmetry": rep.symmetric_K0, "K0_min_eig": rep.min_eig_K0,
        "K0_psd": bool(rep.min_eig_K0 >= -1e-10 * np.trace(kern.K[0])), "t0": rep.t0,
        "max_asymmetry": rep.max_asymmetry})
    print(f"kernel: K(0) min eigenvalue {rep.min_eig_K0:.4e}, positive up to t0 = {rep.t0:.4g}")
    return EXIT_OK


def cmd_singular(args, cfg: ScenarioConfig) -> int:
    from .function_spaces import GammaDFunction, chi_bump, compatibility_check
    from .singular_analysis import verify_decomposition
    sc = cfg.singular
    spec = cfg.spec
    corner = sc.get("corner", "x_r")
    s = float(sc.get("s", 1.0))
    L = min(spec.x_l - spec.x_L, spec.x_R - spec.x_r)
    xc = {"x_L": spec.x_L, "x_l": spec.x_l, "x_r": spec.x_r, "x_R": spec.x_R}[corner]
    if "data" in sc:
        def data(x):
            return evaluate_profile(sc["data"], x)
    else:
        def data(x):
            comp = (x <= spec.x_l) if corner in ("x_L", "x_l") else (x >= spec.x_r)
            return np.where(comp, chi_bump(0, L, x - xc), 0.0)
    hs = [float(v) for v in sc.get("h", [args.mesh_h or cfg.h, (args.mesh_h or cfg.h) / 2])]
    q = float(sc.get("q", 0.8))
    layers = int(sc.get("layers", 12))
    systems = [assemble(build_mesh(spec, h, q=q, layers=layers)) for h in hs]
    xD = systems[-1].x_D
    rep_cc = compatibility_check(GammaDFunction.from_dofs(xD, data(xD), spec.x_l, spec.x_r), s)
    out = _outdir(args, cfg)
    result = {"compatibility": json.loads(rep_cc.to_json())}
    rep = verify_decomposition(data, s, systems, corner=corner)
    result["decomposition"] = json.loads(rep.to_json())
    _write_json(out / "singular.json", result)
    print("S1 coefficients: " + ", ".join(f"h={h:g}: {c:.4f}" for h, c in rep.s1_coefficient.items()))
    return EXIT_OK


def cmd_crossval(args, cfg: ScenarioConfig) -> int:
    from .cummins import cross_validate
    _check_equilibrium(cfg, args.allow_disequilibrium)
    T, dt = _run_params(args, cfg)
    st = _setup(cfg, args.mesh_h)
    opsys = _opsys(st, args.restriction or cfg.restriction, args.allow_disequilibrium)
    U0 = _initial_state(st, opsys)
    rows = []
    for k in range(int(cfg.run.get("ladder", 3))):
        d = dt / 2 ** k
        cv = cross_validate(opsys, U0, T, d)
        rows.append([d, cv.deviation, cv.relative_deviation])
    rows = np.array(rows)
    out = _outdir(args, cfg)
    np.savetxt(out / "crossval.csv", rows, delimiter=",", header="dt,deviation,relative_deviation",
               comments="", fmt="%.12g")
    for d, a, r in rows:
        print(f"dt={d:.3e}  sup|X_john - X_cummins| = {a:.3e}  relative {r:.3e}")
    return EXIT_OK


def cmd_plot(args, cfg: ScenarioConfig | None) -> int:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    out = Path(args.output or (cfg.outputs.get("dir", ".") if cfg else "."))
    made = 0
    traj = out / "trajectory.csv"
    if traj.exists():
        d = np.genfromtxt(traj, delimiter=",", names=True)
        fig, ax = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
        for k in ("x", "z", "theta"):
            ax[0].plot(d["t"], d[k], label=k)
        ax[0].legend()
        ax[0].set_ylabel("X")
        ax[1].plot(d["t"], d["energy"])
        ax[1].set_ylabel("energy")
        ax[1].set_xlabel("t")
        fig.savefig(out / "trajectory.png", dpi=120)
        plt.close(fig)
        made += 1
    kern = out / "kernel.csv"
    if kern.exists():
        d = np.genfromtxt(kern, delimiter=",", names=True)
        fig, ax = plt.subplots(figsize=(7, 4))
        for name in d.dtype.names[1:]:
            ax.plot(d["t"], d[name], label=name)
        ax.legend(ncol=3, fontsize=7)
        ax.set_xlabel("t")
        fig.savefig(out / "kernel.png", dpi=120)
        plt.close(fig)
        made += 1
    print(f"wrote {made} figure(s) to {out}")
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "simulate": cmd_simulate, "kernel": cmd_kernel,
            "singular": cmd_singular, "crossval": cmd_crossval, "plot": cmd_plot}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="floatbody", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="scenario JSON file")
    p.add_argument("--output", help="output directory")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-end", type=float, dest="t_end")
    p.add_argument("--mesh-h", type=float, dest="mesh_h")
    p.add_argument("--restriction", choices=sorted(_RESTRICTION_ALIASES))
    p.add_argument("--allow-disequilibrium", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--force", help="CSV file t,F1,F2,F3 of external body force")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    np.random.seed(args.seed)
    if args.restriction:
        args.restriction = _RESTRICTION_ALIASES[args.restriction]
    try:
        if args.config is None:
            if args.command != "plot":
                raise ConfigError("--config is required")
            cfg = None
        else:
            cfg = ScenarioConfig.load(args.config)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PhysicsFailure, GeometryError, NotRightAngle) as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except (SolverBreakdown, MeshGenerationFailure, SingularElement, FloatBodyError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
