"""Heave drop test in the reference tank.

The body is released 5 cm above equilibrium in calm water and may only move
vertically.  The coupled fluid-body system and the Cummins equation are run
on the same time grid, and the script prints how the two heave histories
approach each other as the time step is refined.

    python3 demos/heave_drop.py [--plot out.png]
"""
import argparse

import numpy as np

from floatbody import cummins, dn_operator, elliptic, geometry, hydrodynamics, john_evolution as je


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--plot", help="write a heave history figure")
    ap.add_argument("--T", type=float, default=5.0)
    args = ap.parse_args()

    spec = geometry.rectangular_scenario()
    sys_ = elliptic.assemble(geometry.build_mesh(spec, 0.1))
    op = dn_operator.assemble_G0(sys_)
    opsys = je.SystemOperator(op, hydrodynamics.compute_hydro(spec, sys_), "heave")
    U = je.State(np.zeros(op.n), [0.0, 0.05, 0.0], np.zeros(op.n), np.zeros(3))
    print(f"free-surface dofs {op.n}, added mass in heave {opsys.hydro.Ma[1, 1]:.4f}")

    prev = None
    for dt in (4e-3, 2e-3, 1e-3):
        cv = cummins.cross_validate(opsys, U, args.T, dt)
        rate = "" if prev is None else f"  ratio {prev / cv.relative_deviation:.2f}"
        print(f"dt = {dt:.0e}: relative sup deviation {cv.relative_deviation:.3e}{rate}")
        prev = cv.relative_deviation

    z = cv.X_john[:, 1]
    print(f"heave amplitude in the last second: {np.abs(z[cv.t > args.T - 1]).max():.4f} (release 0.05)")
    if args.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots(figsize=(7, 3))
        ax.plot(cv.t, cv.X_john[:, 1], label="coupled system")
        ax.plot(cv.t, cv.X_cummins[:, 1], "--", label="Cummins")
        ax.set_xlabel("t")
        ax.set_ylabel("heave")
        ax.legend()
        fig.tight_layout()
        fig.savefig(args.plot, dpi=120)


if __name__ == "__main__":
    main()
