"""Corner singularity study in a deep right-angle tank.

Dirichlet data with a unit slope at the right contact point produce a
potential that behaves like the first singular function near the corner.
The script fits its coefficient on three graded meshes and the logarithmic
coefficient of the vertical velocity trace of the surge potential.

    python3 demos/corner_singularity.py
"""
import numpy as np

from floatbody import dn_operator, elliptic, function_spaces as fs, geometry, hydrodynamics
from floatbody import singular_analysis as sa


def main():
    spec = geometry.rectangular_scenario(x_L=0.0, x_l=3.0, x_r=5.0, x_R=8.0, depth=2.0, draft=1.0,
                                         z_G=-0.5)
    systems = [elliptic.assemble(geometry.build_mesh(spec, h, q=0.8, layers=12))
               for h in (0.1, 0.05, 0.025)]

    def data(x):
        return np.where(x >= spec.x_r, fs.chi_bump(0, 3.0, x - spec.x_r), 0.0)
    rep = sa.verify_decomposition(data, 1.5, systems)
    print("h       S1 coeff.  raw rate  regular rate  |a| at x_l  |a| at x_r   (2/pi = %.4f)" % (2 / np.pi))
    for sys_ in systems:
        h = sys_.mesh.h
        hyd = hydrodynamics.compute_hydro(spec, sys_)
        fit = hydrodynamics.singular_fit(hyd, dn_operator.assemble_G0(sys_), j=0)
        print(f"{h:<7g} {rep.s1_coefficient[h]:9.4f}  {rep.raw_rate[h]:8.2f}  {rep.regular_rate[h]:12.2f}"
              f"  {abs(fit['x_l'][0]):10.4f}  {abs(fit['x_r'][0]):10.4f}")


if __name__ == "__main__":
    main()
