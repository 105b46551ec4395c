"""Acceptance suite: one test per criterion, each printing a single pass/fail line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also collected into an "acceptance criteria" section of the summary.
"""
import numpy as np
import pytest
from conftest import record_acceptance

from floatbody import (cummins, dn_operator, elliptic, function_spaces as fs, geometry,
                       hydrodynamics, john_evolution as je, singular_analysis as sa)
from floatbody.john_evolution import State

pytestmark = pytest.mark.acceptance


def _report(n: int, ok: bool, detail: str):
    record_acceptance(f"CRITERION {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def _gauss(x, c, w):
    return np.exp(-((x - c) / w) ** 2)


DEEP = dict(x_L=0.0, x_l=3.0, x_r=5.0, x_R=8.0, depth=2.0, draft=1.0, z_G=-0.5)


def test_criterion_01_dn_spectral_oracle():
    L = 2 * np.pi
    hs = (0.1, 0.05, 0.025)
    errs = np.empty((len(hs), 3))
    for i, h in enumerate(hs):
        op = dn_operator.assemble_G0(elliptic.assemble(geometry.periodic_strip_mesh(L, 1.0, h)))
        lam = op.eigvals
        for n in (1, 2, 3):
            k = 2 * np.pi * n / L
            exact = k * np.tanh(k)
            errs[i, n - 1] = max(abs(lam[2 * n - 1] - exact), abs(lam[2 * n] - exact)) / exact
    order = np.log2(errs[:-1] / errs[1:])
    ok = bool(np.all(errs[1] <= 0.02) and np.all(order >= 1.8))
    _report(1, ok, f"DN eigenvalues: rel. errors at h=0.05 {np.array2string(errs[1], formatter={'float': '{:.1e}'.format})}, "
                   f"min observed order {order.min():.2f} (need <= 2%, >= 1.8)")


def test_criterion_02_skew_adjointness(ref_opsys):
    r = je.skewness_residual(ref_opsys, 100, seed=0)
    _report(2, r <= 1e-10, f"skewness residual over 100 random pairs {r:.2e} (need <= 1e-10)")


def test_criterion_03_energy_conservation(ref_opsys):
    x = ref_opsys.op.x
    U = State(0.05 * _gauss(x, 2.0, 0.4), [0.0, 0.02, 0.01], 0.1 * _gauss(x, 8.0, 0.5), [0.1, 0.0, 0.0])
    traj = je.simulate(ref_opsys, U, 20.0, 0.01, stride=2000)
    drift = traj.relative_energy_drift()
    _report(3, len(traj.t) == 2001 and drift <= 1e-10,
            f"relative energy drift over 2000 midpoint steps {drift:.2e} (need <= 1e-10)")


def test_criterion_04_added_mass_gram(ref_hydro):
    Ma = ref_hydro.Ma
    sym = np.linalg.norm(Ma - Ma.T) / np.linalg.norm(Ma)
    mineig = np.linalg.eigvalsh(Ma).min()
    closure = np.linalg.norm(ref_hydro.green - Ma) / np.linalg.norm(Ma)
    ok = sym <= 1e-10 and mineig >= -1e-10 * np.trace(Ma) and closure <= 1e-8
    _report(4, ok, f"added mass: asymmetry {sym:.1e}, min eigenvalue {mineig:.3e}, "
                   f"Green closure {closure:.1e} (need 1e-10, >= -1e-10 tr, 1e-8)")


def test_criterion_05_hydrostatics(ref_spec):
    C = hydrodynamics.hydrostatic_matrix(ref_spec)
    czz = ref_spec.rho * ref_spec.g * (ref_spec.x_r - ref_spec.x_l)
    e_zz = abs(C[1, 1] - czz) / czz
    e_zt = abs(C[1, 2]) / czz
    zMG = hydrodynamics.metacenter(ref_spec)
    flips = []
    for eps in (1e-9, 1e-6, 1e-3):
        below = ref_spec.replace(center_of_mass=(ref_spec.x_G, zMG - eps))
        above = ref_spec.replace(center_of_mass=(ref_spec.x_G, zMG + eps))
        flips.append(hydrodynamics.stability_check(hydrodynamics.hydrostatic_matrix(below)).passed
                     and not hydrodynamics.stability_check(hydrodynamics.hydrostatic_matrix(above)).passed)
    ok = e_zz <= 1e-15 and e_zt <= 1e-15 and all(flips)
    _report(5, ok, f"c_zz rel. error {e_zz:.1e}, c_zt {e_zt:.1e}; stability flips at z_MG = {zMG:.6f} "
                   f"for offsets 1e-9, 1e-6, 1e-3: {flips}")


def test_criterion_06_kernel_positivity(ref_opsys):
    kern = cummins.kernel(ref_opsys, 2.0, 0.005)
    rep = kern.positivity()
    K0 = kern.K[0]
    psd = np.linalg.eigvalsh(0.5 * (K0 + K0.T)).min() >= -1e-10 * np.trace(K0)
    on = kern.t <= rep.t0
    mins = np.array([np.linalg.eigvalsh(0.5 * (k + k.T)).min() for k in kern.K[on]])
    ok = rep.symmetric_K0 <= 1e-10 and psd and rep.t0 > 0 and bool(np.all(mins > 0))
    _report(6, ok, f"K(0) asymmetry {rep.symmetric_K0:.1e}, min eigenvalue {rep.min_eig_K0:.3e}; "
                   f"positive on [0, t0] with t0 = {rep.t0:.3f} s")


def test_criterion_07_cummins_equals_john(heave_opsys):
    n = heave_opsys.n
    U = State(np.zeros(n), [0.0, 0.05, 0.0], np.zeros(n), np.zeros(3))
    devs = [cummins.cross_validate(heave_opsys, U, 5.0, dt).relative_deviation for dt in (1e-3, 5e-4)]
    ratio = devs[0] / devs[1]
    _report(7, devs[0] <= 5e-3 and ratio >= 3.5,
            f"heave drop: relative sup deviation {devs[0]:.2e} at dt=1e-3, {devs[1]:.2e} at dt=5e-4, "
            f"ratio {ratio:.2f} (need <= 5e-3, >= 3.5)")


def test_criterion_08_s1_closed_form(rng):
    x = rng.uniform(-3, 3, 2000)
    z = -rng.uniform(1e-3, 3, 2000)
    same = np.max(np.abs(sa.s_function(0, x, z) - sa.s1_closed(x, z)))
    hh = 1e-3

    def lap5(x, z, d):
        return (sa.s1_closed(x + d, z) + sa.s1_closed(x - d, z) + sa.s1_closed(x, z + d)
                + sa.s1_closed(x, z - d) - 4 * sa.s1_closed(x, z)) / d ** 2
    lap_ref = abs(lap5(0.3, -0.4, hh))
    # S_1 is homogeneous of degree 1 up to a harmonic term linear in z, so r * lap5 with
    # spacing hh * r is the residual at the unit-radius image of the sample
    r = 10 ** rng.uniform(-3, 1, 5000)
    th = rng.uniform(-np.pi, 0, 5000)
    xs, zs = r * np.cos(th), r * np.sin(th)
    keep = (np.abs(xs) >= 10 * hh * r) & (np.abs(zs) >= 10 * hh * r)
    lap_scaled = np.max(np.abs(lap5(xs[keep], zs[keep], hh * r[keep])) * r[keep])
    xt = np.concatenate([np.linspace(-3, -1e-3, 50), np.linspace(1e-3, 3, 50)])
    trace = np.max(np.abs(sa.s1_closed(xt, -1e-8 + 0 * xt) - np.abs(xt)))
    ok = same <= 1e-12 and lap_ref <= 1e-6 and lap_scaled <= 1e-6 and trace <= 1e-6
    _report(8, ok, f"S_1: closed-form mismatch {same:.1e}, Laplacian at (0.3,-0.4) {lap_ref:.1e}, "
                   f"scaled max over r in [1e-3, 10] {lap_scaled:.1e}, trace limit error {trace:.1e}")


def test_criterion_09_singularity_recovery():
    spec = geometry.rectangular_scenario(**DEEP)
    hs = (0.1, 0.05, 0.025)
    systems = [elliptic.assemble(geometry.build_mesh(spec, h, q=0.8, layers=12)) for h in hs]
    L = 3.0

    def data(x):
        return np.where(x >= spec.x_r, fs.chi_bump(0, L, x - spec.x_r), 0.0)
    rep = sa.verify_decomposition(data, 1.5, systems)
    coef = np.array([rep.s1_coefficient[h] for h in hs])
    logc, sup2 = [], []
    for sys_ in systems:
        op = dn_operator.assemble_G0(sys_)
        hyd = hydrodynamics.compute_hydro(spec, sys_)
        fit = hydrodynamics.singular_fit(hyd, op, j=0)
        logc.append([abs(fit["x_l"][0]), abs(fit["x_r"][0])])
        sup2.append(np.abs(hyd.dzK[1]).max())
    logc = np.array(logc)
    sup2 = np.array(sup2)
    e_log = np.max(np.abs(logc - 2 / np.pi)) / (2 / np.pi)
    e_sup = np.max(np.abs(sup2 / sup2[-1] - 1))
    ok = bool(np.all(np.abs(coef - 1) <= 0.05) and e_log <= 0.10 and e_sup <= 0.02)
    _report(9, ok, f"S_1 coefficients {np.array2string(coef, precision=4)}; |log coeff. of d_zK_1| "
                   f"max rel. error to 2/pi {e_log:.3f}; d_zK_2 sup spread {e_sup:.4f}")


def test_criterion_10_restricted_motion_regularity(ref_spec):
    T, dt = 20.0, 0.01
    hs = (0.1, 0.05, 0.025)
    heave_ratio, free_avg = [], []
    for h in hs:
        sys_ = elliptic.assemble(geometry.build_mesh(ref_spec, h))
        op = dn_operator.assemble_G0(sys_)
        hyd = hydrodynamics.compute_hydro(ref_spec, sys_)
        U = State(np.zeros(op.n), np.zeros(3), 0.1 * _gauss(op.x, 2.0, 0.3), [1.0, 0.0, 0.0])
        heave = je.SystemOperator(op, hyd, "heave")
        tr = je.simulate(heave, U, T, dt, stride=int(T / dt), diagnostics=2)
        heave_ratio.append(tr.diagnostics.max() / tr.diagnostics[0])
        free = je.SystemOperator(op, hyd, "free")
        tf = je.simulate(free, U, T, dt, stride=int(T / dt), diagnostics=2)
        free_avg.append(tf.diagnostics.mean())
    heave_ratio = np.array(heave_ratio)
    free_avg = np.array(free_avg)
    ok = bool(np.all(heave_ratio <= 3.0) and np.all(np.diff(free_avg) > 0))
    _report(10, ok, f"heave-only max/initial {np.array2string(heave_ratio, precision=3)} (need <= 3); "
                    f"surge-allowed time-averaged n=2 diagnostic {np.array2string(free_avg, precision=3)} "
                    f"at h = {hs} (need increasing)")


def test_criterion_11_compatibility_projection(rng):
    X_L, X_l, X_r, X_R = 0.0, 4.0, 6.0, 10.0
    idem, recon = 0.0, 0.0
    for s in (1.0, 1.5, 2.0, 2.5):
        for _ in range(5):
            c = rng.uniform(-3, 3, 4)
            k = rng.uniform(0.2, 2.0)
            f = fs.GammaDFunction.from_callable(
                lambda x: np.sin(k * x) + c[0] + c[1] * np.abs(x - X_r) + c[2] * x + c[3] * np.cos(x),
                X_L, X_l, X_r, X_R, 401)
            scale = max(1.0, np.abs(f.to_vector()).max())
            fcc, _ = fs.decompose_cc(f, s)
            Tf = fs.corner_projection(f, s)
            fcc2, _ = fs.decompose_cc(fcc, s)
            idem = max(idem, np.max(np.abs(fcc2.to_vector() - fcc.to_vector())) / scale)
            recon = max(recon, np.max(np.abs(fcc.to_vector() + Tf.to_vector() - f.to_vector())) / scale)
    _report(11, idem <= 1e-12 and recon <= 1e-12,
            f"decompose_cc idempotence {idem:.1e}, reconstruction {recon:.1e} (need <= 1e-12)")
