import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from floatbody import elliptic, geometry
from floatbody.errors import IncompatibleFlux, SingularElement
from floatbody.geometry import Tag


def _u(x, z):
    return x ** 2 - z ** 2


def _flux(x, z, nx, nz):
    return 2 * x * nx - 2 * z * nz


def _l2(sys, e):
    return np.sqrt(np.sum(sys.vertex_area * e ** 2))


def test_two_triangle_square_stiffness():
    m = geometry.rectangle_mesh(0.0, 1.0, 0.0, 1.0, 1, 1)
    A = elliptic.assemble(m).A.toarray()
    # vertices (0,0), (1,0), (0,1), (1,1); diagonal from (0,0) to (1,1)
    ref = np.array([[1, -.5, -.5, 0], [-.5, 1, 0, -.5], [-.5, 0, 1, -.5], [0, -.5, -.5, 1]])
    np.testing.assert_allclose(A, ref, atol=1e-15)


def test_constants_in_kernel(ref_sys):
    assert np.max(np.abs(ref_sys.A @ np.ones(ref_sys.n))) < 1e-12


def test_boundary_mass_row_sums(ref_sys):
    m = ref_sys.mesh
    e = m.boundary.edges_with(Tag.DIRICHLET_FREE)
    rows = np.asarray(ref_sys.M_D.sum(axis=1)).ravel()
    seg = m.boundary.segments[e]
    w = np.zeros(ref_sys.n)
    np.add.at(w, m.dofs[seg[:, 0]], 0.5 * m.boundary.lengths[e])
    np.add.at(w, m.dofs[seg[:, 1]], 0.5 * m.boundary.lengths[e])
    np.testing.assert_allclose(rows, w[ref_sys.dir_dofs], atol=1e-14)
    assert rows.sum() == pytest.approx(8.0, rel=1e-13)


def test_degenerate_triangle():
    V = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 1.0]])
    T = np.array([[0, 1, 2], [0, 1, 3]])
    m = geometry.Mesh.from_triangles(V, T, lambda x, z: Tag.NEUMANN_BOTTOM)
    with pytest.raises(SingularElement):
        elliptic.assemble(m)


def test_constant_dirichlet(ref_sys):
    u = elliptic.solve_mixed(ref_sys, 3.5)
    np.testing.assert_allclose(u.values, 3.5, atol=1e-12)


def test_manufactured_mixed_second_order(ref_spec):
    errs = []
    for h in (0.2, 0.1, 0.05):
        sys = elliptic.assemble(geometry.build_mesh(ref_spec, h))
        u = elliptic.solve_mixed(sys, _u, _flux)
        xy = sys.dof_xy
        errs.append(_l2(sys, u.values - _u(xy[:, 0], xy[:, 1])))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.7), rates


def test_manufactured_neumann(ref_spec):
    errs = []
    for h in (0.2, 0.1):
        sys = elliptic.assemble(geometry.build_mesh(ref_spec, h))
        u = elliptic.solve_neumann(sys, _flux)
        xy = sys.dof_xy
        ex = _u(xy[:, 0], xy[:, 1])
        ex -= np.sum(sys.vertex_area * ex) / sys.vertex_area.sum()
        errs.append(_l2(sys, u.values - ex))
    assert errs[1] < errs[0] / 3


def test_neumann_zero_flux(ref_sys):
    u = elliptic.solve_neumann(ref_sys, 0.0)
    assert np.max(np.abs(u.values)) < 1e-14


def test_incompatible_flux(ref_sys):
    with pytest.raises(IncompatibleFlux):
        elliptic.solve_neumann(ref_sys, 0.1)


def test_trace_of_z_on_strip():
    m = geometry.rectangle_mesh(0.0, 2.0, -1.0, 0.0, 10, 5)
    sys = elliptic.assemble(m)
    u = elliptic.solve_mixed(sys, lambda x, z: z, {Tag.NEUMANN_BOTTOM: lambda x, z, nx, nz: nz})
    tr = elliptic.normal_trace(u)
    np.testing.assert_allclose(tr.values, 1.0, atol=1e-10)
    np.testing.assert_allclose(tr.edge_values, 1.0, atol=1e-10)


def test_trace_of_constant(ref_sys):
    tr = elliptic.normal_trace(elliptic.solve_mixed(ref_sys, 1.0))
    assert np.max(np.abs(tr.values)) < 1e-10


def test_trace_of_saddle_vanishes():
    # d_z (x^2 - z^2) = 0 on z = 0; the structured mesh reproduces it to roundoff
    for n in (10, 20):
        sys = elliptic.assemble(geometry.rectangle_mesh(0.0, 2.0, -1.0, 0.0, 2 * n, n))
        tr = elliptic.normal_trace(elliptic.solve_mixed(sys, _u, _flux))
        assert np.max(np.abs(tr.values)) < 1e-10


def test_trace_of_saddle_unstructured(ref_spec):
    sys = elliptic.assemble(geometry.build_mesh(ref_spec, 0.05))
    tr = elliptic.normal_trace(elliptic.solve_mixed(sys, _u, _flux))
    away = np.abs(tr.x - 2.0) < 1.0
    assert np.sqrt(np.mean(tr.values[away] ** 2)) < 1e-2


def test_flux_balance_of_harmonic_field(ref_sys):
    u = elliptic.solve_mixed(ref_sys, _u, _flux)
    total = elliptic.normal_trace(u).integral()
    for tag in (Tag.NEUMANN_WETTED, Tag.NEUMANN_BOTTOM):
        total += elliptic.normal_trace(u, tag).integral()
    assert abs(total) < 1e-10


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), c=st.floats(-5, 5))
def test_linear_fields_reproduced(ref_sys, a, b, c):
    def u(x, z):
        return a + b * x + c * z

    def flux(x, z, nx, nz):
        return b * nx + c * nz
    sol = elliptic.solve_mixed(ref_sys, u, flux)
    xy = ref_sys.dof_xy
    np.testing.assert_allclose(sol.values, u(xy[:, 0], xy[:, 1]), atol=1e-9 * (1 + abs(a) + abs(b) + abs(c)))
