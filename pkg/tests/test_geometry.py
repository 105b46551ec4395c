import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from floatbody import geometry
from floatbody.errors import (DegenerateAngle, GeometryError, MeshGenerationFailure, NonClosedWettedCurve,
                              SelfIntersectingCurve)
from floatbody.geometry import DomainSpec, Tag


def _wedge_spec(slope_deg=30.0):
    cfg = {"domain": {"x_L": 0, "x_l": 4, "x_r": 6, "x_R": 10, "bottom": 1.0,
                      "wetted_curve": {"type": "wedge", "draft": 0.5, "slope_deg": slope_deg}}}
    return DomainSpec.from_dict(cfg)


def test_reference_tank_right_angles_and_valid(ref_spec):
    np.testing.assert_allclose(geometry.contact_angles(ref_spec), np.full(4, np.pi / 2), atol=1e-15)
    assert geometry.validate_domain(ref_spec).ok


def test_wetted_endpoint_off_surface_raises(ref_spec):
    w = ref_spec.wetted_curve.copy()
    w[-1] = [6.0, -0.1]
    with pytest.raises(NonClosedWettedCurve):
        geometry.validate_domain(ref_spec.replace(wetted_curve=w))


def test_wedge_contact_angle():
    ang = geometry.contact_angles(_wedge_spec(30.0))
    np.testing.assert_allclose(ang[1:3], np.pi / 2 + np.pi / 6, atol=1e-12)


def test_hydrostatics_rectangle(ref_spec):
    hs = geometry.hydrostatics(ref_spec)
    assert hs.area_w == pytest.approx(1.0, abs=1e-14)
    assert hs.x_B == pytest.approx(5.0, abs=1e-14)
    assert hs.z_B == pytest.approx(-0.25, abs=1e-14)
    assert hs.mass_residual == pytest.approx(0.0, abs=1e-14)


def test_hydrostatics_semicircle():
    r = 0.8
    cfg = {"domain": {"x_L": 0, "x_l": 5 - r, "x_r": 5 + r, "x_R": 10, "bottom": 2.0,
                      "wetted_curve": {"type": "semicircle", "n": 2000}}}
    hs = geometry.hydrostatics(DomainSpec.from_dict(cfg))
    assert hs.area_w == pytest.approx(np.pi * r ** 2 / 2, rel=1e-5)
    assert hs.x_B == pytest.approx(5.0, abs=1e-12)


def test_sloped_wall_angle():
    t = np.tan(np.deg2rad(10.0))
    bottom = [[0.0, 0.0], [t, -1.0], [10.0, -1.0]]
    spec = geometry.rectangular_scenario().replace(bottom=bottom)
    assert geometry.contact_angles(spec)[0] == pytest.approx(np.pi / 2 - np.pi / 18, abs=1e-12)


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.6])
def test_beach_angle(alpha):
    x0 = 10.0 - 1.0 / np.tan(alpha)
    bottom = [[0.0, 0.0], [0.0, -1.0], [x0, -1.0], [10.0, 0.0]]
    spec = geometry.rectangular_scenario().replace(bottom=bottom)
    assert geometry.contact_angles(spec)[3] == pytest.approx(alpha, abs=1e-12)


def test_tangent_contact_is_degenerate():
    w = [[4.0, 0.0], [4.5, 0.0], [5.0, -0.5], [6.0, -0.5], [6.0, 0.0]]
    spec = geometry.rectangular_scenario().replace(wetted_curve=w)
    with pytest.raises(DegenerateAngle):
        geometry.validate_domain(spec)


def test_self_intersecting_curve():
    w = [[4.0, 0.0], [5.5, -0.5], [4.5, -0.5], [6.0, -0.2], [6.0, 0.0]]
    spec = geometry.rectangular_scenario().replace(wetted_curve=w)
    with pytest.raises(SelfIntersectingCurve):
        geometry.hydrostatics(spec)


def test_corner_edge_size(ref_mesh):
    bm = ref_mesh.boundary
    mids = bm.vertices[bm.segments].mean(axis=1)
    for x in ref_mesh.spec.contact_x:
        d = np.linalg.norm(mids - [x, 0.0], axis=1)
        near = bm.lengths[np.argsort(d)[:2]]
        assert np.all(near < 3 * 0.1 * 0.5 ** 6)
        assert np.all(near > 0.3 * 0.1 * 0.5 ** 6)


def test_boundary_dofs_double(ref_spec):
    n = [len(geometry.build_mesh(ref_spec, h, q=0.5, layers=0).boundary.segments) for h in (0.2, 0.1)]
    assert 1.8 < n[1] / n[0] < 2.2


def test_mesh_failure_for_zero_h(ref_spec):
    with pytest.raises(MeshGenerationFailure):
        geometry.build_mesh(ref_spec, 0.0)


def test_mesh_tags_and_quality(ref_mesh):
    bm = ref_mesh.boundary
    assert set(np.unique(bm.tags)) == {int(Tag.DIRICHLET_FREE), int(Tag.NEUMANN_WETTED),
                                       int(Tag.NEUMANN_BOTTOM)}
    free = bm.segments[bm.tags == Tag.DIRICHLET_FREE]
    np.testing.assert_allclose(bm.vertices[free][..., 1], 0.0, atol=1e-14)
    np.testing.assert_allclose(bm.normals[bm.tags == Tag.DIRICHLET_FREE], [[0.0, 1.0]] * len(free),
                               atol=1e-14)
    assert np.degrees(ref_mesh.min_angle()) > 20


def test_periodic_strip_dofs():
    m = geometry.periodic_strip_mesh(2.0, 1.0, 0.25)
    assert m.n_dofs == 8 * 5
    assert m.periodic_length == 2.0


@settings(max_examples=20, deadline=None)
@given(dx=st.floats(-50, 50), draft=st.floats(0.05, 0.9), width=st.floats(0.2, 4.0))
def test_hydrostatics_rectangle_property(dx, draft, width):
    spec = geometry.rectangular_scenario(x_l=5 - width / 2, x_r=5 + width / 2, draft=draft)
    s2 = spec.translated(dx)
    h1, h2 = geometry.hydrostatics(spec), geometry.hydrostatics(s2)
    assert h1.area_w == pytest.approx(width * draft, rel=1e-12)
    assert h2.area_w == pytest.approx(h1.area_w, rel=1e-10)
    assert h2.x_B - h1.x_B == pytest.approx(dx, abs=1e-9)
    assert h1.z_B == pytest.approx(-draft / 2, rel=1e-12)
    np.testing.assert_allclose(geometry.contact_angles(s2), np.pi / 2)


@settings(max_examples=20, deadline=None)
@given(slope=st.floats(1.0, 60.0))
def test_wedge_angle_property(slope):
    ang = geometry.contact_angles(_wedge_spec(slope))
    np.testing.assert_allclose(ang[1:3], np.pi / 2 + np.deg2rad(slope), atol=1e-12)


@pytest.mark.parametrize("spec", [
    geometry.rectangular_scenario(),
    geometry.rectangular_scenario(x_L=-3, x_l=-1, x_r=1, x_R=3, depth=2, draft=0.7, z_G=-0.3),
])
def test_symmetric_mesh_is_mirror_image(spec):
    m = geometry.build_mesh(spec, 0.15, symmetric=True)
    xc = 0.5 * (spec.x_L + spec.x_R)
    ref = m.vertices.copy()
    ref[:, 0] = 2 * xc - ref[:, 0]
    d = np.linalg.norm(ref[:, None, :] - m.vertices[None, :, :], axis=2)
    assert d.min(axis=1).max() < 1e-12
    p = m.vertices[m.triangles]
    area = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    assert np.all(area > 0)
    assert np.isclose(area.sum(), (spec.x_R - spec.x_L) * 1.0 * (-spec.bottom[:, 1].min())
                      - (spec.x_r - spec.x_l) * (-spec.wetted_curve[:, 1].min()))
    assert set(np.unique(m.boundary.tags)) == {int(Tag.DIRICHLET_FREE), int(Tag.NEUMANN_WETTED),
                                               int(Tag.NEUMANN_BOTTOM)}
    assert len(m.boundary.corner_ids) == 4


def test_symmetric_mesh_rejects_offcentre_body():
    spec = geometry.rectangular_scenario(x_l=3, x_r=5)
    with pytest.raises(GeometryError):
        geometry.build_mesh(spec, 0.2, symmetric=True)
