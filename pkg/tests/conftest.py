"""Shared fixtures: the reference tank discretized once per session."""
import numpy as np
import pytest

from floatbody import dn_operator, elliptic, geometry, hydrodynamics, john_evolution

ACCEPTANCE_LINES = []


def record_acceptance(line: str):
    """Collect one pass/fail line for the terminal summary."""
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ref_spec():
    return geometry.rectangular_scenario()


@pytest.fixture(scope="session")
def ref_mesh(ref_spec):
    return geometry.build_mesh(ref_spec, 0.1)


@pytest.fixture(scope="session")
def ref_sys(ref_mesh):
    return elliptic.assemble(ref_mesh)


@pytest.fixture(scope="session")
def ref_op(ref_sys):
    return dn_operator.assemble_G0(ref_sys)


@pytest.fixture(scope="session")
def ref_hydro(ref_spec, ref_sys):
    return hydrodynamics.compute_hydro(ref_spec, ref_sys)


@pytest.fixture(scope="session")
def ref_opsys(ref_op, ref_hydro):
    return john_evolution.SystemOperator(ref_op, ref_hydro)


@pytest.fixture(scope="session")
def heave_opsys(ref_op, ref_hydro):
    return john_evolution.SystemOperator(ref_op, ref_hydro, restriction="heave")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def sym_opsys(ref_spec):
    """Reference tank on an exactly mirror-symmetric mesh (parity checks)."""
    sys_ = elliptic.assemble(geometry.build_mesh(ref_spec, 0.1, symmetric=True))
    op = dn_operator.assemble_G0(sys_)
    return john_evolution.SystemOperator(op, hydrodynamics.compute_hydro(ref_spec, sys_))
