import numpy as np
import pytest

from rr_hdiv import iteration, verify
from rr_hdiv.mesh import build_unit_square_mesh


@pytest.fixture(scope="session")
def case():
    return verify.manufactured_case()


@pytest.fixture(scope="session")
def mesh8():
    return build_unit_square_mesh(8)


@pytest.fixture(scope="session")
def mesh32():
    return build_unit_square_mesh(32)


@pytest.fixture(scope="session")
def small_problem(case):
    """N=2 on an 8x8 mesh: every dense cross-check stays instant."""
    cfg = iteration.IterationConfig(N=2, ratio=4)
    return iteration.build_problem(cfg, case.load)


@pytest.fixture(scope="session")
def problem_n4(case):
    """The workhorse configuration: 4x4 subdomains, ratio 8, gamma = h."""
    cfg = iteration.IterationConfig(N=4, ratio=8)
    return iteration.build_problem(cfg, case.load)


@pytest.fixture(scope="session")
def oracle32(case, problem_n4):
    """Direct solution on the N=4 problem's own mesh."""
    return verify.solve_global(problem_n4.mesh, case.beta, case.load)


@pytest.fixture(scope="session")
def oracle8(case, small_problem):
    return verify.solve_global(small_problem.mesh, case.beta, case.load)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260821)
