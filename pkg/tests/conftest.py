from fractions import Fraction as Fr

import pytest
from hypothesis import settings

from dulackit.expansion import UnfoldingSpec
from dulackit.family import PolynomialFamily, biggest_real_root_branch
from dulackit.series import TruncatedSeries as TS

# reports must be reproducible run to run; so must the tests
settings.register_profile("deterministic", derandomize=True)
settings.load_profile("deterministic")


@pytest.fixture(scope="session")
def fam_linear():
    return PolynomialFamily(mu=1, coeffs={(2, 0): Fr(1), (1, 1): Fr(-1)})


@pytest.fixture(scope="session")
def fam_quadratic():
    return PolynomialFamily(mu=2, coeffs={(3, 0): Fr(1), (1, 1): Fr(-1)})


@pytest.fixture(scope="session")
def branch_linear_plus(fam_linear):
    return biggest_real_root_branch(fam_linear, +1)


@pytest.fixture(scope="session")
def branch_linear_minus(fam_linear):
    return biggest_real_root_branch(fam_linear, -1)


@pytest.fixture(scope="session")
def euler_spec(fam_linear, branch_linear_plus):
    """The classical irregular-singular example: x^2 y' = y + x at eps=0."""
    return UnfoldingSpec(
        family=fam_linear,
        branch=branch_linear_plus,
        V=TS.constant(Fr(1)),
        U=TS.from_coeffs([Fr(0), Fr(-1)]),
        lam=Fr(1),
        eps=Fr(0),
    )
