import math

import pytest

from solhodge.foliation import build_frame

PHI = (1 + math.sqrt(5)) / 2
SQRT2 = math.sqrt(2)
SQRT3 = math.sqrt(3)
SQRT5 = math.sqrt(5)

GOLDEN_ALPHA = (1.0, PHI)
# truncated factorial sum 10^-1 + 10^-2 + 10^-6
LIOUVILLE_ALPHA = (1.0, 0.110001)


@pytest.fixture(scope="session")
def golden_frame():
    return build_frame([GOLDEN_ALPHA])


@pytest.fixture(scope="session")
def k2_frame():
    return build_frame([(1.0, SQRT2, SQRT3), (SQRT3, 1.0, SQRT2)])


@pytest.fixture(scope="session")
def k3_frame():
    return build_frame([
        (1.0, SQRT2, SQRT3, SQRT5),
        (SQRT5, 1.0, SQRT2, SQRT3),
        (SQRT3, SQRT5, 1.0, SQRT2),
    ])
