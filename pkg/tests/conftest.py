"""Test bootstrap helpers.

Ensures the project root is importable when running tests without installing
the package, and provides the reference device parameters shared by the suites.
"""

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from cqed_pairsim.model import ModelParams  # noqa: E402
from cqed_pairsim.qops import make_space  # noqa: E402


@pytest.fixture
def base_params() -> ModelParams:
    """omega = 8, delta1 = delta2 = 4, g1 = g2 = 0.2, J = 0.1 GHz, n_max = 5."""
    return ModelParams()


@pytest.fixture
def space5():
    return make_space(5)
