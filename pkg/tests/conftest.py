import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from unrolling.bench import generate_data  # noqa: E402
from unrolling.densela import spectral_extremes_sym  # noqa: E402
from unrolling.fixmap import RidgeLS  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def ridge_instance(N, seed=0, M=50, scalar_ridge=True, alpha_kind="optimal", reg=0.0):
    """Random ridge objective with a step size chosen against ``A^T A + reg I``."""
    A, b = generate_data(M, N, seed)
    m, L = spectral_extremes_sym(A.T @ A)
    m, L = m + reg, L + reg
    alpha = 2.0 / (L + m) if alpha_kind == "optimal" else 1.0 / (3.0 * L)
    return RidgeLS(A, b, alpha, scalar_ridge=scalar_ridge)


@pytest.fixture
def ridge_small():
    return ridge_instance(10, seed=3)
