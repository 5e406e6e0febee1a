import numpy as np
import pytest

from rankadmm.data_io import SyntheticSpec, generate_synthetic, standardize
from rankadmm.losses import LossKind
from rankadmm.problem import Problem
from rankadmm.regularizers import ZERO
from rankadmm.weights import ERM


def make_synthetic_problem(
    n=60,
    d=8,
    loss=LossKind.LOGISTIC,
    weights=None,
    regularizer=ZERO,
    seed=0,
    class_sep=1.0,
    flip_fraction=0.1,
):
    ds = generate_synthetic(
        SyntheticSpec(n=n, d=d, class_sep=class_sep, flip_fraction=flip_fraction, seed=seed)
    )
    ds, = standardize(ds)
    return Problem(
        X=ds.X,
        y=ds.y,
        loss=loss,
        weights=weights if weights is not None else ERM(),
        regularizer=regularizer,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
