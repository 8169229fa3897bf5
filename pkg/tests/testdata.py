"""Shared synthetic datasets for the test suite."""

import numpy as np

from srsub import Dataset, evaluate, parse

WASHBURN = "sqrt(x1*x2*x3*cos(x4)/(2*x5))"


def positive_washburn_dataset(n=600, seed=5) -> Dataset:
    """Washburn observations on an all-positive box (angle within (0, pi/2)),
    where every intermediate product stays positive."""
    rng = np.random.default_rng(seed)
    f = parse(WASHBURN)
    X = np.column_stack([
        rng.uniform(0.5, 2.0, n),
        rng.uniform(0.5, 2.0, n),
        rng.uniform(0.5, 2.0, n),
        rng.uniform(0.1, 1.4, n),
        rng.uniform(0.5, 2.0, n),
    ])
    y = evaluate(f, X)
    assert np.isfinite(y).all()
    return Dataset.from_arrays(X, y)
