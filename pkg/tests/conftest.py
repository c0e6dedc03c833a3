import itertools

import numpy as np
import pytest

from fglearn.experiments import generate_model


def to_naive(graph):
    """Convert a factor graph to the plain dict form used by ``naive``."""
    cards = graph.cardinalities
    factors = []
    for f in graph.factors:
        shape = f.shape
        table = {d: float(np.exp(f.log_values[d])) for d in itertools.product(*(range(c) for c in shape))}
        factors.append((f.scope, table))
    return cards, factors


def reconstruction_family(count=50):
    """Seeded positive graphs with n <= 6, cardinalities <= 3 and scopes of size <= 3."""
    graphs = []
    for seed in range(count):
        n = 2 + seed % 5
        graphs.append(generate_model("random", n, max_cardinality=3, strength=4.0, seed=seed,
                                     k=min(3, n), degree=3))
    return graphs


@pytest.fixture(scope="session")
def family():
    return reconstruction_family()
