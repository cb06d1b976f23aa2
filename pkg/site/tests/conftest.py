"""Pytest fixtures for typed-crf."""

import numpy as np
import pytest

from typed_crf.crf_model import Labeling, TypedGraphInstance, TypeSchema, Weights
from typed_crf.factor_graph import AdmmSettings


@pytest.fixture()
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture()
def admm():
    """Solver settings for small graphs."""
    return AdmmSettings(max_iterations=2000)


@pytest.fixture()
def fast_admm():
    """Solver settings for snake-sized graphs in quick tests."""
    return AdmmSettings(max_iterations=60, residual_tolerance=1e-4)


@pytest.fixture()
def random_schema():
    def factory(rng, max_types=3, max_labels=4, max_dim=3):
        k = int(rng.integers(1, max_types + 1))
        return TypeSchema(
            tuple(int(v) for v in rng.integers(1, max_labels + 1, size=k)),
            tuple(int(v) for v in rng.integers(1, max_dim + 1, size=k)),
            tuple(tuple(int(v) for v in row) for row in rng.integers(0, max_dim, size=(k, k))),
        )

    return factory


@pytest.fixture()
def random_instance():
    def factory(rng, schema, max_nodes=3, max_edges=3):
        counts = rng.integers(0, max_nodes + 1, size=schema.k)
        nodes = tuple(rng.normal(size=(n, d)) for n, d in zip(counts, schema.node_dims))
        edges, features = {}, {}
        for t, u in schema.pairs:
            m = int(rng.integers(0, max_edges + 1)) if counts[t] and counts[u] else 0
            edges[(t, u)] = np.column_stack(
                [rng.integers(0, max(counts[t], 1), m), rng.integers(0, max(counts[u], 1), m)]
            )
            features[(t, u)] = rng.normal(size=(m, schema.edge_dims[t][u]))
        return TypedGraphInstance(schema, nodes, edges, features)

    return factory


@pytest.fixture()
def random_labeling():
    def factory(rng, g):
        return Labeling(
            tuple(rng.integers(0, l, size=n) for l, n in zip(g.schema.labels, g.num_nodes))
        )

    return factory


@pytest.fixture()
def random_weights():
    def factory(rng, schema):
        return Weights.unflatten(schema, rng.normal(size=schema.weight_size))

    return factory
