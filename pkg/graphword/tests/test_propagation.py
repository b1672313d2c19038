import numpy as np
import pytest

from graphword.ingest import build_graph
from graphword.propagation import (LayerStack, PropagationConfig,
                                   aggregate_omega, block_similarity,
                                   influence_coefficient, init_embeddings,
                                   propagate_layer, propagate_matrix,
                                   random_feature_propagation)


def _random_graph(rng, max_nodes=200):
    num_users = int(rng.integers(2, max_nodes // 2))
    num_items = int(rng.integers(2, max_nodes - num_users))
    density = rng.uniform(0.01, 0.2)
    seqs = {}
    for u in range(num_users):
        picked = np.flatnonzero(rng.random(num_items) < density)
        seqs[u] = [int(v) for v in picked]
    return build_graph(seqs, num_users, num_items)


def test_node_and_matrix_forms_agree():
    rng = np.random.default_rng(0)
    for trial in range(50):
        graph = _random_graph(rng)
        layers = int(rng.integers(1, 5))
        config = PropagationConfig(sigma=5.0, layers=layers, dim=8,
                                   seed=trial)
        stack = propagate_matrix(graph, init_embeddings(graph, config),
                                 layers)
        emb = stack.layers[0]
        for depth in range(1, layers + 1):
            emb = propagate_layer(graph, emb, n_threads=1 + trial % 3)
            np.testing.assert_allclose(emb, stack.layers[depth], rtol=0,
                                       atol=1e-6)


def test_single_edge_one_layer_averages_endpoints():
    graph = build_graph({0: [0]}, 1, 1)
    config = PropagationConfig(sigma=1.0, layers=1, dim=4, seed=7)
    stack = propagate_matrix(graph, init_embeddings(graph, config), 1)
    e_u, e_v = stack.layers[0]
    omega = aggregate_omega(stack, num_users=1)
    np.testing.assert_allclose(omega.rows, [(e_u + e_v) / 2] * 2)
    assert omega.user_rows.shape == (1, 4)
    assert omega.item_rows.shape == (1, 4)


def test_isolated_nodes_propagate_to_zero():
    graph = build_graph({0: [0], 1: []}, 2, 2)
    emb = np.ones((4, 3))
    out = propagate_layer(graph, emb)
    assert np.all(out[1] == 0) and np.all(out[3] == 0)
    np.testing.assert_allclose(propagate_matrix(graph, emb, 1).layers[1],
                               out)


def test_shape_mismatch_is_rejected():
    graph = build_graph({0: [0]}, 1, 1)
    with pytest.raises(ValueError):
        propagate_layer(graph, np.zeros((3, 2)))
    with pytest.raises(ValueError):
        propagate_matrix(graph, np.zeros((3, 2)), 1)


def test_influence_coefficient_matches_squared_adjacency():
    rng = np.random.default_rng(1)
    for _ in range(30):
        graph = _random_graph(rng, max_nodes=60)
        squared = np.linalg.matrix_power(
            graph.normalized_adjacency().toarray(), 2)
        for _ in range(5):
            i, j = rng.integers(graph.num_users, size=2)
            assert influence_coefficient(graph, int(i), int(j)) == \
                pytest.approx(squared[i, j], rel=0, abs=1e-9)


def test_influence_coefficient_rejects_items():
    graph = build_graph({0: [0], 1: [0]}, 2, 1)
    with pytest.raises(ValueError):
        influence_coefficient(graph, 0, 2)


def test_omega0_is_independent_of_graph_size():
    small = build_graph({0: [0]}, 1, 1)
    large = build_graph({u: [u % 5] for u in range(20)}, 20, 5)
    config = PropagationConfig(sigma=2.0, layers=2, dim=6, seed=11)
    a = random_feature_propagation(small, config)
    b = random_feature_propagation(large, config)
    np.testing.assert_array_equal(a.omega0, b.omega0)


def test_propagation_is_deterministic_and_form_independent():
    graph = build_graph({u: [u % 7, (u + 3) % 7] for u in range(15)}, 15, 7)
    config = PropagationConfig(sigma=5.0, layers=4, dim=16, seed=3)
    a = random_feature_propagation(graph, config)
    b = random_feature_propagation(graph, config)
    c = random_feature_propagation(graph, config, form='node')
    np.testing.assert_array_equal(a.rows, b.rows)
    np.testing.assert_allclose(a.rows, c.rows, atol=1e-9)
    assert a.to_float32().rows.dtype == np.float32
    with pytest.raises(ValueError):
        random_feature_propagation(graph, config, form='dense')


def test_layer_stack_depth():
    stack = LayerStack([np.zeros((2, 2))] * 3)
    assert stack.depth == 2


@pytest.mark.parametrize('kwargs', [{'sigma': 0}, {'layers': 0},
                                    {'dim': 0}])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        PropagationConfig(**kwargs)


@pytest.mark.parametrize('seed', range(10))
def test_blocks_are_more_similar_within_than_across(seed):
    # two disconnected communities of 10 users and 5 items each
    seqs = {u: [5 * (u // 10) + k for k in range(5)] for u in range(20)}
    graph = build_graph(seqs, 20, 10)
    omega = random_feature_propagation(
        graph, PropagationConfig(sigma=5.0, layers=4, dim=32, seed=seed))
    within, across = block_similarity(omega.user_rows,
                                      np.arange(20) // 10)
    assert within > across


def test_propagation_is_linear_in_the_initial_embeddings():
    rng = np.random.default_rng(2)
    for _ in range(10):
        graph = _random_graph(rng, max_nodes=80)
        a, b = rng.normal(size=2)
        e1 = rng.normal(0, 5, size=(graph.num_nodes, 6))
        e2 = rng.normal(0, 5, size=(graph.num_nodes, 6))
        mixed = propagate_matrix(graph, a * e1 + b * e2, 3).layers
        first = propagate_matrix(graph, e1, 3).layers
        second = propagate_matrix(graph, e2, 3).layers
        for got, x, y in zip(mixed, first, second):
            np.testing.assert_allclose(got, a * x + b * y, rtol=0, atol=1e-6)


def test_normalized_adjacency_is_symmetric():
    rng = np.random.default_rng(3)
    for _ in range(20):
        norm = _random_graph(rng).normalized_adjacency()
        assert abs(norm - norm.T).max() <= 1e-12
        assert norm.shape[0] == norm.shape[1]


def test_init_samples_match_sigma():
    graph = build_graph({u: [u] for u in range(2000)}, 2000, 2000)
    config = PropagationConfig(sigma=5.0, layers=1, dim=1000, seed=0)
    e0 = init_embeddings(graph, config).layers[0]
    assert e0.size == 4 * 10**6
    assert abs(e0.mean()) <= 0.01
    assert e0.std() == pytest.approx(5.0, rel=0.02)
