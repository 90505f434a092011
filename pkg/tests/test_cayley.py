import numpy as np
import pytest

from app.metrics.cayley import (
    CayleySpec,
    FiniteMetricSpace,
    generate_ball,
    named_graph,
    sample_cc_metric,
    word_length,
    word_lengths,
)
from app.utils.config import InvalidExperimentUsage, OverCapError


@pytest.mark.parametrize("k, size", [(0, 1), (1, 5), (2, 17)], ids=["W0", "W1", "W2"])
def test_ball_sizes(k, size):
    assert generate_ball(CayleySpec(k)).n == size


@pytest.mark.parametrize(
    "element, length",
    [
        ((0, 0, 0), 0),
        ((1, 0, 0), 1),
        ((1, 1, 0), 2),
        ((1, 1, 1), 2),
        ((0, 0, 1), 4),
        ((2, 0, 0), 2),
    ],
    ids=["identity", "generator", "ba", "ab", "commutator", "square"]
)
def test_word_length(element, length):
    assert word_length(element) == length


def test_word_length_over_cap_raises():
    with pytest.raises(OverCapError) as excinfo:
        word_length((0, 0, 100), max_length=4)
    assert excinfo.value.payload["max_length"] == 4


def test_word_lengths_counts_spheres():
    lengths = word_lengths(2)
    assert sorted(lengths.values()).count(1) == 4
    assert sorted(lengths.values()).count(2) == 12


def test_ball_order_and_metric():
    ball = generate_ball(CayleySpec(2))
    assert ball.labels[0] == (0, 0, 0)
    assert np.array_equal(ball.dist[0], [word_length(g) for g in ball.labels])
    ball.validate()
    assert np.array_equal(ball.dist, ball.dist.T)
    assert set(np.unique(ball.dist)) <= {0, 1, 2, 3, 4}


def test_smaller_ball_is_isometric_prefix():
    small, large = generate_ball(CayleySpec(2)), generate_ball(CayleySpec(3))
    assert large.labels[:small.n] == small.labels
    assert np.array_equal(large.dist[:small.n, :small.n], small.dist)


def test_cayley_edges_are_generator_steps():
    ball = generate_ball(CayleySpec(1))
    edges = ball.edges()
    assert len(edges) == 4
    assert all(i == 0 and d == 1 for i, _, d in edges)
    assert ball.to_edge_list().splitlines()[0] == "0 1 1"


def test_radius_over_cap_raises():
    with pytest.raises(OverCapError) as excinfo:
        generate_ball(CayleySpec(3), max_radius=2)
    assert excinfo.value.exit_code == 5
    assert excinfo.value.payload["radius"] == 3


@pytest.mark.parametrize(
    "generators",
    [
        ((1, 0, 0), (0, 1, 0)),
        ((0, 0, 0), (1, 0, 0), (-1, 0, 0)),
    ],
    ids=["not_symmetric", "identity"]
)
def test_invalid_generators_raise(generators):
    with pytest.raises(InvalidExperimentUsage):
        CayleySpec(1, generators)


def test_other_generating_set():
    generators = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (1, 1, 0), (-1, -1, 1))
    ball = generate_ball(CayleySpec(1, generators))
    assert ball.n == 7
    ball.validate()


@pytest.mark.parametrize(
    "name, n, diameter",
    [
        ("path4", 4, 3),
        ("cycle6", 6, 3),
        ("star3", 4, 2),
        ("complete5", 5, 1),
        ("k23", 5, 2),
        ("tree7", 7, None),
    ],
    ids=["path", "cycle", "star", "complete", "bipartite", "tree"]
)
def test_named_graphs(name, n, diameter):
    space = named_graph(name)
    space.validate()
    assert space.n == n
    if diameter is not None:
        assert space.dist.max() == diameter


@pytest.mark.parametrize("name", ["wheel5", "path1", ""], ids=["unknown", "too_small", "empty"])
def test_invalid_graph_names_raise(name):
    with pytest.raises(InvalidExperimentUsage):
        named_graph(name)


def test_sampled_cc_metric_is_a_metric():
    space = sample_cc_metric(8, seed=3)
    space.validate(tol=1e-8)
    assert space.coordinates.shape == (8, 3)


@pytest.mark.parametrize(
    "dist",
    [
        [[0, 1], [2, 0]],
        [[0, 0], [0, 0]],
        [[0, 1, 5], [1, 0, 1], [5, 1, 0]],
        [[1, 1], [1, 0]],
    ],
    ids=["asymmetric", "coincident", "triangle", "diagonal"]
)
def test_validate_rejects_non_metrics(dist):
    with pytest.raises(InvalidExperimentUsage):
        FiniteMetricSpace(np.array(dist, dtype=float)).validate()


def test_space_serialization_and_subspace():
    ball = generate_ball(CayleySpec(1))
    restored = FiniteMetricSpace.from_dict(ball.to_dict())
    assert restored.labels == ball.labels
    assert np.array_equal(restored.dist, ball.dist)

    sub = ball.subspace([0, 2, 4])
    assert sub.n == 3
    assert np.array_equal(sub.dist, ball.dist[np.ix_([0, 2, 4], [0, 2, 4])])


def test_bad_weights_raise():
    with pytest.raises(InvalidExperimentUsage):
        FiniteMetricSpace(np.zeros((2, 2)), weights=[1.0, 0.0])


def test_ball_growth_is_polynomial_of_degree_four():
    sizes = {k: generate_ball(CayleySpec(k)).n for k in range(2, 7)}
    assert sizes[2] == 17 and sizes[3] == 53
    spheres = [sizes[k] - sizes[k - 1] for k in range(3, 7)]
    assert all(small < large for small, large in zip(spheres, spheres[1:]))
    slope = np.polyfit(np.log(np.arange(3, 7)), np.log([sizes[k] for k in range(3, 7)]), 1)[0]
    assert 3.0 < slope < 4.5
