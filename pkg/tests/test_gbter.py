import itertools
import math

import numpy as np
import pytest

from graphwatch.gbter import (
    GbterParams,
    edge_probability,
    excess_degrees,
    expected_adjacency,
    load_params,
    pair_indices,
    sample_graph,
    sample_pair_matrix,
    save_params,
    validate_chung_lu,
)
from graphwatch.graphs import LabeledGraph, Partition, Universe


def make_params(n, communities, density, lam):
    uni = Universe([f"v{i}" for i in range(n)])
    part = Partition(communities, n)
    return GbterParams(uni, part, tuple(density), tuple(lam))


def random_params(n, rng, p_range=(0.2, 0.9), lam_range=(0.5, 2.5)):
    """Random small model with moderate probabilities everywhere."""
    uni = Universe([f"v{i}" for i in range(n)])
    assign = rng.integers(0, max(2, n // 2), size=n)
    # relabel to dense community ids
    _, dense = np.unique(assign, return_inverse=True)
    part = Partition.from_community_of(dense)
    density = rng.uniform(*p_range, size=len(part))
    lam = rng.uniform(*lam_range, size=n)
    return GbterParams(uni, part, tuple(density), tuple(lam))


class TestExcessDegrees:
    def test_formula(self):
        # eps = 5 - 0.8 * 3 = 2.6
        params = make_params(4, [range(4)], [0.8], [5.0, 5.0, 5.0, 5.0])
        assert excess_degrees(params)[0] == pytest.approx(2.6)

    def test_clamped_at_zero(self):
        params = make_params(4, [range(4)], [0.8], [1.0] * 4)
        assert np.all(excess_degrees(params) == 0.0)

    def test_singleton_community(self):
        params = make_params(3, [[0], [1, 2]], [0.5, 0.5], [3.0, 1.0, 1.0])
        assert excess_degrees(params)[0] == pytest.approx(3.0)


class TestEdgeProbability:
    def test_pure_er_within(self):
        params = make_params(4, [range(4)], [0.8], [1.0] * 4)  # all eps 0
        assert edge_probability(params, 0, 1) == pytest.approx(0.8)

    def test_cross_community_chung_lu(self):
        # eps = (2, 3, 3, 4) over singleton/one communities chosen so sum=12
        params = make_params(
            4, [[0], [1], [2], [3]], [0.0] * 4, [2.0, 3.0, 3.0, 4.0]
        )
        assert edge_probability(params, 0, 1) == pytest.approx(2 * 3 / 12)

    def test_within_with_excess(self):
        # p + (1-p) * eps_i eps_j / sum = 0.8 + 0.2 * 1/10 = 0.82
        uni = Universe([f"v{i}" for i in range(6)])
        part = Partition([[0, 1], [2], [3], [4], [5]], 6)
        # choose lambdas so eps = (1, 1, 2, 2, 2, 2), sum = 10
        lam = (0.8 + 1.0, 0.8 + 1.0, 2.0, 2.0, 2.0, 2.0)
        params = GbterParams(uni, part, (0.8, 0, 0, 0, 0), lam)
        assert excess_degrees(params).sum() == pytest.approx(10.0)
        assert edge_probability(params, 0, 1) == pytest.approx(0.82)

    def test_self_pair_rejected(self):
        params = make_params(3, [range(3)], [0.5], [1.0] * 3)
        with pytest.raises(ValueError):
            edge_probability(params, 1, 1)

    def test_symmetry(self):
        rng = np.random.default_rng(5)
        params = random_params(6, rng)
        for i in range(6):
            for j in range(i + 1, 6):
                assert edge_probability(params, i, j) == edge_probability(params, j, i)


class TestValidateChungLu:
    def test_balanced_weights_ok(self):
        params = make_params(4, [[0], [1], [2], [3]], [0.0] * 4, [2.0] * 4)
        assert validate_chung_lu(params) == []

    def test_overweight_pair_reported(self):
        # eps = [10, 10], sum = 20 < 100
        params = make_params(2, [[0], [1]], [0.0] * 2, [10.0, 10.0])
        assert validate_chung_lu(params) == [(0, 1)]

    def test_all_zero_excess(self):
        params = make_params(3, [range(3)], [0.9], [0.0] * 3)
        assert validate_chung_lu(params) == []


class TestExpectedAdjacency:
    def test_two_node_er(self):
        params = make_params(2, [range(2)], [0.5], [0.0, 0.0])
        mat = expected_adjacency(params)
        assert mat[0, 1] == pytest.approx(0.5)
        assert mat[0, 0] == 0.0

    def test_matches_edge_probability_entrywise(self):
        rng = np.random.default_rng(11)
        params = random_params(7, rng)
        mat = expected_adjacency(params)
        for i in range(7):
            for j in range(7):
                if i != j:
                    assert mat[i, j] == pytest.approx(edge_probability(params, i, j), abs=1e-15)

    def test_row_sums_equal_bernoulli_mean_sum(self):
        # oracle: brute-force summation of per-pair means
        rng = np.random.default_rng(13)
        params = random_params(8, rng)
        mat = expected_adjacency(params)
        brute = np.array(
            [sum(edge_probability(params, i, j) for j in range(8) if j != i) for i in range(8)]
        )
        np.testing.assert_allclose(mat.sum(axis=1), brute, atol=1e-12)

    def test_row_sums_approach_lambda(self):
        # the Chung-Lu overlap/self terms make this approximate, not exact
        params = make_params(4, [range(4)], [0.2], [3.0] * 4)
        lam = np.asarray(params.expected_degree)
        assert np.all(np.abs(expected_adjacency(params).sum(axis=1) - lam) <= 0.35 * lam)


class TestSampling:
    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(3)
        params = random_params(6, rng)
        g1 = sample_graph(params, np.random.default_rng(42))
        g2 = sample_graph(params, np.random.default_rng(42))
        assert g1 == g2

    def test_saturated_communities_become_cliques(self):
        params = make_params(6, [[0, 1, 2], [3, 4, 5]], [1.0, 1.0], [1.0] * 6)
        g = sample_graph(params, np.random.default_rng(0))
        expected = {(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)}
        assert g.edges == frozenset(expected)

    def test_degenerate_empty(self):
        params = make_params(5, [range(5)], [0.0], [0.0] * 5)
        g = sample_graph(params, np.random.default_rng(0))
        assert g.edges == frozenset()

    def test_empirical_mean_degree_matches_exact_expectation(self):
        # The sampler must reproduce the sum of per-pair Bernoulli means.
        rng = np.random.default_rng(17)
        params = make_params(8, [[0, 1, 2, 3], [4, 5, 6, 7]], [0.7, 0.7], [4.0] * 8)
        exact = expected_adjacency(params).sum(axis=1)
        m = 4000
        rows = sample_pair_matrix(params, m, rng)
        iu, ju = pair_indices(8)
        deg = np.zeros((m, 8))
        np.add.at(deg.T, iu, rows.T.astype(float))
        np.add.at(deg.T, ju, rows.T.astype(float))
        emp = deg.mean(axis=0)
        se = np.sqrt(exact / m)
        assert np.all(np.abs(emp - exact) <= 4 * se)


class TestNormalizationOracle:
    def enumerate_probability_mass(self, params):
        """Oracle: total probability over all labeled graphs by enumeration."""
        n = params.n
        pairs = list(itertools.combinations(range(n), 2))
        probs = [edge_probability(params, i, j) for i, j in pairs]
        total = 0.0
        for bits in itertools.product([0, 1], repeat=len(pairs)):
            mass = 1.0
            for b, p in zip(bits, probs):
                mass *= p if b else (1.0 - p)
            total += mass
        return total

    def test_mass_sums_to_one(self):
        rng = np.random.default_rng(23)
        for _ in range(5):
            params = random_params(4, rng)
            assert self.enumerate_probability_mass(params) == pytest.approx(1.0, abs=1e-12)


class TestClusteringFidelity:
    def test_er_community_triangle_density_approaches_p_cubed(self):
        # isolated ER(8, 0.8): triangles per node triple -> 0.8^3
        from graphwatch.detectors import triangle_density

        params = make_params(8, [range(8)], [0.8], [0.0] * 8)
        rng = np.random.default_rng(29)
        vals = []
        for _ in range(2000):
            vals.append(triangle_density(sample_graph(params, rng)))
        assert np.mean(vals) == pytest.approx(0.8 ** 3, abs=0.05)


class TestSerialization:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(31)
        params = random_params(6, rng)
        path = tmp_path / "params.json"
        save_params(params, str(path))
        loaded = load_params(str(path))
        assert loaded.universe == params.universe
        assert loaded.partition == params.partition
        assert np.allclose(loaded.density, params.density)
        assert np.allclose(loaded.expected_degree, params.expected_degree)
