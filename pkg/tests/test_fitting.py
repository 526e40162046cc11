import numpy as np
import pytest

from graphwatch.fitting import (
    BetaPosterior,
    GammaPosterior,
    MclConfig,
    PosteriorState,
    fit_density,
    fit_expected_degree,
    fit_gbter,
    load_posterior,
    markov_cluster,
    save_posterior,
    update,
)
from graphwatch.gbter import GbterParams, sample_graph
from graphwatch.graphs import (
    GraphSequence,
    LabeledGraph,
    Partition,
    Universe,
    WeightedAggregate,
    aggregate_exponential,
)


def make_graph(n, edges):
    return LabeledGraph(Universe([f"v{i}" for i in range(n)]), edges)


def clique_edges(nodes):
    nodes = list(nodes)
    return [(a, b) for k, a in enumerate(nodes) for b in nodes[k + 1:]]


class TestMarkovCluster:
    def test_two_cliques_with_bridge(self):
        uni = Universe([f"v{i}" for i in range(8)])
        edges = clique_edges(range(4)) + clique_edges(range(4, 8)) + [(3, 4)]
        agg = WeightedAggregate(uni, {e: 1.0 for e in edges})
        res = markov_cluster(agg)
        assert res.converged
        assert res.partition == Partition([range(4), range(4, 8)], 8)

    def test_no_edges_gives_singletons(self):
        uni = Universe(["a", "b", "c"])
        res = markov_cluster(WeightedAggregate(uni, {}))
        assert res.partition == Partition.singletons(3)

    def test_single_clique(self):
        uni = Universe([f"v{i}" for i in range(5)])
        agg = WeightedAggregate(uni, {e: 1.0 for e in clique_edges(range(5))})
        res = markov_cluster(agg)
        assert res.partition == Partition([range(5)], 5)

    def test_output_is_partition_even_without_convergence(self):
        uni = Universe([f"v{i}" for i in range(8)])
        edges = clique_edges(range(4)) + clique_edges(range(4, 8)) + [(3, 4)]
        agg = WeightedAggregate(uni, {e: 1.0 for e in edges})
        res = markov_cluster(agg, MclConfig(max_iters=1))
        assert not res.converged
        covered = set()
        for c in res.partition.communities:
            covered |= set(c)
        assert covered == set(range(8))

    def test_recovers_experiment_scale_configuration(self):
        # 40 nodes, ten 4-node communities, density 0.8, cross edges weak
        from graphwatch.experiments import build_experiment1

        spec = build_experiment1(seed=3)
        rng = np.random.default_rng(3)
        graphs = [sample_graph(spec.regular_model, rng) for _ in range(100)]
        seq = GraphSequence(spec.regular_model.universe, graphs)
        from graphwatch.graphs import aggregate_counts

        res = markov_cluster(aggregate_counts(seq))
        assert res.partition == spec.regular_model.partition


class TestFitDensity:
    def test_frozen_example(self):
        # |C|=4, N=2, k=[5,4], prior (1,1): alpha_hat=10, beta_hat=4, p=0.75
        uni = Universe([f"v{i}" for i in range(4)])
        part = Partition([range(4)], 4)
        g1 = LabeledGraph(uni, clique_edges(range(4))[:5])
        g2 = LabeledGraph(uni, clique_edges(range(4))[:4])
        posts, points = fit_density(GraphSequence(uni, [g1, g2]), part, prior=(1.0, 1.0))
        assert posts[0] == BetaPosterior(10.0, 4.0)
        assert points[0] == pytest.approx(9 / 12, abs=1e-15)

    def test_saturated_community(self):
        uni = Universe([f"v{i}" for i in range(4)])
        part = Partition([range(4)], 4)
        g = LabeledGraph(uni, clique_edges(range(4)))
        _, points = fit_density(GraphSequence(uni, [g, g, g]), part, prior=(1.0, 1.0))
        assert points[0] == pytest.approx(1.0)

    def test_empty_community(self):
        uni = Universe([f"v{i}" for i in range(4)])
        part = Partition([range(4)], 4)
        g = LabeledGraph(uni, [])
        _, points = fit_density(GraphSequence(uni, [g, g]), part, prior=(1.0, 1.0))
        assert points[0] == pytest.approx(0.0)

    def test_singleton_community_uses_prior_mode(self):
        uni = Universe(["a", "b", "c"])
        part = Partition([[0], [1, 2]], 3)
        g = LabeledGraph(uni, [(1, 2)])
        _, points = fit_density(GraphSequence(uni, [g]), part, prior=(3.0, 2.0))
        assert points[0] == pytest.approx((3 - 1) / (3 + 2 - 2))

    def test_bad_prior(self):
        uni = Universe(["a", "b"])
        part = Partition([range(2)], 2)
        seq = GraphSequence(uni, [LabeledGraph(uni, [])])
        with pytest.raises(ValueError):
            fit_density(seq, part, prior=(0.0, 1.0))

    def test_mode_undefined(self):
        with pytest.raises(ValueError, match="mode undefined"):
            BetaPosterior(0.5, 0.5).mode


class TestFitExpectedDegree:
    def test_frozen_example(self):
        # degrees [5,6,7] on one node, prior (2,2): alpha_hat=20, beta_hat=5
        uni = Universe([f"v{i}" for i in range(8)])
        graphs = []
        for d in (5, 6, 7):
            graphs.append(LabeledGraph(uni, [(0, j) for j in range(1, d + 1)]))
        posts, points = fit_expected_degree(GraphSequence(uni, graphs), prior=(2.0, 2.0))
        assert posts[0] == GammaPosterior(20.0, 5.0)
        assert points[0] == pytest.approx(19 / 5, abs=1e-15)

    def test_all_zero_degrees(self):
        # (2 + 0 - 1) / (2 + 1) = 1/3
        uni = Universe(["a", "b"])
        posts, points = fit_expected_degree(
            GraphSequence(uni, [LabeledGraph(uni, [])]), prior=(2.0, 2.0)
        )
        assert points[0] == pytest.approx(1 / 3, abs=1e-15)

    def test_posterior_concentrates_on_constant_degree(self):
        uni = Universe([f"v{i}" for i in range(5)])
        g = LabeledGraph(uni, [(0, 1), (0, 2), (0, 3)])  # node 0 has degree 3
        seq = GraphSequence(uni, [g] * 400)
        _, points = fit_expected_degree(seq, prior=(2.0, 1.5))
        assert points[0] == pytest.approx(3.0, abs=0.02)

    def test_prior_bounds(self):
        uni = Universe(["a", "b"])
        seq = GraphSequence(uni, [LabeledGraph(uni, [])])
        with pytest.raises(ValueError):
            fit_expected_degree(seq, prior=(1.0, 2.0))
        with pytest.raises(ValueError):
            fit_expected_degree(seq, prior=(2.0, 1.0))


class TestStreamingUpdates:
    def build_state(self, seq, part):
        dens, _ = fit_density(seq, part)
        degs, _ = fit_expected_degree(seq)
        return PosteriorState(part, tuple(dens), tuple(degs))

    def test_empty_graph_update(self):
        uni = Universe(["a", "b", "c"])
        part = Partition([range(3)], 3)
        g0 = LabeledGraph(uni, [(0, 1)])
        state = self.build_state(GraphSequence(uni, [g0]), part)
        new = update(state, LabeledGraph(uni, []))
        for before, after in zip(state.degree_posteriors, new.degree_posteriors):
            assert after.alpha_hat == before.alpha_hat
            assert after.beta_hat == before.beta_hat + 1

    def test_batch_equals_sequential_exactly(self):
        rng = np.random.default_rng(41)
        uni = Universe([f"v{i}" for i in range(6)])
        part = Partition([[0, 1, 2], [3, 4, 5]], 6)
        params = GbterParams(uni, part, (0.7, 0.5), (2.0,) * 6)
        graphs = [sample_graph(params, rng) for _ in range(10)]

        batch = self.build_state(GraphSequence(uni, graphs), part)
        prior_state = PosteriorState(
            part,
            tuple(BetaPosterior(1.0, 1.0) for _ in range(2)),
            tuple(GammaPosterior(2.0, 1.5) for _ in range(6)),
        )
        seq_state = prior_state
        for g in graphs:
            seq_state = update(seq_state, g)
        assert seq_state.density_posteriors == batch.density_posteriors
        assert seq_state.degree_posteriors == batch.degree_posteriors

    def test_update_then_mple_equals_refit(self):
        rng = np.random.default_rng(43)
        uni = Universe([f"v{i}" for i in range(6)])
        part = Partition([[0, 1, 2], [3, 4, 5]], 6)
        params = GbterParams(uni, part, (0.7, 0.5), (2.0,) * 6)
        graphs = [sample_graph(params, rng) for _ in range(6)]
        state = self.build_state(GraphSequence(uni, graphs[:5]), part)
        stepped = update(state, graphs[5]).mple_params(uni)
        refit = self.build_state(GraphSequence(uni, graphs), part).mple_params(uni)
        assert stepped.density == refit.density
        assert stepped.expected_degree == refit.expected_degree

    def test_density_mple_monotone_in_internal_edges(self):
        uni = Universe([f"v{i}" for i in range(4)])
        part = Partition([range(4)], 4)
        sparse = LabeledGraph(uni, clique_edges(range(4))[:2])
        state = self.build_state(GraphSequence(uni, [sparse]), part)
        before = state.mple_params(uni).density[0]
        denser = LabeledGraph(uni, clique_edges(range(4)))  # 6 > current mode
        after = update(state, denser).mple_params(uni).density[0]
        assert after > before

    def test_universe_mismatch(self):
        uni = Universe(["a", "b"])
        part = Partition([range(2)], 2)
        state = self.build_state(GraphSequence(uni, [LabeledGraph(uni, [])]), part)
        with pytest.raises(ValueError):
            update(state, make_graph(3, []))


class TestFitGbter:
    def test_recovers_known_model(self):
        # 8 nodes, 2 well-separated communities; p within 0.05, lambda within 0.5
        rng = np.random.default_rng(47)
        uni = Universe([f"v{i}" for i in range(8)])
        part = Partition([range(4), range(4, 8)], 8)
        truth = GbterParams(uni, part, (0.8, 0.8), (2.8, 2.6, 3.0, 2.8, 2.6, 3.0, 2.8, 2.6))
        graphs = [sample_graph(truth, rng) for _ in range(100)]
        params, _ = fit_gbter(GraphSequence(uni, graphs))
        assert params.partition == part
        assert np.allclose(params.density, truth.density, atol=0.05)
        assert np.allclose(params.expected_degree, truth.expected_degree, atol=0.5)

    def test_two_disjoint_cliques(self):
        uni = Universe([f"v{i}" for i in range(8)])
        g = LabeledGraph(uni, clique_edges(range(4)) + clique_edges(range(4, 8)))
        params, _ = fit_gbter(GraphSequence(uni, [g]))
        assert params.partition == Partition([range(4), range(4, 8)], 8)
        # N=1, k=6 of 6 pairs, Beta(1,1): mode = 6/6 = 1
        assert params.density == (1.0, 1.0)

    def test_exponential_weighting_gamma_zero_clusters_on_newest(self):
        uni = Universe([f"v{i}" for i in range(8)])
        old = LabeledGraph(uni, clique_edges(range(8)))  # one block
        new = LabeledGraph(uni, clique_edges(range(4)) + clique_edges(range(4, 8)))
        seq = GraphSequence(uni, [old, new])
        agg = aggregate_exponential(seq, 0.0)
        res = markov_cluster(agg)
        assert res.partition == Partition([range(4), range(4, 8)], 8)

    def test_external_partition_bypasses_clustering(self):
        uni = Universe([f"v{i}" for i in range(4)])
        g = LabeledGraph(uni, clique_edges(range(4)))
        supplied = Partition([[0, 1], [2, 3]], 4)
        params, _ = fit_gbter(GraphSequence(uni, [g]), partition=supplied)
        assert params.partition == supplied


class TestPosteriorSerialization:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(53)
        uni = Universe([f"v{i}" for i in range(6)])
        part = Partition([[0, 1, 2], [3, 4, 5]], 6)
        params = GbterParams(uni, part, (0.7, 0.5), (2.0,) * 6)
        graphs = [sample_graph(params, rng) for _ in range(5)]
        _, state = fit_gbter(GraphSequence(uni, graphs), partition=part)
        path = tmp_path / "posterior.json"
        save_posterior(state, uni, str(path))
        loaded = load_posterior(str(path), uni)
        assert loaded.partition == state.partition
        assert loaded.density_posteriors == state.density_posteriors
        assert loaded.degree_posteriors == state.degree_posteriors
