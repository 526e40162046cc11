"""Hierarchical anomaly detectors and the streaming fit/detect/update loop.

Three detectors operate against a fitted model:

* ``prob``  -- scores a snapshot by its exact log-probability under the
  model, decomposed into per-node and per-community terms; p-values by
  Monte-Carlo rank.
* ``stats`` -- scores each node by the joint likelihood of its internal
  (Binomial) and external (Poisson) degree; community/graph p-values by
  Monte-Carlo rank on the product score, node p-values by exact
  enumeration.
* ``baseline`` -- graph-level only: product of one-sided Gaussian tail
  probabilities of mean degree, mean clustering coefficient, and the
  spectral norm of the adjacency residual.

All probability arithmetic is in natural-log space; -inf marks
zero-probability events and NaN never escapes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats as spstats

from .gbter import (
    GbterParams,
    expected_adjacency,
    excess_degrees,
    pair_indices,
    pair_probabilities,
    sample_graph,
    sample_pair_matrix,
)
from .graphs import (
    GraphFormatError,
    GraphSequence,
    LabeledGraph,
    Partition,
    Universe,
    split_degree,
)
from .fitting import (
    DEFAULT_DEGREE_PRIOR,
    DEFAULT_DENSITY_PRIOR,
    MclConfig,
    PosteriorState,
    fit_gbter,
    markov_cluster,
    update,
)
from .graphs import aggregate_counts, aggregate_exponential

LogProb = float

PROB = "prob"
STATS = "stats"
BASELINE = "baseline"
ALL_DETECTORS = (PROB, STATS, BASELINE)


# ---------------------------------------------------------------------------
# Probability detector scoring
# ---------------------------------------------------------------------------

class _PairIncidence:
    """Node-by-pair incidence in canonical pair order, with community masks."""

    def __init__(self, n: int, partition: Partition | None = None):
        iu, ju = pair_indices(n)
        self.iu, self.ju = iu, ju
        inc = np.zeros((n, iu.size))
        cols = np.arange(iu.size)
        inc[iu, cols] = 1.0
        inc[ju, cols] = 1.0
        self.inc = inc
        if partition is not None:
            assign = partition.assignment
            self.within = assign[iu] == assign[ju]


def _edge_vector(g: LabeledGraph, iu: np.ndarray, ju: np.ndarray) -> np.ndarray:
    e = np.zeros(iu.size, dtype=bool)
    if g.edges:
        lut = {(int(a), int(b)): k for k, (a, b) in enumerate(zip(iu, ju))}
        for a, b in g.edges:
            e[lut[(a, b)]] = True
    return e


class EdgeProbScorer:
    """Per-node log-probability under the pairwise Bernoulli model.

    The sum of non-edge terms is cached once per parameter set; each
    present edge then contributes log P - log(1-P) on top.
    """

    def __init__(self, params: GbterParams):
        self.params = params
        self.n = params.n
        self._pairs = _PairIncidence(self.n)
        probs = pair_probabilities(params)
        with np.errstate(divide="ignore"):
            logp = np.log(probs)
            log1mp = np.log1p(-probs)
        finite = (probs > 0.0) & (probs < 1.0)
        self._logp = logp
        self._log1mp = log1mp
        self._delta = np.where(finite, logp - log1mp, 0.0)
        self._must_edge = probs >= 1.0
        self._must_gap = probs <= 0.0
        base = np.where(finite, log1mp, 0.0)
        self._node_base = self._pairs.inc @ base
        self._weighted_inc = self._pairs.inc * self._delta

    def edge_vector(self, g: LabeledGraph) -> np.ndarray:
        return _edge_vector(g, self._pairs.iu, self._pairs.ju)

    def node_log_probs(self, g: LabeledGraph) -> np.ndarray:
        """Log-probability of each node's full incident edge/non-edge pattern."""
        e = self.edge_vector(g)
        scores = self._node_base + self._weighted_inc @ e
        impossible = (self._must_edge & ~e) | (self._must_gap & e)
        if impossible.any():
            scores = scores.copy()
            scores[(self._pairs.inc @ impossible) > 0] = -np.inf
        return scores

    def node_log_probs_batch(self, edge_rows: np.ndarray) -> np.ndarray:
        """Node scores for many samples drawn from these same parameters.

        edge_rows is a boolean (m, n_pairs) matrix as produced by
        sample_pair_matrix; such samples never violate 0/1 pairs.
        """
        return self._node_base[None, :] + edge_rows.astype(float) @ self._weighted_inc.T


def graph_log_prob(params: GbterParams, g: LabeledGraph) -> LogProb:
    """Natural-log probability of g: product over all pairs of edge/non-edge terms."""
    if g.universe != params.universe:
        raise ValueError("graph universe does not match parameters")
    iu, ju = pair_indices(params.n)
    probs = pair_probabilities(params)
    e = _edge_vector(g, iu, ju)
    with np.errstate(divide="ignore"):
        terms = np.where(e, np.log(probs), np.log1p(-probs))
    return float(terms.sum())


def node_log_prob(params: GbterParams, g: LabeledGraph, i: int) -> LogProb:
    """Log-probability of node i's incident pattern over the other n-1 nodes."""
    if not (0 <= i < params.n):
        raise ValueError(f"unknown node index {i}")
    return float(EdgeProbScorer(params).node_log_probs(g)[i])


def subgraph_log_prob(params: GbterParams, g: LabeledGraph, nodes: Iterable[int]) -> LogProb:
    """Half the sum of member node log-probabilities.

    With the full universe this equals graph_log_prob, and summing over
    the communities of any partition reproduces it as well.
    """
    members = set(int(i) for i in nodes)
    if not members:
        return 0.0
    if not all(0 <= i < params.n for i in members):
        raise ValueError("subgraph contains unknown node indices")
    scores = EdgeProbScorer(params).node_log_probs(g)
    return float(0.5 * sum(scores[i] for i in sorted(members)))


# ---------------------------------------------------------------------------
# Statistics detector scoring
# ---------------------------------------------------------------------------

class DegreeModelScorer:
    """Joint internal/external degree likelihood per node.

    Internal degree is Binomial(|C|-1, p); external degree is
    Poisson(eps). Log-pmf tables are precomputed per node, optionally
    renormalizing the Poisson over the feasible range 0..n-1.
    """

    def __init__(self, params: GbterParams, truncate_poisson: bool = False):
        self.params = params
        self.truncate_poisson = truncate_poisson
        n = params.n
        part = params.partition
        self._pairs = _PairIncidence(n, part)
        assign = part.assignment
        sizes = np.array([len(c) for c in part.communities])
        m = sizes[assign] - 1  # internal-degree support per node
        p = np.asarray(params.density)[assign]
        eps = excess_degrees(params)
        max_m = int(m.max()) if n else 0
        din_tab = np.full((n, max_m + 1), -np.inf)
        dex_tab = np.full((n, n), -np.inf)
        ks = np.arange(max_m + 1)
        kx = np.arange(n)
        for i in range(n):
            din_tab[i, : m[i] + 1] = spstats.binom.logpmf(ks[: m[i] + 1], m[i], p[i])
            row = spstats.poisson.logpmf(kx, eps[i]) if n else kx
            if truncate_poisson:
                norm = _logsumexp(row)
                row = row - norm if np.isfinite(norm) else row
            dex_tab[i] = row
        self._din_tab = din_tab
        self._dex_tab = dex_tab
        within = self._pairs.within
        self._inc_in = self._pairs.inc * within
        self._inc_ex = self._pairs.inc * ~within
        self._node_idx = np.arange(n)

    def degrees(self, edge_rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(d_in, d_ex) integer matrices for boolean (m, n_pairs) edge rows."""
        e = edge_rows.astype(float)
        d_in = np.rint(e @ self._inc_in.T).astype(np.int64)
        d_ex = np.rint(e @ self._inc_ex.T).astype(np.int64)
        return d_in, d_ex

    def node_log_probs_batch(self, edge_rows: np.ndarray) -> np.ndarray:
        d_in, d_ex = self.degrees(edge_rows)
        return self._din_tab[self._node_idx[None, :], d_in] + self._dex_tab[self._node_idx[None, :], d_ex]

    def node_log_probs(self, g: LabeledGraph) -> np.ndarray:
        e = _edge_vector(g, self._pairs.iu, self._pairs.ju)
        return self.node_log_probs_batch(e[None, :])[0]


def _logsumexp(x: np.ndarray) -> float:
    hi = np.max(x)
    if not np.isfinite(hi):
        return float(hi)
    return float(hi + np.log(np.exp(x - hi).sum()))


def stats_node_log_prob(
    params: GbterParams, g: LabeledGraph, i: int, truncate_poisson: bool = False
) -> LogProb:
    """Log joint probability of node i's internal and external degree."""
    if not (0 <= i < params.n):
        raise ValueError(f"unknown node index {i}")
    d_in, d_ex = split_degree(g, i, params.partition)
    cid = params.partition.community_of(i)
    m = len(params.partition.communities[cid]) - 1
    p = params.density[cid]
    eps = float(excess_degrees(params)[i])
    log_in = float(spstats.binom.logpmf(d_in, m, p))
    log_ex = float(spstats.poisson.logpmf(d_ex, eps))
    if truncate_poisson:
        support = np.arange(params.n)
        log_ex -= _logsumexp(spstats.poisson.logpmf(support, eps))
    return log_in + log_ex


def stats_subgraph_log_prob(
    params: GbterParams, g: LabeledGraph, nodes: Iterable[int], truncate_poisson: bool = False
) -> LogProb:
    """Sum of member node degree-model log-probabilities (nodes are units)."""
    members = set(int(i) for i in nodes)
    if not members:
        return 0.0
    if not all(0 <= i < params.n for i in members):
        raise ValueError("subgraph contains unknown node indices")
    scorer = DegreeModelScorer(params, truncate_poisson)
    scores = scorer.node_log_probs(g)
    return float(sum(scores[i] for i in sorted(members)))


# Relative slack when comparing joint probabilities for tie inclusion; two
# mathematically equal products computed along different routes must land in
# the same side of the cut.
_TIE_RTOL = 1e-12


def stats_node_pvalue_exact(
    params: GbterParams,
    g: LabeledGraph,
    i: int,
    truncate_poisson: bool = False,
    tail_eps: float = 1e-12,
) -> float:
    """Exact p-value of node i's degree pair under the statistics model.

    Sums the joint probability of every (d_in, d_ex) outcome whose joint
    probability is <= the observed one. The Poisson range is enumerated
    until the remaining tail is below tail_eps; that tail is added to the
    p-value as conservatively anomalous.
    """
    d_in, d_ex = split_degree(g, i, params.partition)
    cid = params.partition.community_of(i)
    m = len(params.partition.communities[cid]) - 1
    p = params.density[cid]
    eps = float(excess_degrees(params)[i])

    pmf_in = spstats.binom.pmf(np.arange(m + 1), m, p)
    if truncate_poisson:
        hi = params.n - 1
        pmf_ex = spstats.poisson.pmf(np.arange(hi + 1), eps)
        total = pmf_ex.sum()
        pmf_ex = pmf_ex / total if total > 0 else pmf_ex
        tail = 0.0
    else:
        hi = max(d_ex, int(spstats.poisson.isf(tail_eps, eps)) if eps > 0 else 0)
        while spstats.poisson.sf(hi, eps) >= tail_eps:
            hi += 1
        pmf_ex = spstats.poisson.pmf(np.arange(hi + 1), eps)
        tail = float(spstats.poisson.sf(hi, eps))

    joint = np.outer(pmf_in, pmf_ex)
    observed = joint[d_in, d_ex]
    pv = float(joint[joint <= observed * (1.0 + _TIE_RTOL)].sum()) + tail
    return min(1.0, pv)


# ---------------------------------------------------------------------------
# Monte-Carlo p-values
# ---------------------------------------------------------------------------

def rank_pvalue(sample_scores: np.ndarray, observed: float) -> float:
    """Add-one rank estimate (#{samples <= observed} + 1) / (M + 1); never 0."""
    sample_scores = np.asarray(sample_scores)
    m = sample_scores.shape[0]
    return (int(np.count_nonzero(sample_scores <= observed)) + 1) / (m + 1)


def mc_pvalue(
    score_fn: Callable[[LabeledGraph], float],
    params: GbterParams,
    observed_score: float,
    m_samples: int,
    rng: np.random.Generator,
) -> float:
    """Monte-Carlo p-value of an observed score at any level.

    Draws m_samples graphs from the model, scores each with score_fn, and
    returns the add-one rank of the observed score.
    """
    if m_samples < 1:
        raise ValueError("m_samples must be >= 1")
    scores = np.array([score_fn(sample_graph(params, rng)) for _ in range(m_samples)])
    return rank_pvalue(scores, observed_score)


# ---------------------------------------------------------------------------
# Gaussian baseline
# ---------------------------------------------------------------------------

def power_iteration_spectral_norm(
    mat: np.ndarray, rel_tol: float = 1e-8, max_iters: int = 200_000, seed: int = 0
) -> float:
    """Largest eigenvalue modulus of a symmetric matrix by power iteration.

    The iterate's norm converges linearly; the observed contraction rate
    extrapolates a residual-error bound, and iteration stops once that
    bound is below rel_tol twice in a row (or at max_iters).
    """
    mat = np.asarray(mat, dtype=float)
    n = mat.shape[0]
    if n == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    est_prev = 0.0
    change_prev = np.inf
    stable = 0
    est = 0.0
    for _ in range(max_iters):
        y = mat @ x
        est = float(np.linalg.norm(y))
        if est == 0.0:
            return 0.0
        x = y / est
        change = abs(est - est_prev)
        if change == 0.0:
            err_bound = 0.0
        elif np.isfinite(change_prev) and change_prev > 0.0:
            rate = change / change_prev
            err_bound = change * rate / (1.0 - rate) if rate < 1.0 else np.inf
        else:
            err_bound = np.inf
        if err_bound <= rel_tol * max(est, 1e-300):
            stable += 1
            if stable >= 2:
                return est
        else:
            stable = 0
        est_prev = est
        change_prev = change
    return est


def average_clustering(g: LabeledGraph) -> float:
    """Mean local clustering coefficient; nodes of degree < 2 contribute 0."""
    a = g.adjacency()
    deg = a.sum(axis=1)
    tri = np.diag(a @ a @ a) / 2.0
    denom = deg * (deg - 1.0) / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        local = np.where(denom > 0, tri / denom, 0.0)
    return float(local.mean()) if g.n else 0.0


def triangle_density(g: LabeledGraph) -> float:
    """Fraction of node triples that form triangles: T / C(n, 3).

    For an Erdős-Rényi graph with edge probability p this has expectation
    exactly p^3 (each specific triple closes with probability p^3).
    """
    if g.n < 3:
        return 0.0
    a = g.adjacency()
    triangles = float(np.trace(a @ a @ a)) / 6.0
    return triangles / math.comb(g.n, 3)


def baseline_stats(g: LabeledGraph, params: GbterParams) -> tuple[float, float, float]:
    """(mean degree, mean clustering coefficient, residual spectral norm)."""
    a = g.adjacency()
    x1 = float(g.degrees().mean()) if g.n else 0.0
    x2 = average_clustering(g)
    residual = a - expected_adjacency(params)
    x3 = power_iteration_spectral_norm(residual)
    return x1, x2, x3


class GaussianBaselineState:
    """Running mean/std (Welford) of the three baseline statistics."""

    def __init__(self, count: int = 0, means: Sequence[float] = (0, 0, 0), m2: Sequence[float] = (0, 0, 0)):
        self.count = int(count)
        self._means = np.array(means, dtype=float)
        self._m2 = np.array(m2, dtype=float)

    def update(self, x: Sequence[float]) -> None:
        x = np.asarray(x, dtype=float)
        self.count += 1
        delta = x - self._means
        self._means += delta / self.count
        self._m2 += delta * (x - self._means)

    @property
    def ready(self) -> bool:
        return self.count >= 2

    @property
    def means(self) -> np.ndarray:
        return self._means.copy()

    @property
    def stds(self) -> np.ndarray:
        if not self.ready:
            raise ValueError("standard deviation undefined with fewer than 2 observations")
        return np.sqrt(self._m2 / (self.count - 1))

    def to_dict(self) -> dict:
        return {"count": self.count, "means": self._means.tolist(), "m2": self._m2.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "GaussianBaselineState":
        return cls(doc["count"], doc["means"], doc["m2"])


def baseline_pvalue(state: GaussianBaselineState, x1: float, x2: float, x3: float) -> float:
    """Product of the three one-sided lower-tail Gaussian probabilities.

    By construction this can only flag abnormally LOW statistics; an
    abnormally high value pushes its factor toward 1.
    """
    if not state.ready:
        raise ValueError("baseline needs at least 2 training observations")
    stds = state.stds
    if np.any(stds == 0.0):
        raise ValueError("insufficient training variance in baseline statistics")
    z = (np.array([x1, x2, x3]) - state.means) / stds
    return float(np.prod(spstats.norm.cdf(z)))


# ---------------------------------------------------------------------------
# Reports and configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DetectorConfig:
    """Monte-Carlo size, seed, per-level thresholds, Poisson truncation."""

    mc_samples: int = 2000
    seed: int = 0
    alpha_graph: float = 0.05
    alpha_community: float = 0.05
    alpha_node: float = 0.05
    truncate_poisson: bool = False

    def __post_init__(self):
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be >= 1")
        for name in ("alpha_graph", "alpha_community", "alpha_node"):
            a = getattr(self, name)
            if not (0.0 <= a <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass(frozen=True)
class PipelineConfig:
    """Everything needed to replay a fit + streaming-detection run."""

    detectors: tuple[str, ...] = ALL_DETECTORS
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    density_prior: tuple[float, float] = DEFAULT_DENSITY_PRIOR
    degree_prior: tuple[float, float] = DEFAULT_DEGREE_PRIOR
    mcl: MclConfig = field(default_factory=MclConfig)
    weighting: str = "counts"
    gamma: float = 0.5
    recluster_every: int = 0
    update_with_anomalies: bool = True

    def __post_init__(self):
        unknown = set(self.detectors) - set(ALL_DETECTORS)
        if unknown:
            raise ValueError(f"unknown detectors: {sorted(unknown)}")
        if self.weighting not in ("counts", "exponential"):
            raise ValueError(f"unknown weighting {self.weighting!r}")

    def to_dict(self) -> dict:
        return {
            "detectors": list(self.detectors),
            "mc_samples": self.detector.mc_samples,
            "seed": self.detector.seed,
            "thresholds": {
                "graph": self.detector.alpha_graph,
                "community": self.detector.alpha_community,
                "node": self.detector.alpha_node,
            },
            "truncate_poisson": self.detector.truncate_poisson,
            "density_prior": list(self.density_prior),
            "degree_prior": list(self.degree_prior),
            "mcl": {
                "expansion": self.mcl.expansion,
                "inflation": self.mcl.inflation,
                "self_loop_weight": self.mcl.self_loop_weight,
                "prune_threshold": self.mcl.prune_threshold,
                "max_iters": self.mcl.max_iters,
                "convergence_eps": self.mcl.convergence_eps,
            },
            "weighting": self.weighting,
            "gamma": self.gamma,
            "recluster_every": self.recluster_every,
            "update_with_anomalies": self.update_with_anomalies,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        base = cls()
        thresholds = doc.get("thresholds", {})
        det = DetectorConfig(
            mc_samples=int(doc.get("mc_samples", base.detector.mc_samples)),
            seed=int(doc.get("seed", base.detector.seed)),
            alpha_graph=float(thresholds.get("graph", base.detector.alpha_graph)),
            alpha_community=float(thresholds.get("community", base.detector.alpha_community)),
            alpha_node=float(thresholds.get("node", base.detector.alpha_node)),
            truncate_poisson=bool(doc.get("truncate_poisson", base.detector.truncate_poisson)),
        )
        mcl_doc = doc.get("mcl", {})
        mcl = MclConfig(
            expansion=int(mcl_doc.get("expansion", base.mcl.expansion)),
            inflation=float(mcl_doc.get("inflation", base.mcl.inflation)),
            self_loop_weight=float(mcl_doc.get("self_loop_weight", base.mcl.self_loop_weight)),
            prune_threshold=float(mcl_doc.get("prune_threshold", base.mcl.prune_threshold)),
            max_iters=int(mcl_doc.get("max_iters", base.mcl.max_iters)),
            convergence_eps=float(mcl_doc.get("convergence_eps", base.mcl.convergence_eps)),
        )
        return cls(
            detectors=tuple(doc.get("detectors", base.detectors)),
            detector=det,
            density_prior=tuple(doc.get("density_prior", base.density_prior)),
            degree_prior=tuple(doc.get("degree_prior", base.degree_prior)),
            mcl=mcl,
            weighting=doc.get("weighting", base.weighting),
            gamma=float(doc.get("gamma", base.gamma)),
            recluster_every=int(doc.get("recluster_every", base.recluster_every)),
            update_with_anomalies=bool(doc.get("update_with_anomalies", base.update_with_anomalies)),
        )


@dataclass(frozen=True)
class AnomalyReport:
    """Per-level p-values and threshold flags for one snapshot and detector."""

    detector: str
    snapshot: str
    graph_pvalue: float
    graph_flag: bool
    community_pvalues: dict[int, float]
    community_flags: dict[int, bool]
    community_members: dict[int, tuple[str, ...]]
    node_pvalues: dict[str, float]
    node_flags: dict[str, bool]
    thresholds: tuple[float, float, float]

    def to_dict(self) -> dict:
        return {
            "detector": self.detector,
            "snapshot": self.snapshot,
            "graph": {"pvalue": self.graph_pvalue, "flag": self.graph_flag},
            "communities": {
                str(cid): {
                    "pvalue": self.community_pvalues[cid],
                    "flag": self.community_flags[cid],
                    "members": list(self.community_members[cid]),
                }
                for cid in sorted(self.community_pvalues)
            },
            "nodes": {
                lab: {"pvalue": self.node_pvalues[lab], "flag": self.node_flags[lab]}
                for lab in sorted(self.node_pvalues)
            },
            "thresholds": {
                "graph": self.thresholds[0],
                "community": self.thresholds[1],
                "node": self.thresholds[2],
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AnomalyReport":
        try:
            comms = doc.get("communities", {})
            nodes = doc.get("nodes", {})
            th = doc["thresholds"]
            return cls(
                detector=doc["detector"],
                snapshot=str(doc["snapshot"]),
                graph_pvalue=float(doc["graph"]["pvalue"]),
                graph_flag=bool(doc["graph"]["flag"]),
                community_pvalues={int(c): float(v["pvalue"]) for c, v in comms.items()},
                community_flags={int(c): bool(v["flag"]) for c, v in comms.items()},
                community_members={int(c): tuple(v["members"]) for c, v in comms.items()},
                node_pvalues={lab: float(v["pvalue"]) for lab, v in nodes.items()},
                node_flags={lab: bool(v["flag"]) for lab, v in nodes.items()},
                thresholds=(float(th["graph"]), float(th["community"]), float(th["node"])),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphFormatError(f"bad report document: {exc}") from None


def save_report(report: AnomalyReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report(path: str) -> AnomalyReport:
    with open(path, encoding="utf-8") as fh:
        return AnomalyReport.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Streaming pipeline
# ---------------------------------------------------------------------------

class StreamPipeline:
    """Streaming loop: score each new snapshot, then absorb it.

    Parameters are learned from a training prefix; each step produces one
    report per enabled detector, after which the posteriors (and baseline
    moments) are updated with the new snapshot. One set of mc_samples
    model draws per Monte-Carlo detector per step is shared across the
    graph, community, and node levels.
    """

    def __init__(
        self,
        universe: Universe,
        posterior: PosteriorState,
        config: PipelineConfig,
        rng: np.random.Generator | None = None,
        history: Sequence[LabeledGraph] | None = None,
        baseline: GaussianBaselineState | None = None,
    ):
        self.universe = universe
        self.posterior = posterior
        self.config = config
        self.rng = rng if rng is not None else np.random.default_rng(config.detector.seed)
        self.history: list[LabeledGraph] = list(history or [])
        self.baseline = baseline if baseline is not None else GaussianBaselineState()
        self._steps = 0
        self._params: GbterParams | None = None

    @property
    def params(self) -> GbterParams:
        """Current point-estimate model (posterior modes)."""
        if self._params is None:
            self._params = self.posterior.mple_params(self.universe)
        return self._params

    @classmethod
    def fit(
        cls,
        seq: GraphSequence,
        config: PipelineConfig,
        rng: np.random.Generator | None = None,
        partition: Partition | None = None,
    ) -> "StreamPipeline":
        """Fit on a training sequence, priming the baseline moments as well."""
        _, posterior = fit_gbter(
            seq,
            mcl_cfg=config.mcl,
            density_prior=config.density_prior,
            degree_prior=config.degree_prior,
            weighting=config.weighting,
            gamma=config.gamma,
            partition=partition,
        )
        pipe = cls(seq.universe, posterior, config, rng=rng, history=list(seq.snapshots))
        if BASELINE in config.detectors:
            params = pipe.params
            for g in seq:
                pipe.baseline.update(baseline_stats(g, params))
        return pipe

    def step(self, g: LabeledGraph, key: str) -> list[AnomalyReport]:
        """Score one snapshot with every enabled detector, then update."""
        if g.universe != self.universe:
            raise ValueError("snapshot universe does not match the pipeline")
        params = self.params
        cfg = self.config
        det = cfg.detector
        reports: list[AnomalyReport] = []
        x_stats: tuple[float, float, float] | None = None

        if PROB in cfg.detectors:
            scorer = EdgeProbScorer(params)
            samples = sample_pair_matrix(params, det.mc_samples, self.rng)
            node_obs = scorer.node_log_probs(g)
            node_samp = scorer.node_log_probs_batch(samples)
            reports.append(
                self._hierarchical_report(PROB, key, params, node_obs, node_samp, half=True)
            )

        if STATS in cfg.detectors:
            scorer = DegreeModelScorer(params, det.truncate_poisson)
            samples = sample_pair_matrix(params, det.mc_samples, self.rng)
            node_obs = scorer.node_log_probs(g)
            node_samp = scorer.node_log_probs_batch(samples)
            exact = np.array(
                [
                    stats_node_pvalue_exact(params, g, i, det.truncate_poisson)
                    for i in range(params.n)
                ]
            )
            reports.append(
                self._hierarchical_report(
                    STATS, key, params, node_obs, node_samp, half=False, node_pvalues=exact
                )
            )

        if BASELINE in cfg.detectors:
            x_stats = baseline_stats(g, params)
            pv = baseline_pvalue(self.baseline, *x_stats)
            reports.append(
                AnomalyReport(
                    BASELINE, key, pv, pv <= det.alpha_graph,
                    {}, {}, {}, {}, {},
                    (det.alpha_graph, det.alpha_community, det.alpha_node),
                )
            )

        flagged = any(r.graph_flag for r in reports)
        if cfg.update_with_anomalies or not flagged:
            self.posterior = update(self.posterior, g)
            self._params = None
            self.history.append(g)
            if BASELINE in cfg.detectors:
                if x_stats is None:
                    x_stats = baseline_stats(g, params)
                self.baseline.update(x_stats)
            self._steps += 1
            if cfg.recluster_every and self._steps % cfg.recluster_every == 0:
                self._recluster()
        return reports

    def _recluster(self) -> None:
        seq = GraphSequence(self.universe, self.history)
        if self.config.weighting == "exponential":
            agg = aggregate_exponential(seq, self.config.gamma)
        else:
            agg = aggregate_counts(seq)
        part = markov_cluster(agg, self.config.mcl).partition
        if part != self.posterior.partition:
            self.posterior = self.posterior.with_partition(part, seq)
            self._params = None

    def _hierarchical_report(
        self,
        detector: str,
        key: str,
        params: GbterParams,
        node_obs: np.ndarray,
        node_samp: np.ndarray,
        half: bool,
        node_pvalues: np.ndarray | None = None,
    ) -> AnomalyReport:
        det = self.config.detector
        factor = 0.5 if half else 1.0
        part = params.partition
        cmat = np.zeros((len(part), params.n))
        for cid, community in enumerate(part.communities):
            cmat[cid, sorted(community)] = 1.0

        graph_obs = factor * float(node_obs.sum())
        graph_samp = factor * node_samp.sum(axis=1)
        comm_obs = factor * (cmat @ node_obs)
        comm_samp = factor * (node_samp @ cmat.T)
        m = node_samp.shape[0]

        graph_pv = rank_pvalue(graph_samp, graph_obs)
        comm_pv = (np.count_nonzero(comm_samp <= comm_obs[None, :], axis=0) + 1) / (m + 1)
        if node_pvalues is None:
            node_pv = (np.count_nonzero(node_samp <= node_obs[None, :], axis=0) + 1) / (m + 1)
        else:
            node_pv = node_pvalues

        labs = params.universe.labels
        return AnomalyReport(
            detector=detector,
            snapshot=key,
            graph_pvalue=float(graph_pv),
            graph_flag=bool(graph_pv <= det.alpha_graph),
            community_pvalues={cid: float(v) for cid, v in enumerate(comm_pv)},
            community_flags={cid: bool(v <= det.alpha_community) for cid, v in enumerate(comm_pv)},
            community_members={
                cid: tuple(labs[i] for i in sorted(c)) for cid, c in enumerate(part.communities)
            },
            node_pvalues={labs[i]: float(v) for i, v in enumerate(node_pv)},
            node_flags={labs[i]: bool(v <= det.alpha_node) for i, v in enumerate(node_pv)},
            thresholds=(det.alpha_graph, det.alpha_community, det.alpha_node),
        )
