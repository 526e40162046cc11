"""Learning model inputs from observed graph sequences.

Communities come from Markov clustering on a weighted aggregate of the
snapshots; per-community densities get Beta-Binomial posteriors and
per-node expected degrees Gamma-Poisson posteriors, both with streaming
conjugate updates. Point estimates are posterior modes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .gbter import GbterParams
from .graphs import (
    GraphFormatError,
    GraphSequence,
    LabeledGraph,
    Partition,
    Universe,
    WeightedAggregate,
    aggregate_counts,
    aggregate_exponential,
)

DEFAULT_DENSITY_PRIOR = (1.0, 1.0)
DEFAULT_DEGREE_PRIOR = (2.0, 1.5)


@dataclass(frozen=True)
class BetaPosterior:
    """Beta(alpha_hat, beta_hat) over one community's internal density."""

    alpha_hat: float
    beta_hat: float

    def __post_init__(self):
        if self.alpha_hat <= 0 or self.beta_hat <= 0:
            raise ValueError("Beta parameters must be positive")

    def updated(self, internal_edges: int, pairs: int) -> "BetaPosterior":
        """Absorb one graph: k internal edges observed out of m pairs."""
        if not (0 <= internal_edges <= pairs):
            raise ValueError("edge count outside 0..pairs")
        return BetaPosterior(self.alpha_hat + internal_edges, self.beta_hat + pairs - internal_edges)

    @property
    def mode(self) -> float:
        """Posterior mode (alpha_hat-1)/(alpha_hat+beta_hat-2)."""
        denom = self.alpha_hat + self.beta_hat - 2.0
        if denom <= 0:
            raise ValueError("posterior mode undefined: alpha_hat + beta_hat <= 2")
        return (self.alpha_hat - 1.0) / denom


@dataclass(frozen=True)
class GammaPosterior:
    """Gamma(alpha_hat, beta_hat) over one node's expected degree."""

    alpha_hat: float
    beta_hat: float

    def __post_init__(self):
        if self.alpha_hat <= 1 or self.beta_hat <= 0:
            raise ValueError("Gamma posterior requires alpha_hat > 1, beta_hat > 0")

    def updated(self, degree: int) -> "GammaPosterior":
        if degree < 0:
            raise ValueError("negative degree")
        return GammaPosterior(self.alpha_hat + degree, self.beta_hat + 1.0)

    @property
    def mode(self) -> float:
        return (self.alpha_hat - 1.0) / self.beta_hat


def _density_point(post: BetaPosterior, prior: tuple[float, float], pairs: int) -> float:
    # Singleton communities have no internal pairs; fall back to the prior
    # mode (0.5 for the uniform prior, whose mode set is the whole interval).
    if pairs == 0:
        a, b = prior
        return (a - 1.0) / (a + b - 2.0) if a + b != 2.0 else 0.5
    return post.mode


@dataclass(frozen=True)
class MclConfig:
    """Markov clustering settings.

    self_loop_weight is relative: the loop added to each node is
    self_loop_weight times the maximum aggregate edge weight (or times 1
    on an edgeless aggregate), which keeps the flow dynamics invariant
    under rescaling of the input weights.
    """

    expansion: int = 2
    inflation: float = 2.5
    self_loop_weight: float = 1.0
    prune_threshold: float = 1e-5
    max_iters: int = 200
    convergence_eps: float = 1e-8

    def __post_init__(self):
        if self.expansion < 2:
            raise ValueError("expansion must be >= 2")
        if self.inflation <= 1:
            raise ValueError("inflation must be > 1")
        if self.self_loop_weight < 0:
            raise ValueError("self_loop_weight must be >= 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True)
class MclResult:
    partition: Partition
    converged: bool
    iterations: int


def markov_cluster(w: WeightedAggregate, cfg: MclConfig = MclConfig()) -> MclResult:
    """Markov clustering of a weighted aggregate into a partition.

    Column-normalizes the adjacency (plus self loops), then alternates
    expansion (matrix power), inflation (entrywise power + renormalize)
    and pruning until the matrix stops changing. Clusters are read from
    attractor rows; overlaps resolve to the lowest community id and nodes
    left uncovered become singletons, so the result is always a partition.
    """
    n = len(w.universe)
    if n == 0:
        raise ValueError("empty universe")
    mat = w.matrix()
    scale = mat.max() if mat.max() > 0 else 1.0
    mat = mat + cfg.self_loop_weight * scale * np.eye(n)
    mat = _normalize_columns(mat)
    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_iters + 1):
        prev = mat
        mat = np.linalg.matrix_power(mat, cfg.expansion)
        mat = np.power(mat, cfg.inflation)
        mat = _normalize_columns(mat)
        mat = np.where(mat < cfg.prune_threshold, 0.0, mat)
        if np.abs(mat - prev).max() < cfg.convergence_eps:
            converged = True
            break

    clusters: list[frozenset[int]] = []
    for i in range(n):
        if mat[i, i] > 0:
            members = frozenset(np.nonzero(mat[i] > 0)[0].tolist())
            if members not in clusters:
                clusters.append(members)
    assigned: dict[int, int] = {}
    for cid, members in enumerate(clusters):
        for node in members:
            if node not in assigned:  # overlap -> lowest community id wins
                assigned[node] = cid
    groups: dict[int, set[int]] = {}
    for node, cid in assigned.items():
        groups.setdefault(cid, set()).add(node)
    communities = [members for _, members in sorted(groups.items())]
    for node in range(n):
        if node not in assigned:
            communities.append({node})
    communities.sort(key=min)
    return MclResult(Partition(communities, n), converged, iterations)


def _normalize_columns(mat: np.ndarray) -> np.ndarray:
    sums = mat.sum(axis=0)
    sums = np.where(sums > 0, sums, 1.0)
    return mat / sums


# ---------------------------------------------------------------------------
# Conjugate estimation
# ---------------------------------------------------------------------------

def internal_edge_counts(g: LabeledGraph, part: Partition) -> np.ndarray:
    """Edges of g internal to each community."""
    counts = np.zeros(len(part), dtype=np.int64)
    for i, j in g.edges:
        ci, cj = part.community_of(i), part.community_of(j)
        if ci == cj:
            counts[ci] += 1
    return counts


def fit_density(
    seq: GraphSequence,
    part: Partition,
    prior: tuple[float, float] = DEFAULT_DENSITY_PRIOR,
) -> tuple[list[BetaPosterior], list[float]]:
    """Beta posterior and mode estimate of each community's internal density.

    alpha_hat = alpha + sum_i k_i and beta_hat = beta + N*C(|C|,2) - sum_i k_i
    over the N observed graphs, where k_i is the community's internal edge
    count in graph i.
    """
    alpha, beta = prior
    if alpha <= 0 or beta <= 0:
        raise ValueError("density prior requires alpha > 0 and beta > 0")
    if len(seq) == 0:
        raise ValueError("empty sequence")
    n_graphs = len(seq)
    k_totals = np.zeros(len(part), dtype=np.int64)
    for g in seq:
        k_totals += internal_edge_counts(g, part)
    posteriors, points = [], []
    for cid, community in enumerate(part.communities):
        pairs = math.comb(len(community), 2)
        post = BetaPosterior(alpha + k_totals[cid], beta + n_graphs * pairs - k_totals[cid])
        posteriors.append(post)
        points.append(_density_point(post, prior, pairs))
    return posteriors, points


def fit_expected_degree(
    seq: GraphSequence,
    prior: tuple[float, float] = DEFAULT_DEGREE_PRIOR,
) -> tuple[list[GammaPosterior], list[float]]:
    """Gamma posterior and mode estimate of each node's expected degree.

    alpha_hat = alpha + sum_i d_i and beta_hat = beta + N; the point
    estimate is the posterior mode (alpha_hat - 1) / beta_hat.
    """
    alpha, beta = prior
    if alpha <= 1 or beta <= 1:
        raise ValueError("degree prior requires alpha > 1 and beta > 1")
    if len(seq) == 0:
        raise ValueError("empty sequence")
    totals = np.zeros(len(seq.universe), dtype=np.int64)
    for g in seq:
        totals += g.degrees()
    posteriors = [GammaPosterior(alpha + d, beta + len(seq)) for d in totals]
    return posteriors, [p.mode for p in posteriors]


@dataclass(frozen=True)
class PosteriorState:
    """All conjugate posteriors plus the partition they are keyed to."""

    partition: Partition
    density_posteriors: tuple[BetaPosterior, ...]
    degree_posteriors: tuple[GammaPosterior, ...]
    density_prior: tuple[float, float] = DEFAULT_DENSITY_PRIOR
    degree_prior: tuple[float, float] = DEFAULT_DEGREE_PRIOR

    def __post_init__(self):
        if len(self.density_posteriors) != len(self.partition):
            raise ValueError("one density posterior per community required")
        if len(self.degree_posteriors) != self.partition.n:
            raise ValueError("one degree posterior per node required")

    def mple_params(self, universe: Universe) -> GbterParams:
        """Point-estimate model from the current posterior modes."""
        density = tuple(
            _density_point(post, self.density_prior, math.comb(len(c), 2))
            for post, c in zip(self.density_posteriors, self.partition.communities)
        )
        lam = tuple(p.mode for p in self.degree_posteriors)
        return GbterParams(universe, self.partition, density, lam)

    def with_partition(self, part: Partition, seq: GraphSequence) -> "PosteriorState":
        """Re-key the density posteriors to a new partition, refit from seq.

        Degree posteriors are partition-independent and carry over.
        """
        dens, _ = fit_density(seq, part, self.density_prior)
        return replace(self, partition=part, density_posteriors=tuple(dens))


def update(state: PosteriorState, g: LabeledGraph) -> PosteriorState:
    """Absorb one new snapshot into every posterior; the partition is kept."""
    if g.n != state.partition.n:
        raise ValueError("graph universe does not match the fitted state")
    k = internal_edge_counts(g, state.partition)
    dens = tuple(
        post.updated(int(k[cid]), math.comb(len(c), 2))
        for cid, (post, c) in enumerate(zip(state.density_posteriors, state.partition.communities))
    )
    degs = g.degrees()
    degree = tuple(post.updated(int(d)) for post, d in zip(state.degree_posteriors, degs))
    return replace(state, density_posteriors=dens, degree_posteriors=degree)


def fit_gbter(
    seq: GraphSequence,
    mcl_cfg: MclConfig = MclConfig(),
    density_prior: tuple[float, float] = DEFAULT_DENSITY_PRIOR,
    degree_prior: tuple[float, float] = DEFAULT_DEGREE_PRIOR,
    weighting: str = "counts",
    gamma: float = 0.5,
    partition: Partition | None = None,
) -> tuple[GbterParams, PosteriorState]:
    """Fit the full model to a sequence.

    The partition comes from Markov clustering on the selected aggregate
    (edge counts, or exponentially down-weighted counts) unless an external
    partition is supplied; densities and expected degrees are posterior
    modes over the whole sequence.
    """
    if len(seq) == 0:
        raise ValueError("empty sequence")
    if partition is None:
        if weighting == "counts":
            agg = aggregate_counts(seq)
        elif weighting == "exponential":
            agg = aggregate_exponential(seq, gamma)
        else:
            raise ValueError(f"unknown weighting {weighting!r}")
        partition = markov_cluster(agg, mcl_cfg).partition
    dens, _ = fit_density(seq, partition, density_prior)
    degs, _ = fit_expected_degree(seq, degree_prior)
    state = PosteriorState(partition, tuple(dens), tuple(degs), density_prior, degree_prior)
    return state.mple_params(seq.universe), state


# ---------------------------------------------------------------------------
# Serialization (checkpoint/resume for streaming runs)
# ---------------------------------------------------------------------------

def posterior_to_dict(state: PosteriorState, universe: Universe) -> dict:
    labs = universe.labels
    return {
        "partition": [sorted(labs[i] for i in c) for c in state.partition.communities],
        "density_posteriors": [
            {"alpha_hat": p.alpha_hat, "beta_hat": p.beta_hat} for p in state.density_posteriors
        ],
        "degree_posteriors": {
            labs[i]: {"alpha_hat": p.alpha_hat, "beta_hat": p.beta_hat}
            for i, p in enumerate(state.degree_posteriors)
        },
        "density_prior": list(state.density_prior),
        "degree_prior": list(state.degree_prior),
    }


def posterior_from_dict(doc: dict, universe: Universe, path: str | None = None) -> PosteriorState:
    try:
        part = Partition.from_label_sets(universe, doc["partition"])
        dens = tuple(BetaPosterior(d["alpha_hat"], d["beta_hat"]) for d in doc["density_posteriors"])
        degs = tuple(
            GammaPosterior(doc["degree_posteriors"][lab]["alpha_hat"], doc["degree_posteriors"][lab]["beta_hat"])
            for lab in universe.labels
        )
        return PosteriorState(
            part, dens, degs,
            tuple(doc["density_prior"]), tuple(doc["degree_prior"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphFormatError(f"bad posterior document: {exc}", path) from None


def save_posterior(state: PosteriorState, universe: Universe, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(posterior_to_dict(state, universe), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_posterior(path: str, universe: Universe) -> PosteriorState:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphFormatError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None
    return posterior_from_dict(doc, universe, path)
