"""Generalized block two-level Erdős-Rényi (GBTER) generative model.

Parameters are a partition into communities, one internal edge density per
community, and one target expected degree per node. Edges occur
independently per pair: an Erdős-Rényi stage inside each community plus a
Chung-Lu stage on the excess expected degrees, combined as a union.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graphs import GraphFormatError, LabeledGraph, Partition, Universe


@dataclass(frozen=True)
class GbterParams:
    """Model inputs: partition, per-community density, per-node expected degree."""

    universe: Universe
    partition: Partition
    density: tuple[float, ...]
    expected_degree: tuple[float, ...]

    def __post_init__(self):
        n = len(self.universe)
        if self.partition.n != n:
            raise ValueError("partition does not cover the universe")
        if len(self.density) != len(self.partition):
            raise ValueError("one density per community required")
        if len(self.expected_degree) != n:
            raise ValueError("one expected degree per node required")
        object.__setattr__(self, "density", tuple(float(p) for p in self.density))
        object.__setattr__(self, "expected_degree", tuple(float(x) for x in self.expected_degree))
        if any(not (0.0 <= p <= 1.0) for p in self.density):
            raise ValueError("densities must lie in [0, 1]")
        if any(lam < 0 or not np.isfinite(lam) for lam in self.expected_degree):
            raise ValueError("expected degrees must be finite and >= 0")

    @property
    def n(self) -> int:
        return len(self.universe)


def excess_degrees(params: GbterParams) -> np.ndarray:
    """Per-node excess expected degree: max(0, lambda_i - p_j * (|C_j| - 1))."""
    lam = np.asarray(params.expected_degree)
    assign = params.partition.assignment
    sizes = np.array([len(c) for c in params.partition.communities], dtype=float)
    p = np.asarray(params.density)
    stage_one = p[assign] * (sizes[assign] - 1.0)
    return np.maximum(0.0, lam - stage_one)


def edge_probability(params: GbterParams, i: int, j: int) -> float:
    """Probability of the pair (i, j) being an edge, clamped to [0, 1].

    Same community with density p: p + (1-p) * eps_i*eps_j / sum(eps);
    different communities: eps_i*eps_j / sum(eps). A zero excess-degree
    total makes the Chung-Lu term 0.
    """
    if i == j:
        raise ValueError("edge probability undefined for i == j")
    eps = excess_degrees(params)
    total = eps.sum()
    cl = eps[i] * eps[j] / total if total > 0 else 0.0
    ci, cj = params.partition.community_of(i), params.partition.community_of(j)
    if ci == cj:
        p = params.density[ci]
        prob = p + (1.0 - p) * cl
    else:
        prob = cl
    return float(min(1.0, max(0.0, prob)))


def validate_chung_lu(params: GbterParams) -> list[tuple[int, int]]:
    """All pairs whose Chung-Lu weight product exceeds the normalizer.

    An empty list means eps_i*eps_j <= sum(eps) everywhere, so the
    Chung-Lu expression is a probability for every pair.
    """
    eps = excess_degrees(params)
    total = eps.sum()
    bad = []
    n = len(eps)
    for i in range(n):
        for j in range(i + 1, n):
            if eps[i] * eps[j] > total:
                bad.append((i, j))
    return bad


def expected_adjacency(params: GbterParams) -> np.ndarray:
    """Symmetric matrix of pair probabilities; diagonal is zero."""
    eps = excess_degrees(params)
    total = eps.sum()
    if total > 0:
        cl = np.outer(eps, eps) / total
    else:
        cl = np.zeros((params.n, params.n))
    assign = params.partition.assignment
    p = np.asarray(params.density)[assign]
    same = assign[:, None] == assign[None, :]
    mat = np.where(same, p[:, None] + (1.0 - p[:, None]) * cl, cl)
    mat = np.clip(mat, 0.0, 1.0)
    np.fill_diagonal(mat, 0.0)
    return mat


def pair_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column indices of the upper triangle, in lexicographic pair order."""
    return np.triu_indices(n, k=1)


def pair_probabilities(params: GbterParams) -> np.ndarray:
    """Pair probabilities flattened in pair_indices order."""
    iu, ju = pair_indices(params.n)
    return expected_adjacency(params)[iu, ju]


def sample_pair_matrix(params: GbterParams, m: int, rng: np.random.Generator) -> np.ndarray:
    """m independent samples as a boolean (m, n_pairs) edge-indicator matrix."""
    probs = pair_probabilities(params)
    return rng.random((m, probs.size)) < probs


def sample_graph(params: GbterParams, rng: np.random.Generator) -> LabeledGraph:
    """Draw one graph; every pair is present independently with its edge probability."""
    iu, ju = pair_indices(params.n)
    hit = sample_pair_matrix(params, 1, rng)[0]
    return LabeledGraph(params.universe, zip(iu[hit], ju[hit]))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def params_to_dict(params: GbterParams) -> dict:
    labs = params.universe.labels
    return {
        "universe": list(labs),
        "communities": [sorted(labs[i] for i in c) for c in params.partition.communities],
        "density": list(params.density),
        "expected_degree": {labs[i]: params.expected_degree[i] for i in range(params.n)},
    }


def params_from_dict(doc: dict, path: str | None = None) -> GbterParams:
    try:
        universe = Universe(doc["universe"])
        partition = Partition.from_label_sets(universe, doc["communities"])
        density = tuple(float(x) for x in doc["density"])
        lam = tuple(float(doc["expected_degree"][lab]) for lab in universe.labels)
        return GbterParams(universe, partition, density, lam)
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphFormatError(f"bad parameter document: {exc}", path) from None


def save_params(params: GbterParams, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(params_to_dict(params), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_params(path: str) -> GbterParams:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphFormatError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None
    return params_from_dict(doc, path)
