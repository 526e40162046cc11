"""Node-labeled graphs, snapshot sequences, partitions, and weighted aggregation.

A graph lives over a fixed, ordered label universe; nodes absent from a
snapshot simply have degree zero. All values are immutable after
construction and safe to share across readers.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np


class GraphFormatError(ValueError):
    """A graph/sequence file could not be parsed. Carries path and line."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        loc = ""
        if path is not None:
            loc += str(path)
        if line is not None:
            loc += f":{line}"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.path = path
        self.line = line


@dataclass(frozen=True)
class NodeLabel:
    """A label together with its dense index in a universe."""

    label: str
    index: int


class Universe:
    """Ordered set of unique node labels; index is a bijection onto 0..n-1."""

    __slots__ = ("labels", "_index")

    def __init__(self, labels: Iterable[str]):
        labels = tuple(str(x) for x in labels)
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate labels in universe")
        self.labels = labels
        self._index = {lab: i for i, lab in enumerate(labels)}

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self) -> Iterator[str]:
        return iter(self.labels)

    def __contains__(self, label: str) -> bool:
        return label in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, Universe) and self.labels == other.labels

    def __hash__(self) -> int:
        return hash(self.labels)

    def __repr__(self) -> str:
        return f"Universe({len(self.labels)} labels)"

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise ValueError(f"unknown label {label!r}") from None

    def node(self, label: str) -> NodeLabel:
        return NodeLabel(label, self.index(label))

    def sorted(self) -> "Universe":
        return Universe(sorted(self.labels))


def _normalize_edge(i: int, j: int, n: int) -> tuple[int, int]:
    if i == j:
        raise ValueError(f"self-loop on node {i}")
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"edge ({i},{j}) outside universe of size {n}")
    return (i, j) if i < j else (j, i)


class LabeledGraph:
    """Undirected simple graph over a fixed label universe.

    Edges are stored as a frozenset of (i, j) index pairs with i < j.
    """

    __slots__ = ("universe", "edges")

    def __init__(self, universe: Universe, edges: Iterable[tuple[int, int]] = ()):
        n = len(universe)
        self.universe = universe
        self.edges = frozenset(_normalize_edge(i, j, n) for i, j in edges)

    @classmethod
    def from_label_pairs(cls, universe: Universe, pairs: Iterable[tuple[str, str]]) -> "LabeledGraph":
        return cls(universe, ((universe.index(a), universe.index(b)) for a, b in pairs))

    @property
    def n(self) -> int:
        return len(self.universe)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LabeledGraph)
            and self.universe == other.universe
            and self.edges == other.edges
        )

    def __hash__(self) -> int:
        return hash((self.universe, self.edges))

    def __repr__(self) -> str:
        return f"LabeledGraph(n={self.n}, edges={len(self.edges)})"

    def has_edge(self, i: int, j: int) -> bool:
        return _normalize_edge(i, j, self.n) in self.edges

    def degree(self, i: int) -> int:
        """Number of edges incident to node index i."""
        if not (0 <= i < self.n):
            raise ValueError(f"unknown node index {i}")
        return sum(1 for a, b in self.edges if a == i or b == i)

    def degrees(self) -> np.ndarray:
        """Degree of every node, as an integer vector."""
        d = np.zeros(self.n, dtype=np.int64)
        for a, b in self.edges:
            d[a] += 1
            d[b] += 1
        return d

    def adjacency(self) -> np.ndarray:
        """Dense symmetric 0/1 adjacency matrix (float64)."""
        a = np.zeros((self.n, self.n))
        for i, j in self.edges:
            a[i, j] = 1.0
            a[j, i] = 1.0
        return a

    def edge_labels(self) -> list[tuple[str, str]]:
        """Edges as canonically sorted label pairs."""
        labs = self.universe.labels
        pairs = [tuple(sorted((labs[i], labs[j]))) for i, j in self.edges]
        return sorted(pairs)

    def canonical(self) -> "LabeledGraph":
        """Same graph with lexicographically sorted universe."""
        uni = self.universe.sorted()
        return LabeledGraph.from_label_pairs(uni, self.edge_labels())


class Partition:
    """Disjoint cover of node indices 0..n-1 into communities."""

    __slots__ = ("communities", "_community_of", "n")

    def __init__(self, communities: Iterable[Iterable[int]], n: int):
        comms = tuple(frozenset(int(i) for i in c) for c in communities)
        seen: set[int] = set()
        for c in comms:
            if not c:
                raise ValueError("empty community")
            if c & seen:
                raise ValueError("communities overlap")
            seen |= c
        if seen != set(range(n)):
            raise ValueError("communities do not cover 0..n-1")
        self.communities = comms
        self.n = n
        inv = np.empty(n, dtype=np.int64)
        for cid, c in enumerate(comms):
            for i in c:
                inv[i] = cid
        self._community_of = inv

    @classmethod
    def from_community_of(cls, assignment: Sequence[int]) -> "Partition":
        assignment = np.asarray(assignment, dtype=np.int64)
        ids = sorted(set(assignment.tolist()))
        return cls([np.nonzero(assignment == cid)[0] for cid in ids], len(assignment))

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls([[i] for i in range(n)], n)

    @classmethod
    def from_label_sets(cls, universe: Universe, groups: Iterable[Iterable[str]]) -> "Partition":
        return cls([[universe.index(lab) for lab in g] for g in groups], len(universe))

    def community_of(self, i: int) -> int:
        if not (0 <= i < self.n):
            raise ValueError(f"node {i} missing from partition")
        return int(self._community_of[i])

    @property
    def assignment(self) -> np.ndarray:
        return self._community_of.copy()

    def members(self, cid: int) -> tuple[int, ...]:
        return tuple(sorted(self.communities[cid]))

    def __len__(self) -> int:
        return len(self.communities)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Partition)
            and self.n == other.n
            and set(self.communities) == set(other.communities)
        )

    def __hash__(self) -> int:
        return hash((self.n, frozenset(self.communities)))

    def __repr__(self) -> str:
        sizes = sorted((len(c) for c in self.communities), reverse=True)
        return f"Partition({len(self.communities)} communities, sizes={sizes})"


def split_degree(g: LabeledGraph, i: int, part: Partition) -> tuple[int, int]:
    """Internal/external degree of node i with respect to a partition.

    Returns (d_in, d_ex) where d_in counts neighbors in i's own community
    and d_ex the rest; they sum to degree(i).
    """
    if part.n != g.n:
        raise ValueError("partition does not cover the graph's universe")
    cid = part.community_of(i)
    d_in = d_ex = 0
    for a, b in g.edges:
        if a == i or b == i:
            other = b if a == i else a
            if part.community_of(other) == cid:
                d_in += 1
            else:
                d_ex += 1
    return d_in, d_ex


class GraphSequence:
    """Ordered snapshots over a shared universe, with optional timestamp keys."""

    __slots__ = ("universe", "snapshots", "timestamps")

    def __init__(
        self,
        universe: Universe,
        snapshots: Iterable[LabeledGraph],
        timestamps: Sequence[str] | None = None,
    ):
        snaps = tuple(snapshots)
        for g in snaps:
            if g.universe != universe:
                raise ValueError("snapshot universe differs from the shared universe")
        if timestamps is not None:
            timestamps = tuple(str(t) for t in timestamps)
            if len(timestamps) != len(snaps):
                raise ValueError("one timestamp per snapshot required")
        self.universe = universe
        self.snapshots = snaps
        self.timestamps = timestamps

    def __len__(self) -> int:
        return len(self.snapshots)

    def __iter__(self) -> Iterator[LabeledGraph]:
        return iter(self.snapshots)

    def __getitem__(self, k: int) -> LabeledGraph:
        return self.snapshots[k]

    def keys(self) -> tuple[str, ...]:
        if self.timestamps is not None:
            return self.timestamps
        return tuple(str(i) for i in range(len(self.snapshots)))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, GraphSequence)
            and self.universe == other.universe
            and self.snapshots == other.snapshots
            and self.timestamps == other.timestamps
        )


class WeightedAggregate:
    """Symmetric nonnegative pair weights over a universe; zero entries omitted."""

    __slots__ = ("universe", "weights")

    def __init__(self, universe: Universe, weights: dict[tuple[int, int], float]):
        n = len(universe)
        norm: dict[tuple[int, int], float] = {}
        for (i, j), w in weights.items():
            key = _normalize_edge(i, j, n)
            w = float(w)
            if w < 0:
                raise ValueError("negative weight")
            if w != 0.0:
                norm[key] = norm.get(key, 0.0) + w
        self.universe = universe
        self.weights = norm

    def weight(self, i: int, j: int) -> float:
        return self.weights.get(_normalize_edge(i, j, len(self.universe)), 0.0)

    def matrix(self) -> np.ndarray:
        n = len(self.universe)
        m = np.zeros((n, n))
        for (i, j), w in self.weights.items():
            m[i, j] = w
            m[j, i] = w
        return m


def _aggregate_weighted(seq: GraphSequence, multipliers: Sequence[float]) -> WeightedAggregate:
    """Sum of per-snapshot edge indicators scaled by one multiplier each."""
    weights: dict[tuple[int, int], float] = {}
    for g, w in zip(seq.snapshots, multipliers):
        for e in g.edges:
            weights[e] = weights.get(e, 0.0) + w
    return WeightedAggregate(seq.universe, weights)


def aggregate_counts(seq: GraphSequence) -> WeightedAggregate:
    """Weight each pair by the number of snapshots containing that edge."""
    if len(seq) == 0:
        raise ValueError("empty sequence")
    return _aggregate_weighted(seq, [1.0] * len(seq))


def aggregate_exponential(seq: GraphSequence, gamma: float) -> WeightedAggregate:
    """Exponentially down-weight older snapshots; the newest has multiplier 1.

    weight(i,j) = sum_t gamma^(T-1-t) * [edge (i,j) in snapshot t], snapshots
    ordered oldest to newest. gamma = 0 keeps only the newest snapshot.
    """
    if len(seq) == 0:
        raise ValueError("empty sequence")
    if not (0.0 <= gamma < 1.0):
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    t = len(seq)
    multipliers = [gamma ** (t - 1 - k) if (t - 1 - k) > 0 else 1.0 for k in range(t)]
    return _aggregate_weighted(seq, multipliers)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def load_edge_list(path: str) -> LabeledGraph:
    """Parse the edge-list text format.

    Header line ``#nodes: A,B,C`` declares the universe; every following
    non-comment line is one ``LABEL LABEL`` edge. Blank lines and other
    ``#`` lines are ignored.
    """
    universe: Universe | None = None
    edges: set[tuple[int, int]] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#nodes:"):
                if universe is not None:
                    raise GraphFormatError("duplicate #nodes: header", path, lineno)
                labels = [x.strip() for x in line[len("#nodes:"):].split(",") if x.strip()]
                try:
                    universe = Universe(labels)
                except ValueError as exc:
                    raise GraphFormatError(str(exc), path, lineno) from None
                continue
            if line.startswith("#"):
                continue
            if universe is None:
                raise GraphFormatError("edge before #nodes: header", path, lineno)
            parts = line.split()
            if len(parts) != 2:
                raise GraphFormatError(f"expected two labels, got {len(parts)}", path, lineno)
            a, b = parts
            try:
                i, j = universe.index(a), universe.index(b)
            except ValueError as exc:
                raise GraphFormatError(str(exc), path, lineno) from None
            if i == j:
                raise GraphFormatError(f"self-loop on {a!r}", path, lineno)
            key = (i, j) if i < j else (j, i)
            if key in edges:
                raise GraphFormatError(f"duplicate edge {a!r} {b!r}", path, lineno)
            edges.add(key)
    if universe is None:
        raise GraphFormatError("missing #nodes: header", path)
    return LabeledGraph(universe, edges)


def save_edge_list(g: LabeledGraph, path: str) -> None:
    """Write the canonical edge-list form: sorted labels, sorted edges."""
    g = g.canonical()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("#nodes: " + ",".join(g.universe.labels) + "\n")
        for a, b in g.edge_labels():
            fh.write(f"{a} {b}\n")


def sequence_to_dict(seq: GraphSequence) -> dict:
    uni = seq.universe.sorted()
    snaps = []
    for key, g in zip(seq.keys(), seq.snapshots):
        snaps.append({"t": key, "edges": g.edge_labels()})
    return {"universe": list(uni.labels), "snapshots": snaps}


def sequence_from_dict(doc: dict, path: str | None = None) -> GraphSequence:
    try:
        universe = Universe(doc["universe"])
        graphs, keys = [], []
        for snap in doc["snapshots"]:
            keys.append(str(snap["t"]))
            graphs.append(LabeledGraph.from_label_pairs(universe, [tuple(e) for e in snap["edges"]]))
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphFormatError(f"bad sequence document: {exc}", path) from None
    return GraphSequence(universe, graphs, keys)


def load_sequence(path: str) -> GraphSequence:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphFormatError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None
    return sequence_from_dict(doc, path)


def save_sequence(seq: GraphSequence, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(sequence_to_dict(seq), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_season_csv(path: str) -> GraphSequence:
    """Ingest a season schedule CSV with columns season,team_a,team_b.

    One row per game; duplicate games within a season collapse to one
    edge. The universe is the union of all teams; snapshots are ordered
    by season (numerically when every season key is an integer).
    """
    seasons: dict[str, set[tuple[str, str]]] = {}
    teams: set[str] = set()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"season", "team_a", "team_b"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise GraphFormatError(
                f"missing columns; need {sorted(required)}, got {reader.fieldnames}", path, 1
            )
        for lineno, row in enumerate(reader, start=2):
            season = (row["season"] or "").strip()
            a = (row["team_a"] or "").strip()
            b = (row["team_b"] or "").strip()
            if not season or not a or not b:
                raise GraphFormatError("empty field", path, lineno)
            if a == b:
                raise GraphFormatError(f"self-loop on {a!r}", path, lineno)
            teams.update((a, b))
            seasons.setdefault(season, set()).add(tuple(sorted((a, b))))
    if not seasons:
        raise GraphFormatError("no games found", path)
    try:
        order = sorted(seasons, key=int)
    except ValueError:
        order = sorted(seasons)
    universe = Universe(sorted(teams))
    graphs = [LabeledGraph.from_label_pairs(universe, seasons[s]) for s in order]
    return GraphSequence(universe, graphs, order)
