"""Immutable graph storage with local-query access.

A :class:`Graph` keeps a compressed out-adjacency (offsets + sorted target
arrays), an in-degree array, and a bidirectional mapping between external
string ids and dense integer indices.  Graphs are frozen after construction
and safe to read from many threads.

Any object exposing ``out_neighbors(u)``, ``out_degree(u)`` and
``in_degree(u)`` satisfies the :class:`GraphAccess` contract used by the
personalized PageRank engine; the remote crawl client implements the same
contract over HTTP with external string ids as node keys.
"""

from __future__ import annotations

import csv
from typing import Iterable, Iterator, Protocol, TextIO

import numpy as np

from .errors import DataError, ParameterError, ParseError


class GraphAccess(Protocol):
    """Read-only local queries against a frozen graph."""

    def out_neighbors(self, node) -> Iterable:
        ...

    def out_degree(self, node) -> int:
        ...

    def in_degree(self, node) -> int:
        ...


class Graph:
    """Frozen directed or undirected graph over dense node indices.

    Undirected graphs store both orientations of every edge, so
    ``in_degree(v) == out_degree(v)`` for them.  Out-lists are sorted
    ascending and carry no duplicate arcs.
    """

    __slots__ = ("n_nodes", "directed", "out_offsets", "out_targets",
                 "in_degrees", "ids", "index")

    def __init__(self, n_nodes: int, directed: bool, out_offsets: np.ndarray,
                 out_targets: np.ndarray, ids: tuple[str, ...]):
        self.n_nodes = int(n_nodes)
        self.directed = bool(directed)
        self.out_offsets = np.ascontiguousarray(out_offsets, dtype=np.int64)
        self.out_targets = np.ascontiguousarray(out_targets, dtype=np.int64)
        self.in_degrees = np.bincount(self.out_targets, minlength=self.n_nodes).astype(np.int64)
        self.ids = tuple(ids)
        self.index = {ext: i for i, ext in enumerate(self.ids)}
        self.out_offsets.setflags(write=False)
        self.out_targets.setflags(write=False)
        self.in_degrees.setflags(write=False)

    # -- GraphAccess -------------------------------------------------------

    def out_neighbors(self, node: int) -> np.ndarray:
        return self.out_targets[self.out_offsets[node]:self.out_offsets[node + 1]]

    def out_degree(self, node: int) -> int:
        return int(self.out_offsets[node + 1] - self.out_offsets[node])

    def in_degree(self, node: int) -> int:
        return int(self.in_degrees[node])

    # -- misc --------------------------------------------------------------

    @property
    def n_arcs(self) -> int:
        return int(self.out_targets.shape[0])

    def arcs(self) -> Iterator[tuple[int, int]]:
        """Stored arcs in canonical order (source ascending, target ascending)."""
        for u in range(self.n_nodes):
            for v in self.out_neighbors(u):
                yield u, int(v)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.n_nodes == other.n_nodes
                and self.directed == other.directed
                and self.ids == other.ids
                and np.array_equal(self.out_offsets, other.out_offsets)
                and np.array_equal(self.out_targets, other.out_targets))

    def __repr__(self) -> str:
        kind = "directed" if self.directed else "undirected"
        return f"Graph({kind}, n_nodes={self.n_nodes}, n_arcs={self.n_arcs})"


def from_arcs(ids: Iterable[str], arcs: Iterable[tuple[int, int]], directed: bool) -> Graph:
    """Build a graph from dense-index arc pairs.

    Duplicate arcs collapse to one; undirected input is symmetrized.
    """
    ids = tuple(ids)
    n = len(ids)
    pairs = set()
    for u, v in arcs:
        if not (0 <= u < n and 0 <= v < n):
            raise DataError(f"arc ({u},{v}) out of range for {n} nodes")
        pairs.add((u, v))
        if not directed:
            pairs.add((v, u))
    if pairs:
        arr = np.array(sorted(pairs), dtype=np.int64)
        sources, targets = arr[:, 0], arr[:, 1]
    else:
        sources = targets = np.empty(0, dtype=np.int64)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.add.at(offsets, sources + 1, 1)
    np.cumsum(offsets, out=offsets)
    return Graph(n, directed, offsets, targets, ids)


def _iter_lines(source: str | TextIO | Iterable[str]) -> Iterator[str]:
    if isinstance(source, str):
        return iter(source.splitlines())
    return iter(source)


def load_edge_list(source: str | TextIO | Iterable[str], directed: bool,
                   id_map: Iterable[str] | None = None) -> Graph:
    """Load a tab-separated edge list.

    One arc per line, ``src<TAB>dst``; lines starting with ``#`` are ignored.
    Dense indices are assigned in first-appearance order unless ``id_map``
    supplies the full roster (which also preserves isolated nodes).
    Duplicate lines collapse to a single arc; self-loops are kept; undirected
    input is symmetrized.
    """
    index: dict[str, int] = {}
    ids: list[str] = []
    if id_map is not None:
        for ext in id_map:
            if ext in index:
                raise DataError(f"duplicate id {ext!r} in id map")
            index[ext] = len(ids)
            ids.append(ext)

    def intern(ext: str, lineno: int) -> int:
        got = index.get(ext)
        if got is None:
            if id_map is not None:
                raise ParseError(f"line {lineno}: id {ext!r} not present in id map")
            got = index[ext] = len(ids)
            ids.append(ext)
        return got

    arcs: list[tuple[int, int]] = []
    for lineno, raw in enumerate(_iter_lines(source), start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise ParseError(f"line {lineno}: expected 'src<TAB>dst', got {line!r}")
        arcs.append((intern(parts[0], lineno), intern(parts[1], lineno)))
    if not ids:
        raise DataError("empty graph")
    return from_arcs(ids, arcs, directed)


def write_edge_list(graph: Graph, fh: TextIO) -> None:
    """Write all stored arcs as ``src<TAB>dst`` lines in canonical order."""
    for u, v in graph.arcs():
        fh.write(f"{graph.ids[u]}\t{graph.ids[v]}\n")


def write_id_map(graph: Graph, fh: TextIO) -> None:
    """Write the index -> external id mapping as CSV ``index,external_id``."""
    writer = csv.writer(fh)
    writer.writerow(["index", "external_id"])
    for i, ext in enumerate(graph.ids):
        writer.writerow([i, ext])


def read_id_map(fh: TextIO) -> list[str]:
    """Read an id-map CSV back into an index-ordered roster."""
    reader = csv.reader(fh)
    header = next(reader, None)
    if header != ["index", "external_id"]:
        raise ParseError("line 1: id map must start with header 'index,external_id'")
    ids: list[str] = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2:
            raise ParseError(f"line {lineno}: expected 'index,external_id'")
        if int(row[0]) != len(ids):
            raise ParseError(f"line {lineno}: indices must be dense and ascending")
        ids.append(row[1])
    return ids


def transition_row(graph: Graph, u: int) -> dict[int, float]:
    """Sparse random-walk transition row for node ``u``.

    Out-neighbors receive ``1/out_degree(u)`` each.  A dangling node (no
    out-arcs) is treated as holding one implicit self-loop, which keeps the
    walk stochastic, so its row is ``{u: 1.0}``.
    """
    if not (0 <= u < graph.n_nodes):
        raise ParameterError(f"node index {u} out of range")
    d = graph.out_degree(u)
    if d == 0:
        return {u: 1.0}
    return {int(v): 1.0 / d for v in graph.out_neighbors(u)}


def dense_transition(graph: Graph, dense_limit: int = 10_000) -> np.ndarray:
    """Dense row-stochastic transition matrix, dangling rows as self-loops.

    Intended for small-graph oracles; refuses graphs above ``dense_limit``.
    """
    n = graph.n_nodes
    if n > dense_limit:
        raise ParameterError(f"graph with {n} nodes exceeds dense limit {dense_limit}")
    P = np.zeros((n, n))
    for u in range(n):
        d = graph.out_degree(u)
        if d == 0:
            P[u, u] = 1.0
        else:
            P[u, graph.out_neighbors(u)] = 1.0 / d
    return P


def validate(graph: Graph) -> None:
    """Full-scan structural check; raises :class:`DataError` on violation."""
    off, tg = graph.out_offsets, graph.out_targets
    if off.shape[0] != graph.n_nodes + 1 or off[0] != 0 or off[-1] != tg.shape[0]:
        raise DataError("offset array malformed")
    if np.any(np.diff(off) < 0):
        raise DataError("offsets must be nondecreasing")
    if tg.size and (tg.min() < 0 or tg.max() >= graph.n_nodes):
        raise DataError("target index out of range")
    for u in range(graph.n_nodes):
        row = graph.out_neighbors(u)
        if row.size and np.any(np.diff(row) <= 0):
            raise DataError(f"out-list of node {u} not strictly ascending")
    recount = np.bincount(tg, minlength=graph.n_nodes)
    if not np.array_equal(recount, graph.in_degrees):
        raise DataError("in-degree array inconsistent with stored arcs")
    if not graph.directed:
        stored = set(map(tuple, np.column_stack([
            np.repeat(np.arange(graph.n_nodes), np.diff(off)), tg]).tolist()))
        for u, v in stored:
            if (v, u) not in stored:
                raise DataError(f"undirected graph missing mirror arc ({v},{u})")
        if not np.array_equal(graph.in_degrees, np.diff(off)):
            raise DataError("undirected graph must have in_degree == out_degree")
