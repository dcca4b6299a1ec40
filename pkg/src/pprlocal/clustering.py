"""Turn a PPR vector into a ranked local cluster.

Three adjustment modes are supported:

* ``ppr``  -- raw estimate values,
* ``appr`` -- values divided by in-degree, removing the preference for
  well-followed nodes,
* ``rppr`` -- values divided by ``in_degree + tau``, which damps the noise
  that plain adjustment introduces at extremely low in-degrees.

Nodes the push never touched are excluded from ranking rather than scored
zero, so output size stays proportional to the explored region.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Collection, Mapping, Sequence, TextIO

import numpy as np

from .errors import DataError, ParameterError
from .graph import Graph

MODES = ("ppr", "appr", "rppr")

DEFAULT_TAU = 100.0


@dataclass(frozen=True)
class RankedCluster:
    """Top-ranking nodes under an adjusted score.

    ``entries`` rows are ``(node, raw_p, score, in_degree)``, sorted by
    score descending with ties broken by node ascending.
    """

    mode: str
    tau: float
    n: int
    entries: tuple

    def nodes(self) -> list:
        return [entry[0] for entry in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def _degree_lookup(in_degree) -> Callable:
    if callable(in_degree):
        return in_degree
    if isinstance(in_degree, Mapping):
        return lambda node: int(in_degree[node])
    if isinstance(in_degree, (np.ndarray, list, tuple)):
        arr = np.asarray(in_degree)
        return lambda node: int(arr[node])
    raise ParameterError("in_degree must be a mapping, array, or callable")


def adjust(p: Mapping, in_degree, mode: str, tau: float = 0.0,
           seeds: Collection = ()) -> dict:
    """Degree-adjust a sparse PPR vector into ranking scores.

    A seed with positive mass but zero recorded in-degree ranks ahead of
    every finite score; any other positive-mass node with zero in-degree is
    unreachable under the stored arcs and indicates inconsistent data.
    """
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")
    if tau < 0:
        raise ParameterError("tau must be >= 0")
    if mode == "rppr" and tau <= 0:
        raise ParameterError("rppr requires tau > 0")
    positive = {node: float(mass) for node, mass in p.items() if mass > 0}
    if mode == "ppr":
        return positive
    lookup = _degree_lookup(in_degree)
    seeds = set(seeds)
    scores: dict = {}
    for node, mass in positive.items():
        d = lookup(node)
        if mode == "rppr":
            scores[node] = mass / (d + tau)
        elif d > 0:
            scores[node] = mass / d
        elif node in seeds:
            scores[node] = math.inf
        else:
            raise DataError(
                f"node {node!r} holds PPR mass but has in-degree 0: unreachable mass")
    return scores


def top_cluster(scores: Mapping, n: int, p: Mapping | None = None,
                in_degree=None, mode: str = "ppr", tau: float = 0.0) -> RankedCluster:
    """Deterministic top-n: score descending, ties broken by node ascending.

    Requesting more nodes than the score support returns the whole support.
    Seeds are eligible like any other node.
    """
    if n < 1:
        raise ParameterError("cluster size must be >= 1")
    lookup = _degree_lookup(in_degree) if in_degree is not None else (lambda node: 0)
    order = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:n]
    entries = tuple(
        (node, float(p[node]) if p is not None else float(score), float(score), lookup(node))
        for node, score in order)
    return RankedCluster(mode=mode, tau=tau, n=n, entries=entries)


def rank_cluster(p: Mapping, in_degree, mode: str, n: int, tau: float = 0.0,
                 seeds: Collection = ()) -> RankedCluster:
    """Adjust then rank; the usual composition."""
    scores = adjust(p, in_degree, mode, tau=tau, seeds=seeds)
    return top_cluster(scores, n, p=p, in_degree=in_degree, mode=mode, tau=tau)


def in_out_ratio(graph: Graph, cluster: Collection[int]) -> float:
    """Share of arc endpoints incident to the cluster that stay inside it.

    Computed as ``2 * (stored arcs with both ends in C) / sum over C of
    (in_degree + out_degree)``; equals 1 on a whole undirected graph and 0
    on an independent set.
    """
    members = list(cluster)
    if not members:
        raise ParameterError("cluster must be nonempty")
    mask = np.zeros(graph.n_nodes, dtype=bool)
    mask[members] = True
    internal = 0
    denom = 0
    for u in members:
        internal += int(mask[graph.out_neighbors(u)].sum())
        denom += graph.out_degree(u) + graph.in_degree(u)
    if denom == 0:
        raise DataError("in-and-out ratio undefined: cluster has no incident arcs")
    return 2.0 * internal / denom


def recovery_accuracy(cluster: Collection[int], z: Sequence[int],
                      target_block: int) -> float:
    """Fraction of cluster members whose label matches the target block."""
    members = list(cluster)
    if not members:
        raise ParameterError("cluster must be nonempty")
    z = np.asarray(z)
    return float(np.count_nonzero(z[members] == target_block)) / len(members)


def write_cluster_csv(cluster: RankedCluster, fh: TextIO,
                      ids: Sequence[str] | None = None,
                      seeds: Collection = ()) -> None:
    """Write ``rank,external_id,p,score,in_degree,is_seed`` rows."""
    seeds = set(seeds)
    writer = csv.writer(fh)
    writer.writerow(["rank", "external_id", "p", "score", "in_degree", "is_seed"])
    for rank, (node, raw, score, indeg) in enumerate(cluster.entries, start=1):
        ext = ids[node] if ids is not None else str(node)
        writer.writerow([rank, ext, repr(raw), repr(score), indeg,
                         int(node in seeds or ext in seeds)])


def cluster_metrics(cluster: RankedCluster, graph: Graph | None = None,
                    z: Sequence[int] | None = None,
                    target_block: int | None = None) -> dict:
    """Summary document written next to cluster CSVs."""
    doc = {"mode": cluster.mode, "tau": cluster.tau, "n": cluster.n}
    if graph is not None and len(cluster):
        doc["in_out_ratio"] = in_out_ratio(graph, cluster.nodes())
    if z is not None and target_block is not None and len(cluster):
        doc["accuracy"] = recovery_accuracy(cluster.nodes(), z, target_block)
    return doc
