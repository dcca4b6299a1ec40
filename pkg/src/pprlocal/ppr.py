"""Personalized PageRank solvers.

``approximate_ppr`` is the push-based local approximation.  It maintains an
estimate ``p`` and a residual ``r`` and repeatedly moves mass out of the
residual of one violating node at a time, using lazy-walk bookkeeping with
the rescaled teleportation constant ``alpha' = alpha / (2 - alpha)``:

    p[u] += alpha' * r[u]
    r[v] += (1 - alpha') * r[u] / (2 * d_out(u))   for each out-neighbor v
    r[u]  = (1 - alpha') * r[u] / 2

Violating nodes are processed in deterministic FIFO order, so identical
inputs produce bit-identical outputs and interrupted runs can resume.  A
node enters the frontier as soon as its residual reaches ``epsilon`` (the
smallest possible threshold, since every node has effective out-degree at
least 1); its actual threshold ``epsilon * d_out`` is evaluated only when it
is popped, so remote access implementations fetch neighbor lists only for
nodes that might need a push.

``exact_ppr_dense`` and ``ppr_series`` are small dense solvers used as
independent oracles and for population-level analytics.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import DataError, NumericalError, ParameterError
from .graph import Graph, GraphAccess

DENSE_LIMIT = 10_000

MASS_TOL = 1e-12


class PreferenceVector:
    """A probability distribution over nodes used to personalize the walk.

    Entries must be strictly positive and sum to 1 within ``1e-12``.  Entry
    order is preserved; it determines the initial frontier order of the push
    and is therefore part of the deterministic input.
    """

    __slots__ = ("entries",)

    def __init__(self, entries: Mapping):
        items = dict(entries)
        if not items:
            raise ParameterError("preference vector must be nonempty")
        total = 0.0
        for node, mass in items.items():
            if not mass > 0.0:
                raise ParameterError(f"preference mass for {node!r} must be > 0")
            total += mass
        if abs(total - 1.0) > MASS_TOL:
            raise ParameterError(f"preference masses sum to {total!r}, expected 1")
        self.entries = items

    @classmethod
    def seed(cls, node) -> "PreferenceVector":
        return cls({node: 1.0})

    @classmethod
    def uniform(cls, nodes: Iterable) -> "PreferenceVector":
        nodes = list(nodes)
        if len(set(nodes)) != len(nodes):
            raise ParameterError("duplicate nodes in uniform preference")
        return cls({node: 1.0 / len(nodes) for node in nodes})

    def support(self):
        return list(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PreferenceVector):
            return NotImplemented
        return self.entries == other.entries


@dataclass(frozen=True)
class PprResult:
    """Outcome of one push run.

    ``p`` and ``r`` hold the strictly positive entries of the estimate and
    residual, keyed by node and ordered by key.  At termination every node
    satisfies ``r[u] < epsilon * d_out(u)`` (with dangling nodes counting
    one implicit self-loop), and ``sum(p) + sum(r) == 1`` up to float error.
    """

    alpha: float
    epsilon: float
    p: dict
    r: dict
    pushes: int
    nodes_touched: int

    def mass(self) -> float:
        return sum(self.p.values()) + sum(self.r.values())


def _as_preference(pi) -> PreferenceVector:
    return pi if isinstance(pi, PreferenceVector) else PreferenceVector(pi)


def _check_push_params(alpha: float, epsilon: float) -> None:
    if not (0.0 < alpha <= 1.0):
        raise ParameterError(f"alpha must be in (0, 1], got {alpha}")
    if not epsilon > 0.0:
        raise ParameterError(f"epsilon must be > 0, got {epsilon}")


class PushState:
    """Mutable state of a push run; serializable for crawl checkpoints."""

    __slots__ = ("p", "r", "queue", "in_queue", "touched", "pushes")

    def __init__(self):
        self.p: dict = {}
        self.r: dict = {}
        self.queue: deque = deque()
        self.in_queue: set = set()
        self.touched: set = set()
        self.pushes = 0

    @classmethod
    def fresh(cls, pi: PreferenceVector, epsilon: float) -> "PushState":
        state = cls()
        for node, mass in pi.entries.items():
            state.r[node] = mass
            state.touched.add(node)
        for node, mass in pi.entries.items():
            if mass >= epsilon and node not in state.in_queue:
                state.queue.append(node)
                state.in_queue.add(node)
        return state


def _push_loop(access: GraphAccess, state: PushState, alpha: float, epsilon: float,
               after_push: Callable[[int], None] | None = None) -> None:
    """Drain the frontier of ``state`` in FIFO order.

    ``after_push`` is invoked with the running push count after each push;
    crawl runs use it to write periodic checkpoints.
    """
    a2 = alpha / (2.0 - alpha)
    p, r = state.p, state.r
    queue, in_queue, touched = state.queue, state.in_queue, state.touched
    while queue:
        # peek before fetching so a transport failure leaves the frontier intact
        u = queue[0]
        ru = r[u]
        d = access.out_degree(u)
        queue.popleft()
        in_queue.discard(u)
        dd = d if d > 0 else 1
        if ru < epsilon * dd:
            continue
        p[u] = p.get(u, 0.0) + a2 * ru
        state.pushes += 1
        r[u] = (1.0 - a2) * ru / 2.0
        share = (1.0 - a2) * ru / (2.0 * dd)
        if share > 0.0:
            neighbors = access.out_neighbors(u) if d > 0 else (u,)
            for v in neighbors:
                rv = r.get(v, 0.0) + share
                r[v] = rv
                touched.add(v)
                if rv >= epsilon and v not in in_queue:
                    queue.append(v)
                    in_queue.add(v)
        if r[u] >= epsilon and u not in in_queue:
            queue.append(u)
            in_queue.add(u)
        if after_push is not None:
            after_push(state.pushes)


def _push_csr(graph: Graph, pi: PreferenceVector, alpha: float, epsilon: float):
    """Array-based push over a local Graph, bit-identical to ``_push_loop``.

    Neighbor updates write disjoint slots, so the vectorized adds produce
    exactly the floats the scalar loop would.
    """
    n = graph.n_nodes
    a2 = alpha / (2.0 - alpha)
    offsets, targets = graph.out_offsets, graph.out_targets
    p = np.zeros(n)
    r = np.zeros(n)
    touched = np.zeros(n, dtype=bool)
    in_queue = np.zeros(n, dtype=bool)
    queue: deque = deque()
    for node, mass in pi.entries.items():
        r[node] = mass
        touched[node] = True
    for node, mass in pi.entries.items():
        if mass >= epsilon and not in_queue[node]:
            queue.append(node)
            in_queue[node] = True
    pushes = 0
    while queue:
        u = queue.popleft()
        in_queue[u] = False
        ru = float(r[u])
        s, e = int(offsets[u]), int(offsets[u + 1])
        d = e - s
        dd = d if d > 0 else 1
        if ru < epsilon * dd:
            continue
        p[u] += a2 * ru
        pushes += 1
        r[u] = (1.0 - a2) * ru / 2.0
        share = (1.0 - a2) * ru / (2.0 * dd)
        if share > 0.0 and d > 0:
            tg = targets[s:e]
            r[tg] += share
            touched[tg] = True
            fresh = tg[(r[tg] >= epsilon) & ~in_queue[tg]]
            if fresh.size:
                queue.extend(fresh.tolist())
                in_queue[fresh] = True
        elif share > 0.0:
            r[u] += share
            touched[u] = True
            if r[u] >= epsilon and not in_queue[u]:
                queue.append(u)
                in_queue[u] = True
        if r[u] >= epsilon and not in_queue[u]:
            queue.append(u)
            in_queue[u] = True
    p_map = {int(i): float(p[i]) for i in np.flatnonzero(p)}
    r_map = {int(i): float(r[i]) for i in np.flatnonzero(r)}
    return p_map, r_map, pushes, int(touched.sum())


def approximate_ppr(access: GraphAccess, pi, alpha: float, epsilon: float) -> PprResult:
    """Push-based epsilon-approximate personalized PageRank.

    Works against any :class:`GraphAccess`; a local :class:`Graph` takes a
    fast array path that produces bit-identical results.  On undirected
    graphs (and directed graphs whose in- and out-degrees coincide) every
    touched node's estimate is within ``epsilon * d_out`` of the exact PPR
    value; on general directed graphs the residual certificate still holds
    and the gap vanishes as ``epsilon`` shrinks.
    """
    pi = _as_preference(pi)
    _check_push_params(alpha, epsilon)
    if isinstance(access, Graph):
        for node in pi.entries:
            if not isinstance(node, (int, np.integer)) or not 0 <= node < access.n_nodes:
                raise ParameterError(f"preference node {node!r} is not a valid index")
        p, r, pushes, touched = _push_csr(access, pi, alpha, epsilon)
        return PprResult(alpha, epsilon, p, r, pushes, touched)
    state = PushState.fresh(pi, epsilon)
    _push_loop(access, state, alpha, epsilon)
    return finish_result(state, alpha, epsilon)


def finish_result(state: PushState, alpha: float, epsilon: float) -> PprResult:
    """Package a drained push state into a canonical, key-sorted result."""
    p = {k: state.p[k] for k in sorted(state.p) if state.p[k] != 0.0}
    r = {k: state.r[k] for k in sorted(state.r) if state.r[k] != 0.0}
    return PprResult(alpha, epsilon, p, r, state.pushes, len(state.touched))


def vertex_budget(alpha: float, epsilon: float, support: int) -> float:
    """Upper bound on the number of nodes a push run can touch."""
    a2 = alpha / (2.0 - alpha)
    if a2 >= 1.0:
        return float("inf")
    return 2.0 / (epsilon * (1.0 - a2)) + support


def serialize_result(result: PprResult, ids: Iterable[str] | None = None) -> str:
    """Canonical key-sorted JSON form of a result.

    ``ids`` maps dense indices to external ids for results computed on a
    local graph; crawl results are already keyed by external id.
    """
    if ids is not None:
        ids = tuple(ids)
        key = lambda k: ids[k]
    else:
        key = lambda k: str(k)
    doc = {
        "alpha": result.alpha,
        "epsilon": result.epsilon,
        "p": {key(k): v for k, v in result.p.items()},
        "r": {key(k): v for k, v in result.r.items()},
        "pushes": result.pushes,
        "nodes_touched": result.nodes_touched,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def parse_result(text: str) -> PprResult:
    """Inverse of :func:`serialize_result`; keys stay external ids."""
    try:
        doc = json.loads(text)
        return PprResult(
            alpha=float(doc["alpha"]),
            epsilon=float(doc["epsilon"]),
            p={str(k): float(v) for k, v in doc["p"].items()},
            r={str(k): float(v) for k, v in doc["r"].items()},
            pushes=int(doc["pushes"]),
            nodes_touched=int(doc["nodes_touched"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed result document: {exc}") from exc


# -- dense solvers ----------------------------------------------------------


def _check_stochastic(P: np.ndarray, dense_limit: int) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ParameterError("transition matrix must be square")
    if P.shape[0] > dense_limit:
        raise ParameterError(f"matrix of size {P.shape[0]} exceeds dense limit {dense_limit}")
    if np.any(P < -1e-12):
        raise ParameterError("transition matrix has negative entries")
    if np.max(np.abs(P.sum(axis=1) - 1.0)) > 1e-10:
        raise ParameterError("transition matrix rows must sum to 1 within 1e-10")
    return P


def _pi_vector(pi, n: int) -> np.ndarray:
    if isinstance(pi, (PreferenceVector, Mapping)):
        entries = pi.entries if isinstance(pi, PreferenceVector) else PreferenceVector(pi).entries
        vec = np.zeros(n)
        for node, mass in entries.items():
            vec[int(node)] += mass
        return vec
    vec = np.asarray(pi, dtype=float)
    if vec.shape != (n,):
        raise ParameterError(f"preference vector has shape {vec.shape}, expected ({n},)")
    if np.any(vec < 0) or abs(vec.sum() - 1.0) > MASS_TOL:
        raise ParameterError("preference vector must be a probability distribution")
    return vec


def _lazy_stationary(P: np.ndarray, start: np.ndarray,
                     tol: float = 1e-12, max_iter: int = 1_000_000) -> np.ndarray:
    # Iterating the lazy matrix (I + P)/2 keeps the chain aperiodic, so the
    # iteration converges even on bipartite structures.
    x = start.copy()
    for _ in range(max_iter):
        nxt = 0.5 * (x + P.T @ x)
        if np.abs(nxt - x).sum() <= tol:
            return nxt
        x = nxt
    raise NumericalError("power iteration did not converge")


def exact_ppr_dense(P: np.ndarray, pi, alpha: float,
                    dense_limit: int = DENSE_LIMIT) -> np.ndarray:
    """Exact PPR on a dense row-stochastic matrix by direct linear solve.

    ``alpha = 0`` is solved as the limiting stationary distribution via lazy
    power iteration started from ``pi``.
    """
    P = _check_stochastic(P, dense_limit)
    n = P.shape[0]
    vec = _pi_vector(pi, n)
    if not (0.0 <= alpha <= 1.0):
        raise ParameterError(f"alpha must be in [0, 1], got {alpha}")
    if alpha == 1.0:
        return vec.copy()
    if alpha == 0.0:
        return _lazy_stationary(P, vec)
    try:
        p = np.linalg.solve(np.eye(n) - (1.0 - alpha) * P.T, alpha * vec)
    except np.linalg.LinAlgError as exc:  # unreachable for alpha > 0
        raise NumericalError(f"singular PPR system: {exc}") from exc
    return p


def ppr_series(P: np.ndarray, pi, alpha: float, steps: int,
               dense_limit: int = DENSE_LIMIT) -> np.ndarray:
    """Truncated geometric landing-probability sum.

    Returns ``alpha * sum_{s=0}^{steps} (1-alpha)^s pi^T P^s``; the l1 gap to
    the exact vector is at most ``(1-alpha)^(steps+1)``.
    """
    P = _check_stochastic(P, dense_limit)
    if steps < 0:
        raise ParameterError("steps must be >= 0")
    if not (0.0 < alpha <= 1.0):
        raise ParameterError(f"alpha must be in (0, 1], got {alpha}")
    x = _pi_vector(pi, P.shape[0])
    acc = alpha * x
    weight = alpha
    for _ in range(steps):
        x = P.T @ x
        weight *= (1.0 - alpha)
        if weight == 0.0:
            break
        acc = acc + weight * x
    return acc
