"""Degree-corrected stochastic block model sampling and population analytics.

Conventions follow the identifiable parametrization: degree parameters sum
to one within each block, so the connectivity matrix ``B`` counts expected
arcs between blocks and an arc from ``u`` to ``v`` is Bernoulli with
probability ``theta_out[u] * theta_in[v] * B[z(u), z(v)]``.  Undirected
models use a single ``theta`` and sample each unordered pair once.

Population-level quantities (block transition, block-wise PPR, the node
factorization of the population PPR vector) never materialize the N x N
expected adjacency; a dense ``population_adjacency`` exists purely as a
test oracle.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DataError, ParameterError
from .graph import Graph
from .ppr import exact_ppr_dense, _check_stochastic, _pi_vector

log = logging.getLogger(__name__)

THETA_TOL = 1e-8


def as_rng(seed) -> np.random.Generator:
    """Accept a Generator, an integer seed, or a seed sequence list."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def replicate_rng(master_seed: int, *path: int) -> np.random.Generator:
    """Counter-style stream derivation: replicate i draws from (seed, i).

    Streams for distinct paths are independent, so parallel replicates are
    reproducible regardless of scheduling.
    """
    return np.random.default_rng([int(master_seed), *[int(p) for p in path]])


@dataclass
class DcsbmParams:
    """Concrete (realized) block model parameters.

    ``z`` holds 0-based block labels; ``theta_in``/``theta_out`` are the
    normalized degree parameters (equal for undirected models).  ``meta``
    carries generator bookkeeping such as the SNR of four-parameter models.
    """

    K: int
    B: np.ndarray
    z: np.ndarray
    theta_in: np.ndarray
    theta_out: np.ndarray
    directed: bool
    meta: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return int(self.z.shape[0])

    def block_sizes(self) -> np.ndarray:
        return np.bincount(self.z, minlength=self.K)


def validate_params(params: DcsbmParams) -> dict:
    """Check identifiability and report block-graph diagnostics.

    Returns ``{"strongly_connected": bool, "max_edge_probability": float}``.
    Raises :class:`DataError` when the parametrization itself is broken.
    """
    B = np.asarray(params.B, dtype=float)
    if B.shape != (params.K, params.K):
        raise DataError(f"B must be {params.K}x{params.K}, got {B.shape}")
    if np.any(B < 0):
        raise DataError("B entries must be nonnegative")
    z = np.asarray(params.z)
    if z.min(initial=0) < 0 or z.max(initial=0) >= params.K:
        raise DataError("memberships out of range")
    for name, theta in (("theta_in", params.theta_in), ("theta_out", params.theta_out)):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != z.shape:
            raise DataError(f"{name} must have one entry per node")
        if np.any(theta <= 0):
            raise DataError(f"{name} entries must be positive")
        sums = np.zeros(params.K)
        np.add.at(sums, z, theta)
        if np.max(np.abs(sums - 1.0)) > THETA_TOL:
            raise DataError(f"{name} must sum to 1 within each block")
    n_comp, _ = connected_components(csr_matrix(B > 0), directed=True, connection="strong")
    max_prob = 0.0
    for i in range(params.K):
        out_max = params.theta_out[params.z == i].max(initial=0.0)
        for j in range(params.K):
            in_max = params.theta_in[params.z == j].max(initial=0.0)
            max_prob = max(max_prob, out_max * in_max * B[i, j])
    return {"strongly_connected": bool(n_comp == 1), "max_edge_probability": float(max_prob)}


# -- block-level analytics ---------------------------------------------------


def block_degrees(B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column and row sums of the connectivity matrix: (d_in, d_out)."""
    B = np.asarray(B, dtype=float)
    if np.any(B < 0):
        raise ParameterError("B entries must be nonnegative")
    d_in = B.sum(axis=0)
    d_out = B.sum(axis=1)
    if np.any(d_out == 0) or np.any(d_in == 0):
        raise DataError("zero block row or column: transition undefined")
    return d_in, d_out


def block_transition(B: np.ndarray) -> np.ndarray:
    """Row-normalized connectivity matrix."""
    _, d_out = block_degrees(B)
    return np.asarray(B, dtype=float) / d_out[:, None]


@dataclass(frozen=True)
class BlockPpr:
    """Block-wise PPR with its degree-adjusted form and separation measure.

    ``delta_alpha`` is the relative gap between the seed block's adjusted
    value and the runner-up block's; it is positive exactly when the
    adjusted vector puts the seed block on top, which holds for every
    symmetric connectivity matrix but can fail for directed ones with a
    weakly teleporting walk.
    """

    p_block: np.ndarray
    p_block_adjusted: np.ndarray
    delta_alpha: float
    alpha: float
    seed_block: int


def block_ppr(B: np.ndarray, seed, alpha: float) -> BlockPpr:
    """Solve the block-wise PPR system for a seed block or block preference.

    ``alpha = 0`` is accepted and solved as the no-teleport limit.
    """
    B = np.asarray(B, dtype=float)
    K = B.shape[0]
    d_in, _ = block_degrees(B)
    P = block_transition(B)
    if isinstance(seed, (int, np.integer)):
        seed_block = int(seed)
        if not (0 <= seed_block < K):
            raise ParameterError(f"seed block {seed_block} out of range")
        pi = np.zeros(K)
        pi[seed_block] = 1.0
    else:
        pi = np.asarray(seed, dtype=float)
        seed_block = int(np.argmax(pi))
    p = exact_ppr_dense(P, pi, alpha)
    adjusted = p / d_in
    others = np.delete(adjusted, seed_block)
    runner_up = others.max() if others.size else 0.0
    delta = float((adjusted[seed_block] - runner_up) / adjusted[seed_block])
    return BlockPpr(p, adjusted, delta, float(alpha), seed_block)


# -- generators ---------------------------------------------------------------


def _relative_rates(K: int, b1: float, b2: float) -> np.ndarray:
    if not (b1 > b2 > 0):
        raise ParameterError(f"need b1 > b2 > 0, got b1={b1}, b2={b2}")
    R = np.full((K, K), float(b2))
    np.fill_diagonal(R, float(b1))
    return R


def four_parameter_snr(K: int, b1: float, b2: float) -> float:
    """Expected in-block over out-block edge count for equal block sizes."""
    return b1 / (b2 * (K - 1))


def balanced_membership(K: int, N: int) -> np.ndarray:
    sizes = np.full(K, N // K)
    sizes[: N % K] += 1
    return np.repeat(np.arange(K), sizes)


def uniform_theta(z: np.ndarray, K: int) -> np.ndarray:
    sizes = np.bincount(z, minlength=K)
    if np.any(sizes == 0):
        raise DataError("every block needs at least one member")
    return 1.0 / sizes[z].astype(float)


def sample_membership(N: int, proportions: Sequence[float], rng,
                      max_resamples: int = 100) -> np.ndarray:
    """One multinomial draw per node; resamples (logged) if a block is empty."""
    rng = as_rng(rng)
    prop = np.asarray(proportions, dtype=float)
    if np.any(prop <= 0):
        raise ParameterError("proportions must be positive")
    prop = prop / prop.sum()
    K = prop.shape[0]
    for attempt in range(max_resamples):
        z = rng.choice(K, size=N, p=prop)
        if np.bincount(z, minlength=K).min() > 0:
            if attempt:
                log.info("membership resampled %d time(s) to avoid empty blocks", attempt)
            return z
    raise DataError(f"could not draw memberships without empty blocks in {max_resamples} tries")


def make_four_parameter_sbm(K: int, N: int, b1: float, b2: float,
                            target_delta: float) -> DcsbmParams:
    """Equal blocks, within-rate c*b1 and between-rate c*b2.

    The common factor c is chosen so the expected average degree equals
    ``target_delta``; the implied SNR ``b1 / (b2 (K-1))`` is recorded in
    ``meta``.
    """
    if K < 2 or N < K:
        raise ParameterError("need K >= 2 and N >= K")
    R = _relative_rates(K, b1, b2)
    z = balanced_membership(K, N)
    sizes = np.bincount(z, minlength=K).astype(float)
    c = target_delta * N / float((R * np.outer(sizes, sizes)).sum())
    if c * b1 > 1.0:
        raise ParameterError(
            f"within-block probability {c * b1:.4f} exceeds 1; lower target_delta")
    B = c * R * np.outer(sizes, sizes)
    theta = uniform_theta(z, K)
    return DcsbmParams(K, B, z, theta, theta, directed=False,
                       meta={"family": "four_parameter", "b1": b1, "b2": b2,
                             "snr": four_parameter_snr(K, b1, b2),
                             "edge_scale": c, "target_delta": target_delta})


def make_geometric_sbm(K: int, N: int, b1: float, b2: float, target_delta: float,
                       ratio: float, rng) -> DcsbmParams:
    """Classic SBM with block proportions proportional to (1, b, b^2, ...).

    Per-pair probabilities stay c*b1 within and c*b2 between blocks, so
    larger blocks carry higher node degrees.
    """
    if ratio <= 0:
        raise ParameterError("ratio must be positive")
    weights = ratio ** np.arange(K)
    z = sample_membership(N, weights / weights.sum(), rng)
    R = _relative_rates(K, b1, b2)
    sizes = np.bincount(z, minlength=K).astype(float)
    c = target_delta * N / float((R * np.outer(sizes, sizes)).sum())
    if c * b1 > 1.0:
        raise ParameterError(
            f"within-block probability {c * b1:.4f} exceeds 1; lower target_delta")
    B = c * R * np.outer(sizes, sizes)
    theta = uniform_theta(z, K)
    return DcsbmParams(K, B, z, theta, theta, directed=False,
                       meta={"family": "geometric_sbm", "b1": b1, "b2": b2, "ratio": ratio,
                             "snr": four_parameter_snr(K, b1, b2),
                             "edge_scale": c, "target_delta": target_delta})


def power_law_weights(n: int, x_min: float, beta: float, rng) -> np.ndarray:
    """I.i.d. Pareto(x_min, beta) draws: P(X > t) = (t / x_min)^(1 - beta)."""
    if beta <= 1 or x_min <= 0:
        raise ParameterError("need beta > 1 and x_min > 0")
    rng = as_rng(rng)
    return x_min * rng.random(n) ** (-1.0 / (beta - 1.0))


def sample_power_law_theta(N: int, z: np.ndarray, x_min: float, beta: float,
                           seed) -> np.ndarray:
    """Pareto draws normalized to sum 1 within each block."""
    z = np.asarray(z)
    K = int(z.max()) + 1
    if np.any(np.bincount(z, minlength=K) == 0):
        raise DataError("every block needs at least one member")
    weights = power_law_weights(N, x_min, beta, as_rng(seed))
    sums = np.zeros(K)
    np.add.at(sums, z, weights)
    return weights / sums[z]


def make_power_law_dcsbm(K: int, N: int, b1: float, b2: float, target_delta: float,
                         x_min: float, beta: float, rng,
                         proportions: Sequence[float] | None = None) -> DcsbmParams:
    """DC-SBM with homogeneous block connectivity and power-law node weights."""
    rng = as_rng(rng)
    if proportions is None:
        proportions = np.full(K, 1.0 / K)
    z = sample_membership(N, proportions, rng)
    R = _relative_rates(K, b1, b2)
    B = R * (target_delta * N / R.sum())
    theta = sample_power_law_theta(N, z, x_min, beta, rng)
    return DcsbmParams(K, B, z, theta, theta, directed=False,
                       meta={"family": "power_law_dcsbm", "b1": b1, "b2": b2,
                             "x_min": x_min, "beta": beta,
                             "snr": four_parameter_snr(K, b1, b2),
                             "target_delta": target_delta})


def expected_average_degree(params: DcsbmParams) -> float:
    """Population average degree: total expected arc mass over N."""
    return float(np.asarray(params.B).sum() / params.n_nodes)


# -- sampling -----------------------------------------------------------------


def _graph_from_pairs(n: int, sources: np.ndarray, targets: np.ndarray,
                      directed: bool) -> Graph:
    # pairs are unique by construction; sort into canonical CSR order
    order = np.lexsort((targets, sources))
    sources, targets = sources[order], targets[order]
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.add.at(offsets, sources + 1, 1)
    np.cumsum(offsets, out=offsets)
    return Graph(n, directed, offsets, targets, tuple(str(i) for i in range(n)))


def sample_dcsbm_detailed(params: DcsbmParams, seed, validate: bool = True
                          ) -> tuple[Graph, dict]:
    """Draw one graph and report sampling statistics.

    Self-loops are never sampled (the diagonal is skipped).  Probabilities
    above 1 are clipped and counted; a clip rate above 1% of pairs raises a
    warning and is recorded in the returned stats.
    """
    if validate:
        validate_params(params)
    rng = as_rng(seed)
    K, z = params.K, np.asarray(params.z)
    n = params.n_nodes
    B = np.asarray(params.B, dtype=float)
    blocks = [np.flatnonzero(z == k) for k in range(K)]
    src_parts: list[np.ndarray] = []
    dst_parts: list[np.ndarray] = []
    clipped = 0
    pair_count = 0

    def draw_block(rows, cols, scale, upper_only):
        nonlocal clipped, pair_count
        prob = params.theta_out[rows][:, None] * params.theta_in[cols][None, :] * scale
        if upper_only:
            keep = np.triu(np.ones(prob.shape, dtype=bool), k=1)
        else:
            keep = np.ones(prob.shape, dtype=bool)
            if rows is cols:
                np.fill_diagonal(keep, False)
        pair_count += int(keep.sum())
        clipped += int((prob[keep] > 1.0).sum())
        np.minimum(prob, 1.0, out=prob)
        hits = (rng.random(prob.shape) < prob) & keep
        uu, vv = np.nonzero(hits)
        return rows[uu], cols[vv]

    if params.directed:
        for i in range(K):
            for j in range(K):
                if not blocks[i].size or not blocks[j].size:
                    continue
                uu, vv = draw_block(blocks[i], blocks[j], B[i, j], upper_only=False)
                src_parts.append(uu)
                dst_parts.append(vv)
    else:
        for i in range(K):
            for j in range(i, K):
                if not blocks[i].size or not blocks[j].size:
                    continue
                uu, vv = draw_block(blocks[i], blocks[j], B[i, j], upper_only=(i == j))
                src_parts.extend([uu, vv])
                dst_parts.extend([vv, uu])

    if src_parts:
        sources = np.concatenate(src_parts).astype(np.int64)
        targets = np.concatenate(dst_parts).astype(np.int64)
    else:
        sources = targets = np.empty(0, dtype=np.int64)
    stats = {"pair_count": pair_count, "clipped_pairs": clipped,
             "clip_rate": clipped / pair_count if pair_count else 0.0,
             "n_arcs": int(sources.shape[0])}
    if stats["clip_rate"] > 0.01:
        warnings.warn(f"clipped {clipped} of {pair_count} pair probabilities "
                      f"({stats['clip_rate']:.2%})", stacklevel=2)
    return _graph_from_pairs(n, sources, targets, params.directed), stats


def sample_dcsbm(params: DcsbmParams, seed, validate: bool = True) -> Graph:
    """Draw one graph from the model; see :func:`sample_dcsbm_detailed`."""
    graph, _ = sample_dcsbm_detailed(params, seed, validate=validate)
    return graph


# -- population analytics -----------------------------------------------------


def population_adjacency(params: DcsbmParams, dense_limit: int = 10_000) -> np.ndarray:
    """Dense expected adjacency (unclipped, diagonal included); test oracle only."""
    n = params.n_nodes
    if n > dense_limit:
        raise ParameterError(f"population adjacency of size {n} exceeds dense limit")
    B = np.asarray(params.B, dtype=float)
    return params.theta_out[:, None] * params.theta_in[None, :] * B[params.z][:, params.z]


def population_ppr(params: DcsbmParams, pi, alpha: float
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Population PPR and adjusted PPR without forming the N x N matrix.

    The walk on the expected graph factorizes through the block transition:
    after the first step the chain's distribution over nodes is the block
    distribution spread by theta_in, so the node vector is the block-wise
    PPR lifted by theta_in plus the step-zero teleport mass that stays on
    the preference support itself.
    """
    n = params.n_nodes
    vec = _pi_vector(pi, n)
    bpi = np.zeros(params.K)
    np.add.at(bpi, params.z, vec)
    bp = block_ppr(params.B, bpi, alpha)
    d_in, _ = block_degrees(params.B)
    lifted = params.theta_in * bp.p_block[params.z]
    p = lifted + alpha * (vec - params.theta_in * bpi[params.z])
    appr = p / (params.theta_in * d_in[params.z])
    return p, appr


def landing_probabilities(P: np.ndarray, pi, steps: int,
                          dense_limit: int = 10_000) -> np.ndarray:
    """Rows s = 0..steps-1 of the walk occupancy: row s is (P^s)^T pi."""
    if steps < 1:
        raise ParameterError("steps must be >= 1")
    P = _check_stochastic(P, dense_limit)
    n = P.shape[0]
    out = np.empty((steps, n))
    out[0] = _pi_vector(pi, n)
    for s in range(1, steps):
        out[s] = P.T @ out[s - 1]
    return out


@dataclass(frozen=True)
class LdEquivalence:
    """Comparison of geometric PPR weights against discriminant weights."""

    K: int
    b1: float
    b2: float
    lambda2: float
    alpha: float
    steps: int
    cosine: float
    rankings_agree: bool


def _ld_instance(K: int, b1: float, b2: float, per_block: int) -> DcsbmParams:
    # deterministic, globally distinct weights so node scores have no exact
    # ties (symmetric non-seed blocks would otherwise tie pairwise)
    n = K * per_block
    z = balanced_membership(K, n)
    raw = 1.0 + np.arange(n) / n
    sums = np.zeros(K)
    np.add.at(sums, z, raw)
    theta = raw / sums[z]
    B = _relative_rates(K, b1, b2)
    return DcsbmParams(K, B, z, theta, theta, directed=False)


def ld_ppr_equivalence(b1: float, b2: float, K: int,
                       alpha_override: float | None = None, steps: int = 30,
                       per_block: int = 8) -> LdEquivalence:
    """Check that geometric PPR weights match discriminant weights.

    With homogeneous block connectivity, truncated-walk discriminant scores
    use weights proportional to ``lambda2**s``; choosing the teleportation
    constant ``1 - lambda2`` makes the PPR weights ``alpha (1-alpha)**s``
    proportional to them.  The report carries the cosine similarity of the
    two weight vectors and whether they rank the nodes of a small
    heterogeneous population instance identically.
    """
    if K < 2:
        raise ParameterError("need K >= 2 blocks")
    P = block_transition(_relative_rates(K, b1, b2))
    eigs = np.linalg.eigvalsh(P)
    lambda2 = float(np.sort(eigs)[-2])
    alpha = float(alpha_override) if alpha_override is not None else 1.0 - lambda2
    if not (0.0 < alpha <= 1.0):
        raise ParameterError(f"teleportation constant {alpha} outside (0, 1]")
    s = np.arange(steps)
    w_ppr = alpha * (1.0 - alpha) ** s
    w_ld = lambda2 ** s
    cosine = float(w_ppr @ w_ld / (np.linalg.norm(w_ppr) * np.linalg.norm(w_ld)))

    inst = _ld_instance(K, b1, b2, per_block)
    A = population_adjacency(inst)
    P_pop = A / A.sum(axis=1, keepdims=True)
    pi = np.zeros(inst.n_nodes)
    pi[0] = 1.0
    landing = landing_probabilities(P_pop, pi, steps)
    rank_ppr = np.lexsort((np.arange(inst.n_nodes), -(w_ppr @ landing)))
    rank_ld = np.lexsort((np.arange(inst.n_nodes), -(w_ld @ landing)))
    return LdEquivalence(K, b1, b2, lambda2, alpha, steps, cosine,
                         bool(np.array_equal(rank_ppr, rank_ld)))


# -- parameter files ----------------------------------------------------------


def realize_params(doc: Mapping, seed_override=None) -> DcsbmParams:
    """Materialize a parameter document into concrete model parameters.

    Expected keys: ``K``, ``N``, ``B`` (K x K list), ``z`` (1-based labels)
    or ``proportions``, ``theta`` ({"mode": "uniform"} or {"mode":
    "power_law", "x_min": ..., "beta": ...}), ``directed``, ``seed``.
    """
    try:
        K = int(doc["K"])
        N = int(doc["N"])
        B = np.asarray(doc["B"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"parameter document missing or malformed field: {exc}") from exc
    if B.shape != (K, K):
        raise DataError(f"B must be {K}x{K}")
    directed = bool(doc.get("directed", False))
    seed = int(seed_override if seed_override is not None else doc.get("seed", 0))
    if "z" in doc:
        z = np.asarray(doc["z"], dtype=int) - 1
        if z.shape != (N,) or z.min() < 0 or z.max() >= K:
            raise DataError("z must hold N labels in 1..K")
    elif "proportions" in doc:
        z = sample_membership(N, doc["proportions"], replicate_rng(seed, 0))
    else:
        raise DataError("parameter document needs 'z' or 'proportions'")
    theta_doc = doc.get("theta", {"mode": "uniform"})
    mode = theta_doc.get("mode", "uniform")
    if mode == "uniform":
        theta_in = theta_out = uniform_theta(z, K)
    elif mode == "power_law":
        x_min, beta = float(theta_doc["x_min"]), float(theta_doc["beta"])
        theta_in = sample_power_law_theta(N, z, x_min, beta, replicate_rng(seed, 1))
        # directed models get an independent out-parameter draw
        theta_out = (sample_power_law_theta(N, z, x_min, beta, replicate_rng(seed, 2))
                     if directed else theta_in)
    else:
        raise DataError(f"unknown theta mode {mode!r}")
    return DcsbmParams(K, B, z, theta_in, theta_out,
                       directed=directed, meta={"seed": seed})
