"""Run the push approximation against a remote graph over HTTP.

:class:`RemoteGraphClient` satisfies the same access contract as a local
graph, keyed by external string ids, with response caching, retry with
exponential backoff, and ``Retry-After`` handling on rate limits.  Because
the push processes its frontier in deterministic FIFO order, a crawl
produces exactly the numbers an in-memory run would, and a run interrupted
mid-way can resume from a checkpoint and still end bit-identical.

Nodes the remote side refuses to serve (404) are treated as dangling, the
same convention local graphs use for nodes without out-arcs, and are
flagged in the client's ``missing`` set and in the checkpoint cache.
"""

from __future__ import annotations

import json
import os
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import quote

import requests

from .errors import DataError, ParameterError, TransportError, TransportSuspended
from .ppr import (PprResult, PreferenceVector, PushState, _as_preference,
                  _check_push_params, _push_loop, finish_result)

ENV_BASE_URL = "PPR_API_BASE"
ENV_TOKEN = "PPR_API_TOKEN"


@dataclass(frozen=True)
class RetryPolicy:
    """Attempt budget and backoff schedule for one remote query."""

    max_attempts: int = 5
    backoff_base: float = 0.25
    backoff_cap: float = 8.0
    retry_after_cap: float = 30.0

    def backoff(self, attempt: int) -> float:
        return min(self.backoff_base * (2.0 ** attempt), self.backoff_cap)


class RemoteGraphClient:
    """Graph access over the two-endpoint wire protocol.

    Cached answers are never refetched within a run; ``fetch_count`` counts
    distinct neighbor-list fetches actually sent over the wire (resumed
    runs restore the count from the checkpoint alongside the cache).
    """

    def __init__(self, base_url: str | None = None, auth_token: str | None = None,
                 retry: RetryPolicy = RetryPolicy(), timeout: float = 10.0,
                 session: requests.Session | None = None):
        base_url = base_url or os.environ.get(ENV_BASE_URL)
        if not base_url:
            raise ParameterError(f"no base URL given and {ENV_BASE_URL} unset")
        self.base_url = base_url.rstrip("/")
        self.auth_token = auth_token if auth_token is not None else os.environ.get(ENV_TOKEN)
        self.retry = retry
        self.timeout = timeout
        if session is None:
            session = requests.Session()
            session.trust_env = False
        self.session = session
        self._out_cache: dict[str, tuple[list[str], int]] = {}
        self._in_cache: dict[str, int] = {}
        self.missing: set[str] = set()
        self.fetch_count = 0

    # -- GraphAccess --------------------------------------------------------

    def out_neighbors(self, node: str) -> list[str]:
        return self._ensure_out(node)[0]

    def out_degree(self, node: str) -> int:
        return self._ensure_out(node)[1]

    def in_degree(self, node: str) -> int:
        cached = self._in_cache.get(node)
        if cached is None:
            doc = self._get(f"/v1/nodes/{quote(str(node), safe='')}/in_degree")
            if doc is None:
                self.missing.add(node)
                cached = 0
            else:
                cached = int(doc["in_degree"])
            self._in_cache[node] = cached
        return cached

    # -- internals ----------------------------------------------------------

    def _ensure_out(self, node: str) -> tuple[list[str], int]:
        cached = self._out_cache.get(node)
        if cached is None:
            doc = self._get(f"/v1/nodes/{quote(str(node), safe='')}/out")
            if doc is None:
                # unknown remotely: dangling-node convention, flagged
                self.missing.add(node)
                cached = ([], 0)
            else:
                cached = ([str(v) for v in doc["out_neighbors"]], int(doc["out_degree"]))
            self._out_cache[node] = cached
            self.fetch_count += 1
        return cached

    def _get(self, path: str) -> dict | None:
        headers = {}
        if self.auth_token:
            headers["Authorization"] = f"Bearer {self.auth_token}"
        url = self.base_url + path
        last_error = "no attempt made"
        for attempt in range(self.retry.max_attempts):
            try:
                resp = self.session.get(url, headers=headers, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = f"transport failure: {exc}"
                time.sleep(self.retry.backoff(attempt))
                continue
            if resp.status_code == 200:
                return resp.json()
            if resp.status_code == 404:
                return None
            if resp.status_code == 429:
                retry_after = resp.headers.get("Retry-After")
                try:
                    pause = min(float(retry_after), self.retry.retry_after_cap)
                except (TypeError, ValueError):
                    pause = self.retry.backoff(attempt)
                last_error = "rate limited (429)"
                time.sleep(pause)
                continue
            if 500 <= resp.status_code < 600:
                last_error = f"server error ({resp.status_code})"
                time.sleep(self.retry.backoff(attempt))
                continue
            raise TransportError(f"unexpected status {resp.status_code} for {url}")
        raise TransportError(
            f"{url} failed after {self.retry.max_attempts} attempts: {last_error}")

    # -- cache snapshot for checkpoints --------------------------------------

    def cache_snapshot(self) -> dict:
        return {
            "out": {node: {"out_neighbors": nbrs, "out_degree": d}
                    for node, (nbrs, d) in self._out_cache.items()},
            "in": dict(self._in_cache),
            "missing": sorted(self.missing),
        }

    def restore_cache(self, snapshot: dict, fetch_count: int) -> None:
        self._out_cache = {node: (list(entry["out_neighbors"]), int(entry["out_degree"]))
                           for node, entry in snapshot.get("out", {}).items()}
        self._in_cache = {node: int(v) for node, v in snapshot.get("in", {}).items()}
        self.missing = set(snapshot.get("missing", []))
        self.fetch_count = int(fetch_count)


# -- checkpoints --------------------------------------------------------------


def write_checkpoint(path, state: PushState, client: RemoteGraphClient,
                     alpha: float, epsilon: float) -> None:
    """Serialize run state as canonical key-sorted JSON (atomic replace)."""
    doc = {
        "alpha": alpha,
        "epsilon": epsilon,
        "p": dict(sorted(state.p.items())),
        "r": dict(sorted(state.r.items())),
        "frontier": list(state.queue),
        "cache": client.cache_snapshot(),
        "fetch_count": client.fetch_count,
        "pushes": state.pushes,
    }
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")))
    tmp.replace(path)


def read_checkpoint(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    for key in ("alpha", "epsilon", "p", "r", "frontier", "cache", "fetch_count", "pushes"):
        if key not in doc:
            raise DataError(f"checkpoint {path} missing field {key!r}")
    mass = sum(doc["p"].values()) + sum(doc["r"].values())
    if abs(mass - 1.0) > 1e-9:
        raise DataError(f"checkpoint {path} violates mass accounting: total {mass!r}")
    return doc


def _state_from_checkpoint(doc: dict) -> PushState:
    state = PushState()
    state.p = {str(k): float(v) for k, v in doc["p"].items()}
    state.r = {str(k): float(v) for k, v in doc["r"].items()}
    state.queue = deque(str(k) for k in doc["frontier"])
    state.in_queue = set(state.queue)
    state.touched = set(state.p) | set(state.r)
    state.pushes = int(doc["pushes"])
    return state


# -- the crawl ----------------------------------------------------------------


def crawl_ppr(client: RemoteGraphClient, pi=None, alpha: float | None = None,
              epsilon: float | None = None, checkpoint_path=None,
              checkpoint_every: int = 1000) -> PprResult:
    """Push-based PPR over a remote graph, numerically identical to a local run.

    Preference keys are external string ids.  When ``checkpoint_path`` names
    an existing file the run resumes from it (``pi`` may then be omitted;
    ``alpha``/``epsilon`` must match the checkpoint if given).  On transport
    failure or interruption the state is checkpointed and
    :class:`TransportSuspended` is raised; rerunning with the same arguments
    finishes the run and yields the same result an uninterrupted run would.
    """
    resume = checkpoint_path is not None and Path(checkpoint_path).exists()
    if resume:
        doc = read_checkpoint(checkpoint_path)
        if alpha is not None and alpha != doc["alpha"]:
            raise ParameterError(f"checkpoint has alpha={doc['alpha']}, got {alpha}")
        if epsilon is not None and epsilon != doc["epsilon"]:
            raise ParameterError(f"checkpoint has epsilon={doc['epsilon']}, got {epsilon}")
        alpha, epsilon = float(doc["alpha"]), float(doc["epsilon"])
        _check_push_params(alpha, epsilon)
        client.restore_cache(doc["cache"], doc["fetch_count"])
        state = _state_from_checkpoint(doc)
    else:
        if pi is None:
            raise ParameterError("a preference vector is required to start a crawl")
        if alpha is None or epsilon is None:
            raise ParameterError("alpha and epsilon are required to start a crawl")
        _check_push_params(alpha, epsilon)
        pref = _as_preference({str(k): v for k, v in
                               (pi.entries if isinstance(pi, PreferenceVector) else pi).items()})
        state = PushState.fresh(pref, epsilon)

    def after_push(pushes: int) -> None:
        if checkpoint_path is not None and pushes % checkpoint_every == 0:
            write_checkpoint(checkpoint_path, state, client, alpha, epsilon)

    try:
        _push_loop(client, state, alpha, epsilon, after_push=after_push)
        # ranking needs in-degrees for every estimated node; record them now
        # (a resumed run with a drained frontier lands here directly)
        for node in state.p:
            client.in_degree(node)
    except (TransportError, KeyboardInterrupt) as exc:
        if checkpoint_path is not None:
            write_checkpoint(checkpoint_path, state, client, alpha, epsilon)
            raise TransportSuspended(
                f"crawl suspended ({exc}); resume from {checkpoint_path}",
                checkpoint_path=checkpoint_path) from exc
        raise

    if checkpoint_path is not None:
        write_checkpoint(checkpoint_path, state, client, alpha, epsilon)
    return finish_result(state, alpha, epsilon)
