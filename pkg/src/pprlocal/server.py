"""HTTP test server exposing an in-memory graph over the crawl protocol.

Endpoints (UTF-8 JSON):

    GET /v1/nodes/{id}/out        -> {"id", "out_degree", "out_neighbors"} | 404
    GET /v1/nodes/{id}/in_degree  -> {"id", "in_degree"} | 404

Fault injection (429 rate, 5xx rate, latency) exercises client retry
behavior; 429 responses carry a ``Retry-After`` header in seconds.  The
server handles requests concurrently over the immutable graph.
"""

from __future__ import annotations

import json
import random
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import unquote

from .graph import Graph


class GraphServer:
    """Handle for a running server; use as a context manager in tests."""

    def __init__(self, httpd: ThreadingHTTPServer, thread: threading.Thread):
        self._httpd = httpd
        self._thread = thread

    @property
    def base_url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    @property
    def request_count(self) -> int:
        return self._httpd.request_tally  # type: ignore[attr-defined]

    def fail_after(self, n_requests: int | None) -> None:
        """Respond 503 to every request once ``n_requests`` have been served.

        Pass ``None`` to heal the server again.  Used to simulate a remote
        endpoint dying mid-crawl.
        """
        self._httpd.fail_after = n_requests  # type: ignore[attr-defined]

    def shutdown(self) -> None:
        self._httpd.shutdown()
        self._thread.join(timeout=5)
        self._httpd.server_close()

    def __enter__(self) -> "GraphServer":
        return self

    def __exit__(self, *exc) -> None:
        self.shutdown()


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # keep test output quiet
        pass

    def _send(self, status: int, doc: dict, headers: dict | None = None) -> None:
        body = json.dumps(doc).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        for key, value in (headers or {}).items():
            self.send_header(key, value)
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self) -> None:  # noqa: N802 (http.server API)
        server = self.server
        with server.lock:  # type: ignore[attr-defined]
            server.request_tally += 1  # type: ignore[attr-defined]
            tally = server.request_tally
            dying = server.fail_after is not None and tally > server.fail_after
            roll_429 = server.faults["rate_429"] > 0 and \
                server.rng.random() < server.faults["rate_429"]
            roll_5xx = server.faults["rate_5xx"] > 0 and \
                server.rng.random() < server.faults["rate_5xx"]
        if server.faults["latency"] > 0:
            time.sleep(server.faults["latency"])
        if dying:
            self._send(503, {"error": "service unavailable"})
            return
        if roll_429:
            self._send(429, {"error": "rate limited"},
                       {"Retry-After": str(server.faults["retry_after"])})
            return
        if roll_5xx:
            self._send(500, {"error": "injected failure"})
            return

        parts = self.path.strip("/").split("/")
        if len(parts) != 4 or parts[0] != "v1" or parts[1] != "nodes":
            self._send(404, {"error": "unknown route"})
            return
        ext = unquote(parts[2])
        graph: Graph = server.graph  # type: ignore[attr-defined]
        node = graph.index.get(ext)
        if node is None:
            self._send(404, {"error": f"unknown node {ext!r}"})
            return
        if parts[3] == "out":
            neighbors = [graph.ids[int(v)] for v in graph.out_neighbors(node)]
            self._send(200, {"id": ext, "out_degree": graph.out_degree(node),
                             "out_neighbors": neighbors})
        elif parts[3] == "in_degree":
            self._send(200, {"id": ext, "in_degree": graph.in_degree(node)})
        else:
            self._send(404, {"error": "unknown route"})


def serve_graph(graph: Graph, bind_address: tuple[str, int] = ("127.0.0.1", 0),
                fault_429: float = 0.0, fault_5xx: float = 0.0,
                latency: float = 0.0, retry_after: float = 0.0,
                fault_seed: int = 0) -> GraphServer:
    """Start serving ``graph`` on ``bind_address`` in a daemon thread.

    Port 0 binds an ephemeral port; read it back from ``base_url``.
    Fault rates are probabilities per request, drawn from a seeded stream.
    """
    httpd = ThreadingHTTPServer(bind_address, _Handler)
    httpd.daemon_threads = True
    httpd.graph = graph  # type: ignore[attr-defined]
    httpd.faults = {"rate_429": fault_429, "rate_5xx": fault_5xx,  # type: ignore[attr-defined]
                    "latency": latency, "retry_after": retry_after}
    httpd.rng = random.Random(fault_seed)  # type: ignore[attr-defined]
    httpd.lock = threading.Lock()  # type: ignore[attr-defined]
    httpd.request_tally = 0  # type: ignore[attr-defined]
    httpd.fail_after = None  # type: ignore[attr-defined]
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    return GraphServer(httpd, thread)
