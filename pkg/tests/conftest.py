import numpy as np

from pprlocal import Graph, from_arcs


def er_undirected(rng: np.random.Generator, n: int, c: float) -> Graph:
    mat = rng.random((n, n)) < min(c / n, 1.0)
    np.fill_diagonal(mat, False)
    uu, vv = np.nonzero(np.triu(mat))
    return from_arcs([str(i) for i in range(n)],
                     list(zip(uu.tolist(), vv.tolist())), directed=False)


def er_directed(rng: np.random.Generator, n: int, c: float) -> Graph:
    mat = rng.random((n, n)) < min(c / n, 1.0)
    np.fill_diagonal(mat, False)
    uu, vv = np.nonzero(mat)
    return from_arcs([str(i) for i in range(n)],
                     list(zip(uu.tolist(), vv.tolist())), directed=True)


def balanced_directed(rng: np.random.Generator, n: int, max_cycles: int = 4) -> Graph:
    """Union of arc-disjoint directed cycles: in-degree equals out-degree."""
    while True:
        arcs: set[tuple[int, int]] = set()
        ok = True
        for _ in range(int(rng.integers(1, max_cycles + 1))):
            size = int(rng.integers(3, n + 1)) if n > 3 else n
            members = rng.permutation(n)[:size]
            cycle = [(int(members[i]), int(members[(i + 1) % size])) for i in range(size)]
            if any(arc in arcs for arc in cycle):
                ok = False
                break
            arcs.update(cycle)
        if ok:
            graph = from_arcs([str(i) for i in range(n)], arcs, directed=True)
            assert np.array_equal(np.diff(graph.out_offsets), graph.in_degrees)
            return graph


def triangle_with_pendant() -> Graph:
    # undirected triangle a-b-c plus pendant d attached to c
    return from_arcs(["a", "b", "c", "d"],
                     [(0, 1), (0, 2), (1, 2), (2, 3)], directed=False)
