from __future__ import annotations

import numpy as np

from qcl import WeightedDigraph


def bfs_reachability(g: WeightedDigraph) -> list[list[bool]]:
    """Transitive reachability by BFS; reach[u][v] means v reachable from u."""
    n = g.n
    reach = [[False] * n for _ in range(n)]
    for start in range(n):
        reach[start][start] = True
        stack = [start]
        while stack:
            u = stack.pop()
            for v in g.successors(u):
                if not reach[start][v]:
                    reach[start][v] = True
                    stack.append(v)
    return reach


def oracle_globally_reachable(g: WeightedDigraph) -> tuple[bool, set[int]]:
    """Direct-definition check: some node reachable from every other node."""
    reach = bfs_reachability(g)
    witnesses = {
        v for v in range(g.n) if all(reach[u][v] for u in range(g.n))
    }
    return bool(witnesses), witnesses


def random_digraph(rng, n: int, density: float = 0.35) -> WeightedDigraph:
    w = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j and rng.uniform() < density:
                w[i, j] = 1.0
    return WeightedDigraph(w)
