"""Communication graphs: construction, validation, and metrics.

Graphs are directed; an undirected drawing always stands for a pair of
opposite channels, which is how the builders and the edge-list loader
realize them. Everything here is deterministic given its arguments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx

_MAX_REGULAR_TRIES = 200


@dataclass(frozen=True)
class Digraph:
    """n processes (ids 1..n) and a set of directed edges.

    `overrides` optionally carries per-edge channel parameters
    (K/D/stabilization/drop) for edges that differ from the scenario
    defaults. Instances are treated as immutable; share freely.
    """

    n: int
    edges: frozenset
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"graph needs at least one process, got n={self.n}")
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop at {u}")
            if not (1 <= u <= self.n and 1 <= v <= self.n):
                raise ValueError(f"edge ({u}, {v}) outside 1..{self.n}")
        for e in self.overrides:
            if e not in self.edges:
                raise ValueError(f"override for non-edge {e}")

    def out_neighbors(self, u):
        return sorted(v for (a, v) in self.edges if a == u)


def build_ring(n: int) -> Digraph:
    if n < 2:
        raise ValueError(f"a ring needs at least 2 processes, got {n}")
    edges = set()
    for u in range(1, n + 1):
        v = u % n + 1
        edges.add((u, v))
        edges.add((v, u))
    return Digraph(n, frozenset(edges))


def build_regular(n: int, k: int, seed) -> Digraph:
    """Connected k-regular graph on n vertices as bidirectional channels.

    Draws from the configuration-model generator and retries with a
    perturbed seed until the sample is connected.
    """
    if k < 1 or k >= n:
        raise ValueError(f"degree {k} infeasible for {n} vertices")
    if (n * k) % 2 != 0:
        raise ValueError(f"no {k}-regular graph on {n} vertices (odd degree sum)")
    if k == 1 and n > 2:
        raise ValueError("a 1-regular graph on more than 2 vertices is disconnected")
    for attempt in range(_MAX_REGULAR_TRIES):
        g = nx.random_regular_graph(k, n, seed=seed + attempt)
        if nx.is_connected(g):
            edges = set()
            for a, b in g.edges():
                edges.add((a + 1, b + 1))  # generator labels from 0
                edges.add((b + 1, a + 1))
            return Digraph(n, frozenset(edges))
    raise RuntimeError(
        f"no connected {k}-regular graph on {n} vertices in "
        f"{_MAX_REGULAR_TRIES} tries from seed {seed}"
    )


def validate_span_tree(g: Digraph, add_edges, correct) -> bool:
    """Can a directed tree over `add_edges` reach every correct process?

    The tree must root at the smallest correct id and touch correct
    processes only, so edges into or out of crashed processes never help.
    """
    if not correct:
        raise ValueError("no correct processes")
    correct = set(correct)
    root = min(correct)
    adj = {}
    for u, v in add_edges:
        if u in correct and v in correct:
            adj.setdefault(u, []).append(v)
    seen = {root}
    frontier = [root]
    while frontier:
        nxt = []
        for u in frontier:
            for v in adj.get(u, ()):
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    return seen == correct


def diameter(g: Digraph, restrict_to=None) -> int:
    """Longest shortest directed path within the restricted vertex set."""
    verts = set(range(1, g.n + 1)) if restrict_to is None else set(restrict_to)
    if not verts <= set(range(1, g.n + 1)):
        raise ValueError("restriction contains unknown process ids")
    adj = {u: [] for u in verts}
    for u, v in g.edges:
        if u in verts and v in verts:
            adj[u].append(v)
    best = 0
    for src in verts:
        dist = {src: 0}
        frontier = [src]
        d = 0
        while frontier:
            d += 1
            nxt = []
            for u in frontier:
                for v in adj[u]:
                    if v not in dist:
                        dist[v] = d
                        nxt.append(v)
            frontier = nxt
        if len(dist) != len(verts):
            raise ValueError(f"not strongly connected on {sorted(verts)}")
        ecc = max(dist.values())
        if ecc > best:
            best = ecc
    return best


def load_edge_lines(lines) -> Digraph:
    """Parse an undirected edge list, one `u v [K D stabilization p]` per line.

    Each line yields both directions. Parameters on a line bind to the
    u->v direction and serve as the default for v->u; a later line for
    the reverse direction overrides that default.
    """
    directed = {}   # (u, v) -> params or None, in listing order
    for lineno, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) not in (2, 6):
            raise ValueError(
                f"line {lineno}: expected 'u v' or 'u v K D stabilization p'"
            )
        u, v = int(parts[0]), int(parts[1])
        params = None
        if len(parts) == 6:
            params = {
                "K": int(parts[2]),
                "D": int(parts[3]),
                "stabilization": int(parts[4]),
                "drop": float(parts[5]),
            }
        directed[(u, v)] = params
        directed.setdefault((v, u), None)
    overrides = {}
    for (u, v), params in directed.items():
        if params is not None:
            overrides[(u, v)] = params
    for (u, v), params in directed.items():
        if params is not None and (v, u) not in overrides:
            overrides[(v, u)] = dict(params)
    n = max((max(u, v) for u, v in directed), default=0)
    if n == 0:
        raise ValueError("no edges in input")
    return Digraph(n, frozenset(directed), overrides)


def load_edge_file(path) -> Digraph:
    with open(path, encoding="utf-8") as fh:
        return load_edge_lines(fh)
