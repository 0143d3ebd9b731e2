"""Graph-level reasoning: blankets, moralization, intervention surgery.

Independence in this model family is read off the moral graph (marry
co-parents, drop directions), not by d-separation. Separation of moralized
(possibly intervened) graphs is sound for the enumerated distributions:
separated implies independent; the converse is not claimed.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable

from .errors import ValidationError
from .model import DirectedGraph


@dataclass(frozen=True)
class UndirectedGraph:
    n: int
    edges: tuple[tuple[int, int], ...]  # sorted pairs i < j, deduplicated

    def __post_init__(self):
        norm = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise ValidationError(f"self-loop on node {a} is not allowed")
            if not (0 <= a < self.n and 0 <= b < self.n):
                raise ValidationError(f"edge ({a}, {b}) references a node outside 0..{self.n - 1}")
            norm.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", tuple(sorted(norm)))

    def neighbors(self, i: int) -> set[int]:
        out = set()
        for a, b in self.edges:
            if a == i:
                out.add(b)
            elif b == i:
                out.add(a)
        return out

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in set(self.edges)


def markov_blanket(g: DirectedGraph, i: int) -> set[int]:
    """Parents, children, and co-parents (parents of children) of i."""
    g._check_node(i)
    out = set(g.parents(i)) | set(g.children(i))
    for c in g.children(i):
        out |= set(g.parents(c))
    out.discard(i)
    return out


def moralize(g: DirectedGraph) -> UndirectedGraph:
    """Drop directions and marry every pair of co-parents."""
    edges = {(min(p, c), max(p, c)) for p, c in g.edges}
    for i in range(g.n):
        parents = g.parents(i)
        for a in parents:
            for b in parents:
                if a < b:
                    edges.add((a, b))
    return UndirectedGraph(g.n, tuple(sorted(edges)))


def intervene_graph(g: DirectedGraph, targets: Iterable[int]) -> DirectedGraph:
    """Remove every edge whose child is a target; outgoing edges survive."""
    targets = set(int(t) for t in targets)
    for t in targets:
        g._check_node(t)
    return DirectedGraph(g.n, tuple((p, c) for p, c in g.edges if c not in targets))


def is_separated(u: UndirectedGraph, a: Iterable[int], b: Iterable[int],
                 c: Iterable[int]) -> bool:
    """True iff every path from a to b in u passes through c."""
    a, b, c = set(a), set(b), set(c)
    if a & b or a & c or b & c:
        raise ValidationError("separation query requires disjoint node sets")
    adj: list[set[int]] = [set() for _ in range(u.n)]
    for x, y in u.edges:
        adj[x].add(y)
        adj[y].add(x)
    seen = set(a)
    queue = deque(a)
    while queue:
        node = queue.popleft()
        if node in b:
            return False
        for nxt in adj[node]:
            if nxt not in seen and nxt not in c:
                seen.add(nxt)
                queue.append(nxt)
    return True


def is_acyclic(g: DirectedGraph) -> bool:
    """Kahn peeling; a 2-cycle counts as a cycle."""
    indeg = [0] * g.n
    for _, c in g.edges:
        indeg[c] += 1
    queue = deque(i for i in range(g.n) if indeg[i] == 0)
    removed = 0
    while queue:
        i = queue.popleft()
        removed += 1
        for c in g.children(i):
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    return removed == g.n


def topological_order(g: DirectedGraph) -> list[int]:
    """A topological order of an acyclic graph (smallest node first on ties)."""
    indeg = [0] * g.n
    for _, c in g.edges:
        indeg[c] += 1
    ready = sorted(i for i in range(g.n) if indeg[i] == 0)
    order: list[int] = []
    import heapq

    heapq.heapify(ready)
    while ready:
        i = heapq.heappop(ready)
        order.append(i)
        for c in g.children(i):
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(ready, c)
    if len(order) != g.n:
        raise ValidationError("graph has a cycle; no topological order exists")
    return order
