"""Explicit table-based potentials.

A small alternative to the log-linear parameterization: each node carries a
dense nonnegative table phi_i indexed by (x_i, x_p1, x_p2, ...) over its
sorted parent list. Used for tests of representation-level facts (for an
acyclic graph with locally normalized tables the global normalizer is 1,
and the joint coincides with the directed factorization). Not part of the
learning path.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import ValidationError
from .model import DirectedGraph, Intervention, StateSpace


class TableModel:
    def __init__(self, space: StateSpace, graph: DirectedGraph, tables):
        if graph.n != space.n:
            raise ValidationError("graph and state space disagree on node count")
        self.space = space
        self.graph = graph
        self.parent_order = tuple(tuple(sorted(graph.parents(i))) for i in range(space.n))
        tabs = []
        for i in range(space.n):
            want = (space.card[i],) + tuple(space.card[j] for j in self.parent_order[i])
            t = np.ascontiguousarray(tables[i], np.float64)
            if t.shape != want:
                raise ValidationError(f"table of node {i} has shape {t.shape}, expected {want}")
            if np.any(t < 0):
                raise ValidationError("potentials must be nonnegative")
            tabs.append(t)
        self.tables = tuple(tabs)

    @classmethod
    def random(cls, space: StateSpace, graph: DirectedGraph,
               rng: np.random.Generator) -> "TableModel":
        tables = []
        for i in range(space.n):
            shape = (space.card[i],) + tuple(space.card[j] for j in sorted(graph.parents(i)))
            tables.append(rng.uniform(0.1, 2.0, size=shape))
        return cls(space, graph, tables)

    def locally_normalized(self) -> "TableModel":
        """Rescale each table so it sums to 1 over the node's own states."""
        tables = [t / t.sum(axis=0, keepdims=True) for t in self.tables]
        return TableModel(self.space, self.graph, tables)

    def log_potential(self, i: int, x) -> float:
        x = self.space.validate_config(x)
        idx = (x[i],) + tuple(x[j] for j in self.parent_order[i])
        v = float(self.tables[i][idx])
        return math.log(v) if v > 0 else float("-inf")

    def unnormalized_log_score(self, x, do=None) -> float:
        do = Intervention.coerce(do)
        x = self.space.validate_config(x)
        for k, v in do.items:
            if x[k] != v:
                raise ValidationError(f"configuration sets node {k} to {x[k]}, "
                                      f"but the intervention forces {v}")
        return sum(self.log_potential(i, x) for i in range(self.space.n)
                   if i not in do.nodes)

    def log_partition(self, do=None) -> float:
        do = Intervention.coerce(do)
        clamp = do.as_dict()
        free = [i for i in range(self.space.n) if i not in clamp]
        best = float("-inf")
        scores = []
        for states in itertools.product(*(range(self.space.card[i]) for i in free)):
            x = np.zeros(self.space.n, np.int64)
            for node, v in clamp.items():
                x[node] = v
            for node, v in zip(free, states):
                x[node] = v
            s = self.unnormalized_log_score(x, do)
            scores.append(s)
            best = max(best, s)
        if not math.isfinite(best):
            return best
        return best + math.log(math.fsum(math.exp(s - best) for s in scores))

    def log_likelihood(self, x, do=None) -> float:
        do = Intervention.coerce(do)
        return self.unnormalized_log_score(x, do) - self.log_partition(do)
