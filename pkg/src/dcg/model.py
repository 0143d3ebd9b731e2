"""Core model types: state space, cyclic directed graph, parameters.

A model assigns each node i a nonnegative potential over (x_i, x_parents),
here in log-linear form

    log phi_i(x) = b[i][x_i] + sum over edges (j -> i) of w[e][x_i][x_j],

and the joint is the globally normalized product of the potentials. Cycles
(including 2-cycles) are allowed because normalization is global. A perfect
intervention on a set S of nodes deletes the potentials of the nodes in S,
clamps their values, and renormalizes over the rest.

All types are immutable after construction and safe to share across
threads; the operations are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import exact
from .errors import ValidationError
from .layout import ParamLayout


@dataclass(frozen=True)
class StateSpace:
    """Per-node state counts; node i takes values 0..card[i]-1."""

    card: tuple[int, ...]

    def __post_init__(self):
        if len(self.card) < 1:
            raise ValidationError("state space needs at least one node")
        if any(int(k) < 2 for k in self.card):
            raise ValidationError("every node needs at least 2 states")
        object.__setattr__(self, "card", tuple(int(k) for k in self.card))

    @property
    def n(self) -> int:
        return len(self.card)

    def n_configurations(self) -> int:
        out = 1
        for k in self.card:
            out *= k
        return out

    @classmethod
    def uniform(cls, n: int, k: int = 2) -> "StateSpace":
        return cls((k,) * n)

    def validate_config(self, x) -> np.ndarray:
        x = np.asarray(x, np.int64)
        if x.shape != (self.n,):
            raise ValidationError(f"configuration must have length {self.n}, got shape {x.shape}")
        if np.any(x < 0) or np.any(x >= np.asarray(self.card)):
            raise ValidationError("configuration has out-of-range state indices")
        return x


@dataclass(frozen=True)
class DirectedGraph:
    """Directed graph on nodes 0..n-1; cycles and 2-cycles allowed."""

    n: int
    edges: tuple[tuple[int, int], ...]  # (parent, child) pairs, stable edge order

    def __post_init__(self):
        edges = tuple((int(p), int(c)) for p, c in self.edges)
        object.__setattr__(self, "edges", edges)
        seen = set()
        for p, c in edges:
            if not (0 <= p < self.n and 0 <= c < self.n):
                raise ValidationError(f"edge ({p}, {c}) references a node outside 0..{self.n - 1}")
            if p == c:
                raise ValidationError(f"self-loop on node {p} is not allowed")
            if (p, c) in seen:
                raise ValidationError(f"duplicate edge ({p}, {c})")
            seen.add((p, c))

    @cached_property
    def _parents(self) -> tuple[tuple[int, ...], ...]:
        out = [[] for _ in range(self.n)]
        for p, c in self.edges:
            out[c].append(p)
        return tuple(tuple(v) for v in out)

    @cached_property
    def _children(self) -> tuple[tuple[int, ...], ...]:
        out = [[] for _ in range(self.n)]
        for p, c in self.edges:
            out[p].append(c)
        return tuple(tuple(v) for v in out)

    def parents(self, i: int) -> tuple[int, ...]:
        self._check_node(i)
        return self._parents[i]

    def children(self, i: int) -> tuple[int, ...]:
        self._check_node(i)
        return self._children[i]

    def edge_index(self, parent: int, child: int) -> int:
        try:
            return self.edges.index((parent, child))
        except ValueError:
            raise ValidationError(f"no edge ({parent}, {child})") from None

    def has_edge(self, parent: int, child: int) -> bool:
        return (parent, child) in set(self.edges)

    def incoming(self, i: int) -> list[int]:
        """Edge indices whose child is i."""
        return [e for e, (_, c) in enumerate(self.edges) if c == i]

    def outgoing(self, i: int) -> list[int]:
        """Edge indices whose parent is i."""
        return [e for e, (p, _) in enumerate(self.edges) if p == i]

    def _check_node(self, i: int) -> None:
        if not (0 <= i < self.n):
            raise ValidationError(f"node {i} outside 0..{self.n - 1}")

    @classmethod
    def complete(cls, n: int) -> "DirectedGraph":
        """Both orientations of every pair, ordered (parent, child) ascending."""
        return cls(n, tuple((p, c) for p in range(n) for c in range(n) if p != c))

    @classmethod
    def empty(cls, n: int) -> "DirectedGraph":
        return cls(n, ())


class Parameters:
    """Biases per node and one (k_child, k_parent) weight table per edge."""

    def __init__(self, biases: Sequence[np.ndarray], weights: Sequence[np.ndarray]):
        self.biases = tuple(np.array(b, np.float64) for b in biases)
        self.weights = tuple(np.array(w, np.float64) for w in weights)
        for arr in (*self.biases, *self.weights):
            if not np.all(np.isfinite(arr)):
                raise ValidationError("parameters must be finite")
            arr.setflags(write=False)

    @classmethod
    def zeros(cls, space: StateSpace, graph: DirectedGraph) -> "Parameters":
        biases = [np.zeros(space.card[i]) for i in range(space.n)]
        weights = [np.zeros((space.card[c], space.card[p])) for p, c in graph.edges]
        return cls(biases, weights)

    @classmethod
    def random(cls, space: StateSpace, graph: DirectedGraph, rng: np.random.Generator,
               scale: float = 1.0) -> "Parameters":
        biases = [scale * rng.standard_normal(space.card[i]) for i in range(space.n)]
        weights = [scale * rng.standard_normal((space.card[c], space.card[p]))
                   for p, c in graph.edges]
        return cls(biases, weights)

    def copy(self) -> "Parameters":
        return Parameters([b.copy() for b in self.biases], [w.copy() for w in self.weights])


@dataclass(frozen=True)
class Intervention:
    """A do() regime: distinct (node, forced state) pairs; may be empty."""

    items: tuple[tuple[int, int], ...]

    def __post_init__(self):
        items = tuple(sorted((int(k), int(v)) for k, v in self.items))
        nodes = [k for k, _ in items]
        if len(set(nodes)) != len(nodes):
            raise ValidationError("intervention assigns a node twice")
        object.__setattr__(self, "items", items)

    @classmethod
    def empty(cls) -> "Intervention":
        return cls(())

    @classmethod
    def coerce(cls, value) -> "Intervention":
        if value is None:
            return cls(())
        if isinstance(value, Intervention):
            return value
        if isinstance(value, Mapping):
            return cls(tuple(value.items()))
        return cls(tuple(value))

    @property
    def nodes(self) -> frozenset[int]:
        return frozenset(k for k, _ in self.items)

    def as_dict(self) -> dict[int, int]:
        return dict(self.items)

    def __len__(self) -> int:
        return len(self.items)

    def validate_for(self, space: StateSpace) -> None:
        for k, v in self.items:
            if not (0 <= k < space.n):
                raise ValidationError(f"intervention target {k} outside 0..{space.n - 1}")
            if not (0 <= v < space.card[k]):
                raise ValidationError(
                    f"intervention state {v} out of range for node {k} (k={space.card[k]})")


class Model:
    """Immutable bundle of state space, directed graph, and parameters."""

    def __init__(self, space: StateSpace, graph: DirectedGraph, params: Parameters):
        if graph.n != space.n:
            raise ValidationError("graph and state space disagree on node count")
        if len(params.biases) != space.n:
            raise ValidationError("wrong number of bias vectors")
        for i, b in enumerate(params.biases):
            if b.shape != (space.card[i],):
                raise ValidationError(f"bias vector of node {i} has shape {b.shape}, "
                                      f"expected ({space.card[i]},)")
        if len(params.weights) != len(graph.edges):
            raise ValidationError("wrong number of weight tables")
        for e, (p, c) in enumerate(graph.edges):
            want = (space.card[c], space.card[p])
            if params.weights[e].shape != want:
                raise ValidationError(f"weight table of edge {e} has shape "
                                      f"{params.weights[e].shape}, expected {want}")
        self.space = space
        self.graph = graph
        self.params = params
        self.layout = ParamLayout(space.card, graph.edges)
        self.theta = self.layout.pack(params.biases, params.weights)
        self.theta.setflags(write=False)

    @property
    def n(self) -> int:
        return self.space.n

    def with_params(self, params: Parameters) -> "Model":
        return Model(self.space, self.graph, params)

    def plan(self, do: Intervention, observe: Mapping[int, int] | None = None,
             enum_cap: int | None = None) -> exact.EnumPlan:
        clamped = do.as_dict()
        clamped.update(observe or {})
        return exact.build_plan(self.layout, deleted=do.nodes, clamped=clamped,
                                enum_cap=enum_cap)

    # -- core operations ----------------------------------------------------

    def log_potential(self, i: int, x) -> float:
        """Log-potential of node i at the full configuration x (no normalization)."""
        x = self.space.validate_config(x)
        self.graph._check_node(i)
        out = float(self.params.biases[i][x[i]])
        for e in self.graph.incoming(i):
            p, _ = self.graph.edges[e]
            out += float(self.params.weights[e][x[i], x[p]])
        return out

    def unnormalized_log_score(self, x, do=None) -> float:
        """Sum of log-potentials over nodes not intervened on.

        x must agree with the forced states of the intervention.
        """
        do = Intervention.coerce(do)
        do.validate_for(self.space)
        x = self.space.validate_config(x)
        for k, v in do.items:
            if x[k] != v:
                raise ValidationError(f"configuration sets node {k} to {x[k]}, "
                                      f"but the intervention forces {v}")
        return sum(self.log_potential(i, x) for i in range(self.n) if i not in do.nodes)

    def log_partition(self, do=None, enum_cap: int | None = None) -> float:
        """Log normalizer of the (possibly intervened) potential product.

        Overflow-safe; raises CapacityError above the enumeration cap.
        """
        do = Intervention.coerce(do)
        do.validate_for(self.space)
        plan = self.plan(do, enum_cap=enum_cap)
        return exact.log_sum_exp(exact.scores(self.theta, plan))

    def log_likelihood(self, x, do=None, enum_cap: int | None = None) -> float:
        """log p(x_free | do(x_S)); log p(x) when the intervention is empty."""
        do = Intervention.coerce(do)
        return self.unnormalized_log_score(x, do) - self.log_partition(do, enum_cap)


def random_model(space: StateSpace, graph: DirectedGraph, seed: int = 0,
                 scale: float = 1.0) -> Model:
    rng = np.random.default_rng(seed)
    return Model(space, graph, Parameters.random(space, graph, rng, scale))


def random_graph(n: int, edge_prob: float, rng: np.random.Generator) -> DirectedGraph:
    """Each ordered pair (parent, child) included independently."""
    edges = [(p, c) for p in range(n) for c in range(n)
             if p != c and rng.random() < edge_prob]
    return DirectedGraph(n, tuple(edges))
