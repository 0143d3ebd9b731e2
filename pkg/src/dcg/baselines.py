"""Comparison models: locally normalized DAG and pairwise undirected models.

All three share the log-linear parameterization (biases plus one table per
edge). They differ in normalization and in how interventions are handled:

* DAG: product of per-node softmax conditionals; an intervened node's
  factor is dropped from the likelihood (truncated factorization).
* UG-observe: one global normalizer; training ignores the intervention
  mask entirely.
* UG-condition: training conditions on intervened values (clamping
  without deleting anything), the semantic contrast with do-surgery.

Evaluation is shared: mean negative log-likelihood of the free nodes given
each row's regime, with do-semantics for DCG/DAG and conditioning for UG.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import exact
from .backend import kernels
from .errors import CapacityError, ValidationError
from .estimation import Dataset, ExactObjective, FitConfig, row_nlls
from .graphs import is_acyclic
from .layout import ParamLayout
from .model import DirectedGraph, Model, Parameters, StateSpace
from .structure import GroupL1Config, solve_group_l1
from . import optimize


class DagModel:
    """Acyclic graph with locally normalized conditionals."""

    def __init__(self, space: StateSpace, graph: DirectedGraph, params: Parameters):
        if not is_acyclic(graph):
            raise ValidationError("DagModel requires an acyclic graph")
        # shape validation matches the cyclic model's
        self._shape_check = Model(space, graph, params)
        self.space = space
        self.graph = graph
        self.params = params
        self.layout = self._shape_check.layout

    def node_logits(self, i: int, X: np.ndarray) -> np.ndarray:
        """(rows, k_i) conditional logits of node i given each row's parents."""
        k = self.space.card[i]
        logits = np.broadcast_to(self.params.biases[i], (X.shape[0], k)).copy()
        for e in self.graph.incoming(i):
            p, _ = self.graph.edges[e]
            logits += self.params.weights[e][:, X[:, p]].T
        return logits


class UgModel:
    """Pairwise undirected model: one weight table per unordered pair."""

    def __init__(self, space: StateSpace, pairs, params: Parameters):
        pairs = tuple((int(i), int(j)) for i, j in pairs)
        for i, j in pairs:
            if not (0 <= i < j < space.n):
                raise ValidationError(f"pair ({i}, {j}) must satisfy 0 <= i < j < n")
        if len(set(pairs)) != len(pairs):
            raise ValidationError("duplicate pair")
        self.space = space
        self.pairs = pairs
        # table of pair (i, j) is indexed [x_i][x_j]: child=i, parent=j
        self.layout = ParamLayout(space.card, [(j, i) for i, j in pairs])
        if len(params.biases) != space.n or len(params.weights) != len(pairs):
            raise ValidationError("parameter count mismatch")
        for idx, (i, j) in enumerate(pairs):
            want = (space.card[i], space.card[j])
            if params.weights[idx].shape != want:
                raise ValidationError(f"table of pair ({i}, {j}) has shape "
                                      f"{params.weights[idx].shape}, expected {want}")
        for i in range(space.n):
            if params.biases[i].shape != (space.card[i],):
                raise ValidationError(f"bias vector of node {i} has wrong shape")
        self.params = params
        self.theta = self.layout.pack(params.biases, params.weights)

    @staticmethod
    def complete_pairs(n: int) -> tuple[tuple[int, int], ...]:
        return tuple((i, j) for i in range(n) for j in range(i + 1, n))


UG_MODES = ("observe", "condition")


# ---------------------------------------------------------------------------
# DAG estimation
# ---------------------------------------------------------------------------


def _node_rows(data: Dataset, i: int, parents) -> tuple[np.ndarray, np.ndarray]:
    rows = data.free[:, i]
    xi = np.ascontiguousarray(data.X[rows, i])
    xp = np.ascontiguousarray(data.X[np.ix_(rows, list(parents))]) if parents \
        else np.zeros((int(rows.sum()), 0), np.int64)
    return xi, xp


def _node_layout(space: StateSpace, i: int, parents):
    k = space.card[i]
    p_cards = np.array([space.card[j] for j in parents], np.int64)
    w_off = np.zeros(len(parents), np.int64)
    off = k
    for t, j in enumerate(parents):
        w_off[t] = off
        off += k * space.card[j]
    return k, p_cards, w_off, off


def dag_nll_grad(model: DagModel, data: Dataset,
                 lambda2: float = 0.0) -> tuple[float, Parameters]:
    """Truncated-factorization NLL: intervened nodes' factors are dropped."""
    data.validate_for(model.space)
    grad_flat = np.zeros(model.layout.dim)
    theta = model.layout.pack(model.params.biases, model.params.weights)
    val = 0.0
    for i in range(model.space.n):
        parents = [model.graph.edges[e][0] for e in model.graph.incoming(i)]
        edge_ids = model.graph.incoming(i)
        xi, xp = _node_rows(data, i, parents)
        k, p_cards, w_off, dim = _node_layout(model.space, i, parents)
        local = np.empty(dim)
        local[:k] = model.params.biases[i]
        for t, e in enumerate(edge_ids):
            local[w_off[t]:w_off[t] + k * p_cards[t]] = model.params.weights[e].ravel()
        g_local = np.zeros(dim)
        val += kernels().softmax_regression_accumulate(local, k, p_cards, w_off,
                                                       xi, xp, g_local)
        grad_flat[model.layout.bias_slice(i)] += g_local[:k]
        for t, e in enumerate(edge_ids):
            grad_flat[model.layout.weight_slice(e)] += g_local[w_off[t]:w_off[t] + k * p_cards[t]]
    val += lambda2 * float(theta @ theta)
    grad_flat += 2.0 * lambda2 * theta
    return val, Parameters(*model.layout.unpack(grad_flat))


def _fit_node(space: StateSpace, i: int, parents: tuple[int, ...], data: Dataset,
              lam: float, lambda2: float, cfg: GroupL1Config,
              init: np.ndarray | None = None):
    """Group-sparse softmax regression of node i on candidate parents.

    Returns (local theta, objective value incl. penalties, per-parent norms).
    """
    xi, xp = _node_rows(data, i, parents)
    k, p_cards, w_off, dim = _node_layout(space, i, parents)

    def fun_grad(theta):
        grad = np.zeros(dim)
        val = kernels().softmax_regression_accumulate(theta, k, p_cards, w_off,
                                                      xi, xp, grad)
        val += lambda2 * float(theta @ theta)
        grad += 2.0 * lambda2 * theta
        return val, grad

    slices = [slice(int(w_off[t]), int(w_off[t] + k * p_cards[t]))
              for t in range(len(parents))]
    if lam == 0.0:
        res = optimize.minimize(fun_grad, init if init is not None else np.zeros(dim),
                                tol=cfg.tol, max_iter=cfg.max_iter, memory=cfg.memory)
        theta, fun = res.x, res.fun
    else:
        out = solve_group_l1(fun_grad, dim, slices, lam, cfg, x0=init)
        theta, fun = out.x, out.fun
    norms = np.array([np.linalg.norm(theta[sl]) for sl in slices])
    return theta, float(fun), norms


def _ordering_model(space: StateSpace, per_node, zero_threshold: float) -> DagModel:
    """Assemble a DagModel from per-node (parents, local theta) fits."""
    edges, weights = [], []
    biases = [None] * space.n
    for i, (parents, theta) in per_node.items():
        k, p_cards, w_off, _ = _node_layout(space, i, parents)
        biases[i] = theta[:k].copy()
        for t, j in enumerate(parents):
            block = theta[w_off[t]:w_off[t] + k * p_cards[t]]
            if np.linalg.norm(block) > zero_threshold:
                edges.append((j, i))
                weights.append(block.reshape(k, space.card[j]).copy())
    order = sorted(range(len(edges)), key=lambda t: edges[t])
    graph = DirectedGraph(space.n, tuple(edges[t] for t in order))
    return DagModel(space, graph, Parameters(biases, [weights[t] for t in order]))


def dag_fit_ordering(space: StateSpace, ordering, data: Dataset, lam: float,
                     lambda2: float = 1e-4,
                     cfg: GroupL1Config | None = None) -> tuple[DagModel, float]:
    """Fit each node on its predecessors in the ordering; return model and
    the total regularized objective."""
    ordering = [int(i) for i in ordering]
    if sorted(ordering) != list(range(space.n)):
        raise ValidationError("ordering must be a permutation of the nodes")
    data.validate_for(space)
    cfg = cfg or GroupL1Config(lam=lam, lambda2=lambda2)
    per_node = {}
    total = 0.0
    for pos, i in enumerate(ordering):
        parents = tuple(sorted(ordering[:pos]))
        theta, fun, _ = _fit_node(space, i, parents, data, lam, lambda2, cfg)
        per_node[i] = (parents, theta)
        total += fun
    return _ordering_model(space, per_node, cfg.zero_threshold), total


def dag_order_search(space: StateSpace, data: Dataset, lam: float,
                     lambda2: float = 1e-4, n_cap: int = 10,
                     cfg: GroupL1Config | None = None,
                     warm_cache: dict | None = None) -> tuple[DagModel, float]:
    """Exact minimization of the regularized objective over node orderings.

    Computes the group-sparse local score of every (node, candidate parent
    set) pair, warm-starting each from the set minus its largest element,
    then runs subset dynamic programming. Guaranteed optimal over orderings
    given the local scores. ``warm_cache`` persists local solutions across
    calls (useful along a regularization path).
    """
    n = space.n
    if n > n_cap:
        raise CapacityError(
            f"ordering search over {n} nodes exceeds n_cap={n_cap}; "
            f"fit explicit orderings with dag_fit_ordering instead")
    data.validate_for(space)
    cfg = cfg or GroupL1Config(lam=lam, lambda2=lambda2)
    cache = warm_cache if warm_cache is not None else {}

    scores: dict[tuple[int, int], float] = {}
    thetas: dict[tuple[int, int], np.ndarray] = {}

    def parents_of(mask):
        return tuple(j for j in range(n) if mask >> j & 1)

    for mask in range(1 << n):
        for i in range(n):
            if mask >> i & 1:
                continue
            parents = parents_of(mask)
            # warm start: same parent set at the previous lambda if cached,
            # otherwise the solution for the set minus its largest element
            init = cache.get((i, mask))
            if init is None and parents:
                prev_mask = mask & ~(1 << max(parents))
                prev = cache.get((i, prev_mask))
                if prev is not None:
                    k, p_cards, w_off, dim = _node_layout(space, i, parents)
                    init = np.zeros(dim)
                    init[:k] = prev[:k]
                    prev_parents = parents_of(prev_mask)
                    kp, pp_cards, pw_off, _ = _node_layout(space, i, prev_parents)
                    for t, j in enumerate(prev_parents):
                        tt = parents.index(j)
                        init[w_off[tt]:w_off[tt] + k * p_cards[tt]] = \
                            prev[pw_off[t]:pw_off[t] + kp * pp_cards[t]]
            theta, fun, _ = _fit_node(space, i, parents, data, lam, lambda2, cfg,
                                      init=init)
            cache[(i, mask)] = theta
            scores[(i, mask)] = fun
            thetas[(i, mask)] = theta

    full = (1 << n) - 1
    best = np.full(1 << n, np.inf)
    last = np.full(1 << n, -1, np.int64)
    best[0] = 0.0
    for mask in range(1, 1 << n):
        for i in range(n):
            if not (mask >> i & 1):
                continue
            prev = mask & ~(1 << i)
            val = best[prev] + scores[(i, prev)]
            # <= keeps the largest eligible node last on exact ties
            if val <= best[mask]:
                best[mask] = val
                last[mask] = i
    per_node = {}
    mask = full
    while mask:
        i = int(last[mask])
        prev = mask & ~(1 << i)
        per_node[i] = (parents_of(prev), thetas[(i, prev)])
        mask = prev
    return _ordering_model(space, per_node, cfg.zero_threshold), float(best[full])


# ---------------------------------------------------------------------------
# Undirected estimation
# ---------------------------------------------------------------------------


def _ug_counts(layout: ParamLayout, data: Dataset) -> np.ndarray:
    """Sufficient statistics over every row and every term (no exclusions)."""
    counts = np.zeros(layout.dim)
    for i in range(layout.n):
        counts[layout.bias_slice(i)] += np.bincount(data.X[:, i],
                                                    minlength=int(layout.card[i]))
    for e, (p, c) in enumerate(layout.edges):
        kp = int(layout.k_parent[e])
        pair = data.X[:, c] * kp + data.X[:, p]
        counts[layout.weight_slice(e)] += np.bincount(
            pair, minlength=int(layout.k_child[e]) * kp)
    return counts


def build_ug_objective(space: StateSpace, pairs, data: Dataset, mode: str,
                       enum_cap: int | None = None) -> ExactObjective:
    if mode not in UG_MODES:
        raise ValidationError(f"mode must be one of {UG_MODES}")
    data.validate_for(space)
    layout = ParamLayout(space.card, [(j, i) for i, j in pairs])
    counts = _ug_counts(layout, data)
    if mode == "observe":
        plans = [(data.m, exact.build_plan(layout, enum_cap=enum_cap))]
    else:
        plans = []
        for nodes, values, rows in data.regimes():
            plan = exact.build_plan(layout, clamped=dict(zip(nodes, values)),
                                    enum_cap=enum_cap)
            plans.append((int(rows.size), plan))
    return ExactObjective(layout, counts, plans)


def ug_nll_grad(model: UgModel, data: Dataset, mode: str,
                lambda2: float = 0.0) -> tuple[float, Parameters]:
    """observe: full-joint NLL on every row. condition: joint NLL on
    observational rows, conditional NLL p(free | clamped) on intervened
    rows; clamping conditions, nothing is deleted."""
    obj = build_ug_objective(model.space, model.pairs, data, mode)
    val, grad = obj.fun_grad(model.theta, lambda2)
    return val, Parameters(*model.layout.unpack(grad))


def ug_fit_map(space: StateSpace, data: Dataset, mode: str,
               cfg: FitConfig | None = None, pairs=None,
               enum_cap: int | None = None) -> UgModel:
    cfg = cfg or FitConfig()
    pairs = tuple(pairs) if pairs is not None else UgModel.complete_pairs(space.n)
    obj = build_ug_objective(space, pairs, data, mode, enum_cap)
    res = optimize.minimize(obj.bind(cfg.lambda2), np.zeros(obj.layout.dim),
                            tol=cfg.tol, max_iter=cfg.max_iter, memory=cfg.memory)
    return UgModel(space, pairs, Parameters(*obj.layout.unpack(res.x)))


def ug_fit_group_l1(space: StateSpace, data: Dataset, mode: str,
                    cfg: GroupL1Config, pairs=None, init: Parameters | None = None,
                    enum_cap: int | None = None) -> tuple[UgModel, tuple]:
    """Group-sparse undirected fit; one group per unordered pair."""
    pairs = tuple(pairs) if pairs is not None else UgModel.complete_pairs(space.n)
    obj = build_ug_objective(space, pairs, data, mode, enum_cap)
    layout = obj.layout
    x0 = layout.pack(init.biases, init.weights) if init is not None else None
    if cfg.lam == 0.0:
        res = optimize.minimize(obj.bind(cfg.lambda2),
                                x0 if x0 is not None else np.zeros(layout.dim),
                                tol=cfg.tol, max_iter=cfg.max_iter, memory=cfg.memory)
        theta = res.x
    else:
        out = solve_group_l1(obj.bind(cfg.lambda2), layout.dim, layout.group_slices(),
                             cfg.lam, cfg, x0=x0)
        theta = out.x
    norms = layout.group_norms(theta)
    active = tuple(pairs[e] for e in range(len(pairs)) if norms[e] > cfg.zero_threshold)
    model = UgModel(space, pairs, Parameters(*layout.unpack(theta)))
    return model, active


def ug_lambda_max(space: StateSpace, data: Dataset, mode: str,
                  lambda2: float = 1e-4, pairs=None,
                  enum_cap: int | None = None) -> float:
    pairs = tuple(pairs) if pairs is not None else UgModel.complete_pairs(space.n)
    bias_obj = build_ug_objective(space, (), data, mode, enum_cap)
    res = optimize.minimize(bias_obj.bind(lambda2), np.zeros(bias_obj.layout.dim),
                            tol=1e-8, max_iter=5000)
    obj = build_ug_objective(space, pairs, data, mode, enum_cap)
    theta = np.zeros(obj.layout.dim)
    for i in range(space.n):
        theta[obj.layout.bias_slice(i)] = res.x[bias_obj.layout.bias_slice(i)]
    _, grad = obj.fun_grad(theta, lambda2)
    norms = obj.layout.group_norms(grad)
    return float(np.max(norms)) if norms.size else 0.0


# ---------------------------------------------------------------------------
# Shared evaluation
# ---------------------------------------------------------------------------


def dag_row_nlls(model: DagModel, data: Dataset) -> np.ndarray:
    data.validate_for(model.space)
    out = np.zeros(data.m)
    free = data.free
    for i in range(model.space.n):
        rows = np.nonzero(free[:, i])[0]
        if rows.size == 0:
            continue
        logits = model.node_logits(i, data.X[rows])
        mx = logits.max(axis=1)
        lse = mx + np.log(np.exp(logits - mx[:, None]).sum(axis=1))
        out[rows] += lse - logits[np.arange(rows.size), data.X[rows, i]]
    return out


def ug_row_nlls(model: UgModel, data: Dataset,
                enum_cap: int | None = None) -> np.ndarray:
    """-log p(free nodes | clamped values) per row: conditioning, not surgery."""
    data.validate_for(model.space)
    layout = model.layout
    scores_rows = np.zeros(data.m)
    for i in range(model.space.n):
        scores_rows += model.params.biases[i][data.X[:, i]]
    for e, (i, j) in enumerate(model.pairs):
        scores_rows += model.params.weights[e][data.X[:, i], data.X[:, j]]
    out = np.empty(data.m)
    for nodes, values, rows in data.regimes():
        plan = exact.build_plan(layout, clamped=dict(zip(nodes, values)),
                                enum_cap=enum_cap)
        lse = exact.log_sum_exp(exact.scores(model.theta, plan))
        out[rows] = lse - scores_rows[rows]
    return out


def eval_test_nll(model, test: Dataset, enum_cap: int | None = None) -> float:
    """Mean per-row NLL of the free nodes under the row's regime.

    DCG and DAG apply do-semantics (their intervened factors are deleted);
    undirected models condition on the clamped values.
    """
    if isinstance(model, Model):
        return float(np.mean(row_nlls(model, test, enum_cap)))
    if isinstance(model, DagModel):
        return float(np.mean(dag_row_nlls(model, test)))
    if isinstance(model, UgModel):
        return float(np.mean(ug_row_nlls(model, test, enum_cap)))
    raise ValidationError(f"unsupported model type {type(model).__name__}")
