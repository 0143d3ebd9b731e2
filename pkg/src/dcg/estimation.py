"""Likelihood objectives and MAP fitting for interventional datasets.

A dataset row carries the realized states of all nodes plus a mask of the
nodes that were set by intervention. Rows sharing a regime (same clamped
nodes and values) share one inference pass per objective evaluation; the
regime list is sorted by key so reductions happen in a fixed order and
results are bit-stable run to run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import exact, optimize
from .backend import kernels
from .errors import ValidationError
from .inference import _node_structure
from .layout import ParamLayout
from .model import DirectedGraph, Model, Parameters, StateSpace


@dataclass
class Dataset:
    """Rows of state indices plus a parallel intervention mask."""

    X: np.ndarray
    mask: np.ndarray
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, np.int64)
        self.mask = np.ascontiguousarray(self.mask, bool)
        if self.X.ndim != 2:
            raise ValidationError("data matrix must be 2-D")
        if self.mask.shape != self.X.shape:
            raise ValidationError(f"mask shape {self.mask.shape} does not match "
                                  f"data shape {self.X.shape}")
        if np.any(self.X < 0):
            raise ValidationError("state indices must be nonnegative")
        if self.names is not None:
            self.names = tuple(self.names)
            if len(self.names) != self.X.shape[1]:
                raise ValidationError("column name count does not match data width")

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def free(self) -> np.ndarray:
        return ~self.mask

    def validate_for(self, space: StateSpace) -> None:
        if self.n != space.n:
            raise ValidationError(f"dataset has {self.n} columns, model has {space.n} nodes")
        card = np.asarray(space.card)
        if np.any(self.X >= card):
            raise ValidationError("dataset contains state indices outside the state space")

    def regimes(self) -> list[tuple[tuple[int, ...], tuple[int, ...], np.ndarray]]:
        """(clamped nodes, clamped values, row indices), sorted by key."""
        groups: dict[tuple, list[int]] = {}
        for d in range(self.m):
            nodes = tuple(int(i) for i in np.nonzero(self.mask[d])[0])
            values = tuple(int(v) for v in self.X[d, list(nodes)])
            groups.setdefault((nodes, values), []).append(d)
        return [(nodes, values, np.asarray(rows, np.int64))
                for (nodes, values), rows in sorted(groups.items())]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.X[rows], self.mask[rows], self.names)


@dataclass(frozen=True)
class FitConfig:
    lambda2: float = 1e-4
    tol: float = 1e-6
    max_iter: int = 2000
    memory: int = 10

    def __post_init__(self):
        if self.lambda2 < 0:
            raise ValidationError("lambda2 must be nonnegative")
        if self.tol <= 0:
            raise ValidationError("tol must be positive")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be positive")


@dataclass
class FitResult:
    params: Parameters
    fun: float
    grad_norm: float
    iterations: int
    converged: bool
    message: str


class ExactObjective:
    """Globally normalized NLL: -<counts, theta> + sum of per-regime log Z.

    Works for any layout whose score decomposes into the packed bias/edge
    terms; the caller supplies the empirical count vector and the regime
    enumeration plans with their row multiplicities.
    """

    def __init__(self, layout: ParamLayout, counts: np.ndarray,
                 regime_plans: Sequence[tuple[int, exact.EnumPlan]]):
        self.layout = layout
        self.counts = counts
        self.regime_plans = list(regime_plans)

    def fun_grad(self, theta: np.ndarray, lambda2: float) -> tuple[float, np.ndarray]:
        val = -float(self.counts @ theta)
        grad = -self.counts.copy()
        for mult, plan in self.regime_plans:
            score_vec = exact.scores(theta, plan)
            lse = exact.log_sum_exp(score_vec)
            val += mult * lse
            exact.add_expectations(plan, np.exp(score_vec - lse), float(mult), grad)
        val += lambda2 * float(theta @ theta)
        grad += 2.0 * lambda2 * theta
        return val, grad

    def bind(self, lambda2: float) -> Callable[[np.ndarray], tuple[float, np.ndarray]]:
        return lambda theta: self.fun_grad(theta, lambda2)


def _dcg_counts(layout: ParamLayout, data: Dataset) -> np.ndarray:
    counts = np.zeros(layout.dim)
    free = data.free
    for i in range(layout.n):
        rows = free[:, i]
        k = int(layout.card[i])
        counts[layout.bias_slice(i)] += np.bincount(data.X[rows, i], minlength=k)
    for e, (p, c) in enumerate(layout.edges):
        rows = free[:, c]
        kp = int(layout.k_parent[e])
        pair = data.X[rows, c] * kp + data.X[rows, p]
        counts[layout.weight_slice(e)] += np.bincount(
            pair, minlength=int(layout.k_child[e]) * kp)
    return counts


def build_objective(space: StateSpace, graph: DirectedGraph, data: Dataset,
                    enum_cap: int | None = None) -> ExactObjective:
    """Interventional NLL objective with do-semantics regime handling."""
    data.validate_for(space)
    layout = ParamLayout(space.card, graph.edges)
    plans = []
    for nodes, values, rows in data.regimes():
        clamped = dict(zip(nodes, values))
        plan = exact.build_plan(layout, deleted=nodes, clamped=clamped, enum_cap=enum_cap)
        plans.append((int(rows.size), plan))
    return ExactObjective(layout, _dcg_counts(layout, data), plans)


def nll_grad(model: Model, data: Dataset, lambda2: float = 0.0,
             enum_cap: int | None = None) -> tuple[float, Parameters]:
    """Penalized NLL and its analytic gradient at the model's parameters."""
    obj = build_objective(model.space, model.graph, data, enum_cap)
    val, grad = obj.fun_grad(model.theta, lambda2)
    return val, Parameters(*model.layout.unpack(grad))


def _pseudo_fun_grad(layout, structure, X, free, theta, lambda2):
    grad = np.zeros(layout.dim)
    card = np.asarray(layout.card, np.int64)
    val = kernels().pseudo_accumulate(theta, card, layout.bias_off, *structure,
                                      X, free, grad)
    val += lambda2 * float(theta @ theta)
    grad += 2.0 * lambda2 * theta
    return val, grad


def pseudo_nll_grad(model: Model, data: Dataset,
                    lambda2: float = 0.0) -> tuple[float, Parameters]:
    """Pseudo-likelihood surrogate: per-site conditional NLL, no enumeration.

    Each free site's conditional uses the row's intervened model, so
    intervened children drop out of their parents' conditionals.
    """
    data.validate_for(model.space)
    structure = _node_structure(model, frozenset())
    val, grad = _pseudo_fun_grad(model.layout, structure, data.X, data.free,
                                 model.theta, lambda2)
    return val, Parameters(*model.layout.unpack(grad))


def fit_map(space: StateSpace, graph: DirectedGraph, data: Dataset,
            cfg: FitConfig | None = None, init: Parameters | None = None,
            objective: str = "exact", enum_cap: int | None = None) -> FitResult:
    """Smooth convex MAP fit; lambda2 > 0 keeps the optimum unique."""
    cfg = cfg or FitConfig()
    if cfg.lambda2 <= 0:
        raise ValidationError("fit_map requires lambda2 > 0 (strict convexity)")
    return _fit_smooth(space, graph, data, cfg, init, objective, enum_cap)


def _fit_smooth(space, graph, data, cfg, init=None, objective="exact",
                enum_cap=None) -> FitResult:
    data.validate_for(space)
    layout = ParamLayout(space.card, graph.edges)
    x0 = layout.pack(init.biases, init.weights) if init is not None else np.zeros(layout.dim)
    if objective == "exact":
        obj = build_objective(space, graph, data, enum_cap)
        fg = obj.bind(cfg.lambda2)
    elif objective == "pseudo":
        model0 = Model(space, graph, Parameters.zeros(space, graph))
        structure = _node_structure(model0, frozenset())
        free = data.free
        fg = lambda theta: _pseudo_fun_grad(layout, structure, data.X, free,
                                            theta, cfg.lambda2)
    else:
        raise ValidationError(f"unknown objective {objective!r}")
    res = optimize.minimize(fg, x0, tol=cfg.tol, max_iter=cfg.max_iter, memory=cfg.memory)
    params = Parameters(*layout.unpack(res.x))
    return FitResult(params=params, fun=res.fun, grad_norm=res.residual,
                     iterations=res.iterations, converged=res.converged,
                     message=res.message)


def row_nlls(model: Model, data: Dataset, enum_cap: int | None = None) -> np.ndarray:
    """-log p(row's free nodes | do(row's clamped nodes)) per row."""
    data.validate_for(model.space)
    free = data.free
    scores_rows = np.zeros(data.m)
    for i in range(model.n):
        rows = free[:, i]
        scores_rows[rows] += model.params.biases[i][data.X[rows, i]]
    for e, (p, c) in enumerate(model.graph.edges):
        rows = free[:, c]
        scores_rows[rows] += model.params.weights[e][data.X[rows, c], data.X[rows, p]]
    out = np.empty(data.m)
    for nodes, values, rows in data.regimes():
        plan = exact.build_plan(model.layout, deleted=nodes,
                                clamped=dict(zip(nodes, values)), enum_cap=enum_cap)
        lse = exact.log_sum_exp(exact.scores(model.theta, plan))
        out[rows] = lse - scores_rows[rows]
    return out


def finite_diff_gradient(objective: Callable[[Parameters], float], params: Parameters,
                         h: float = 1e-5) -> Parameters:
    """Central differences, step scaled by max(1, |coordinate|)."""
    if h <= 0:
        raise ValidationError("finite-difference step must be positive")
    biases = [np.array(b) for b in params.biases]
    weights = [np.array(w) for w in params.weights]

    def diff(arrays):
        grads = []
        for arr in arrays:
            g = np.zeros_like(arr)
            it = np.nditer(arr, flags=["multi_index"])
            for v in it:
                idx = it.multi_index
                step = h * max(1.0, abs(float(v)))
                old = arr[idx]
                arr[idx] = old + step
                f_plus = objective(Parameters(biases, weights))
                arr[idx] = old - step
                f_minus = objective(Parameters(biases, weights))
                arr[idx] = old
                g[idx] = (f_plus - f_minus) / (2.0 * step)
            grads.append(g)
        return grads

    g_b = diff(biases)
    g_w = diff(weights)
    return Parameters(g_b, g_w)


def finite_diff_flat(f: Callable[[np.ndarray], float], x: np.ndarray,
                     h: float = 1e-5) -> np.ndarray:
    """Flat-vector variant of the central-difference oracle."""
    g = np.zeros_like(x)
    for i in range(x.size):
        step = h * max(1.0, abs(float(x[i])))
        xp = x.copy()
        xp[i] += step
        xm = x.copy()
        xm[i] -= step
        g[i] = (f(xp) - f(xm)) / (2.0 * step)
    return g
