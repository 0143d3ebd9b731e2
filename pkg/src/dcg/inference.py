"""Exact queries, exact sampling, and Gibbs sampling.

Exact operations enumerate free-node configurations (capped); Gibbs covers
models beyond the cap. Randomness everywhere comes from numpy's PCG64
generator; functions accept either an integer seed or a ready Generator,
and all draws happen in a fixed documented order so runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import exact
from .backend import kernels
from .errors import DegenerateEvidenceError, ValidationError
from .model import Intervention, Model


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class GibbsConfig:
    """sweeps are counted post burn-in; one sweep = one update per free node."""

    sweeps: int
    burn_in: int = 1000
    seed: int | np.random.Generator = 0
    scan: str = "random"
    thin: int = 1

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValidationError("sweeps must be >= 1")
        if self.burn_in < 0:
            raise ValidationError("burn_in must be >= 0")
        if self.scan not in ("random", "systematic"):
            raise ValidationError("scan must be 'random' or 'systematic'")
        if self.thin < 1:
            raise ValidationError("thin must be >= 1")


@dataclass
class DistributionTable:
    """Joint probabilities of an ordered node subset."""

    nodes: tuple[int, ...]
    card: tuple[int, ...]
    probs: np.ndarray  # shape == card

    def __post_init__(self):
        self.nodes = tuple(int(i) for i in self.nodes)
        self.card = tuple(int(k) for k in self.card)
        self.probs = np.asarray(self.probs, np.float64)
        if self.probs.shape != self.card:
            raise ValidationError("table shape does not match cardinalities")
        if np.any(self.probs < 0):
            raise ValidationError("probabilities must be nonnegative")
        if abs(float(self.probs.sum()) - 1.0) > 1e-10:
            raise ValidationError("probabilities must sum to 1")

    def prob(self, states) -> float:
        return float(self.probs[tuple(int(s) for s in states)])

    def iter_rows(self):
        for idx in np.ndindex(*self.card):
            yield idx, float(self.probs[idx])


def _check_disjoint(space, query, observe, do: Intervention):
    qset = set(query)
    if len(qset) != len(tuple(query)):
        raise ValidationError("query nodes must be distinct")
    oset = set(observe)
    dset = set(do.nodes)
    if qset & oset or qset & dset or oset & dset:
        raise ValidationError("query, observe and intervention node sets must be disjoint")
    for i in (*qset, *oset):
        if not (0 <= i < space.n):
            raise ValidationError(f"node {i} outside 0..{space.n - 1}")
    for i, v in observe.items():
        if not (0 <= v < space.card[i]):
            raise ValidationError(f"observed state {v} out of range for node {i}")


def query(model: Model, query_nodes, observe: Mapping[int, int] | None = None,
          do=None, enum_cap: int | None = None) -> DistributionTable:
    """p(x_query | x_observe, do(x_S)) by enumeration.

    Intervened potentials are dropped and their nodes clamped; observed
    nodes are clamped with their potentials kept; the rest is summed out.
    """
    do = Intervention.coerce(do)
    do.validate_for(model.space)
    observe = {int(k): int(v) for k, v in (observe or {}).items()}
    query_nodes = tuple(int(q) for q in query_nodes)
    if not query_nodes:
        raise ValidationError("query needs at least one node")
    _check_disjoint(model.space, query_nodes, observe, do)

    plan = model.plan(do, observe, enum_cap=enum_cap)
    score_vec = exact.scores(model.theta, plan)
    lse = exact.log_sum_exp(score_vec)
    if not np.isfinite(lse):
        raise DegenerateEvidenceError("evidence has zero probability under the model")
    probs = np.exp(score_vec - lse)

    card = tuple(model.space.card[q] for q in query_nodes)
    joint = np.zeros(probs.shape[0], np.int64)
    stride = 1
    for q, k in zip(reversed(query_nodes), reversed(card)):
        joint += stride * exact.states_at(plan, plan.position(q))
        stride *= k
    size = int(np.prod(card))
    table = np.bincount(joint, weights=probs, minlength=size).reshape(card)
    total = table.sum()
    return DistributionTable(query_nodes, card, table / total)


def exact_sample(model: Model, count: int, seed=0, do=None,
                 enum_cap: int | None = None) -> np.ndarray:
    """Inverse-CDF samples: accumulate configuration probabilities in the
    fixed enumeration order and stop where the running sum first reaches U.

    Returns a (count, n) matrix of state indices with intervened nodes
    clamped. Identical seeds give identical samples.
    """
    do = Intervention.coerce(do)
    do.validate_for(model.space)
    plan = model.plan(do, enum_cap=enum_cap)
    score_vec = exact.scores(model.theta, plan)
    probs = exact.probabilities(score_vec)
    cdf = np.cumsum(probs)
    rng = _rng(seed)
    u = rng.random(count)
    idx = np.searchsorted(cdf, u, side="left")
    idx = np.minimum(idx, probs.shape[0] - 1)
    return exact.decode_configs(plan, idx.astype(np.int64), model.n, do.as_dict())


def local_conditional(model: Model, i: int, x, do=None) -> np.ndarray:
    """p(x_i = s | all other coordinates of x), under the intervened model.

    Proportional to node i's own potential times the potentials of its
    children; children set by intervention contribute nothing (their
    potentials are deleted).
    """
    do = Intervention.coerce(do)
    do.validate_for(model.space)
    if i in do.nodes:
        raise ValidationError(f"node {i} is intervened; its conditional is degenerate")
    x = model.space.validate_config(x).copy()
    children = [c for c in dict.fromkeys(model.graph.children(i)) if c not in do.nodes]
    k = model.space.card[i]
    vals = np.empty(k)
    for s in range(k):
        x[i] = s
        v = model.log_potential(i, x)
        for c in children:
            v += model.log_potential(c, x)
        vals[s] = v
    return exact.probabilities(vals)


def _node_structure(model: Model, deleted: frozenset[int]):
    """CSR edge lists per node for the single-site kernels.

    Incoming edges are always listed (a free node keeps its potential);
    outgoing edges to deleted children are dropped.
    """
    n = model.n
    in_rows, out_rows = [[] for _ in range(n)], [[] for _ in range(n)]
    for e, (p, c) in enumerate(model.graph.edges):
        in_rows[c].append((p, int(model.layout.k_parent[e]), int(model.layout.w_off[e])))
        if c not in deleted:
            out_rows[p].append((c, int(model.layout.w_off[e])))
    in_ptr = np.zeros(n + 1, np.int64)
    out_ptr = np.zeros(n + 1, np.int64)
    in_par, in_kpar, in_woff, out_child, out_woff = [], [], [], [], []
    for i in range(n):
        in_ptr[i + 1] = in_ptr[i] + len(in_rows[i])
        out_ptr[i + 1] = out_ptr[i] + len(out_rows[i])
        for p, kp, woff in in_rows[i]:
            in_par.append(p)
            in_kpar.append(kp)
            in_woff.append(woff)
        for c, woff in out_rows[i]:
            out_child.append(c)
            out_woff.append(woff)
    as_i64 = lambda v: np.asarray(v, np.int64) if v else np.zeros(0, np.int64)
    return (in_ptr, as_i64(in_par), as_i64(in_kpar), as_i64(in_woff),
            out_ptr, as_i64(out_child), as_i64(out_woff))


def gibbs_sample(model: Model, cfg: GibbsConfig, observe: Mapping[int, int] | None = None,
                 do=None) -> np.ndarray:
    """Single-site Gibbs chain; returns the post-burn-in thinned sweeps.

    Observed and intervened nodes stay clamped and are never updated; free
    nodes are redrawn from their local conditional in the intervened model.
    Draw order for a given seed: initial free states (ascending node id),
    then the node-choice sequence (random scan only), then the update
    uniforms.
    """
    do = Intervention.coerce(do)
    do.validate_for(model.space)
    observe = {int(k): int(v) for k, v in (observe or {}).items()}
    if set(observe) & do.nodes:
        raise ValidationError("observe and intervention node sets must be disjoint")
    for i, v in observe.items():
        if not (0 <= i < model.n) or not (0 <= v < model.space.card[i]):
            raise ValidationError(f"observed state {v} out of range for node {i}")

    clamped = do.as_dict()
    clamped.update(observe)
    free_nodes = np.array([i for i in range(model.n) if i not in clamped], np.int64)
    kept = (cfg.sweeps + cfg.thin - 1) // cfg.thin
    rng = _rng(cfg.seed)

    x = np.zeros(model.n, np.int64)
    for i, v in clamped.items():
        x[i] = v
    for i in free_nodes:
        x[i] = rng.integers(0, model.space.card[i])
    if free_nodes.size == 0:
        return np.tile(x, (kept, 1))

    total_sweeps = cfg.burn_in + cfg.sweeps
    n_updates = total_sweeps * free_nodes.size
    if cfg.scan == "random":
        node_seq = free_nodes[rng.integers(0, free_nodes.size, size=n_updates)]
    else:
        node_seq = np.tile(free_nodes, total_sweeps)
    unif = rng.random(n_updates)

    structure = _node_structure(model, do.nodes)
    out = np.zeros((kept, model.n), np.int64)
    card = np.asarray(model.space.card, np.int64)
    n_kept = kernels().gibbs_run(
        model.theta, card, model.layout.bias_off, *structure,
        x, node_seq, unif, int(free_nodes.size),
        int(cfg.burn_in), int(cfg.sweeps), int(cfg.thin), out,
    )
    return out[:n_kept]
