"""Exhaustive enumeration over free-node configurations.

An :class:`EnumPlan` freezes, for one (deleted, clamped) regime of a model,
which parameter entries contribute to every configuration's log-score:

* ``deleted`` nodes have their whole potential dropped (do-intervention
  semantics): no bias term, no terms for edges into them;
* ``clamped`` nodes are excluded from enumeration and contribute through
  their fixed value (conditioning keeps the potential, so a clamped node
  that is not deleted still adds its bias and edge entries as constants).

Configurations of the free nodes are indexed 0..n_configs-1 in mixed radix
with the lowest-numbered free node most significant; this fixed order is
shared by scoring, marginalization, and inverse-CDF sampling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .backend import kernels
from .errors import CapacityError
from .layout import ParamLayout

DEFAULT_ENUM_CAP = 1 << 22


@dataclass(frozen=True)
class EnumPlan:
    n_configs: int
    free_nodes: np.ndarray   # ascending node ids
    free_card: np.ndarray
    strides: np.ndarray
    bias_free: np.ndarray    # (B, 2): [bias block offset, free position]
    const_idx: np.ndarray    # flat indices added to every configuration
    e_ff: np.ndarray         # (E, 4): [w offset, k_parent, child pos, parent pos]
    e_fc: np.ndarray         # (E, 3): [w offset + parent value, k_parent, child pos]
    e_cf: np.ndarray         # (E, 2): [w offset + child value * k_parent, parent pos]

    def position(self, node: int) -> int:
        pos = int(np.searchsorted(self.free_nodes, node))
        if pos >= self.free_nodes.shape[0] or self.free_nodes[pos] != node:
            raise KeyError(f"node {node} is not enumerated by this plan")
        return pos


def build_plan(layout: ParamLayout, deleted=(), clamped: Mapping[int, int] | None = None,
               enum_cap: int | None = None) -> EnumPlan:
    clamped = dict(clamped or {})
    deleted = frozenset(int(i) for i in deleted)
    cap = DEFAULT_ENUM_CAP if enum_cap is None else int(enum_cap)

    free = np.array(sorted(set(range(layout.n)) - clamped.keys()), np.int64)
    free_card = layout.card[free] if free.size else np.zeros(0, np.int64)
    n_configs = 1
    for k in free_card:
        n_configs *= int(k)
        if n_configs > cap:
            raise CapacityError(
                f"enumeration over {free.size} free nodes exceeds the cap of {cap} "
                f"configurations; use the Gibbs sampling methods instead"
            )
    strides = np.ones(free.size, np.int64)
    for p in range(free.size - 2, -1, -1):
        strides[p] = strides[p + 1] * free_card[p + 1]
    pos_of = {int(node): p for p, node in enumerate(free)}

    bias_free, const_idx = [], []
    e_ff, e_fc, e_cf = [], [], []
    for i in range(layout.n):
        if i in deleted:
            continue
        if i in pos_of:
            bias_free.append((int(layout.bias_off[i]), pos_of[i]))
        else:
            const_idx.append(int(layout.bias_off[i]) + clamped[i])
    for e, (p, c) in enumerate(layout.edges):
        if c in deleted:
            continue
        woff = int(layout.w_off[e])
        kp = int(layout.k_parent[e])
        if c in pos_of and p in pos_of:
            e_ff.append((woff, kp, pos_of[c], pos_of[p]))
        elif c in pos_of:
            e_fc.append((woff + clamped[p], kp, pos_of[c]))
        elif p in pos_of:
            e_cf.append((woff + clamped[c] * kp, pos_of[p]))
        else:
            const_idx.append(woff + clamped[c] * kp + clamped[p])

    def _arr(rows, width):
        if not rows:
            return np.zeros((0, width), np.int64)
        return np.asarray(rows, np.int64)

    return EnumPlan(
        n_configs=n_configs,
        free_nodes=free,
        free_card=free_card,
        strides=strides,
        bias_free=_arr(bias_free, 2),
        const_idx=np.asarray(const_idx, np.int64) if const_idx else np.zeros(0, np.int64),
        e_ff=_arr(e_ff, 4),
        e_fc=_arr(e_fc, 3),
        e_cf=_arr(e_cf, 2),
    )


def scores(theta: np.ndarray, plan: EnumPlan) -> np.ndarray:
    """Unnormalized log-score of every free configuration, in plan order."""
    return kernels().enum_scores(
        theta, plan.n_configs, plan.free_card, plan.strides,
        plan.bias_free, plan.const_idx, plan.e_ff, plan.e_fc, plan.e_cf,
    )


def log_sum_exp(values: np.ndarray) -> float:
    m = float(np.max(values))
    if not np.isfinite(m):
        return m
    return m + float(np.log(np.sum(np.exp(values - m))))


def probabilities(score_vec: np.ndarray) -> np.ndarray:
    return np.exp(score_vec - log_sum_exp(score_vec))


def add_expectations(plan: EnumPlan, probs: np.ndarray, weight: float, out: np.ndarray) -> None:
    """Add ``weight * E_probs[sufficient statistics]`` into the flat vector."""
    kernels().enum_expectations(
        probs, weight, plan.n_configs, plan.free_card, plan.strides,
        plan.bias_free, plan.const_idx, plan.e_ff, plan.e_fc, plan.e_cf, out,
    )


def states_at(plan: EnumPlan, pos: int, config_idx: np.ndarray | None = None) -> np.ndarray:
    """State of the free node at ``pos`` for the given (default: all) configs."""
    if config_idx is None:
        config_idx = np.arange(plan.n_configs, dtype=np.int64)
    return (config_idx // plan.strides[pos]) % plan.free_card[pos]


def decode_configs(plan: EnumPlan, config_idx: np.ndarray, n_nodes: int,
                   clamped: Mapping[int, int] | None = None) -> np.ndarray:
    """Expand flat config indices to full (len, n_nodes) state rows."""
    out = np.zeros((config_idx.shape[0], n_nodes), np.int64)
    for pos, node in enumerate(plan.free_nodes):
        out[:, node] = states_at(plan, pos, config_idx)
    for node, v in (clamped or {}).items():
        out[:, node] = v
    return out
