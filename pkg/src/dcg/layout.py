"""Flat packing of bias/weight parameters.

Every fitting and enumeration routine works on a single contiguous float64
vector. A layout fixes the mapping: one bias block per node (length k_i),
then one weight block per edge in edge order, each stored row-major as
(k_child, k_parent) so the flat index of entry (s_child, s_parent) is
``w_off[e] + s_child * k_parent[e] + s_parent``.

The same machinery serves directed edges (parent, child) and undirected
pairs {i, j} stored with child=i, parent=j for i < j.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np


class ParamLayout:
    def __init__(self, card: Sequence[int], edges: Sequence[tuple[int, int]]):
        self.card = np.asarray(card, np.int64)
        self.n = int(self.card.shape[0])
        self.edges = tuple((int(p), int(c)) for p, c in edges)
        self.n_edges = len(self.edges)

        self.bias_off = np.zeros(self.n, np.int64)
        off = 0
        for i in range(self.n):
            self.bias_off[i] = off
            off += int(self.card[i])
        self.n_bias = off

        self.edge_parent = np.array([p for p, _ in self.edges], np.int64)
        self.edge_child = np.array([c for _, c in self.edges], np.int64)
        self.k_parent = self.card[self.edge_parent] if self.n_edges else np.zeros(0, np.int64)
        self.k_child = self.card[self.edge_child] if self.n_edges else np.zeros(0, np.int64)
        self.w_off = np.zeros(self.n_edges, np.int64)
        for e in range(self.n_edges):
            self.w_off[e] = off
            off += int(self.k_child[e] * self.k_parent[e])
        self.dim = off

    def bias_slice(self, i: int) -> slice:
        return slice(int(self.bias_off[i]), int(self.bias_off[i] + self.card[i]))

    def weight_slice(self, e: int) -> slice:
        size = int(self.k_child[e] * self.k_parent[e])
        return slice(int(self.w_off[e]), int(self.w_off[e]) + size)

    def group_slices(self) -> list[slice]:
        """One slice per edge weight block, in edge order."""
        return [self.weight_slice(e) for e in range(self.n_edges)]

    def pack(self, biases: Sequence[np.ndarray], weights: Sequence[np.ndarray]) -> np.ndarray:
        theta = np.empty(self.dim)
        for i in range(self.n):
            theta[self.bias_slice(i)] = biases[i]
        for e in range(self.n_edges):
            theta[self.weight_slice(e)] = np.asarray(weights[e]).ravel()
        return theta

    def unpack(self, theta: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
        biases = [theta[self.bias_slice(i)].copy() for i in range(self.n)]
        weights = [
            theta[self.weight_slice(e)].reshape(int(self.k_child[e]), int(self.k_parent[e])).copy()
            for e in range(self.n_edges)
        ]
        return biases, weights

    def group_norms(self, theta: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n_edges)
        for e in range(self.n_edges):
            out[e] = np.linalg.norm(theta[self.weight_slice(e)])
        return out
