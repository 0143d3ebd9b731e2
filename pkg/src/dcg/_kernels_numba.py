"""Numba builds of the hot kernels (see _kernels for the semantics)."""

from numba import njit

from . import _kernels as _impl

enum_scores = njit(cache=True)(_impl.enum_scores)
enum_expectations = njit(cache=True)(_impl.enum_expectations)
gibbs_run = njit(cache=True)(_impl.gibbs_run)
pseudo_accumulate = njit(cache=True)(_impl.pseudo_accumulate)
softmax_regression_accumulate = njit(cache=True)(_impl.softmax_regression_accumulate)


def warmup() -> None:
    """Force compilation of every kernel on a minimal problem."""
    import numpy as np

    theta = np.zeros(8)
    free_card = np.array([2], np.int64)
    strides = np.array([1], np.int64)
    bias_free = np.array([[0, 0]], np.int64)
    empty1 = np.zeros(0, np.int64)
    e_ff = np.zeros((0, 4), np.int64)
    e_fc = np.zeros((0, 3), np.int64)
    e_cf = np.zeros((0, 2), np.int64)
    scores = enum_scores(theta, 2, free_card, strides, bias_free, empty1, e_ff, e_fc, e_cf)
    probs = np.full(2, 0.5)
    out = np.zeros(8)
    enum_expectations(probs, 1.0, 2, free_card, strides, bias_free, empty1,
                      e_ff, e_fc, e_cf, out)
    card = np.array([2], np.int64)
    bias_off = np.array([0], np.int64)
    ptr = np.zeros(2, np.int64)
    x = np.zeros(1, np.int64)
    node_seq = np.zeros(2, np.int64)
    unif = np.full(2, 0.5)
    samples = np.zeros((1, 1), np.int64)
    gibbs_run(theta, card, bias_off, ptr, empty1, empty1, empty1,
              ptr, empty1, empty1, x, node_seq, unif, 1, 1, 1, 1, samples)
    X = np.zeros((1, 1), np.int64)
    free = np.ones((1, 1), np.bool_)
    grad = np.zeros(8)
    pseudo_accumulate(theta, card, bias_off, ptr, empty1, empty1, empty1,
                      ptr, empty1, empty1, X, free, grad)
    softmax_regression_accumulate(theta, 2, empty1, empty1,
                                  np.zeros(1, np.int64), np.zeros((1, 0), np.int64), grad)
    del scores
