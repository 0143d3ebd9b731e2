"""Scalar-loop kernel implementations.

Every function here is written in njit-compatible form: plain loops over
int64/float64 arrays, no Python objects. ``_kernels_numba`` wraps them with
``@njit(cache=True)``; ``_kernels_numpy`` reuses the sequential ones where a
loop is unavoidable (Gibbs) and substitutes vectorized equivalents for the
enumeration-heavy ones.

Shared conventions:

* ``theta`` is the flat parameter vector of a :class:`dcg.layout.ParamLayout`.
* Enumeration plans arrive as packed integer arrays (see dcg.exact):
    - ``bias_free``  (B, 2): [flat offset of the node's bias block, free position]
    - ``const_idx``  (C,)  : fully resolved flat indices added to every score
    - ``e_ff``       (E, 4): [w block offset, k_parent, child position, parent position]
    - ``e_fc``       (E, 3): [w block offset + parent value, k_parent, child position]
    - ``e_cf``       (E, 2): [w block offset + child value * k_parent, parent position]
* Configuration ``c`` of the free nodes decodes as
  ``state[p] = (c // strides[p]) % free_card[p]`` with position 0 most
  significant; this fixed order is also the sampling order.
"""

import numpy as np


def enum_scores(theta, n_cfg, free_card, strides, bias_free, const_idx, e_ff, e_fc, e_cf):
    """Unnormalized log-score of every free-node configuration."""
    const = 0.0
    for t in range(const_idx.shape[0]):
        const += theta[const_idx[t]]
    n_free = free_card.shape[0]
    st = np.empty(n_free, np.int64)
    out = np.empty(n_cfg, np.float64)
    for c in range(n_cfg):
        for p in range(n_free):
            st[p] = (c // strides[p]) % free_card[p]
        s = const
        for t in range(bias_free.shape[0]):
            s += theta[bias_free[t, 0] + st[bias_free[t, 1]]]
        for t in range(e_ff.shape[0]):
            s += theta[e_ff[t, 0] + st[e_ff[t, 2]] * e_ff[t, 1] + st[e_ff[t, 3]]]
        for t in range(e_fc.shape[0]):
            s += theta[e_fc[t, 0] + st[e_fc[t, 2]] * e_fc[t, 1]]
        for t in range(e_cf.shape[0]):
            s += theta[e_cf[t, 0] + st[e_cf[t, 1]]]
        out[c] = s
    return out


def enum_expectations(probs, weight, n_cfg, free_card, strides, bias_free, const_idx,
                      e_ff, e_fc, e_cf, out):
    """Add ``weight * E_probs[feature indicators]`` into the flat vector ``out``."""
    total = 0.0
    for c in range(n_cfg):
        total += probs[c]
    for t in range(const_idx.shape[0]):
        out[const_idx[t]] += weight * total
    n_free = free_card.shape[0]
    st = np.empty(n_free, np.int64)
    for c in range(n_cfg):
        pc = weight * probs[c]
        for p in range(n_free):
            st[p] = (c // strides[p]) % free_card[p]
        for t in range(bias_free.shape[0]):
            out[bias_free[t, 0] + st[bias_free[t, 1]]] += pc
        for t in range(e_ff.shape[0]):
            out[e_ff[t, 0] + st[e_ff[t, 2]] * e_ff[t, 1] + st[e_ff[t, 3]]] += pc
        for t in range(e_fc.shape[0]):
            out[e_fc[t, 0] + st[e_fc[t, 2]] * e_fc[t, 1]] += pc
        for t in range(e_cf.shape[0]):
            out[e_cf[t, 0] + st[e_cf[t, 1]]] += pc


def gibbs_run(theta, card, bias_off,
              in_ptr, in_par, in_kpar, in_woff,
              out_ptr, out_child, out_woff,
              x, node_seq, unif, n_free, burn_sweeps, keep_sweeps, thin, out_samples):
    """Single-site Gibbs chain over the free nodes.

    ``node_seq``/``unif`` are pre-drawn: one node id and one uniform per
    single-site update, ``(burn_sweeps + keep_sweeps) * n_free`` of each.
    Per-node structure arrives as CSR lists: incoming edges (parent id,
    parent cardinality, w block offset) and surviving outgoing edges
    (child id, w block offset). A clamped node never appears in
    ``node_seq`` and keeps its value in ``x`` throughout.

    The new state is drawn by inverse CDF on the local conditional: the
    first state whose cumulative unnormalized mass reaches ``u * total``.
    Returns the number of recorded configurations.
    """
    n = card.shape[0]
    kmax = 0
    for i in range(n):
        if card[i] > kmax:
            kmax = card[i]
    logits = np.empty(kmax, np.float64)
    upd = 0
    kept = 0
    total_sweeps = burn_sweeps + keep_sweeps
    for sw in range(total_sweeps):
        for _step in range(n_free):
            i = node_seq[upd]
            u = unif[upd]
            upd += 1
            k = card[i]
            boff = bias_off[i]
            for s in range(k):
                v = theta[boff + s]
                for t in range(in_ptr[i], in_ptr[i + 1]):
                    v += theta[in_woff[t] + s * in_kpar[t] + x[in_par[t]]]
                for t in range(out_ptr[i], out_ptr[i + 1]):
                    v += theta[out_woff[t] + x[out_child[t]] * k + s]
                logits[s] = v
            mx = logits[0]
            for s in range(1, k):
                if logits[s] > mx:
                    mx = logits[s]
            tot = 0.0
            for s in range(k):
                logits[s] = np.exp(logits[s] - mx)
                tot += logits[s]
            target = u * tot
            acc = 0.0
            pick = k - 1
            for s in range(k):
                acc += logits[s]
                if acc >= target:
                    pick = s
                    break
            x[i] = pick
        if sw >= burn_sweeps and (sw - burn_sweeps) % thin == 0:
            for j in range(n):
                out_samples[kept, j] = x[j]
            kept += 1
    return kept


def pseudo_accumulate(theta, card, bias_off,
                      in_ptr, in_par, in_kpar, in_woff,
                      out_ptr, out_child, out_woff,
                      X, free, grad):
    """Pseudo-likelihood value and gradient over all free (row, site) pairs.

    ``free[d, i]`` marks sites not set by intervention in row ``d``. A site's
    conditional includes its own potential and the potentials of its free
    children; intervened children are excluded row by row. Adds the gradient
    into ``grad`` and returns the summed negative log conditional likelihood.
    """
    m, n = X.shape
    kmax = 0
    for i in range(n):
        if card[i] > kmax:
            kmax = card[i]
    logits = np.empty(kmax, np.float64)
    val = 0.0
    for d in range(m):
        for i in range(n):
            if not free[d, i]:
                continue
            k = card[i]
            boff = bias_off[i]
            for s in range(k):
                v = theta[boff + s]
                for t in range(in_ptr[i], in_ptr[i + 1]):
                    v += theta[in_woff[t] + s * in_kpar[t] + X[d, in_par[t]]]
                for t in range(out_ptr[i], out_ptr[i + 1]):
                    c = out_child[t]
                    if free[d, c]:
                        v += theta[out_woff[t] + X[d, c] * k + s]
                logits[s] = v
            mx = logits[0]
            for s in range(1, k):
                if logits[s] > mx:
                    mx = logits[s]
            tot = 0.0
            for s in range(k):
                tot += np.exp(logits[s] - mx)
            lse = mx + np.log(tot)
            xi = X[d, i]
            val += lse - logits[xi]
            for s in range(k):
                r = np.exp(logits[s] - lse)
                if s == xi:
                    r -= 1.0
                grad[boff + s] += r
                for t in range(in_ptr[i], in_ptr[i + 1]):
                    grad[in_woff[t] + s * in_kpar[t] + X[d, in_par[t]]] += r
                for t in range(out_ptr[i], out_ptr[i + 1]):
                    c = out_child[t]
                    if free[d, c]:
                        grad[out_woff[t] + X[d, c] * k + s] += r
    return val


def softmax_regression_accumulate(theta, k, p_cards, w_off, xi, xp, grad):
    """Locally normalized conditional fit: value and gradient for one node.

    ``theta`` is the node-local vector [bias (k,), one (k, k_j) block per
    candidate parent j]; ``xi`` the node's states over the fitted rows and
    ``xp`` the parent states (rows, parents). Adds the gradient into ``grad``
    and returns the summed negative log conditional likelihood.
    """
    m = xi.shape[0]
    n_par = p_cards.shape[0]
    logits = np.empty(k, np.float64)
    val = 0.0
    for d in range(m):
        for s in range(k):
            v = theta[s]
            for t in range(n_par):
                v += theta[w_off[t] + s * p_cards[t] + xp[d, t]]
            logits[s] = v
        mx = logits[0]
        for s in range(1, k):
            if logits[s] > mx:
                mx = logits[s]
        tot = 0.0
        for s in range(k):
            tot += np.exp(logits[s] - mx)
        lse = mx + np.log(tot)
        target = xi[d]
        val += lse - logits[target]
        for s in range(k):
            r = np.exp(logits[s] - lse)
            if s == target:
                r -= 1.0
            grad[s] += r
            for t in range(n_par):
                grad[w_off[t] + s * p_cards[t] + xp[d, t]] += r
    return val
