"""Pure-numpy kernel builds.

Enumeration and per-site accumulation are vectorized (chunked so memory
stays bounded near the enumeration cap); the Gibbs sweep is inherently
sequential and runs the reference loop from ``_kernels``. Semantics match
``_kernels`` exactly; see that module for argument conventions.
"""

import numpy as np

from ._kernels import gibbs_run  # noqa: F401  (loop version is the fallback)

_CHUNK = 1 << 18


def enum_scores(theta, n_cfg, free_card, strides, bias_free, const_idx, e_ff, e_fc, e_cf):
    const = 0.0
    for t in range(const_idx.shape[0]):
        const += theta[const_idx[t]]
    n_free = free_card.shape[0]
    out = np.empty(n_cfg, np.float64)
    for lo in range(0, n_cfg, _CHUNK):
        hi = min(lo + _CHUNK, n_cfg)
        base = np.arange(lo, hi, dtype=np.int64)
        st = [(base // strides[p]) % free_card[p] for p in range(n_free)]
        s = np.full(hi - lo, const)
        for t in range(bias_free.shape[0]):
            s += theta[bias_free[t, 0] + st[bias_free[t, 1]]]
        for t in range(e_ff.shape[0]):
            s += theta[e_ff[t, 0] + st[e_ff[t, 2]] * e_ff[t, 1] + st[e_ff[t, 3]]]
        for t in range(e_fc.shape[0]):
            s += theta[e_fc[t, 0] + st[e_fc[t, 2]] * e_fc[t, 1]]
        for t in range(e_cf.shape[0]):
            s += theta[e_cf[t, 0] + st[e_cf[t, 1]]]
        out[lo:hi] = s
    return out


def enum_expectations(probs, weight, n_cfg, free_card, strides, bias_free, const_idx,
                      e_ff, e_fc, e_cf, out):
    total = float(probs.sum())
    for t in range(const_idx.shape[0]):
        out[const_idx[t]] += weight * total
    n_free = free_card.shape[0]
    for lo in range(0, n_cfg, _CHUNK):
        hi = min(lo + _CHUNK, n_cfg)
        base = np.arange(lo, hi, dtype=np.int64)
        st = [(base // strides[p]) % free_card[p] for p in range(n_free)]
        pc = weight * probs[lo:hi]
        for t in range(bias_free.shape[0]):
            off, pos = bias_free[t, 0], bias_free[t, 1]
            k = free_card[pos]
            out[off:off + k] += np.bincount(st[pos], weights=pc, minlength=k)
        for t in range(e_ff.shape[0]):
            off, kp, cpos, ppos = e_ff[t]
            kc = free_card[cpos]
            pair = st[cpos] * kp + st[ppos]
            out[off:off + kc * kp] += np.bincount(pair, weights=pc, minlength=kc * kp)
        for t in range(e_fc.shape[0]):
            off, kp, cpos = e_fc[t]
            kc = free_card[cpos]
            out[off:off + kc * kp:kp] += np.bincount(st[cpos], weights=pc, minlength=kc)
        for t in range(e_cf.shape[0]):
            off, ppos = e_cf[t]
            kp = free_card[ppos]
            out[off:off + kp] += np.bincount(st[ppos], weights=pc, minlength=kp)


def pseudo_accumulate(theta, card, bias_off,
                      in_ptr, in_par, in_kpar, in_woff,
                      out_ptr, out_child, out_woff,
                      X, free, grad):
    m, n = X.shape
    val = 0.0
    for i in range(n):
        rows = np.nonzero(free[:, i])[0]
        if rows.size == 0:
            continue
        k = int(card[i])
        logits = np.broadcast_to(theta[bias_off[i]:bias_off[i] + k], (rows.size, k)).copy()
        out_terms = []
        for t in range(in_ptr[i], in_ptr[i + 1]):
            kp = int(in_kpar[t])
            W = theta[in_woff[t]:in_woff[t] + k * kp].reshape(k, kp)
            logits += W[:, X[rows, in_par[t]]].T
        for t in range(out_ptr[i], out_ptr[i + 1]):
            c = int(out_child[t])
            kc = int(card[c])
            W = theta[out_woff[t]:out_woff[t] + kc * k].reshape(kc, k)
            fmask = free[rows, c]
            logits += W[X[rows, c], :] * fmask[:, None]
            out_terms.append((t, c, kc, fmask))
        mx = logits.max(axis=1)
        ex = np.exp(logits - mx[:, None])
        tot = ex.sum(axis=1)
        lse = mx + np.log(tot)
        ar = np.arange(rows.size)
        xi = X[rows, i]
        val += float(np.sum(lse - logits[ar, xi]))
        resid = ex / tot[:, None]
        resid[ar, xi] -= 1.0
        grad[bias_off[i]:bias_off[i] + k] += resid.sum(axis=0)
        for t in range(in_ptr[i], in_ptr[i + 1]):
            kp = int(in_kpar[t])
            xj = X[rows, in_par[t]]
            wg = grad[in_woff[t]:in_woff[t] + k * kp].reshape(k, kp)
            for a in range(kp):
                sel = xj == a
                if sel.any():
                    wg[:, a] += resid[sel].sum(axis=0)
        for t, c, kc, fmask in out_terms:
            xc = X[rows, c]
            wg = grad[out_woff[t]:out_woff[t] + kc * k].reshape(kc, k)
            for a in range(kc):
                sel = (xc == a) & fmask
                if sel.any():
                    wg[a, :] += resid[sel].sum(axis=0)
    return val


def softmax_regression_accumulate(theta, k, p_cards, w_off, xi, xp, grad):
    m = xi.shape[0]
    if m == 0:
        return 0.0
    logits = np.broadcast_to(theta[:k], (m, k)).copy()
    for t in range(p_cards.shape[0]):
        kp = int(p_cards[t])
        W = theta[w_off[t]:w_off[t] + k * kp].reshape(k, kp)
        logits += W[:, xp[:, t]].T
    mx = logits.max(axis=1)
    ex = np.exp(logits - mx[:, None])
    tot = ex.sum(axis=1)
    lse = mx + np.log(tot)
    ar = np.arange(m)
    val = float(np.sum(lse - logits[ar, xi]))
    resid = ex / tot[:, None]
    resid[ar, xi] -= 1.0
    grad[:k] += resid.sum(axis=0)
    for t in range(p_cards.shape[0]):
        kp = int(p_cards[t])
        xj = xp[:, t]
        wg = grad[w_off[t]:w_off[t] + k * kp].reshape(k, kp)
        for a in range(kp):
            sel = xj == a
            if sel.any():
                wg[:, a] += resid[sel].sum(axis=0)
    return val


def warmup() -> None:
    """No compilation needed; present for backend API parity."""
