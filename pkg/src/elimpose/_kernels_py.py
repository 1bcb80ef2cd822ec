"""numpy implementations of the compiled kernels (same signatures)."""

from __future__ import annotations

import numpy as np


def instantiate(L, t_vars, t_deg, t_coef, t_out, mul, mul_off, sizes, out_len):
    L = np.asarray(L, dtype=np.float64)
    m = L.shape[1]
    out = np.zeros(out_len, dtype=np.float64)
    for d in np.unique(t_deg):
        sel = np.nonzero(t_deg == d)[0]
        P = t_coef[sel][:, None].copy()
        for k in range(int(d)):
            Lk = L[t_vars[sel, k]]  # (T, m)
            tab = mul[mul_off[k] : mul_off[k] + sizes[k] * m].reshape(sizes[k], m)
            nxt = np.zeros((sel.size, sizes[k + 1]))
            for v in range(m):
                # i -> i*u_v is injective, so fancy-index += is safe
                nxt[:, tab[:, v]] += P * Lk[:, v : v + 1]
            P = nxt
        idx = t_out[sel][:, None] + np.arange(sizes[d])[None, :]
        np.add.at(out, idx, P)
    return out


def gauss_jordan(A, rel_tol):
    nr, nc = A.shape
    pivots = np.full(nr, -1, dtype=np.int64)
    thresh = rel_tol * (np.abs(A).max() if A.size else 0.0)
    r = 0
    for c in range(nc):
        if r == nr:
            break
        p = r + int(np.argmax(np.abs(A[r:, c])))
        if abs(A[p, c]) <= thresh:
            continue
        if p != r:
            A[[r, p], c:] = A[[p, r], c:]
        A[r, c:] /= A[r, c]
        f = A[:, c].copy()
        f[r] = 0.0
        A[:, c:] -= np.outer(f, A[r, c:])
        A[:, c][np.arange(nr) != r] = 0.0
        pivots[r] = c
        r += 1
    return pivots
