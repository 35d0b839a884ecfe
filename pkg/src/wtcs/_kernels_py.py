"""Pure-numpy kernel implementations.

These are the reference versions of the hot inner-loop primitives; the
compiled module in ``_kernels.pyx`` mirrors them operation for operation so
both backends produce bit-identical results.  All functions expect
C-contiguous float64 input.
"""

import numpy as np

BACKEND_NAME = "python"


def dwt_level(x):
    """One analysis level of the orthonormal 2-D Haar transform.

    ``x`` is a (m, m) array with m even.  Returns (ll, hl, lh, hh), each
    (m/2, m/2).
    """
    a = x[0::2, 0::2]
    b = x[0::2, 1::2]
    c = x[1::2, 0::2]
    d = x[1::2, 1::2]
    ll = (a + b + c + d) * 0.5
    hl = (a - b + c - d) * 0.5
    lh = (a + b - c - d) * 0.5
    hh = (a - b - c + d) * 0.5
    return ll, hl, lh, hh


def idwt_level(ll, hl, lh, hh):
    """Inverse of :func:`dwt_level` (the transform is orthonormal)."""
    m = ll.shape[0]
    x = np.empty((2 * m, 2 * m), dtype=np.float64)
    x[0::2, 0::2] = (ll + hl + lh + hh) * 0.5
    x[0::2, 1::2] = (ll - hl + lh - hh) * 0.5
    x[1::2, 0::2] = (ll + hl - lh - hh) * 0.5
    x[1::2, 1::2] = (ll - hl - lh + hh) * 0.5
    return x


def soft_threshold(r, tau):
    """Elementwise shrinkage sign(r) * max(|r| - tau, 0) for 1-D arrays."""
    return np.sign(r) * np.maximum(np.abs(r) - tau, 0.0)


def group_gather(theta_hf, idx, w):
    """Gather weighted group members: out[g, k] = theta_hf[idx[g, k]] * w[g]."""
    return theta_hf[idx] * w[:, None]


def group_scatter_add(out, idx, w, v):
    """Accumulate weighted group members back: out[idx[g, k]] += w[g] * v[g, k].

    Accumulation is in row-major (g, k) order, matching a sequential loop.
    """
    np.add.at(out, idx.ravel(), (w[:, None] * v).ravel())
    return out


def group_shrink(u, tau):
    """Row-wise Euclidean shrinkage: u_g * max(||u_g|| - tau, 0) / ||u_g||."""
    nrm = np.sqrt(np.sum(u * u, axis=1))
    safe = np.where(nrm > 0.0, nrm, 1.0)
    scale = np.where(nrm > tau, (nrm - tau) / safe, 0.0)
    return u * scale[:, None]
